#pragma once

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <optional>
#include <string>
#include <variant>

#include "zcl/error.hpp"
#include "zcl/quadrature.hpp"

namespace zcl {

/// A non-negative event rate. Stored per day; per-second inputs must be tagged
/// explicitly through the named constructor.
class Rate {
public:
    constexpr Rate() = default;

    static constexpr Rate per_day(double value) { return Rate(value); }
    static constexpr Rate per_second(double value) { return Rate(value * 86400.0); }

    constexpr double per_day() const { return per_day_; }
    constexpr double per_second() const { return per_day_ / 86400.0; }

    friend constexpr bool operator==(Rate, Rate) = default;

private:
    constexpr explicit Rate(double per_day) : per_day_(per_day) {}
    double per_day_ = 0.0;
};

}  // namespace zcl

namespace zcl::model {

namespace detail {

inline void require_exponent(double alpha, const char* name) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError(std::string(name) + " must lie in (0,1), got " + std::to_string(alpha));
    }
}

}  // namespace detail

/// C = integral of x^-alpha over [1, n], in closed form.
inline double zipf_integral(double alpha, double n) {
    detail::require_exponent(alpha, "alpha");
    if (!(n >= 1.0)) throw DomainError("universe size must be >= 1");
    return (std::pow(n, 1.0 - alpha) - 1.0) / (1.0 - alpha);
}

/// Normalization A such that the continuous Zipf density A x^-alpha integrates
/// to one over [1, p].
inline double zipf_normalization(double alpha, double p) {
    if (alpha == 1.0) throw DomainError("alpha == 1 (harmonic case) is not supported");
    detail::require_exponent(alpha, "alpha");
    if (!(p >= 2.0)) throw DomainError("universe size p must be >= 2");
    return (1.0 - alpha) / (std::pow(p, 1.0 - alpha) - 1.0);
}

/// Zipf-like popularity law theta_i = A / i^alpha over ranks [1, p].
struct ZipfLaw {
    double alpha = 0.0;
    double universe = 0.0;
    double normalization = 0.0;

    static ZipfLaw normalized(double alpha, double universe) {
        return {alpha, universe, zipf_normalization(alpha, universe)};
    }

    double probability(double rank) const { return normalization / std::pow(rank, alpha); }

    /// Continuous mass between ranks `from` and `to`.
    double mass(double from, double to) const {
        return normalization * (std::pow(to, 1.0 - alpha) - std::pow(from, 1.0 - alpha)) / (1.0 - alpha);
    }
};

// ---------------------------------------------------------------------------
// Rank-dependent renewal
// ---------------------------------------------------------------------------

/// Document change rate as a function of popularity rank, summarized by the
/// exponent pair (alpha, alpha_r) measured over a window of tst_days.
struct RenewalModel {
    double alpha = 0.0;
    double alpha_r = 0.0;
    double tst_days = 0.0;
    double universe = 0.0;

    void validate() const {
        detail::require_exponent(alpha, "alpha");
        detail::require_exponent(alpha_r, "alpha_r");
        if (alpha_r > alpha) throw DomainError("alpha_r must not exceed alpha");
        if (!(tst_days > 0.0)) throw DomainError("observation window must be positive");
        if (!(universe >= 1.0)) throw DomainError("universe size must be >= 1");
    }

    double delta_alpha() const { return alpha - alpha_r; }
};

/// mu at relative rank q = i/p, as the difference of the ideal and renewed
/// popularity curves per unit window. Units: 1/day.
inline double mu_at_quantile(double alpha, double alpha_r, double tst_days, double quantile) {
    if (!(quantile > 0.0 && quantile <= 1.0)) throw DomainError("quantile must lie in (0,1]");
    if (!(tst_days > 0.0)) throw DomainError("observation window must be positive");
    // (1/q)^alpha - (1/q)^alpha_r without cancellation as q -> 1.
    const double log_inv = -std::log(quantile);
    return std::exp(alpha_r * log_inv) * std::expm1((alpha - alpha_r) * log_inv) / tst_days;
}

/// Same quantity through the delta-alpha factorization.
inline double mu_at_quantile_factored(double alpha, double alpha_r, double tst_days, double quantile) {
    if (!(quantile > 0.0 && quantile <= 1.0)) throw DomainError("quantile must lie in (0,1]");
    if (!(tst_days > 0.0)) throw DomainError("observation window must be positive");
    const double log_q = std::log(quantile);
    return -std::expm1((alpha - alpha_r) * log_q) / std::exp(alpha * log_q) / tst_days;
}

inline double mu_of_rank(const RenewalModel& m, double rank) {
    m.validate();
    if (!(rank >= 1.0 && rank <= m.universe)) {
        throw DomainError("rank " + std::to_string(rank) + " outside [1, " + std::to_string(m.universe) + "]");
    }
    return mu_at_quantile(m.alpha, m.alpha_r, m.tst_days, rank / m.universe);
}

inline double mu_of_rank_factored(const RenewalModel& m, double rank) {
    m.validate();
    if (!(rank >= 1.0 && rank <= m.universe)) {
        throw DomainError("rank " + std::to_string(rank) + " outside [1, " + std::to_string(m.universe) + "]");
    }
    return mu_at_quantile_factored(m.alpha, m.alpha_r, m.tst_days, rank / m.universe);
}

inline constexpr double kUnpopularQuantile = 0.25;
inline constexpr double kPopularQuantile = 0.01;

// ---------------------------------------------------------------------------
// Steady-state (Wolman) hit ratio
// ---------------------------------------------------------------------------

struct ConstantChangeRate {
    Rate mu;
};

struct TwoValuedChangeRate {
    Rate popular;
    Rate unpopular;
    double popular_cutoff_rank = 1.0;  // ranks <= cutoff use `popular`
};

using ChangeRate = std::variant<ConstantChangeRate, TwoValuedChangeRate, RenewalModel>;

struct WolmanParams {
    double universe = 0.0;
    double alpha = 0.0;
    Rate aggregate_rate;  // lambda * N
    ChangeRate change = ConstantChangeRate{};
};

/// Change rate (1/day) at continuous rank x. A RenewalModel is evaluated
/// over the params' universe regardless of its own `universe` field.
inline double change_rate_at(const WolmanParams& params, double x) {
    return std::visit(
        [&](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, ConstantChangeRate>) {
                return c.mu.per_day();
            } else if constexpr (std::is_same_v<T, TwoValuedChangeRate>) {
                return x <= c.popular_cutoff_rank ? c.popular.per_day() : c.unpopular.per_day();
            } else {
                return mu_at_quantile(c.alpha, c.alpha_r, c.tst_days, std::min(1.0, x / params.universe));
            }
        },
        params.change);
}

struct WolmanResult {
    double hit_ratio = 0.0;     // C_N
    double zipf_integral = 0.0; // C
    double error_estimate = 0.0;
    std::size_t subdivisions = 0;
};

/// Aggregate object hit ratio over cacheable objects. Integrated in log-rank
/// u = ln x, where the integrand is smooth, split at a two-valued cutoff.
inline WolmanResult wolman_evaluate(const WolmanParams& params, double rel_tol = 1e-8,
                                    std::size_t max_subdivisions = 1'000'000) {
    if (!(params.universe >= 2.0)) throw DomainError("universe size n must be >= 2");
    detail::require_exponent(params.alpha, "alpha");
    const double lambda_n = params.aggregate_rate.per_day();
    if (!(lambda_n > 0.0)) throw DomainError("aggregate request rate must be positive");
    std::visit(
        [](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, ConstantChangeRate>) {
                if (c.mu.per_day() < 0.0) throw DomainError("change rate must be >= 0");
            } else if constexpr (std::is_same_v<T, TwoValuedChangeRate>) {
                if (c.popular.per_day() < 0.0 || c.unpopular.per_day() < 0.0) {
                    throw DomainError("change rates must be >= 0");
                }
            } else {
                detail::require_exponent(c.alpha, "alpha");
                detail::require_exponent(c.alpha_r, "alpha_r");
                if (c.alpha_r > c.alpha) throw DomainError("alpha_r must not exceed alpha");
                if (!(c.tst_days > 0.0)) throw DomainError("observation window must be positive");
            }
        },
        params.change);

    const double alpha = params.alpha;
    const double c = zipf_integral(alpha, params.universe);
    auto integrand = [&](double u) {
        const double x = std::exp(u);
        const double xa = std::pow(x, alpha);
        const double mu = change_rate_at(params, x);
        return x / (c * xa) / (1.0 + mu * c * xa / lambda_n);
    };

    const double upper = std::log(params.universe);
    WolmanResult result;
    result.zipf_integral = c;
    auto integrate = [&](double a, double b) {
        if (b <= a) return;
        const auto q = adaptive_simpson(integrand, a, b, rel_tol, max_subdivisions, 1e-16);
        result.hit_ratio += q.value;
        result.error_estimate += q.error_estimate;
        result.subdivisions += q.subdivisions;
    };
    const auto* two = std::get_if<TwoValuedChangeRate>(&params.change);
    if (two && two->popular_cutoff_rank > 1.0 && two->popular_cutoff_rank < params.universe) {
        const double cut = std::log(two->popular_cutoff_rank);
        integrate(0.0, cut);
        integrate(cut, upper);
    } else {
        integrate(0.0, upper);
    }
    result.hit_ratio = std::clamp(result.hit_ratio, 0.0, 1.0);
    return result;
}

inline double wolman_hit_ratio(const WolmanParams& params) { return wolman_evaluate(params).hit_ratio; }

// ---------------------------------------------------------------------------
// Hit-ratio bounds and scaling
// ---------------------------------------------------------------------------

/// Upper bound on the steady-state hit ratio when the tail p - M of the
/// universe is requested only once.
inline double ideal_hit_ratio(double alpha) {
    detail::require_exponent(alpha, "alpha");
    return std::pow(2.0, (alpha - 1.0) / alpha);
}

inline double ideal_hit_ratio_with_renewal(double alpha, double alpha_r) {
    if (alpha_r == 1.0) throw DomainError("alpha_r == 1 is not supported");
    detail::require_exponent(alpha_r, "alpha_r");
    return ideal_hit_ratio(alpha) * (1.0 - alpha) / (1.0 - alpha_r);
}

/// H = p_c * integral_1^{S_k} A x^-exponent dx with A normalized over [1, p].
/// Pass alpha for the ideal form or alpha_r for the renewal-aware form.
inline double expected_hit_ratio(double cacheable_fraction, double exponent, double universe, double kernel_objects) {
    if (!(cacheable_fraction >= 0.0 && cacheable_fraction <= 1.0)) throw DomainError("p_c must lie in [0,1]");
    if (!(kernel_objects >= 1.0 && kernel_objects <= universe)) throw DomainError("kernel size must lie in [1, p]");
    return cacheable_fraction * ZipfLaw::normalized(exponent, universe).mass(1.0, kernel_objects);
}

/// Power-law extrapolation of a measured hit ratio to another cache size.
inline double hit_scaling(double hit_ratio, double size_from, double size_to, double alpha) {
    if (!(size_from > 0.0 && size_to > 0.0)) throw DomainError("cache sizes must be positive");
    return hit_ratio * std::pow(size_to / size_from, 1.0 - alpha);
}

/// Kernel size in objects from hit ratio, outgoing request rate (per day) and
/// kernel lifetime T_eff (days).
inline double kernel_size(double alpha, double hit_ratio, double requests_per_day, double t_eff_days) {
    if (alpha < 0.0 || hit_ratio < 0.0 || requests_per_day < 0.0 || t_eff_days < 0.0) {
        throw DomainError("kernel_size inputs must be non-negative");
    }
    return (1.0 - alpha) * hit_ratio / 2.0 * requests_per_day * t_eff_days;
}

struct KernelAccessoryRatio {
    double analytic = 0.0;
    std::optional<double> empirical;  // only when M and p are known
};

/// S_k/S_u from the exponent alone, and from the special points when given.
/// The two agree only when p/M == 2^(1/alpha).
inline KernelAccessoryRatio kernel_accessory_ratio(double alpha, double t_eff_days, double t_u_days,
                                                   std::optional<double> m = std::nullopt,
                                                   std::optional<double> p = std::nullopt) {
    detail::require_exponent(alpha, "alpha");
    if (!(t_u_days > 0.0)) throw DomainError("t_u must be positive");
    KernelAccessoryRatio out;
    out.analytic = t_eff_days / ((std::pow(2.0, 1.0 / alpha) - 1.0) * t_u_days);
    if (m.has_value() != p.has_value()) throw DomainError("M and p must be given together");
    if (m) {
        if (!(*m > 0.0) || *m >= *p) throw DomainError("kernel_accessory_ratio requires 0 < M < p");
        out.empirical = (*m / (*p - *m)) * (t_eff_days / t_u_days);
    }
    return out;
}

struct SpecialPointResiduals {
    double at_m = 0.0;  // A k_R / M^alpha_r - 2
    double at_p = 0.0;  // A k_R / p^alpha_r - 1
};

inline SpecialPointResiduals special_point_residuals(double normalization, double k_r, double m, double p,
                                                     double alpha_r) {
    if (!(normalization > 0.0 && k_r > 0.0 && m > 0.0 && p > 0.0)) {
        throw DomainError("special_point_residuals inputs must be positive");
    }
    const double scale = normalization * k_r;
    return {scale / std::pow(m, alpha_r) - 2.0, scale / std::pow(p, alpha_r) - 1.0};
}

}  // namespace zcl::model
