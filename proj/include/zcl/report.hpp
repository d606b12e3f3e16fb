#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "zcl/analytics.hpp"
#include "zcl/csv.hpp"
#include "zcl/model.hpp"
#include "zcl/simcache.hpp"

namespace zcl::report {

using nlohmann::json;

namespace detail {

inline json number_or_null(std::optional<double> v) {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
}

}  // namespace detail

/// Cache size in days of incoming (origin) traffic: bytes with byte
/// accounting, requests otherwise. Empty when unlimited or nothing was fetched.
inline std::optional<double> relative_size_days(const SimulationResult& r) {
    if (r.config.unlimited() || !(r.window_days > 0.0)) return std::nullopt;
    const double per_day = r.config.byte_accounting ? static_cast<double>(r.bytes_origin()) / r.window_days
                                                    : r.requests_per_day_in();
    if (!(per_day > 0.0)) return std::nullopt;
    return static_cast<double>(r.config.capacity) / per_day;
}

inline json config_json(const CacheConfig& c) {
    return {{"capacity", c.unlimited() ? json(nullptr) : json(c.capacity)},
            {"policy", std::string(to_string(c.policy))},
            {"kernel_fraction", c.kernel_fraction},
            {"managing_capacity", c.managing_capacity},
            {"byte_accounting", c.byte_accounting}};
}

/// Primary results row. Rates are requests/day and Kbit/s; H and H^B are
/// fractions; E(C), E(S) are KByte; T_st is days.
inline json table1_json(const SimulationResult& r) {
    return {{"S_eff/nu_int", detail::number_or_null(relative_size_days(r))},
            {"nu_out", r.requests_per_day_out()},
            {"nu_int", r.requests_per_day_in()},
            {"H", r.hit_ratio()},
            {"nu^B_out", r.kbps_out()},
            {"nu^B_int", r.kbps_in()},
            {"H^B", r.byte_hit_ratio()},
            {"E(C)", r.mean_cache_kbyte()},
            {"E(S)", r.mean_origin_kbyte()},
            {"T_st", r.window_days}};
}

inline json counts_json(const SimulationResult& r) {
    return {{"requests", r.requests},           {"cacheable_requests", r.cacheable_requests},
            {"hits", r.hits},                   {"misses", r.misses},
            {"stale_misses", r.stale_misses},   {"uncacheable", r.uncacheable},
            {"bypasses", r.bypasses},           {"bytes_requested", r.bytes_requested},
            {"bytes_hit", r.bytes_hit},         {"evictions", r.evictions.size()}};
}

inline json lifetimes_json(const LifetimeStats& l) {
    return {{"t_u", detail::number_or_null(l.single.mean_days)},
            {"t_u_stderr", detail::number_or_null(l.single.stderr_days)},
            {"t_u_samples", l.single.samples},
            {"T_eff", detail::number_or_null(l.twice.mean_days)},
            {"T_eff_stderr", detail::number_or_null(l.twice.stderr_days)},
            {"T_eff_samples", l.twice.samples}};
}

inline std::optional<double> try_alpha(const PopularityProfile& p) {
    if (p.special_point() == 0) return std::nullopt;
    return estimate_alpha(p);
}

inline std::optional<double> cacheable_fraction(const PopularityProfile& p) {
    if (!(p.window_days() > 0.0) || p.total_requests() == 0) return std::nullopt;
    const double nu_out = static_cast<double>(p.total_requests()) / p.window_days();
    return compute_cacheable_fraction(static_cast<double>(p.cacheable_requests()), nu_out, p.window_days());
}

/// Parameters row: special points, exponent, cacheable fraction and, when a
/// replay was done, cache size and lifetimes.
inline json table2_json(const PopularityProfile& p, const SimulationResult* replay = nullptr,
                        const LifetimeStats* lifetimes = nullptr) {
    json row = {{"alpha", detail::number_or_null(try_alpha(p))},
                {"p_c", detail::number_or_null(cacheable_fraction(p))},
                {"M", p.special_point()},
                {"p", p.unique_objects()},
                {"k", p.cacheable_requests()},
                {"K", p.total_requests()},
                {"T_st", p.window_days()}};
    if (replay) {
        row["S_eff/nu_int"] = detail::number_or_null(relative_size_days(*replay));
        row["S_eff"] = replay->config.unlimited() ? json(nullptr) : json(replay->config.capacity);
        row["H"] = replay->hit_ratio();
    }
    if (lifetimes) {
        const auto l = lifetimes_json(*lifetimes);
        for (auto it = l.begin(); it != l.end(); ++it) row[it.key()] = it.value();
    }
    return row;
}

inline json renewal_json(const RenewalObservables& r) {
    return {{"delta_H", r.delta_h}, {"delta_k", r.delta_k}, {"k_R", r.k_r}, {"alpha_R", r.alpha_r}};
}

// ---------------------------------------------------------------------------
// Figure data
// ---------------------------------------------------------------------------

/// One simulated cache size, as read back from a simulate result document.
struct FigurePoint {
    double relative_size = 0.0;
    double hit_ratio = 0.0;
    double byte_hit_ratio = 0.0;
    std::optional<double> t_u, t_u_stderr, t_eff, t_eff_stderr;
    std::optional<double> unique_objects, alpha, alpha_r;
};

inline std::optional<double> optional_number(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

inline FigurePoint figure_point_from(const json& doc) {
    FigurePoint pt;
    const auto& t1 = doc.at("table1");
    const auto rel = optional_number(t1, "S_eff/nu_int");
    if (!rel) throw FormatError("result has no finite S_eff/nu_int (unlimited cache?)");
    pt.relative_size = *rel;
    pt.hit_ratio = t1.at("H").get<double>();
    pt.byte_hit_ratio = t1.at("H^B").get<double>();
    if (doc.contains("lifetimes")) {
        const auto& l = doc.at("lifetimes");
        pt.t_u = optional_number(l, "t_u");
        pt.t_u_stderr = optional_number(l, "t_u_stderr");
        pt.t_eff = optional_number(l, "T_eff");
        pt.t_eff_stderr = optional_number(l, "T_eff_stderr");
    }
    if (doc.contains("profile")) {
        const auto& pr = doc.at("profile");
        pt.unique_objects = optional_number(pr, "p");
        pt.alpha = optional_number(pr, "alpha");
        if (pr.contains("renewal")) pt.alpha_r = optional_number(pr.at("renewal"), "alpha_R");
    }
    return pt;
}

inline void sort_by_size(std::vector<FigurePoint>& points) {
    std::stable_sort(points.begin(), points.end(),
                     [](const FigurePoint& a, const FigurePoint& b) { return a.relative_size < b.relative_size; });
}

namespace detail {

inline std::string cell(std::optional<double> v) { return v ? csv::format_double(*v) : std::string(); }

}  // namespace detail

/// Lifetimes against relative cache size.
inline void write_lifetime_figure(std::ostream& out, std::span<const FigurePoint> points) {
    out << "S_eff/nu_int,t_u,t_u_stderr,T_eff,T_eff_stderr\n";
    for (const auto& p : points) {
        out << csv::format_double(p.relative_size) << ',' << detail::cell(p.t_u) << ','
            << detail::cell(p.t_u_stderr) << ',' << detail::cell(p.t_eff) << ',' << detail::cell(p.t_eff_stderr)
            << '\n';
    }
}

/// Hit ratios against relative cache size with the power-law prediction
/// anchored at the smallest size.
inline void write_hit_ratio_figure(std::ostream& out, std::span<const FigurePoint> points, double overlay_alpha) {
    out << "S_eff/nu_int,H,H^B,H_power_law\n";
    if (points.empty()) return;
    const auto anchor = *std::min_element(points.begin(), points.end(), [](const auto& a, const auto& b) {
        return a.relative_size < b.relative_size;
    });
    for (const auto& p : points) {
        const double predicted = model::hit_scaling(anchor.hit_ratio, anchor.relative_size, p.relative_size,
                                                    overlay_alpha);
        out << csv::format_double(p.relative_size) << ',' << csv::format_double(p.hit_ratio) << ','
            << csv::format_double(p.byte_hit_ratio) << ',' << csv::format_double(predicted) << '\n';
    }
}

/// log10 rank against log10 count for the ideal curve (p/i)^alpha and the
/// renewal-limited curve (p/i)^alpha_r, sampled on `points` log-spaced ranks.
/// When measured counts are given they are added as a third series.
inline void write_renewal_figure(std::ostream& out, double p, double alpha, double alpha_r,
                                 std::span<const RankedObject> measured = {}, std::size_t points = 50) {
    if (!(p >= 1.0)) throw DomainError("renewal figure needs p >= 1");
    out << "log_rank,log_count_ideal,log_count_real";
    if (!measured.empty()) out << ",log_count_measured";
    out << '\n';
    const double top = std::log10(p);
    double last_rank = 0.0;
    for (std::size_t j = 0; j < points; ++j) {
        const double lr = points == 1 ? 0.0 : top * static_cast<double>(j) / static_cast<double>(points - 1);
        const double rank = std::round(std::pow(10.0, lr));
        if (rank == last_rank) continue;
        last_rank = rank;
        const double rel = p / rank;
        out << csv::format_double(std::log10(rank)) << ',' << csv::format_double(alpha * std::log10(rel)) << ','
            << csv::format_double(alpha_r * std::log10(rel));
        if (!measured.empty()) {
            const auto idx = static_cast<std::size_t>(rank) - 1;
            if (idx < measured.size()) {
                out << ',' << csv::format_double(std::log10(static_cast<double>(measured[idx].count)));
            } else {
                out << ',';
            }
        }
        out << '\n';
    }
}

}  // namespace zcl::report
