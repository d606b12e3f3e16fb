#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "zcl/csv.hpp"
#include "zcl/error.hpp"
#include "zcl/model.hpp"
#include "zcl/trace.hpp"

namespace zcl {

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform in [0, 1) from the top 53 bits; independent of the standard
// library's distribution implementations so streams are portable.
inline double unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

template <typename Engine>
double uniform(Engine& engine) {
    return unit(engine());
}

template <typename Engine>
double exponential(Engine& engine, double rate) {
    return -std::log1p(-uniform(engine)) / rate;
}

}  // namespace rng

/// Zipf(alpha) sampler over ranks 1..n using Vose's alias method.
class ZipfSampler {
public:
    ZipfSampler(std::uint64_t n, double alpha) : probability_(n), alias_(n) {
        if (n == 0) throw DomainError("Zipf universe must be non-empty");
        if (n > std::numeric_limits<std::uint32_t>::max()) throw DomainError("Zipf universe too large");
        if (!(alpha >= 0.0)) throw DomainError("Zipf exponent must be non-negative");
        std::vector<double> scaled(n);
        double total = 0.0;
        for (std::uint64_t i = 0; i < n; ++i) {
            scaled[i] = std::pow(static_cast<double>(i + 1), -alpha);
            total += scaled[i];
        }
        std::vector<std::uint32_t> small;
        std::vector<std::uint32_t> large;
        for (std::uint64_t i = 0; i < n; ++i) {
            scaled[i] *= static_cast<double>(n) / total;
            (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
        }
        while (!small.empty() && !large.empty()) {
            const auto s = small.back();
            small.pop_back();
            const auto l = large.back();
            probability_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (auto i : large) {
            probability_[i] = 1.0;
            alias_[i] = i;
        }
        for (auto i : small) {
            probability_[i] = 1.0;
            alias_[i] = i;
        }
    }

    std::uint64_t size() const { return probability_.size(); }

    /// Returns a 1-based rank.
    template <typename Engine>
    std::uint64_t operator()(Engine& engine) const {
        const auto column = static_cast<std::uint64_t>(rng::uniform(engine) * static_cast<double>(size()));
        const auto col = std::min<std::uint64_t>(column, size() - 1);
        return (rng::uniform(engine) < probability_[col] ? col : alias_[col]) + 1;
    }

private:
    std::vector<double> probability_;
    std::vector<std::uint32_t> alias_;
};

// ---------------------------------------------------------------------------
// Ground-truth document changes
// ---------------------------------------------------------------------------

/// Per-object sorted change timestamps (seconds).
class ChangeSchedule {
public:
    void add(const std::string& object_id, double timestamp_s) { events_[object_id].push_back(timestamp_s); }

    void finalize() {
        for (auto& [id, times] : events_) std::sort(times.begin(), times.end());
    }

    /// True when the object changed in (after_s, upto_s].
    bool changed_between(const std::string& object_id, double after_s, double upto_s) const {
        auto it = events_.find(object_id);
        if (it == events_.end()) return false;
        const auto& times = it->second;
        auto pos = std::upper_bound(times.begin(), times.end(), after_s);
        return pos != times.end() && *pos <= upto_s;
    }

    std::size_t event_count() const {
        std::size_t n = 0;
        for (const auto& [id, times] : events_) n += times.size();
        return n;
    }

    std::size_t event_count(const std::string& object_id) const {
        auto it = events_.find(object_id);
        return it == events_.end() ? 0 : it->second.size();
    }

    const std::unordered_map<std::string, std::vector<double>>& events() const { return events_; }

    /// CSV `object_id,change_timestamp_s`, objects in lexicographic order.
    void write_csv(std::ostream& out) const {
        std::vector<const std::string*> ids;
        ids.reserve(events_.size());
        for (const auto& [id, times] : events_) ids.push_back(&id);
        std::sort(ids.begin(), ids.end(), [](const auto* a, const auto* b) { return *a < *b; });
        out << "object_id,change_timestamp_s\n";
        std::string line;
        for (const auto* id : ids) {
            for (double t : events_.at(*id)) {
                line.clear();
                csv::append_field(line, *id);
                line += ',';
                line += csv::format_double(t);
                line += '\n';
                out << line;
            }
        }
        if (!out) throw IoError("write error on change schedule");
    }

    static ChangeSchedule read_csv(std::istream& in) {
        std::string line;
        if (!std::getline(in, line)) throw FormatError("change schedule CSV: missing header");
        const auto header = csv::split_line(line);
        if (header.size() < 2 || header[0] != "object_id" || header[1] != "change_timestamp_s") {
            throw FormatError("change schedule CSV: expected header 'object_id,change_timestamp_s'");
        }
        ChangeSchedule out;
        while (std::getline(in, line)) {
            if (line.empty() || line == "\r") continue;
            const auto f = csv::split_line(line);
            if (f.size() != 2) throw FormatError("change schedule CSV: expected 2 fields");
            out.add(f[0], csv::parse_double(f[1], "change_timestamp_s"));
        }
        out.finalize();
        return out;
    }

private:
    std::unordered_map<std::string, std::vector<double>> events_;
};

// ---------------------------------------------------------------------------
// Workload specification
// ---------------------------------------------------------------------------

struct NoRenewal {};

struct TwoValuedRenewal {
    Rate popular;
    Rate unpopular;
    std::uint64_t popular_cutoff_rank = 1;
};

/// mu(i) follows the rank-dependent renewal law with exponents (alpha, alpha_r)
/// over a reference window tst_days.
struct RankDependentRenewal {
    double alpha_r = 0.0;
    double tst_days = 0.0;
};

using RenewalSpec = std::variant<NoRenewal, TwoValuedRenewal, RankDependentRenewal>;

struct LognormalSizes {
    double mean_bytes = 13.0 * 1024.0;
    double sigma = 1.0;
};

struct SyntheticWorkloadSpec {
    std::uint64_t universe_size = 100'000;
    double zipf_alpha = 0.8;
    std::uint64_t clients = 100;
    Rate per_client_rate = Rate::per_day(100.0);
    double horizon_days = 1.0;
    double cacheable_fraction = 1.0;
    RenewalSpec renewal = NoRenewal{};
    LognormalSizes sizes;
    std::uint64_t seed = 1;

    void validate() const {
        if (universe_size == 0) throw DomainError("universe size must be positive");
        if (!(zipf_alpha > 0.0 && zipf_alpha < 1.0)) throw DomainError("zipf alpha must lie in (0,1)");
        if (clients == 0) throw DomainError("client count must be positive");
        if (!(per_client_rate.per_day() > 0.0)) throw DomainError("per-client rate must be positive");
        if (!(horizon_days > 0.0)) throw DomainError("horizon must be positive");
        if (!(cacheable_fraction > 0.0 && cacheable_fraction <= 1.0)) {
            throw DomainError("cacheable fraction must lie in (0,1]");
        }
        if (!(sizes.mean_bytes >= 1.0) || !(sizes.sigma >= 0.0)) throw DomainError("invalid size model");
        if (const auto* two = std::get_if<TwoValuedRenewal>(&renewal)) {
            if (two->popular.per_day() < 0.0 || two->unpopular.per_day() < 0.0) {
                throw DomainError("change rates must be non-negative");
            }
        }
        if (const auto* rd = std::get_if<RankDependentRenewal>(&renewal)) {
            if (!(rd->alpha_r > 0.0 && rd->alpha_r < 1.0)) throw DomainError("alpha_r must lie in (0,1)");
            if (rd->alpha_r > zipf_alpha) throw DomainError("alpha_r must not exceed alpha");
            if (!(rd->tst_days > 0.0)) throw DomainError("renewal window must be positive");
        }
    }

    std::uint64_t uncacheable_universe() const { return std::max<std::uint64_t>(1, universe_size / 10); }

    /// Ground-truth change rate (1/day) of the cacheable object at `rank`.
    double change_rate(std::uint64_t rank) const {
        return std::visit(
            [&](const auto& r) -> double {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, NoRenewal>) {
                    return 0.0;
                } else if constexpr (std::is_same_v<T, TwoValuedRenewal>) {
                    return rank <= r.popular_cutoff_rank ? r.popular.per_day() : r.unpopular.per_day();
                } else {
                    return model::mu_at_quantile(zipf_alpha, r.alpha_r, r.tst_days,
                                                 static_cast<double>(rank) / static_cast<double>(universe_size));
                }
            },
            renewal);
    }
};

inline std::string cacheable_object_id(std::uint64_t rank) { return "o" + std::to_string(rank); }
inline std::string uncacheable_object_id(std::uint64_t rank) { return "u" + std::to_string(rank); }

/// Size of a synthetic object, a pure function of (seed, universe, rank).
inline std::uint64_t synthetic_object_size(const SyntheticWorkloadSpec& spec, bool cacheable, std::uint64_t rank) {
    const std::uint64_t key = spec.seed * 0x100000001b3ULL ^ (rank << 1) ^ (cacheable ? 0ULL : 1ULL);
    const std::uint64_t h1 = rng::splitmix64(key);
    const std::uint64_t h2 = rng::splitmix64(h1);
    const double u1 = 1.0 - rng::unit(h1);  // (0, 1]
    const double u2 = rng::unit(h2);
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    const double mu = std::log(spec.sizes.mean_bytes) - 0.5 * spec.sizes.sigma * spec.sizes.sigma;
    const double bytes = std::exp(mu + spec.sizes.sigma * z);
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(bytes)));
}

struct SyntheticTrace {
    std::vector<TraceRecord> records;
    ChangeSchedule changes;
};

/// Merged Poisson request stream of total rate lambda*N over the horizon.
/// Cacheable requests draw a rank from Zipf(alpha) over n objects; the rest go
/// to a disjoint universe of n/10 uncacheable objects with the same exponent.
/// Cacheable object i changes as a Poisson process of rate mu(i).
inline SyntheticTrace generate_synthetic_trace(const SyntheticWorkloadSpec& spec) {
    spec.validate();
    SyntheticTrace out;

    const double rate_per_s = spec.per_client_rate.per_second() * static_cast<double>(spec.clients);
    const double horizon_s = spec.horizon_days * kSecondsPerDay;
    const ZipfSampler cacheable(spec.universe_size, spec.zipf_alpha);
    const std::optional<ZipfSampler> uncacheable =
        spec.cacheable_fraction < 1.0 ? std::optional<ZipfSampler>(std::in_place, spec.uncacheable_universe(),
                                                                   spec.zipf_alpha)
                                      : std::nullopt;

    std::mt19937_64 engine(spec.seed);
    out.records.reserve(static_cast<std::size_t>(std::min(rate_per_s * horizon_s * 1.01 + 16.0, 5e8)));
    double t = 0.0;
    for (;;) {
        t += rng::exponential(engine, rate_per_s);
        if (t >= horizon_s) break;
        TraceRecord r;
        r.timestamp_s = t;
        const auto client = std::min<std::uint64_t>(
            static_cast<std::uint64_t>(rng::uniform(engine) * static_cast<double>(spec.clients)), spec.clients - 1);
        r.client_id = "c" + std::to_string(client + 1);
        const bool is_cacheable = rng::uniform(engine) < spec.cacheable_fraction;
        const std::uint64_t rank = is_cacheable ? cacheable(engine) : (*uncacheable)(engine);
        r.cacheable = is_cacheable;
        r.object_id = is_cacheable ? cacheable_object_id(rank) : uncacheable_object_id(rank);
        r.size_bytes = synthetic_object_size(spec, is_cacheable, rank);
        out.records.push_back(std::move(r));
    }

    if (!std::holds_alternative<NoRenewal>(spec.renewal)) {
        std::mt19937_64 change_engine(rng::splitmix64(spec.seed ^ 0x5eed'c4a9'9e00'0001ULL));
        for (std::uint64_t rank = 1; rank <= spec.universe_size; ++rank) {
            const double mu_per_s = spec.change_rate(rank) / kSecondsPerDay;
            if (!(mu_per_s > 0.0)) continue;
            double tc = 0.0;
            for (;;) {
                tc += rng::exponential(change_engine, mu_per_s);
                if (tc >= horizon_s) break;
                out.changes.add(cacheable_object_id(rank), tc);
            }
        }
        out.changes.finalize();
    }
    return out;
}

}  // namespace zcl
