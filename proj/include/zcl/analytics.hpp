#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "zcl/csv.hpp"
#include "zcl/error.hpp"
#include "zcl/simcache.hpp"
#include "zcl/trace.hpp"

namespace zcl {

/// Half-open observation window [begin_s, end_s).
struct TimeWindow {
    double begin_s = 0.0;
    double end_s = 0.0;

    static TimeWindow from_days(double begin_s, double days) { return {begin_s, begin_s + days * kSecondsPerDay}; }

    /// Smallest window holding every record.
    static TimeWindow covering(std::span<const TraceRecord> records) {
        if (records.empty()) return {};
        double lo = records.front().timestamp_s;
        double hi = lo;
        for (const auto& r : records) {
            lo = std::min(lo, r.timestamp_s);
            hi = std::max(hi, r.timestamp_s);
        }
        return {lo, std::nextafter(hi, std::numeric_limits<double>::infinity())};
    }

    bool empty() const { return !(end_s > begin_s); }
    double days() const { return empty() ? 0.0 : (end_s - begin_s) / kSecondsPerDay; }
    bool contains(double t) const { return t >= begin_s && t < end_s; }
    bool overlaps(const TimeWindow& o) const { return !empty() && !o.empty() && begin_s < o.end_s && o.begin_s < end_s; }

    friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

struct RankedObject {
    std::string object_id;
    std::uint64_t count = 0;
    double first_seen_s = 0.0;

    friend bool operator==(const RankedObject&, const RankedObject&) = default;
};

/// Cacheable objects in descending popularity, with the special points.
///
/// Ties in count are ordered by first-seen time, then object id, so the
/// ranking is a pure function of the per-object (count, first_seen) pairs.
class PopularityProfile {
public:
    PopularityProfile() = default;

    PopularityProfile(std::vector<RankedObject> ranked, std::uint64_t total_requests, TimeWindow window,
                      double window_days)
        : ranked_(std::move(ranked)), total_requests_(total_requests), window_(window), window_days_(window_days) {
        std::sort(ranked_.begin(), ranked_.end(), [](const RankedObject& a, const RankedObject& b) {
            if (a.count != b.count) return a.count > b.count;
            if (a.first_seen_s != b.first_seen_s) return a.first_seen_s < b.first_seen_s;
            return a.object_id < b.object_id;
        });
        for (const auto& r : ranked_) cacheable_requests_ += r.count;
        special_point_ = static_cast<std::uint64_t>(
            std::partition_point(ranked_.begin(), ranked_.end(), [](const RankedObject& r) { return r.count >= 2; }) -
            ranked_.begin());
    }

    const std::vector<RankedObject>& ranked() const { return ranked_; }
    /// p: unique cacheable objects.
    std::uint64_t unique_objects() const { return ranked_.size(); }
    /// M: largest rank whose count is at least 2 (0 when none).
    std::uint64_t special_point() const { return special_point_; }
    /// k: cacheable requests.
    std::uint64_t cacheable_requests() const { return cacheable_requests_; }
    /// K: all requests in the window, cacheable or not.
    std::uint64_t total_requests() const { return total_requests_; }
    const TimeWindow& window() const { return window_; }
    /// T_st in days.
    double window_days() const { return window_days_; }
    bool empty() const { return ranked_.empty() && total_requests_ == 0; }

    /// Sum of counts over ranks 1..M, by direct summation.
    std::uint64_t top_sum() const {
        std::uint64_t s = 0;
        for (std::uint64_t i = 0; i < special_point_; ++i) s += ranked_[i].count;
        return s;
    }

    friend bool operator==(const PopularityProfile&, const PopularityProfile&) = default;

private:
    std::vector<RankedObject> ranked_;
    std::uint64_t total_requests_ = 0;
    std::uint64_t cacheable_requests_ = 0;
    std::uint64_t special_point_ = 0;
    TimeWindow window_;
    double window_days_ = 0.0;
};

/// Counts requests inside `window`; T_st is the window length.
inline PopularityProfile build_popularity_profile(std::span<const TraceRecord> records, const TimeWindow& window) {
    std::unordered_map<std::string, std::size_t> slot;
    std::vector<RankedObject> objects;
    std::uint64_t total = 0;
    for (const auto& r : records) {
        if (!window.contains(r.timestamp_s)) continue;
        ++total;
        if (!r.cacheable) continue;
        auto [it, inserted] = slot.try_emplace(r.object_id, objects.size());
        if (inserted) {
            objects.push_back({r.object_id, 0, r.timestamp_s});
        }
        auto& obj = objects[it->second];
        ++obj.count;
        obj.first_seen_s = std::min(obj.first_seen_s, r.timestamp_s);
    }
    if (objects.empty()) throw EmptyProfileError("no cacheable requests inside the observation window");
    return PopularityProfile(std::move(objects), total, window, window.days());
}

inline PopularityProfile build_popularity_profile(std::span<const TraceRecord> records) {
    return build_popularity_profile(records, TimeWindow::covering(records));
}

/// Re-ranks the union of two profiles over disjoint windows.
inline PopularityProfile merge_profiles(const PopularityProfile& a, const PopularityProfile& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (a.window().overlaps(b.window())) throw DomainError("cannot merge profiles with overlapping windows");
    std::unordered_map<std::string, std::size_t> slot;
    std::vector<RankedObject> merged;
    merged.reserve(a.ranked().size() + b.ranked().size());
    for (const auto* profile : {&a, &b}) {
        for (const auto& r : profile->ranked()) {
            auto [it, inserted] = slot.try_emplace(r.object_id, merged.size());
            if (inserted) {
                merged.push_back(r);
            } else {
                merged[it->second].count += r.count;
                merged[it->second].first_seen_s = std::min(merged[it->second].first_seen_s, r.first_seen_s);
            }
        }
    }
    TimeWindow window;
    if (a.window().empty()) {
        window = b.window();
    } else if (b.window().empty()) {
        window = a.window();
    } else {
        window = {std::min(a.window().begin_s, b.window().begin_s), std::max(a.window().end_s, b.window().end_s)};
    }
    return PopularityProfile(std::move(merged), a.total_requests() + b.total_requests(), window,
                             a.window_days() + b.window_days());
}

inline void write_profile_csv(std::ostream& out, const PopularityProfile& profile) {
    out << "rank,object_id,count\n";
    std::string line;
    std::uint64_t rank = 0;
    for (const auto& r : profile.ranked()) {
        line = std::to_string(++rank);
        line += ',';
        csv::append_field(line, r.object_id);
        line += ',';
        line += std::to_string(r.count);
        line += '\n';
        out << line;
    }
}

// ---------------------------------------------------------------------------
// Exponent and cacheable fraction
// ---------------------------------------------------------------------------

/// alpha = 1 - 2M / (sum of the top-M counts).
inline double alpha_from_top_sum(double m, double top_sum) {
    if (!(m > 0.0)) throw DomainError("Zipf exponent undefined: no object was requested twice (M = 0)");
    if (!(top_sum > 0.0)) throw DomainError("Zipf exponent undefined: non-positive top-M request sum");
    return 1.0 - 2.0 * m / top_sum;
}

/// alpha = 1 - 2M / (k - p + M), the same estimator through the special points.
inline double alpha_from_special_points(double m, double p, double k) {
    return alpha_from_top_sum(m, k - p + m);
}

inline double estimate_alpha(const PopularityProfile& profile) {
    return alpha_from_special_points(static_cast<double>(profile.special_point()),
                                     static_cast<double>(profile.unique_objects()),
                                     static_cast<double>(profile.cacheable_requests()));
}

/// p_c = k / (nu_out * T_st).
inline double compute_cacheable_fraction(double cacheable_requests, double requests_per_day, double window_days) {
    const double denom = requests_per_day * window_days;
    if (!(denom > 0.0)) throw DomainError("cacheable fraction needs nu_out * T_st > 0");
    return cacheable_requests / denom;
}

/// C_growth = (alpha_2 - alpha_1) / ln(T2 / T1).
inline double alpha_growth_constant(double alpha_1, double window_1_days, double alpha_2, double window_2_days) {
    if (!(window_1_days > 0.0 && window_2_days > 0.0)) throw DomainError("observation windows must be positive");
    if (window_1_days == window_2_days) throw DomainError("alpha growth needs two different windows");
    return (alpha_2 - alpha_1) / std::log(window_2_days / window_1_days);
}

// ---------------------------------------------------------------------------
// Renewal observables
// ---------------------------------------------------------------------------

struct RenewalObservables {
    double delta_h = 0.0;  // hit-ratio gap attributed to document renewal
    double delta_k = 0.0;  // updating requests
    double k_r = 0.0;
    double alpha_r = 0.0;
};

inline RenewalObservables renewal_observables(double k, double p, double m, double total_requests, double hit_ratio) {
    if (!(hit_ratio > 0.0 && hit_ratio <= 1.0)) throw DomainError("hit ratio must lie in (0,1]");
    const double hk = hit_ratio * total_requests;
    if (!(hk > 0.0)) throw DomainError("renewal observables need H*K > 0");
    RenewalObservables out;
    out.delta_h = (k - p + m - hk) / total_requests;
    out.delta_k = out.delta_h * total_requests;
    out.k_r = hk + p - m;
    out.alpha_r = 1.0 - 2.0 * m / hk;
    return out;
}

inline RenewalObservables renewal_observables(const PopularityProfile& profile, double hit_ratio) {
    if (profile.empty()) throw EmptyProfileError("renewal observables of an empty profile");
    return renewal_observables(static_cast<double>(profile.cacheable_requests()),
                               static_cast<double>(profile.unique_objects()),
                               static_cast<double>(profile.special_point()),
                               static_cast<double>(profile.total_requests()), hit_ratio);
}

// ---------------------------------------------------------------------------
// Lifetimes
// ---------------------------------------------------------------------------

struct SampleStats {
    std::size_t samples = 0;
    std::optional<double> mean_days;
    std::optional<double> stderr_days;  // only with two or more samples

    static SampleStats of(std::span<const double> values) {
        SampleStats s;
        s.samples = values.size();
        if (values.empty()) return s;
        double sum = 0.0;
        for (double v : values) sum += v;
        const double mean = sum / static_cast<double>(values.size());
        s.mean_days = mean;
        if (values.size() >= 2) {
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            const double var = ss / static_cast<double>(values.size() - 1);
            s.stderr_days = std::sqrt(var / static_cast<double>(values.size()));
        }
        return s;
    }
};

/// t_u: residence of evicted objects requested exactly once over the stream;
/// T_eff: the same for objects requested exactly twice.
struct LifetimeStats {
    SampleStats single;  // t_u
    SampleStats twice;   // T_eff
};

/// Classifies evictions by each object's total cacheable request count in
/// `records` and averages residence (evict - insert) in days.
inline LifetimeStats lifetimes_from_evictions(std::span<const TraceRecord> records,
                                              std::span<const EvictionRecord> evictions) {
    std::unordered_map<std::string, std::uint64_t> popularity;
    for (const auto& r : records) {
        if (r.cacheable) ++popularity[r.object_id];
    }
    std::vector<double> once;
    std::vector<double> twice;
    for (const auto& e : evictions) {
        auto it = popularity.find(e.object_id);
        if (it == popularity.end()) continue;
        const double residence = (e.evict_ts - e.insert_ts) / kSecondsPerDay;
        if (it->second == 1) once.push_back(residence);
        if (it->second == 2) twice.push_back(residence);
    }
    return {SampleStats::of(once), SampleStats::of(twice)};
}

/// Replays the stream through the simulator and measures lifetimes.
inline LifetimeStats measure_lifetimes(std::span<const TraceRecord> records, const CacheConfig& config,
                                       const ChangeSchedule* changes = nullptr) {
    const auto result = simulate(records, config, changes);
    return lifetimes_from_evictions(records, result.evictions);
}

// ---------------------------------------------------------------------------
// Primary measurement summary
// ---------------------------------------------------------------------------

struct MeasurementSummary {
    double requests_per_day_in = 0.0;   // nu_int
    double requests_per_day_out = 0.0;  // nu_out
    double kbps_in = 0.0;
    double kbps_out = 0.0;
    double hit_ratio = 0.0;
    double byte_hit_ratio = 0.0;
    double mean_origin_kbyte = 0.0;  // E(S)
    double mean_cache_kbyte = 0.0;   // E(C)
    double window_days = 0.0;
};

inline MeasurementSummary summarize(const SimulationResult& r) {
    return {r.requests_per_day_in(), r.requests_per_day_out(), r.kbps_in(),         r.kbps_out(),
            r.hit_ratio(),           r.byte_hit_ratio(),       r.mean_origin_kbyte(), r.mean_cache_kbyte(),
            r.window_days};
}

/// Summary of a proxy log using the hit/miss flag the proxy recorded.
inline MeasurementSummary summarize_log(std::span<const TraceRecord> records, const TimeWindow& window) {
    SimulationResult tally;
    for (const auto& r : records) {
        if (!window.contains(r.timestamp_s)) continue;
        if (!r.origin_hit) throw FormatError("log summary needs records with a recorded hit/miss flag");
        ++tally.requests;
        tally.bytes_requested += r.size_bytes;
        if (*r.origin_hit) {
            ++tally.hits;
            tally.bytes_hit += r.size_bytes;
        }
    }
    tally.window_days = window.days();
    return summarize(tally);
}

}  // namespace zcl
