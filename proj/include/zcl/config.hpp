#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>

#include "zcl/csv.hpp"
#include "zcl/error.hpp"
#include "zcl/model.hpp"
#include "zcl/simcache.hpp"
#include "zcl/synth.hpp"

namespace zcl {

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Flat `key = value` text. Blank lines and lines starting with '#' are
/// ignored. Every key must be consumed; leftovers are reported as typos.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in) {
        KeyValueConfig cfg;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto text = detail::trim(line);
            if (text.empty() || text.front() == '#') continue;
            const auto eq = text.find('=');
            if (eq == std::string_view::npos) {
                throw FormatError("config line " + std::to_string(line_no) + ": expected key=value");
            }
            const std::string key(detail::trim(text.substr(0, eq)));
            const std::string value(detail::trim(text.substr(eq + 1)));
            if (key.empty()) throw FormatError("config line " + std::to_string(line_no) + ": empty key");
            if (!cfg.values_.emplace(key, value).second) {
                throw FormatError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
            }
        }
        return cfg;
    }

    static KeyValueConfig parse_file(const std::string& path) {
        auto in = open_input(path);
        return parse(in);
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::optional<std::string> get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        used_.insert(key);
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        return get(key).value_or(fallback);
    }

    double get_double(const std::string& key, double fallback) const {
        auto v = get(key);
        return v ? csv::parse_double(*v, key) : fallback;
    }

    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
        auto v = get(key);
        return v ? csv::parse_uint(*v, key) : fallback;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto v = get(key);
        return v ? csv::parse_bool(*v, key) : fallback;
    }

    /// Rates accept an optional unit suffix: "/day" (default) or "/s".
    Rate get_rate(const std::string& key, Rate fallback) const {
        auto v = get(key);
        return v ? parse_rate(*v, key) : fallback;
    }

    static Rate parse_rate(std::string_view text, std::string_view what) {
        if (text.ends_with("/s")) return Rate::per_second(csv::parse_double(text.substr(0, text.size() - 2), what));
        if (text.ends_with("/day")) return Rate::per_day(csv::parse_double(text.substr(0, text.size() - 4), what));
        return Rate::per_day(csv::parse_double(text, what));
    }

    void require_all_used() const {
        for (const auto& [key, value] : values_) {
            if (!used_.count(key)) throw FormatError("unknown config key '" + key + "'");
        }
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

/// Capacity matching `days` of the trace's average request traffic: bytes when
/// byte accounting is on, request count otherwise.
inline std::uint64_t capacity_for_days(std::span<const TraceRecord> records, double days, bool byte_accounting) {
    if (records.empty()) throw DomainError("cannot size a cache from an empty trace");
    const double span_days = (records.back().timestamp_s - records.front().timestamp_s) / kSecondsPerDay;
    if (!(span_days > 0.0)) throw DomainError("trace spans zero time; cannot size a cache in days");
    double volume = 0.0;
    for (const auto& r : records) volume += byte_accounting ? static_cast<double>(r.size_bytes) : 1.0;
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(volume / span_days * days));
}

/// Keys: capacity (integer, or "inf"), capacity_days (sized from `records`),
/// policy, kernel_fraction, managing_capacity, byte_accounting,
/// occupancy_interval_s.
inline CacheConfig cache_config_from(const KeyValueConfig& kv, std::span<const TraceRecord> records = {}) {
    CacheConfig c;
    c.policy = parse_policy(kv.get_string("policy", "LRU"));
    c.kernel_fraction = kv.get_double("kernel_fraction", c.kernel_fraction);
    c.managing_capacity = kv.get_uint("managing_capacity", 0);
    c.byte_accounting = kv.get_bool("byte_accounting", true);
    c.occupancy_interval_s = kv.get_double("occupancy_interval_s", c.occupancy_interval_s);
    const auto capacity = kv.get("capacity");
    const auto days = kv.get("capacity_days");
    if (capacity && days) throw FormatError("give either capacity or capacity_days, not both");
    if (capacity) {
        c.capacity = (*capacity == "inf" || *capacity == "unlimited") ? kUnlimitedCapacity
                                                                      : csv::parse_uint(*capacity, "capacity");
    } else if (days) {
        c.capacity = capacity_for_days(records, csv::parse_double(*days, "capacity_days"), c.byte_accounting);
    }
    c.validate();
    return c;
}

/// Keys mirror SyntheticWorkloadSpec; renewal is one of none, two-valued,
/// rank-dependent.
inline SyntheticWorkloadSpec workload_spec_from(const KeyValueConfig& kv) {
    SyntheticWorkloadSpec s;
    s.universe_size = kv.get_uint("universe_size", s.universe_size);
    s.zipf_alpha = kv.get_double("alpha", s.zipf_alpha);
    s.clients = kv.get_uint("clients", s.clients);
    s.per_client_rate = kv.get_rate("per_client_rate", s.per_client_rate);
    s.horizon_days = kv.get_double("horizon_days", s.horizon_days);
    s.cacheable_fraction = kv.get_double("cacheable_fraction", s.cacheable_fraction);
    s.sizes.mean_bytes = kv.get_double("size_mean_bytes", s.sizes.mean_bytes);
    s.sizes.sigma = kv.get_double("size_sigma", s.sizes.sigma);
    s.seed = kv.get_uint("seed", s.seed);
    const auto renewal = kv.get_string("renewal", "none");
    if (renewal == "none") {
        s.renewal = NoRenewal{};
    } else if (renewal == "two-valued") {
        s.renewal = TwoValuedRenewal{kv.get_rate("mu_popular", Rate{}), kv.get_rate("mu_unpopular", Rate{}),
                                     kv.get_uint("popular_cutoff_rank", 1)};
    } else if (renewal == "rank-dependent") {
        s.renewal = RankDependentRenewal{kv.get_double("alpha_r", 0.0), kv.get_double("renewal_tst_days", 0.0)};
    } else {
        throw FormatError("unknown renewal model '" + renewal + "'");
    }
    s.validate();
    return s;
}

}  // namespace zcl
