#pragma once

#include <algorithm>
#include <cstdint>
#include <future>
#include <limits>
#include <list>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "zcl/csv.hpp"
#include "zcl/error.hpp"
#include "zcl/synth.hpp"
#include "zcl/trace.hpp"

namespace zcl {

inline constexpr std::uint64_t kUnlimitedCapacity = std::numeric_limits<std::uint64_t>::max();

enum class Policy { Lru, ZipfConstruction };

inline std::string_view to_string(Policy p) { return p == Policy::Lru ? "LRU" : "ZIPF_CONSTRUCTION"; }

inline Policy parse_policy(std::string_view text) {
    if (text == "LRU" || text == "lru") return Policy::Lru;
    if (text == "ZIPF_CONSTRUCTION" || text == "zipf_construction" || text == "zipf") return Policy::ZipfConstruction;
    throw FormatError("unknown cache policy '" + std::string(text) + "'");
}

struct CacheConfig {
    // Bytes when byte_accounting is on, otherwise a number of objects.
    std::uint64_t capacity = kUnlimitedCapacity;
    Policy policy = Policy::Lru;
    // Share of the capacity given to the kernel (ZIPF_CONSTRUCTION only); the
    // accessory part gets the rest.
    double kernel_fraction = 1.0 / 3.0;
    // Maximum number of retained statistics entries. 0 means "default" in
    // simulate() and "unbounded" when handed straight to a Simulator.
    std::size_t managing_capacity = 0;
    bool byte_accounting = true;
    double occupancy_interval_s = 3600.0;

    bool unlimited() const { return capacity == kUnlimitedCapacity; }

    void validate() const {
        if (capacity == 0) throw DomainError("cache capacity must be positive");
        if (!(kernel_fraction > 0.0 && kernel_fraction < 1.0)) throw DomainError("kernel_fraction must lie in (0,1)");
        if (!(occupancy_interval_s > 0.0)) throw DomainError("occupancy interval must be positive");
    }

    std::uint64_t kernel_capacity() const {
        if (unlimited()) return kUnlimitedCapacity;
        if (policy == Policy::Lru) return capacity;
        return static_cast<std::uint64_t>(kernel_fraction * static_cast<double>(capacity));
    }

    std::uint64_t accessory_capacity() const {
        if (unlimited()) return kUnlimitedCapacity;
        if (policy == Policy::Lru) return 0;
        return capacity - kernel_capacity();
    }
};

/// Fills a zero managing_capacity with ten times the number of objects the
/// cache is expected to hold on this trace.
inline CacheConfig resolve_config(CacheConfig config, std::span<const TraceRecord> records) {
    config.validate();
    if (config.managing_capacity != 0 || config.unlimited()) return config;
    double expected_objects = static_cast<double>(config.capacity);
    if (config.byte_accounting) {
        double bytes = 0.0;
        std::size_t n = 0;
        for (const auto& r : records) {
            if (!r.cacheable) continue;
            bytes += static_cast<double>(r.size_bytes);
            ++n;
        }
        const double mean = n > 0 ? bytes / static_cast<double>(n) : 1.0;
        expected_objects = static_cast<double>(config.capacity) / mean;
    }
    config.managing_capacity = static_cast<std::size_t>(std::max(16.0, std::ceil(10.0 * expected_objects)));
    return config;
}

enum class Outcome { Hit, Miss, StaleMiss, Uncacheable, Bypass };

inline std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::Hit: return "hit";
        case Outcome::Miss: return "miss";
        case Outcome::StaleMiss: return "stale";
        case Outcome::Uncacheable: return "uncacheable";
        case Outcome::Bypass: return "bypass";
    }
    return "?";
}

enum class Part { None, Kernel, Accessory };

struct EvictionRecord {
    std::string object_id;
    double insert_ts = 0.0;
    double evict_ts = 0.0;
    std::uint64_t count = 0;  // requests for the object seen up to the eviction

    friend bool operator==(const EvictionRecord&, const EvictionRecord&) = default;
};

struct OccupancySample {
    double timestamp_s = 0.0;
    std::uint64_t kernel = 0;
    std::uint64_t accessory = 0;
    std::size_t managing_entries = 0;

    friend bool operator==(const OccupancySample&, const OccupancySample&) = default;
};

struct SimulationResult {
    CacheConfig config;

    std::uint64_t requests = 0;
    std::uint64_t cacheable_requests = 0;
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t stale_misses = 0;
    std::uint64_t uncacheable = 0;
    std::uint64_t bypasses = 0;
    std::uint64_t bytes_requested = 0;
    std::uint64_t bytes_hit = 0;
    double first_ts = 0.0;
    double last_ts = 0.0;
    double window_days = 0.0;

    std::vector<EvictionRecord> evictions;
    std::vector<OccupancySample> occupancy;

    std::uint64_t origin_fetches() const { return requests - hits; }
    std::uint64_t bytes_origin() const { return bytes_requested - bytes_hit; }

    double hit_ratio() const { return requests ? static_cast<double>(hits) / static_cast<double>(requests) : 0.0; }
    double byte_hit_ratio() const {
        return bytes_requested ? static_cast<double>(bytes_hit) / static_cast<double>(bytes_requested) : 0.0;
    }
    /// E(S): mean size of documents fetched from the origin, KByte.
    double mean_origin_kbyte() const {
        return origin_fetches() ? static_cast<double>(bytes_origin()) / static_cast<double>(origin_fetches()) / 1024.0
                                : 0.0;
    }
    /// E(C): mean size of documents served from the cache, KByte.
    double mean_cache_kbyte() const {
        return hits ? static_cast<double>(bytes_hit) / static_cast<double>(hits) / 1024.0 : 0.0;
    }
    /// nu_out: user request stream, requests/day.
    double requests_per_day_out() const { return window_days > 0 ? static_cast<double>(requests) / window_days : 0.0; }
    /// nu_int: stream forwarded to the origin, requests/day.
    double requests_per_day_in() const {
        return window_days > 0 ? static_cast<double>(origin_fetches()) / window_days : 0.0;
    }
    double kbps_out() const {
        return window_days > 0 ? static_cast<double>(bytes_requested) * 8.0 / 1000.0 / (window_days * kSecondsPerDay)
                               : 0.0;
    }
    double kbps_in() const {
        return window_days > 0 ? static_cast<double>(bytes_origin()) * 8.0 / 1000.0 / (window_days * kSecondsPerDay)
                               : 0.0;
    }
};

struct StepOutcome {
    Outcome outcome = Outcome::Miss;
    Part part = Part::None;  // where the object resides after the event
};

struct ObjectView {
    Part part = Part::None;
    bool has_statistics = false;
    std::uint64_t count = 0;           // retained request count
    std::uint64_t total_requests = 0;  // never reset
    double insert_ts = 0.0;
    double last_fetch_ts = 0.0;
    double last_request_ts = 0.0;
};

/// Event-ordered cache state machine for either policy.
///
/// ZIPF_CONSTRUCTION keeps three parts: an accessory FIFO for objects seen
/// once, a kernel for repeatedly requested objects evicted by minimum count
/// then least-recent request, and a managing table of request statistics that
/// outlives residency. A returning object with retained statistics goes
/// straight into the kernel.
class Simulator {
public:
    explicit Simulator(CacheConfig config, const ChangeSchedule* changes = nullptr)
        : config_(config), changes_(changes) {
        config_.validate();
        result_.config = config_;
        kernel_cap_ = config_.kernel_capacity();
        accessory_cap_ = config_.accessory_capacity();
    }

    StepOutcome step(const TraceRecord& r) {
        if (result_.requests > 0 && r.timestamp_s < result_.last_ts) {
            throw FormatError("records are not time ordered at t=" + std::to_string(r.timestamp_s));
        }
        if (result_.requests == 0) {
            result_.first_ts = r.timestamp_s;
            next_sample_ts_ = r.timestamp_s;
        }
        while (r.timestamp_s >= next_sample_ts_) {
            sample(next_sample_ts_);
            next_sample_ts_ += config_.occupancy_interval_s;
        }
        result_.last_ts = r.timestamp_s;
        ++result_.requests;
        ++seq_;
        result_.bytes_requested += r.size_bytes;

        if (!r.cacheable) {
            ++result_.uncacheable;
            return {Outcome::Uncacheable, Part::None};
        }
        ++result_.cacheable_requests;
        const std::uint32_t id = intern(r.object_id);
        auto& st = objects_[id];
        ++st.total_requests;
        const double now = r.timestamp_s;
        const bool resident = st.part != Part::None;
        const bool stale = resident && changes_ && changes_->changed_between(ids_[id], st.last_fetch_ts, now);

        StepOutcome out;
        if (resident) {
            out.outcome = stale ? Outcome::StaleMiss : Outcome::Hit;
            if (stale) st.last_fetch_ts = now;
        } else {
            out.outcome = Outcome::Miss;
        }

        if (config_.policy == Policy::Lru) {
            step_lru(id, r, out);
        } else {
            step_zipf(id, r, out);
        }
        auto& after = objects_[id];
        after.last_request_ts = now;
        after.last_seq = seq_;
        if (config_.policy == Policy::ZipfConstruction && after.has_stats && after.part == Part::None) {
            ghosts_.emplace(seq_, id);
        }
        enforce_managing_capacity();

        out.part = objects_[id].part;
        switch (out.outcome) {
            case Outcome::Hit:
                ++result_.hits;
                result_.bytes_hit += r.size_bytes;
                break;
            case Outcome::Miss: ++result_.misses; break;
            case Outcome::StaleMiss: ++result_.stale_misses; break;
            case Outcome::Bypass: ++result_.bypasses; break;
            case Outcome::Uncacheable: break;
        }
        return out;
    }

    std::optional<ObjectView> inspect(std::string_view object_id) const {
        auto it = index_.find(std::string(object_id));
        if (it == index_.end()) return std::nullopt;
        const auto& st = objects_[it->second];
        return ObjectView{st.part,         st.has_stats,   st.count,          st.total_requests,
                          st.insert_ts,    st.last_fetch_ts, st.last_request_ts};
    }

    std::uint64_t kernel_occupancy() const { return kernel_used_; }
    std::uint64_t accessory_occupancy() const { return accessory_used_; }
    std::size_t managing_entries() const { return managing_entries_; }
    const CacheConfig& config() const { return config_; }

    /// Closes the run. window_days defaults to the span of observed timestamps.
    SimulationResult finish(std::optional<double> window_days = std::nullopt) {
        if (result_.requests > 0) sample(result_.last_ts);
        result_.window_days = window_days.value_or((result_.last_ts - result_.first_ts) / kSecondsPerDay);
        return std::move(result_);
    }

private:
    struct ObjectState {
        std::uint64_t size = 1;
        std::uint64_t count = 0;
        std::uint64_t total_requests = 0;
        std::uint64_t last_seq = 0;
        double insert_ts = 0.0;
        double last_fetch_ts = 0.0;
        double last_request_ts = 0.0;
        Part part = Part::None;
        bool has_stats = false;
        std::list<std::uint32_t>::iterator pos;
    };

    using KernelKey = std::tuple<std::uint64_t, std::uint64_t, std::uint32_t>;  // (count, last_seq, id)

    std::uint32_t intern(const std::string& object_id) {
        auto [it, inserted] = index_.try_emplace(object_id, static_cast<std::uint32_t>(ids_.size()));
        if (inserted) {
            ids_.push_back(object_id);
            objects_.emplace_back();
        }
        return it->second;
    }

    std::uint64_t footprint(const TraceRecord& r) const { return config_.byte_accounting ? r.size_bytes : 1; }

    void record_eviction(std::uint32_t id, double now) {
        const auto& st = objects_[id];
        result_.evictions.push_back({ids_[id], st.insert_ts, now, st.total_requests});
    }

    // LRU keeps the whole capacity in one recency list; `kernel_used_` holds
    // its occupancy.
    void step_lru(std::uint32_t id, const TraceRecord& r, StepOutcome& out) {
        auto& st = objects_[id];
        st.count = st.total_requests;
        if (st.part != Part::None) {
            recency_.splice(recency_.begin(), recency_, st.pos);
            return;
        }
        const std::uint64_t size = footprint(r);
        if (size > kernel_cap_) {
            out.outcome = Outcome::Bypass;
            return;
        }
        while (kernel_cap_ - kernel_used_ < size) {
            const std::uint32_t victim = recency_.back();
            recency_.pop_back();
            kernel_used_ -= objects_[victim].size;
            objects_[victim].part = Part::None;
            record_eviction(victim, r.timestamp_s);
        }
        st.size = size;
        st.part = Part::Kernel;
        st.insert_ts = r.timestamp_s;
        st.last_fetch_ts = r.timestamp_s;
        recency_.push_front(id);
        st.pos = recency_.begin();
        kernel_used_ += size;
    }

    void step_zipf(std::uint32_t id, const TraceRecord& r, StepOutcome& out) {
        const double now = r.timestamp_s;
        auto& st = objects_[id];
        if (st.part == Part::Kernel) {
            kernel_.erase(KernelKey{st.count, st.last_seq, id});
            ++st.count;
            kernel_.emplace(st.count, seq_, id);
            return;
        }
        if (st.part == Part::Accessory) {
            // Promotion on a repeat request; the residence continues.
            accessory_.erase(st.pos);
            accessory_used_ -= st.size;
            st.part = Part::None;
            ++st.count;
            if (!insert_kernel(id, now)) {
                record_eviction(id, now);
                ghosts_.emplace(seq_, id);
            }
            return;
        }

        // Non-resident: either a returning object with retained statistics or
        // a first-ever request.
        const std::uint64_t size = footprint(r);
        const bool returning = st.has_stats && st.count >= 1;
        if (st.has_stats) ghosts_.erase({st.last_seq, id});
        if (!st.has_stats) {
            st.has_stats = true;
            st.count = 0;
            ++managing_entries_;
        }
        ++st.count;
        st.size = size;
        st.insert_ts = now;
        st.last_fetch_ts = now;
        if (returning) {
            if (!insert_kernel(id, now)) out.outcome = Outcome::Bypass;
        } else {
            if (size > accessory_cap_) {
                out.outcome = Outcome::Bypass;
                return;
            }
            while (accessory_cap_ - accessory_used_ < size) {
                const std::uint32_t victim = accessory_.front();
                accessory_.pop_front();
                auto& v = objects_[victim];
                accessory_used_ -= v.size;
                v.part = Part::None;
                record_eviction(victim, now);
                ghosts_.emplace(v.last_seq, victim);
            }
            accessory_.push_back(id);
            st.pos = std::prev(accessory_.end());
            st.part = Part::Accessory;
            accessory_used_ += size;
        }
    }

    // Returns false when the object cannot fit in the kernel at all.
    bool insert_kernel(std::uint32_t id, double now) {
        auto& st = objects_[id];
        if (st.size > kernel_cap_) return false;
        while (kernel_cap_ - kernel_used_ < st.size) {
            const auto victim_key = *kernel_.begin();
            kernel_.erase(kernel_.begin());
            const std::uint32_t victim = std::get<2>(victim_key);
            auto& v = objects_[victim];
            kernel_used_ -= v.size;
            v.part = Part::None;
            record_eviction(victim, now);
            ghosts_.emplace(v.last_seq, victim);
        }
        kernel_.emplace(st.count, seq_, id);
        st.part = Part::Kernel;
        kernel_used_ += st.size;
        return true;
    }

    void enforce_managing_capacity() {
        if (config_.policy != Policy::ZipfConstruction || config_.managing_capacity == 0) return;
        while (managing_entries_ > config_.managing_capacity && !ghosts_.empty()) {
            const auto [seq, id] = *ghosts_.begin();
            ghosts_.erase(ghosts_.begin());
            auto& st = objects_[id];
            st.has_stats = false;
            st.count = 0;
            --managing_entries_;
        }
    }

    void sample(double ts) {
        result_.occupancy.push_back({ts, kernel_used_, accessory_used_, managing_entries_});
    }

    CacheConfig config_;
    const ChangeSchedule* changes_;
    std::uint64_t kernel_cap_ = 0;
    std::uint64_t accessory_cap_ = 0;

    std::unordered_map<std::string, std::uint32_t> index_;
    std::vector<std::string> ids_;
    std::vector<ObjectState> objects_;

    std::list<std::uint32_t> recency_;    // LRU, front = most recent
    std::list<std::uint32_t> accessory_;  // FIFO, front = oldest insertion
    std::set<KernelKey> kernel_;
    std::set<std::pair<std::uint64_t, std::uint32_t>> ghosts_;  // non-resident stats by last request

    std::uint64_t kernel_used_ = 0;
    std::uint64_t accessory_used_ = 0;
    std::size_t managing_entries_ = 0;
    std::uint64_t seq_ = 0;
    double next_sample_ts_ = 0.0;
    SimulationResult result_;
};

inline SimulationResult simulate(std::span<const TraceRecord> records, const CacheConfig& config,
                                 const ChangeSchedule* changes = nullptr,
                                 std::optional<double> window_days = std::nullopt) {
    if (!is_time_ordered(records)) throw FormatError("simulate: records are not time ordered");
    Simulator sim(resolve_config(config, records), changes);
    for (const auto& r : records) sim.step(r);
    return sim.finish(window_days);
}

/// One result per configuration over the same stream, in input order. Up to
/// `threads` runs execute concurrently.
inline std::vector<SimulationResult> compare_policies(std::span<const TraceRecord> records,
                                                      std::span<const CacheConfig> configs,
                                                      const ChangeSchedule* changes = nullptr,
                                                      unsigned threads = 1) {
    if (configs.empty()) throw DomainError("compare_policies needs at least one configuration");
    if (!is_time_ordered(records)) throw FormatError("compare_policies: records are not time ordered");
    std::vector<SimulationResult> out(configs.size());
    threads = std::max(1u, threads);
    for (std::size_t begin = 0; begin < configs.size(); begin += threads) {
        const std::size_t end = std::min(configs.size(), begin + threads);
        std::vector<std::future<SimulationResult>> running;
        for (std::size_t i = begin; i < end; ++i) {
            running.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred,
                                         [&, i] { return simulate(records, configs[i], changes); }));
        }
        for (std::size_t i = begin; i < end; ++i) out[i] = running[i - begin].get();
    }
    return out;
}

inline void write_eviction_log_csv(std::ostream& out, std::span<const EvictionRecord> log) {
    out << "object_id,insert_ts,evict_ts,count\n";
    std::string line;
    for (const auto& e : log) {
        line.clear();
        csv::append_field(line, e.object_id);
        line += ',';
        line += csv::format_double(e.insert_ts);
        line += ',';
        line += csv::format_double(e.evict_ts);
        line += ',';
        line += std::to_string(e.count);
        line += '\n';
        out << line;
    }
}

inline void write_occupancy_csv(std::ostream& out, std::span<const OccupancySample> series) {
    out << "timestamp_s,kernel,accessory,managing_entries\n";
    for (const auto& s : series) {
        out << csv::format_double(s.timestamp_s) << ',' << s.kernel << ',' << s.accessory << ','
            << s.managing_entries << '\n';
    }
}

}  // namespace zcl
