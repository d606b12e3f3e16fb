#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "zcl/simcache.hpp"

namespace zcl {
namespace {

TraceRecord req(double t, std::string id, std::uint64_t size = 1, bool cacheable = true) {
    return {t, "c", std::move(id), size, cacheable, std::nullopt};
}

std::vector<TraceRecord> sequence(const std::string& ids) {
    std::vector<TraceRecord> out;
    double t = 0.0;
    for (char c : ids) out.push_back(req(t++, std::string(1, c)));
    return out;
}

CacheConfig objects(std::uint64_t capacity, Policy policy = Policy::Lru) {
    CacheConfig c;
    c.capacity = capacity;
    c.policy = policy;
    c.byte_accounting = false;
    return c;
}

std::string outcome_string(const std::vector<StepOutcome>& steps) {
    std::string s;
    for (const auto& o : steps) {
        switch (o.outcome) {
            case Outcome::Hit: s += 'H'; break;
            case Outcome::Miss: s += 'M'; break;
            case Outcome::StaleMiss: s += 'S'; break;
            case Outcome::Uncacheable: s += 'U'; break;
            case Outcome::Bypass: s += 'B'; break;
        }
    }
    return s;
}

// Brute-force reference of both policies: linear scans over a flat table, no
// shared code with the simulator.
class ReferenceCache {
public:
    ReferenceCache(CacheConfig c, const ChangeSchedule* changes) : c_(c), changes_(changes) {
        if (c.unlimited()) {
            kcap_ = acap_ = kUnlimitedCapacity;
        } else if (c.policy == Policy::Lru) {
            kcap_ = c.capacity;
        } else {
            kcap_ = static_cast<std::uint64_t>(c.kernel_fraction * double(c.capacity));
            acap_ = c.capacity - kcap_;
        }
    }

    Outcome step(const TraceRecord& r) {
        ++seq_;
        if (!r.cacheable) return Outcome::Uncacheable;
        auto& o = table_[r.object_id];
        const std::uint64_t size = c_.byte_accounting ? r.size_bytes : 1;
        Outcome out = Outcome::Miss;
        if (o.part != Part::None) {
            out = Outcome::Hit;
            if (changes_ && changes_->changed_between(r.object_id, o.fetched, r.timestamp_s)) {
                out = Outcome::StaleMiss;
                o.fetched = r.timestamp_s;
            }
        }
        if (c_.policy == Policy::Lru) {
            if (o.part == Part::None) {
                if (size > kcap_) {
                    out = Outcome::Bypass;
                } else {
                    while (kcap_ - used(Part::Kernel) < size) evict(min_by(Part::Kernel, false), r.timestamp_s);
                    place(o, Part::Kernel, size, r.timestamp_s);
                }
            }
        } else if (o.part == Part::Kernel) {
            ++o.count;
        } else if (o.part == Part::Accessory) {
            o.part = Part::None;
            ++o.count;
            if (!to_kernel(o, r.timestamp_s)) log_.push_back({r.object_id, r.timestamp_s});
        } else {
            const bool returning = o.stats;
            o.stats = true;
            o.count = returning ? o.count + 1 : 1;
            o.size = size;
            o.inserted = o.fetched = r.timestamp_s;
            if (returning) {
                if (!to_kernel(o, r.timestamp_s)) out = Outcome::Bypass;
            } else if (size > acap_) {
                out = Outcome::Bypass;
            } else {
                while (acap_ - used(Part::Accessory) < size) evict(min_by(Part::Accessory, true), r.timestamp_s);
                place(o, Part::Accessory, size, r.timestamp_s);
            }
        }
        o.last = seq_;
        if (c_.policy == Policy::ZipfConstruction && c_.managing_capacity > 0) {
            while (entries() > c_.managing_capacity) {
                std::string victim;
                std::uint64_t best = ~0ULL;
                for (auto& [id, e] : table_) {
                    if (e.stats && e.part == Part::None && e.last < best) {
                        best = e.last;
                        victim = id;
                    }
                }
                if (victim.empty()) break;
                table_[victim].stats = false;
            }
        }
        return out;
    }

    struct Eviction {
        std::string id;
        double ts;
        bool operator==(const Eviction&) const = default;
    };
    std::vector<Eviction> log_;

private:
    struct Entry {
        Part part = Part::None;
        bool stats = false;
        std::uint64_t count = 0, last = 0, size = 1, insert_seq = 0;
        double inserted = 0, fetched = 0;
    };

    std::uint64_t used(Part p) const {
        std::uint64_t s = 0;
        for (const auto& [id, e] : table_) s += e.part == p ? e.size : 0;
        return s;
    }
    std::size_t entries() const {
        std::size_t n = 0;
        for (const auto& [id, e] : table_) n += e.stats;
        return n;
    }
    // Kernel victim: min (count, last request); LRU victim: min last request;
    // accessory victim: oldest insertion.
    std::string min_by(Part p, bool by_insertion) const {
        std::string victim;
        std::tuple<std::uint64_t, std::uint64_t> best{~std::uint64_t{0}, ~std::uint64_t{0}};
        for (const auto& [id, e] : table_) {
            if (e.part != p) continue;
            using Key = std::tuple<std::uint64_t, std::uint64_t>;
            const Key key = by_insertion               ? Key{0, e.insert_seq}
                            : c_.policy == Policy::Lru ? Key{0, e.last}
                                                       : Key{e.count, e.last};
            if (key < best) {
                best = key;
                victim = id;
            }
        }
        return victim;
    }
    void evict(const std::string& id, double ts) {
        table_[id].part = Part::None;
        log_.push_back({id, ts});
    }
    void place(Entry& o, Part p, std::uint64_t size, double ts) {
        o.part = p;
        o.size = size;
        o.insert_seq = seq_;
        o.inserted = o.fetched = ts;
    }
    bool to_kernel(Entry& o, double ts) {
        if (o.size > kcap_) return false;
        while (kcap_ - used(Part::Kernel) < o.size) evict(min_by(Part::Kernel, false), ts);
        o.part = Part::Kernel;
        return true;
    }

    CacheConfig c_;
    const ChangeSchedule* changes_;
    std::uint64_t kcap_ = 0, acap_ = 0, seq_ = 0;
    std::map<std::string, Entry> table_;
};

std::vector<TraceRecord> random_trace(std::mt19937_64& gen, std::size_t n, int universe, bool sized) {
    std::vector<double> weights;
    std::vector<std::uint64_t> sizes;
    for (int i = 1; i <= universe; ++i) {
        weights.push_back(std::pow(i, -0.8));
        sizes.push_back(sized ? std::uniform_int_distribution<std::uint64_t>(1, 40)(gen) : 1);
    }
    std::discrete_distribution<int> pick(weights.begin(), weights.end());
    std::vector<TraceRecord> out;
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        t += std::exponential_distribution<double>(1.0)(gen);
        const int id = pick(gen);
        const bool cacheable = std::uniform_real_distribution<double>()(gen) < 0.9;
        out.push_back(req(t, std::to_string(id), sizes[id], cacheable));
    }
    return out;
}

TEST(Simulate, UnlimitedCacheMissesOnlyFirstRequests) {
    std::mt19937_64 gen(3);
    auto records = random_trace(gen, 20000, 3000, true);
    for (auto& r : records) r.cacheable = true;
    std::set<std::string> unique;
    for (const auto& r : records) unique.insert(r.object_id);
    const double k = double(records.size()), p = double(unique.size());
    for (Policy policy : {Policy::Lru, Policy::ZipfConstruction}) {
        CacheConfig c;
        c.policy = policy;
        const auto result = simulate(records, c);
        EXPECT_EQ(result.hit_ratio(), (k - p) / k);
        EXPECT_TRUE(result.evictions.empty());
    }
}

TEST(Simulate, SingleSlotAlternatingNeverHits) {
    const auto records = sequence("ABABABABABABABAB");
    const auto result = simulate(records, objects(1));
    EXPECT_EQ(result.hits, 0u);
    EXPECT_EQ(result.hit_ratio(), 0.0);
    EXPECT_EQ(result.evictions.size(), records.size() - 1);
}

// Hand-executed LRU table, capacity 3 objects (MRU first):
//  1 A M [A]      6 B M [BDA] -C   11 D H [DCA]     16 G M [GCB] -A
//  2 B M [BA]     7 E M [EBD] -A   12 F M [FDC] -A  17 A M [AGC] -B
//  3 C M [CBA]    8 A M [AEB] -D   13 A M [AFD] -C  18 E M [EAG] -C
//  4 A H [ACB]    9 C M [CAE] -B   14 B M [BAF] -D  19 B M [BEA] -G
//  5 D M [DAC] -B 10 D M [DCA] -E  15 C M [CBA] -F  20 A H [ABE]
TEST(Simulate, LruHandOracle) {
    const auto records = sequence("ABCADBEACDDFABCGAEBA");
    Simulator sim(objects(3));
    std::vector<StepOutcome> steps;
    for (const auto& r : records) steps.push_back(sim.step(r));
    EXPECT_EQ(outcome_string(steps), "MMMHMMMMMMHMMMMMMMMH");
    const auto result = sim.finish();
    std::string victims;
    for (const auto& e : result.evictions) victims += e.object_id;
    EXPECT_EQ(victims, "BCADBEACDFABCG");
    EXPECT_EQ(result.evictions[0].insert_ts, 1.0);
    EXPECT_EQ(result.evictions[0].evict_ts, 4.0);
    EXPECT_EQ(result.evictions[0].count, 1u);
}

TEST(ZipfStep, RepeatRequestPromotesToKernel) {
    Simulator sim(objects(30, Policy::ZipfConstruction));
    const auto first = sim.step(req(0, "A"));
    EXPECT_EQ(first.outcome, Outcome::Miss);
    EXPECT_EQ(first.part, Part::Accessory);
    EXPECT_EQ(sim.inspect("A")->count, 1u);
    const auto second = sim.step(req(1, "A"));
    EXPECT_EQ(second.outcome, Outcome::Hit);
    EXPECT_EQ(second.part, Part::Kernel);
    EXPECT_EQ(sim.inspect("A")->count, 2u);
    EXPECT_EQ(sim.kernel_occupancy(), 1u);
    EXPECT_EQ(sim.accessory_occupancy(), 0u);
}

TEST(ZipfStep, ReturningObjectGoesStraightToKernel) {
    // Kernel 1 slot, accessory 2 slots.
    Simulator sim(objects(3, Policy::ZipfConstruction));
    sim.step(req(0, "A"));
    sim.step(req(1, "B"));
    sim.step(req(2, "C"));  // pushes A out of the accessory
    const auto a = sim.inspect("A");
    EXPECT_EQ(a->part, Part::None);
    EXPECT_TRUE(a->has_statistics);
    EXPECT_EQ(a->count, 1u);
    const auto again = sim.step(req(3, "A"));
    EXPECT_EQ(again.outcome, Outcome::Miss);
    EXPECT_EQ(again.part, Part::Kernel);
    EXPECT_EQ(sim.inspect("A")->count, 2u);
    EXPECT_EQ(sim.accessory_occupancy(), 2u);
}

TEST(ZipfStep, KernelEvictsLeastPopularThenLeastRecent) {
    // Kernel 2 slots, accessory 4.
    Simulator sim(objects(6, Policy::ZipfConstruction));
    double t = 0;
    for (const char* id : {"A", "A", "A", "B", "B", "C", "C"}) sim.step(req(t++, id));
    // A has 3, B has 2 and was requested before C; B is evicted for C.
    EXPECT_EQ(sim.inspect("A")->part, Part::Kernel);
    EXPECT_EQ(sim.inspect("B")->part, Part::None);
    EXPECT_EQ(sim.inspect("C")->part, Part::Kernel);
    for (const char* id : {"D", "D"}) sim.step(req(t++, id));
    // C (2) and D (2) tie on count, C was requested earlier.
    EXPECT_EQ(sim.inspect("C")->part, Part::None);
    EXPECT_EQ(sim.inspect("A")->part, Part::Kernel);
}

TEST(ZipfStep, ManagingTableDropsOldestNonResident) {
    auto c = objects(3, Policy::ZipfConstruction);
    c.managing_capacity = 4;
    Simulator sim(c);
    double t = 0;
    for (const char* id : {"A", "B", "C", "D", "E", "F"}) sim.step(req(t++, id));
    EXPECT_EQ(sim.managing_entries(), 4u);
    EXPECT_FALSE(sim.inspect("A")->has_statistics);
    EXPECT_FALSE(sim.inspect("B")->has_statistics);
    EXPECT_TRUE(sim.inspect("C")->has_statistics);
    // A lost its statistics, so it is admitted like a new object.
    EXPECT_EQ(sim.step(req(t++, "A")).part, Part::Accessory);
}

TEST(ZipfStep, ManagingTableNeverDropsResidentObjects) {
    auto c = objects(6, Policy::ZipfConstruction);
    c.managing_capacity = 1;
    Simulator sim(c);
    double t = 0;
    for (const char* id : {"A", "B", "C", "D"}) sim.step(req(t++, id));
    EXPECT_EQ(sim.managing_entries(), 4u);
    for (const char* id : {"A", "B", "C", "D"}) EXPECT_TRUE(sim.inspect(id)->has_statistics);
}

TEST(Simulate, StaleCopyIsRefetchedInPlace) {
    ChangeSchedule changes;
    changes.add("A", 5.0);
    changes.finalize();
    Simulator sim(objects(3), &changes);
    EXPECT_EQ(sim.step(req(0, "A")).outcome, Outcome::Miss);
    EXPECT_EQ(sim.step(req(4, "A")).outcome, Outcome::Hit);
    const auto stale = sim.step(req(6, "A"));
    EXPECT_EQ(stale.outcome, Outcome::StaleMiss);
    EXPECT_EQ(stale.part, Part::Kernel);
    EXPECT_EQ(sim.inspect("A")->last_fetch_ts, 6.0);
    EXPECT_EQ(sim.step(req(7, "A")).outcome, Outcome::Hit);
    const auto result = sim.finish();
    EXPECT_TRUE(result.evictions.empty());
    EXPECT_EQ(result.stale_misses, 1u);
    EXPECT_EQ(result.hits, 2u);
}

TEST(Simulate, OversizedObjectsBypass) {
    CacheConfig c;
    c.capacity = 100;
    std::vector<TraceRecord> records{req(0, "big", 500), req(1, "big", 500), req(2, "small", 10)};
    const auto result = simulate(records, c);
    EXPECT_EQ(result.bypasses, 2u);
    EXPECT_EQ(result.misses, 1u);
    EXPECT_EQ(result.hits, 0u);
}

TEST(Simulate, UnorderedInputIsRejected) {
    std::vector<TraceRecord> records{req(5, "a"), req(1, "b")};
    EXPECT_THROW(simulate(records, objects(2)), FormatError);
    Simulator sim(objects(2));
    sim.step(records[0]);
    EXPECT_THROW(sim.step(records[1]), FormatError);
}

// Single-event transitions against the brute-force reference and against the
// whole-trace run.
TEST(Simulate, StepReplayMatchesReferenceAndWholeRun) {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 12; ++trial) {
        const bool sized = trial % 2 == 0;
        const auto records = random_trace(gen, 10000, 400, sized);
        ChangeSchedule changes;
        if (trial % 3 == 0) {
            for (int i = 0; i < 400; ++i) {
                changes.add(std::to_string(i), std::uniform_real_distribution<double>(0, 10000)(gen));
            }
        }
        changes.finalize();
        CacheConfig c;
        c.policy = trial % 4 < 2 ? Policy::Lru : Policy::ZipfConstruction;
        c.byte_accounting = sized;
        c.capacity = sized ? 600 : 40;
        c.managing_capacity = trial % 4 == 3 ? 60 : 0;
        SCOPED_TRACE(trial);

        Simulator sim(c, &changes);
        ReferenceCache ref(c, &changes);
        std::vector<StepOutcome> steps;
        for (const auto& r : records) {
            steps.push_back(sim.step(r));
            ASSERT_EQ(steps.back().outcome, ref.step(r)) << "event " << steps.size();
            ASSERT_LE(sim.kernel_occupancy(), c.kernel_capacity());
            ASSERT_LE(sim.accessory_occupancy(), c.accessory_capacity());
        }
        const auto stepped = sim.finish();
        ASSERT_EQ(stepped.evictions.size(), ref.log_.size());
        for (std::size_t i = 0; i < ref.log_.size(); ++i) {
            EXPECT_EQ(stepped.evictions[i].object_id, ref.log_[i].id);
            EXPECT_EQ(stepped.evictions[i].evict_ts, ref.log_[i].ts);
        }

        // simulate() fills a zero managing capacity, so pin it for comparison.
        CacheConfig pinned = c;
        if (pinned.managing_capacity == 0) pinned.managing_capacity = std::numeric_limits<std::size_t>::max();
        const auto whole = simulate(records, pinned, &changes);
        EXPECT_EQ(whole.hits, stepped.hits);
        EXPECT_EQ(whole.stale_misses, stepped.stale_misses);
        EXPECT_EQ(whole.evictions, stepped.evictions);
        EXPECT_EQ(whole.occupancy, stepped.occupancy);
    }
}

TEST(Simulate, CountsAccountForEveryRequest) {
    std::mt19937_64 gen(5);
    const auto records = random_trace(gen, 20000, 2000, true);
    CacheConfig c;
    c.capacity = 3000;
    c.policy = Policy::ZipfConstruction;
    const auto r = simulate(records, c);
    EXPECT_EQ(r.requests, records.size());
    EXPECT_EQ(r.hits + r.misses + r.stale_misses + r.uncacheable + r.bypasses, r.requests);
    EXPECT_EQ(r.cacheable_requests + r.uncacheable, r.requests);
    EXPECT_LE(r.requests_per_day_in(), r.requests_per_day_out());
    EXPECT_GE(r.hit_ratio(), 0.0);
    EXPECT_LE(r.byte_hit_ratio(), 1.0);
    for (const auto& s : r.occupancy) {
        EXPECT_LE(s.kernel, c.kernel_capacity());
        EXPECT_LE(s.accessory, c.accessory_capacity());
    }
}

TEST(Simulate, LruHitRatioGrowsWithCapacityForUniformSizes) {
    std::mt19937_64 gen(9);
    const auto records = random_trace(gen, 30000, 3000, false);
    double previous = -1.0;
    std::uint64_t previous_hits = 0;
    for (std::uint64_t cap = 1; cap <= 4096; cap *= 2) {
        const auto r = simulate(records, objects(cap));
        EXPECT_GE(r.hits, previous_hits) << cap;
        EXPECT_GE(r.hit_ratio(), previous);
        previous = r.hit_ratio();
        previous_hits = r.hits;
    }
}

TEST(Simulate, RenewalNeverRaisesHitRatio) {
    SyntheticWorkloadSpec spec;
    spec.universe_size = 20000;
    spec.per_client_rate = Rate::per_day(200);
    spec.horizon_days = 5;
    spec.cacheable_fraction = 0.7;
    spec.renewal = TwoValuedRenewal{Rate::per_day(2.0), Rate::per_day(0.1), 200};
    spec.seed = 4;
    const auto trace = generate_synthetic_trace(spec);
    for (Policy policy : {Policy::Lru, Policy::ZipfConstruction}) {
        for (std::uint64_t cap : {std::uint64_t{2000000}, std::uint64_t{20000000}, kUnlimitedCapacity}) {
            CacheConfig c;
            c.policy = policy;
            c.capacity = cap;
            const auto with = simulate(trace.records, c, &trace.changes);
            const auto without = simulate(trace.records, c);
            EXPECT_LE(with.hit_ratio(), without.hit_ratio());
            EXPECT_GT(with.stale_misses, 0u);
        }
    }
}

TEST(Simulate, DeterministicEvictionLog) {
    std::mt19937_64 gen(21);
    const auto records = random_trace(gen, 10000, 1000, true);
    CacheConfig c;
    c.capacity = 1500;
    c.policy = Policy::ZipfConstruction;
    const auto a = simulate(records, c);
    const auto b = simulate(records, c);
    EXPECT_EQ(a.evictions, b.evictions);
    EXPECT_FALSE(a.evictions.empty());
}

TEST(Simulate, DefaultManagingCapacityScalesWithCache) {
    std::vector<TraceRecord> records{req(0, "a", 100), req(1, "b", 300)};
    CacheConfig c;
    c.capacity = 2000;
    EXPECT_EQ(resolve_config(c, records).managing_capacity, 100u);
    c.capacity = 100;
    EXPECT_EQ(resolve_config(c, records).managing_capacity, 16u);
    EXPECT_EQ(resolve_config(objects(50), records).managing_capacity, 500u);
}

TEST(ComparePolicies, OneResultPerConfigInOrder) {
    std::mt19937_64 gen(13);
    const auto records = random_trace(gen, 10000, 1000, true);
    std::vector<CacheConfig> configs(3);
    configs[0].capacity = 800;
    configs[1].capacity = 800;
    configs[1].policy = Policy::ZipfConstruction;
    configs[2].capacity = 4000;
    const auto serial = compare_policies(records, configs, nullptr, 1);
    const auto parallel = compare_policies(records, configs, nullptr, 3);
    ASSERT_EQ(serial.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto single = simulate(records, configs[i]);
        EXPECT_EQ(serial[i].hits, single.hits);
        EXPECT_EQ(parallel[i].hits, single.hits);
        EXPECT_EQ(parallel[i].evictions, single.evictions);
        EXPECT_EQ(serial[i].config.policy, configs[i].policy);
    }
    EXPECT_THROW(compare_policies(records, std::span<const CacheConfig>{}), DomainError);
}

TEST(OutputCsv, EvictionAndOccupancyFormats) {
    std::vector<EvictionRecord> log{{"a,b", 1.5, 3, 2}};
    std::ostringstream e;
    write_eviction_log_csv(e, log);
    EXPECT_EQ(e.str(), "object_id,insert_ts,evict_ts,count\n\"a,b\",1.5,3,2\n");
    std::vector<OccupancySample> occ{{3600, 10, 20, 5}};
    std::ostringstream o;
    write_occupancy_csv(o, occ);
    EXPECT_EQ(o.str(), "timestamp_s,kernel,accessory,managing_entries\n3600,10,20,5\n");
}

TEST(Policy, NamesRoundTrip) {
    EXPECT_EQ(parse_policy(to_string(Policy::Lru)), Policy::Lru);
    EXPECT_EQ(parse_policy(to_string(Policy::ZipfConstruction)), Policy::ZipfConstruction);
    EXPECT_THROW(parse_policy("ARC"), FormatError);
}

}  // namespace
}  // namespace zcl
