#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "zcl/trace.hpp"

namespace zcl {
namespace {

TEST(SquidLog, MissLineMapsFields) {
    const auto rec = parse_squid_line("1000.5 120 10.0.0.1 TCP_MISS/200 8320 GET http://a/x.gif -");
    ASSERT_TRUE(rec);
    EXPECT_DOUBLE_EQ(rec->timestamp_s, 1000.5);
    EXPECT_EQ(rec->client_id, "10.0.0.1");
    EXPECT_EQ(rec->object_id, "http://a/x.gif");
    EXPECT_EQ(rec->size_bytes, 8320u);
    EXPECT_TRUE(rec->cacheable);
    ASSERT_TRUE(rec->origin_hit);
    EXPECT_FALSE(*rec->origin_hit);
}

TEST(SquidLog, HitLineSetsOriginHit) {
    const auto rec = parse_squid_line("1001.0 5 10.0.0.1 TCP_HIT/200 8320 GET http://a/x.gif -");
    ASSERT_TRUE(rec);
    EXPECT_TRUE(*rec->origin_hit);
    EXPECT_TRUE(parse_squid_line("1 5 c TCP_MEM_HIT/200 10 GET u -")->origin_hit.value());
    EXPECT_FALSE(parse_squid_line("1 5 c TCP_REFRESH_MISS/200 10 GET u -")->origin_hit.value());
}

TEST(SquidLog, DeniedAndTunnelsAreUncacheable) {
    EXPECT_FALSE(parse_squid_line("1 5 c TCP_DENIED/403 10 GET http://x/ -")->cacheable);
    EXPECT_FALSE(parse_squid_line("1 5 c TCP_MISS/200 10 CONNECT x:443 -")->cacheable);
    EXPECT_FALSE(parse_squid_line("1 5 c TCP_TUNNEL/200 10 CONNECT x:443 -")->cacheable);
}

TEST(SquidLog, ActionMapOverridesDefault) {
    SquidParseOptions options;
    options.action_cacheable["TCP_MISS"] = false;
    options.action_cacheable["TCP_DENIED"] = true;
    EXPECT_FALSE(parse_squid_line("1 5 c TCP_MISS/200 10 GET u -", options)->cacheable);
    EXPECT_TRUE(parse_squid_line("1 5 c TCP_DENIED/403 10 GET u -", options)->cacheable);
}

TEST(SquidLog, ZeroByteResponsesCountAsOneByte) {
    EXPECT_EQ(parse_squid_line("1 5 c TCP_DENIED/403 0 GET u -")->size_bytes, 1u);
}

TEST(SquidLog, GarbageLinesAreSkippedAndCounted) {
    std::ostringstream log;
    for (int i = 0; i < 10; ++i) {
        log << 1000 + i << ".0 10 10.0.0.1 TCP_MISS/200 100 GET http://a/" << i << " -\n";
        if (i == 4) log << "###\n";
    }
    std::istringstream in(log.str());
    const auto result = parse_squid_log(in);
    EXPECT_EQ(result.records.size(), 10u);
    EXPECT_EQ(result.malformed, 1u);
}

TEST(SquidLog, MostlyMalformedInputIsAFormatError) {
    std::istringstream in("1 5 c TCP_MISS/200 10 GET u -\nfoo\nbar\n");
    EXPECT_THROW(parse_squid_log(in), FormatError);
}

TEST(SquidLog, EmptyInputIsAFormatError) {
    std::istringstream in("\n\n");
    EXPECT_THROW(parse_squid_log(in), FormatError);
}

TEST(SquidLog, UnreadableStreamIsAnIoError) {
    std::istringstream in("1 5 c TCP_MISS/200 10 GET u -\n");
    in.setstate(std::ios::badbit);
    EXPECT_THROW(parse_squid_log(in), IoError);
}

TEST(SquidLog, OutputIsTimeOrdered) {
    std::istringstream in("5.0 1 c TCP_MISS/200 10 GET b -\n2.0 1 c TCP_MISS/200 10 GET a -\n");
    const auto result = parse_squid_log(in);
    ASSERT_EQ(result.records.size(), 2u);
    EXPECT_EQ(result.records[0].object_id, "a");
    EXPECT_TRUE(is_time_ordered(result.records));
}

TEST(CanonicalCsv, OneRow) {
    std::istringstream in("timestamp_s,client_id,object_id,size_bytes,cacheable\n1.5,c1,o1,42,1\n");
    const auto records = parse_canonical_csv(in);
    ASSERT_EQ(records.size(), 1u);
    EXPECT_EQ(records[0], (TraceRecord{1.5, "c1", "o1", 42, true, std::nullopt}));
}

TEST(CanonicalCsv, HeaderOnlyIsEmpty) {
    std::istringstream in("timestamp_s,client_id,object_id,size_bytes,cacheable\n");
    EXPECT_TRUE(parse_canonical_csv(in).empty());
}

TEST(CanonicalCsv, MissingColumnIsNamed) {
    std::istringstream in("timestamp_s,client_id,object_id,cacheable\n");
    try {
        parse_canonical_csv(in);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("size_bytes"), std::string::npos);
    }
}

TEST(CanonicalCsv, ColumnsMayBeReordered) {
    std::istringstream in("object_id,cacheable,size_bytes,client_id,timestamp_s,origin_hit\no,0,7,c,3,1\n");
    const auto records = parse_canonical_csv(in);
    ASSERT_EQ(records.size(), 1u);
    EXPECT_EQ(records[0], (TraceRecord{3.0, "c", "o", 7, false, true}));
}

TEST(CanonicalCsv, ZeroSizeIsRejected) {
    std::istringstream in("timestamp_s,client_id,object_id,size_bytes,cacheable\n1,c,o,0,1\n");
    EXPECT_THROW(parse_canonical_csv(in), FormatError);
}

// Property: write followed by read is the identity, including ids that need
// quoting and a mix of present/absent hit flags.
TEST(CanonicalCsv, RoundTripIsIdentity) {
    std::mt19937_64 gen(20240601);
    const std::string alphabet = "abcxyz,\"/:?=& 01";
    std::uniform_int_distribution<int> len(1, 12);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    auto random_token = [&] {
        std::string s;
        const int n = len(gen);
        for (int i = 0; i < n; ++i) s.push_back(alphabet[pick(gen)]);
        return s;
    };
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<TraceRecord> records;
        double t = 0.0;
        for (int i = 0; i < 1000; ++i) {
            TraceRecord r;
            t += std::uniform_real_distribution<double>(0.0, 3.7)(gen);
            r.timestamp_s = t;
            r.client_id = random_token();
            r.object_id = random_token();
            r.size_bytes = std::uniform_int_distribution<std::uint64_t>(1, 1ULL << 40)(gen);
            r.cacheable = gen() & 1;
            if (trial > 0 && (gen() % 3) != 0) r.origin_hit = (gen() & 1) != 0;
            records.push_back(std::move(r));
        }
        std::stringstream buf;
        write_canonical_csv(buf, records);
        EXPECT_EQ(parse_canonical_csv(buf), records);
    }
}

}  // namespace
}  // namespace zcl
