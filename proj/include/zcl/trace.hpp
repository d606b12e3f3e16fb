#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "zcl/csv.hpp"
#include "zcl/error.hpp"

namespace zcl {

inline constexpr double kSecondsPerDay = 86400.0;

/// One proxy request in canonical form.
struct TraceRecord {
    double timestamp_s = 0.0;
    std::string client_id;
    std::string object_id;
    std::uint64_t size_bytes = 1;
    bool cacheable = true;
    // Only set when the source log recorded whether the proxy served a hit.
    std::optional<bool> origin_hit;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

/// Stable sort by timestamp; records with equal timestamps keep input order.
inline void canonicalize(std::vector<TraceRecord>& records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const TraceRecord& a, const TraceRecord& b) { return a.timestamp_s < b.timestamp_s; });
}

inline bool is_time_ordered(std::span<const TraceRecord> records) {
    return std::is_sorted(records.begin(), records.end(),
                          [](const TraceRecord& a, const TraceRecord& b) { return a.timestamp_s < b.timestamp_s; });
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

// ---------------------------------------------------------------------------
// Squid native access log
// ---------------------------------------------------------------------------

struct SquidParseOptions {
    // Per action code (the part before '/', e.g. "TCP_MISS") overrides of the
    // default cacheability rule.
    std::map<std::string, bool, std::less<>> action_cacheable;
    // Above this fraction of malformed non-blank lines the input is rejected.
    double max_malformed_fraction = 0.5;
};

struct SquidParseResult {
    std::vector<TraceRecord> records;
    std::size_t malformed = 0;
};

namespace detail {

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

inline bool is_hit_action(std::string_view code) {
    static constexpr std::string_view kHitCodes[] = {
        "TCP_HIT",         "TCP_MEM_HIT",     "TCP_IMS_HIT",      "TCP_INM_HIT",   "TCP_NEGATIVE_HIT",
        "TCP_OFFLINE_HIT", "TCP_REFRESH_HIT", "TCP_STALE_HIT",    "UDP_HIT",       "TCP_REFRESH_UNMODIFIED",
        "TCP_REFRESH_FAIL_OLD"};
    return std::any_of(std::begin(kHitCodes), std::end(kHitCodes),
                       [&](std::string_view h) { return code.starts_with(h); });
}

}  // namespace detail

/// Default cacheability: denied requests and CONNECT tunnels cannot be stored.
inline bool default_squid_cacheable(std::string_view action_code, std::string_view method) {
    if (action_code.find("DENIED") != std::string_view::npos) return false;
    if (action_code.find("TUNNEL") != std::string_view::npos) return false;
    return method != "CONNECT";
}

/// Parses one native-format line; returns nullopt when the line is malformed.
inline std::optional<TraceRecord> parse_squid_line(std::string_view line, const SquidParseOptions& options = {}) {
    const auto fields = detail::split_whitespace(line);
    if (fields.size() < 7) return std::nullopt;
    TraceRecord rec;
    try {
        rec.timestamp_s = csv::parse_double(fields[0], "time");
        (void)csv::parse_uint(fields[1], "elapsed");
        rec.size_bytes = std::max<std::uint64_t>(1, csv::parse_uint(fields[4], "bytes"));
    } catch (const FormatError&) {
        return std::nullopt;
    }
    if (!(rec.timestamp_s >= 0.0)) return std::nullopt;
    const std::string_view action = fields[3];
    const auto slash = action.find('/');
    if (slash == std::string_view::npos || slash == 0) return std::nullopt;
    const std::string_view code = action.substr(0, slash);
    const std::string_view method = fields[5];

    rec.client_id = std::string(fields[2]);
    rec.object_id = std::string(fields[6]);
    if (auto it = options.action_cacheable.find(code); it != options.action_cacheable.end()) {
        rec.cacheable = it->second;
    } else {
        rec.cacheable = default_squid_cacheable(code, method);
    }
    rec.origin_hit = detail::is_hit_action(code);
    return rec;
}

/// Reads a native Squid access log. Malformed lines are skipped and counted;
/// the result is canonicalized (time ordered).
inline SquidParseResult parse_squid_log(std::istream& in, const SquidParseOptions& options = {}) {
    if (!in.good()) throw IoError("squid log stream is not readable");
    SquidParseResult result;
    std::size_t lines = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (detail::split_whitespace(line).empty()) continue;
        ++lines;
        if (auto rec = parse_squid_line(line, options)) {
            result.records.push_back(std::move(*rec));
        } else {
            ++result.malformed;
        }
    }
    if (in.bad()) throw IoError("read error while parsing squid log");
    if (lines == 0) throw FormatError("squid log contains no lines");
    if (static_cast<double>(result.malformed) > options.max_malformed_fraction * static_cast<double>(lines)) {
        throw FormatError("squid log: " + std::to_string(result.malformed) + " of " + std::to_string(lines) +
                          " lines malformed; not a native access log?");
    }
    canonicalize(result.records);
    return result;
}

// ---------------------------------------------------------------------------
// Canonical CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCanonicalColumns[] = {"timestamp_s", "client_id", "object_id", "size_bytes",
                                                         "cacheable"};

inline void write_canonical_csv(std::ostream& out, std::span<const TraceRecord> records) {
    const bool with_origin =
        std::any_of(records.begin(), records.end(), [](const TraceRecord& r) { return r.origin_hit.has_value(); });
    out << "timestamp_s,client_id,object_id,size_bytes,cacheable";
    if (with_origin) out << ",origin_hit";
    out << '\n';
    std::string line;
    for (const auto& r : records) {
        line.clear();
        line += csv::format_double(r.timestamp_s);
        line += ',';
        csv::append_field(line, r.client_id);
        line += ',';
        csv::append_field(line, r.object_id);
        line += ',';
        line += std::to_string(r.size_bytes);
        line += r.cacheable ? ",1" : ",0";
        if (with_origin) {
            line += ',';
            if (r.origin_hit) line += *r.origin_hit ? '1' : '0';
        }
        line += '\n';
        out << line;
    }
    if (!out) throw IoError("write error on canonical CSV");
}

inline std::vector<TraceRecord> parse_canonical_csv(std::istream& in) {
    if (!in.good()) throw IoError("canonical CSV stream is not readable");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("canonical CSV: missing header");
    const auto header = csv::split_line(line);
    auto column = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        return std::nullopt;
    };
    std::size_t idx[5];
    for (std::size_t c = 0; c < 5; ++c) {
        auto i = column(kCanonicalColumns[c]);
        if (!i) throw FormatError("canonical CSV: missing column '" + std::string(kCanonicalColumns[c]) + "'");
        idx[c] = *i;
    }
    const auto origin_idx = column("origin_hit");

    std::vector<TraceRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = csv::split_line(line);
        if (f.size() != header.size()) {
            throw FormatError("canonical CSV line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
        }
        TraceRecord r;
        r.timestamp_s = csv::parse_double(f[idx[0]], "timestamp_s");
        r.client_id = f[idx[1]];
        r.object_id = f[idx[2]];
        r.size_bytes = csv::parse_uint(f[idx[3]], "size_bytes");
        if (r.size_bytes == 0) throw FormatError("canonical CSV line " + std::to_string(line_no) + ": size_bytes must be >= 1");
        r.cacheable = csv::parse_bool(f[idx[4]], "cacheable");
        if (origin_idx && !f[*origin_idx].empty()) r.origin_hit = csv::parse_bool(f[*origin_idx], "origin_hit");
        records.push_back(std::move(r));
    }
    if (in.bad()) throw IoError("read error on canonical CSV");
    return records;
}

inline std::vector<TraceRecord> read_canonical_csv_file(const std::string& path) {
    auto in = open_input(path);
    return parse_canonical_csv(in);
}

}  // namespace zcl
