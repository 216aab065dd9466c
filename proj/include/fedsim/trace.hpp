#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/error.hpp"

namespace fedsim {

enum class TraceFormat { canonical, hsdpa };

/// A client's time-indexed throughput series. Piecewise-constant between
/// samples; lookups past the end wrap modulo the trace duration.
struct BandwidthTrace {
    std::string trace_id;
    std::vector<double> times;      // seconds since trace start, strictly increasing, times[0] == 0
    std::vector<double> bandwidth;  // bytes/second, >= 0

    /// Median gap between consecutive samples; 1 s for single-sample traces.
    double sampling_interval() const {
        if (times.size() < 2) return 1.0;
        std::vector<double> gaps(times.size() - 1);
        for (std::size_t i = 1; i < times.size(); ++i) gaps[i - 1] = times[i] - times[i - 1];
        std::sort(gaps.begin(), gaps.end());
        const std::size_t n = gaps.size();
        return n % 2 ? gaps[n / 2] : 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]);
    }

    double duration() const { return times.back() + sampling_interval(); }

    double mean_bandwidth() const {
        const double d = duration();
        double acc = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double end = i + 1 < times.size() ? times[i + 1] : d;
            acc += bandwidth[i] * (end - times[i]);
        }
        return acc / d;
    }
};

/// Step interpolation: value of the latest sample at or before t, with t
/// taken modulo the trace duration.
inline double bandwidth_at(const BandwidthTrace& trace, double t) {
    const double d = trace.duration();
    double tm = std::fmod(t, d);
    if (tm < 0) tm += d;
    auto it = std::upper_bound(trace.times.begin(), trace.times.end(), tm);
    const std::size_t idx = static_cast<std::size_t>(it - trace.times.begin()) - 1;
    return trace.bandwidth[idx];
}

/// Smallest delta >= 0 such that the integral of bandwidth over
/// [start, start+delta] equals `bytes`, walked exactly over the steps.
/// Throws StalledTransfer when a contiguous zero-bandwidth stretch exceeds
/// `stall_timeout` simulated seconds.
inline double transfer_time(const BandwidthTrace& trace, double start, double bytes,
                            double stall_timeout = 3600.0) {
    if (bytes <= 0.0) return 0.0;
    const double d = trace.duration();
    double local = std::fmod(start, d);
    if (local < 0) local += d;
    auto seg = std::upper_bound(trace.times.begin(), trace.times.end(), local);
    std::size_t idx = static_cast<std::size_t>(seg - trace.times.begin()) - 1;

    double remaining = bytes;
    double elapsed = 0.0;
    double zero_run = 0.0;
    for (;;) {
        const double seg_end = idx + 1 < trace.times.size() ? trace.times[idx + 1] : d;
        const double len = seg_end - local;
        const double rate = trace.bandwidth[idx];
        if (rate > 0.0) {
            zero_run = 0.0;
            if (remaining <= rate * len) return elapsed + remaining / rate;
            remaining -= rate * len;
        } else {
            zero_run += len;
            if (zero_run > stall_timeout) throw StalledTransfer{};
        }
        elapsed += len;
        if (idx + 1 < trace.times.size()) {
            ++idx;
            local = trace.times[idx];
        } else {
            idx = 0;
            local = 0.0;
        }
    }
}

/// Parse a trace from text. Canonical: one "t_seconds,bytes_per_second" pair
/// per line. Hsdpa-style: whitespace columns, column 1 a millisecond
/// timestamp, column 5 bytes transferred in the interval since the previous
/// row. Timestamps are re-based so the first sample sits at t=0.
inline BandwidthTrace parse_trace(std::istream& in, TraceFormat format,
                                  std::string trace_id = "") {
    BandwidthTrace trace;
    trace.trace_id = std::move(trace_id);
    std::string line;
    int line_no = 0;
    std::vector<double> raw_t, raw_v;  // v: bw for canonical, interval bytes for hsdpa
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        double t = 0.0, v = 0.0;
        if (format == TraceFormat::canonical) {
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream row(line);
            if (!(row >> t >> v)) throw MalformedLine(line_no);
        } else {
            std::istringstream row(line);
            std::string cols[5];
            if (!(row >> cols[0] >> cols[1] >> cols[2] >> cols[3] >> cols[4]))
                throw MalformedLine(line_no);
            try {
                t = std::stod(cols[0]) / 1000.0;  // ms -> s
                v = std::stod(cols[4]);
            } catch (const std::exception&) {
                throw MalformedLine(line_no);
            }
        }
        if (!std::isfinite(t) || !std::isfinite(v) || v < 0) throw MalformedLine(line_no);
        if (!raw_t.empty() && t <= raw_t.back()) throw NonMonotonicTime(line_no);
        raw_t.push_back(t);
        raw_v.push_back(v);
    }
    if (raw_t.empty()) throw EmptyTrace{};

    const double base = raw_t.front();
    for (std::size_t i = 0; i < raw_t.size(); ++i) {
        trace.times.push_back(raw_t[i] - base);
        if (format == TraceFormat::canonical) {
            trace.bandwidth.push_back(raw_v[i]);
        } else {
            // per-interval byte counts become rates over the enclosing gap;
            // the first row borrows the following gap
            double dt;
            if (raw_t.size() == 1) dt = 1.0;
            else if (i == 0) dt = raw_t[1] - raw_t[0];
            else dt = raw_t[i] - raw_t[i - 1];
            trace.bandwidth.push_back(dt > 0 ? raw_v[i] / dt : 0.0);
        }
    }
    return trace;
}

/// Client k (0-based in sorted order) binds to trace index k mod |traces|
/// in sorted trace order. Total and deterministic.
inline std::map<std::string, std::string> assign_traces(const std::set<std::string>& client_ids,
                                                        const std::set<std::string>& trace_ids) {
    if (client_ids.empty() || trace_ids.empty()) throw EmptyInput{};
    std::vector<std::string> traces(trace_ids.begin(), trace_ids.end());
    std::map<std::string, std::string> assignment;
    std::size_t k = 0;
    for (const auto& cid : client_ids) {
        assignment[cid] = traces[k % traces.size()];
        ++k;
    }
    return assignment;
}

/// Immutable after construction; safe for concurrent reads.
struct TraceStore {
    std::map<std::string, BandwidthTrace> traces;
    std::map<std::string, std::string> assignment;  // client_id -> trace_id

    const BandwidthTrace& for_client(const std::string& client_id) const {
        auto a = assignment.find(client_id);
        if (a == assignment.end()) throw UnknownClient(client_id);
        return traces.at(a->second);
    }
};

} // namespace fedsim
