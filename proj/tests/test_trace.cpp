#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "fedsim/rng.hpp"
#include "fedsim/synthetic.hpp"
#include "fedsim/trace.hpp"

using namespace fedsim;

namespace {

BandwidthTrace make_trace(std::vector<double> times, std::vector<double> bw) {
    BandwidthTrace t;
    t.trace_id = "t";
    t.times = std::move(times);
    t.bandwidth = std::move(bw);
    return t;
}

} // namespace

TEST_CASE("parse_trace canonical") {
    std::istringstream in("0,1000000\n1,2000000\n");
    const BandwidthTrace t = parse_trace(in, TraceFormat::canonical);
    REQUIRE(t.times == std::vector<double>{0.0, 1.0});
    REQUIRE(t.bandwidth == std::vector<double>{1e6, 2e6});
}

TEST_CASE("parse_trace re-bases first timestamp to zero") {
    std::istringstream in("5,100\n");
    const BandwidthTrace t = parse_trace(in, TraceFormat::canonical);
    REQUIRE(t.times == std::vector<double>{0.0});
    REQUIRE(t.bandwidth == std::vector<double>{100.0});
}

TEST_CASE("parse_trace rejects regressing timestamps") {
    std::istringstream in("0,100\n0,200\n");
    try {
        parse_trace(in, TraceFormat::canonical);
        FAIL("expected NonMonotonicTime");
    } catch (const NonMonotonicTime& e) {
        CHECK(e.line_no == 2);
    }
}

TEST_CASE("parse_trace error cases") {
    std::istringstream empty("");
    CHECK_THROWS_AS(parse_trace(empty, TraceFormat::canonical), EmptyTrace);
    std::istringstream junk("0,abc\n");
    CHECK_THROWS_AS(parse_trace(junk, TraceFormat::canonical), MalformedLine);
    std::istringstream negative("0,-5\n");
    CHECK_THROWS_AS(parse_trace(negative, TraceFormat::canonical), MalformedLine);
}

TEST_CASE("parse_trace hsdpa columns") {
    // 1-second cadence in ms timestamps, column 5 bytes per interval
    std::istringstream in("1000 lat lon 5 500000\n2000 lat lon 5 750000\n");
    const BandwidthTrace t = parse_trace(in, TraceFormat::hsdpa);
    REQUIRE(t.times == std::vector<double>{0.0, 1.0});
    CHECK(t.bandwidth[0] == doctest::Approx(5e5));
    CHECK(t.bandwidth[1] == doctest::Approx(7.5e5));
}

TEST_CASE("assign_traces is modular over sorted ids") {
    const auto a = assign_traces({"c0", "c1", "c2", "c3", "c4"}, {"t0", "t1"});
    CHECK(a.at("c0") == "t0");
    CHECK(a.at("c1") == "t1");
    CHECK(a.at("c2") == "t0");
    CHECK(a.at("c3") == "t1");
    CHECK(a.at("c4") == "t0");

    const auto single = assign_traces({"c0"}, {"t0"});
    CHECK(single.at("c0") == "t0");

    CHECK_THROWS_AS(assign_traces({"c0"}, {}), EmptyInput);
    CHECK_THROWS_AS(assign_traces({}, {"t0"}), EmptyInput);

    // pure function: repeated calls identical
    CHECK(assign_traces({"x", "y", "z"}, {"a", "b"}) == assign_traces({"x", "y", "z"}, {"a", "b"}));
}

TEST_CASE("bandwidth_at step interpolation and wrap") {
    const BandwidthTrace t = make_trace({0, 5}, {1e6, 3e6});
    CHECK(bandwidth_at(t, 2.0) == 1e6);
    CHECK(bandwidth_at(t, 5.0) == 3e6);  // boundary inclusive
    CHECK(bandwidth_at(t, 9.9) == 3e6);
    CHECK(bandwidth_at(t, 10.0) == 1e6);  // duration = 5 + 5 (single gap), wraps

    const BandwidthTrace single = make_trace({0}, {1e6});
    CHECK(single.duration() == 1.0);
    CHECK(bandwidth_at(single, 1.5) == 1e6);
}

TEST_CASE("transfer_time integrates the step function") {
    const BandwidthTrace t = make_trace({0, 5}, {1e6, 3e6});
    CHECK(transfer_time(t, 0.0, 8e6) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(transfer_time(t, 0.0, 0.0) == 0.0);
}

TEST_CASE("transfer_time stalls on a zero-bandwidth trace") {
    const BandwidthTrace t = make_trace({0}, {0.0});
    CHECK_THROWS_AS(transfer_time(t, 0.0, 1.0), StalledTransfer);
}

TEST_CASE("transfer_time waits out a short zero plateau") {
    const BandwidthTrace t = make_trace({0, 10}, {0.0, 1e6});
    // 10 s of nothing, then 1 s of transfer
    CHECK(transfer_time(t, 0.0, 1e6) == doctest::Approx(11.0));
}

TEST_CASE("transfer_time constant-bandwidth closed form at any start") {
    const BandwidthTrace t = make_trace({0}, {2e6});
    for (double start : {0.0, 0.3, 17.9, 123.4})
        CHECK(transfer_time(t, start, 9e6) == doctest::Approx(4.5).epsilon(1e-12));
}

TEST_CASE("transfer_time monotone in bytes and integral-consistent") {
    Rng rng(42);
    for (int iter = 0; iter < 50; ++iter) {
        BandwidthTrace t;
        t.trace_id = "r";
        double ts = 0.0;
        const int n = 2 + static_cast<int>(rng.uniform_int(8));
        for (int i = 0; i < n; ++i) {
            t.times.push_back(ts);
            t.bandwidth.push_back(rng.uniform(1e5, 5e6));
            ts += rng.uniform(0.5, 4.0);
        }
        const double start = rng.uniform(0.0, 20.0);
        double prev = 0.0;
        for (double bytes : {1e5, 1e6, 5e6, 2e7}) {
            const double dt = transfer_time(t, start, bytes);
            CHECK(dt >= prev);
            prev = dt;
            // integrate bandwidth_at over [start, start+dt] with fine steps of
            // the exact step function: re-walk segments via transfer of the
            // integral; compare against bytes
            const double fine = 4096;
            double integral = 0.0;
            for (int k = 0; k < fine; ++k)
                integral += bandwidth_at(t, start + (k + 0.5) * dt / fine) * dt / fine;
            CHECK(integral == doctest::Approx(bytes).epsilon(2e-2));
        }
    }
}

TEST_CASE("synthetic static_mean preserves the time-average") {
    SyntheticTraceConfig cfg;
    cfg.n_traces = 3;
    const auto dynamic = generate_traces(cfg);
    cfg.static_mean = true;
    const auto flat = generate_traces(cfg);
    for (const auto& [id, t] : dynamic) {
        REQUIRE(flat.count(id) == 1);
        CHECK(flat.at(id).bandwidth.size() == 1);
        CHECK(flat.at(id).bandwidth[0] == doctest::Approx(t.mean_bandwidth()));
    }
}

TEST_CASE("TraceStore resolves assignments") {
    TraceStore store;
    store.traces.emplace("t0", make_trace({0}, {1e6}));
    store.assignment["c0"] = "t0";
    CHECK(store.for_client("c0").trace_id == "t");
    CHECK_THROWS_AS(store.for_client("nope"), UnknownClient);
}
