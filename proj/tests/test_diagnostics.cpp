#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "splitmc/diagnostics.hpp"
#include "splitmc/ppa.hpp"
#include "splitmc/trace_io.hpp"

using namespace splitmc;

namespace {

Trace make_trace(std::uint64_t fp, const std::vector<double>& dists) {
    Trace t;
    t.config_fingerprint = fp;
    for (std::size_t n = 0; n < dists.size(); ++n) {
        TraceRow r;
        r.step.n = static_cast<std::int64_t>(n);
        r.step.delta = 0.1 * static_cast<double>(n);
        r.step.d_norm = 0.01;
        r.step.lambda = 1.0;
        r.dist_to_ref = dists[n];
        t.rows.push_back(r);
    }
    return t;
}

}  // namespace

TEST_CASE("summarize: single trace echoes its series") {
    const Trace t = make_trace(7, {3.0, 2.0, 1.0});
    const EnsembleSummary es = summarize({t});
    CHECK(es.seed_count == 1);
    CHECK(es.mean_dist == std::vector<double>{3.0, 2.0, 1.0});
    CHECK(es.median_dist == std::vector<double>{3.0, 2.0, 1.0});
}

TEST_CASE("summarize: identical traces have zero spread") {
    const Trace t = make_trace(7, {3.0, 2.0});
    const EnsembleSummary es = summarize({t, t});
    CHECK(es.seed_count == 2);
    CHECK(es.q25_dist == es.q75_dist);
    CHECK(es.mean_dist == es.median_dist);
}

TEST_CASE("summarize: permutation invariance, bit for bit") {
    std::vector<Trace> traces = {make_trace(1, {3.0, 2.9}), make_trace(1, {1.0, 0.9}),
                                 make_trace(1, {2.0, 1.7})};
    const EnsembleSummary a = summarize(traces);
    std::reverse(traces.begin(), traces.end());
    const EnsembleSummary b = summarize(traces);
    CHECK(a.mean_dist == b.mean_dist);
    CHECK(a.median_dist == b.median_dist);
    CHECK(a.q25_dist == b.q25_dist);
}

TEST_CASE("summarize: fingerprint mismatch is rejected") {
    CHECK_THROWS_AS(summarize({make_trace(1, {1.0}), make_trace(2, {1.0})}), StructuralError);
}

TEST_CASE("fejer_check passes monotone traces and reports the corrupted index") {
    PpaConfig cfg;
    cfg.op = make_l1_subdiff(1, 1.0);
    const SpaceLayout l({1});
    const BlockVector z(l);
    PpaRunOptions opts;
    opts.z_ref = &z;
    PpaRunResult r = run_ppa(cfg, BlockVector(l, {5.0}), 15, 2, opts);
    CHECK(fejer_check(r.trace, 1e-10).empty());

    // run started at the reference: all distances zero
    PpaRunResult rz = run_ppa(cfg, BlockVector(l), 15, 2, opts);
    CHECK(fejer_check(rz.trace, 1e-10).empty());

    r.trace.rows[4].dist_to_ref += 0.5;
    const auto bad = fejer_check(r.trace, 1e-10);
    REQUIRE(!bad.empty());
    CHECK(std::find(bad.begin(), bad.end(), 4) != bad.end());  // jump into index 4
}

TEST_CASE("trace csv format: header, columns, blank NaN cells") {
    Trace t = make_trace(3, {1.0});
    t.rows[0].residual = std::numeric_limits<double>::quiet_NaN();
    const std::filesystem::path p = std::filesystem::temp_directory_path() / "splitmc_trace_test.csv";
    write_trace_csv(p, t);
    std::ifstream in(p);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "n,delta,theta,lambda,d_norm,tstar_norm,dist_to_ref,residual,active_blocks");
    CHECK(row == "0,0,0,1,0.01,0,1,,all");
    std::filesystem::remove(p);
}

TEST_CASE("format_double round-trips exactly") {
    for (double v : {1.0 / 3.0, 2.718281828459045, -0.0, 1e-300, 123456789.123456789}) {
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
}
