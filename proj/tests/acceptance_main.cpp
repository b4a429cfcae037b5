// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances and budgets are pinned in code; the reference values
// come from the independent oracles in oracles.hpp.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "builders.hpp"
#include "oracles.hpp"
#include "splitmc/config.hpp"
#include "splitmc/diagnostics.hpp"
#include "splitmc/kt.hpp"
#include "splitmc/ppa.hpp"
#include "splitmc/saddle.hpp"
#include "splitmc/trace_io.hpp"

using namespace splitmc;
using builders::all_indices;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
    void fail(const std::string& why) {
        pass = false;
        if (!detail.empty()) detail += "; ";
        detail += why;
    }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

// --------------------------------------------------------------------------
// 1. Operator catalog: grid oracles + firm nonexpansiveness
// --------------------------------------------------------------------------
Outcome criterion1() {
    Outcome out;
    struct ProxCase {
        MaxMonotonePtr op;
        std::function<double(double)> f;
        std::string name;
    };
    std::vector<ProxCase> cases;
    cases.push_back({make_l1_subdiff(1, 1.0), [](double z) { return std::abs(z); }, "l1"});
    cases.push_back(
        {make_l1_subdiff(1, 0.35), [](double z) { return 0.35 * std::abs(z); }, "l1-weighted"});
    cases.push_back({make_diag_quadratic_subdiff({2.0}, {0.5}),
                     [](double z) { return (z - 0.5) * (z - 0.5); }, "quadratic"});
    cases.push_back({make_box_normal_cone({-1.0}, {2.0}),
                     [](double z) { return (z >= -1.0 && z <= 2.0) ? 0.0 : 1e100; }, "box"});
    RngStream rng(2027, "grid");
    for (const auto& c : cases) {
        for (int t = 0; t < 4; ++t) {
            const double x = 3.0 * rng.next_gaussian();
            const double gamma = std::exp(rng.next_uniform(-1.0, 1.0));
            const Vec xv = {x};
            const double lib = resolvent(*c.op, gamma, ConstSpan(xv))[0];
            const double ref = oracle::prox_oracle_1d(c.f, gamma, x, 1e-4);
            if (std::abs(lib - ref) > 2e-4)
                out.fail(c.name + ": prox deviates from the grid oracle by " + fmt(std::abs(lib - ref)));
        }
    }
    {
        // symmetric affine resolvent against the 2-D refined grid
        Matrix m(2, 2);
        m.at(0, 0) = 2.0;
        m.at(0, 1) = 0.5;
        m.at(1, 0) = 0.5;
        m.at(1, 1) = 1.0;
        const auto op = make_affine_monotone(m, {0.1, 0.0});
        auto f = [](double z0, double z1) {
            return 0.5 * (2.0 * z0 * z0 + z1 * z1) + 0.5 * z0 * z1 + 0.1 * z0;
        };
        const Vec x = {1.3, -0.7};
        const Vec r = resolvent(*op, 0.8, ConstSpan(x));
        const auto g = oracle::prox_oracle_2d(f, 0.8, x[0], x[1], 1e-4);
        if (std::abs(r[0] - g[0]) > 2e-4 || std::abs(r[1] - g[1]) > 2e-4)
            out.fail("affine-spd: 2-D grid deviation");
    }
    {
        // nonsymmetric affine: exact graph identity x - J = gamma*A(J)
        Matrix m(2, 2);
        m.at(0, 0) = 1.0;
        m.at(0, 1) = -2.0;
        m.at(1, 0) = 2.0;
        m.at(1, 1) = 0.5;
        const auto op = make_affine_monotone(m, {0.3, -0.1});
        for (int t = 0; t < 200; ++t) {
            Vec x = {4.0 * rng.next_gaussian(), 4.0 * rng.next_gaussian()};
            const double gamma = std::exp(rng.next_uniform(-1.5, 1.5));
            const Vec p = resolvent(*op, gamma, ConstSpan(x));
            const Vec mp = op->canonical_value(ConstSpan(p));
            for (int j = 0; j < 2; ++j)
                if (std::abs((x[static_cast<std::size_t>(j)] - p[static_cast<std::size_t>(j)]) -
                             gamma * mp[static_cast<std::size_t>(j)]) > 1e-10)
                    out.fail("affine graph identity violated");
        }
    }
    // firm nonexpansiveness over the whole catalog, 1000 pairs each
    std::vector<std::pair<std::string, MaxMonotonePtr>> catalog = {
        {"zero", make_zero_op(3)},
        {"l1", make_l1_subdiff(3, 1.0)},
        {"quadratic", make_diag_quadratic_subdiff({1.0, 2.5}, {0.5, -1.0})},
        {"box", make_box_normal_cone({-1.0, -0.5}, {1.0, 2.0})},
        {"affine", make_affine_monotone(Matrix::rotation2d(M_PI / 2.0), {0.5, -0.25})},
        {"shifted", make_shifted(make_l1_subdiff(2, 1.0), {0.3, -0.2})},
    };
    for (const auto& [name, op] : catalog) {
        double worst = -kInf;
        for (int t = 0; t < 1000; ++t) {
            const double gamma = std::exp(rng.next_uniform(-2.3, 2.3));
            Vec x(static_cast<std::size_t>(op->dim())), y(static_cast<std::size_t>(op->dim()));
            for (double& v : x) v = 4.0 * rng.next_gaussian();
            for (double& v : y) v = 4.0 * rng.next_gaussian();
            const double res = check_firm_nonexpansive(*op, gamma, ConstSpan(x), ConstSpan(y));
            const double scale = std::max(1.0, norm_sq(ConstSpan(sub(ConstSpan(x), ConstSpan(y)))));
            worst = std::max(worst, res / scale);
        }
        if (worst > 1e-10) out.fail(name + ": firm nonexpansiveness residual " + fmt(worst));
    }
    return out;
}

// --------------------------------------------------------------------------
// 2. Distance-decrease suite: zero-error runs against constructed zeros
// --------------------------------------------------------------------------
Outcome criterion2() {
    Outcome out;
    const int kSeeds = 50;
    const int kIters = 500;
    auto check_trace = [&out](const Trace& tr, double d2_start, const std::string& tag) {
        double prev = d2_start;
        for (const TraceRow& row : tr.rows) {
            const double d2 = row.dist_to_ref * row.dist_to_ref;
            const double drop =
                row.step.lambda * (2.0 - row.step.lambda) * row.step.d_norm * row.step.d_norm;
            if (d2 > prev - drop + 1e-10 * std::max(1.0, prev)) {
                out.fail(tag + ": decrease inequality violated at n=" + std::to_string(row.step.n));
                return;
            }
            prev = d2;
        }
    };

    // proximal point path
    {
        PpaConfig cfg;
        cfg.op = make_diag_quadratic_subdiff({1.0, 0.6, 2.0}, {0.5, -1.0, 0.2});
        cfg.relax = RelaxationSampler::uniform_interval(0.05, 1.95);
        cfg.gammas = GammaRule::constant(0.9);
        const SpaceLayout l({3});
        const BlockVector z(l, {0.5, -1.0, 0.2});
        PpaRunOptions opts;
        opts.z_ref = &z;
        for (int s = 1; s <= kSeeds && out.pass; ++s) {
            RngStream ir(static_cast<std::uint64_t>(s), "init");
            BlockVector x0(l);
            for (double& v : x0.data()) v = 4.0 * ir.next_gaussian();
            const PpaRunResult r = run_ppa(cfg, x0, kIters, static_cast<std::uint64_t>(s), opts);
            check_trace(r.trace, norm_sq(axpy(-1.0, z, x0)), "ppa seed " + std::to_string(s));
        }
    }
    // saddle path
    {
        auto inst = builders::make_constructed_saddle(100);
        SaddleRunOptions opts;
        opts.z_ref = &inst.packed_zero;
        opts.check_invariants = true;
        const RelaxationSampler relax = RelaxationSampler::uniform_interval(0.1, 2.0);
        for (int s = 1; s <= kSeeds && out.pass; ++s) {
            SaddleState start = inst.start;
            RngStream ir(static_cast<std::uint64_t>(s), "init");
            for (double& v : start.x.data()) v += ir.next_gaussian();
            const SaddleRunResult r =
                run_saddle(inst.p, inst.s, BlockSampler::full(inst.p.ni()),
                           BlockSampler::full(inst.p.nk()), relax, 2.0, start, kIters,
                           static_cast<std::uint64_t>(s), opts);
            check_trace(r.trace, norm_sq(axpy(-1.0, inst.packed_zero, pack_state(inst.p, start))),
                        "saddle seed " + std::to_string(s));
        }
    }
    // primal-dual pairing path
    {
        auto inst = builders::make_constructed_kt(100);
        KTRunOptions opts;
        opts.z_ref = &inst.packed_zero;
        opts.check_invariants = true;
        const RelaxationSampler relax = RelaxationSampler::uniform_interval(0.1, 2.0);
        for (int s = 1; s <= kSeeds && out.pass; ++s) {
            KTState start = inst.start;
            RngStream ir(static_cast<std::uint64_t>(s), "init");
            for (double& v : start.x.data()) v += ir.next_gaussian();
            const KTRunResult r =
                run_kt(inst.p, inst.s, BlockSampler::full(inst.p.ni()),
                       BlockSampler::full(inst.p.nk()), relax, 2.0, start, kIters,
                       static_cast<std::uint64_t>(s), opts);
            check_trace(r.trace, norm_sq(axpy(-1.0, inst.packed_zero, pack_state(inst.p, start))),
                        "kt seed " + std::to_string(s));
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// 3. Proximal point exactness + regime classification
// --------------------------------------------------------------------------
Outcome criterion3() {
    Outcome out;
    PpaConfig cfg;
    cfg.op = make_l1_subdiff(1, 1.0);
    PpaRunOptions opts;
    opts.record_iterates = true;
    const SpaceLayout l({1});
    const PpaRunResult r = run_ppa(cfg, BlockVector(l, {5.0}), 10, 1, opts);
    const std::vector<double> want = oracle::soft_threshold_recursion(5.0, 1.0, 1.0, 10);
    for (std::size_t n = 0; n < want.size(); ++n)
        if (std::abs(r.iterates[n][0] - want[n]) > 1e-12) {
            out.fail("iterate " + std::to_string(n) + " off by " +
                     fmt(std::abs(r.iterates[n][0] - want[n])));
            break;
        }

    PpaConfig c1;
    c1.op = cfg.op;
    if (validate_regime(c1) != PpaRegime::I) out.fail("constant-one configuration not regime i");
    PpaConfig c2;
    c2.op = cfg.op;
    c2.gammas = GammaRule::constant(0.5);
    c2.relax = RelaxationSampler::two_point(0.5, 0.5, 1.5);
    c2.errors = ErrorSchedule::deterministic(1.0, 0.5);
    if (validate_regime(c2) != PpaRegime::II) out.fail("bounded-below configuration not regime ii");
    PpaConfig c3;
    c3.op = cfg.op;
    c3.gammas = GammaRule::inv_sqrt(1.0);
    if (validate_regime(c3) != PpaRegime::III) out.fail("square-sum-divergent configuration not regime iii");
    return out;
}

// --------------------------------------------------------------------------
// 4. Saddle fixed point + oracle convergence
// --------------------------------------------------------------------------
Outcome criterion4() {
    Outcome out;
    {
        auto inst = builders::make_constructed_saddle(200);
        SaddleState st = inst.zero;
        (void)saddle_iterate(inst.p, inst.s, st, all_indices(inst.p.ni()),
                             all_indices(inst.p.nk()), 1.0, inst.p.alpha());
        const double moved = norm(axpy(-1.0, pack_state(inst.p, inst.zero), pack_state(inst.p, st)));
        if (moved > 1e-10) out.fail("constructed zero moved by " + fmt(moved));
    }

    const MinProblemSpec spec = builders::make_scalar_lasso_spec();
    const SaddleProblem p = build_min_problem(spec);
    const StepSizes s = builders::scalar_lasso_steps();

    // two-stage brute-force oracle for the minimizer
    auto objective = [](double x) {
        auto g = [](double t) { return 0.5 * t * t; };
        auto h = [](double t) { return (t >= -0.5 && t <= 0.5) ? 0.0 : 1e100; };
        return std::abs(x) + 0.5 * (x - 2.0) * (x - 2.0) +
               oracle::infconv_value(g, h, x, -6.0, 6.0, 1e-3);
    };
    const double coarse = oracle::grid_argmin(objective, -4.0, 4.0, 1e-3);
    const double xstar = oracle::grid_argmin(objective, coarse - 2e-3, coarse + 2e-3, 1e-6);

    {
        SaddleState init = SaddleState::initial(p, BlockVector(p.h, {3.0}), BlockVector(p.g, {0.0}),
                                                BlockVector(p.g, {0.0}), BlockVector(p.g, {0.0}));
        const SaddleRunResult r =
            run_saddle(p, s, BlockSampler::full(1), BlockSampler::full(1),
                       RelaxationSampler::constant(1.0), 2.0, init, 5000, 1);
        if (std::abs(r.state.x[0] - xstar) > 1e-4)
            out.fail("full activation missed the oracle minimizer by " +
                     fmt(std::abs(r.state.x[0] - xstar)));
    }
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RngStream ir(seed, "init");
        SaddleState init = SaddleState::initial(
            p, BlockVector(p.h, {3.0 + ir.next_gaussian()}), BlockVector(p.g, {0.0}),
            BlockVector(p.g, {0.0}), BlockVector(p.g, {0.0}));
        SaddleRunOptions opts;
        opts.check_invariants = true;
        const SaddleRunResult r =
            run_saddle(p, s, BlockSampler::uniform_singleton(1, 1), BlockSampler::uniform_singleton(1, 1),
                       RelaxationSampler::constant(1.0), 2.0, init, 20000, seed, opts);
        if (std::abs(r.state.x[0] - xstar) > 1e-3) {
            out.fail("singleton-block seed " + std::to_string(seed) + " off by " +
                     fmt(std::abs(r.state.x[0] - xstar)));
            break;
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// 5. Primal-dual residual decay on the scalar instance
// --------------------------------------------------------------------------
Outcome criterion5() {
    Outcome out;
    const KTProblem p = builders::make_scalar_kt();
    const KTStepSizes s = builders::scalar_kt_steps();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RngStream ir(seed, "init");
        KTState init = KTState::initial(p, BlockVector(p.h, {2.0 + ir.next_gaussian()}),
                                        BlockVector(p.g, {ir.next_gaussian()}));
        const KTRunResult full = run_kt(p, s, BlockSampler::full(1), BlockSampler::full(1),
                                        RelaxationSampler::constant(1.0), 2.0, init, 2000, seed);
        const double rfull = kt_residual(p, full.state.x, full.state.vstar);
        if (rfull > 1e-6) {
            out.fail("full activation seed " + std::to_string(seed) + " residual " + fmt(rfull));
            break;
        }
        const KTRunResult single =
            run_kt(p, s, BlockSampler::uniform_singleton(1, 1), BlockSampler::uniform_singleton(1, 1),
                   RelaxationSampler::constant(1.0), 2.0, init, 10000, seed);
        const double rsingle = kt_residual(p, single.state.x, single.state.vstar);
        if (rsingle > 1e-4) {
            out.fail("singleton seed " + std::to_string(seed) + " residual " + fmt(rsingle));
            break;
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// 6. Engine embedding of the two specialized iterations
// --------------------------------------------------------------------------
Outcome criterion6() {
    Outcome out;
    {
        auto inst = builders::make_constructed_saddle(300);
        const RelaxationSampler relax = RelaxationSampler::uniform_interval(0.1, 1.9);
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            SaddleState start = inst.start;
            RngStream ir(seed, "init");
            for (double& v : start.x.data()) v += 0.5 * ir.next_gaussian();
            SaddleRunOptions sopts;
            sopts.record_iterates = true;
            const SaddleRunResult direct =
                run_saddle(inst.p, inst.s, BlockSampler::full(inst.p.ni()),
                           BlockSampler::full(inst.p.nk()), relax, 2.0, start, 200, seed, sopts);
            EngineConfig ec;
            ec.alpha = inst.p.alpha();
            RunOptions eopts;
            eopts.record_iterates = true;
            const RunResult eng = run(pack_state(inst.p, start), make_saddle_supplier(inst.p, inst.s),
                                      relax, ec, 200, seed, eopts);
            for (std::size_t n = 0; n < eng.iterates.size(); ++n) {
                const double d = norm(axpy(-1.0, direct.iterates[n], eng.iterates[n]));
                if (d > 1e-10) {
                    out.fail("saddle seed " + std::to_string(seed) + " deviates by " + fmt(d));
                    break;
                }
            }
        }
    }
    {
        auto inst = builders::make_constructed_kt(300);
        const RelaxationSampler relax = RelaxationSampler::uniform_interval(0.1, 1.9);
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            KTState start = inst.start;
            RngStream ir(seed, "init");
            for (double& v : start.x.data()) v += 0.5 * ir.next_gaussian();
            KTRunOptions kopts;
            kopts.record_iterates = true;
            const KTRunResult direct =
                run_kt(inst.p, inst.s, BlockSampler::full(inst.p.ni()),
                       BlockSampler::full(inst.p.nk()), relax, 2.0, start, 200, seed, kopts);
            EngineConfig ec;
            ec.alpha = kInf;
            RunOptions eopts;
            eopts.record_iterates = true;
            const RunResult eng = run(pack_state(inst.p, start), make_kt_supplier(inst.p, inst.s),
                                      relax, ec, 200, seed, eopts);
            for (std::size_t n = 0; n < eng.iterates.size(); ++n) {
                const double d = norm(axpy(-1.0, direct.iterates[n], eng.iterates[n]));
                if (d > 1e-10) {
                    out.fail("kt seed " + std::to_string(seed) + " deviates by " + fmt(d));
                    break;
                }
            }
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// 7. Sampler statistics + relaxation law acceptance
// --------------------------------------------------------------------------
Outcome criterion7() {
    Outcome out;
    const int windows = 10000;
    for (const BlockSampler& s :
         {BlockSampler::full(3, 2), BlockSampler::uniform_singleton(3, 2),
          BlockSampler::bernoulli({0.5, 0.25, 0.125}, 2)}) {
        RngStream rng(4242, "blocks");
        (void)s.sample(0, rng);
        std::vector<int> hits(3, 0);
        std::int64_t n = 1;
        for (int w = 0; w < windows; ++w) {
            std::set<int> seen;
            for (int j = 0; j < s.window(); ++j) {
                for (int i : s.sample(n, rng)) seen.insert(i);
                ++n;
            }
            for (int i = 0; i < 3; ++i)
                if (seen.count(i)) ++hits[static_cast<std::size_t>(i)];
        }
        for (int i = 0; i < 3; ++i) {
            const double p = s.cover_probability(i);
            const double phat = static_cast<double>(hits[static_cast<std::size_t>(i)]) / windows;
            const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / windows);
            if (std::abs(phat - p) > 3.0 * se + 1e-9)
                out.fail(s.describe() + " cover mismatch at index " + std::to_string(i) + ": " +
                         fmt(phat) + " vs " + fmt(p));
        }
    }
    const int draws = 100000;
    for (const RelaxationSampler& s :
         {RelaxationSampler::constant(1.3), RelaxationSampler::uniform_interval(0.2, 1.9),
          RelaxationSampler::two_point(0.5, 0.8, 2.5)}) {
        RngStream rng(11, "relax");
        double sum = 0.0, sumsq = 0.0;
        for (int t = 0; t < draws; ++t) {
            const double l = s.sample(rng);
            const double v = l * (2.0 - l);
            sum += v;
            sumsq += v * v;
        }
        const double mean = sum / draws;
        const double var = sumsq / draws - mean * mean;
        const double se = std::sqrt(std::max(var, 1e-12) / draws);
        if (std::abs(mean - s.moment()) > 3.0 * se + 1e-9)
            out.fail(s.describe() + " moment mismatch: " + fmt(mean) + " vs " + fmt(s.moment()));
    }
    const RelaxationSampler super = RelaxationSampler::two_point(0.5, 0.8, 2.5);
    if (std::abs(super.moment() - 0.35) > 1e-12 || std::abs(super.prob_above_two() - 0.2) > 1e-12)
        out.fail("super-relaxation law moments wrong");
    {
        // accepted by the runner with rho = 2.5; the half/half variant rejected
        const KTProblem p = builders::make_scalar_kt();
        const KTStepSizes s = builders::scalar_kt_steps();
        KTState init = KTState::initial(p, BlockVector(p.h, {2.0}), BlockVector(p.g, {0.0}));
        bool accepted = true;
        try {
            (void)run_kt(p, s, BlockSampler::full(1), BlockSampler::full(1), super, 2.5, init, 5, 1);
        } catch (const std::exception&) {
            accepted = false;
        }
        if (!accepted) out.fail("valid super-relaxation law was rejected");
        bool rejected = false;
        try {
            (void)run_kt(p, s, BlockSampler::full(1), BlockSampler::full(1),
                         RelaxationSampler::two_point(0.5, 0.5, 2.5), 2.5, init, 5, 1);
        } catch (const ParameterError&) {
            rejected = true;
        }
        if (!rejected) out.fail("negative-moment law was accepted");
    }
    return out;
}

// --------------------------------------------------------------------------
// 8. Super-relaxation in-expectation monotonicity on the scalar instance
// --------------------------------------------------------------------------
Outcome criterion8() {
    Outcome out;
    const KTProblem p = builders::make_scalar_kt();
    const KTStepSizes s = builders::scalar_kt_steps();
    const RelaxationSampler super = RelaxationSampler::two_point(0.5, 0.8, 2.5);
    const auto [xbar, vbar] = oracle::scalar_kt_point([](double x) { return x - 1.0; }, -3.0, 3.0, 1e-6);
    const SpaceLayout packed = kt_packed_layout(p);
    const BlockVector z(packed, {xbar, vbar});

    const int seeds = 500;
    const int iters = 500;
    std::vector<std::vector<double>> d2(static_cast<std::size_t>(seeds));
    for (int sd = 0; sd < seeds; ++sd) {
        RngStream ir(static_cast<std::uint64_t>(sd) + 1, "init");
        KTState init = KTState::initial(p, BlockVector(p.h, {2.0 + ir.next_gaussian()}),
                                        BlockVector(p.g, {ir.next_gaussian()}));
        KTRunOptions opts;
        opts.record_iterates = true;
        opts.residual_every = 1 << 20;
        const KTRunResult r = run_kt(p, s, BlockSampler::full(1), BlockSampler::full(1), super, 2.5,
                                     init, iters, static_cast<std::uint64_t>(sd) + 1, opts);
        std::vector<double> row;
        row.reserve(r.iterates.size());
        for (const BlockVector& it : r.iterates) row.push_back(norm_sq(axpy(-1.0, z, it)));
        d2[static_cast<std::size_t>(sd)] = std::move(row);
    }
    for (int n = 0; n < iters; ++n) {
        double mean = 0.0;
        for (int sd = 0; sd < seeds; ++sd)
            mean += d2[static_cast<std::size_t>(sd)][static_cast<std::size_t>(n + 1)] -
                    d2[static_cast<std::size_t>(sd)][static_cast<std::size_t>(n)];
        mean /= seeds;
        double var = 0.0;
        for (int sd = 0; sd < seeds; ++sd) {
            const double inc = d2[static_cast<std::size_t>(sd)][static_cast<std::size_t>(n + 1)] -
                               d2[static_cast<std::size_t>(sd)][static_cast<std::size_t>(n)];
            var += (inc - mean) * (inc - mean);
        }
        const double se = std::sqrt(var / (seeds - 1.0) / seeds);
        if (mean > 3.0 * se + 1e-15) {
            out.fail("mean squared distance increased at n=" + std::to_string(n) + " by " + fmt(mean) +
                     " (3se=" + fmt(3.0 * se) + ")");
            break;
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// 9. Cache-carry and gap bookkeeping on every saddle run configuration
// --------------------------------------------------------------------------
Outcome criterion9() {
    Outcome out;
    auto inst = builders::make_constructed_saddle(400);
    const std::vector<std::pair<BlockSampler, BlockSampler>> samplers = {
        {BlockSampler::full(inst.p.ni()), BlockSampler::full(inst.p.nk())},
        {BlockSampler::uniform_singleton(inst.p.ni(), 2), BlockSampler::uniform_singleton(inst.p.nk(), 2)},
        {BlockSampler::bernoulli({0.6, 0.4}, 2), BlockSampler::bernoulli({0.5, 0.5}, 2)},
    };
    for (const auto& [si, sk] : samplers) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            SaddleRunOptions opts;
            opts.check_invariants = true;
            opts.invariant_rel_tol = 1e-12;
            try {
                const SaddleRunResult r = run_saddle(inst.p, inst.s, si, sk,
                                                     RelaxationSampler::constant(1.0), 2.0,
                                                     inst.start, 500, seed, opts);
                if (r.max_invariant_violation > 1e-12)
                    out.fail(si.describe() + ": bookkeeping violation " + fmt(r.max_invariant_violation));
            } catch (const StructuralError& ex) {
                out.fail(std::string("invariant check threw: ") + ex.what());
            }
        }
    }
    // also on the minimization instance with random blocks
    const SaddleProblem p = build_min_problem(builders::make_scalar_lasso_spec());
    const StepSizes s = builders::scalar_lasso_steps();
    SaddleState init = SaddleState::initial(p, BlockVector(p.h, {3.0}), BlockVector(p.g, {0.0}),
                                            BlockVector(p.g, {0.0}), BlockVector(p.g, {0.0}));
    SaddleRunOptions opts;
    opts.check_invariants = true;
    try {
        const SaddleRunResult r =
            run_saddle(p, s, BlockSampler::uniform_singleton(1, 1), BlockSampler::uniform_singleton(1, 1),
                       RelaxationSampler::constant(1.0), 2.0, init, 2000, 9, opts);
        if (r.max_invariant_violation > 1e-12)
            out.fail("minimization run bookkeeping violation " + fmt(r.max_invariant_violation));
    } catch (const StructuralError& ex) {
        out.fail(std::string("invariant check threw: ") + ex.what());
    }
    return out;
}

// --------------------------------------------------------------------------
// 10. Byte-identical reruns through the CLI layer
// --------------------------------------------------------------------------
Outcome criterion10() {
    Outcome out;
    using nlohmann::json;
    const fs::path base = fs::temp_directory_path() / "splitmc_acceptance_det";
    fs::remove_all(base);
    fs::create_directories(base);

    const json ppa = {
        {"algorithm", "ppa"},
        {"problem",
         {{"operator", {{"kind", "l1"}, {"dim", 2}, {"weight", 1.0}}},
          {"gamma_rule", {{"kind", "constant"}, {"value", 1.0}}},
          {"x0", {5.0, -3.0}}}},
        {"relaxation", {{"kind", "uniform-interval"}, {"lo", 0.2}, {"hi", 1.8}}},
        {"error_schedule", {{"kind", "gaussian-decay"}, {"c", 0.2}, {"q", 0.7}}},
        {"reference", {{"kind", "constructed"}}},
        {"n_iter", 60},
        {"seeds", {{"base", 11}, {"count", 4}}},
        {"x0_jitter", 0.5},
    };
    const json kt = {
        {"algorithm", "kt"},
        {"problem",
         {{"h_dims", {1}},
          {"g_dims", {1}},
          {"A", {{{"kind", "l1"}, {"dim", 1}, {"weight", 1.0}}}},
          {"B", {{{"kind", "quadratic"}, {"curvature", {1.0}}, {"center", {1.0}}}}},
          {"L", {{{{"matrix", {{1.0}}}}}}},
          {"x0", {2.0}},
          {"v0", {0.0}}}},
        {"step_sizes", {{"epsilon", 0.05}, {"gamma", {1.0}}, {"mu", {1.0}}}},
        {"block_sampler", {{"kind", "iid-uniform-singleton"}, {"window", 1}}},
        {"relaxation", {{"kind", "uniform-interval"}, {"lo", 0.2}, {"hi", 1.8}}},
        {"n_iter", 200},
        {"seeds", {{"base", 3}, {"count", 4}}},
        {"residual_every", 10},
    };
    int idx = 0;
    for (const json& doc : {ppa, kt}) {
        const fs::path cfg = base / ("cfg" + std::to_string(idx) + ".json");
        {
            std::ofstream o(cfg);
            o << doc.dump(2);
        }
        const fs::path o1 = base / ("out" + std::to_string(idx) + "_a");
        const fs::path o2 = base / ("out" + std::to_string(idx) + "_b");
        if (cli::cmd_run(cfg, o1.string(), "", true) != 0 ||
            cli::cmd_run(cfg, o2.string(), "", true) != 0) {
            out.fail("run failed for config " + std::to_string(idx));
            ++idx;
            continue;
        }
        int compared = 0;
        for (const auto& e : fs::directory_iterator(o1)) {
            if (e.path().extension() != ".csv") continue;
            std::ifstream a(e.path(), std::ios::binary);
            std::ifstream b(o2 / e.path().filename(), std::ios::binary);
            const std::string sa((std::istreambuf_iterator<char>(a)), {});
            const std::string sb((std::istreambuf_iterator<char>(b)), {});
            if (sa != sb || sa.empty())
                out.fail("trace bytes differ for " + e.path().filename().string());
            ++compared;
        }
        if (compared < 4) out.fail("expected at least four csv files per run");
        ++idx;
    }
    fs::remove_all(base);
    return out;
}

}  // namespace

int main() {
    struct Entry {
        int id;
        const char* name;
        Outcome (*fn)();
    };
    const Entry entries[] = {
        {1, "operator catalog: grid oracles + firm nonexpansiveness", &criterion1},
        {2, "distance-decrease suite (ppa/saddle/kt, constructed zeros)", &criterion2},
        {3, "proximal point exactness + regime classification", &criterion3},
        {4, "saddle fixed point + oracle convergence", &criterion4},
        {5, "primal-dual residual decay (scalar instance)", &criterion5},
        {6, "engine embedding of the specialized iterations", &criterion6},
        {7, "sampler statistics + relaxation law acceptance", &criterion7},
        {8, "super-relaxation: ensemble mean decrease", &criterion8},
        {9, "cache-carry + gap bookkeeping identities", &criterion9},
        {10, "byte-identical reruns", &criterion10},
    };
    int failures = 0;
    for (const Entry& e : entries) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = e.fn();
        } catch (const std::exception& ex) {
            out.fail(std::string("exception: ") + ex.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s  %2d  %-58s (%.1fs)%s%s\n", out.pass ? "PASS" : "FAIL", e.id, e.name, secs,
                    out.detail.empty() ? "" : "  -- ", out.detail.c_str());
        if (!out.pass) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
