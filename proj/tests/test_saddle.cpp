#include <doctest.h>

#include <cmath>

#include "builders.hpp"
#include "oracles.hpp"
#include "splitmc/saddle.hpp"

using namespace splitmc;
using builders::all_indices;

namespace {

double state_diff(const SaddleProblem& p, const SaddleState& a, const SaddleState& b) {
    return norm(axpy(-1.0, pack_state(p, a), pack_state(p, b)));
}

}  // namespace

TEST_CASE("step size validation: feasible set and named violations") {
    auto inst = builders::make_constructed_saddle(1);
    CHECK(validate_step_sizes(inst.p, inst.s).ok());

    StepSizes bad = inst.s;
    bad.sigma = 1.0 / (4.0 * inst.p.alpha());  // boundary: strict inequality required
    CHECK_FALSE(validate_step_sizes(inst.p, bad).ok());

    bad = inst.s;
    bad.gamma[0] = 10.0;  // beyond 1/(alpha_l + chi + sigma)
    const auto rep = validate_step_sizes(inst.p, bad);
    REQUIRE_FALSE(rep.ok());
    CHECK(rep.violations.front().message.find("gamma[0]") != std::string::npos);
}

TEST_CASE("step size feasibility depends on the coupling constant") {
    // all operator constants 1, alpha = 1, sigma = 0.3, steps = 0.3:
    // gamma <= 1/(1 + chi + 0.3) decides feasibility as chi varies
    auto make = [](double chi) {
        SaddleProblem p;
        p.h = SpaceLayout({1});
        p.g = SpaceLayout({1});
        p.bi.push_back({make_l1_subdiff(1, 1.0), CocoerciveOp{make_identity_map(1), 1.0},
                        LipschitzMonotoneOp{make_identity_map(1), 1.0}, zeros(1)});
        p.bk.push_back({make_zero_op(1), CocoerciveOp{make_identity_map(1), 1.0},
                        LipschitzMonotoneOp{make_identity_map(1), 1.0}, make_zero_op(1),
                        CocoerciveOp{make_identity_map(1), 1.0},
                        LipschitzMonotoneOp{make_identity_map(1), 1.0}, zeros(1)});
        p.L = {{std::nullopt}};
        if (chi > 0.0)
            p.R = {make_affine_map(Matrix::diagonal({chi}), zeros(1)), chi};
        return p;
    };
    StepSizes s;
    s.sigma = 0.3;
    s.epsilon = 0.1;
    s.gamma = {0.3};
    s.mu = {0.3};
    s.nu = {0.3};
    s.sigk = {0.3};
    // chi = 1: 0.3 <= 1/(1+1+0.3) = 0.435 -> feasible
    CHECK(validate_step_sizes(make(1.0), s).ok());
    // chi = 3: 0.3 > 1/(1+3+0.3) = 0.233 -> infeasible, naming gamma[0]
    const auto rep = validate_step_sizes(make(3.0), s);
    REQUIRE_FALSE(rep.ok());
    CHECK(rep.violations.front().message.find("gamma[0]") != std::string::npos);
}

TEST_CASE("degenerate zero problem: gap vanishes and nothing moves") {
    SaddleProblem p;
    p.h = SpaceLayout({1});
    p.g = SpaceLayout({1});
    p.bi.push_back({make_zero_op(1), CocoerciveOp::zero(), LipschitzMonotoneOp::zero(), zeros(1)});
    p.bk.push_back({make_zero_op(1), CocoerciveOp::zero(), LipschitzMonotoneOp::zero(),
                    make_zero_op(1), CocoerciveOp::zero(), LipschitzMonotoneOp::zero(), zeros(1)});
    p.L = {{std::nullopt}};
    StepSizes s;
    s.sigma = 0.3;
    s.epsilon = 0.05;
    s.gamma = {1.0};
    s.mu = {1.0};
    s.nu = {1.0};
    s.sigk = {1.0};
    SaddleState st = SaddleState::initial(p, BlockVector(p.h), BlockVector(p.g), BlockVector(p.g),
                                          BlockVector(p.g));
    const StepRecord rec = saddle_iterate(p, s, st, {0}, {0}, 1.0, p.alpha());
    CHECK(rec.delta == 0.0);
    CHECK(rec.theta == 0.0);
    CHECK(norm(pack_state(p, st)) == 0.0);
}

TEST_CASE("scalar instance matches the straight-line scripted iteration") {
    // card I = card K = 1, all spaces R: A = subdiff|.|, C = Id (alpha=1),
    // Q = 0, R = 0, B = (0, Id, 0), D = (0, Id, 0), L = 1, s* = r = 0.
    SaddleProblem p;
    p.h = SpaceLayout({1});
    p.g = SpaceLayout({1});
    p.bi.push_back({make_l1_subdiff(1, 1.0), CocoerciveOp{make_identity_map(1), 1.0},
                    LipschitzMonotoneOp::zero(), zeros(1)});
    p.bk.push_back({make_zero_op(1), CocoerciveOp{make_identity_map(1), 1.0},
                    LipschitzMonotoneOp::zero(), make_zero_op(1),
                    CocoerciveOp{make_identity_map(1), 1.0}, LipschitzMonotoneOp::zero(), zeros(1)});
    Matrix l(1, 1);
    l.at(0, 0) = 1.0;
    p.L = {{LinearMap(l)}};
    CHECK(p.alpha() == 1.0);

    StepSizes s;
    s.sigma = 0.3;
    s.epsilon = 0.05;
    s.gamma = {0.2};
    s.mu = {0.2};
    s.nu = {0.2};
    s.sigk = {0.2};

    SaddleState st = SaddleState::initial(p, BlockVector(p.h, {1.0}), BlockVector(p.g, {1.0}),
                                          BlockVector(p.g, {1.0}), BlockVector(p.g, {1.0}));
    (void)saddle_iterate(p, s, st, {0}, {0}, 1.0, 1.0);

    oracle::ScalarSaddleOps ops;
    ops.JA = [](double gamma, double u) {  // prox of gamma*|.|
        if (u > gamma) return u - gamma;
        if (u < -gamma) return u + gamma;
        return 0.0;
    };
    ops.C = [](double u) { return u; };
    ops.Q = [](double) { return 0.0; };
    ops.R = [](double) { return 0.0; };
    ops.JBm = [](double, double u) { return u; };
    ops.Bc = [](double u) { return u; };
    ops.Bl = [](double) { return 0.0; };
    ops.JDm = [](double, double u) { return u; };
    ops.Dc = [](double u) { return u; };
    ops.Dl = [](double) { return 0.0; };
    const oracle::ScalarSaddleState want =
        oracle::scripted_saddle_step(ops, {1.0, 1.0, 1.0, 1.0}, 0.2, 0.2, 0.2, 0.2, 1.0, 1.0);

    CHECK(st.x[0] == doctest::Approx(want.x).epsilon(1e-14));
    CHECK(st.y[0] == doctest::Approx(want.y).epsilon(1e-14));
    CHECK(st.z[0] == doctest::Approx(want.z).epsilon(1e-14));
    CHECK(st.vstar[0] == doctest::Approx(want.vstar).epsilon(1e-14));
    // frozen values of the same step, hand-evaluated once from the recipe
    CHECK(st.x[0] == doctest::Approx(1.0 - (1.91 / 10.48) * 2.8).epsilon(1e-12));
    CHECK(st.vstar[0] == doctest::Approx(1.0 - (1.91 / 10.48) * 1.6).epsilon(1e-12));
}

TEST_CASE("a constructed zero is a fixed point and has zero residual") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        auto inst = builders::make_constructed_saddle(seed);
        CHECK(saddle_residual(inst.p, inst.zero.x, inst.zero.y, inst.zero.z, inst.zero.vstar) <=
              1e-10);
        SaddleState st = inst.zero;
        const StepRecord rec =
            saddle_iterate(inst.p, inst.s, st, all_indices(inst.p.ni()), all_indices(inst.p.nk()),
                           1.0, inst.p.alpha());
        CHECK(std::abs(rec.delta) <= 1e-10);
        CHECK(state_diff(inst.p, st, inst.zero) <= 1e-10);
    }
}

TEST_CASE("residual perturbation sandwich around a constructed zero") {
    auto inst = builders::make_constructed_saddle(4);
    for (double delta : {1e-3, 1e-4}) {
        SaddleState st = inst.zero;
        st.x.block(1)[0] += delta;  // quadratic primal block: locally smooth row
        const double r = saddle_residual(inst.p, st.x, st.y, st.z, st.vstar);
        CHECK(r >= delta / 10.0);
        CHECK(r <= 10.0 * delta);
    }
}

TEST_CASE("pathwise distance decrease toward a constructed zero (full activation)") {
    auto inst = builders::make_constructed_saddle(5);
    const BlockSampler full_i = BlockSampler::full(inst.p.ni());
    const BlockSampler full_k = BlockSampler::full(inst.p.nk());
    SaddleRunOptions opts;
    opts.z_ref = &inst.packed_zero;
    opts.check_invariants = true;
    for (std::uint64_t seed : {10ULL, 11ULL, 12ULL}) {
        const SaddleRunResult r =
            run_saddle(inst.p, inst.s, full_i, full_k, RelaxationSampler::uniform_interval(0.1, 1.9),
                       2.0, inst.start, 200, seed, opts);
        double prev = norm_sq(axpy(-1.0, inst.packed_zero, pack_state(inst.p, inst.start)));
        for (const TraceRow& row : r.trace.rows) {
            const double d2 = row.dist_to_ref * row.dist_to_ref;
            const double drop =
                row.step.lambda * (2.0 - row.step.lambda) * row.step.d_norm * row.step.d_norm;
            CHECK(d2 <= prev - drop + 1e-10 * std::max(1.0, prev));
            prev = d2;
        }
        CHECK(r.max_invariant_violation <= 1e-12);
    }
}

TEST_CASE("graph membership of the activated blocks") {
    auto inst = builders::make_constructed_saddle(6);
    SaddleState st = inst.start;
    const auto ai = all_indices(inst.p.ni());
    const auto ak = all_indices(inst.p.nk());
    for (int n = 0; n < 5; ++n)
        (void)saddle_iterate(inst.p, inst.s, st, ai, ak, 1.0, inst.p.alpha());

    // a* - C_i x_at_act + s* - Q a  must lie in A_i(a): resolvent inversion
    for (int i = 0; i < inst.p.ni(); ++i) {
        const auto& blk = inst.p.bi[static_cast<std::size_t>(i)];
        const Vec& a = st.a[static_cast<std::size_t>(i)];
        const Vec& astar = st.astar[static_cast<std::size_t>(i)];
        const Vec cx = blk.C.eval(ConstSpan(st.x_at_act[static_cast<std::size_t>(i)]));
        const Vec qa = blk.Q.eval(ConstSpan(a));
        Vec arg(a.size());
        const Vec ri_a = [&] {
            BlockVector ap(inst.p.h);
            for (int ii = 0; ii < inst.p.ni(); ++ii) {
                Span dst = ap.block(ii);
                const Vec& src = st.a[static_cast<std::size_t>(ii)];
                std::copy(src.begin(), src.end(), dst.begin());
            }
            return inst.p.eval_R_block(i, ap);
        }();
        (void)ri_a;
        for (std::size_t j = 0; j < a.size(); ++j)
            arg[j] = a[j] + (astar[j] - cx[j] + blk.s_star[j] - qa[j]);
        const Vec ja = resolvent(*blk.A, 1.0, ConstSpan(arg));
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(std::abs(ja[j] - a[j]) <= 1e-10);
    }
    // q* - Bc y_at_act + e*  must lie in (Bm + Bl)(b): invert through Bm
    for (int k = 0; k < inst.p.nk(); ++k) {
        const auto& blk = inst.p.bk[static_cast<std::size_t>(k)];
        const Vec& b = st.b[static_cast<std::size_t>(k)];
        const Vec& qstar = st.qstar[static_cast<std::size_t>(k)];
        const Vec& estar = st.estar[static_cast<std::size_t>(k)];
        const Vec cy = blk.Bc.eval(ConstSpan(st.y_at_act[static_cast<std::size_t>(k)]));
        const Vec blb = blk.Bl.eval(ConstSpan(b));
        Vec arg(b.size());
        for (std::size_t j = 0; j < b.size(); ++j)
            arg[j] = b[j] + (qstar[j] - cy[j] + estar[j] - blb[j]);
        const Vec jb = resolvent(*blk.Bm, 1.0, ConstSpan(arg));
        for (std::size_t j = 0; j < b.size(); ++j) CHECK(std::abs(jb[j] - b[j]) <= 1e-10);
    }
}

TEST_CASE("engine embedding: full-activation trajectory equals the abstract run") {
    auto inst = builders::make_constructed_saddle(7);
    const BlockSampler full_i = BlockSampler::full(inst.p.ni());
    const BlockSampler full_k = BlockSampler::full(inst.p.nk());
    const RelaxationSampler relax = RelaxationSampler::uniform_interval(0.1, 1.9);

    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        // jitter the start per seed for variety
        SaddleState start = inst.start;
        RngStream ir(seed, "init");
        for (double& v : start.x.data()) v += 0.5 * ir.next_gaussian();

        SaddleRunOptions sopts;
        sopts.record_iterates = true;
        const SaddleRunResult direct =
            run_saddle(inst.p, inst.s, full_i, full_k, relax, 2.0, start, 200, seed, sopts);

        EngineConfig ec;
        ec.alpha = inst.p.alpha();
        RunOptions eopts;
        eopts.record_iterates = true;
        const RunResult eng = run(pack_state(inst.p, start), make_saddle_supplier(inst.p, inst.s),
                                  relax, ec, 200, seed, eopts);

        REQUIRE(direct.iterates.size() == eng.iterates.size());
        for (std::size_t n = 0; n < eng.iterates.size(); ++n)
            CHECK(norm(axpy(-1.0, direct.iterates[n], eng.iterates[n])) <= 1e-10);
    }
}

TEST_CASE("cache carry and gap bookkeeping hold under random blocks") {
    auto inst = builders::make_constructed_saddle(8);
    SaddleRunOptions opts;
    opts.check_invariants = true;
    const SaddleRunResult r = run_saddle(
        inst.p, inst.s, BlockSampler::uniform_singleton(inst.p.ni(), 2),
        BlockSampler::uniform_singleton(inst.p.nk(), 2), RelaxationSampler::constant(1.0), 2.0,
        inst.start, 400, 99, opts);
    CHECK(r.max_invariant_violation <= 1e-12);
    CHECK(r.trace.rows.size() == 400);
    CHECK(r.trace.rows.front().active_blocks == "all");
}

TEST_CASE("first iteration must activate everything") {
    auto inst = builders::make_constructed_saddle(9);
    SaddleState st = inst.start;
    CHECK_THROWS_AS(saddle_iterate(inst.p, inst.s, st, {0}, {0, 1}, 1.0, inst.p.alpha()),
                    ParameterError);
}

TEST_CASE("scalar minimization instance converges to the grid minimizer") {
    const MinProblemSpec spec = builders::make_scalar_lasso_spec();
    const SaddleProblem p = build_min_problem(spec);
    CHECK(p.alpha() == 1.0);

    // independent oracle: dense scan of the objective, inf-conv by inner scan
    auto objective = [](double x) {
        auto g = [](double s) { return 0.5 * s * s; };
        auto h = [](double s) { return (s >= -0.5 && s <= 0.5) ? 0.0 : 1e100; };
        return std::abs(x) + 0.5 * (x - 2.0) * (x - 2.0) +
               oracle::infconv_value(g, h, x, -6.0, 6.0, 1e-3);
    };
    const double xstar = oracle::grid_argmin(objective, -4.0, 4.0, 1e-4);

    const StepSizes s = builders::scalar_lasso_steps();
    SaddleState init = SaddleState::initial(p, BlockVector(p.h, {3.0}), BlockVector(p.g, {0.0}),
                                            BlockVector(p.g, {0.0}), BlockVector(p.g, {0.0}));
    const SaddleRunResult r =
        run_saddle(p, s, BlockSampler::full(1), BlockSampler::full(1),
                   RelaxationSampler::constant(1.0), 2.0, init, 3000, 1);
    CHECK(std::abs(r.state.x[0] - xstar) <= 1e-3);

    // the final primal-dual pair satisfies the optimality rows
    CHECK(kt_condition_residual(spec, r.state.x, r.state.vstar) <= 1e-2);
}

TEST_CASE("build_min_problem: all-zero data makes every balanced point a zero") {
    MinProblemSpec spec;
    spec.h = SpaceLayout({2});
    spec.g = SpaceLayout({2});
    spec.f = {SeparableFun(2, Fun1d::zero())};
    spec.phi = {SeparableFun(2, Fun1d::zero())};
    spec.alpha_i = {kInf};
    spec.gfun = {SeparableFun(2, Fun1d::zero())};
    spec.psi = {SeparableFun(2, Fun1d::zero())};
    spec.beta_k = {kInf};
    spec.hfun = {SeparableFun(2, Fun1d::zero())};
    spec.L = {{LinearMap(Matrix::identity(2))}};
    const SaddleProblem p = build_min_problem(spec);
    CHECK(p.alpha() == kInf);
    const BlockVector x(p.h, {0.7, -0.4});
    const BlockVector y(p.g, {0.5, -1.0});
    const BlockVector z(p.g, {0.2, 0.6});  // y + z = x
    const BlockVector v(p.g);
    CHECK(saddle_residual(p, x, y, z, v) <= 1e-12);
}

TEST_CASE("build_min_problem: quadratic objective reaches its known minimum") {
    MinProblemSpec spec;
    spec.h = SpaceLayout({2});
    spec.g = SpaceLayout({1});
    spec.f = {SeparableFun(2, Fun1d::zero())};
    spec.phi = {SeparableFun({Fun1d::square(1.0, 1.5), Fun1d::square(2.0, -0.5)})};
    spec.alpha_i = {0.5};  // gradient is 2-Lipschitz
    spec.gfun = {SeparableFun(1, Fun1d::zero())};
    spec.psi = {SeparableFun(1, Fun1d::zero())};
    spec.beta_k = {kInf};
    spec.hfun = {SeparableFun(1, Fun1d::zero())};
    Matrix l(1, 2);
    l.at(0, 0) = 1.0;
    l.at(0, 1) = 1.0;
    spec.L = {{LinearMap(l)}};
    const SaddleProblem p = build_min_problem(spec);

    StepSizes s;
    s.sigma = 0.6;  // alpha = 0.5 -> need sigma > 0.5
    s.epsilon = 0.05;
    s.gamma = {1.0 / 0.7};
    s.mu = {1.0 / 0.7};
    s.nu = {1.0 / 0.7};
    s.sigk = {1.0};
    REQUIRE(validate_step_sizes(p, s).ok());
    SaddleState init = SaddleState::initial(p, BlockVector(p.h, {3.0, 3.0}), BlockVector(p.g, {0.0}),
                                            BlockVector(p.g, {0.0}), BlockVector(p.g, {0.0}));
    const SaddleRunResult r = run_saddle(p, s, BlockSampler::full(1), BlockSampler::full(1),
                                         RelaxationSampler::constant(1.0), 2.0, init, 2000, 1);
    CHECK(r.state.x[0] == doctest::Approx(1.5).epsilon(1e-4));
    CHECK(r.state.x[1] == doctest::Approx(-0.5).epsilon(1e-4));
}

TEST_CASE("kt_condition_residual: constructed zero, degenerate case, perturbation") {
    const MinProblemSpec spec = builders::make_scalar_lasso_spec();
    // saddle zero computed by the optimality rows: x=3/4, v*=1/4
    const BlockVector x(SpaceLayout({1}), {0.75});
    const BlockVector v(SpaceLayout({1}), {0.25});
    CHECK(kt_condition_residual(spec, x, v) <= 1e-10);

    // all-zero degenerate problem: everything balanced at the origin
    MinProblemSpec zspec;
    zspec.h = SpaceLayout({1});
    zspec.g = SpaceLayout({1});
    zspec.f = {SeparableFun(1, Fun1d::abs(1.0))};
    zspec.phi = {SeparableFun(1, Fun1d::zero())};
    zspec.alpha_i = {kInf};
    zspec.gfun = {SeparableFun(1, Fun1d::zero())};
    zspec.psi = {SeparableFun(1, Fun1d::zero())};
    zspec.beta_k = {kInf};
    zspec.hfun = {SeparableFun(1, Fun1d::box(-1.0, 1.0))};
    Matrix l(1, 1);
    l.at(0, 0) = 1.0;
    zspec.L = {{LinearMap(l)}};
    CHECK(kt_condition_residual(zspec, BlockVector(SpaceLayout({1})), BlockVector(SpaceLayout({1}))) ==
          0.0);

    // perturbing the primal coordinate moves the residual linearly
    for (double delta : {1e-3, 1e-5}) {
        const BlockVector xp(SpaceLayout({1}), {0.75 + delta});
        const double r = kt_condition_residual(spec, xp, v);
        CHECK(r >= delta / 10.0);
        CHECK(r <= 10.0 * delta);
    }
}

TEST_CASE("staleness diagnostic decays on a converging singleton run") {
    auto inst = builders::make_constructed_saddle(12);
    SaddleRunOptions opts;
    opts.z_ref = &inst.packed_zero;
    const int iters = 2000;
    double head = 0.0, tail = 0.0;
    int head_n = 0, tail_n = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const SaddleRunResult r = run_saddle(
            inst.p, inst.s, BlockSampler::uniform_singleton(inst.p.ni(), 2),
            BlockSampler::uniform_singleton(inst.p.nk(), 2), RelaxationSampler::constant(1.0), 2.0,
            inst.start, iters, seed, opts);
        for (int n = 1; n < iters / 4; ++n) {
            head += r.trace.rows[static_cast<std::size_t>(n)].staleness;
            ++head_n;
        }
        for (int n = 3 * iters / 4; n < iters; ++n) {
            tail += r.trace.rows[static_cast<std::size_t>(n)].staleness;
            ++tail_n;
        }
    }
    CHECK(tail / tail_n <= 0.1 * (head / head_n));
}
