#include "splitmc/engine.hpp"

#include <cmath>
#include <string>

#include "splitmc/operators.hpp"

namespace splitmc {

void EngineConfig::validate() const {
    if (!(alpha > 0.0)) throw ParameterError("EngineConfig: alpha must be positive");
    if (!(rho >= 2.0)) throw ParameterError("EngineConfig: rho must be >= 2");
    if (zero_tol < 0.0) throw ParameterError("EngineConfig: zero_tol must be >= 0");
}

double gap(const BlockVector& x, const GraphSample& s, double alpha) {
    if (!(alpha > 0.0)) throw ParameterError("gap: alpha must be positive");
    require_same_layout(x, s.w, "gap");
    require_same_layout(s.w, s.q, "gap");
    double lin = 0.0;
    const Vec& xd = x.data();
    const Vec& wd = s.w.data();
    const Vec& wsd = s.wstar.data();
    const Vec& csd = s.cstar.data();
    for (std::size_t j = 0; j < xd.size(); ++j) lin += (xd[j] - wd[j]) * (wsd[j] + csd[j]);
    const double coef = (alpha == kInf) ? 0.0 : 1.0 / (4.0 * alpha);
    if (coef == 0.0) return lin;
    double wq = 0.0;
    const Vec& qd = s.q.data();
    for (std::size_t j = 0; j < wd.size(); ++j) {
        const double d = wd[j] - qd[j];
        wq += d * d;
    }
    return lin - coef * wq;
}

double step_size(double delta, const BlockVector& tstar, double zero_tol_abs) {
    if (delta <= 0.0) return 0.0;
    const double t2 = norm_sq(tstar);
    if (t2 <= zero_tol_abs) return 0.0;
    return delta / t2;
}

BlockVector relaxed_update(const BlockVector& x, double theta, const BlockVector& tstar,
                           double lambda, double rho) {
    if (!(lambda > 0.0) || !(lambda <= rho))
        throw ParameterError("relaxed_update: lambda must lie in (0, rho]");
    return axpy(-lambda * theta, tstar, x);
}

double realized_error_term(const GraphSample& s, double theta, const BlockVector& z,
                           const BlockVector& cz) {
    double acc = 0.0;
    const Vec& wd = s.w.data();
    const Vec& zd = z.data();
    const Vec& ed = s.e.data();
    const Vec& esd = s.estar.data();
    const Vec& fsd = s.fstar.data();
    const Vec& wsd = s.wstar.data();
    const Vec& czd = cz.data();
    for (std::size_t j = 0; j < wd.size(); ++j) {
        acc += theta * (wd[j] - zd[j]) * (esd[j] + fsd[j]);
        acc += ed[j] * (wsd[j] + czd[j]);
        acc += ed[j] * esd[j];
    }
    return acc > 0.0 ? acc : 0.0;
}

RunResult run(const BlockVector& x0, const Supplier& supplier, const RelaxationSampler& relax,
              const EngineConfig& cfg, std::int64_t n_iter, std::uint64_t seed,
              const RunOptions& opts) {
    cfg.validate();
    if (relax.max_support() > cfg.rho || !(relax.min_support() > 0.0))
        throw ParameterError("run: relaxation support must lie in (0, rho]");

    RngStream noise(seed, "supplier-noise");
    RngStream relax_rng(seed, "relax");

    RunResult res;
    res.x = x0;
    res.trace.config_fingerprint = opts.fingerprint;
    res.trace.rows.reserve(static_cast<std::size_t>(n_iter));
    if (opts.record_iterates) res.iterates.push_back(res.x);

    for (std::int64_t n = 0; n < n_iter; ++n) {
        GraphSample s = supplier(n, res.x, noise);
        require_same_layout(res.x, s.w, "run");

        BlockVector tstar = axpy(1.0, s.wstar, s.cstar);
        const double delta = gap(res.x, s, cfg.alpha);
        const double tnorm2 = norm_sq(tstar);
        if (!std::isfinite(delta) || !std::isfinite(tnorm2))
            throw NumericalError("run: non-finite update quantities at iteration " + std::to_string(n));

        const double zero_abs = cfg.zero_tol * std::max(1.0, norm_sq(res.x));
        const double theta = step_size(delta, tstar, zero_abs);
        const double lambda = relax.sample(relax_rng);
        res.x = relaxed_update(res.x, theta, tstar, lambda, cfg.rho);

        TraceRow row;
        row.step.n = n;
        row.step.delta = delta;
        row.step.theta = theta;
        row.step.lambda = lambda;
        row.step.tstar_norm = std::sqrt(tnorm2);
        row.step.d_norm = theta * row.step.tstar_norm;
        if (opts.z_ref) row.dist_to_ref = norm(axpy(-1.0, *opts.z_ref, res.x));
        if (opts.residual_fn && (n % std::max(1, opts.residual_every) == 0 || n == n_iter - 1))
            row.residual = opts.residual_fn(res.x);
        res.trace.rows.push_back(std::move(row));
        if (opts.record_iterates) res.iterates.push_back(res.x);
    }
    return res;
}

}  // namespace splitmc
