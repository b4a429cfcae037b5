#include "splitmc/ppa.hpp"

#include <cmath>

namespace splitmc {

GammaRule GammaRule::constant(double value) {
    if (!(value > 0.0)) throw ParameterError("GammaRule: value must be positive");
    GammaRule g;
    g.kind_ = Kind::Constant;
    g.a_ = value;
    return g;
}

GammaRule GammaRule::decay_to(double limit, double start) {
    if (!(limit > 0.0) || !(start >= limit)) throw ParameterError("GammaRule: need start >= limit > 0");
    GammaRule g;
    g.kind_ = Kind::DecayTo;
    g.a_ = limit;
    g.b_ = start;
    return g;
}

GammaRule GammaRule::inv_sqrt(double scale) {
    if (!(scale > 0.0)) throw ParameterError("GammaRule: scale must be positive");
    GammaRule g;
    g.kind_ = Kind::InvSqrt;
    g.a_ = scale;
    return g;
}

double GammaRule::value(std::int64_t n) const {
    switch (kind_) {
        case Kind::Constant: return a_;
        case Kind::DecayTo: return a_ + (b_ - a_) * std::pow(0.5, static_cast<double>(n));
        case Kind::InvSqrt: return a_ / std::sqrt(static_cast<double>(n + 1));
    }
    return a_;
}

double GammaRule::inf_value() const {
    switch (kind_) {
        case Kind::Constant: return a_;
        case Kind::DecayTo: return a_;
        case Kind::InvSqrt: return 0.0;
    }
    return a_;
}

bool GammaRule::sum_sq_diverges() const { return true; }  // all built-in rules

bool GammaRule::is_constant_one() const { return kind_ == Kind::Constant && a_ == 1.0; }

std::string GammaRule::describe() const {
    switch (kind_) {
        case Kind::Constant: return "constant";
        case Kind::DecayTo: return "decay-to";
        case Kind::InvSqrt: return "inv-sqrt";
    }
    return "?";
}

ErrorSchedule ErrorSchedule::zero() { return {}; }

ErrorSchedule ErrorSchedule::deterministic(double c, double q) {
    if (c < 0.0 || !(q > 0.0) || !(q < 1.0))
        throw ParameterError("ErrorSchedule: need c >= 0 and q in (0,1)");
    ErrorSchedule e;
    e.kind_ = Kind::Deterministic;
    e.c_ = c;
    e.q_ = q;
    return e;
}

ErrorSchedule ErrorSchedule::gaussian(double c, double q) {
    if (c < 0.0 || !(q > 0.0) || !(q < 1.0))
        throw ParameterError("ErrorSchedule: need c >= 0 and q in (0,1)");
    ErrorSchedule e;
    e.kind_ = Kind::Gaussian;
    e.c_ = c;
    e.q_ = q;
    return e;
}

Vec ErrorSchedule::sample(std::int64_t n, int dim, RngStream& rng) const {
    Vec e = zeros(dim);
    switch (kind_) {
        case Kind::Zero: break;
        case Kind::Deterministic: {
            const double mag = c_ * std::pow(q_, static_cast<double>(n));
            const double per = mag / std::sqrt(static_cast<double>(dim));
            for (double& v : e) v = per;
            break;
        }
        case Kind::Gaussian: {
            const double sd = c_ * std::pow(q_, static_cast<double>(n));
            for (double& v : e) v = sd * rng.next_gaussian();
            break;
        }
    }
    return e;
}

double ErrorSchedule::second_moment(std::int64_t n, int dim) const {
    const double decay = std::pow(q_, static_cast<double>(2 * n));
    switch (kind_) {
        case Kind::Zero: return 0.0;
        case Kind::Deterministic: return c_ * c_ * decay;
        case Kind::Gaussian: return static_cast<double>(dim) * c_ * c_ * decay;
    }
    return 0.0;
}

std::string ErrorSchedule::describe() const {
    switch (kind_) {
        case Kind::Zero: return "zero";
        case Kind::Deterministic: return "deterministic-decay";
        case Kind::Gaussian: return "gaussian-decay";
    }
    return "?";
}

void PpaConfig::validate() const {
    if (!op) throw ParameterError("PpaConfig: operator missing");
    if (!(relax.min_support() > 0.0) || !(relax.max_support() < 2.0))
        throw ParameterError("PpaConfig: relaxation support must lie in (0, 2)");
}

std::string to_string(PpaRegime r) {
    switch (r) {
        case PpaRegime::I: return "i";
        case PpaRegime::II: return "ii";
        case PpaRegime::III: return "iii";
        case PpaRegime::None: return "none";
    }
    return "none";
}

Vec ppa_step(const MaxMonotoneOp& op, ConstSpan x, double gamma, ConstSpan e, double lambda) {
    if (!(gamma > 0.0)) throw ParameterError("ppa_step: gamma must be positive");
    if (!(lambda > 0.0) || !(lambda < 2.0)) throw ParameterError("ppa_step: lambda must lie in (0, 2)");
    const Vec j = resolvent(op, gamma, x);
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + lambda * (j[i] - e[i] - x[i]);
    return out;
}

PpaRegime validate_regime(const PpaConfig& cfg) {
    const double moment = cfg.relax.moment();
    const bool lambda_is_one =
        cfg.relax.kind() == RelaxationSampler::Kind::Constant && cfg.relax.min_support() == 1.0;
    // All built-in error schedules have bounded second moments and summable
    // square roots, so only the gamma/relaxation structure decides.
    if (cfg.gammas.is_constant_one() && moment > 0.0) return PpaRegime::I;
    if (cfg.gammas.inf_value() > 0.0 && moment > 0.0) return PpaRegime::II;
    if (cfg.gammas.sum_sq_diverges() && lambda_is_one) return PpaRegime::III;
    return PpaRegime::None;
}

Supplier make_ppa_supplier(const PpaConfig& cfg, SpaceLayout layout) {
    return [cfg, layout](std::int64_t n, const BlockVector& x, RngStream& noise) {
        const double gamma = cfg.gammas.value(n);
        const Vec err = cfg.errors.sample(n, x.dim(), noise);
        const Vec j = resolvent(*cfg.op, gamma, ConstSpan(x.data()));
        GraphSample s;
        Vec w = sub(ConstSpan(j), ConstSpan(err));
        Vec wstar(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) wstar[i] = (x.data()[i] - w[i]) / gamma;
        s.w = BlockVector(layout, std::move(w));
        s.wstar = BlockVector(layout, std::move(wstar));
        s.e = BlockVector(layout, err);
        s.estar = BlockVector(layout, scaled(-1.0 / gamma, ConstSpan(err)));
        s.q = s.w;
        s.cstar = BlockVector(layout);
        s.fstar = BlockVector(layout);
        return s;
    };
}

PpaRunResult run_ppa(const PpaConfig& cfg, const BlockVector& x0, std::int64_t n_iter,
                     std::uint64_t seed, const PpaRunOptions& opts) {
    cfg.validate();
    if (cfg.op->dim() != x0.dim()) throw StructuralError("run_ppa: operator/initial point mismatch");

    RngStream noise(seed, "supplier-noise");
    RngStream relax_rng(seed, "relax");
    constexpr double kZeroTol = 1e-24;

    PpaRunResult res;
    res.x = x0;
    res.trace.config_fingerprint = opts.fingerprint;
    res.trace.rows.reserve(static_cast<std::size_t>(n_iter));
    res.path_deviation.reserve(static_cast<std::size_t>(n_iter));
    if (opts.record_iterates) res.iterates.push_back(res.x);

    for (std::int64_t n = 0; n < n_iter; ++n) {
        const double gamma = cfg.gammas.value(n);
        const Vec err = cfg.errors.sample(n, res.x.dim(), noise);
        const Vec j = resolvent(*cfg.op, gamma, ConstSpan(res.x.data()));

        Vec w = sub(ConstSpan(j), ConstSpan(err));
        Vec tstar(w.size());
        double delta = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double diff = res.x.data()[i] - w[i];
            tstar[i] = diff / gamma;
            delta += diff * tstar[i];
        }
        double t2 = norm_sq(ConstSpan(tstar));
        if (!std::isfinite(delta) || !std::isfinite(t2))
            throw NumericalError("run_ppa: non-finite update at iteration " + std::to_string(n));
        const double zero_abs = kZeroTol * std::max(1.0, norm_sq(res.x));
        const double theta = (delta > 0.0 && t2 > zero_abs) ? delta / t2 : 0.0;
        const double lambda = cfg.relax.sample(relax_rng);

        Vec x_next(res.x.dim());
        Vec x_direct(res.x.dim());
        double dev = 0.0;
        for (std::size_t i = 0; i < x_next.size(); ++i) {
            x_next[i] = res.x.data()[i] - lambda * theta * tstar[i];
            x_direct[i] = res.x.data()[i] + lambda * (j[i] - err[i] - res.x.data()[i]);
            dev = std::max(dev, std::abs(x_next[i] - x_direct[i]));
        }
        res.path_deviation.push_back(dev);

        TraceRow row;
        row.step.n = n;
        row.step.delta = delta;
        row.step.theta = theta;
        row.step.lambda = lambda;
        row.step.tstar_norm = std::sqrt(t2);
        row.step.d_norm = theta * row.step.tstar_norm;
        res.x = BlockVector(res.x.layout(), std::move(x_next));
        if (opts.z_ref) row.dist_to_ref = norm(axpy(-1.0, *opts.z_ref, res.x));
        {
            const Vec jr = resolvent(*cfg.op, gamma, ConstSpan(res.x.data()));
            row.residual = norm(ConstSpan(sub(ConstSpan(res.x.data()), ConstSpan(jr))));
        }
        res.trace.rows.push_back(std::move(row));
        if (opts.record_iterates) res.iterates.push_back(res.x);
    }
    return res;
}

}  // namespace splitmc
