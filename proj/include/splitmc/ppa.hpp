#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "splitmc/engine.hpp"
#include "splitmc/operators.hpp"

namespace splitmc {

/// Step-size sequence rule. The asymptotics needed by the regime validator
/// are declared by the rule kind, not estimated from samples.
class GammaRule {
public:
    enum class Kind { Constant, DecayTo, InvSqrt };

    static GammaRule constant(double value);
    /// limit + (start - limit) * 2^-n; infimum = limit > 0.
    static GammaRule decay_to(double limit, double start);
    /// scale / sqrt(n + 1); square-sum divergent, infimum 0.
    static GammaRule inv_sqrt(double scale);

    double value(std::int64_t n) const;
    double inf_value() const;
    bool sum_sq_diverges() const;
    bool is_constant_one() const;
    Kind kind() const { return kind_; }
    std::string describe() const;

private:
    Kind kind_ = Kind::Constant;
    double a_ = 1.0, b_ = 1.0;
};

/// Error injection rule for the resolvent evaluations. All built-ins have
/// square-root-summable second moments: zero errors, a deterministic vector
/// with ||e_n|| = c*q^n, or a Gaussian with per-coordinate std c*q^n (0<q<1).
class ErrorSchedule {
public:
    enum class Kind { Zero, Deterministic, Gaussian };

    static ErrorSchedule zero();
    static ErrorSchedule deterministic(double c, double q);
    static ErrorSchedule gaussian(double c, double q);

    Vec sample(std::int64_t n, int dim, RngStream& rng) const;
    /// Exact E||e_n||^2.
    double second_moment(std::int64_t n, int dim) const;
    bool is_zero() const { return kind_ == Kind::Zero; }
    Kind kind() const { return kind_; }
    std::string describe() const;

private:
    Kind kind_ = Kind::Zero;
    double c_ = 0.0, q_ = 0.5;
};

struct PpaConfig {
    MaxMonotonePtr op;
    GammaRule gammas = GammaRule::constant(1.0);
    ErrorSchedule errors = ErrorSchedule::zero();
    RelaxationSampler relax = RelaxationSampler::constant(1.0);

    /// Relaxation support must lie strictly inside (0, 2).
    void validate() const;
};

enum class PpaRegime { I, II, III, None };
std::string to_string(PpaRegime r);

/// x + lambda*(J_{gamma A} x - e - x). Requires gamma > 0 and 0 < lambda < 2.
Vec ppa_step(const MaxMonotoneOp& op, ConstSpan x, double gamma, ConstSpan e, double lambda);

/// First admissible regime of the declared rules, checked in order I, II, III:
///   I  : gamma == 1, E[l(2-l)] > 0, bounded error moments (built-ins always);
///   II : inf gamma > 0, E[l(2-l)] > 0, sum sqrt(E||e||^2) finite;
///   III: sum gamma^2 divergent, lambda == 1, summable error roots.
PpaRegime validate_regime(const PpaConfig& cfg);

struct PpaRunResult {
    BlockVector x;
    Trace trace;
    /// Per-iteration distance between the half-space-projection form of the
    /// update and the direct relaxed-resolvent form; recorded, never asserted.
    std::vector<double> path_deviation;
    std::vector<BlockVector> iterates;
};

struct PpaRunOptions {
    const BlockVector* z_ref = nullptr;
    bool record_iterates = false;
    std::uint64_t fingerprint = 0;
};

/// One seeded trajectory of the relaxed inexact proximal point iteration,
/// advanced through the abstract update (theta works out to gamma whenever the
/// step is nonnull, which reproduces the direct form). The trace residual
/// column is ||x - J_{gamma A} x||.
PpaRunResult run_ppa(const PpaConfig& cfg, const BlockVector& x0, std::int64_t n_iter,
                     std::uint64_t seed, const PpaRunOptions& opts = {});

/// The graph-sample source realizing the same iteration on the abstract
/// engine: w = J_{gamma A}x - e, w* = (x-w)/gamma, q = w, c* = f* = 0,
/// e* = -e/gamma. Draws errors from the trajectory's supplier-noise stream in
/// the same order as run_ppa.
Supplier make_ppa_supplier(const PpaConfig& cfg, SpaceLayout layout);

}  // namespace splitmc
