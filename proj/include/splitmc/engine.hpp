#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "splitmc/rng.hpp"
#include "splitmc/sampling.hpp"
#include "splitmc/spaces.hpp"

namespace splitmc {

/// One iteration's input to the abstract update: an (approximate) graph point
/// of W and a split evaluation of C.
///
/// Supplier contract: (w+e, w*+e*) lies in gra W and c* + f* = C(q); the
/// engine never evaluates W or C itself.
struct GraphSample {
    BlockVector w;
    BlockVector wstar;
    BlockVector e;
    BlockVector estar;
    BlockVector q;
    BlockVector cstar;
    BlockVector fstar;
};

struct EngineConfig {
    double alpha = 1.0;     // cocoercivity constant of C; +inf when C = 0
    double rho = 2.0;       // relaxation upper bound, >= 2
    double zero_tol = 1e-24;  // ||t*||^2 <= zero_tol*max(1, ||x||^2) counts as t* = 0

    void validate() const;
};

/// Per-iteration record of the update quantities.
struct StepRecord {
    std::int64_t n = 0;
    double delta = 0.0;
    double theta = 0.0;
    double lambda = 0.0;
    double d_norm = 0.0;
    double tstar_norm = 0.0;
};

/// Serialized trace row: the step record plus distance to a reference point,
/// an algorithm-specific residual (NaN when not sampled), the staleness
/// diagnostic (NaN when not applicable), and the active blocks of the
/// iteration.
struct TraceRow {
    StepRecord step;
    double dist_to_ref = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
    double staleness = std::numeric_limits<double>::quiet_NaN();
    std::string active_blocks = "all";
};

struct Trace {
    std::uint64_t config_fingerprint = 0;
    std::vector<TraceRow> rows;
};

/// <x - w | w* + c*> - (4 alpha)^{-1} ||w - q||^2. With alpha = +inf the
/// quadratic penalty vanishes.
double gap(const BlockVector& x, const GraphSample& s, double alpha);

/// delta / ||t*||^2 when delta > 0 and ||t*||^2 exceeds the zero threshold;
/// 0 otherwise. zero_tol_abs is the absolute threshold on ||t*||^2.
double step_size(double delta, const BlockVector& tstar, double zero_tol_abs);

/// x - lambda * theta * t*. Requires 0 < lambda <= rho.
BlockVector relaxed_update(const BlockVector& x, double theta, const BlockVector& tstar,
                           double lambda, double rho);

/// Per-path integrand of the error functional at a reference zero z with
/// Cz = C(z): max{0, theta*<w - z | e* + f*> + <e | w* + Cz> + <e | e*>}.
/// Monte Carlo averages of this quantity estimate the expected error term.
double realized_error_term(const GraphSample& s, double theta, const BlockVector& z,
                           const BlockVector& cz);

/// Produces the iteration-n sample; owns no state beyond what it closes over.
/// The RNG stream passed in is the trajectory's supplier-noise stream.
using Supplier = std::function<GraphSample(std::int64_t n, const BlockVector& x, RngStream& noise)>;

struct RunOptions {
    const BlockVector* z_ref = nullptr;  // distance column when present
    std::function<double(const BlockVector&)> residual_fn;  // optional
    int residual_every = 1;
    bool record_iterates = false;
    std::uint64_t fingerprint = 0;
};

struct RunResult {
    BlockVector x;
    Trace trace;
    std::vector<BlockVector> iterates;  // x_0..x_n when recorded
};

/// Runs n_iter iterations of the template:
///   t* = w* + c*;  Delta = <x - w | t*> - (4a)^{-1}||w - q||^2;
///   theta = Delta/||t*||^2 if Delta > 0 and t* != 0, else 0;
///   x <- x - lambda * theta * t*.
/// Deterministic given (seed, supplier, relaxation law). The relaxation draw
/// uses its own named stream, so it is independent of the supplier noise and
/// of everything the iterate depends on.
RunResult run(const BlockVector& x0, const Supplier& supplier, const RelaxationSampler& relax,
              const EngineConfig& cfg, std::int64_t n_iter, std::uint64_t seed,
              const RunOptions& opts = {});

}  // namespace splitmc
