#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "splitmc/engine.hpp"
#include "splitmc/operators.hpp"

namespace splitmc {

/// Primal block data: set-valued part A, cocoercive part C, monotone
/// Lipschitzian part Q, and the offset s*.
struct SaddleBlockI {
    MaxMonotonePtr A;
    CocoerciveOp C = CocoerciveOp::zero();
    LipschitzMonotoneOp Q = LipschitzMonotoneOp::zero();
    Vec s_star;
};

/// Dual block data: two operator triples (B and D rows) plus the offset r.
struct SaddleBlockK {
    MaxMonotonePtr Bm;
    CocoerciveOp Bc = CocoerciveOp::zero();
    LipschitzMonotoneOp Bl = LipschitzMonotoneOp::zero();
    MaxMonotonePtr Dm;
    CocoerciveOp Dc = CocoerciveOp::zero();
    LipschitzMonotoneOp Dl = LipschitzMonotoneOp::zero();
    Vec r;
};

/// Coupled multivariate inclusion data over H = (+) H_i and G = (+) G_k.
///
/// The coupling R acts on all of H at once; L[k][i] is the linear map
/// H_i -> G_k (absent entries are zero maps). alpha() is the aggregate
/// cocoercivity constant: the minimum of the declared constants of all
/// nonzero cocoercive parts, +inf when every cocoercive part is zero.
struct SaddleProblem {
    SpaceLayout h;
    SpaceLayout g;
    std::vector<SaddleBlockI> bi;
    std::vector<SaddleBlockK> bk;
    LipschitzMonotoneOp R = LipschitzMonotoneOp::zero();  // on all of H
    std::vector<std::vector<std::optional<LinearMap>>> L;  // [k][i]

    int ni() const { return static_cast<int>(bi.size()); }
    int nk() const { return static_cast<int>(bk.size()); }
    double alpha() const;
    double chi() const { return R.lip; }
    void validate_shapes() const;

    Vec apply_L_row(int k, const BlockVector& x) const;       // sum_i L_ki x_i
    Vec apply_L_adjoint_col(int i, const BlockVector& v) const;  // sum_k L*_ki v_k
    Vec eval_R_block(int i, const BlockVector& x) const;       // block i of R(x)
};

/// Step-size data. Rules are stationary: one value per index, constant in n.
struct StepSizes {
    double sigma = 0.0;
    double epsilon = 0.0;
    Vec gamma;  // per i
    Vec mu;     // per k
    Vec nu;     // per k
    Vec sigk;   // per k
};

struct StepSizeViolation {
    std::string message;
};

struct StepSizeReport {
    std::vector<StepSizeViolation> violations;
    bool ok() const { return violations.empty(); }
};

/// Checks sigma > 1/(4 alpha), 1/epsilon > max{alpha_l_i + chi + sigma,
/// beta_l_k + sigma, delta_l_k + sigma}, and the per-index interval
/// constraints on gamma, mu, nu, sigma_k.
StepSizeReport validate_step_sizes(const SaddleProblem& p, const StepSizes& s);

/// Full iteration state. Caches are filled by the first iteration, which must
/// activate every index; carried entries always equal the values computed at
/// the index's last activation.
struct SaddleState {
    BlockVector x;      // H
    BlockVector y;      // G
    BlockVector z;      // G
    BlockVector vstar;  // G

    std::vector<Vec> a, astar;
    Vec xi;
    std::vector<Vec> b, d, estar, qstar, tstar;
    Vec eta;
    // Iterate components frozen at each index's last activation; these are
    // the q-side vectors of the abstract update.
    std::vector<Vec> x_at_act, y_at_act, z_at_act;
    LastActivation act_i, act_k;
    std::int64_t next_n = 0;

    static SaddleState initial(const SaddleProblem& p, BlockVector x, BlockVector y, BlockVector z,
                               BlockVector vstar);
};

/// One pass of the block-iterative saddle update. active_i/active_k must be
/// the full sets on the first call. alpha is the aggregate cocoercivity
/// constant (pass p.alpha() unless testing something else).
StepRecord saddle_iterate(const SaddleProblem& p, const StepSizes& s, SaddleState& st,
                          const std::vector<int>& active_i, const std::vector<int>& active_k,
                          double lambda, double alpha);

/// Norm of the concatenated row residuals of the saddle inclusion at
/// (x, y, z, v*); zero exactly at its zeros. Rows with set-valued parts are
/// measured through unit-step resolvent fixed-point gaps.
double saddle_residual(const SaddleProblem& p, const BlockVector& x, const BlockVector& y,
                       const BlockVector& z, const BlockVector& vstar);

struct SaddleRunOptions {
    const BlockVector* z_ref = nullptr;  // reference in the packed (x,y,z,v*) space
    int residual_every = 10;
    bool record_iterates = false;       // packed iterates
    std::uint64_t fingerprint = 0;
    bool check_invariants = false;  // cache-carry + gap bookkeeping asserts
    double invariant_rel_tol = 1e-12;
};

struct SaddleRunResult {
    SaddleState state;
    Trace trace;
    std::vector<BlockVector> iterates;
    /// Largest relative violation seen by the bookkeeping checks (0 when
    /// disabled); runs throw StructuralError when a check fails.
    double max_invariant_violation = 0.0;
};

SpaceLayout saddle_packed_layout(const SaddleProblem& p);
BlockVector pack_state(const SaddleProblem& p, const SaddleState& st);

/// Full-activation, zero-error graph-sample source on the packed space,
/// realizing the same iteration through the abstract engine: with the packed
/// iterate split as (x, y, z, v*),
///   w  = (a, b, d, e*),   w* = (p* - C x, q* - Bc y, t* - Dc z, e),
///   q  = (x, y, z, e*),   c* = (C x, Bc y, Dc z, 0),  f* = e = e* = 0.
/// Feeding it to run() with alpha = problem.alpha() reproduces the
/// full-activation trajectory of run_saddle. The problem must outlive the
/// returned supplier.
Supplier make_saddle_supplier(const SaddleProblem& p, const StepSizes& s);

SaddleRunResult run_saddle(const SaddleProblem& p, const StepSizes& s,
                           const BlockSampler& sampler_i, const BlockSampler& sampler_k,
                           const RelaxationSampler& relax, double rho, const SaddleState& init,
                           std::int64_t n_iter, std::uint64_t seed,
                           const SaddleRunOptions& opts = {});

// ---------------------------------------------------------------------------
// Structured minimization front end
// ---------------------------------------------------------------------------

/// Data of the composite minimization problem
///   min_x Theta(x) + sum_i (f_i + phi_i)(x_i) + sum_k ((g_k+psi_k) inf-conv h_k)(sum_i L_ki x_i).
/// phi_i and psi_k are smooth with declared cocoercivity constants for their
/// gradients; theta_grad is the gradient map of the coupling with constant chi.
struct MinProblemSpec {
    SpaceLayout h;
    SpaceLayout g;
    std::vector<SeparableFun> f;
    std::vector<SeparableFun> phi;
    Vec alpha_i;  // +inf allowed when phi_i == 0
    std::vector<SeparableFun> gfun;
    std::vector<SeparableFun> psi;
    Vec beta_k;   // +inf allowed when psi_k == 0
    std::vector<SeparableFun> hfun;
    std::vector<std::vector<std::optional<LinearMap>>> L;
    LipschitzMonotoneOp theta_grad = LipschitzMonotoneOp::zero();
};

/// Saddle problem whose block-iterative run realizes the proximal form of
/// the minimization: A_i = subdiff f_i, C_i = grad phi_i, Q_i = 0,
/// R = theta_grad, B-row = (subdiff g_k, grad psi_k, 0), D-row =
/// (subdiff h_k, 0, 0), all offsets zero.
SaddleProblem build_min_problem(const MinProblemSpec& spec);

/// Residual of the primal-dual optimality rows at (x, v*):
/// the primal row through a prox fixed-point gap, the dual row through exact
/// per-coordinate inverse-subdifferential intervals of (g+psi) and h.
double kt_condition_residual(const MinProblemSpec& spec, const BlockVector& x,
                             const BlockVector& vstar);

}  // namespace splitmc
