#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "splitmc/engine.hpp"
#include "splitmc/operators.hpp"

namespace splitmc {

/// Primal-dual inclusion data: per-i set-valued A_i, per-k set-valued B_k,
/// linear couplings L[k][i]. No single-valued parts; the abstract quadratic
/// penalty is absent here.
struct KTProblem {
    SpaceLayout h;
    SpaceLayout g;
    std::vector<MaxMonotonePtr> A;
    std::vector<MaxMonotonePtr> B;
    std::vector<std::vector<std::optional<LinearMap>>> L;  // [k][i]

    int ni() const { return static_cast<int>(A.size()); }
    int nk() const { return static_cast<int>(B.size()); }
    void validate_shapes() const;

    Vec apply_L_row(int k, const BlockVector& x) const;
    Vec apply_L_adjoint_col(int i, const BlockVector& v) const;
};

struct KTStepSizes {
    double epsilon = 0.0;
    Vec gamma;  // per i, in [epsilon, 1/epsilon]
    Vec mu;     // per k, in [epsilon, 1/epsilon]

    void validate(const KTProblem& p) const;
};

struct KTState {
    BlockVector x;      // H
    BlockVector vstar;  // G
    std::vector<Vec> a, astar;
    std::vector<Vec> b, bstar;
    LastActivation act_i, act_k;
    std::int64_t next_n = 0;

    static KTState initial(const KTProblem& p, BlockVector x, BlockVector vstar);
};

/// One pass of the randomized primal-dual update:
///   activated i: l*_i = sum_k L*_ki v*_k, a_i = J_{g A_i}(x_i - g l*_i),
///                a*_i = (x_i - a_i)/g - l*_i;
///   activated k: l_k = sum_i L_ki x_i, b_k = J_{m B_k}(l_k + m v*_k),
///                b*_k = v*_k + (l_k - b_k)/m;
///   every i: t*_i = a*_i + sum_k L*_ki b*_k;
///   every k: t_k = b_k - sum_i L_ki a_i;
///   Delta = sum_i(<x_i|t*_i> - <a_i|a*_i>) + sum_k(<t_k|v*_k> - <b_k|b*_k>),
///           computed in the equivalent contracted form
///           sum_i <x_i - a_i|t*_i> + sum_k <v*_k - b*_k|t_k>;
///   theta = [Delta>0] Delta / (sum||t*_i||^2 + sum||t_k||^2 + [Delta<=0]);
///   x_i <- x_i - l theta t*_i,  v*_k <- v*_k - l theta t_k.
StepRecord kt_iterate(const KTProblem& p, const KTStepSizes& s, KTState& st,
                      const std::vector<int>& active_i, const std::vector<int>& active_k,
                      double lambda);

/// Residual of the primal-dual inclusion at (x, v*): primal rows through
/// resolvent fixed-point gaps of A_i, dual rows through the inverse-resolvent
/// identity J_{B^{-1}}(u) = u - J_B(u).
double kt_residual(const KTProblem& p, const BlockVector& x, const BlockVector& vstar);

SpaceLayout kt_packed_layout(const KTProblem& p);
BlockVector pack_state(const KTProblem& p, const KTState& st);

/// Full-activation, zero-error graph-sample source on the packed (x, v*)
/// space: w = (a, b*), w* = (t*, t), q = w, c* = f* = 0. Feeding it to run()
/// with alpha = +inf reproduces the full-activation trajectory of run_kt.
Supplier make_kt_supplier(const KTProblem& p, const KTStepSizes& s);

struct KTRunOptions {
    const BlockVector* z_ref = nullptr;  // packed (x, v*) reference
    int residual_every = 10;
    bool record_iterates = false;
    std::uint64_t fingerprint = 0;
    bool check_invariants = false;
    double invariant_rel_tol = 1e-12;
};

struct KTRunResult {
    KTState state;
    Trace trace;
    std::vector<BlockVector> iterates;
};

KTRunResult run_kt(const KTProblem& p, const KTStepSizes& s, const BlockSampler& sampler_i,
                   const BlockSampler& sampler_k, const RelaxationSampler& relax, double rho,
                   const KTState& init, std::int64_t n_iter, std::uint64_t seed,
                   const KTRunOptions& opts = {});

}  // namespace splitmc
