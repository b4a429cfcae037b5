#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <utility>

#include "splitmc/functions.hpp"
#include "splitmc/spaces.hpp"

namespace splitmc {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Small dense matrix, row major. Desk-scale only; no factorization caching.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows * cols), 0.0) {}
    static Matrix identity(int n);
    static Matrix diagonal(const Vec& d);
    /// 2-D rotation by `angle`; monotone as an operator iff cos(angle) >= 0.
    static Matrix rotation2d(double angle);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double& at(int r, int c) { return a_[static_cast<std::size_t>(r * cols_ + c)]; }
    double at(int r, int c) const { return a_[static_cast<std::size_t>(r * cols_ + c)]; }

    Vec apply(ConstSpan x) const;
    Vec apply_adjoint(ConstSpan v) const;
    Matrix transposed() const;
    /// Operator norm bound via Frobenius norm (used only as a default constant).
    double frobenius() const;

private:
    int rows_ = 0, cols_ = 0;
    Vec a_;
};

/// Solve A u = rhs by Gaussian elimination with partial pivoting.
/// Throws NumericalError on a (numerically) singular system.
Vec solve_dense(Matrix a, Vec rhs);

/// Linear coupling between two Euclidean factors, with exact adjoint.
class LinearMap {
public:
    LinearMap() = default;
    explicit LinearMap(Matrix m) : m_(std::move(m)) {}

    int in_dim() const { return m_.cols(); }
    int out_dim() const { return m_.rows(); }
    Vec apply(ConstSpan x) const { return m_.apply(x); }
    Vec adjoint(ConstSpan v) const { return m_.apply_adjoint(v); }
    const Matrix& matrix() const { return m_; }

private:
    Matrix m_;
};

/// <Lx|v> - <x|L*v>; zero for a correct adjoint.
double adjoint_residual(const LinearMap& l, ConstSpan x, ConstSpan v);

// ---------------------------------------------------------------------------
// Set-valued catalog
// ---------------------------------------------------------------------------

/// Maximally monotone operator with a closed-form resolvent.
///
/// canonical_value(x) returns one element of the image at x and requires x in
/// the operator's domain; it is used to back-solve offsets when constructing
/// reference zeros for tests and problem builders.
class MaxMonotoneOp {
public:
    virtual ~MaxMonotoneOp() = default;
    virtual int dim() const = 0;
    virtual Vec resolvent_impl(double gamma, ConstSpan x) const = 0;
    virtual Vec canonical_value(ConstSpan x) const = 0;
    virtual std::optional<Vec> known_zero() const { return std::nullopt; }
};

using MaxMonotonePtr = std::shared_ptr<const MaxMonotoneOp>;

/// J_{gamma*A}(x). gamma must be positive.
Vec resolvent(const MaxMonotoneOp& op, double gamma, ConstSpan x);

/// Exact point of gra A derived from one resolvent call:
/// w = J_{gamma A}(x), wstar = (x - w)/gamma.
struct GraphPoint {
    Vec w;
    Vec wstar;
};
GraphPoint graph_point(const MaxMonotoneOp& op, double gamma, ConstSpan x);

/// Subdifferential of a separable catalog function; resolvent is the
/// coordinatewise proximity operator.
class SeparableSubdifferential final : public MaxMonotoneOp {
public:
    explicit SeparableSubdifferential(SeparableFun f) : f_(std::move(f)) {}
    int dim() const override { return f_.dim(); }
    Vec resolvent_impl(double gamma, ConstSpan x) const override { return f_.prox(gamma, x); }
    Vec canonical_value(ConstSpan x) const override { return f_.canonical_subgradient(x); }
    std::optional<Vec> known_zero() const override { return f_.argmin(); }
    const SeparableFun& fun() const { return f_; }

private:
    SeparableFun f_;
};

/// x |-> M x + b with M + M^T positive semidefinite (builder's responsibility;
/// property checkers sample it). Resolvent solves (I + gamma M) p = x - gamma b.
class AffineMonotoneOp final : public MaxMonotoneOp {
public:
    AffineMonotoneOp(Matrix m, Vec b) : m_(std::move(m)), b_(std::move(b)) {}
    int dim() const override { return m_.rows(); }
    Vec resolvent_impl(double gamma, ConstSpan x) const override;
    Vec canonical_value(ConstSpan x) const override;
    std::optional<Vec> known_zero() const override;
    const Matrix& matrix() const { return m_; }
    const Vec& offset() const { return b_; }

private:
    Matrix m_;
    Vec b_;
};

/// A - ustar for a catalog A. Still maximally monotone;
/// J_{gamma(A - u*)}(x) = J_{gamma A}(x + gamma u*).
class ShiftedMaxOp final : public MaxMonotoneOp {
public:
    ShiftedMaxOp(MaxMonotonePtr inner, Vec ustar) : inner_(std::move(inner)), ustar_(std::move(ustar)) {}
    int dim() const override { return inner_->dim(); }
    Vec resolvent_impl(double gamma, ConstSpan x) const override;
    Vec canonical_value(ConstSpan x) const override;

private:
    MaxMonotonePtr inner_;
    Vec ustar_;
};

/// Escape hatch for user-supplied resolvents; flagged unchecked in provenance.
class CallableMaxOp final : public MaxMonotoneOp {
public:
    CallableMaxOp(int dim, std::function<Vec(double, ConstSpan)> res,
                  std::function<Vec(ConstSpan)> value)
        : dim_(dim), res_(std::move(res)), value_(std::move(value)) {}
    int dim() const override { return dim_; }
    Vec resolvent_impl(double gamma, ConstSpan x) const override { return res_(gamma, x); }
    Vec canonical_value(ConstSpan x) const override { return value_(x); }

private:
    int dim_;
    std::function<Vec(double, ConstSpan)> res_;
    std::function<Vec(ConstSpan)> value_;
};

// Catalog factories.
MaxMonotonePtr make_zero_op(int dim);
MaxMonotonePtr make_l1_subdiff(int dim, double weight);
MaxMonotonePtr make_diag_quadratic_subdiff(Vec curvature, Vec center);
MaxMonotonePtr make_box_normal_cone(Vec lo, Vec hi);
MaxMonotonePtr make_affine_monotone(Matrix m, Vec b);
MaxMonotonePtr make_shifted(MaxMonotonePtr inner, Vec ustar);
MaxMonotonePtr make_separable_subdiff(SeparableFun f);

// ---------------------------------------------------------------------------
// Single-valued catalog
// ---------------------------------------------------------------------------

class SingleValuedOp {
public:
    virtual ~SingleValuedOp() = default;
    virtual int dim() const = 0;
    virtual Vec apply(ConstSpan x) const = 0;
};

using SingleValuedPtr = std::shared_ptr<const SingleValuedOp>;

class AffineMap final : public SingleValuedOp {
public:
    AffineMap(Matrix m, Vec b) : m_(std::move(m)), b_(std::move(b)) {}
    int dim() const override { return m_.rows(); }
    Vec apply(ConstSpan x) const override;

private:
    Matrix m_;
    Vec b_;
};

class CallableMap final : public SingleValuedOp {
public:
    CallableMap(int dim, std::function<Vec(ConstSpan)> f) : dim_(dim), f_(std::move(f)) {}
    int dim() const override { return dim_; }
    Vec apply(ConstSpan x) const override { return f_(x); }

private:
    int dim_;
    std::function<Vec(ConstSpan)> f_;
};

SingleValuedPtr make_identity_map(int dim);
SingleValuedPtr make_affine_map(Matrix m, Vec b);
SingleValuedPtr make_rotation_map(double angle);
/// Gradient of the separable smooth function (Zero/Square/Linear pieces only).
SingleValuedPtr make_gradient_map(SeparableFun smooth);

/// Cocoercive operator with its declared constant. A null map is the zero
/// operator, cocoercive for every constant; its alpha is +infinity so that it
/// drops out of min-based aggregate constants.
struct CocoerciveOp {
    SingleValuedPtr map;
    double alpha = kInf;

    bool is_zero() const { return map == nullptr; }
    Vec eval(ConstSpan x) const { return map ? map->apply(x) : zeros(static_cast<int>(x.size())); }
    static CocoerciveOp zero() { return {nullptr, kInf}; }
};

/// Monotone Lipschitzian operator with its declared constant; null map = zero.
struct LipschitzMonotoneOp {
    SingleValuedPtr map;
    double lip = 0.0;

    bool is_zero() const { return map == nullptr; }
    Vec eval(ConstSpan x) const { return map ? map->apply(x) : zeros(static_cast<int>(x.size())); }
    static LipschitzMonotoneOp zero() { return {nullptr, 0.0}; }
};

// ---------------------------------------------------------------------------
// Property checkers (signed residuals; tests choose tolerances)
// ---------------------------------------------------------------------------

/// ||Jx - Jy||^2 + ||(Id-J)x - (Id-J)y||^2 - ||x - y||^2, J = J_{gamma*op}.
double check_firm_nonexpansive(const MaxMonotoneOp& op, double gamma, ConstSpan x, ConstSpan y);

/// alpha*||Cx - Cy||^2 - <x - y | Cx - Cy>.
double check_cocoercive(const CocoerciveOp& c, ConstSpan x, ConstSpan y);

/// -<x - y | Tx - Ty>; nonpositive for monotone pairs.
double monotonicity_violation(const LipschitzMonotoneOp& t, ConstSpan x, ConstSpan y);

/// ||Tx - Ty|| - lip*||x - y||.
double lipschitz_violation(const LipschitzMonotoneOp& t, ConstSpan x, ConstSpan y);

/// <x-y | (gamma^{-1}Id - T)x - (gamma^{-1}Id - T)y> - sigma*||x - y||^2,
/// certifying sigma-strong monotonicity of gamma^{-1}Id - T under
/// gamma <= 1/(lip + sigma).
double strong_monotonicity_margin(double gamma, const LipschitzMonotoneOp& t, double sigma,
                                  ConstSpan x, ConstSpan y);

}  // namespace splitmc
