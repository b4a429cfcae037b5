#include "splitmc/operators.hpp"

#include <cmath>

namespace splitmc {

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(const Vec& d) {
    Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (int i = 0; i < m.rows(); ++i) m.at(i, i) = d[static_cast<std::size_t>(i)];
    return m;
}

Matrix Matrix::rotation2d(double angle) {
    Matrix m(2, 2);
    m.at(0, 0) = std::cos(angle);
    m.at(0, 1) = -std::sin(angle);
    m.at(1, 0) = std::sin(angle);
    m.at(1, 1) = std::cos(angle);
    return m;
}

Vec Matrix::apply(ConstSpan x) const {
    if (static_cast<int>(x.size()) != cols_) throw StructuralError("Matrix::apply: dimension mismatch");
    Vec out(static_cast<std::size_t>(rows_), 0.0);
    for (int r = 0; r < rows_; ++r) {
        double s = 0.0;
        for (int c = 0; c < cols_; ++c) s += at(r, c) * x[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = s;
    }
    return out;
}

Vec Matrix::apply_adjoint(ConstSpan v) const {
    if (static_cast<int>(v.size()) != rows_) throw StructuralError("Matrix::apply_adjoint: dimension mismatch");
    Vec out(static_cast<std::size_t>(cols_), 0.0);
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c) out[static_cast<std::size_t>(c)] += at(r, c) * v[static_cast<std::size_t>(r)];
    return out;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c) t.at(c, r) = at(r, c);
    return t;
}

double Matrix::frobenius() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
}

Vec solve_dense(Matrix a, Vec rhs) {
    const int n = a.rows();
    if (a.cols() != n || static_cast<int>(rhs.size()) != n)
        throw StructuralError("solve_dense: square system expected");
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a.at(r, col)) > std::abs(a.at(pivot, col))) pivot = r;
        if (std::abs(a.at(pivot, col)) < 1e-300) throw NumericalError("solve_dense: singular system");
        if (pivot != col) {
            for (int c = 0; c < n; ++c) std::swap(a.at(pivot, c), a.at(col, c));
            std::swap(rhs[static_cast<std::size_t>(pivot)], rhs[static_cast<std::size_t>(col)]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = a.at(r, col) / a.at(col, col);
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a.at(r, c) -= f * a.at(col, c);
            rhs[static_cast<std::size_t>(r)] -= f * rhs[static_cast<std::size_t>(col)];
        }
    }
    Vec x(static_cast<std::size_t>(n), 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = rhs[static_cast<std::size_t>(r)];
        for (int c = r + 1; c < n; ++c) s -= a.at(r, c) * x[static_cast<std::size_t>(c)];
        x[static_cast<std::size_t>(r)] = s / a.at(r, r);
    }
    return x;
}

double adjoint_residual(const LinearMap& l, ConstSpan x, ConstSpan v) {
    return dot(ConstSpan(l.apply(x)), v) - dot(x, ConstSpan(l.adjoint(v)));
}

Vec resolvent(const MaxMonotoneOp& op, double gamma, ConstSpan x) {
    if (!(gamma > 0.0)) throw ParameterError("resolvent: gamma must be positive");
    if (static_cast<int>(x.size()) != op.dim()) throw StructuralError("resolvent: dimension mismatch");
    return op.resolvent_impl(gamma, x);
}

GraphPoint graph_point(const MaxMonotoneOp& op, double gamma, ConstSpan x) {
    GraphPoint g;
    g.w = resolvent(op, gamma, x);
    g.wstar = Vec(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) g.wstar[j] = (x[j] - g.w[j]) / gamma;
    return g;
}

Vec AffineMonotoneOp::resolvent_impl(double gamma, ConstSpan x) const {
    const int n = dim();
    Matrix sys(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) sys.at(r, c) = (r == c ? 1.0 : 0.0) + gamma * m_.at(r, c);
    Vec rhs(x.begin(), x.end());
    for (int r = 0; r < n; ++r) rhs[static_cast<std::size_t>(r)] -= gamma * b_[static_cast<std::size_t>(r)];
    return solve_dense(std::move(sys), std::move(rhs));
}

Vec AffineMonotoneOp::canonical_value(ConstSpan x) const {
    Vec out = m_.apply(x);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += b_[j];
    return out;
}

std::optional<Vec> AffineMonotoneOp::known_zero() const {
    try {
        Vec rhs = scaled(-1.0, ConstSpan(b_));
        return solve_dense(m_, std::move(rhs));
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

Vec ShiftedMaxOp::resolvent_impl(double gamma, ConstSpan x) const {
    Vec arg(x.begin(), x.end());
    add_scaled_inplace(arg, gamma, ConstSpan(ustar_));
    return inner_->resolvent_impl(gamma, ConstSpan(arg));
}

Vec ShiftedMaxOp::canonical_value(ConstSpan x) const {
    Vec out = inner_->canonical_value(x);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] -= ustar_[j];
    return out;
}

Vec AffineMap::apply(ConstSpan x) const {
    Vec out = m_.apply(x);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += b_[j];
    return out;
}

MaxMonotonePtr make_zero_op(int dim) {
    return std::make_shared<SeparableSubdifferential>(SeparableFun(dim, Fun1d::zero()));
}

MaxMonotonePtr make_l1_subdiff(int dim, double weight) {
    return std::make_shared<SeparableSubdifferential>(SeparableFun(dim, Fun1d::abs(weight)));
}

MaxMonotonePtr make_diag_quadratic_subdiff(Vec curvature, Vec center) {
    if (curvature.size() != center.size())
        throw StructuralError("make_diag_quadratic_subdiff: size mismatch");
    std::vector<Fun1d> parts;
    parts.reserve(curvature.size());
    for (std::size_t j = 0; j < curvature.size(); ++j)
        parts.push_back(Fun1d::square(curvature[j], center[j]));
    return std::make_shared<SeparableSubdifferential>(SeparableFun(std::move(parts)));
}

MaxMonotonePtr make_box_normal_cone(Vec lo, Vec hi) {
    if (lo.size() != hi.size()) throw StructuralError("make_box_normal_cone: size mismatch");
    std::vector<Fun1d> parts;
    parts.reserve(lo.size());
    for (std::size_t j = 0; j < lo.size(); ++j) parts.push_back(Fun1d::box(lo[j], hi[j]));
    return std::make_shared<SeparableSubdifferential>(SeparableFun(std::move(parts)));
}

MaxMonotonePtr make_affine_monotone(Matrix m, Vec b) {
    return std::make_shared<AffineMonotoneOp>(std::move(m), std::move(b));
}

MaxMonotonePtr make_shifted(MaxMonotonePtr inner, Vec ustar) {
    return std::make_shared<ShiftedMaxOp>(std::move(inner), std::move(ustar));
}

MaxMonotonePtr make_separable_subdiff(SeparableFun f) {
    return std::make_shared<SeparableSubdifferential>(std::move(f));
}

SingleValuedPtr make_identity_map(int dim) {
    return std::make_shared<AffineMap>(Matrix::identity(dim), zeros(dim));
}

SingleValuedPtr make_affine_map(Matrix m, Vec b) {
    return std::make_shared<AffineMap>(std::move(m), std::move(b));
}

SingleValuedPtr make_rotation_map(double angle) {
    return std::make_shared<AffineMap>(Matrix::rotation2d(angle), zeros(2));
}

SingleValuedPtr make_gradient_map(SeparableFun smooth) {
    if (!smooth.is_smooth()) throw ParameterError("make_gradient_map: function is not smooth");
    const int d = smooth.dim();
    return std::make_shared<CallableMap>(
        d, [f = std::move(smooth)](ConstSpan x) { return f.gradient(x); });
}

double check_firm_nonexpansive(const MaxMonotoneOp& op, double gamma, ConstSpan x, ConstSpan y) {
    const Vec jx = resolvent(op, gamma, x);
    const Vec jy = resolvent(op, gamma, y);
    double lhs = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double dj = jx[j] - jy[j];
        const double dr = (x[j] - jx[j]) - (y[j] - jy[j]);
        lhs += dj * dj + dr * dr;
    }
    double rhs = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double d = x[j] - y[j];
        rhs += d * d;
    }
    return lhs - rhs;
}

double check_cocoercive(const CocoerciveOp& c, ConstSpan x, ConstSpan y) {
    const Vec cx = c.eval(x);
    const Vec cy = c.eval(y);
    const Vec dc = sub(ConstSpan(cx), ConstSpan(cy));
    const Vec dxy = sub(x, y);
    if (c.alpha == kInf) {
        // Zero operator: the inequality holds for every constant; report the
        // plain monotonicity violation instead of inf*0.
        return -dot(ConstSpan(dxy), ConstSpan(dc));
    }
    return c.alpha * norm_sq(ConstSpan(dc)) - dot(ConstSpan(dxy), ConstSpan(dc));
}

double monotonicity_violation(const LipschitzMonotoneOp& t, ConstSpan x, ConstSpan y) {
    const Vec tx = t.eval(x);
    const Vec ty = t.eval(y);
    return -dot(ConstSpan(sub(x, y)), ConstSpan(sub(ConstSpan(tx), ConstSpan(ty))));
}

double lipschitz_violation(const LipschitzMonotoneOp& t, ConstSpan x, ConstSpan y) {
    const Vec tx = t.eval(x);
    const Vec ty = t.eval(y);
    return norm(ConstSpan(sub(ConstSpan(tx), ConstSpan(ty)))) - t.lip * norm(ConstSpan(sub(x, y)));
}

double strong_monotonicity_margin(double gamma, const LipschitzMonotoneOp& t, double sigma,
                                  ConstSpan x, ConstSpan y) {
    const Vec tx = t.eval(x);
    const Vec ty = t.eval(y);
    const Vec dxy = sub(x, y);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
        s += dxy[j] * (dxy[j] / gamma - (tx[j] - ty[j]));
    return s - sigma * norm_sq(ConstSpan(dxy));
}

}  // namespace splitmc
