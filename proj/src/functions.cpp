#include "splitmc/functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace splitmc {

namespace {
constexpr double kInfLocal = std::numeric_limits<double>::infinity();

double clamp(double t, double lo, double hi) { return std::min(std::max(t, lo), hi); }
}  // namespace

Interval Interval::all() { return {-kInfLocal, kInfLocal}; }
Interval Interval::at_least(double t) { return {t, kInfLocal}; }
Interval Interval::at_most(double t) { return {-kInfLocal, t}; }

Interval Interval::operator+(const Interval& o) const {
    if (is_empty() || o.is_empty()) return empty();
    // -inf + inf cannot occur: catalog intervals are half-lines or bounded.
    return {lo + o.lo, hi + o.hi};
}

double Interval::dist(double u) const {
    if (is_empty()) return kInfLocal;
    if (u < lo) return lo - u;
    if (u > hi) return u - hi;
    return 0.0;
}

Fun1d Fun1d::abs(double w) {
    if (w < 0) throw ParameterError("Fun1d::abs: weight must be >= 0");
    Fun1d f;
    f.kind = Kind::Abs;
    f.w = w;
    return f;
}

Fun1d Fun1d::square(double c, double m) {
    if (c < 0) throw ParameterError("Fun1d::square: curvature must be >= 0");
    Fun1d f;
    f.kind = Kind::Square;
    f.c = c;
    f.m = m;
    return f;
}

Fun1d Fun1d::box(double lo, double hi) {
    if (lo > hi) throw ParameterError("Fun1d::box: lo must be <= hi");
    Fun1d f;
    f.kind = Kind::Box;
    f.lo = lo;
    f.hi = hi;
    return f;
}

Fun1d Fun1d::linear(double b) {
    Fun1d f;
    f.kind = Kind::Linear;
    f.b = b;
    return f;
}

double Fun1d::value(double t) const {
    switch (kind) {
        case Kind::Zero: return 0.0;
        case Kind::Abs: return w * std::abs(t);
        case Kind::Square: return 0.5 * c * (t - m) * (t - m);
        case Kind::Box: return (t >= lo && t <= hi) ? 0.0 : kInfLocal;
        case Kind::Linear: return b * t;
    }
    return 0.0;
}

double Fun1d::prox(double gamma, double t) const {
    switch (kind) {
        case Kind::Zero: return t;
        case Kind::Abs: {
            const double s = gamma * w;
            if (t > s) return t - s;
            if (t < -s) return t + s;
            return 0.0;
        }
        case Kind::Square: return (t + gamma * c * m) / (1.0 + gamma * c);
        case Kind::Box: return clamp(t, lo, hi);
        case Kind::Linear: return t - gamma * b;
    }
    return t;
}

double Fun1d::grad(double t) const {
    switch (kind) {
        case Kind::Zero: return 0.0;
        case Kind::Square: return c * (t - m);
        case Kind::Linear: return b;
        default: throw ParameterError("Fun1d::grad: piece is not smooth");
    }
}

Interval Fun1d::subdiff(double t) const {
    switch (kind) {
        case Kind::Zero: return Interval::point(0.0);
        case Kind::Abs:
            if (t > 0) return Interval::point(w);
            if (t < 0) return Interval::point(-w);
            return {-w, w};
        case Kind::Square: return Interval::point(c * (t - m));
        case Kind::Box:
            if (t < lo || t > hi) return Interval::empty();
            if (t == lo && t == hi) return Interval::all();
            if (t == lo) return Interval::at_most(0.0);
            if (t == hi) return Interval::at_least(0.0);
            return Interval::point(0.0);
        case Kind::Linear: return Interval::point(b);
    }
    return Interval::empty();
}

Interval Fun1d::subdiff_inverse(double v) const {
    switch (kind) {
        case Kind::Zero: return v == 0.0 ? Interval::all() : Interval::empty();
        case Kind::Abs:
            if (w == 0.0) return v == 0.0 ? Interval::all() : Interval::empty();
            if (v > w || v < -w) return Interval::empty();
            if (v == w) return Interval::at_least(0.0);
            if (v == -w) return Interval::at_most(0.0);
            return Interval::point(0.0);
        case Kind::Square:
            if (c == 0.0) return v == 0.0 ? Interval::all() : Interval::empty();
            return Interval::point(m + v / c);
        case Kind::Box:
            if (v > 0) return Interval::point(hi);
            if (v < 0) return Interval::point(lo);
            return {lo, hi};
        case Kind::Linear: return v == b ? Interval::all() : Interval::empty();
    }
    return Interval::empty();
}

Interval Fun1d::subdiff_inverse_affine(double q, double d, double v) const {
    if (q < 0) throw ParameterError("subdiff_inverse_affine: q must be >= 0");
    if (q == 0.0) return subdiff_inverse(v - d);
    const double u = v - d;
    switch (kind) {
        case Kind::Zero: return Interval::point(u / q);
        case Kind::Abs: {
            // v in w*sgn(t) + q*t + d
            if (u > w) return Interval::point((u - w) / q);
            if (u < -w) return Interval::point((u + w) / q);
            return Interval::point(0.0);
        }
        case Kind::Square: return Interval::point((u + c * m) / (q + c));
        case Kind::Box: return Interval::point(clamp(u / q, lo, hi));
        case Kind::Linear: return Interval::point((u - b) / q);
    }
    return Interval::empty();
}

Interval Fun1d::dual_domain() const {
    switch (kind) {
        case Kind::Zero: return Interval::point(0.0);
        case Kind::Abs: return {-w, w};
        case Kind::Square: return c == 0.0 ? Interval::point(0.0) : Interval::all();
        case Kind::Box: return Interval::all();
        case Kind::Linear: return Interval::point(b);
    }
    return Interval::empty();
}

std::optional<double> Fun1d::argmin() const {
    switch (kind) {
        case Kind::Zero: return 0.0;
        case Kind::Abs: return 0.0;
        case Kind::Square: return c == 0.0 ? std::optional<double>(0.0) : std::optional<double>(m);
        case Kind::Box: return clamp(0.0, lo, hi);
        case Kind::Linear: return b == 0.0 ? std::optional<double>(0.0) : std::nullopt;
    }
    return std::nullopt;
}

bool SeparableFun::is_smooth() const {
    for (const auto& p : parts_)
        if (!p.is_smooth()) return false;
    return true;
}

bool SeparableFun::is_zero() const {
    for (const auto& p : parts_)
        if (p.kind != Fun1d::Kind::Zero) return false;
    return true;
}

double SeparableFun::value(ConstSpan x) const {
    double s = 0.0;
    for (std::size_t j = 0; j < parts_.size(); ++j) s += parts_[j].value(x[j]);
    return s;
}

Vec SeparableFun::prox(double gamma, ConstSpan x) const {
    Vec out(parts_.size());
    for (std::size_t j = 0; j < parts_.size(); ++j) out[j] = parts_[j].prox(gamma, x[j]);
    return out;
}

Vec SeparableFun::gradient(ConstSpan x) const {
    Vec out(parts_.size());
    for (std::size_t j = 0; j < parts_.size(); ++j) out[j] = parts_[j].grad(x[j]);
    return out;
}

Vec SeparableFun::canonical_subgradient(ConstSpan x) const {
    Vec out(parts_.size());
    for (std::size_t j = 0; j < parts_.size(); ++j) {
        const Interval s = parts_[j].subdiff(x[j]);
        if (s.is_empty())
            throw ParameterError("canonical_subgradient: point outside the function domain");
        if (s.lo > -kInfLocal && s.hi < kInfLocal)
            out[j] = (s.lo == s.hi) ? s.lo : clamp(0.0, s.lo, s.hi);
        else if (s.lo > -kInfLocal)
            out[j] = std::max(s.lo, 0.0);
        else if (s.hi < kInfLocal)
            out[j] = std::min(s.hi, 0.0);
        else
            out[j] = 0.0;
    }
    return out;
}

std::optional<Vec> SeparableFun::argmin() const {
    Vec out(parts_.size());
    for (std::size_t j = 0; j < parts_.size(); ++j) {
        auto m = parts_[j].argmin();
        if (!m) return std::nullopt;
        out[j] = *m;
    }
    return out;
}

}  // namespace splitmc
