#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splitmc/spaces.hpp"

namespace splitmc {

/// Closed interval of the extended reals; lo > hi encodes the empty set.
struct Interval {
    double lo = 1.0;
    double hi = -1.0;

    static Interval empty() { return {1.0, -1.0}; }
    static Interval point(double t) { return {t, t}; }
    static Interval all();
    static Interval at_least(double t);
    static Interval at_most(double t);

    bool is_empty() const { return lo > hi; }
    Interval operator+(const Interval& o) const;
    double dist(double u) const;  // +inf for the empty set
};

/// One-dimensional convex piece of the function catalog.
/// Kinds: zero; abs = w*|t|; square = (c/2)*(t-m)^2; box indicator on [lo,hi];
/// linear = b*t.
struct Fun1d {
    enum class Kind { Zero, Abs, Square, Box, Linear };
    Kind kind = Kind::Zero;
    double w = 0.0;           // Abs
    double c = 0.0, m = 0.0;  // Square
    double lo = 0.0, hi = 0.0;  // Box
    double b = 0.0;           // Linear

    static Fun1d zero() { return {}; }
    static Fun1d abs(double w);
    static Fun1d square(double c, double m);
    static Fun1d box(double lo, double hi);
    static Fun1d linear(double b);

    double value(double t) const;           // +inf outside a box
    double prox(double gamma, double t) const;
    bool is_smooth() const { return kind == Kind::Zero || kind == Kind::Square || kind == Kind::Linear; }
    double grad(double t) const;            // smooth kinds only
    Interval subdiff(double t) const;
    /// {t : v in subdiff(t)} as an interval (empty when v is outside the range
    /// of the subdifferential).
    Interval subdiff_inverse(double v) const;
    /// {t : v in subdiff(t) + q*t + d}, q >= 0. Strictly monotone for q > 0,
    /// so the result is a point; q = 0 falls back to subdiff_inverse(v - d).
    Interval subdiff_inverse_affine(double q, double d, double v) const;
    /// Closure of the set of v with subdiff_inverse(v) nonempty.
    Interval dual_domain() const;
    std::optional<double> argmin() const;   // a minimizer, when one exists
};

/// Separable function on a Euclidean factor: independent 1-D pieces.
class SeparableFun {
public:
    SeparableFun() = default;
    explicit SeparableFun(std::vector<Fun1d> parts) : parts_(std::move(parts)) {}
    /// d copies of the same piece.
    SeparableFun(int dim, Fun1d piece) : parts_(static_cast<std::size_t>(dim), piece) {}

    int dim() const { return static_cast<int>(parts_.size()); }
    const Fun1d& part(int j) const { return parts_[static_cast<std::size_t>(j)]; }
    bool is_smooth() const;
    bool is_zero() const;

    double value(ConstSpan x) const;
    Vec prox(double gamma, ConstSpan x) const;
    Vec gradient(ConstSpan x) const;
    Vec canonical_subgradient(ConstSpan x) const;
    std::optional<Vec> argmin() const;

private:
    std::vector<Fun1d> parts_;
};

}  // namespace splitmc
