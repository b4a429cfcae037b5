#include "splitmc/spaces.hpp"

#include <cmath>

namespace splitmc {

SpaceLayout::SpaceLayout(std::vector<int> dims) : dims_(std::move(dims)) {
    offsets_.reserve(dims_.size());
    total_ = 0;
    for (int d : dims_) {
        if (d < 1) throw StructuralError("SpaceLayout: every block dimension must be >= 1");
        offsets_.push_back(total_);
        total_ += d;
    }
}

SpaceLayout concat(const std::vector<SpaceLayout>& parts) {
    std::vector<int> dims;
    for (const auto& p : parts)
        for (int d : p.dims()) dims.push_back(d);
    return SpaceLayout(dims);
}

BlockVector::BlockVector(SpaceLayout layout)
    : layout_(std::move(layout)), data_(static_cast<std::size_t>(layout_.total_dim()), 0.0) {}

BlockVector::BlockVector(SpaceLayout layout, Vec data)
    : layout_(std::move(layout)), data_(std::move(data)) {
    if (static_cast<int>(data_.size()) != layout_.total_dim())
        throw StructuralError("BlockVector: data length does not match layout total dimension");
}

void require_same_layout(const BlockVector& x, const BlockVector& y, const char* where) {
    if (!(x.layout() == y.layout()))
        throw StructuralError(std::string(where) + ": layout mismatch");
}

double inner(const BlockVector& x, const BlockVector& y) {
    require_same_layout(x, y, "inner");
    return dot(ConstSpan(x.data()), ConstSpan(y.data()));
}

double norm_sq(const BlockVector& x) { return dot(ConstSpan(x.data()), ConstSpan(x.data())); }

double norm(const BlockVector& x) { return std::sqrt(norm_sq(x)); }

BlockVector axpy(double a, const BlockVector& x, const BlockVector& y) {
    require_same_layout(x, y, "axpy");
    Vec out = y.data();
    const Vec& xs = x.data();
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += a * xs[j];
    return BlockVector(x.layout(), std::move(out));
}

double dot(ConstSpan x, ConstSpan y) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += x[j] * y[j];
    return s;
}

double norm_sq(ConstSpan x) { return dot(x, x); }

double norm(ConstSpan x) { return std::sqrt(norm_sq(x)); }

Vec add(ConstSpan x, ConstSpan y) {
    Vec out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] + y[j];
    return out;
}

Vec sub(ConstSpan x, ConstSpan y) {
    Vec out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] - y[j];
    return out;
}

Vec scaled(double a, ConstSpan x) {
    Vec out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = a * x[j];
    return out;
}

void add_scaled_inplace(Vec& acc, double a, ConstSpan x) {
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += a * x[j];
}

Vec zeros(int d) { return Vec(static_cast<std::size_t>(d), 0.0); }

bool all_finite(ConstSpan x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace splitmc
