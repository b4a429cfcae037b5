#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace splitmc {

using Vec = std::vector<double>;
using Span = std::span<double>;
using ConstSpan = std::span<const double>;

/// Contract violations in vector/operator wiring (layout or dimension mismatch).
struct StructuralError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid scalar parameters (nonpositive step size, relaxation out of range, ...).
struct ParameterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values produced while iterating; message carries the iteration index.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape of a product of Euclidean factors: per-block dimensions plus offsets
/// into one flat buffer.
class SpaceLayout {
public:
    SpaceLayout() = default;
    explicit SpaceLayout(std::vector<int> dims);

    int blocks() const { return static_cast<int>(dims_.size()); }
    int dim(int b) const { return dims_[static_cast<std::size_t>(b)]; }
    int offset(int b) const { return offsets_[static_cast<std::size_t>(b)]; }
    int total_dim() const { return total_; }
    const std::vector<int>& dims() const { return dims_; }

    bool operator==(const SpaceLayout& o) const { return dims_ == o.dims_; }

private:
    std::vector<int> dims_;
    std::vector<int> offsets_;
    int total_ = 0;
};

/// Concatenate layouts into the layout of the direct sum.
SpaceLayout concat(const std::vector<SpaceLayout>& parts);

/// Element of a product space, stored as one contiguous buffer with block views.
class BlockVector {
public:
    BlockVector() = default;
    explicit BlockVector(SpaceLayout layout);  // zero vector
    BlockVector(SpaceLayout layout, Vec data);

    const SpaceLayout& layout() const { return layout_; }
    int dim() const { return layout_.total_dim(); }

    Span block(int b) {
        return Span(data_.data() + layout_.offset(b), static_cast<std::size_t>(layout_.dim(b)));
    }
    ConstSpan block(int b) const {
        return ConstSpan(data_.data() + layout_.offset(b), static_cast<std::size_t>(layout_.dim(b)));
    }
    Vec& data() { return data_; }
    const Vec& data() const { return data_; }
    double& operator[](std::size_t j) { return data_[j]; }
    double operator[](std::size_t j) const { return data_[j]; }

private:
    SpaceLayout layout_;
    Vec data_;
};

void require_same_layout(const BlockVector& x, const BlockVector& y, const char* where);

/// Euclidean scalar product of the flat buffers.
double inner(const BlockVector& x, const BlockVector& y);
double norm(const BlockVector& x);
double norm_sq(const BlockVector& x);

/// a*x + y, componentwise.
BlockVector axpy(double a, const BlockVector& x, const BlockVector& y);

// Span-level helpers shared by the operator catalog.
double dot(ConstSpan x, ConstSpan y);
double norm_sq(ConstSpan x);
double norm(ConstSpan x);
Vec add(ConstSpan x, ConstSpan y);
Vec sub(ConstSpan x, ConstSpan y);
Vec scaled(double a, ConstSpan x);
void add_scaled_inplace(Vec& acc, double a, ConstSpan x);
Vec zeros(int d);
bool all_finite(ConstSpan x);

}  // namespace splitmc
