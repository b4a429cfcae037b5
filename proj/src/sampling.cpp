#include "splitmc/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace splitmc {

BlockSampler BlockSampler::full(int index_count, int window) {
    if (index_count < 1) throw ParameterError("BlockSampler: index count must be >= 1");
    BlockSampler s;
    s.kind_ = Kind::Full;
    s.count_ = index_count;
    s.window_ = window;
    return s;
}

BlockSampler BlockSampler::uniform_singleton(int index_count, int window) {
    if (index_count < 1) throw ParameterError("BlockSampler: index count must be >= 1");
    if (window < 1) throw ParameterError("BlockSampler: window must be >= 1");
    BlockSampler s;
    s.kind_ = Kind::UniformSingleton;
    s.count_ = index_count;
    s.window_ = window;
    return s;
}

BlockSampler BlockSampler::bernoulli(Vec inclusion_probs, int window) {
    if (inclusion_probs.empty()) throw ParameterError("BlockSampler: index count must be >= 1");
    if (window < 1) throw ParameterError("BlockSampler: window must be >= 1");
    double any = 0.0;
    for (double p : inclusion_probs) {
        if (p < 0.0 || p > 1.0) throw ParameterError("BlockSampler: inclusion probability outside [0,1]");
        any = std::max(any, p);
    }
    if (any == 0.0)
        throw ParameterError("BlockSampler: all inclusion probabilities are zero; sets would be empty");
    BlockSampler s;
    s.kind_ = Kind::BernoulliPerIndex;
    s.count_ = static_cast<int>(inclusion_probs.size());
    s.window_ = window;
    s.probs_ = std::move(inclusion_probs);
    return s;
}

std::vector<int> BlockSampler::sample(std::int64_t n, RngStream& rng) const {
    std::vector<int> out;
    if (n == 0) {
        out.resize(static_cast<std::size_t>(count_));
        for (int i = 0; i < count_; ++i) out[static_cast<std::size_t>(i)] = i;
        return out;
    }
    switch (kind_) {
        case Kind::Full:
            out.resize(static_cast<std::size_t>(count_));
            for (int i = 0; i < count_; ++i) out[static_cast<std::size_t>(i)] = i;
            return out;
        case Kind::UniformSingleton:
            out.push_back(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(count_))));
            return out;
        case Kind::BernoulliPerIndex:
            while (out.empty()) {
                for (int i = 0; i < count_; ++i)
                    if (rng.next_double() < probs_[static_cast<std::size_t>(i)]) out.push_back(i);
            }
            return out;
    }
    return out;
}

double BlockSampler::per_iteration_probability(int i) const {
    switch (kind_) {
        case Kind::Full: return 1.0;
        case Kind::UniformSingleton: return 1.0 / static_cast<double>(count_);
        case Kind::BernoulliPerIndex: {
            // conditioned on a nonempty draw: P(i in I | I nonempty) = p_i / (1 - prod(1-p_j))
            double none = 1.0;
            for (double p : probs_) none *= 1.0 - p;
            return probs_[static_cast<std::size_t>(i)] / (1.0 - none);
        }
    }
    return 0.0;
}

double BlockSampler::cover_probability(int i) const {
    const double p = per_iteration_probability(i);
    return 1.0 - std::pow(1.0 - p, window_);
}

std::string BlockSampler::describe() const {
    switch (kind_) {
        case Kind::Full: return "full";
        case Kind::UniformSingleton: return "iid-uniform-singleton";
        case Kind::BernoulliPerIndex: return "iid-bernoulli-per-index";
    }
    return "?";
}

RelaxationSampler RelaxationSampler::constant(double value) {
    if (!(value > 0.0)) throw ParameterError("RelaxationSampler: value must be positive");
    RelaxationSampler s;
    s.kind_ = Kind::Constant;
    s.a_ = value;
    return s;
}

RelaxationSampler RelaxationSampler::uniform_interval(double lo, double hi) {
    if (!(lo > 0.0) || !(hi > lo)) throw ParameterError("RelaxationSampler: need 0 < lo < hi");
    RelaxationSampler s;
    s.kind_ = Kind::UniformInterval;
    s.a_ = lo;
    s.b_ = hi;
    return s;
}

RelaxationSampler RelaxationSampler::two_point(double a, double prob_a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw ParameterError("RelaxationSampler: atoms must be positive");
    if (prob_a < 0.0 || prob_a > 1.0) throw ParameterError("RelaxationSampler: probability outside [0,1]");
    RelaxationSampler s;
    s.kind_ = Kind::TwoPoint;
    s.a_ = a;
    s.b_ = b;
    s.pa_ = prob_a;
    return s;
}

double RelaxationSampler::sample(RngStream& rng) const {
    switch (kind_) {
        case Kind::Constant: return a_;
        case Kind::UniformInterval: return rng.next_uniform(a_, b_);
        case Kind::TwoPoint: return rng.next_double() < pa_ ? a_ : b_;
    }
    return a_;
}

double RelaxationSampler::min_support() const {
    switch (kind_) {
        case Kind::Constant: return a_;
        case Kind::UniformInterval: return a_;
        case Kind::TwoPoint: return std::min(a_, b_);
    }
    return a_;
}

double RelaxationSampler::max_support() const {
    switch (kind_) {
        case Kind::Constant: return a_;
        case Kind::UniformInterval: return b_;
        case Kind::TwoPoint: return std::max(a_, b_);
    }
    return a_;
}

double RelaxationSampler::moment() const {
    switch (kind_) {
        case Kind::Constant: return a_ * (2.0 - a_);
        case Kind::UniformInterval:
            // E[2l - l^2] = (lo+hi) - (lo^2 + lo*hi + hi^2)/3
            return (a_ + b_) - (a_ * a_ + a_ * b_ + b_ * b_) / 3.0;
        case Kind::TwoPoint: return pa_ * a_ * (2.0 - a_) + (1.0 - pa_) * b_ * (2.0 - b_);
    }
    return 0.0;
}

double RelaxationSampler::prob_above_two() const {
    switch (kind_) {
        case Kind::Constant: return a_ > 2.0 ? 1.0 : 0.0;
        case Kind::UniformInterval: {
            if (b_ <= 2.0) return 0.0;
            if (a_ >= 2.0) return 1.0;
            return (b_ - 2.0) / (b_ - a_);
        }
        case Kind::TwoPoint:
            return (a_ > 2.0 ? pa_ : 0.0) + (b_ > 2.0 ? 1.0 - pa_ : 0.0);
    }
    return 0.0;
}

std::string RelaxationSampler::describe() const {
    switch (kind_) {
        case Kind::Constant: return "constant";
        case Kind::UniformInterval: return "uniform-interval";
        case Kind::TwoPoint: return "two-point";
    }
    return "?";
}

void LastActivation::update(std::int64_t n, const std::vector<int>& active) {
    if (n <= prev_n_) throw ParameterError("LastActivation: iteration index must be strictly increasing");
    if (n == 0 || prev_n_ == -1) {
        if (n != 0 || static_cast<int>(active.size()) != index_count())
            throw ParameterError("LastActivation: first update must be n = 0 with the full index set");
    }
    for (int i : active) {
        if (i < 0 || i >= index_count()) throw ParameterError("LastActivation: index out of range");
        last_[static_cast<std::size_t>(i)] = n;
    }
    prev_n_ = n;
}

}  // namespace splitmc
