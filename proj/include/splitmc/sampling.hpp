#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splitmc/rng.hpp"
#include "splitmc/spaces.hpp"

namespace splitmc {

/// Random activation of index blocks. Iteration 0 always activates the full
/// index set; from iteration 1 on the draws are i.i.d. across iterations.
///
/// Kinds:
///   full                   — every index, every iteration;
///   iid-uniform-singleton  — one uniformly chosen index per iteration;
///   iid-bernoulli-per-index— independent inclusion with probability p_i,
///                            the whole draw rejected and redone while empty.
/// Rejection conditions within a single iteration only, so per-index
/// indicators stay independent across iterations.
class BlockSampler {
public:
    enum class Kind { Full, UniformSingleton, BernoulliPerIndex };

    static BlockSampler full(int index_count, int window = 1);
    static BlockSampler uniform_singleton(int index_count, int window);
    static BlockSampler bernoulli(Vec inclusion_probs, int window);

    Kind kind() const { return kind_; }
    int index_count() const { return count_; }
    int window() const { return window_; }

    /// Nonempty activated set for iteration n (sorted). n = 0 returns all.
    std::vector<int> sample(std::int64_t n, RngStream& rng) const;

    /// Exact P(i activated at one iteration n >= 1).
    double per_iteration_probability(int i) const;

    /// Exact P(i in union of I_n..I_{n+window-1}) for n >= 1.
    double cover_probability(int i) const;

    std::string describe() const;

private:
    Kind kind_ = Kind::Full;
    int count_ = 0;
    int window_ = 1;
    Vec probs_;  // Bernoulli only
};

/// Random relaxation law with exact moment formulas.
/// Super-relaxation (support above 2) is admissible when E[l(2-l)] > 0 and
/// P(l > 2) > 0.
class RelaxationSampler {
public:
    enum class Kind { Constant, UniformInterval, TwoPoint };

    static RelaxationSampler constant(double value);
    static RelaxationSampler uniform_interval(double lo, double hi);
    static RelaxationSampler two_point(double a, double prob_a, double b);

    Kind kind() const { return kind_; }
    double sample(RngStream& rng) const;

    double min_support() const;
    double max_support() const;
    /// Exact E[lambda(2 - lambda)].
    double moment() const;
    /// Exact P(lambda > 2).
    double prob_above_two() const;

    std::string describe() const;

private:
    Kind kind_ = Kind::Constant;
    double a_ = 1.0, b_ = 1.0, pa_ = 1.0;
};

/// Per-index last-activation counters: counter[i] = max{j <= n : i active at j}.
class LastActivation {
public:
    LastActivation() = default;
    explicit LastActivation(int index_count)
        : last_(static_cast<std::size_t>(index_count), 0) {}

    int index_count() const { return static_cast<int>(last_.size()); }
    std::int64_t last(int i) const { return last_[static_cast<std::size_t>(i)]; }

    /// Record iteration n's active set. n must be strictly increasing across
    /// calls and the first call must be n = 0 with the full set.
    void update(std::int64_t n, const std::vector<int>& active);

private:
    std::vector<std::int64_t> last_;
    std::int64_t prev_n_ = -1;
};

}  // namespace splitmc
