#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace calib {

/// Dense row-major matrix of 64-bit floats.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    bool all_finite() const;
};

/// A point on the probability simplex: entries in [0,1], summing to 1 within 1e-9.
struct ProbVector {
    std::vector<double> probs;

    std::size_t size() const { return probs.size(); }
    double operator[](std::size_t i) const { return probs[i]; }
};

/// Validated construction; throws std::invalid_argument on a simplex violation.
ProbVector make_prob_vector(std::vector<double> probs);
bool is_valid_prob_vector(std::span<const double> probs, double tol = 1e-9);

/// One-hot label: onehot[class_index] == 1, the rest 0.
struct LabelVector {
    std::vector<double> onehot;
    int class_index = 0;
};

/// Feature rows plus integer class labels; the unit of training and evaluation.
struct LabeledBatch {
    Matrix features;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

/// Seedable deterministic random stream.
///
/// Built on std::mt19937_64 (state is fully specified by the standard, so a
/// given seed reproduces the identical draw sequence everywhere). Uniform
/// doubles take the top 53 bits; normal draws use the Box-Muller transform
/// with a cached spare, so the mapping from raw 64-bit outputs to doubles is
/// pinned by this class and not by the platform's std::normal_distribution.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    /// Uniform in [0, 1).
    double uniform();

    /// Standard normal draw.
    double normal();

    /// Uniform integer in [0, bound); bound must be positive.
    std::size_t below(std::size_t bound);

    /// Derived independent stream; deterministic in (seed, tag). The parent
    /// stream state is not advanced.
    RngStream split(std::uint64_t tag) const;

    /// Fisher-Yates shuffle driven by this stream.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Engine + spare-normal state, round-trippable through restore_state().
    std::string state_string() const;
    void restore_state(const std::string& state);

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// log(sum(exp(v))) via max-shift; v must be non-empty and finite.
double log_sum_exp(std::span<const double> v);

/// Temperature softmax: p_i = exp(v_i / t) / sum_k exp(v_k / t), t > 0.
ProbVector softmax(std::span<const double> logits, double temperature = 1.0);

/// Writes softmax into out (same length as logits); no allocation beyond out.
void softmax_into(std::span<const double> logits, double temperature, std::span<double> out);

LabelVector one_hot(int class_index, int num_classes);

/// n standard-normal draws from the stream; n must be >= 1.
std::vector<double> rng_standard_normal(RngStream& rng, std::size_t n);

}  // namespace calib
