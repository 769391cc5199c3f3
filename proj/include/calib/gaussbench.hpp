#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "calib/losses.hpp"
#include "calib/numkit.hpp"
#include "calib/trainer.hpp"

namespace calib {

/// Mixture of K two-dimensional Gaussians with a shared covariance.
struct GaussianMixtureSpec {
    int num_classes = 5;
    std::vector<std::array<double, 2>> means;
    std::array<std::array<double, 2>, 2> covariance{{{1.0, 0.0}, {0.0, 1.0}}};
    std::vector<double> priors;  // uniform when empty
};

/// K means drawn uniformly from [-10, 10]^2, identity covariance, uniform
/// priors.
GaussianMixtureSpec random_mixture_spec(int num_classes, RngStream& rng);

/// per_class points per class, class-major order, drawn N(mu_i, Sigma).
LabeledBatch sample_mixture(const GaussianMixtureSpec& spec, int per_class, RngStream& rng);

/// Bayes posterior eta(x) from the mixture densities, computed in log space.
ProbVector true_posterior(std::span<const double> x, const GaussianMixtureSpec& spec);

/// ||eta - pred||_2 over the full probability vectors.
double true_calibration_error(const ProbVector& pred, const ProbVector& eta);

/// Scalar alternative reading: |eta_k - p_k| at the predicted class k.
double true_calibration_error_confidence_gap(const ProbVector& pred, const ProbVector& eta);

struct ToyDataset {
    LabeledBatch train;
    LabeledBatch test;
    GaussianMixtureSpec spec;
};

ToyDataset make_toy_dataset(const GaussianMixtureSpec& spec, int train_per_class,
                            int test_per_class, RngStream& rng);

enum class ErrorReading { VectorL2, ConfidenceGap };

struct CorrelationRun {
    std::vector<double> pearson;  // one per metric
    std::vector<double> gamma;    // grid choice per metric
    std::vector<double> beta;
};

struct CorrelationReport {
    std::vector<std::string> metric_names;
    std::vector<double> mean_pearson;
    std::vector<CorrelationRun> runs;
    int num_runs = 0;
};

/// Pearson correlation between the true calibration error c(x) and each
/// candidate uncertainty weight over the test set, maximized per run over
/// gamma in {1..8} (and beta in {1,2} for gBS weights).
///
/// Run 0 evaluates the given trained model; further runs retrain on the same
/// dataset from child seeds (fresh init and shuffling). Retraining follows
/// retrain_cfg when given, otherwise CE for 5 epochs at lr 0.01.
CorrelationReport correlation_experiment(const MlpModel& model, const ToyDataset& data,
                                         std::span<const LossSpec> metrics, int runs,
                                         std::uint64_t seed,
                                         ErrorReading reading = ErrorReading::VectorL2,
                                         const TrainConfig* retrain_cfg = nullptr);

/// Minimizes the eta-expected loss over the simplex by gradient descent on
/// the logits of q, using the loss's gradient contract with the exact
/// K-term expectation over labels. `lr` seeds a backtracking step size and
/// `steps` bounds the iteration count.
ProbVector simplex_fixed_point(const ProbVector& eta, const LossSpec& loss, double lr, int steps);

/// The eta-expected gradient (logit space) of the loss at q; zero at q = eta
/// for CE and BSCE-GRA.
std::vector<double> expected_grad_at(const ProbVector& q, const ProbVector& eta,
                                     const LossSpec& loss);

struct McBiasResult {
    double estimate = 0.0;  // ||p-eta||^2 - mean ||p-y||^2 over draws
    double expected = 0.0;  // sum_k eta_k (eta_k - 1)
    double stderr_ = 0.0;
};

/// Monte-Carlo check of the Brier bias identity with y ~ Categorical(eta).
McBiasResult mc_bias_check(const ProbVector& eta, const ProbVector& pred, int draws,
                           RngStream& rng);

}  // namespace calib
