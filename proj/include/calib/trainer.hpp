#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "calib/losses.hpp"
#include "calib/metrics.hpp"
#include "calib/numkit.hpp"

namespace calib {

/// One dense layer: weights are (out_dim x in_dim), row-major.
struct Layer {
    Matrix weights;
    std::vector<double> bias;
};

/// Feed-forward classifier with ReLU between layers, identity at the output.
struct MlpModel {
    int input_dim = 0;
    std::vector<int> hidden_dims;
    int num_classes = 0;
    std::vector<Layer> layers;

    bool all_finite() const;
    std::size_t parameter_count() const;
};

/// He-normal weight init, zero biases; deterministic in the stream.
MlpModel make_mlp(int input_dim, std::span<const int> hidden_dims, int num_classes,
                  RngStream& rng);

/// Per-layer inputs and pre-activations, enough for an exact backward pass.
struct ForwardCache {
    std::vector<std::vector<double>> inputs;   // activation entering each layer
    std::vector<std::vector<double>> preacts;  // W x + b per layer
};

/// Logits for one sample; fills cache when given.
std::vector<double> forward(const MlpModel& model, std::span<const double> x,
                            ForwardCache* cache = nullptr);

/// Same shapes as the model's layers; used for gradients and velocity.
struct ParamBlock {
    std::vector<Layer> layers;

    static ParamBlock zeros_like(const MlpModel& model);
    void scale(double s);
    void clear();
};

/// Exact chain-rule gradients for one sample, accumulated into grads
/// (scaled by `scale`, so batch means accumulate sample-by-sample).
void backward(const MlpModel& model, const ForwardCache& cache,
              std::span<const double> grad_logits, ParamBlock& grads, double scale = 1.0);

/// v <- momentum v + (grad + weight_decay * theta); theta <- theta - lr v.
/// Weight decay applies to weights only, not biases.
void sgd_step(MlpModel& model, const ParamBlock& grads, double lr, double momentum,
              double weight_decay, ParamBlock& velocity);

struct LrPhase {
    int until_epoch = 0;  // phase applies while epoch < until_epoch
    double lr = 0.1;
};

/// Piecewise-constant lookup; past the last breakpoint the final lr persists.
double lr_at_epoch(std::span<const LrPhase> schedule, int epoch);

struct TrainConfig {
    LossSpec loss;
    int epochs = 20;
    int batch_size = 128;
    std::vector<LrPhase> lr_schedule = {{1 << 30, 0.01}};
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::uint64_t seed = 42;
    int num_bins = 15;
    std::vector<int> hidden_dims = {64, 64};
    std::vector<int> grad_log_epochs;  // epochs after which to log per-sample grad norms
};

struct EpochStats {
    double train_loss = 0.0;
    double test_ece = 0.0;
    double test_accuracy = 0.0;
};

struct GradNormRecord {
    int sample_id = 0;
    double last_layer_grad_norm = 0.0;
    double brier = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    std::map<int, std::vector<GradNormRecord>> grad_norms;  // keyed by epoch
};

/// Everything needed to continue a run exactly where it stopped.
struct TrainState {
    MlpModel model;
    ParamBlock velocity;
    RngStream rng;
    int epochs_done = 0;
};

/// Initial state for a run: model drawn from config.seed, zero velocity.
/// num_classes comes from the largest label across both batches.
TrainState fresh_train_state(const TrainConfig& config, const LabeledBatch& train_data,
                             const LabeledBatch& eval_data);

/// Runs epochs [state.epochs_done, until_epoch); appends to history.
/// Shuffles each epoch from the state's stream; the final partial batch is
/// kept. Per-batch gradient is the mean of per-sample gradients. Throws
/// numeric_error naming epoch and batch if parameters go non-finite.
void train_epochs(TrainState& state, const TrainConfig& config, const LabeledBatch& train_data,
                  const LabeledBatch& eval_data, int until_epoch, TrainHistory& history);

/// Full run from scratch; deterministic in (config, data).
std::pair<MlpModel, TrainHistory> train(const TrainConfig& config, const LabeledBatch& train_data,
                                        const LabeledBatch& eval_data);

/// L2 norm of the final layer's weight gradient for a single sample.
double per_sample_last_layer_grad_norm(const MlpModel& model, std::span<const double> x, int label,
                                       const LossSpec& loss);

/// Model predictions over a batch.
PredictionSet predict(const MlpModel& model, const LabeledBatch& data);

/// Logit matrix over a batch (one row per sample).
Matrix logits_matrix(const MlpModel& model, const LabeledBatch& data);

}  // namespace calib
