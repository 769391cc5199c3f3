#include "calib/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "calib/errors.hpp"
#include "calib/metrics.hpp"

namespace calib {

bool MlpModel::all_finite() const {
    for (const auto& layer : layers) {
        if (!layer.weights.all_finite()) return false;
        for (double b : layer.bias)
            if (!std::isfinite(b)) return false;
    }
    return true;
}

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.weights.data.size() + layer.bias.size();
    return n;
}

MlpModel make_mlp(int input_dim, std::span<const int> hidden_dims, int num_classes,
                  RngStream& rng) {
    if (input_dim < 1 || num_classes < 2)
        throw std::invalid_argument("make_mlp: need input_dim >= 1 and num_classes >= 2");
    MlpModel model;
    model.input_dim = input_dim;
    model.hidden_dims.assign(hidden_dims.begin(), hidden_dims.end());
    model.num_classes = num_classes;
    int in_dim = input_dim;
    auto add_layer = [&](int out_dim) {
        Layer layer;
        layer.weights = Matrix(static_cast<std::size_t>(out_dim), static_cast<std::size_t>(in_dim));
        double scale = std::sqrt(2.0 / static_cast<double>(in_dim));
        for (auto& w : layer.weights.data) w = scale * rng.normal();
        layer.bias.assign(static_cast<std::size_t>(out_dim), 0.0);
        model.layers.push_back(std::move(layer));
        in_dim = out_dim;
    };
    for (int h : hidden_dims) {
        if (h < 1) throw std::invalid_argument("make_mlp: hidden dims must be positive");
        add_layer(h);
    }
    add_layer(num_classes);
    return model;
}

std::vector<double> forward(const MlpModel& model, std::span<const double> x,
                            ForwardCache* cache) {
    if (x.size() != static_cast<std::size_t>(model.input_dim))
        throw std::invalid_argument("forward: input length != input_dim");
    if (cache) {
        cache->inputs.resize(model.layers.size());
        cache->preacts.resize(model.layers.size());
    }
    std::vector<double> act(x.begin(), x.end());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        if (cache) cache->inputs[l] = act;
        std::vector<double> z(layer.weights.rows);
        for (std::size_t r = 0; r < layer.weights.rows; ++r) {
            double s = layer.bias[r];
            auto row = layer.weights.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * act[c];
            z[r] = s;
        }
        if (cache) cache->preacts[l] = z;
        if (l + 1 < model.layers.size())
            for (auto& v : z) v = v > 0.0 ? v : 0.0;
        act = std::move(z);
    }
    return act;
}

ParamBlock ParamBlock::zeros_like(const MlpModel& model) {
    ParamBlock block;
    block.layers.reserve(model.layers.size());
    for (const auto& layer : model.layers) {
        Layer zero;
        zero.weights = Matrix(layer.weights.rows, layer.weights.cols);
        zero.bias.assign(layer.bias.size(), 0.0);
        block.layers.push_back(std::move(zero));
    }
    return block;
}

void ParamBlock::scale(double s) {
    for (auto& layer : layers) {
        for (auto& w : layer.weights.data) w *= s;
        for (auto& b : layer.bias) b *= s;
    }
}

void ParamBlock::clear() {
    for (auto& layer : layers) {
        std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
}

void backward(const MlpModel& model, const ForwardCache& cache,
              std::span<const double> grad_logits, ParamBlock& grads, double scale) {
    if (cache.inputs.size() != model.layers.size())
        throw std::invalid_argument("backward: cache does not match model");
    if (grad_logits.size() != static_cast<std::size_t>(model.num_classes))
        throw std::invalid_argument("backward: grad_logits length != num_classes");
    std::vector<double> delta(grad_logits.begin(), grad_logits.end());
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const auto& layer = model.layers[l];
        const auto& input = cache.inputs[l];
        if (input.size() != layer.weights.cols)
            throw std::invalid_argument("backward: stale cache");
        auto& g = grads.layers[l];
        for (std::size_t r = 0; r < layer.weights.rows; ++r) {
            double dr = delta[r] * scale;
            g.bias[r] += dr;
            auto grow = g.weights.row(r);
            for (std::size_t c = 0; c < grow.size(); ++c) grow[c] += dr * input[c];
        }
        if (l == 0) break;
        std::vector<double> prev(layer.weights.cols, 0.0);
        for (std::size_t r = 0; r < layer.weights.rows; ++r) {
            double dr = delta[r];
            auto row = layer.weights.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) prev[c] += dr * row[c];
        }
        const auto& pre = cache.preacts[l - 1];
        for (std::size_t c = 0; c < prev.size(); ++c)
            if (pre[c] <= 0.0) prev[c] = 0.0;  // ReLU mask
        delta = std::move(prev);
    }
}

void sgd_step(MlpModel& model, const ParamBlock& grads, double lr, double momentum,
              double weight_decay, ParamBlock& velocity) {
    if (lr <= 0.0) throw std::invalid_argument("sgd_step: lr must be positive");
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& w = model.layers[l].weights.data;
        auto& vw = velocity.layers[l].weights.data;
        const auto& gw = grads.layers[l].weights.data;
        for (std::size_t i = 0; i < w.size(); ++i) {
            vw[i] = momentum * vw[i] + (gw[i] + weight_decay * w[i]);
            w[i] -= lr * vw[i];
        }
        auto& b = model.layers[l].bias;
        auto& vb = velocity.layers[l].bias;
        const auto& gb = grads.layers[l].bias;
        for (std::size_t i = 0; i < b.size(); ++i) {
            vb[i] = momentum * vb[i] + gb[i];
            b[i] -= lr * vb[i];
        }
    }
}

double lr_at_epoch(std::span<const LrPhase> schedule, int epoch) {
    if (schedule.empty()) throw std::invalid_argument("lr_at_epoch: empty schedule");
    if (epoch < 0) throw std::invalid_argument("lr_at_epoch: epoch must be >= 0");
    for (const auto& phase : schedule)
        if (epoch < phase.until_epoch) return phase.lr;
    return schedule.back().lr;
}

PredictionSet predict(const MlpModel& model, const LabeledBatch& data) {
    PredictionSet set;
    set.probs.reserve(data.size());
    set.labels = data.labels;
    for (std::size_t i = 0; i < data.size(); ++i)
        set.probs.push_back(softmax(forward(model, data.features.row(i))));
    return set;
}

Matrix logits_matrix(const MlpModel& model, const LabeledBatch& data) {
    Matrix out(data.size(), static_cast<std::size_t>(model.num_classes));
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto logits = forward(model, data.features.row(i));
        std::copy(logits.begin(), logits.end(), out.row(i).begin());
    }
    return out;
}

void train_epochs(TrainState& state, const TrainConfig& config, const LabeledBatch& train_data,
                  const LabeledBatch& eval_data, int until_epoch, TrainHistory& history) {
    if (train_data.size() == 0 || eval_data.size() == 0)
        throw std::invalid_argument("train: empty data");
    std::size_t n = train_data.size();
    std::size_t batch = config.batch_size > 0 ? static_cast<std::size_t>(config.batch_size) : n;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    ParamBlock grads = ParamBlock::zeros_like(state.model);
    ForwardCache cache;
    std::vector<double> probs(static_cast<std::size_t>(state.model.num_classes));
    std::vector<double> grad_logits(probs.size());

    for (int epoch = state.epochs_done; epoch < until_epoch; ++epoch) {
        double lr = lr_at_epoch(config.lr_schedule, epoch);
        std::iota(order.begin(), order.end(), 0);
        state.rng.shuffle(order);
        double loss_sum = 0.0;
        int batch_id = 0;
        for (std::size_t start = 0; start < n; start += batch, ++batch_id) {
            std::size_t end = std::min(start + batch, n);
            grads.clear();
            double inv = 1.0 / static_cast<double>(end - start);
            for (std::size_t k = start; k < end; ++k) {
                std::size_t i = order[k];
                auto logits = forward(state.model, train_data.features.row(i), &cache);
                softmax_into(logits, 1.0, probs);
                auto vw = evaluate_into(config.loss, probs, train_data.labels[i], grad_logits);
                loss_sum += vw.value;
                backward(state.model, cache, grad_logits, grads, inv);
            }
            sgd_step(state.model, grads, lr, config.momentum, config.weight_decay,
                     state.velocity);
            if (!state.model.all_finite())
                throw numeric_error("train: non-finite parameters at epoch " +
                                    std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_id));
        }
        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(n);
        auto preds = predict(state.model, eval_data);
        stats.test_ece = ece(preds, config.num_bins).first;
        double correct = 0.0;
        for (std::size_t i = 0; i < preds.size(); ++i)
            correct += argmax(preds.probs[i].probs) ==
                               static_cast<std::size_t>(preds.labels[i])
                           ? 1.0
                           : 0.0;
        stats.test_accuracy = correct / static_cast<double>(preds.size());
        history.epochs.push_back(stats);
        state.epochs_done = epoch + 1;

        if (std::find(config.grad_log_epochs.begin(), config.grad_log_epochs.end(), epoch + 1) !=
            config.grad_log_epochs.end()) {
            auto& records = history.grad_norms[epoch + 1];
            records.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                GradNormRecord rec;
                rec.sample_id = static_cast<int>(i);
                rec.last_layer_grad_norm = per_sample_last_layer_grad_norm(
                    state.model, train_data.features.row(i), train_data.labels[i], config.loss);
                auto pv = softmax(forward(state.model, train_data.features.row(i)));
                rec.brier = brier_score(pv, one_hot(train_data.labels[i],
                                                    state.model.num_classes));
                records.push_back(rec);
            }
        }
    }
}

TrainState fresh_train_state(const TrainConfig& config, const LabeledBatch& train_data,
                             const LabeledBatch& eval_data) {
    if (train_data.size() == 0) throw std::invalid_argument("train: empty training data");
    int num_classes = 0;
    for (int label : train_data.labels) num_classes = std::max(num_classes, label + 1);
    for (int label : eval_data.labels) num_classes = std::max(num_classes, label + 1);
    num_classes = std::max(num_classes, 2);

    TrainState state{MlpModel{}, ParamBlock{}, RngStream(config.seed), 0};
    state.model = make_mlp(static_cast<int>(train_data.features.cols), config.hidden_dims,
                           num_classes, state.rng);
    state.velocity = ParamBlock::zeros_like(state.model);
    return state;
}

std::pair<MlpModel, TrainHistory> train(const TrainConfig& config, const LabeledBatch& train_data,
                                        const LabeledBatch& eval_data) {
    TrainState state = fresh_train_state(config, train_data, eval_data);
    TrainHistory history;
    train_epochs(state, config, train_data, eval_data, config.epochs, history);
    return {std::move(state.model), std::move(history)};
}

double per_sample_last_layer_grad_norm(const MlpModel& model, std::span<const double> x, int label,
                                       const LossSpec& loss) {
    ForwardCache cache;
    auto logits = forward(model, x, &cache);
    std::vector<double> probs(logits.size());
    softmax_into(logits, 1.0, probs);
    std::vector<double> grad_logits(logits.size());
    evaluate_into(loss, probs, label, grad_logits);
    // dW_last = grad_logits (outer) input; its Frobenius norm is the product
    // of the two Euclidean norms.
    double g2 = 0.0;
    for (double g : grad_logits) g2 += g * g;
    double a2 = 0.0;
    for (double a : cache.inputs.back()) a2 += a * a;
    return std::sqrt(g2) * std::sqrt(a2);
}

}  // namespace calib
