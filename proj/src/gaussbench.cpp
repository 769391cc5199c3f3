#include "calib/gaussbench.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "calib/metrics.hpp"

namespace calib {

namespace {

struct Cholesky2x2 {
    double l11, l21, l22;
};

Cholesky2x2 cholesky(const std::array<std::array<double, 2>, 2>& cov) {
    double a = cov[0][0], b = cov[0][1], c = cov[1][0], d = cov[1][1];
    if (std::abs(b - c) > 1e-12)
        throw std::invalid_argument("covariance must be symmetric");
    if (a <= 0.0) throw std::invalid_argument("covariance must be positive definite");
    double l11 = std::sqrt(a);
    double l21 = b / l11;
    double rest = d - l21 * l21;
    if (rest <= 0.0) throw std::invalid_argument("covariance must be positive definite");
    return {l11, l21, std::sqrt(rest)};
}

void check_spec(const GaussianMixtureSpec& spec) {
    if (spec.num_classes < 2) throw std::invalid_argument("mixture: need at least two classes");
    if (spec.means.size() != static_cast<std::size_t>(spec.num_classes))
        throw std::invalid_argument("mixture: means length must equal num_classes");
    if (!spec.priors.empty()) {
        if (spec.priors.size() != static_cast<std::size_t>(spec.num_classes))
            throw std::invalid_argument("mixture: priors length must equal num_classes");
        for (double p : spec.priors)
            if (!(p > 0.0)) throw std::invalid_argument("mixture: priors must be positive");
    }
}

}  // namespace

GaussianMixtureSpec random_mixture_spec(int num_classes, RngStream& rng) {
    if (num_classes < 2) throw std::invalid_argument("random_mixture_spec: need K >= 2");
    GaussianMixtureSpec spec;
    spec.num_classes = num_classes;
    spec.means.resize(static_cast<std::size_t>(num_classes));
    for (auto& m : spec.means) {
        m[0] = -10.0 + 20.0 * rng.uniform();
        m[1] = -10.0 + 20.0 * rng.uniform();
    }
    return spec;
}

LabeledBatch sample_mixture(const GaussianMixtureSpec& spec, int per_class, RngStream& rng) {
    check_spec(spec);
    if (per_class < 1) throw std::invalid_argument("sample_mixture: per_class must be >= 1");
    auto chol = cholesky(spec.covariance);
    std::size_t n = static_cast<std::size_t>(spec.num_classes) *
                    static_cast<std::size_t>(per_class);
    LabeledBatch batch;
    batch.features = Matrix(n, 2);
    batch.labels.resize(n);
    std::size_t row = 0;
    for (int k = 0; k < spec.num_classes; ++k) {
        const auto& mu = spec.means[static_cast<std::size_t>(k)];
        for (int i = 0; i < per_class; ++i, ++row) {
            double z1 = rng.normal();
            double z2 = rng.normal();
            batch.features(row, 0) = mu[0] + chol.l11 * z1;
            batch.features(row, 1) = mu[1] + chol.l21 * z1 + chol.l22 * z2;
            batch.labels[row] = k;
        }
    }
    return batch;
}

ProbVector true_posterior(std::span<const double> x, const GaussianMixtureSpec& spec) {
    check_spec(spec);
    if (x.size() != 2) throw std::invalid_argument("true_posterior: x must be 2-D");
    const auto& cov = spec.covariance;
    double det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    if (det <= 0.0 || cov[0][0] <= 0.0)
        throw std::invalid_argument("true_posterior: covariance must be positive definite");
    double ia = cov[1][1] / det, ib = -cov[0][1] / det, id = cov[0][0] / det;

    // Shared covariance and normalizer cancel; only log prior - quadratic/2
    // survives the ratio.
    std::vector<double> logw(static_cast<std::size_t>(spec.num_classes));
    for (int k = 0; k < spec.num_classes; ++k) {
        auto ks = static_cast<std::size_t>(k);
        double dx = x[0] - spec.means[ks][0];
        double dy = x[1] - spec.means[ks][1];
        double quad = ia * dx * dx + 2.0 * ib * dx * dy + id * dy * dy;
        double lp = spec.priors.empty() ? 0.0 : std::log(spec.priors[ks]);
        logw[ks] = lp - 0.5 * quad;
    }
    return softmax(logw, 1.0);
}

double true_calibration_error(const ProbVector& pred, const ProbVector& eta) {
    if (pred.size() != eta.size())
        throw std::invalid_argument("true_calibration_error: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = eta[i] - pred[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double true_calibration_error_confidence_gap(const ProbVector& pred, const ProbVector& eta) {
    if (pred.size() != eta.size())
        throw std::invalid_argument("true_calibration_error: length mismatch");
    std::size_t k = argmax(pred.probs);
    return std::abs(eta[k] - pred[k]);
}

ToyDataset make_toy_dataset(const GaussianMixtureSpec& spec, int train_per_class,
                            int test_per_class, RngStream& rng) {
    ToyDataset data;
    data.spec = spec;
    data.train = sample_mixture(spec, train_per_class, rng);
    data.test = sample_mixture(spec, test_per_class, rng);
    return data;
}

namespace {

struct GridChoice {
    double r = -2.0;
    double gamma = 1.0;
    double beta = 2.0;
};

GridChoice best_grid_correlation(const LossSpec& metric, const PredictionSet& preds,
                                 std::span<const double> cerr) {
    bool has_beta =
        metric.kind == LossKind::BSCE || metric.kind == LossKind::BSCE_GRA;
    GridChoice best;
    std::vector<double> weights(preds.size());
    for (int g = 1; g <= 8; ++g) {
        for (int b = 1; b <= (has_beta ? 2 : 1); ++b) {
            LossSpec trial = metric;
            trial.gamma = static_cast<double>(g);
            if (has_beta) trial.beta = static_cast<double>(b);
            for (std::size_t i = 0; i < preds.size(); ++i)
                weights[i] = uncertainty_weight(trial, preds.probs[i].probs, preds.labels[i]);
            double r = pearson(weights, cerr);
            if (r > best.r) best = {r, trial.gamma, trial.beta};
        }
    }
    return best;
}

}  // namespace

CorrelationReport correlation_experiment(const MlpModel& model, const ToyDataset& data,
                                         std::span<const LossSpec> metrics, int runs,
                                         std::uint64_t seed, ErrorReading reading,
                                         const TrainConfig* retrain_cfg) {
    if (runs < 1) throw std::invalid_argument("correlation_experiment: runs must be >= 1");
    if (metrics.empty()) throw std::invalid_argument("correlation_experiment: no metrics given");
    if (!model.all_finite())
        throw std::invalid_argument("correlation_experiment: model has non-finite parameters");
    check_spec(data.spec);

    CorrelationReport report;
    report.num_runs = runs;
    for (const auto& m : metrics) report.metric_names.push_back(loss_kind_name(m.kind));
    report.mean_pearson.assign(metrics.size(), 0.0);

    // eta(x) over the shared test set, reused by every run
    std::vector<ProbVector> etas(data.test.size());
    for (std::size_t i = 0; i < data.test.size(); ++i)
        etas[i] = true_posterior(data.test.features.row(i), data.spec);

    for (int run = 0; run < runs; ++run) {
        PredictionSet preds;
        if (run == 0) {
            preds = predict(model, data.test);
        } else {
            // same dataset, fresh training run from a child seed
            TrainConfig cfg;
            if (retrain_cfg) {
                cfg = *retrain_cfg;
            } else {
                cfg.loss = {LossKind::CE};
                cfg.epochs = 5;
                cfg.lr_schedule = {{1 << 30, 0.01}};
                cfg.hidden_dims = model.hidden_dims;
            }
            cfg.grad_log_epochs.clear();
            cfg.seed = RngStream(seed).split(static_cast<std::uint64_t>(run)).seed();
            auto [run_model, hist] = train(cfg, data.train, data.test);
            preds = predict(run_model, data.test);
        }
        std::vector<double> cerr(preds.size());
        for (std::size_t i = 0; i < preds.size(); ++i)
            cerr[i] = reading == ErrorReading::VectorL2
                          ? true_calibration_error(preds.probs[i], etas[i])
                          : true_calibration_error_confidence_gap(preds.probs[i], etas[i]);
        CorrelationRun result;
        for (std::size_t m = 0; m < metrics.size(); ++m) {
            auto choice = best_grid_correlation(metrics[m], preds, cerr);
            result.pearson.push_back(choice.r);
            result.gamma.push_back(choice.gamma);
            result.beta.push_back(choice.beta);
            report.mean_pearson[m] += choice.r / static_cast<double>(runs);
        }
        report.runs.push_back(std::move(result));
    }
    return report;
}

std::vector<double> expected_grad_at(const ProbVector& q, const ProbVector& eta,
                                     const LossSpec& raw) {
    if (q.size() != eta.size()) throw std::invalid_argument("expected_grad_at: length mismatch");
    LossSpec spec = raw.canonical();
    std::vector<double> grad(q.size());
    if (spec.kind == LossKind::CE) {
        for (std::size_t i = 0; i < q.size(); ++i) grad[i] = q[i] - eta[i];
        return grad;
    }
    if (!(spec.kind == LossKind::BSCE && spec.gra))
        throw std::invalid_argument("expected_grad_at: loss must be CE or BSCE_GRA");
    // Appendix Lagrangian: the detached gBS weight is taken against the
    // expected label eta, scaling the expected CE gradient q - eta.
    double s = 0.0;
    if (spec.beta == 2.0) {
        for (std::size_t i = 0; i < q.size(); ++i) {
            double d = q[i] - eta[i];
            s += d * d;
        }
    } else {
        for (std::size_t i = 0; i < q.size(); ++i)
            s += std::pow(std::abs(q[i] - eta[i]), spec.beta);
    }
    double u = spec.gamma == 0.0 ? 1.0 : (s == 0.0 ? 0.0 : std::pow(s, spec.gamma / spec.beta));
    for (std::size_t i = 0; i < q.size(); ++i) grad[i] = u * (q[i] - eta[i]);
    return grad;
}

ProbVector simplex_fixed_point(const ProbVector& eta, const LossSpec& raw, double lr, int steps) {
    LossSpec spec = raw.canonical();
    if (eta.size() < 2) throw std::invalid_argument("simplex_fixed_point: need K >= 2");
    for (double e : eta.probs)
        if (!(e > 0.0))
            throw std::invalid_argument("simplex_fixed_point: eta must be strictly interior");
    if (!(spec.kind == LossKind::CE || (spec.kind == LossKind::BSCE && spec.gra)))
        throw std::invalid_argument("simplex_fixed_point: loss must be CE or BSCE_GRA");
    if (lr <= 0.0 || steps < 1)
        throw std::invalid_argument("simplex_fixed_point: need lr > 0 and steps >= 1");

    // Merit for the backtracking line search: the detached-weight expected
    // loss u(q, eta) * H(eta, q). Zero exactly at q = eta, positive elsewhere.
    auto merit = [&](const ProbVector& q) {
        double h = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i)
            h -= eta[i] * std::log(q[i] > 1e-300 ? q[i] : 1e-300);
        if (spec.kind == LossKind::CE) return h;
        double s = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            double d = q[i] - eta[i];
            s += spec.beta == 2.0 ? d * d : std::pow(std::abs(d), spec.beta);
        }
        double u = spec.gamma == 0.0 ? 1.0
                                     : (s == 0.0 ? 0.0 : std::pow(s, spec.gamma / spec.beta));
        return u * h;
    };

    std::vector<double> z(eta.size(), 0.0);
    ProbVector q = softmax(z, 1.0);
    double f = merit(q);
    double alpha = lr;
    std::vector<double> z_try(z.size());

    for (int step = 0; step < steps; ++step) {
        auto grad = expected_grad_at(q, eta, spec);
        double gmax = 0.0;
        for (double g : grad) gmax = std::max(gmax, std::abs(g));
        double dmax = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i)
            dmax = std::max(dmax, std::abs(q[i] - eta[i]));
        if (dmax < 1e-7 || gmax == 0.0) break;

        bool accepted = false;
        while (alpha > 1e-280) {
            for (std::size_t i = 0; i < z.size(); ++i) z_try[i] = z[i] - alpha * grad[i];
            ProbVector q_try = softmax(z_try, 1.0);
            double f_try = merit(q_try);
            if (f_try < f) {
                z = z_try;
                q = std::move(q_try);
                f = f_try;
                alpha *= 2.0;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
    }
    return q;
}

McBiasResult mc_bias_check(const ProbVector& eta, const ProbVector& pred, int draws,
                           RngStream& rng) {
    if (eta.size() != pred.size()) throw std::invalid_argument("mc_bias_check: length mismatch");
    if (draws < 1000) throw std::invalid_argument("mc_bias_check: draws must be >= 1000");

    double base = 0.0;  // ||p - eta||^2
    for (std::size_t i = 0; i < eta.size(); ++i) {
        double d = pred[i] - eta[i];
        base += d * d;
    }
    McBiasResult out;
    for (std::size_t k = 0; k < eta.size(); ++k) out.expected += eta[k] * (eta[k] - 1.0);

    double sum = 0.0, sumsq = 0.0;
    for (int t = 0; t < draws; ++t) {
        double u = rng.uniform();
        std::size_t y = eta.size() - 1;
        double acc = 0.0;
        for (std::size_t k = 0; k < eta.size(); ++k) {
            acc += eta[k];
            if (u < acc) {
                y = k;
                break;
            }
        }
        double b = 0.0;  // ||p - onehot(y)||^2
        for (std::size_t i = 0; i < eta.size(); ++i) {
            double d = pred[i] - (i == y ? 1.0 : 0.0);
            b += d * d;
        }
        double x = base - b;
        sum += x;
        sumsq += x * x;
    }
    double n = static_cast<double>(draws);
    out.estimate = sum / n;
    double var = (sumsq - sum * sum / n) / (n - 1.0);
    out.stderr_ = std::sqrt(var > 0.0 ? var / n : 0.0);
    return out;
}

}  // namespace calib
