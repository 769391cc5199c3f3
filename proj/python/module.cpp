#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "calib/calibrate.hpp"
#include "calib/gaussbench.hpp"
#include "calib/losses.hpp"
#include "calib/metrics.hpp"
#include "calib/trainer.hpp"

namespace py = pybind11;
using namespace calib;

namespace {

LossSpec spec_from(const std::string& kind, double gamma, double beta, bool gra) {
    LossSpec spec;
    if (kind == "ce") spec.kind = LossKind::CE;
    else if (kind == "brier") spec.kind = LossKind::BrierLoss;
    else if (kind == "focal") spec.kind = LossKind::Focal;
    else if (kind == "flsd53") spec.kind = LossKind::FocalFLSD53;
    else if (kind == "dual_focal") spec.kind = LossKind::DualFocal;
    else if (kind == "bsce") spec.kind = LossKind::BSCE;
    else if (kind == "bsce_gra") spec.kind = LossKind::BSCE_GRA;
    else throw std::invalid_argument("unknown loss kind: " + kind);
    spec.gamma = gamma;
    spec.beta = beta;
    spec.gra = gra;
    return spec;
}

PredictionSet set_from(const std::vector<std::vector<double>>& probs,
                       const std::vector<int>& labels) {
    PredictionSet set;
    for (const auto& p : probs) set.probs.push_back(make_prob_vector(p));
    set.labels = labels;
    return set;
}

}  // namespace

PYBIND11_MODULE(pycalib, m) {
    m.doc() = "Uncertainty-weighted training losses and calibration metrics.";

    m.def("log_sum_exp",
          [](const std::vector<double>& v) { return log_sum_exp(v); });
    m.def(
        "softmax",
        [](const std::vector<double>& logits, double temperature) {
            return softmax(logits, temperature).probs;
        },
        py::arg("logits"), py::arg("temperature") = 1.0);
    m.def("one_hot", [](int index, int classes) { return one_hot(index, classes).onehot; });

    py::class_<LossEval>(m, "LossEval")
        .def_readonly("value", &LossEval::value)
        .def_readonly("grad_logits", &LossEval::grad_logits)
        .def_readonly("weight", &LossEval::weight);

    m.def(
        "evaluate_loss",
        [](const std::string& kind, const std::vector<double>& probs, int label, double gamma,
           double beta, bool gra) {
            auto spec = spec_from(kind, gamma, beta, gra);
            return evaluate(spec, make_prob_vector(probs),
                            one_hot(label, static_cast<int>(probs.size())));
        },
        py::arg("kind"), py::arg("probs"), py::arg("label"), py::arg("gamma") = 4.0,
        py::arg("beta") = 2.0, py::arg("gra") = false);
    m.def(
        "gbs_weight",
        [](const std::vector<double>& probs, int label, double gamma, double beta) {
            return gbs_weight(make_prob_vector(probs),
                              one_hot(label, static_cast<int>(probs.size())), gamma, beta);
        },
        py::arg("probs"), py::arg("label"), py::arg("gamma") = 4.0, py::arg("beta") = 2.0);
    m.def("focal_grad_factor", &focal_grad_factor, py::arg("p"), py::arg("gamma"));
    m.def("flsd_gamma", &flsd_gamma, py::arg("p_true"));

    m.def(
        "brier_score",
        [](const std::vector<double>& probs, int label) {
            return brier_score(make_prob_vector(probs),
                               one_hot(label, static_cast<int>(probs.size())));
        },
        py::arg("probs"), py::arg("label"));
    m.def(
        "ece",
        [](const std::vector<std::vector<double>>& probs, const std::vector<int>& labels,
           int num_bins) { return ece(set_from(probs, labels), num_bins).first; },
        py::arg("probs"), py::arg("labels"), py::arg("num_bins") = 15);
    m.def(
        "ada_ece",
        [](const std::vector<std::vector<double>>& probs, const std::vector<int>& labels,
           int num_bins) { return ada_ece(set_from(probs, labels), num_bins).first; },
        py::arg("probs"), py::arg("labels"), py::arg("num_bins") = 15);
    m.def(
        "classwise_ece",
        [](const std::vector<std::vector<double>>& probs, const std::vector<int>& labels,
           int num_bins) { return classwise_ece(set_from(probs, labels), num_bins); },
        py::arg("probs"), py::arg("labels"), py::arg("num_bins") = 15);
    m.def(
        "pearson",
        [](const std::vector<double>& xs, const std::vector<double>& ys) {
            return pearson(xs, ys);
        },
        py::arg("xs"), py::arg("ys"));

    py::class_<TemperatureFit>(m, "TemperatureFit")
        .def_readonly("temperature", &TemperatureFit::temperature)
        .def_readonly("val_ece_pre", &TemperatureFit::val_ece_pre)
        .def_readonly("val_ece_post", &TemperatureFit::val_ece_post);
    m.def(
        "fit_temperature",
        [](const std::vector<std::vector<double>>& logits, const std::vector<int>& labels,
           int num_bins) {
            if (logits.empty()) throw std::invalid_argument("empty logits");
            Matrix m_logits(logits.size(), logits[0].size());
            for (std::size_t i = 0; i < logits.size(); ++i)
                std::copy(logits[i].begin(), logits[i].end(), m_logits.row(i).begin());
            return fit_temperature(m_logits, labels, num_bins);
        },
        py::arg("logits"), py::arg("labels"), py::arg("num_bins") = 15);
    m.def(
        "apply_temperature",
        [](const std::vector<double>& logits, double t) {
            return apply_temperature(logits, t).probs;
        },
        py::arg("logits"), py::arg("t"));

    m.def(
        "true_posterior",
        [](const std::vector<double>& x, const std::vector<std::vector<double>>& means) {
            GaussianMixtureSpec spec;
            spec.num_classes = static_cast<int>(means.size());
            for (const auto& mu : means) {
                if (mu.size() != 2) throw std::invalid_argument("means must be 2-D");
                spec.means.push_back({mu[0], mu[1]});
            }
            return true_posterior(x, spec).probs;
        },
        py::arg("x"), py::arg("means"));
    m.def(
        "mc_bias_check",
        [](const std::vector<double>& eta, const std::vector<double>& pred, int draws,
           std::uint64_t seed) {
            RngStream rng(seed);
            auto res = mc_bias_check(make_prob_vector(eta), make_prob_vector(pred), draws, rng);
            return py::make_tuple(res.estimate, res.expected, res.stderr_);
        },
        py::arg("eta"), py::arg("pred"), py::arg("draws") = 100000, py::arg("seed") = 42);
    m.def(
        "simplex_fixed_point",
        [](const std::vector<double>& eta, const std::string& kind, double gamma, double beta,
           double lr, int steps) {
            auto spec = spec_from(kind, gamma, beta, false);
            return simplex_fixed_point(make_prob_vector(eta), spec, lr, steps).probs;
        },
        py::arg("eta"), py::arg("kind") = "bsce_gra", py::arg("gamma") = 4.0,
        py::arg("beta") = 2.0, py::arg("lr") = 0.5, py::arg("steps") = 5000);

    m.def(
        "train_toy",
        [](int classes, int train_per_class, int test_per_class, const std::string& loss,
           double gamma, double beta, int epochs, double lr, std::uint64_t seed,
           const std::vector<int>& hidden) {
            RngStream rng(seed);
            auto spec = random_mixture_spec(classes, rng);
            auto toy = make_toy_dataset(spec, train_per_class, test_per_class, rng);
            TrainConfig cfg;
            cfg.loss = spec_from(loss, gamma, beta, false);
            cfg.epochs = epochs;
            cfg.lr_schedule = {{1 << 30, lr}};
            cfg.hidden_dims = hidden;
            cfg.seed = seed;
            auto [model, history] = train(cfg, toy.train, toy.test);
            auto preds = predict(model, toy.test);
            auto rep = evaluate_predictions(preds, cfg.num_bins);
            return py::dict(py::arg("test_ece") = rep.ece,
                            py::arg("test_ada_ece") = rep.ada_ece,
                            py::arg("test_accuracy") = rep.accuracy,
                            py::arg("final_train_loss") = history.epochs.back().train_loss);
        },
        py::arg("classes") = 5, py::arg("train_per_class") = 200,
        py::arg("test_per_class") = 100, py::arg("loss") = "ce", py::arg("gamma") = 4.0,
        py::arg("beta") = 2.0, py::arg("epochs") = 3, py::arg("lr") = 0.01,
        py::arg("seed") = 42, py::arg("hidden") = std::vector<int>{16, 16});
}
