#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "calib/calibrate.hpp"

using namespace calib;

namespace {

// Logits whose softmax confidences are exactly calibrated at T = 1: blocks of
// samples at confidence c with a fraction c of them correct.
struct Synthetic {
    Matrix logits;
    std::vector<int> labels;
};

Synthetic calibrated_set(double scale = 1.0) {
    Synthetic out;
    std::vector<std::pair<double, int>> blocks = {{0.6, 10}, {0.7, 10}, {0.8, 10}, {0.9, 10}};
    std::size_t n = 0;
    for (auto& [c, m] : blocks) n += static_cast<std::size_t>(m);
    out.logits = Matrix(n, 2);
    out.labels.resize(n);
    std::size_t row = 0;
    for (auto& [c, m] : blocks) {
        int correct = static_cast<int>(std::lround(c * m));
        for (int i = 0; i < m; ++i, ++row) {
            // logit gap g gives confidence 1/(1+exp(-g))
            double gap = std::log(c / (1.0 - c)) * scale;
            out.logits(row, 0) = gap;
            out.logits(row, 1) = 0.0;
            out.labels[row] = i < correct ? 0 : 1;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("apply_temperature matches softmax and preserves argmax") {
    std::vector<double> logits{2.0, 1.0, -1.0};
    auto p1 = apply_temperature(logits, 1.0);
    auto ps = softmax(logits, 1.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(p1[i] == ps[i]);

    auto wide = apply_temperature(logits, 1e6);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(wide[i] - 1.0 / 3.0) < 1e-5);

    CHECK_THROWS_AS(apply_temperature(logits, 0.0), std::invalid_argument);

    RngStream rng(3);
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> v(4);
        for (auto& x : v) x = 10.0 * (rng.uniform() - 0.5);
        double temp = 0.1 + 9.9 * rng.uniform();
        auto p = apply_temperature(v, temp);
        CHECK(argmax(p.probs) == argmax(v));
    }
}

TEST_CASE("fit_temperature recovers T = 1 on a calibrated set") {
    auto data = calibrated_set(1.0);
    auto fit = fit_temperature(data.logits, data.labels, 15);
    CHECK(fit.temperature == doctest::Approx(1.0));
    CHECK(fit.val_ece_post <= fit.val_ece_pre);
}

TEST_CASE("fit_temperature tracks a known logit scaling") {
    // scaling calibrated logits by 2 means T = 2 undoes it exactly
    auto data = calibrated_set(2.0);
    auto fit = fit_temperature(data.logits, data.labels, 15);
    CHECK(std::abs(fit.temperature - 2.0) <= 0.1 + 1e-12);
    CHECK(fit.val_ece_post <= fit.val_ece_pre);
}

TEST_CASE("fit_temperature contract holds on a degenerate single sample") {
    Matrix logits(1, 2);
    logits(0, 0) = 1.3;
    logits(0, 1) = -0.4;
    std::vector<int> labels{0};
    auto fit = fit_temperature(logits, labels, 15);
    CHECK(fit.temperature >= 0.1);
    CHECK(fit.temperature <= 10.0);
    CHECK(fit.val_ece_post <= fit.val_ece_pre);
}

TEST_CASE("fit_temperature rejects empty input") {
    Matrix empty(0, 2);
    std::vector<int> labels;
    CHECK_THROWS_AS(fit_temperature(empty, labels, 15), std::invalid_argument);
}

TEST_CASE("accuracy is invariant across the temperature grid") {
    RngStream rng(7);
    Matrix logits(50, 3);
    std::vector<int> labels(50);
    for (std::size_t i = 0; i < 50; ++i) {
        for (std::size_t j = 0; j < 3; ++j) logits(i, j) = 6.0 * (rng.uniform() - 0.5);
        labels[i] = static_cast<int>(rng.below(3));
    }
    auto acc_at = [&](double t) {
        auto set = scale_predictions(logits, labels, t);
        double correct = 0.0;
        for (std::size_t i = 0; i < set.size(); ++i)
            correct += argmax(set.probs[i].probs) == static_cast<std::size_t>(set.labels[i]);
        return correct / 50.0;
    };
    double base = acc_at(1.0);
    for (int i = 1; i <= 100; ++i) CHECK(acc_at(i / 10.0) == base);
}

TEST_CASE("fit_temperature is deterministic") {
    auto data = calibrated_set(1.7);
    auto f1 = fit_temperature(data.logits, data.labels, 15);
    auto f2 = fit_temperature(data.logits, data.labels, 15);
    CHECK(f1.temperature == f2.temperature);
    CHECK(f1.val_ece_post == f2.val_ece_post);
}
