#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "calib/errors.hpp"
#include "calib/trainer.hpp"

using namespace calib;

namespace {

LabeledBatch two_blob_data(RngStream& rng, int per_class, double gap = 6.0) {
    LabeledBatch batch;
    batch.features = Matrix(static_cast<std::size_t>(2 * per_class), 2);
    batch.labels.resize(static_cast<std::size_t>(2 * per_class));
    for (int i = 0; i < 2 * per_class; ++i) {
        int label = i < per_class ? 0 : 1;
        double cx = label == 0 ? -gap / 2 : gap / 2;
        batch.features(static_cast<std::size_t>(i), 0) = cx + rng.normal();
        batch.features(static_cast<std::size_t>(i), 1) = rng.normal();
        batch.labels[static_cast<std::size_t>(i)] = label;
    }
    return batch;
}

double loss_of(const MlpModel& model, const LabeledBatch& data, std::size_t i,
               const LossSpec& spec) {
    auto logits = forward(model, data.features.row(i));
    auto p = softmax(logits);
    return evaluate(spec, p, one_hot(data.labels[i], model.num_classes)).value;
}

}  // namespace

TEST_CASE("forward matches hand computation") {
    RngStream rng(1);
    auto model = make_mlp(2, std::vector<int>{}, 2, rng);
    // single linear layer: logits = W x + b
    model.layers[0].weights(0, 0) = 1.0;
    model.layers[0].weights(0, 1) = 2.0;
    model.layers[0].weights(1, 0) = -1.0;
    model.layers[0].weights(1, 1) = 0.5;
    model.layers[0].bias = {0.25, -0.5};
    auto logits = forward(model, std::vector<double>{3.0, -1.0});
    CHECK(logits[0] == doctest::Approx(3.0 - 2.0 + 0.25).epsilon(1e-15));
    CHECK(logits[1] == doctest::Approx(-3.0 - 0.5 - 0.5).epsilon(1e-15));

    auto again = forward(model, std::vector<double>{3.0, -1.0});
    CHECK(logits == again);

    CHECK_THROWS_AS(forward(model, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("zero-weight model emits the biases") {
    RngStream rng(2);
    auto model = make_mlp(3, std::vector<int>{4}, 2, rng);
    for (auto& layer : model.layers)
        std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
    model.layers.back().bias = {0.7, -0.2};
    auto logits = forward(model, std::vector<double>{1.0, 2.0, 3.0});
    CHECK(logits[0] == 0.7);
    CHECK(logits[1] == -0.2);
}

TEST_CASE("backward zero and linearity") {
    RngStream rng(3);
    auto model = make_mlp(3, std::vector<int>{5, 4}, 3, rng);
    ForwardCache cache;
    std::vector<double> x{0.3, -0.7, 1.1};
    forward(model, x, &cache);

    auto zeros = ParamBlock::zeros_like(model);
    backward(model, cache, std::vector<double>{0.0, 0.0, 0.0}, zeros);
    for (const auto& layer : zeros.layers) {
        for (double w : layer.weights.data) CHECK(w == 0.0);
        for (double b : layer.bias) CHECK(b == 0.0);
    }

    std::vector<double> g{0.2, -0.5, 0.3};
    std::vector<double> g2{0.4, -1.0, 0.6};
    auto a = ParamBlock::zeros_like(model);
    auto b = ParamBlock::zeros_like(model);
    backward(model, cache, g, a);
    backward(model, cache, g2, b);
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        for (std::size_t i = 0; i < a.layers[l].weights.data.size(); ++i)
            CHECK(b.layers[l].weights.data[i] ==
                  doctest::Approx(2.0 * a.layers[l].weights.data[i]).epsilon(1e-12));
}

TEST_CASE("backward rejects a cache from another model shape") {
    RngStream rng(12);
    auto model = make_mlp(2, std::vector<int>{4}, 2, rng);
    auto other = make_mlp(3, std::vector<int>{5}, 2, rng);
    ForwardCache cache;
    forward(other, std::vector<double>{1.0, 0.0, -1.0}, &cache);
    auto grads = ParamBlock::zeros_like(model);
    CHECK_THROWS_AS(backward(model, cache, std::vector<double>{0.1, -0.1}, grads),
                    std::invalid_argument);
}

TEST_CASE("backward matches finite differences through CE") {
    RngStream rng(4);
    auto model = make_mlp(3, std::vector<int>{6, 5}, 4, rng);
    LossSpec ce{LossKind::CE};
    std::vector<double> x{0.5, -1.2, 0.8};
    int label = 2;

    ForwardCache cache;
    auto logits = forward(model, x, &cache);
    std::vector<double> probs(logits.size());
    softmax_into(logits, 1.0, probs);
    std::vector<double> grad_logits(logits.size());
    evaluate_into(ce, probs, label, grad_logits);
    auto grads = ParamBlock::zeros_like(model);
    backward(model, cache, grad_logits, grads);

    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto check_param = [&](double& param, double analytic) {
            double keep = param;
            param = keep + h;
            auto lp = forward(model, x);
            std::vector<double> pp(lp.size());
            softmax_into(lp, 1.0, pp);
            std::vector<double> scratch(lp.size());
            double fp = evaluate_into(ce, pp, label, scratch).value;
            param = keep - h;
            auto lm = forward(model, x);
            softmax_into(lm, 1.0, pp);
            double fm = evaluate_into(ce, pp, label, scratch).value;
            param = keep;
            double numeric = (fp - fm) / (2.0 * h);
            worst = std::max(worst, std::abs(numeric - analytic) /
                                        std::max(1e-6, std::abs(analytic)));
        };
        for (std::size_t i = 0; i < model.layers[l].weights.data.size(); ++i)
            check_param(model.layers[l].weights.data[i], grads.layers[l].weights.data[i]);
        for (std::size_t i = 0; i < model.layers[l].bias.size(); ++i)
            check_param(model.layers[l].bias[i], grads.layers[l].bias[i]);
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("sgd_step reductions and hand recurrence") {
    RngStream rng(5);
    auto model = make_mlp(1, std::vector<int>{}, 2, rng);
    model.layers[0].weights(0, 0) = 1.0;
    model.layers[0].weights(1, 0) = 2.0;
    model.layers[0].bias = {0.0, 0.0};
    auto grads = ParamBlock::zeros_like(model);
    grads.layers[0].weights(0, 0) = 0.5;
    auto velocity = ParamBlock::zeros_like(model);

    // momentum 0, wd 0: plain step
    sgd_step(model, grads, 0.1, 0.0, 0.0, velocity);
    CHECK(model.layers[0].weights(0, 0) == doctest::Approx(1.0 - 0.05).epsilon(1e-15));

    // zero grad, wd 0, momentum 0.9 with nonzero velocity: geometric decay
    grads.layers[0].weights(0, 0) = 0.0;
    double v = velocity.layers[0].weights(0, 0);
    double w = model.layers[0].weights(0, 0);
    sgd_step(model, grads, 0.1, 0.9, 0.0, velocity);
    CHECK(velocity.layers[0].weights(0, 0) == doctest::Approx(0.9 * v).epsilon(1e-15));
    CHECK(model.layers[0].weights(0, 0) == doctest::Approx(w - 0.1 * 0.9 * v).epsilon(1e-15));

    // two steps against the closed recurrence on one parameter
    double theta = 1.0, vel = 0.0;
    const double lr = 0.05, mom = 0.9, wd = 0.01, g0 = 0.3, g1 = -0.2;
    auto m2 = make_mlp(1, std::vector<int>{}, 2, rng);
    m2.layers[0].weights(0, 0) = theta;
    m2.layers[0].weights(1, 0) = 0.0;
    auto vel2 = ParamBlock::zeros_like(m2);
    auto gr2 = ParamBlock::zeros_like(m2);
    for (double g : {g0, g1}) {
        gr2.layers[0].weights(0, 0) = g;
        sgd_step(m2, gr2, lr, mom, wd, vel2);
        vel = mom * vel + (g + wd * theta);
        theta -= lr * vel;
    }
    CHECK(m2.layers[0].weights(0, 0) == doctest::Approx(theta).epsilon(1e-15));
}

TEST_CASE("weight decay skips biases") {
    RngStream rng(6);
    auto model = make_mlp(1, std::vector<int>{}, 2, rng);
    model.layers[0].bias = {1.0, -1.0};
    auto grads = ParamBlock::zeros_like(model);
    auto velocity = ParamBlock::zeros_like(model);
    sgd_step(model, grads, 0.1, 0.0, 0.5, velocity);
    CHECK(model.layers[0].bias[0] == 1.0);
    CHECK(model.layers[0].bias[1] == -1.0);
}

TEST_CASE("lr schedule lookup") {
    std::vector<LrPhase> paper = {{150, 0.1}, {250, 0.01}, {1 << 30, 0.001}};
    CHECK(lr_at_epoch(paper, 0) == 0.1);
    CHECK(lr_at_epoch(paper, 149) == 0.1);
    CHECK(lr_at_epoch(paper, 150) == 0.01);
    CHECK(lr_at_epoch(paper, 349) == 0.001);
    std::vector<LrPhase> short_sched = {{10, 0.1}};
    CHECK(lr_at_epoch(short_sched, 99) == 0.1);  // final lr persists
    CHECK_THROWS_AS(lr_at_epoch(std::vector<LrPhase>{}, 0), std::invalid_argument);
}

TEST_CASE("training separable data reaches high accuracy") {
    RngStream rng(7);
    auto train_data = two_blob_data(rng, 300);
    auto test_data = two_blob_data(rng, 100);
    TrainConfig cfg;
    cfg.loss = {LossKind::CE};
    cfg.epochs = 5;
    cfg.hidden_dims = {16};
    cfg.seed = 42;
    auto [model, history] = train(cfg, train_data, test_data);
    CHECK(history.epochs.size() == 5);
    CHECK(history.epochs.back().test_accuracy > 0.99);
}

TEST_CASE("same seed twice gives identical history and model") {
    RngStream rng(8);
    auto train_data = two_blob_data(rng, 100, 3.0);
    auto test_data = two_blob_data(rng, 50, 3.0);
    TrainConfig cfg;
    cfg.loss = {LossKind::BSCE_GRA, 4.0, 2.0};
    cfg.epochs = 3;
    cfg.hidden_dims = {8};
    cfg.seed = 7;
    auto [m1, h1] = train(cfg, train_data, test_data);
    auto [m2, h2] = train(cfg, train_data, test_data);
    for (std::size_t l = 0; l < m1.layers.size(); ++l)
        CHECK(m1.layers[l].weights.data == m2.layers[l].weights.data);
    for (std::size_t e = 0; e < h1.epochs.size(); ++e) {
        CHECK(h1.epochs[e].train_loss == h2.epochs[e].train_loss);
        CHECK(h1.epochs[e].test_ece == h2.epochs[e].test_ece);
    }
}

TEST_CASE("bsce_gra with gamma 0 reproduces the CE trajectory bit for bit") {
    RngStream rng(9);
    auto train_data = two_blob_data(rng, 100, 3.0);
    auto test_data = two_blob_data(rng, 50, 3.0);
    TrainConfig ce_cfg;
    ce_cfg.loss = {LossKind::CE};
    ce_cfg.epochs = 3;
    ce_cfg.hidden_dims = {8};
    ce_cfg.seed = 11;
    auto gra_cfg = ce_cfg;
    gra_cfg.loss = {LossKind::BSCE_GRA, 0.0, 2.0};  // weight identically 1
    auto [m1, h1] = train(ce_cfg, train_data, test_data);
    auto [m2, h2] = train(gra_cfg, train_data, test_data);
    for (std::size_t l = 0; l < m1.layers.size(); ++l) {
        CHECK(m1.layers[l].weights.data == m2.layers[l].weights.data);
        CHECK(m1.layers[l].bias == m2.layers[l].bias);
    }
}

TEST_CASE("per-sample last layer grad norm") {
    RngStream rng(10);
    auto model = make_mlp(2, std::vector<int>{6}, 3, rng);
    std::vector<double> x{0.4, -1.0};

    // direct assembly oracle
    auto oracle = [&](const LossSpec& spec, int label) {
        ForwardCache cache;
        auto logits = forward(model, x, &cache);
        std::vector<double> probs(logits.size());
        softmax_into(logits, 1.0, probs);
        std::vector<double> g(logits.size());
        evaluate_into(spec, probs, label, g);
        const auto& a = cache.inputs.back();
        double sum = 0.0;
        for (double gi : g)
            for (double ai : a) sum += gi * ai * gi * ai;
        return std::sqrt(sum);
    };

    LossSpec ce{LossKind::CE};
    LossSpec gra{LossKind::BSCE_GRA, 4.0, 2.0};
    for (int label = 0; label < 3; ++label) {
        double fast = per_sample_last_layer_grad_norm(model, x, label, ce);
        CHECK(fast == doctest::Approx(oracle(ce, label)).epsilon(1e-12));

        double gnorm = per_sample_last_layer_grad_norm(model, x, label, gra);
        auto p = softmax(forward(model, x));
        double w = uncertainty_weight(gra, p.probs, label);
        CHECK(gnorm == doctest::Approx(w * fast).epsilon(1e-12));
    }

    // confident correct prediction sends the CE norm to zero
    auto sharp = make_mlp(2, std::vector<int>{}, 2, rng);
    sharp.layers[0].weights(0, 0) = 50.0;
    sharp.layers[0].weights(1, 0) = -50.0;
    CHECK(per_sample_last_layer_grad_norm(sharp, std::vector<double>{1.0, 0.0}, 0, ce) < 1e-12);
}

TEST_CASE("training aborts with a diagnostic on divergence") {
    RngStream rng(11);
    auto train_data = two_blob_data(rng, 60, 2.0);
    for (auto& v : train_data.features.data) v *= 100.0;  // large inputs
    TrainConfig cfg;
    cfg.loss = {LossKind::CE};
    cfg.epochs = 50;
    cfg.hidden_dims = {8};
    cfg.lr_schedule = {{1 << 30, 1e6}};  // absurd lr forces divergence
    cfg.seed = 1;
    CHECK_THROWS_AS(train(cfg, train_data, train_data), numeric_error);
}
