import math

import pytest

import pycalib


def test_log_sum_exp_and_softmax():
    assert pycalib.log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2.0), abs=1e-12)
    assert pycalib.log_sum_exp([1000.0, 1000.0]) == pytest.approx(1000.0 + math.log(2.0))
    p = pycalib.softmax([math.log(2.0), 0.0])
    assert p == pytest.approx([2.0 / 3.0, 1.0 / 3.0], abs=1e-12)
    assert sum(pycalib.softmax([5.0, 1.0, 0.0], 1000.0)) == pytest.approx(1.0)


def test_losses():
    ce = pycalib.evaluate_loss("ce", [0.5, 0.5], 0)
    assert ce.value == pytest.approx(math.log(2.0))
    assert ce.grad_logits == pytest.approx([-0.5, 0.5])
    assert ce.weight == 1.0

    gra = pycalib.evaluate_loss("bsce_gra", [0.6, 0.3, 0.1], 0, gamma=4.0, beta=2.0)
    w = pycalib.gbs_weight([0.6, 0.3, 0.1], 0, gamma=4.0, beta=2.0)
    ce3 = pycalib.evaluate_loss("ce", [0.6, 0.3, 0.1], 0)
    assert gra.weight == w
    for g, gce in zip(gra.grad_logits, ce3.grad_logits):
        assert g == w * gce

    assert pycalib.flsd_gamma(0.1) == 5.0
    assert pycalib.flsd_gamma(0.2) == 3.0
    assert pycalib.focal_grad_factor(1.0, 2.0) == 0.0


def test_metrics():
    assert pycalib.brier_score([0.5, 0.5], 0) == pytest.approx(0.5)
    e = pycalib.ece([[0.9, 0.1]], [0], 15)
    assert e == pytest.approx(0.1)
    assert pycalib.classwise_ece([[0.7, 0.3]], [0], 1) == pytest.approx(0.3)
    r = pycalib.pearson([1.0, 2.0, 3.0], [5.0, 7.0, 9.0])
    assert r == pytest.approx(1.0)


def test_temperature():
    logits = [[2.0, 0.0], [1.5, 0.0], [-1.0, 0.0], [0.5, 0.0]]
    labels = [0, 0, 1, 1]
    fit = pycalib.fit_temperature(logits, labels, 5)
    assert 0.1 <= fit.temperature <= 10.0
    assert fit.val_ece_post <= fit.val_ece_pre
    p = pycalib.apply_temperature([4.0, 0.0], 2.0)
    q = pycalib.softmax([2.0, 0.0])
    assert p == pytest.approx(q, abs=1e-15)


def test_gaussbench():
    eta = pycalib.true_posterior([0.0, 0.0], [[-1.0, 0.0], [1.0, 0.0]])
    assert eta == pytest.approx([0.5, 0.5], abs=1e-9)

    est, expected, stderr = pycalib.mc_bias_check([0.5, 0.5], [0.7, 0.3], draws=200000, seed=3)
    assert expected == pytest.approx(-0.5)
    assert abs(est - expected) < 4 * stderr

    q = pycalib.simplex_fixed_point([0.7, 0.2, 0.1], "bsce_gra", gamma=4.0, beta=2.0)
    assert q == pytest.approx([0.7, 0.2, 0.1], abs=1e-4)


def test_train_toy_runs():
    out = pycalib.train_toy(classes=3, train_per_class=60, test_per_class=30, epochs=2, seed=7)
    assert 0.0 <= out["test_ece"] <= 1.0
    assert 0.0 <= out["test_accuracy"] <= 1.0
