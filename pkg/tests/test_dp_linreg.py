"""Test least squares, DP-SGD and the private sample-size formula."""
import math

import numpy as np
import pytest

from ptx.data.dataset import LabeledDataset
from ptx.data.synth import (
    population_excess_risk,
    random_instance,
    sample_private,
)
from ptx.errors import Diverged, EmptyData, InvalidArgs, RankDeficient
from ptx.model.dp_linreg import (
    DpSgdConfig,
    clip_gradients,
    dpsgd_fit,
    ols_fit,
    required_private_samples,
)
from ptx.privacy.accountant import PrivacyBudget
from ptx.utils import derive_seed, make_rng


def dataset(x, y):
    return LabeledDataset(x, y, np.ones(len(y), dtype=np.int64))


def test_ols_noiseless_recovery():
    inst = random_instance(10, 3, 5, noise_std=0.0, rng=np.random.default_rng(0))
    data = sample_private(inst, 200, np.random.default_rng(1))
    assert np.linalg.norm(ols_fit(data).weights - inst.w_star) <= 1e-10


def test_ols_zero_labels():
    x = np.random.default_rng(2).standard_normal((50, 4))
    assert np.linalg.norm(ols_fit(dataset(x, np.zeros(50))).weights) <= 1e-14


def test_ols_matches_qr_and_normal_equations():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((10_000, 25))
    y = x @ rng.standard_normal(25) + rng.standard_normal(10_000)
    w = ols_fit(dataset(x, y)).weights
    q, r = np.linalg.qr(x)
    w_qr = np.linalg.solve(r, q.T @ y)
    assert np.max(np.abs(w - w_qr)) <= 1e-8
    assert np.max(np.abs(x.T @ (x @ w - y))) <= 1e-8 * np.linalg.norm(y)


def test_ols_rank_deficient():
    x = np.random.default_rng(4).standard_normal((20, 3))
    x[:, 2] = x[:, 1]
    with pytest.raises(RankDeficient):
        ols_fit(dataset(x, np.ones(20)))
    with pytest.raises(RankDeficient):
        ols_fit(dataset(np.ones((2, 3)), np.ones(2)))
    with pytest.raises(EmptyData):
        ols_fit(dataset(np.zeros((0, 3)), np.zeros(0)))


def test_clip_gradients():
    grads = np.array([[3.0, 4.0], [0.3, 0.4], [0.0, 0.0]])
    clipped = clip_gradients(grads, 1.0)
    np.testing.assert_allclose(clipped[0], [0.6, 0.8])
    np.testing.assert_allclose(clipped[1], [0.3, 0.4])
    np.testing.assert_allclose(clipped[2], [0.0, 0.0])


def test_noise_free_sgd_reaches_least_squares():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((1000, 5))
    y = x @ rng.standard_normal(5) + rng.standard_normal(1000)
    data = dataset(x, y)
    cfg = DpSgdConfig(clip_norm=1e6, learning_rate=0.5, epochs=200, batch_size=1000)
    fit = dpsgd_fit(data, cfg, rng=np.random.default_rng(6))
    ols = ols_fit(data)
    assert fit.privacy_spent is None
    assert abs(fit.trajectory_summary[-1] - ols.trajectory_summary[-1]) <= 1e-4
    assert len(fit.trajectory_summary) == 200


def test_zero_epochs_returns_init():
    data = dataset(np.ones((10, 3)), np.ones(10))
    fit = dpsgd_fit(data, DpSgdConfig(epochs=0, batch_size=5), rng=np.random.default_rng(7))
    assert np.all(fit.weights == 0.0)
    assert fit.steps_taken == 0
    assert fit.privacy_spent.epsilon == 0.0

    init = DpSgdConfig(epochs=0, batch_size=5, init=[1.0, 2.0, 3.0])
    assert dpsgd_fit(data, init).weights.tolist() == [1.0, 2.0, 3.0]


def test_clipped_gradients_respect_the_bound():
    rng = np.random.default_rng(8)
    x = 10 * rng.standard_normal((300, 6))
    y = 10 * rng.standard_normal(300)
    norms = []
    cfg = DpSgdConfig(clip_norm=0.5, epochs=3, batch_size=32, noise_multiplier=1.0)
    dpsgd_fit(dataset(x, y), cfg, rng=rng, grad_hook=lambda g: norms.extend(np.linalg.norm(g, axis=1)))
    assert len(norms) == 3 * (300 // 32) * 32
    assert max(norms) <= 0.5 + 1e-12


def test_target_budget_is_respected():
    inst = random_instance(5, 5, 1, rng=np.random.default_rng(9))
    data = sample_private(inst, 500, np.random.default_rng(10))
    target = PrivacyBudget(1.1, 1e-5)
    fit = dpsgd_fit(data, DpSgdConfig(), target=target, rng=np.random.default_rng(11))
    assert fit.privacy_spent.epsilon <= target.epsilon
    assert fit.privacy_spent.delta == target.delta
    assert fit.steps_taken == 50 * (500 // 32)
    assert fit.sampling_rate == pytest.approx(32 / 500)
    assert fit.noise_multiplier > 0


def test_fit_is_deterministic():
    inst = random_instance(5, 5, 1, rng=np.random.default_rng(12))
    data = sample_private(inst, 200, np.random.default_rng(13))
    cfg = DpSgdConfig(epochs=5)
    target = PrivacyBudget(1.0, 1e-5)
    a = dpsgd_fit(data, cfg, target=target, rng=np.random.default_rng(14))
    b = dpsgd_fit(data, cfg, target=target, rng=np.random.default_rng(14))
    assert np.array_equal(a.weights, b.weights)


def test_config_validation():
    with pytest.raises(InvalidArgs):
        DpSgdConfig(clip_norm=0.0)
    with pytest.raises(InvalidArgs):
        DpSgdConfig(batch_size=0)
    with pytest.raises(InvalidArgs):
        DpSgdConfig(lr_schedule="linear")
    with pytest.raises(InvalidArgs):
        dpsgd_fit(dataset(np.ones((10, 2)), np.ones(10)), DpSgdConfig(batch_size=11))


def test_divergence_is_reported():
    rng = np.random.default_rng(15)
    x = 100 * rng.standard_normal((64, 3))
    cfg = DpSgdConfig(clip_norm=1e300, learning_rate=10.0, epochs=200, batch_size=64)
    with pytest.raises(Diverged):
        dpsgd_fit(dataset(x, rng.standard_normal(64)), cfg, rng=rng)


def mean_dp_risk(d, n2, eps, seeds=50):
    risks = []
    for trial in range(seeds):
        inst = random_instance(d, d, 1, rng=make_rng(derive_seed(1, "instance", trial=trial)))
        data = sample_private(inst, n2, make_rng(derive_seed(1, "private", n2=n2, trial=trial)))
        fit = dpsgd_fit(
            data,
            DpSgdConfig(),
            target=PrivacyBudget(eps, 1e-5),
            rng=make_rng(derive_seed(1, "mechanism", n2=n2, eps=eps, trial=trial)),
        )
        risks.append(population_excess_risk(fit.weights, inst))
    return float(np.mean(risks))


def test_private_risk_shrinks_with_data_and_grows_with_dimension():
    small, large = mean_dp_risk(5, 1000, 1.0), mean_dp_risk(5, 4000, 1.0)
    # about 4x in the 1/n2 regime
    assert 2.5 <= small / large <= 6.0
    assert mean_dp_risk(25, 1000, 1.0, seeds=20) > small


def test_required_private_samples():
    assert required_private_samples(5, 0.1, math.inf) == 50
    assert required_private_samples(5, 0.25, 1.0) == 30
    assert required_private_samples(5, 0.01, 1.0) == 1000
    assert required_private_samples(4, 0.5, 2.0) == math.ceil(8 + 4 / (2 * math.sqrt(0.5)))
    with pytest.raises(InvalidArgs):
        required_private_samples(5, 0.0, 1.0)


def test_noise_scales_with_the_neighbouring_relation():
    data = dataset(np.zeros((10, 20_000)), np.zeros(10))
    weights = {}
    for relation in ("replace_one", "add_remove"):
        cfg = DpSgdConfig(
            clip_norm=0.5,
            learning_rate=1.0,
            epochs=1,
            batch_size=10,
            noise_multiplier=1.0,
            neighbouring=relation,
        )
        weights[relation] = dpsgd_fit(data, cfg, rng=np.random.default_rng(21)).weights
    # one step from zero on zero gradients: w = -lr * N(0, (s sigma C / batch)^2)
    assert weights["replace_one"].std() == pytest.approx(2 * 1.0 * 0.5 / 10, rel=0.05)
    np.testing.assert_allclose(weights["replace_one"], 2 * weights["add_remove"], rtol=1e-12)
    with pytest.raises(InvalidArgs):
        DpSgdConfig(neighbouring="swap")
