import math

import numpy as np
import pytest

from mscs import likelihood as lik
from mscs.errors import (
    FitDiverged,
    InvalidData,
    ModelSpaceMismatch,
    RankDeficientDesign,
    SingularBlock,
    StateSpaceTooLarge,
)
from mscs.likelihood import (
    Dataset,
    Family,
    fit,
    free_parameter_count,
    ising_free_mask,
    ising_state_probabilities,
    loglik_at,
    loglik_grad,
)
from mscs.model_space import ModelIndex, ModelSpace
from mscs.simulate import gen_ising

import oracles

LOG_2PI = math.log(2 * math.pi)


def _glm_data(rng, family, n=50, p=3, theta=(0.4, -0.3, 0.0)):
    x = rng.normal(size=(n, p))
    eta = -(x @ np.asarray(theta))
    if family == "poisson":
        y = rng.poisson(np.exp(eta))
    else:
        y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    return Dataset(family, y, x)


def _ising_theta(rng, p, scale=0.6):
    theta = np.triu(rng.normal(scale=scale, size=(p, p)))
    return theta


# -- worked examples --------------------------------------------------------


def test_normal_location_single_zero_observation():
    data = Dataset("normal-location", np.zeros((1, 2)))
    res = fit(data, ModelIndex.subset([1, 2]))
    np.testing.assert_array_equal(res.theta_hat, [0.0, 0.0])
    assert res.loglik == pytest.approx(-LOG_2PI)
    assert loglik_at(data, np.zeros(2)) == pytest.approx(-LOG_2PI)


def test_logistic_balanced_bernoulli():
    data = Dataset("logistic", [1.0, 0.0], [[1.0], [1.0]])
    res = fit(data, ModelIndex.subset([1]))
    prob = 1 / (1 + math.exp(data.x[0] @ res.theta_hat))
    assert prob == pytest.approx(0.5, abs=1e-10)
    assert res.loglik == pytest.approx(2 * math.log(0.5), abs=1e-10)
    assert res.loglik == pytest.approx(-1.38629, abs=1e-5)


def test_logistic_loglik_at_zero(rng):
    data = Dataset("logistic", [1, 0, 1, 1], rng.normal(size=(4, 2)))
    assert loglik_at(data, np.zeros(2)) == pytest.approx(4 * math.log(0.5))


def test_ising_uniform_at_zero():
    y = np.array([[0, 1], [1, 1], [0, 0], [1, 0], [1, 1]])
    data = Dataset("ising", y)
    assert loglik_at(data, np.zeros((2, 2))) == pytest.approx(-5 * math.log(4))
    _, probs = ising_state_probabilities(np.zeros((2, 2)))
    np.testing.assert_allclose(probs, 0.25, atol=1e-15)


@pytest.mark.parametrize("family", ["poisson", "logistic"])
def test_glm_fit_matches_derivative_free_oracle(rng, family):
    data = _glm_data(rng, family)
    for cols in ([0, 1], [0, 1, 2], [2]):
        model = ModelIndex.subset([c + 1 for c in cols])
        res = fit(data, model)
        v, ll = oracles.restricted_max(family, data.x, data.y, cols)
        assert res.loglik == pytest.approx(ll, abs=1e-6)
        np.testing.assert_allclose(res.theta_hat[cols], v, atol=1e-4)
        # independent term-by-term evaluation of the same objective
        assert res.loglik == pytest.approx(
            oracles.glm_loglik(family, data.x, data.y, res.theta_hat), abs=1e-9
        )


def test_block_cov_full_model_closed_form(rng):
    y = rng.normal(size=(40, 4)) @ np.array(
        [[1, 0.3, 0, 0], [0, 1, 0.2, 0], [0, 0, 1, 0.5], [0, 0, 0, 1.0]]
    )
    data = Dataset("normal-block-cov", y)
    res = fit(data, ModelIndex.partition([0, 0, 0, 0]))
    s = y.T @ y / 40
    expected = -(40 / 2) * (np.linalg.slogdet(s)[1] + 4 * LOG_2PI + 4)
    assert res.loglik == pytest.approx(expected, abs=1e-8)
    assert res.loglik == pytest.approx(loglik_at(data, res.theta_hat), abs=1e-8)
    assert res.p_gamma == 10


def test_block_cov_block_diagonal_fit(rng):
    data = Dataset("normal-block-cov", rng.normal(size=(30, 3)))
    model = ModelIndex.partition([0, 1, 0])
    res = fit(data, model)
    assert res.theta_hat[0, 1] == 0 and res.theta_hat[1, 2] == 0
    assert res.theta_hat[0, 2] != 0
    assert res.p_gamma == 3 + 1
    assert res.loglik == pytest.approx(loglik_at(data, res.theta_hat), abs=1e-9)


def test_ising_independence_model_is_logit_of_means(rng):
    data = gen_ising(_ising_theta(rng, 4), 400, rng)
    res = fit(data, ModelIndex.partition([0, 1, 2, 3]))
    means = data.y.mean(axis=0)
    np.testing.assert_allclose(np.diag(res.theta_hat), np.log(means / (1 - means)), atol=1e-8)
    assert res.p_gamma == 4


def test_ising_saturated_pair_is_log_linear(rng):
    theta = np.array([[0.3, 0.8], [0.0, -0.4]])
    data = gen_ising(theta, 500, rng)
    y = data.y
    n00 = np.sum((y[:, 0] == 0) & (y[:, 1] == 0))
    n10 = np.sum((y[:, 0] == 1) & (y[:, 1] == 0))
    n01 = np.sum((y[:, 0] == 0) & (y[:, 1] == 1))
    n11 = np.sum((y[:, 0] == 1) & (y[:, 1] == 1))
    res = fit(data, ModelIndex.partition([0, 0]))
    assert res.theta_hat[0, 0] == pytest.approx(math.log(n10 / n00), abs=1e-8)
    assert res.theta_hat[1, 1] == pytest.approx(math.log(n01 / n00), abs=1e-8)
    assert res.theta_hat[0, 1] == pytest.approx(math.log(n11 * n00 / (n10 * n01)), abs=1e-8)
    assert res.p_gamma == 3


# -- properties --------------------------------------------------------------


def test_free_parameter_counts():
    m = ModelIndex.partition([0, 0, 1, 2, 1])
    assert free_parameter_count(Family.NORMAL_BLOCK_COV, m) == 3 + 3 + 1
    assert free_parameter_count(Family.ISING, m) == 5 + 1 + 1
    assert free_parameter_count(Family.LOGISTIC, ModelIndex.subset([2, 5])) == 2
    assert ising_free_mask(m).sum() == 7


def _all_data(rng):
    yield Dataset("normal-location", rng.normal(0.3, 1, size=(25, 4)))
    yield Dataset("normal-block-cov", rng.normal(size=(25, 4)) @ np.triu(np.ones((4, 4))) * 0.5)
    yield _glm_data(rng, "logistic", n=60, p=4, theta=(1.0, -0.5, 0.0, 0.3))
    yield _glm_data(rng, "poisson", n=60, p=4, theta=(0.5, -0.3, 0.0, 0.2))
    yield gen_ising(_ising_theta(rng, 4), 150, rng)


def _refines(fine: ModelIndex, coarse: ModelIndex) -> bool:
    mapping = {}
    for a, b in zip(fine.items, coarse.items):
        if mapping.setdefault(a, b) != b:
            return False
    return True


def test_nesting_monotonicity(rng):
    for data in _all_data(rng):
        kind = "all-partitions" if data.family.model_kind == "partition" else "all-subsets"
        space = ModelSpace(kind, data.p)
        models = list(space.enumerate())
        fits = {m: fit(data, m).loglik for m in models}
        for small in models:
            for big in models:
                nested = (
                    set(small.items) <= set(big.items)
                    if small.kind == "subset"
                    else _refines(small, big)
                )
                if nested:
                    assert fits[big] >= fits[small] - 1e-8, (data.family, small, big)


def _fd_gradient(data, theta, h=1e-6):
    g = np.zeros_like(theta)
    it = np.nditer(theta, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        if theta.ndim == 2 and idx[0] > idx[1]:
            continue
        up, dn = theta.copy(), theta.copy()
        up[idx] += h
        dn[idx] -= h
        if data.family == Family.NORMAL_BLOCK_COV and idx[0] != idx[1]:
            up[idx[::-1]] += h
            dn[idx[::-1]] -= h
        g[idx] = (loglik_at(data, up) - loglik_at(data, dn)) / (2 * h)
    return g


def test_gradient_matches_finite_differences(rng):
    for data in _all_data(rng):
        p = data.p
        if data.family == Family.NORMAL_BLOCK_COV:
            a = rng.normal(size=(p, p))
            theta = a @ a.T / p + np.eye(p)
        elif data.family == Family.ISING:
            theta = _ising_theta(rng, p, 0.3)
        else:
            theta = rng.normal(scale=0.3, size=p)
        analytic = loglik_grad(data, theta)
        numeric = _fd_gradient(data, theta)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-4 * np.abs(numeric).max())


def test_gradient_vanishes_on_free_parameters_at_mle(rng):
    for data in _all_data(rng):
        kind = "all-partitions" if data.family.model_kind == "partition" else "all-subsets"
        space = ModelSpace(kind, data.p)
        for model in list(space.enumerate())[:: max(1, space.cardinality() // 5)]:
            res = fit(data, model)
            g = loglik_grad(data, res.theta_hat)
            if model.kind == "subset":
                free = [j - 1 for j in model.items]
                assert np.all(np.abs(g[free]) <= 1e-6)
            else:
                free = ising_free_mask(model)
                assert np.all(np.abs(g[free]) <= 1e-6)
            if res.converged and data.family.is_regression or data.family == Family.ISING:
                assert res.grad_norm <= lik.GRAD_TOL


def test_ising_probabilities_normalize(rng):
    for p in (1, 3, 6, 10):
        _, probs = ising_state_probabilities(_ising_theta(rng, p, 1.0))
        assert abs(probs.sum() - 1.0) <= 1e-12


def test_ising_log_normalizer_at_zero():
    for p in (1, 4, 7):
        assert lik.ising_log_normalizer(np.zeros((p, p))) == pytest.approx(-p * math.log(2))


def test_fit_is_deterministic(rng):
    for data in _all_data(rng):
        full = ModelSpace("all-partitions" if data.family.model_kind == "partition" else "all-subsets", data.p).full_model()
        a, b = fit(data, full), fit(data, full)
        assert a.loglik == b.loglik
        np.testing.assert_array_equal(a.theta_hat, b.theta_hat)


# -- errors -------------------------------------------------------------------


def test_singular_block():
    data = Dataset("normal-block-cov", np.random.default_rng(0).normal(size=(2, 3)))
    with pytest.raises(SingularBlock):
        fit(data, ModelIndex.partition([0, 0, 0]))


def test_rank_deficient_design(rng):
    x = rng.normal(size=(20, 2))
    x = np.column_stack([x, x[:, 0]])
    data = Dataset("poisson", rng.poisson(1.0, 20), x)
    with pytest.raises(RankDeficientDesign):
        fit(data, ModelIndex.subset([1, 2, 3]))


def test_fit_diverged(monkeypatch, rng):
    data = _glm_data(rng, "logistic")
    monkeypatch.setattr(lik, "MAX_ITER", 1)
    with pytest.raises(FitDiverged):
        fit(data, ModelIndex.subset([1, 2, 3]))


def test_ising_state_space_limit():
    with pytest.raises(StateSpaceTooLarge):
        Dataset("ising", np.zeros((5, 21)))


def test_model_family_mismatch(rng):
    data = Dataset("normal-location", rng.normal(size=(5, 3)))
    with pytest.raises(ModelSpaceMismatch):
        fit(data, ModelIndex.partition([0, 0, 1]))
    with pytest.raises(ModelSpaceMismatch):
        fit(data, ModelIndex.subset([4]))


@pytest.mark.parametrize(
    "family, y",
    [("logistic", [0, 2, 1]), ("poisson", [0, -1, 3]), ("poisson", [0.5, 1, 1])],
)
def test_invalid_responses(family, y):
    with pytest.raises(InvalidData):
        Dataset(family, y, np.ones((3, 1)))


def test_separated_logistic_reaches_supremum():
    # complete separation: the MLE does not exist, the loglik supremum is 0
    x = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = np.array([1.0, 1.0, 0.0, 0.0])
    res = fit(Dataset("logistic", y, x), ModelIndex.subset([1]))
    assert res.converged
    assert res.loglik == pytest.approx(0.0, abs=1e-7)
    assert res.notes
