import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rwmlab.linalg import (
    diffusion_speed,
    is_irreducible,
    mat_exp,
    mwg_efficiency_ratio,
    stationary_dist,
)


def series_expm(a, t, terms=30, dps=50):
    """Truncated power series of exp(a t) in extended precision."""
    with mpmath.workdps(dps):
        m = mpmath.matrix(a.tolist()) * t
        out = mpmath.eye(a.shape[0])
        term = mpmath.eye(a.shape[0])
        for k in range(1, terms + 1):
            term = term * m / k
            out += term
        return np.array(out.tolist(), dtype=float)


def test_exp_of_zero_is_identity():
    assert np.array_equal(mat_exp(np.zeros((2, 2)), 5.0), np.eye(2))


def test_exp_diagonal():
    got = mat_exp(np.diag([-1.0, -2.0]), 1.0)
    assert np.allclose(got, np.diag([math.exp(-1), math.exp(-2)]), atol=1e-14, rtol=0)


def test_exp_against_series():
    a = np.array([[-1.0, 1.0], [1.0, -1.0]])
    assert np.max(np.abs(mat_exp(a, 0.7) - series_expm(a, 0.7))) <= 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_exp_random_3x3_against_series(seed):
    a = np.random.default_rng(seed).normal(size=(3, 3))
    assert np.max(np.abs(mat_exp(a, 1.3) - series_expm(a, 1.3, terms=60))) <= 1e-10


def test_exp_t_zero_is_exact_identity():
    assert np.array_equal(mat_exp(np.array([[3.0, 1.0], [2.0, -7.0]]), 0.0), np.eye(2))


@pytest.mark.parametrize(
    "a,t",
    [
        (np.array([[np.nan, 0.0], [0.0, 0.0]]), 1.0),
        (np.array([[np.inf, 0.0], [0.0, 0.0]]), 1.0),
        (np.eye(2), -0.1),
        (np.ones((2, 3)), 1.0),
    ],
)
def test_exp_rejects_bad_input(a, t):
    with pytest.raises(ValueError):
        mat_exp(a, t)


def _generator(rates):
    d = int(round((1 + math.sqrt(1 + 4 * len(rates))) / 2))
    q = np.zeros((d, d))
    q[~np.eye(d, dtype=bool)] = rates
    np.fill_diagonal(q, -q.sum(axis=1))
    return q


gen_rates = st.integers(2, 4).flatmap(
    lambda d: st.lists(st.floats(0.05, 5.0), min_size=d * (d - 1), max_size=d * (d - 1))
)


@given(gen_rates, st.floats(0.0, 3.0))
def test_exp_of_generator_is_stochastic(rates, t):
    p = mat_exp(_generator(rates), t)
    assert np.all(p >= -1e-12)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)


@given(gen_rates, st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_exp_semigroup(rates, s, t):
    q = _generator(rates)
    assert np.allclose(mat_exp(q, s + t), mat_exp(q, s) @ mat_exp(q, t), atol=1e-12)


def test_stationary_examples():
    assert np.allclose(stationary_dist(np.array([[-1.0, 1.0], [1.0, -1.0]])), [0.5, 0.5], atol=1e-12)
    assert np.allclose(stationary_dist(np.array([[-2.0, 2.0], [1.0, -1.0]])), [1 / 3, 2 / 3], atol=1e-12)
    assert np.allclose(stationary_dist(_generator([0.5] * 6)), [1 / 3] * 3, atol=1e-12)


@given(gen_rates)
def test_stationary_residual(rates):
    q = _generator(rates)
    nu = stationary_dist(q)
    assert abs(nu.sum() - 1) <= 1e-12
    assert np.all(nu >= 0)
    assert np.max(np.abs(nu @ q)) <= 1e-10


@pytest.mark.parametrize(
    "q",
    [
        np.array([[0.0, 0.0], [1.0, -1.0]]),  # absorbing state
        np.array([[-1.0, 2.0], [1.0, -1.0]]),  # rows do not sum to zero
        np.array([[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 0.0]]),
    ],
)
def test_stationary_rejects(q):
    with pytest.raises(ValueError):
        stationary_dist(q)


def test_irreducibility():
    assert is_irreducible(_generator([1.0, 1.0]))
    assert not is_irreducible(np.array([[0.0, 0.0], [1.0, -1.0]]))


def test_diffusion_speed_optimum_acceptance():
    assert abs(diffusion_speed(2.38, 1.0).acceptance - 0.2338) <= 1e-3


def test_diffusion_speed_small_mu():
    p = diffusion_speed(1e-8)
    assert p.acceptance == pytest.approx(1.0, abs=1e-8)
    assert p.speed < 1e-15


def test_diffusion_speed_maximised_near_238():
    mus = np.linspace(0.5, 5, 4501)
    speeds = [diffusion_speed(m).speed for m in mus]
    assert abs(mus[int(np.argmax(speeds))] - 2.38) < 0.01


@given(st.floats(0.01, 10), st.floats(0.01, 10))
def test_diffusion_speed_roughness_scaling(mu, j):
    # only mu * sqrt(j) enters the acceptance
    assert diffusion_speed(mu, j).acceptance == pytest.approx(diffusion_speed(mu * math.sqrt(j), 1.0).acceptance, rel=1e-12)


def test_diffusion_speed_rejects():
    with pytest.raises(ValueError):
        diffusion_speed(0.0)
    with pytest.raises(ValueError):
        diffusion_speed(1.0, -1.0)


def test_mwg_ratio():
    assert mwg_efficiency_ratio([2.0, 2.0, 2.0]) == 1.0
    # arithmetic mean 2.5 over harmonic mean 1.6
    assert mwg_efficiency_ratio([1.0, 4.0]) == pytest.approx(2.5 / 1.6)


@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=8))
def test_mwg_ratio_at_least_one(v):
    assert mwg_efficiency_ratio(v) >= 1.0 - 1e-12
