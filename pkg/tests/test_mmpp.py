import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from rwmlab.mmpp import (
    DegenerateReparamError,
    EventData,
    MmppParams,
    MmppPosterior,
    PriorSpec,
    ReparamPoint,
    ReparamTarget,
    canonicalize,
    from_reparam,
    log_likelihood,
    log_posterior,
    n_states,
    param_names,
    read_events,
    reparam_log_jacobian,
    simulate,
    split_vector,
    to_reparam,
    write_events,
    write_hidden_path,
)

D1 = MmppParams([10.0, 30.0], [[-1.0, 1.0], [1.0, -1.0]])


def gen(rates, d):
    q = np.zeros((d, d))
    q[~np.eye(d, dtype=bool)] = rates
    np.fill_diagonal(q, -q.sum(axis=1))
    return q


def filter_oracle(psi, q, data, dt=1e-5, initial=None):
    """Time-discretised forward filter: per step of length h the hidden
    chain moves by I + Qh and survives without an event w.p. exp(-psi h)."""
    psi = np.asarray(psi, dtype=float)
    d = psi.size
    if initial is None:
        w, v = np.linalg.eig(q.T)
        nu = np.real(v[:, np.argmin(np.abs(w))])
        nu = nu / nu.sum()
    else:
        nu = np.asarray(initial, dtype=float)
    vec = nu.copy()
    ll = 0.0
    gaps = data.gaps
    for k, g in enumerate(gaps):
        steps = max(1, math.ceil(g / dt))
        h = g / steps
        m = (np.eye(d) + q * h) * np.exp(-psi * h)[None, :]
        vec = vec @ np.linalg.matrix_power(m, steps)
        if k < len(gaps) - 1:
            vec = vec * psi
        s = vec.sum()
        ll += math.log(s)
        vec /= s
    return ll


# ---------------------------------------------------------------- types


def test_names_and_sizes():
    assert param_names(2) == ["psi1", "psi2", "q12", "q21"]
    assert param_names(3)[3:] == ["q12", "q13", "q21", "q23", "q31", "q32"]
    assert n_states(9) == 3
    with pytest.raises(ValueError):
        n_states(5)


def test_params_roundtrip_vector():
    theta = np.array([10.0, 17.0, 30.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    p = MmppParams.from_vector(theta)
    assert np.array_equal(p.to_vector(), theta)
    assert np.allclose(p.q.sum(axis=1), 0)


@pytest.mark.parametrize(
    "psi,q",
    [
        ([-1.0, 2.0], [[-1, 1], [1, -1]]),
        ([1.0, 2.0], [[-1, 2], [1, -1]]),
        ([1.0, 2.0], [[1, -1], [1, -1]]),
        ([1.0, np.nan], [[-1, 1], [1, -1]]),
        ([1.0, 2.0, 3.0], [[-1, 1], [1, -1]]),
    ],
)
def test_params_validation(psi, q):
    with pytest.raises(ValueError):
        MmppParams(psi, q)


def test_event_data_gaps():
    data = EventData(10.0, [1.0, 2.5, 7.0])
    assert np.allclose(data.gaps, [1.0, 1.5, 4.5, 3.0])
    assert abs(data.gaps.sum() - 10.0) <= 1e-9


@pytest.mark.parametrize("events", [[0.0, 1.0], [1.0, 1.0], [2.0, 1.0], [1.0, 11.0]])
def test_event_data_validation(events):
    with pytest.raises(ValueError):
        EventData(10.0, events)


def test_events_file_roundtrip(tmp_path):
    data = simulate(D1, 5.0, 3)
    p = tmp_path / "ev.txt"
    write_events(p, data)
    text = p.read_text()
    assert text.startswith("# t_obs=5") and text.endswith("\n") and "\r" not in text
    back = read_events(p)
    assert back.t_obs == data.t_obs
    assert np.array_equal(back.events, data.events)


def test_hidden_path_file(tmp_path):
    _, path = simulate(D1, 5.0, 3, return_path=True)
    write_hidden_path(tmp_path / "h.txt", path)
    rows = [line.split() for line in (tmp_path / "h.txt").read_text().splitlines()]
    assert float(rows[0][0]) == 0.0
    assert {r[1] for r in rows} <= {"1", "2"}


# ------------------------------------------------------------- simulation


def test_simulate_single_state_counts():
    p = MmppParams([10.0], [[0.0]])
    counts = np.array([simulate(p, 100.0, s).n for s in range(200)])
    z = (counts.mean() - 1000.0) / math.sqrt(1000.0 / 200)
    assert abs(z) < 3


def test_simulate_d1_mean_count():
    counts = np.array([simulate(D1, 100.0, s).n for s in range(100)])
    # events per window: variance from a short simulation of the same law
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - 2000.0) < 3 * se


def test_simulate_deterministic():
    a, b = simulate(D1, 20.0, 9), simulate(D1, 20.0, 9)
    assert np.array_equal(a.events, b.events)
    assert not np.array_equal(a.events, simulate(D1, 20.0, 10).events)


def test_simulate_rejects_bad_window():
    with pytest.raises(ValueError):
        simulate(D1, 0.0, 1)


# ------------------------------------------------------------- likelihood


def test_single_state_closed_form():
    data = EventData(7.0, [0.5, 1.0, 4.0])
    ll = log_likelihood(MmppParams([2.5], [[0.0]]), data)
    assert ll == pytest.approx(3 * math.log(2.5) - 2.5 * 7.0, rel=1e-13)


def test_matches_discretised_filter_small_case():
    rng = np.random.default_rng(1)
    data = EventData(1.0, np.sort(rng.uniform(0, 1, 5)))
    p = MmppParams([3.0, 8.0], gen([1.5, 0.7], 2))
    got = log_likelihood(p, data)
    want = filter_oracle(p.psi, p.q, data)
    assert abs(got - want) <= 1e-3 * abs(want)


def test_pade_route_matches_filter_on_nonreversible_d3():
    data = EventData(1.0, [0.1, 0.35, 0.5, 0.9])
    q = gen([2.0, 0.1, 0.2, 1.5, 1.0, 0.3], 3)
    p = MmppParams([1.0, 4.0, 9.0], q)
    got = log_likelihood(p, data)
    assert abs(got - filter_oracle(p.psi, p.q, data)) <= 1e-3 * abs(got)


@pytest.mark.parametrize("seed", range(5))
def test_symmetric_and_pade_routes_agree(seed):
    rng = np.random.default_rng(seed)
    data = simulate(D1, 10.0, seed)
    p = MmppParams(rng.uniform(1, 40, 2), gen(rng.uniform(0.1, 3, 2), 2))
    a = log_likelihood(p, data, method="symmetric")
    b = log_likelihood(p, data, method="pade")
    assert a == pytest.approx(b, rel=1e-10)


def test_reversible_d3_uses_either_route():
    data = simulate(MmppParams([10.0, 17.0, 30.0], gen([0.5] * 6, 3)), 10.0, 1)
    p = MmppParams([10.0, 17.0, 30.0], gen([0.5] * 6, 3))
    assert log_likelihood(p, data, method="symmetric") == pytest.approx(log_likelihood(p, data, method="pade"), rel=1e-10)


def test_long_data_no_underflow():
    data = simulate(D1, 100.0, 1)
    ll = log_likelihood(D1, data)
    assert math.isfinite(ll)
    # 1000 s of silence: finite, and between the two single-state values
    quiet = log_likelihood(D1, EventData(1000.0, []))
    assert -30 * 1000 < quiet < -10 * 1000
    assert log_likelihood(D1, EventData(1000.0, []), method="pade") == pytest.approx(quiet, rel=1e-10)


def _permute(psi, q, order):
    return psi[order], q[np.ix_(order, order)]


@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
def test_label_permutation_invariance(seed, d):
    rng = np.random.default_rng(seed)
    psi = rng.uniform(0.5, 30, d)
    q = gen(rng.uniform(0.05, 3, d * (d - 1)), d)
    data = simulate(MmppParams(psi, q), 5.0, seed)
    order = rng.permutation(d)
    a = log_likelihood(MmppParams(psi, q), data)
    b = log_likelihood(MmppParams(*_permute(psi, q, order)), data)
    assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


@pytest.mark.parametrize("state", [0, 1])
def test_frozen_chain_limit(state):
    # short window: leakage into the slower state grows like exp((5 - 2) t)
    data = EventData(3.0, [0.4, 1.0, 1.2, 2.0, 2.9])
    psi = np.array([2.0, 5.0])
    pinned = np.eye(2)[state]
    ll = log_likelihood(MmppParams(psi, gen([1e-8, 1e-8], 2)), data, initial=pinned)
    want = data.n * math.log(psi[state]) - psi[state] * data.t_obs
    assert ll == pytest.approx(want, rel=1e-4)


def test_reducible_generator_gives_minus_inf():
    p = MmppParams([1.0, 2.0], gen([0.0, 1.0], 2))
    assert log_likelihood(p, EventData(1.0, [0.5])) == -math.inf


# ---------------------------------------------------------------- posterior


def test_prior_only_posterior():
    truth = D1.to_vector()
    prior = PriorSpec(truth)
    data = EventData(100.0, [])
    # no events and stationary start: exp((Q - Psi) t) summed against nu
    lp = log_posterior(truth, data, prior)
    ll = log_likelihood(D1, data)
    assert lp == pytest.approx(ll + float(np.sum(-1.0 - np.log(truth))), rel=1e-12)
    # the no-event likelihood lies between the two single-state bounds
    assert -30 * 100 < ll < -10 * 100


def test_posterior_support_and_shape_checks():
    prior = PriorSpec(D1.to_vector())
    data = EventData(1.0, [0.5])
    assert log_posterior(np.array([-1.0, 30.0, 1.0, 1.0]), data, prior) == -math.inf
    assert log_posterior(np.array([10.0, 30.0, 0.0, 1.0]), data, prior) == -math.inf
    with pytest.raises(ValueError):
        log_posterior(np.ones(9), data, prior)
    with pytest.raises(ValueError):
        PriorSpec([1.0, -1.0])


def test_posterior_finite_on_random_grid():
    data = simulate(D1, 100.0, 1)
    post = MmppPosterior(data, PriorSpec(D1.to_vector()))
    rng = np.random.default_rng(0)
    for theta in np.exp(rng.uniform(-4, 4, size=(200, 4))):
        assert math.isfinite(post(theta))


# ----------------------------------------------------------- canonicalise


def test_canonicalize_examples():
    assert np.array_equal(canonicalize([30.0, 10.0, 2.0, 1.0]), [10.0, 30.0, 1.0, 2.0])
    assert np.array_equal(canonicalize([10.0, 30.0, 2.0, 1.0]), [10.0, 30.0, 2.0, 1.0])
    # three states: psi = [30, 10, 17] -> order (1, 2, 0)
    theta = np.array([30.0, 10.0, 17.0, 0.12, 0.13, 0.21, 0.23, 0.31, 0.32])
    out = canonicalize(theta)
    psi, q = split_vector(out)
    assert np.array_equal(psi, [10.0, 17.0, 30.0])
    assert q[0, 1] == 0.23 and q[0, 2] == 0.21 and q[2, 0] == 0.12


@given(st.integers(0, 10_000))
def test_canonicalize_preserves_posterior(seed):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.1, 30, 4)
    data = simulate(D1, 3.0, seed)
    prior = PriorSpec([15.0, 15.0, 1.0, 1.0])
    # the prior is exchangeable across labels, so the posterior is too
    a = log_posterior(theta, data, prior)
    b = log_posterior(canonicalize(theta), data, prior)
    assert abs(a - b) <= 1e-10 * max(1.0, abs(a))
    assert np.all(np.diff(canonicalize(theta)[:2]) >= 0)


# ------------------------------------------------------ reparameterisation


def test_to_reparam_examples():
    p = to_reparam([10.0, 30.0, 1.0, 1.0])
    assert (p.psi_bar, p.q, p.alpha, p.beta) == pytest.approx((20.0, 2.0, 1.0, 0.0), abs=1e-15)
    p = to_reparam([10.0, 17.0, 1.0, 1.0])
    assert (p.psi_bar, p.q, p.alpha, p.beta) == pytest.approx((13.5, 2.0, 7 / 13.5, 0.0), abs=1e-15)


def test_from_reparam_examples():
    assert from_reparam(ReparamPoint(20.0, 2.0, 1.0, 0.0)) == pytest.approx([10.0, 30.0, 1.0, 1.0], abs=1e-12)
    assert from_reparam((13.5, 2.0, 7 / 13.5, 0.0)) == pytest.approx([10.0, 17.0, 1.0, 1.0], abs=1e-12)


def test_reparam_errors():
    with pytest.raises(DegenerateReparamError):
        to_reparam([5.0, 5.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        to_reparam([30.0, 10.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        to_reparam([10.0, 30.0, 1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        from_reparam((20.0, 2.0, 0.0, 0.1))


def test_from_reparam_support_violation():
    # beta approaching delta sends nu1 to zero
    assert from_reparam((20.0, 2.0, 1e-300, 1.0)) is None
    # psi1 would be negative: large delta with nu2 large
    assert from_reparam((20.0, 2.0, 1.0, 2.0)) is None
    assert from_reparam((-1.0, 2.0, 1.0, 0.0)) is None


canonical = st.tuples(
    st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 10), st.floats(0.01, 10)
).map(lambda t: (min(t[0], t[1]), max(t[0], t[1]), t[2], t[3]))


@given(canonical)
def test_reparam_round_trip(theta):
    assume(theta[1] > theta[0] * (1 + 1e-9))
    p = to_reparam(theta)
    assert p.alpha > 0 and math.hypot(p.alpha, p.beta) >= 0
    back = from_reparam(p)
    assert np.allclose(back, theta, rtol=1e-12, atol=0) or np.max(np.abs(back - theta) / np.abs(theta)) <= 1e-11


def test_reparam_jacobian_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(20):
        psi = np.sort(rng.uniform(1, 40, 2))
        theta = np.array([psi[0], psi[1], *rng.uniform(0.2, 3, 2)])
        z = to_reparam(theta).as_array()
        jac = np.empty((4, 4))
        for k in range(4):
            h = 1e-6 * max(1.0, abs(z[k]))
            e = np.zeros(4)
            e[k] = h
            jac[:, k] = (from_reparam(z + e) - from_reparam(z - e)) / (2 * h)
        want = math.log(abs(np.linalg.det(jac)))
        assert reparam_log_jacobian(z) == pytest.approx(want, abs=1e-6)


def test_reparam_target():
    data = simulate(D1, 10.0, 2)
    post = MmppPosterior(data, PriorSpec(D1.to_vector()))
    rt = ReparamTarget(post)
    z = to_reparam([10.0, 30.0, 1.0, 1.0]).as_array()
    assert rt(z) == pytest.approx(post(np.array([10.0, 30.0, 1.0, 1.0])) + reparam_log_jacobian(z))
    assert rt(np.array([20.0, 2.0, -0.1, 0.0])) == -math.inf
    assert rt(np.array([20.0, 2.0, 1.0, 2.0])) == -math.inf
    with pytest.raises(ValueError):
        rt.to_original(np.array([20.0, 2.0, 1.0, 2.0]))
