"""Markov modulated Poisson process: parameters, simulation, likelihood,
posterior, label canonicalisation and the two-state (psi_bar, q, alpha,
beta) reparameterisation.

Parameter vectors are flat: psi_1..psi_d followed by the off-diagonal
generator entries in row-major order (q12, q13, ..., q21, q23, ...), so a
d-state model has d*d free parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from numba import njit

from .linalg import expm_kernel, is_irreducible, stationary_dist


class DegenerateReparamError(ValueError):
    """psi_1 == psi_2: the reparameterisation has no inverse there."""


def n_states(n_params: int) -> int:
    d = math.isqrt(n_params)
    if d < 1 or d * d != n_params:
        raise ValueError(f"parameter vector of length {n_params} is not d + d(d-1) for any d")
    return d


def param_names(d: int) -> list[str]:
    names = [f"psi{i + 1}" for i in range(d)]
    names += [f"q{i + 1}{j + 1}" for i in range(d) for j in range(d) if i != j]
    return names


def _offdiag_mask(d: int) -> np.ndarray:
    return ~np.eye(d, dtype=bool)


def split_vector(theta) -> tuple[np.ndarray, np.ndarray]:
    """(psi, Q) from a flat parameter vector; no validity checks."""
    theta = np.asarray(theta, dtype=float)
    d = n_states(theta.size)
    psi = theta[:d].copy()
    q = np.zeros((d, d))
    q[_offdiag_mask(d)] = theta[d:]
    q[np.diag_indices(d)] = -q.sum(axis=1)
    return psi, q


def join_vector(psi, q) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    q = np.asarray(q, dtype=float)
    return np.concatenate([psi, q[_offdiag_mask(psi.size)]])


@dataclass(frozen=True)
class MmppParams:
    psi: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        psi = np.array(self.psi, dtype=float).reshape(-1)
        q = np.array(self.q, dtype=float)
        d = psi.size
        if q.shape != (d, d):
            raise ValueError(f"q must be {d}x{d}, got {q.shape}")
        if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(q))):
            raise ValueError("non-finite parameter")
        if np.any(psi < 0):
            raise ValueError("intensities must be non-negative")
        if np.any(q[_offdiag_mask(d)] < 0):
            raise ValueError("generator off-diagonals must be non-negative")
        scale = max(1.0, float(np.abs(q).max()))
        if np.any(np.abs(q.sum(axis=1)) > 1e-12 * scale):
            raise ValueError("generator rows must sum to zero")
        psi.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "q", q)

    @property
    def d(self) -> int:
        return self.psi.size

    @classmethod
    def from_vector(cls, theta) -> "MmppParams":
        psi, q = split_vector(theta)
        return cls(psi, q)

    def to_vector(self) -> np.ndarray:
        return join_vector(self.psi, self.q)

    def stationary(self) -> np.ndarray:
        return stationary_dist(self.q)


@dataclass(frozen=True)
class EventData:
    """Observation window [0, t_obs] and the ascending event times in it."""

    t_obs: float
    events: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        t_obs = float(self.t_obs)
        ev = np.array(self.events, dtype=float).reshape(-1)
        if not (math.isfinite(t_obs) and t_obs > 0):
            raise ValueError(f"t_obs must be positive, got {t_obs}")
        if ev.size:
            if ev[0] <= 0 or ev[-1] > t_obs:
                raise ValueError("event times must lie in (0, t_obs]")
            if np.any(np.diff(ev) <= 0):
                raise ValueError("event times must be strictly increasing")
        ev.setflags(write=False)
        object.__setattr__(self, "t_obs", t_obs)
        object.__setattr__(self, "events", ev)

    @property
    def n(self) -> int:
        return self.events.size

    @cached_property
    def gaps(self) -> np.ndarray:
        """t_1..t_{n+1}: start-to-first, event-to-event, last-to-end."""
        edges = np.concatenate([[0.0], self.events, [self.t_obs]])
        g = np.diff(edges)
        g.setflags(write=False)
        return g


def write_events(path, data: EventData) -> None:
    lines = [f"# t_obs={np.format_float_positional(data.t_obs, unique=True, trim='-')}"]
    lines += [np.format_float_positional(t, unique=True, trim="-") for t in data.events]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_events(path) -> EventData:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("# t_obs="):
        raise ValueError(f"{path}: first line must be '# t_obs=<value>'")
    t_obs = float(text[0].split("=", 1)[1])
    events = [float(line) for line in text[1:] if line.strip()]
    return EventData(t_obs, np.array(events))


def write_hidden_path(path, jumps) -> None:
    lines = [f"{np.format_float_positional(t, unique=True, trim='-')} {s + 1}" for t, s in jumps]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def simulate(params: MmppParams, t_obs: float, seed: int, return_path: bool = False):
    """Simulate an MMPP over [0, t_obs].

    The hidden chain starts from its stationary law and moves by exponential
    holding times and embedded-chain jumps; events in each holding interval
    are a Poisson count placed uniformly. With ``return_path`` also returns
    the hidden jumps as ``[(time, state), ...]`` (0-based states, the first
    entry at time 0).
    """
    if not t_obs > 0:
        raise ValueError(f"t_obs must be positive, got {t_obs}")
    d = params.d
    if d > 1 and not is_irreducible(params.q):
        raise ValueError("generator must be irreducible")
    rng = np.random.default_rng(seed)
    nu = params.stationary()
    state = int(rng.choice(d, p=nu))
    t = 0.0
    chunks = []
    path = [(0.0, state)]
    while True:
        out_rate = -params.q[state, state]
        hold = rng.exponential(1.0 / out_rate) if out_rate > 0 else math.inf
        end = min(t + hold, t_obs)
        k = rng.poisson(params.psi[state] * (end - t))
        if k:
            chunks.append(np.sort(rng.uniform(t, end, size=k)))
        t = end
        if t >= t_obs:
            break
        probs = params.q[state].copy()
        probs[state] = 0.0
        state = int(rng.choice(d, p=probs / out_rate))
        path.append((t, state))
    events = np.concatenate(chunks) if chunks else np.zeros(0)
    data = EventData(t_obs, events)
    return (data, path) if return_path else data


# ---------------------------------------------------------------- likelihood


@njit(cache=True)
def _forward_symmetric(lam, u_mat, root_nu, psi, gaps):
    # Propagate in coordinates u = v / sqrt(nu), where the generator part is
    # the symmetric matrix u_mat diag(lam) u_mat^T.
    d = lam.size
    n_events = gaps.size - 1
    u = root_nu.copy()
    w = np.empty(d)
    loglik = 0.0
    top = lam.max()  # factored out of each gap so long gaps cannot underflow
    for k in range(gaps.size):
        t = gaps[k]
        for a in range(d):
            acc = 0.0
            for i in range(d):
                acc += u[i] * u_mat[i, a]
            w[a] = acc * math.exp((lam[a] - top) * t)
        loglik += top * t
        s = 0.0
        for i in range(d):
            acc = 0.0
            for a in range(d):
                acc += u_mat[i, a] * w[a]
            if k < n_events:
                acc *= psi[i]
            u[i] = acc
            s += abs(acc)
        if not (s > 0.0) or not math.isfinite(s):
            return -math.inf
        loglik += math.log(s)
        for i in range(d):
            u[i] /= s
    tot = 0.0
    for i in range(d):
        tot += u[i] * root_nu[i]
    if not tot > 0.0:
        return -math.inf
    return loglik + math.log(tot)


@njit(cache=True)
def _forward_general(a, nu0, psi, gaps, top):
    # exp(A t) = exp(top t) exp((A - top I) t) with top the Perron root of
    # A, so the shifted propagator neither underflows nor overflows.
    d = nu0.size
    n_events = gaps.size - 1
    shifted = a.copy()
    for i in range(d):
        shifted[i, i] -= top
    v = nu0.copy()
    loglik = 0.0
    for k in range(gaps.size):
        e = expm_kernel(shifted * gaps[k])
        loglik += top * gaps[k]
        nv = np.zeros(d)
        for i in range(d):
            for j in range(d):
                nv[j] += v[i] * e[i, j]
        s = 0.0
        for j in range(d):
            if k < n_events:
                nv[j] *= psi[j]
            s += abs(nv[j])
        if not (s > 0.0) or not math.isfinite(s):
            return -math.inf
        loglik += math.log(s)
        v = nv / s
    tot = v.sum()
    if not tot > 0.0:
        return -math.inf
    return loglik + math.log(tot)


def _stationary_fast(q: np.ndarray) -> np.ndarray:
    if q.shape[0] == 2:
        tot = q[0, 1] + q[1, 0]
        return np.array([q[1, 0] / tot, q[0, 1] / tot])
    return stationary_dist(q)


def _is_reversible(q: np.ndarray, nu: np.ndarray) -> bool:
    flow = nu[:, None] * q
    return bool(np.all(np.abs(flow - flow.T) <= 1e-12 * max(1.0, float(np.abs(flow).max()))))


def _loglik_arrays(psi, q, gaps, initial=None, method="auto") -> float:
    d = psi.size
    if initial is None:
        if d > 1 and not is_irreducible(q):
            return -math.inf
        nu = _stationary_fast(q) if d > 1 else np.ones(1)
    else:
        nu = np.asarray(initial, dtype=float)
    if method == "auto":
        method = "symmetric" if initial is None and (d <= 2 or _is_reversible(q, nu)) else "pade"
    if method == "symmetric":
        # Reversible: D^(1/2) (Q - Psi) D^(-1/2) is symmetric with
        # off-diagonals sqrt(q_ij q_ji), so no division by nu is needed.
        s = np.sqrt(q * q.T)
        s[np.diag_indices(d)] = np.diag(q) - psi
        lam, u_mat = np.linalg.eigh(s)
        return float(_forward_symmetric(lam, u_mat, np.sqrt(nu), psi, gaps))
    a = np.ascontiguousarray(q - np.diag(psi))
    top = float(np.linalg.eigvals(a).real.max())
    return float(_forward_general(a, np.ascontiguousarray(nu), np.ascontiguousarray(psi), gaps, top))


def log_likelihood(params: MmppParams, data: EventData, initial=None, method: str = "auto") -> float:
    """Log-likelihood of ``data`` under ``params``.

    The hidden chain starts from its stationary law unless ``initial`` pins
    another distribution. The row vector is renormalised after every gap
    and the log normalisers are accumulated, so thousands of events are
    fine. ``method`` is "auto", "symmetric" (reversible generators only)
    or "pade". Returns -inf on a reducible generator.
    """
    psi = np.ascontiguousarray(params.psi, dtype=float)
    q = np.ascontiguousarray(params.q, dtype=float)
    gaps = np.ascontiguousarray(data.gaps)
    return _loglik_arrays(psi, q, gaps, initial=initial, method=method)


@dataclass(frozen=True)
class PriorSpec:
    """Independent exponential priors, one mean per vector component."""

    means: np.ndarray

    def __post_init__(self):
        m = np.array(self.means, dtype=float).reshape(-1)
        if m.size == 0 or np.any(~np.isfinite(m)) or np.any(m <= 0):
            raise ValueError("prior means must be positive and finite")
        m.setflags(write=False)
        object.__setattr__(self, "means", m)

    def logpdf(self, theta) -> float:
        return float(np.sum(-theta / self.means - np.log(self.means)))


def log_posterior(theta, data: EventData, prior: PriorSpec) -> float:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != prior.means.shape:
        raise ValueError(f"theta has length {theta.size}, prior has {prior.means.size}")
    n_states(theta.size)
    if not np.all(np.isfinite(theta)) or np.any(theta <= 0):
        return -math.inf
    psi, q = split_vector(theta)
    ll = _loglik_arrays(psi, q, np.ascontiguousarray(data.gaps))
    if not math.isfinite(ll):
        return -math.inf
    return ll + prior.logpdf(theta)


class MmppPosterior:
    """Callable log posterior over flat parameter vectors."""

    def __init__(self, data: EventData, prior: PriorSpec):
        self.data = data
        self.prior = prior
        self.dim = prior.means.size
        self.d = n_states(self.dim)
        self.names = param_names(self.d)

    def __call__(self, theta) -> float:
        return log_posterior(theta, self.data, self.prior)


def canonicalize(theta) -> np.ndarray:
    """Relabel states so that psi is ascending, permuting Q to match."""
    psi, q = split_vector(theta)
    order = np.argsort(psi, kind="stable")
    return join_vector(psi[order], q[np.ix_(order, order)])


# ------------------------------------------------------- reparameterisation


@dataclass(frozen=True)
class ReparamPoint:
    psi_bar: float
    q: float
    alpha: float
    beta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.psi_bar, self.q, self.alpha, self.beta])


def to_reparam(theta) -> ReparamPoint:
    """(psi1, psi2, q12, q21) -> (psi_bar, q, alpha, beta) for canonical theta."""
    theta = np.asarray(theta, dtype=float)
    if theta.size != 4:
        raise ValueError("reparameterisation is defined for two-state models only")
    psi1, psi2, q12, q21 = theta
    if not np.all(theta > 0):
        raise ValueError("all parameters must be positive")
    if psi2 < psi1:
        raise ValueError("theta must be canonical (psi1 <= psi2)")
    if psi2 == psi1:
        raise DegenerateReparamError("psi1 == psi2")
    q = q12 + q21
    nu1, nu2 = q21 / q, q12 / q
    psi_bar = nu1 * psi1 + nu2 * psi2
    delta = (psi2 - psi1) / psi_bar
    return ReparamPoint(
        psi_bar=psi_bar,
        q=q,
        alpha=2.0 * delta * math.sqrt(nu1 * nu2),
        beta=delta * (nu2 - nu1),
    )


def from_reparam(p) -> np.ndarray | None:
    """Inverse of :func:`to_reparam`; None when the point maps outside the
    model (psi1 <= 0, or nu not strictly inside (0, 1))."""
    if isinstance(p, ReparamPoint):
        psi_bar, q, alpha, beta = p.psi_bar, p.q, p.alpha, p.beta
    else:
        psi_bar, q, alpha, beta = (float(v) for v in p)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not (psi_bar > 0 and q > 0):
        return None
    # 4 nu1 nu2 + (nu2 - nu1)^2 = 1
    delta = math.hypot(alpha, beta)
    nu1 = 0.5 * (1.0 - beta / delta)
    nu2 = 1.0 - nu1
    if not (0.0 < nu1 < 1.0):
        return None
    psi1 = psi_bar * (1.0 - nu2 * delta)
    psi2 = psi_bar * (1.0 + nu1 * delta)
    if not psi1 > 0:
        return None
    return np.array([psi1, psi2, nu2 * q, nu1 * q])


def reparam_log_jacobian(p) -> float:
    """log |d(psi1, psi2, q12, q21) / d(psi_bar, q, alpha, beta)|."""
    psi_bar, q, alpha, beta = (p.psi_bar, p.q, p.alpha, p.beta) if isinstance(p, ReparamPoint) else p
    return math.log(psi_bar) + math.log(q) + math.log(alpha) - math.log(2.0) - 2.0 * math.log(math.hypot(alpha, beta))


class ReparamTarget:
    """Density on (psi_bar, q, alpha, beta) induced by a density on
    (psi1, psi2, q12, q21), Jacobian included."""

    dim = 4
    names = ["psi_bar", "q", "alpha", "beta"]

    def __init__(self, logpdf):
        self.base = logpdf

    def __call__(self, z) -> float:
        if not z[2] > 0:
            return -math.inf
        theta = from_reparam(z)
        if theta is None:
            return -math.inf
        lp = self.base(theta)
        if not math.isfinite(lp):
            return -math.inf
        return lp + reparam_log_jacobian(z)

    @staticmethod
    def to_original(z) -> np.ndarray:
        theta = from_reparam(z)
        if theta is None:
            raise ValueError("point outside reparameterised support")
        return theta
