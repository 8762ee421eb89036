"""Mixing and accuracy diagnostics for MCMC output.

The integrated autocorrelation time uses the simple window estimator:
sum the estimated autocorrelations up to (not including) the first lag at
which they fall below 0.05. Autocovariances at lag i are averaged over the
n - i available pairs and then divided by the lag-0 value.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

ACT_CUTOFF = 0.05


class ZeroVarianceError(ValueError):
    """Autocorrelation is undefined for a constant series."""


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """Estimated autocorrelations at lags 0..max_lag (rho[0] == 1)."""
    x = np.asarray(series, dtype=float).reshape(-1)
    n = x.size
    if n < 2:
        raise ValueError("need at least two values")
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must be in [0, {n - 1}], got {max_lag}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series has non-finite values")
    if np.ptp(x) == 0:
        raise ZeroVarianceError("series is constant")
    y = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, nfft)
    raw = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1]
    raw[0] = float(y @ y)
    acov = raw / (n - np.arange(max_lag + 1))
    rho = acov / acov[0]
    rho[0] = 1.0
    return rho


class ActEstimate(NamedTuple):
    act: float
    lag: int
    truncated: bool


def act_window(series, cutoff: float = ACT_CUTOFF) -> ActEstimate:
    """Window estimate of the integrated autocorrelation time.

    ``lag`` is the first lag whose autocorrelation drops below ``cutoff``.
    If none does within n/2 the sum stops at n/2 and ``truncated`` is set.
    """
    x = np.asarray(series, dtype=float).reshape(-1)
    if x.size < 100:
        raise ValueError(f"act_window needs at least 100 values, got {x.size}")
    half = x.size // 2
    rho = autocorrelation(x, half)
    below = np.flatnonzero(rho[1:] < cutoff)
    if below.size:
        lag = int(below[0]) + 1
        truncated = False
    else:
        lag = half
        truncated = True
    act = 1.0 + 2.0 * float(np.sum(rho[1:lag]))
    return ActEstimate(act, lag, truncated)


def ess(series) -> float:
    x = np.asarray(series, dtype=float).reshape(-1)
    return x.size / act_window(x).act


def msejd(samples) -> float:
    """Mean squared Euclidean distance between consecutive states."""
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape[0] < 2:
        raise ValueError("need at least two states")
    d = np.diff(s, axis=0)
    return float(np.mean(np.sum(d * d, axis=1)))


def msjd(samples, sigma) -> float:
    """Mean squared jump distance in the metric of ``sigma``^-1."""
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if s.shape[0] < 2:
        raise ValueError("need at least two states")
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("sigma must be positive definite") from exc
    d = np.diff(s, axis=0)
    w = np.linalg.solve(L, d.T)
    return float(np.mean(np.sum(w * w, axis=0)))


def cpu_adjusted_act(act: float, evals_per_iteration: float) -> float:
    if not evals_per_iteration >= 1:
        raise ValueError(f"multiplier must be >= 1, got {evals_per_iteration}")
    return act * evals_per_iteration


# ----------------------------------------------------------------- QQ checks


@dataclass
class QQTable:
    names: list
    probs: np.ndarray
    sample_q: np.ndarray  # (n_params, n_quantiles)
    ref_q: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray
    subsample_size: list

    def inside(self) -> np.ndarray:
        return (self.sample_q >= self.band_lo) & (self.sample_q <= self.band_hi)

    def rows(self):
        for p, name in enumerate(self.names):
            for k, prob in enumerate(self.probs):
                yield (name, prob, self.sample_q[p, k], self.ref_q[p, k], self.band_lo[p, k], self.band_hi[p, k])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["param", "quantile", "sample_q", "ref_q", "band_lo", "band_hi"])
            for name, prob, sq, rq, lo, hi in self.rows():
                w.writerow([name, _fmt(prob), _fmt(sq), _fmt(rq), _fmt(lo), _fmt(hi)])


def qq_compare(
    sample,
    reference,
    n_quantiles: int = 99,
    n_resamples: int = 200,
    seed: int = 0,
    names: Optional[Sequence[str]] = None,
    level: float = 0.95,
) -> QQTable:
    """Quantiles of ``sample`` against ``reference`` with a resampling band.

    For each parameter the band comes from ``n_resamples`` subsamples of the
    reference (without replacement) whose size is the effective sample size
    of the sample, n / ACT.
    """
    s = np.asarray(sample, dtype=float)
    r = np.asarray(reference, dtype=float)
    if s.ndim == 1:
        s, r = s[:, None], r[:, None]
    if s.shape[1] != r.shape[1]:
        raise ValueError("sample and reference have different parameter counts")
    if s.shape[0] < 100 or r.shape[0] < 100:
        raise ValueError("need at least 100 points in both sample and reference")
    n_par = s.shape[1]
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(n_par)]
    probs = np.arange(1, n_quantiles + 1) / (n_quantiles + 1)
    rng = np.random.default_rng(seed)
    tail = (1 - level) / 2

    sample_q = np.empty((n_par, n_quantiles))
    ref_q = np.empty_like(sample_q)
    lo = np.empty_like(sample_q)
    hi = np.empty_like(sample_q)
    sizes = []
    for p in range(n_par):
        size = max(2, int(round(s.shape[0] / act_window(s[:, p]).act)))
        if size > r.shape[0]:
            raise ValueError(
                f"reference ({r.shape[0]} points) is shorter than the sample's effective size ({size})"
            )
        sizes.append(size)
        sample_q[p] = np.quantile(s[:, p], probs)
        ref_q[p] = np.quantile(r[:, p], probs)
        boot = np.empty((n_resamples, n_quantiles))
        for b in range(n_resamples):
            sub = rng.choice(r[:, p], size=size, replace=False)
            boot[b] = np.quantile(sub, probs)
        lo[p] = np.quantile(boot, tail, axis=0)
        hi[p] = np.quantile(boot, 1 - tail, axis=0)
    return QQTable(names, probs, sample_q, ref_q, lo, hi, sizes)


# ------------------------------------------------------------------- reports


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class DiagnosticsReport:
    names: list
    act: np.ndarray
    act_cpu: np.ndarray
    ess: np.ndarray
    accept_rate: np.ndarray
    trunc_lag: np.ndarray
    truncated: np.ndarray
    msejd: float = math.nan
    msjd: float = math.nan
    evals_per_iteration: float = 1.0
    meta: dict = field(default_factory=dict)

    COLUMNS = ("param", "act", "act_cpu", "ess", "accept_rate", "trunc_lag")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for i, name in enumerate(self.names):
                w.writerow(
                    [name, _fmt(self.act[i]), _fmt(self.act_cpu[i]), _fmt(self.ess[i]),
                     _fmt(self.accept_rate[i]), _fmt(self.trunc_lag[i])]
                )

    @classmethod
    def from_csv(cls, path) -> "DiagnosticsReport":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        act = np.array([float(r["act"]) for r in rows])
        act_cpu = np.array([float(r["act_cpu"]) for r in rows])
        return cls(
            names=[r["param"] for r in rows],
            act=act,
            act_cpu=act_cpu,
            ess=np.array([float(r["ess"]) for r in rows]),
            accept_rate=np.array([float(r["accept_rate"]) for r in rows]),
            trunc_lag=np.array([int(r["trunc_lag"]) for r in rows]),
            truncated=np.zeros(len(rows), dtype=bool),
            evals_per_iteration=float(act_cpu[0] / act[0]) if rows and act[0] else 1.0,
        )

    def as_dict(self) -> dict:
        return {n: float(a) for n, a in zip(self.names, self.act_cpu)}


def diagnose(
    chain,
    log_columns: Sequence[int] = (),
    names: Optional[Sequence[str]] = None,
    shape=None,
) -> DiagnosticsReport:
    """Per-parameter ACT/ESS/acceptance report for the post burn-in part of a
    ChainOutput.

    Columns listed in ``log_columns`` are analysed on the log scale and
    renamed ``log(<name>)``. ``shape`` (a covariance) enables MSJD.
    """
    x = np.array(chain.post_burn_in, dtype=float)
    base = list(names) if names is not None else list(chain.names)
    out_names = []
    for j, nm in enumerate(base):
        if j in log_columns:
            x[:, j] = np.log(x[:, j])
            out_names.append(f"log({nm})")
        else:
            out_names.append(nm)
    mult = chain.evals_per_iteration
    acts, lags, trunc = [], [], []
    for j in range(x.shape[1]):
        try:
            est = act_window(x[:, j])
        except ZeroVarianceError:
            est = ActEstimate(math.inf, 0, True)
        acts.append(est.act)
        lags.append(est.lag)
        trunc.append(est.truncated)
    act = np.array(acts)
    rates = chain.acceptance_rate()
    if rates.size == 1:
        rates = np.full(x.shape[1], rates[0])
    elif rates.size != x.shape[1]:
        rates = np.full(x.shape[1], rates.mean())
    return DiagnosticsReport(
        names=out_names,
        act=act,
        act_cpu=act * mult,
        ess=x.shape[0] / act,
        accept_rate=rates,
        trunc_lag=np.array(lags),
        truncated=np.array(trunc),
        msejd=msejd(x),
        msjd=msjd(x, shape) if shape is not None else math.nan,
        evals_per_iteration=mult,
    )
