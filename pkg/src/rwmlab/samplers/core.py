"""Shared sampler plumbing: run configuration, chain output, proposal
specification and the parameter transforms the walks operate under."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

ALGORITHMS = (
    "Blk",
    "MwG",
    "BlkShp",
    "BlkShpCau",
    "BlkShpMul",
    "BlkAdpMul",
    "MwGRep",
    "MwGRepCau",
    "IndShp",
)
FAMILIES = (
    "spherical-gaussian",
    "shaped-gaussian",
    "shaped-cauchy",
    "component-gaussian",
    "component-cauchy",
    "shaped-student-t5",
)
TRANSFORMS = ("none", "log", "signed-log")


@dataclass(frozen=True)
class Target:
    logpdf: Callable[[np.ndarray], float]
    dim: int
    names: tuple = ()

    def __call__(self, x) -> float:
        return self.logpdf(x)


def as_target(obj, dim: Optional[int] = None) -> Target:
    """Wrap a callable (optionally carrying ``dim``/``names``) as a Target."""
    if isinstance(obj, Target):
        return obj
    dim = dim if dim is not None else getattr(obj, "dim", None)
    if dim is None:
        raise ValueError("target dimension unknown; pass dim or a Target")
    names = tuple(getattr(obj, "names", ()) or ())
    return Target(obj, int(dim), names)


@dataclass(frozen=True)
class AdaptConstants:
    """Constants of the adaptive mixture walk.

    ``mix`` is the weight of the fixed spherical component, ``gate`` the
    number of accepted jumps required before adaptive proposals are
    allowed, and ``accept_mult`` the multiplier on the scaling increment
    after an accepted adaptive proposal (2.3 gives an equilibrium
    acceptance of 1/3.3).
    """

    mix: float = 0.05
    m0: Optional[float] = None
    step: Optional[float] = None
    gate: int = 10
    accept_mult: float = 2.3
    snapshot_every: int = 100

    def __post_init__(self):
        if not 0 <= self.mix <= 1:
            raise ValueError("mix weight must be in [0, 1]")
        if self.m0 is not None and not self.m0 > 0:
            raise ValueError("m0 must be positive")
        if self.step is not None and self.step < 0:
            raise ValueError("adaptation step must be >= 0")
        if self.gate < 0 or self.snapshot_every < 1:
            raise ValueError("gate must be >= 0 and snapshot_every >= 1")

    @classmethod
    def variant_b(cls, **kw) -> "AdaptConstants":
        """Higher-dimensional variant: gate at 100, equilibrium acceptance ~0.25."""
        kw.setdefault("gate", 100)
        kw.setdefault("accept_mult", 3.0)
        return cls(**kw)


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "Blk"
    n_iterations: int = 11000
    burn_in: int = 1000
    seed: int = 0
    transform: str = "none"
    adapt: AdaptConstants = field(default_factory=AdaptConstants)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if not (self.n_iterations > self.burn_in >= 0):
            raise ValueError(
                f"need n_iterations > burn_in >= 0, got {self.n_iterations} and {self.burn_in}"
            )


def shape_factor(cov) -> np.ndarray:
    """Lower-triangular L with L L^T = cov.

    A singular estimate gets 1e-10 * trace/d added to its diagonal.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    cov = 0.5 * (cov + cov.T)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        d = cov.shape[0]
        bump = 1e-10 * max(np.trace(cov) / d, np.finfo(float).tiny)
        return np.linalg.cholesky(cov + bump * np.eye(d))


@dataclass(frozen=True)
class ProposalSpec:
    family: str
    scale: float
    shape: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown proposal family {self.family!r}")
        scale = np.asarray(self.scale, dtype=float)
        if np.any(~np.isfinite(scale)) or np.any(scale <= 0):
            raise ValueError("proposal scales must be positive")
        if self.shape is not None:
            L = np.atleast_2d(np.asarray(self.shape, dtype=float))
            if L.shape[0] != L.shape[1] or np.any(np.abs(np.diag(L)) == 0):
                raise ValueError("shape factor must be square and nonsingular")
            object.__setattr__(self, "shape", L)
        elif self.family.startswith("shaped"):
            raise ValueError(f"{self.family} proposals need a shape factor")

    @classmethod
    def from_covariance(cls, family: str, scale: float, cov) -> "ProposalSpec":
        return cls(family, scale, shape_factor(cov))


def signed_log(x):
    return np.sign(x) * np.log1p(np.abs(x))


def signed_log_inv(z):
    return np.sign(z) * np.expm1(np.abs(z))


class Transform:
    """Componentwise reparameterisation x = g(z) the walk runs under.

    ``log_jac(z)`` is log |dx/dz|, added to the target so the walk in z
    leaves the original-space target invariant.
    """

    def __init__(self, kinds, dim: int):
        if isinstance(kinds, str):
            kinds = [kinds] * dim
        kinds = list(kinds)
        if len(kinds) != dim or any(k not in TRANSFORMS for k in kinds):
            raise ValueError(f"bad transform spec {kinds!r} for dim {dim}")
        self.kinds = kinds
        self.log_mask = np.array([k == "log" for k in kinds])
        self.slog_mask = np.array([k == "signed-log" for k in kinds])
        self.identity = not (self.log_mask.any() or self.slog_mask.any())

    def forward(self, x) -> np.ndarray:
        z = np.array(x, dtype=float)
        if self.identity:
            return z
        with np.errstate(divide="ignore", invalid="ignore"):
            z[self.log_mask] = np.log(z[self.log_mask])
        z[self.slog_mask] = signed_log(z[self.slog_mask])
        return z

    def inverse(self, z) -> np.ndarray:
        x = np.array(z, dtype=float)
        if self.identity:
            return x
        with np.errstate(over="ignore"):
            x[self.log_mask] = np.exp(x[self.log_mask])
            x[self.slog_mask] = signed_log_inv(x[self.slog_mask])
        return x

    def log_jac(self, z) -> float:
        if self.identity:
            return 0.0
        return float(np.sum(z[self.log_mask]) + np.sum(np.abs(z[self.slog_mask])))


@dataclass
class ChainOutput:
    """Everything one chain produced.

    ``samples[i]`` is the (recorded) state after iteration ``i + 1``;
    burn-in rows are kept and ``burn_in`` says how many to drop.
    ``accepted`` is an (n_iterations, n_blocks) boolean matrix.
    """

    algorithm: str
    samples: np.ndarray
    logpost: np.ndarray
    accepted: np.ndarray
    n_evals: int
    burn_in: int
    names: list = field(default_factory=list)
    adapt_m: Optional[np.ndarray] = None
    adapt_branch: Optional[np.ndarray] = None
    sigma_snapshots: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def n_iterations(self) -> int:
        return self.samples.shape[0]

    @property
    def proposals(self) -> np.ndarray:
        return np.full(self.accepted.shape[1], self.accepted.shape[0])

    @property
    def acceptances(self) -> np.ndarray:
        return self.accepted.sum(axis=0)

    def acceptance_rate(self, post_burn_in: bool = True) -> np.ndarray:
        acc = self.accepted[self.burn_in:] if post_burn_in else self.accepted
        return acc.mean(axis=0)

    @property
    def post_burn_in(self) -> np.ndarray:
        return self.samples[self.burn_in:]

    @property
    def evals_per_iteration(self) -> float:
        return self.n_evals / self.n_iterations


def derived_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed, e.g. for pilot runs."""
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *keys]).generate_state(1, np.uint64)[0])


def cauchy_denominators(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal draws with |w| < 1e-150 redrawn, so V / w stays finite."""
    w = rng.standard_normal(size)
    bad = np.abs(w) < 1e-150
    while np.any(bad):
        w[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(w) < 1e-150
    return w


def sample_shaped_cauchy(shape_l, scale: float, rng: np.random.Generator) -> np.ndarray:
    """One multivariate Cauchy jump: V / Z with V ~ N(0, scale^2 L L^T)."""
    L = np.atleast_2d(np.asarray(shape_l, dtype=float))
    v = scale * (L @ rng.standard_normal(L.shape[0]))
    return v / cauchy_denominators(rng, 1)[0]


def _start(target: Target, transform: Transform, x0):
    x = np.array(x0, dtype=float).reshape(-1)
    if x.size != target.dim:
        raise ValueError(f"x0 has length {x.size}, target dim is {target.dim}")
    z = transform.forward(x)
    lp = target.logpdf(x)
    if not math.isfinite(lp):
        raise ValueError("starting point has zero target density")
    return x, z, lp, lp + transform.log_jac(z)


def _recorder(record, dim):
    if record is None:
        return lambda x: x
    return record


def _names(target: Target, names: Optional[Sequence[str]]):
    if names:
        return list(names)
    if target.names:
        return list(target.names)
    return [f"x{i + 1}" for i in range(target.dim)]
