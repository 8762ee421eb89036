"""Random walk Metropolis in its block, within-Gibbs and multiplicative
forms, plus the heavy-tailed independence sampler.

All random numbers a run needs are drawn up front from
``np.random.default_rng(config.seed)`` in a fixed order, so a run is a
deterministic function of (target, proposal, config, x0). Acceptance is
decided in log space: accept iff log U < log pi(x*) - log pi(x), plus the
transform Jacobian where the walk runs on transformed coordinates.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from ..mmpp import ReparamPoint, from_reparam
from .core import (
    ChainOutput,
    ProposalSpec,
    RunConfig,
    Transform,
    _names,
    _recorder,
    _start,
    as_target,
    cauchy_denominators,
)

_BLOCK_FAMILIES = ("spherical-gaussian", "shaped-gaussian", "shaped-cauchy")


def _block_jumps(proposal: ProposalSpec, dim: int, n: int, rng) -> np.ndarray:
    z = rng.standard_normal((n, dim))
    if proposal.shape is not None:
        if proposal.shape.shape != (dim, dim):
            raise ValueError(f"shape factor is {proposal.shape.shape}, target dim is {dim}")
        z = z @ proposal.shape.T
    jumps = float(proposal.scale) * z
    if proposal.family == "shaped-cauchy":
        jumps /= cauchy_denominators(rng, n)[:, None]
    return jumps


def _walk(target, transform, x0, jumps, log_u, config, record, names, algorithm):
    n, dim = jumps.shape
    rec = _recorder(record, dim)
    x, z, lp, lz = _start(target, transform, x0)
    first = np.asarray(rec(x), dtype=float)
    samples = np.empty((n, first.size))
    logpost = np.empty(n)
    accepted = np.zeros((n, 1), dtype=bool)
    logpdf = target.logpdf
    for i in range(n):
        zn = z + jumps[i]
        xn = transform.inverse(zn)
        lpn = logpdf(xn)
        if lpn > -math.inf:
            lzn = lpn + transform.log_jac(zn)
            if log_u[i] < lzn - lz:
                x, z, lp, lz = xn, zn, lpn, lzn
                accepted[i, 0] = True
        samples[i] = rec(x)
        logpost[i] = lp
    return ChainOutput(
        algorithm=algorithm,
        samples=samples,
        logpost=logpost,
        accepted=accepted,
        n_evals=n,
        burn_in=config.burn_in,
        names=_names(target, names),
    )


def rwm_block(target, proposal: ProposalSpec, config: RunConfig, x0, record=None, names=None) -> ChainOutput:
    """Block random walk Metropolis.

    Each iteration proposes ``x + scale * L @ Z`` (Z standard normal; for the
    Cauchy family divided by an independent standard normal scalar) in the
    coordinates given by ``config.transform``. ``record`` maps a state to the
    row stored in the output (e.g. a label canonicaliser).
    """
    target = as_target(target)
    if proposal.family not in _BLOCK_FAMILIES:
        raise ValueError(f"rwm_block cannot use {proposal.family} proposals")
    if np.ndim(proposal.scale) != 0:
        raise ValueError("block proposals take a single scale")
    rng = np.random.default_rng(config.seed)
    n = config.n_iterations
    jumps = _block_jumps(proposal, target.dim, n, rng)
    log_u = np.log(rng.random(n))
    transform = Transform(config.transform, target.dim)
    return _walk(target, transform, x0, jumps, log_u, config, record, names, config.algorithm)


def rwm_multiplicative(target, proposal: ProposalSpec, config: RunConfig, x0, record=None, names=None) -> ChainOutput:
    """Block walk on log-parameters (``x_i* = x_i exp(Y_i)``).

    A config with transform "none" is run under "log"; "signed-log" is
    honoured.
    """
    if config.transform == "none":
        config = dataclasses.replace(config, transform="log")
    return rwm_block(target, proposal, config, x0, record=record, names=names)


def mwg_sweep(
    target,
    scales,
    config: RunConfig,
    x0,
    families=None,
    transforms=None,
    record=None,
    names=None,
) -> ChainOutput:
    """Sequential-scan Metropolis-within-Gibbs, one component at a time.

    ``families`` holds "gaussian" or "cauchy" per component and
    ``transforms`` a transform name per component (default: the config's).
    Every component update costs one target evaluation.
    """
    target = as_target(target)
    dim = target.dim
    scales = np.broadcast_to(np.asarray(scales, dtype=float), (dim,)).copy()
    if np.any(~np.isfinite(scales)) or np.any(scales <= 0):
        raise ValueError("every component scale must be positive")
    families = ["gaussian"] * dim if families is None else list(families)
    if len(families) != dim or any(f not in ("gaussian", "cauchy") for f in families):
        raise ValueError(f"bad component families {families!r}")
    transform = Transform(config.transform if transforms is None else transforms, dim)

    rng = np.random.default_rng(config.seed)
    n = config.n_iterations
    jumps = rng.standard_normal((n, dim)) * scales
    cauchy = np.array([f == "cauchy" for f in families])
    if cauchy.any():
        jumps[:, cauchy] /= cauchy_denominators(rng, (n, int(cauchy.sum())))
    log_u = np.log(rng.random((n, dim)))

    rec = _recorder(record, dim)
    x, z, lp, lz = _start(target, transform, x0)
    first = np.asarray(rec(x), dtype=float)
    samples = np.empty((n, first.size))
    logpost = np.empty(n)
    accepted = np.zeros((n, dim), dtype=bool)
    logpdf = target.logpdf
    for i in range(n):
        for j in range(dim):
            zn = z.copy()
            zn[j] += jumps[i, j]
            xn = transform.inverse(zn)
            lpn = logpdf(xn)
            if lpn > -math.inf:
                lzn = lpn + transform.log_jac(zn)
                if log_u[i, j] < lzn - lz:
                    x, z, lp, lz = xn, zn, lpn, lzn
                    accepted[i, j] = True
        samples[i] = rec(x)
        logpost[i] = lp
    return ChainOutput(
        algorithm=config.algorithm,
        samples=samples,
        logpost=logpost,
        accepted=accepted,
        n_evals=n * dim,
        burn_in=config.burn_in,
        names=_names(target, names),
        info={"scales": scales.tolist(), "families": families, "transforms": transform.kinds},
    )


def mwg_reparam_run(
    target,
    config: RunConfig,
    z0,
    scales,
    beta_family: str = "gaussian",
    record=None,
    names=None,
) -> ChainOutput:
    """Within-Gibbs sweep on (psi_bar, q, alpha, beta).

    ``target`` is a density on that space (see ``mmpp.ReparamTarget``).
    The first three coordinates get multiplicative updates, beta an additive
    Gaussian or Cauchy one. Rows are recorded as (psi1, psi2, q12, q21)
    unless ``record`` says otherwise.
    """
    if beta_family not in ("gaussian", "cauchy"):
        raise ValueError(f"beta_family must be gaussian or cauchy, got {beta_family!r}")
    target = as_target(target, dim=4)
    if target.dim != 4:
        raise ValueError("reparameterised target must be four-dimensional")
    if isinstance(z0, ReparamPoint):
        z0 = z0.as_array()
    if record is None:
        record = from_reparam
        names = names or ["psi1", "psi2", "q12", "q21"]
    return mwg_sweep(
        target,
        scales,
        config,
        z0,
        families=["gaussian", "gaussian", "gaussian", beta_family],
        transforms=["log", "log", "log", "none"],
        record=record,
        names=names,
    )


def _t_logkernel(dev: np.ndarray, df: float, dim: int) -> float:
    return -0.5 * (df + dim) * math.log1p(float(dev @ dev) / df)


def independence_sampler_run(
    target,
    shape_l,
    scale: float,
    center,
    config: RunConfig,
    x0,
    df: float = 5.0,
    record=None,
    names=None,
) -> ChainOutput:
    """Independence Metropolis-Hastings with a multivariate Student-t proposal
    ``center + scale * L @ T``, T ~ t_df(0, I)."""
    target = as_target(target)
    dim = target.dim
    L = np.atleast_2d(np.asarray(shape_l, dtype=float))
    if L.shape != (dim, dim) or np.any(np.diag(L) == 0):
        raise ValueError("shape factor must be a nonsingular dim x dim matrix")
    if not scale > 0:
        raise ValueError("scale must be positive")
    center = np.asarray(center, dtype=float).reshape(dim)
    Linv = np.linalg.inv(L) / scale

    rng = np.random.default_rng(config.seed)
    n = config.n_iterations
    normals = rng.standard_normal((n, dim))
    chi2 = rng.chisquare(df, n)
    log_u = np.log(rng.random(n))
    props = center + scale * (normals @ L.T) * np.sqrt(df / chi2)[:, None]

    rec = _recorder(record, dim)
    transform = Transform("none", dim)
    x, _, lp, _ = _start(target, transform, x0)
    lq = _t_logkernel(Linv @ (x - center), df, dim)
    first = np.asarray(rec(x), dtype=float)
    samples = np.empty((n, first.size))
    logpost = np.empty(n)
    accepted = np.zeros((n, 1), dtype=bool)
    for i in range(n):
        xn = props[i]
        lpn = target.logpdf(xn)
        if lpn > -math.inf:
            lqn = _t_logkernel(Linv @ (xn - center), df, dim)
            if log_u[i] < (lpn - lp) + (lq - lqn):
                x, lp, lq = xn.copy(), lpn, lqn
                accepted[i, 0] = True
        samples[i] = rec(x)
        logpost[i] = lp
    return ChainOutput(
        algorithm=config.algorithm,
        samples=samples,
        logpost=logpost,
        accepted=accepted,
        n_evals=n,
        burn_in=config.burn_in,
        names=_names(target, names),
        info={"center": center.tolist(), "scale": float(scale), "df": df},
    )
