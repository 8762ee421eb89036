"""Adaptive block multiplicative random walk.

Proposals on the transformed (by default log) scale come from a mixture:
with weight ``1 - mix`` a Gaussian shaped by the running covariance of all
transformed states so far and scaled by ``m``, otherwise a fixed spherical
Gaussian with variance ``lambda0**2 / d``. After an adaptive-branch
proposal at iteration i, ``m`` moves by ``-step/sqrt(i)`` on rejection and
``+accept_mult*step/sqrt(i)`` on acceptance; the fixed branch leaves ``m``
alone.
"""

from __future__ import annotations

import math

import numpy as np

from .core import ChainOutput, RunConfig, Transform, _names, _recorder, _start, as_target


def adaptive_multiplicative_run(
    target,
    config: RunConfig,
    x0,
    lambda0: float,
    transform: str = "log",
    record=None,
    names=None,
    fixed_cov=None,
) -> ChainOutput:
    """Run the adaptive mixture walk.

    The adaptive branch stays off until ``config.adapt.gate`` jumps have been
    accepted, and for any iteration where the running covariance has no
    Cholesky factor. ``fixed_cov`` pins the shape matrix (used, with
    ``step=0``, to freeze adaptation entirely).

    Draw order: branch uniforms (n), standard normals (n, d), accept
    uniforms (n).
    """
    target = as_target(target)
    dim = target.dim
    if not lambda0 > 0:
        raise ValueError("lambda0 must be positive")
    ac = config.adapt
    m0 = ac.m0 if ac.m0 is not None else 2.38 / math.sqrt(dim)
    step = ac.step if ac.step is not None else m0 / 100.0
    m_floor = 1e-3 * m0
    tr = Transform(transform, dim)
    if fixed_cov is not None:
        fixed_L = np.linalg.cholesky(np.atleast_2d(np.asarray(fixed_cov, dtype=float)))

    rng = np.random.default_rng(config.seed)
    n = config.n_iterations
    branch_u = rng.random(n)
    normals = rng.standard_normal((n, dim))
    log_u = np.log(rng.random(n))

    rec = _recorder(record, dim)
    x, z, lp, lz = _start(target, tr, x0)
    first = np.asarray(rec(x), dtype=float)
    samples = np.empty((n, first.size))
    logpost = np.empty(n)
    accepted = np.zeros((n, 1), dtype=bool)
    m_trace = np.empty(n)
    branch = np.zeros(n, dtype=bool)
    snapshots = []

    # Welford running mean / covariance over every transformed state, x0 included.
    count = 1
    mean = z.copy()
    m2 = np.zeros((dim, dim))
    n_accepted = 0
    m = m0
    fixed_scale = lambda0 / math.sqrt(dim)
    logpdf = target.logpdf

    for it in range(1, n + 1):
        k = it - 1
        adaptive = n_accepted >= ac.gate and branch_u[k] >= ac.mix
        if adaptive:
            if fixed_cov is not None:
                L = fixed_L
            else:
                try:
                    L = np.linalg.cholesky(m2 / count)
                except np.linalg.LinAlgError:
                    adaptive = False
        if adaptive:
            jump = m * (L @ normals[k])
        else:
            jump = fixed_scale * normals[k]

        zn = z + jump
        xn = tr.inverse(zn)
        lpn = logpdf(xn)
        ok = False
        if lpn > -math.inf:
            lzn = lpn + tr.log_jac(zn)
            ok = log_u[k] < lzn - lz
        if ok:
            x, z, lp, lz = xn, zn, lpn, lzn
            n_accepted += 1
            accepted[k, 0] = True
        if adaptive:
            branch[k] = True
            if ok:
                m += ac.accept_mult * step / math.sqrt(it)
            else:
                m = max(m - step / math.sqrt(it), m_floor)

        count += 1
        delta = z - mean
        mean += delta / count
        m2 += np.outer(delta, z - mean)

        samples[k] = rec(x)
        logpost[k] = lp
        m_trace[k] = m
        if it % ac.snapshot_every == 0:
            snapshots.append((it, m2 / count))

    return ChainOutput(
        algorithm=config.algorithm,
        samples=samples,
        logpost=logpost,
        accepted=accepted,
        n_evals=n,
        burn_in=config.burn_in,
        names=_names(target, names),
        adapt_m=m_trace,
        adapt_branch=branch,
        sigma_snapshots=snapshots,
        info={"lambda0": float(lambda0), "m0": m0, "step": step, "transform": transform},
    )


def trailing_adaptive_acceptance(out: ChainOutput, last: int) -> float:
    """Acceptance rate of adaptive-branch proposals among the last ``last`` iterations."""
    if out.adapt_branch is None:
        raise ValueError("chain has no adaptive-branch record")
    br = out.adapt_branch[-last:]
    if not br.any():
        return math.nan
    return float(out.accepted[-last:, 0][br].mean())
