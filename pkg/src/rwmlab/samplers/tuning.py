"""Proposal-scale tuning from short pilot chains.

Acceptance targeting bisects on log(scale), assuming acceptance falls as
the scale grows (true for unimodal targets). Until a bracket is found the
scale moves by a factor of 4. Heavy-tailed proposals have no useful
acceptance target, so for those a grid of scales is scored by the mean
estimated ACT of a short pilot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..diagnostics import ZeroVarianceError, act_window
from .core import ProposalSpec, RunConfig, as_target, derived_seed
from .rwm import independence_sampler_run, mwg_sweep, rwm_block

PILOT_ITERATIONS = 2000
PILOT_BUDGET = 10
_EXPAND = 4.0


@dataclass
class TuneResult:
    scale: object
    acceptance: object
    converged: bool
    history: list = field(default_factory=list)


def _check_window(window) -> tuple[float, float]:
    lo, hi = (float(w) for w in window)
    if not 0 < lo < hi < 1:
        raise ValueError(f"acceptance window must lie inside (0, 1), got {window}")
    return lo, hi


def bisect_scale(pilot: Callable[[float, int], float], window, scale0: float = 1.0, budget: int = PILOT_BUDGET) -> TuneResult:
    """Find a scale whose pilot acceptance lies in ``window``.

    ``pilot(scale, k)`` runs the k-th pilot and returns its acceptance rate.
    If the budget runs out, the tested scale closest to the window centre
    is returned with ``converged=False``.
    """
    lo, hi = _check_window(window)
    if budget < 1:
        raise ValueError("budget must be at least 1")
    small = large = None  # scales known to accept too often / too rarely
    s = float(scale0)
    history = []
    for k in range(budget):
        acc = pilot(s, k)
        history.append((s, acc))
        if lo <= acc <= hi:
            return TuneResult(s, acc, True, history)
        if acc > hi:
            small = s if small is None else max(small, s)
        else:
            large = s if large is None else min(large, s)
        if small is not None and large is not None:
            s = math.sqrt(small * large)
        elif small is not None:
            s = small * _EXPAND
        else:
            s = large / _EXPAND
    mid = 0.5 * (lo + hi)
    best = min(history, key=lambda h: abs(h[1] - mid))
    return TuneResult(best[0], best[1], False, history)


def bisect_scales(pilot: Callable[[np.ndarray, int], np.ndarray], window, scale0, budget: int = PILOT_BUDGET) -> TuneResult:
    """Componentwise :func:`bisect_scale` sharing each pilot run.

    ``pilot(scales, k)`` returns one acceptance rate per component.
    """
    lo, hi = _check_window(window)
    s = np.array(scale0, dtype=float)
    dim = s.size
    small = np.full(dim, np.nan)
    large = np.full(dim, np.nan)
    done = np.zeros(dim, dtype=bool)
    history = []
    best_s = s.copy()
    best_gap = np.full(dim, np.inf)
    best_acc = np.full(dim, np.nan)
    mid = 0.5 * (lo + hi)
    for k in range(budget):
        acc = np.asarray(pilot(s.copy(), k), dtype=float)
        history.append((s.copy(), acc.copy()))
        gap = np.abs(acc - mid)
        better = gap < best_gap
        best_s[better], best_gap[better], best_acc[better] = s[better], gap[better], acc[better]
        inside = (acc >= lo) & (acc <= hi)
        done = inside
        if done.all():
            return TuneResult(s.copy(), acc, True, history)
        for j in np.flatnonzero(~inside):
            if acc[j] > hi:
                small[j] = s[j] if np.isnan(small[j]) else max(small[j], s[j])
            else:
                large[j] = s[j] if np.isnan(large[j]) else min(large[j], s[j])
            if not np.isnan(small[j]) and not np.isnan(large[j]):
                s[j] = math.sqrt(small[j] * large[j])
            elif not np.isnan(small[j]):
                s[j] = small[j] * _EXPAND
            else:
                s[j] = large[j] / _EXPAND
    return TuneResult(best_s, best_acc, False, history)


def _mean_act(samples: np.ndarray) -> float:
    acts = []
    for j in range(samples.shape[1]):
        try:
            acts.append(act_window(samples[:, j]).act)
        except ZeroVarianceError:
            return math.inf
    return float(np.mean(acts))


def minimize_act(run: Callable[[float, int], np.ndarray], grid: Sequence[float]) -> TuneResult:
    """Pick the grid scale whose pilot (``run(scale, k)`` -> samples) has the
    smallest mean ACT."""
    history = []
    for k, s in enumerate(grid):
        history.append((float(s), _mean_act(np.asarray(run(float(s), k)))))
    best = min(history, key=lambda h: h[1])
    return TuneResult(best[0], None, math.isfinite(best[1]), history)


def _pilot_config(seed: int, k: int, iters: int, algorithm: str, transform: str) -> RunConfig:
    return RunConfig(algorithm=algorithm, n_iterations=iters, burn_in=0, seed=derived_seed(seed, 7001, k), transform=transform)


def tune_scale(
    target,
    x0,
    kind: str = "block",
    window=(0.25, 0.35),
    budget: int = PILOT_BUDGET,
    pilot_iters: int = PILOT_ITERATIONS,
    seed: int = 0,
    scale0=None,
    family: str = "spherical-gaussian",
    shape=None,
    transform: str = "none",
    families=None,
    transforms=None,
    grid=None,
    center=None,
    record=None,
) -> TuneResult:
    """Tune a proposal scale with pilot chains started at ``x0``.

    kind:
      "block" - single scale of a block walk, acceptance in ``window``;
      "mwg"   - one scale per component of a within-Gibbs sweep, each
                component's acceptance in ``window``;
      "act"   - block walk (any family, incl. Cauchy) or, when ``center``
                is given, independence sampler: scale from ``grid``
                minimising the mean pilot ACT.
    """
    target = as_target(target)
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if kind == "block":
        def pilot(s, k):
            cfg = _pilot_config(seed, k, pilot_iters, "Blk", transform)
            out = rwm_block(target, ProposalSpec(family, s, shape), cfg, x0)
            return float(out.acceptance_rate(False)[0])

        s0 = scale0 if scale0 is not None else 2.38 / math.sqrt(target.dim)
        return bisect_scale(pilot, window, s0, budget)

    if kind == "mwg":
        def pilot(s, k):
            cfg = _pilot_config(seed, k, pilot_iters, "MwG", transform)
            out = mwg_sweep(target, s, cfg, x0, families=families, transforms=transforms, record=record)
            return out.acceptance_rate(False)

        s0 = np.broadcast_to(np.asarray(scale0 if scale0 is not None else 2.4, dtype=float), (target.dim,))
        return bisect_scales(pilot, window, s0, budget)

    if kind == "act":
        if grid is None:
            raise ValueError("ACT tuning needs a grid of scales")

        def run(s, k):
            cfg = _pilot_config(seed, k, pilot_iters, "IndShp" if center is not None else "BlkShpCau", transform)
            if center is not None:
                return independence_sampler_run(target, shape, s, center, cfg, x0).samples
            return rwm_block(target, ProposalSpec(family, s, shape), cfg, x0).samples

        return minimize_act(run, grid)

    raise ValueError(f"unknown tuning kind {kind!r}")


def tune_mwg_component_by_act(
    target,
    x0,
    scales,
    component: int,
    grid,
    families,
    transforms,
    seed: int = 0,
    pilot_iters: int = 1000,
    record=None,
) -> TuneResult:
    """Grid-search one component's scale of a within-Gibbs sweep by pilot ACT,
    holding the other scales fixed."""
    target = as_target(target)
    base = np.array(scales, dtype=float)

    def run(s, k):
        sc = base.copy()
        sc[component] = s
        cfg = _pilot_config(seed, k, pilot_iters, "MwG", "none")
        return mwg_sweep(target, sc, cfg, x0, families=families, transforms=transforms, record=record).samples

    return minimize_act(run, grid)


__all__ = [
    "TuneResult",
    "bisect_scale",
    "bisect_scales",
    "minimize_act",
    "tune_scale",
    "tune_mwg_component_by_act",
    "PILOT_ITERATIONS",
    "PILOT_BUDGET",
]
