"""Experiment orchestration: manifests, tuned runs of every algorithm on an
MMPP posterior, aggregated ACT tables, QQ tables and efficiency curves.

Layout of an output directory::

    manifest.txt
    events.txt                      (when the data were simulated)
    <algorithm>/rep<r>/chain.csv
    <algorithm>/rep<r>/report.csv
    <algorithm>/rep<r>/run.txt
    BlkAdpMul/rep<r>/adapt.csv, snapshots.csv

Replicate r runs with seed ``seed + r``. Everything written is a
deterministic function of the manifest and the input events.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .datasets import DATASETS, DatasetSpec, get_dataset, parse_inline_spec
from .diagnostics import DiagnosticsReport, QQTable, diagnose, qq_compare
from .io import read_chain, read_kv, write_adaptation, write_chain, write_kv, write_snapshots
from .linalg import EfficiencyCurvePoint, diffusion_speed
from .mmpp import (
    EventData,
    MmppPosterior,
    PriorSpec,
    ReparamTarget,
    canonicalize,
    n_states,
    param_names,
    read_events,
    to_reparam,
    write_events,
)
from .samplers import (
    ALGORITHMS,
    AdaptConstants,
    ChainOutput,
    ProposalSpec,
    RunConfig,
    adaptive_multiplicative_run,
    derived_seed,
    independence_sampler_run,
    mwg_reparam_run,
    mwg_sweep,
    rwm_block,
    shape_factor,
    tune_scale,
)
from .samplers.tuning import tune_mwg_component_by_act

log = logging.getLogger(__name__)

PROFILES = {"desk": (5500, 500), "paper": (11000, 1000)}
SHAPE_ALGORITHMS = ("BlkShp", "BlkShpCau", "BlkShpMul", "IndShp")
REPARAM_ALGORITHMS = ("MwGRep", "MwGRepCau")
BLOCK_WINDOW = (0.25, 0.35)
MWG_WINDOW = (0.40, 0.45)
CAUCHY_PILOT_ITERATIONS = 1000
_CAUCHY_GRID = (0.1, 0.2, 0.35, 0.5, 0.75, 1.0)
_IND_GRID = (0.5, 0.75, 1.0, 1.5, 2.0, 3.0)


class OrchestrationError(RuntimeError):
    """An experiment cannot run as specified (e.g. missing shape source)."""


# ---------------------------------------------------------------- manifest


@dataclass(frozen=True)
class ExperimentManifest:
    """What to run. ``dataset`` is a registry name or an inline spec
    (``psi=..;q=..;t_obs=..``). Without ``events`` the data are simulated
    with ``data_seed`` (default: the dataset's own seed). The shape source
    for shaped algorithms is rows ``[shape_start, shape_start + shape_length)``
    of the Blk chain of the same replicate; ``shape_start`` defaults to the
    burn-in."""

    dataset: str
    algorithms: tuple
    replicates: int = 3
    iterations: int = PROFILES["desk"][0]
    burn_in: int = PROFILES["desk"][1]
    seed: int = 0
    out_dir: str = "out"
    events: Optional[str] = None
    data_seed: Optional[int] = None
    shape_start: Optional[int] = None
    shape_length: int = 1000

    def __post_init__(self):
        algos = tuple(self.algorithms)
        object.__setattr__(self, "algorithms", algos)
        if not algos:
            raise ValueError("manifest lists no algorithms")
        bad = [a for a in algos if a not in ALGORITHMS]
        if bad:
            raise ValueError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if len(set(algos)) != len(algos):
            raise ValueError("algorithms listed more than once")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if not self.iterations > self.burn_in >= 0:
            raise ValueError(f"need iterations > burn_in >= 0, got {self.iterations} and {self.burn_in}")
        if self.shape_length < 2:
            raise ValueError("shape window needs at least two rows")
        if self.shape_begin + self.shape_length > self.iterations:
            raise ValueError("shape window runs past the end of the chain")
        self.dataset_spec()

    @property
    def shape_begin(self) -> int:
        return self.burn_in if self.shape_start is None else self.shape_start

    @property
    def seeds(self) -> list:
        return [self.seed + r for r in range(self.replicates)]

    def dataset_spec(self) -> DatasetSpec:
        if self.dataset in DATASETS:
            return get_dataset(self.dataset)
        if "=" in self.dataset:
            return parse_inline_spec(self.dataset)
        raise ValueError(f"unknown dataset {self.dataset!r}; known: {', '.join(DATASETS)} or an inline spec")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                out[f.name] = v
        return out

    def write(self, path) -> None:
        write_kv(path, self.to_dict())

    @classmethod
    def read(cls, path) -> "ExperimentManifest":
        return cls.from_dict(read_kv(path))

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentManifest":
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ValueError(f"unknown manifest keys {sorted(extra)}")
        kw = dict(raw)
        if isinstance(kw.get("algorithms"), str):
            kw["algorithms"] = tuple(a.strip() for a in kw["algorithms"].split(",") if a.strip())
        for k in ("replicates", "iterations", "burn_in", "seed", "data_seed", "shape_start", "shape_length"):
            if k in kw and isinstance(kw[k], str):
                kw[k] = int(kw[k])
        return cls(**kw)


def profile_lengths(profile: str) -> tuple:
    try:
        return PROFILES[profile]
    except KeyError:
        raise ValueError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}") from None


# ------------------------------------------------------------- single runs


@dataclass
class ShapeSource:
    """Posterior summaries from a window of a Blk chain."""

    mean: np.ndarray
    cov: np.ndarray
    log_cov: np.ndarray
    window: tuple

    @classmethod
    def from_samples(cls, samples: np.ndarray, start: int, length: int) -> "ShapeSource":
        w = np.asarray(samples[start:start + length], dtype=float)
        if w.shape[0] < length:
            raise OrchestrationError(
                f"Blk chain has {samples.shape[0]} rows; the shape window needs rows {start}..{start + length}"
            )
        return cls(w.mean(axis=0), np.cov(w, rowvar=False), np.cov(np.log(w), rowvar=False), (start, start + length))


@dataclass
class RunResult:
    chain: ChainOutput
    settings: dict = field(default_factory=dict)


def _tuning_seed(seed: int, algorithm: str) -> int:
    return derived_seed(seed, 5003, ALGORITHMS.index(algorithm))


def _record(out_settings: dict, tr) -> None:
    out_settings["tuned_scale"] = tr.scale
    out_settings["tuning_converged"] = tr.converged
    if tr.acceptance is not None:
        out_settings["pilot_acceptance"] = tr.acceptance


def run_algorithm(
    algorithm: str,
    posterior: MmppPosterior,
    x0,
    config: RunConfig,
    shape: Optional[ShapeSource] = None,
) -> RunResult:
    """Tune (where the algorithm calls for it) and run one chain.

    Samples are recorded under canonical labelling (psi ascending).
    """
    dim = posterior.dim
    x0 = np.asarray(x0, dtype=float)
    ts = _tuning_seed(config.seed, algorithm)
    settings: dict = {}
    block0 = 2.38 / math.sqrt(dim)

    if algorithm in SHAPE_ALGORITHMS and shape is None:
        raise OrchestrationError(f"{algorithm} needs a shape estimate from a Blk run; run Blk first")

    if algorithm == "Blk":
        tr = tune_scale(posterior, x0, "block", BLOCK_WINDOW, seed=ts)
        _record(settings, tr)
        out = rwm_block(posterior, ProposalSpec("spherical-gaussian", tr.scale), config, x0, record=canonicalize)

    elif algorithm == "MwG":
        tr = tune_scale(posterior, x0, "mwg", MWG_WINDOW, seed=ts, scale0=0.25 * x0)
        _record(settings, tr)
        out = mwg_sweep(posterior, tr.scale, config, x0, record=canonicalize)

    elif algorithm in ("BlkShp", "BlkShpCau"):
        L = shape_factor(shape.cov)
        if algorithm == "BlkShp":
            tr = tune_scale(posterior, x0, "block", BLOCK_WINDOW, seed=ts, family="shaped-gaussian", shape=L)
            family = "shaped-gaussian"
        else:
            tr = tune_scale(
                posterior, x0, "act", seed=ts, family="shaped-cauchy", shape=L,
                grid=[g * block0 for g in _CAUCHY_GRID], pilot_iters=CAUCHY_PILOT_ITERATIONS,
            )
            family = "shaped-cauchy"
        _record(settings, tr)
        out = rwm_block(posterior, ProposalSpec(family, tr.scale, L), config, x0, record=canonicalize)

    elif algorithm == "BlkShpMul":
        L = shape_factor(shape.log_cov)
        tr = tune_scale(posterior, x0, "block", BLOCK_WINDOW, seed=ts, family="shaped-gaussian", shape=L, transform="log")
        _record(settings, tr)
        cfg = RunConfig(config.algorithm, config.n_iterations, config.burn_in, config.seed, "log", config.adapt)
        out = rwm_block(posterior, ProposalSpec("shaped-gaussian", tr.scale, L), cfg, x0, record=canonicalize)

    elif algorithm == "BlkAdpMul":
        tr = tune_scale(posterior, x0, "block", BLOCK_WINDOW, seed=ts, transform="log")
        _record(settings, tr)
        lambda0 = tr.scale * math.sqrt(dim)
        adapt = AdaptConstants() if n_states(dim) <= 2 else AdaptConstants.variant_b()
        settings["lambda0"] = lambda0
        settings["adapt_gate"] = adapt.gate
        settings["adapt_accept_mult"] = adapt.accept_mult
        cfg = RunConfig(config.algorithm, config.n_iterations, config.burn_in, config.seed, "log", adapt)
        out = adaptive_multiplicative_run(posterior, cfg, x0, lambda0, record=canonicalize)
        settings["final_m"] = float(out.adapt_m[-1])

    elif algorithm in REPARAM_ALGORITHMS:
        if posterior.d != 2:
            raise OrchestrationError(f"{algorithm} is defined for two-state models only (this one has {posterior.d})")
        rt = ReparamTarget(posterior)
        z0 = to_reparam(canonicalize(x0)).as_array()
        transforms = ["log", "log", "log", "none"]
        s0 = np.array([0.1, 0.3, 0.3, 0.1])
        tr = tune_scale(rt, z0, "mwg", MWG_WINDOW, seed=ts, scale0=s0, transforms=transforms)
        scales = np.array(tr.scale, dtype=float)
        _record(settings, tr)
        beta_family = "gaussian"
        if algorithm == "MwGRepCau":
            beta_family = "cauchy"
            families = ["gaussian"] * 3 + ["cauchy"]
            trb = tune_mwg_component_by_act(
                rt, z0, scales, 3, [g * scales[3] for g in _CAUCHY_GRID], families, transforms,
                seed=derived_seed(ts, 1), pilot_iters=CAUCHY_PILOT_ITERATIONS,
            )
            scales[3] = trb.scale
            settings["beta_scale"] = trb.scale
        out = mwg_reparam_run(rt, config, z0, scales, beta_family=beta_family, record=lambda z: canonicalize(rt.to_original(z)), names=posterior.names)
        settings["scales"] = scales

    elif algorithm == "IndShp":
        L = shape_factor(shape.cov)
        tr = tune_scale(
            posterior, x0, "act", seed=ts, shape=L, center=shape.mean, grid=list(_IND_GRID),
            pilot_iters=CAUCHY_PILOT_ITERATIONS,
        )
        _record(settings, tr)
        settings["center"] = shape.mean
        out = independence_sampler_run(posterior, L, tr.scale, shape.mean, config, x0, record=canonicalize)

    else:  # pragma: no cover - guarded by RunConfig
        raise ValueError(f"unknown algorithm {algorithm!r}")

    if shape is not None and algorithm in SHAPE_ALGORITHMS:
        settings["shape_window"] = list(shape.window)
    return RunResult(out, settings)


def report_for(chain: ChainOutput, d: int) -> DiagnosticsReport:
    """Diagnostics with psi raw and the q's on the log scale."""
    return diagnose(chain, log_columns=range(d, d * d), names=param_names(d))


# -------------------------------------------------------------- experiments


def run_dir(out_dir, algorithm: str, replicate: int) -> Path:
    return Path(out_dir) / algorithm / f"rep{replicate}"


def load_events(manifest: ExperimentManifest) -> EventData:
    out = Path(manifest.out_dir)
    if manifest.events is not None:
        path = Path(manifest.events)
        if not path.exists():
            raise OrchestrationError(f"events file {path} not found")
        return read_events(path)
    spec = manifest.dataset_spec()
    data = spec.simulate(manifest.data_seed)
    write_events(out / "events.txt", data)
    return data


def run_experiment(manifest: ExperimentManifest) -> list:
    """Run every (algorithm, replicate) pair; returns the run directories.

    Blk runs first within each replicate because the shaped algorithms
    take their shape from its chain. A shaped algorithm without Blk in the
    manifest reuses ``<out>/Blk/rep<r>/chain.csv`` from an earlier run.
    """
    spec = manifest.dataset_spec()
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest.write(out / "manifest.txt")
    data = load_events(manifest)
    truth = spec.truth()
    posterior = MmppPosterior(data, PriorSpec(truth))
    d = spec.d

    order = sorted(manifest.algorithms, key=lambda a: a != "Blk")
    dirs = []
    for r, seed in enumerate(manifest.seeds):
        shape = None
        for algo in order:
            if algo in SHAPE_ALGORITHMS and shape is None:
                shape = _shape_from_disk(out, r, manifest)
            cfg = RunConfig(algo, manifest.iterations, manifest.burn_in, seed)
            log.info("running %s replicate %d (seed %d)", algo, r, seed)
            res = run_algorithm(algo, posterior, truth, cfg, shape)
            rd = _write_run(out, algo, r, seed, manifest, res, d)
            dirs.append(rd)
            if algo == "Blk":
                shape = ShapeSource.from_samples(res.chain.samples, manifest.shape_begin, manifest.shape_length)
    return dirs


def _shape_from_disk(out: Path, r: int, manifest: ExperimentManifest) -> ShapeSource:
    path = run_dir(out, "Blk", r) / "chain.csv"
    if not path.exists():
        raise OrchestrationError(
            f"no Blk chain at {path}: shaped algorithms take their shape from a Blk run; "
            "add Blk to the manifest or run it first"
        )
    _, samples, _, _ = read_chain(path)
    return ShapeSource.from_samples(samples, manifest.shape_begin, manifest.shape_length)


def _write_run(out: Path, algo: str, r: int, seed: int, manifest, res: RunResult, d: int) -> Path:
    rd = run_dir(out, algo, r)
    rd.mkdir(parents=True, exist_ok=True)
    chain = res.chain
    write_chain(rd / "chain.csv", chain)
    rep = report_for(chain, d)
    rep.to_csv(rd / "report.csv")
    info = {
        "algorithm": algo,
        "replicate": r,
        "seed": seed,
        "iterations": manifest.iterations,
        "burn_in": manifest.burn_in,
        "evals_per_iteration": chain.evals_per_iteration,
        "acceptance": chain.acceptance_rate(),
        "msejd": rep.msejd,
    }
    info.update(res.settings)
    write_kv(rd / "run.txt", info)
    if chain.adapt_m is not None:
        write_adaptation(rd / "adapt.csv", chain)
        write_snapshots(rd / "snapshots.csv", chain)
    return rd


# ------------------------------------------------------------------ tables


_REP_RE = re.compile(r"rep(\d+)$")


@dataclass
class AggregateTable:
    params: list
    algorithms: list
    replicates: int
    per_replicate: dict  # algorithm -> list (one entry per replicate, None if absent)
    multipliers: dict

    def mean(self, algorithm: str) -> Optional[np.ndarray]:
        vals = [v for v in self.per_replicate[algorithm] if v is not None]
        if not vals:
            return None
        return np.mean(vals, axis=0)

    def format(self) -> str:
        w = max(10, *(len(p) + 2 for p in self.params))
        head = f"{'algorithm':<12}" + "".join(f"{p:>{w}}" for p in self.params)
        lines = ["Mean CPU-adjusted ACT over replicates", head]
        notes = []
        for a in self.algorithms:
            m = self.mean(a)
            tag = a + ("*" if self.multipliers.get(a, 1.0) > 1 else "")
            cells = "".join(f"{'absent':>{w}}" if m is None else f"{v:>{w}.1f}" for v in (m if m is not None else [None] * len(self.params)))
            lines.append(f"{tag:<12}{cells}")
            if self.multipliers.get(a, 1.0) > 1:
                notes.append(f"* {a}: ACT multiplied by {self.multipliers[a]:g}, its likelihood evaluations per iteration")
        lines += notes
        lines += ["", "Per-replicate CPU-adjusted ACT", f"{'algorithm':<12}{'rep':>5}" + "".join(f"{p:>{w}}" for p in self.params)]
        for a in self.algorithms:
            for r, v in enumerate(self.per_replicate[a]):
                cells = "".join(f"{'absent':>{w}}" for _ in self.params) if v is None else "".join(f"{x:>{w}.1f}" for x in v)
                lines.append(f"{a:<12}{r:>5}{cells}")
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["algorithm", "replicate", *self.params])
            for a in self.algorithms:
                m = self.mean(a)
                wr.writerow([a, "mean", *(["absent"] * len(self.params) if m is None else [repr(float(x)) for x in m])])
                for r, v in enumerate(self.per_replicate[a]):
                    wr.writerow([a, r, *(["absent"] * len(self.params) if v is None else [repr(float(x)) for x in v])])


def aggregate_reports(report_dir, replicates: Optional[int] = None) -> AggregateTable:
    """Collect ``<dir>/<algorithm>/rep<r>/report.csv`` into a table.

    The replicate count comes from ``replicates``, else the directory's
    manifest, else the highest replicate index found. Missing reports are
    kept as absent cells.
    """
    root = Path(report_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"{root} is not a directory")
    found: dict = {}
    for algo in ALGORITHMS:
        adir = root / algo
        if not adir.is_dir():
            continue
        for sub in sorted(adir.iterdir()):
            m = _REP_RE.match(sub.name)
            if m and (sub / "report.csv").exists():
                found.setdefault(algo, {})[int(m.group(1))] = DiagnosticsReport.from_csv(sub / "report.csv")
    if not found:
        raise FileNotFoundError(f"no reports under {root}")
    if replicates is None and (root / "manifest.txt").exists():
        replicates = int(read_kv(root / "manifest.txt").get("replicates", 0)) or None
    if replicates is None:
        replicates = 1 + max(max(reps) for reps in found.values())
    params = None
    per_rep, mult = {}, {}
    for algo, reps in found.items():
        row = []
        for r in range(replicates):
            rep = reps.get(r)
            if rep is None:
                row.append(None)
                continue
            if params is None:
                params = list(rep.names)
            elif list(rep.names) != params:
                raise ValueError(f"{algo} rep{r} reports parameters {rep.names}, expected {params}")
            row.append(np.asarray(rep.act_cpu, dtype=float))
            mult[algo] = round(rep.evals_per_iteration, 6)
        per_rep[algo] = row
    return AggregateTable(params or [], list(found), replicates, per_rep, mult)


# -------------------------------------------------------------- QQ, curves


def qq_from_files(sample_path, reference_path, burn_in: int = 0, n_quantiles: int = 99, n_resamples: int = 200, seed: int = 0) -> QQTable:
    """QQ table of a chain file against a reference chain file, parameters
    matched by name, the first ``burn_in`` rows of each dropped."""
    names, s, _, _ = read_chain(sample_path)
    rnames, r, _, _ = read_chain(reference_path)
    missing = [n for n in names if n not in rnames]
    if missing:
        raise ValueError(f"reference chain lacks parameters {missing}")
    idx = [rnames.index(n) for n in names]
    if burn_in >= min(s.shape[0], r.shape[0]):
        raise ValueError("burn-in removes the whole chain")
    return qq_compare(s[burn_in:], r[burn_in:, idx], n_quantiles, n_resamples, seed=seed, names=names)


def efficiency_curve(j: float = 1.0, mu_min: float = 0.1, mu_max: float = 6.0, n: int = 60) -> list:
    if not 0 < mu_min < mu_max:
        raise ValueError("need 0 < mu_min < mu_max")
    if n < 2:
        raise ValueError("need at least two grid points")
    return [diffusion_speed(float(mu), j) for mu in np.linspace(mu_min, mu_max, n)]


def write_curve(path_or_fh, points: list) -> None:
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mu", "speed", "acceptance"])
        for p in points:
            w.writerow([repr(p.mu), repr(p.speed), repr(p.acceptance)])

    if hasattr(path_or_fh, "write"):
        _write(path_or_fh)
    else:
        with open(path_or_fh, "w", newline="") as fh:
            _write(fh)


__all__ = [
    "PROFILES",
    "AggregateTable",
    "EfficiencyCurvePoint",
    "ExperimentManifest",
    "OrchestrationError",
    "RunResult",
    "ShapeSource",
    "aggregate_reports",
    "efficiency_curve",
    "profile_lengths",
    "qq_from_files",
    "report_for",
    "run_algorithm",
    "run_dir",
    "run_experiment",
    "write_curve",
]
