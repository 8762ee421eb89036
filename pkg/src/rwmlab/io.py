"""Plain-text file formats: chain CSVs, adaptation sidecars and
``key=value`` config files.

Floats are written with ``repr`` so a value read back is bit-identical.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .samplers import ChainOutput


def _f(v) -> str:
    return repr(float(v))


def write_chain(path, out: ChainOutput) -> None:
    """Header ``iter,<names>,logpost,accepted_blocks``; one row per iteration,
    ``accepted_blocks`` counting the blocks accepted in that iteration."""
    acc = out.accepted.sum(axis=1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", *out.names, "logpost", "accepted_blocks"])
        for i in range(out.n_iterations):
            w.writerow([i + 1, *(_f(v) for v in out.samples[i]), _f(out.logpost[i]), int(acc[i])])


def read_chain(path):
    """Returns (names, samples, logpost, accepted_blocks)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["iter"] or rows[0][-2:] != ["logpost", "accepted_blocks"]:
        raise ValueError(f"{path} is not a chain file")
    names = rows[0][1:-2]
    body = rows[1:]
    samples = np.array([[float(v) for v in r[1:-2]] for r in body]).reshape(len(body), len(names))
    logpost = np.array([float(r[-2]) for r in body])
    acc = np.array([int(r[-1]) for r in body])
    return names, samples, logpost, acc


def write_adaptation(path, out: ChainOutput) -> None:
    """Sidecar ``iter,m,sigma_snapshot_id``; the id is the most recent
    covariance snapshot (-1 before the first)."""
    if out.adapt_m is None:
        raise ValueError("chain has no adaptation trace")
    snap_iters = [it for it, _ in out.sigma_snapshots]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "m", "sigma_snapshot_id"])
        sid = -1
        for i, m in enumerate(out.adapt_m, start=1):
            while sid + 1 < len(snap_iters) and snap_iters[sid + 1] <= i:
                sid += 1
            w.writerow([i, _f(m), sid])


def write_snapshots(path, out: ChainOutput) -> None:
    """One row per snapshot: id, iteration, then the covariance row-major."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        dim = out.samples.shape[1]
        w.writerow(["id", "iter", *(f"s{i + 1}{j + 1}" for i in range(dim) for j in range(dim))])
        for k, (it, cov) in enumerate(out.sigma_snapshots):
            w.writerow([k, it, *(_f(v) for v in np.asarray(cov).reshape(-1))])


def write_kv(path, items: dict) -> None:
    lines = []
    for k, v in items.items():
        if "=" in str(k) or "\n" in str(k) + str(v):
            raise ValueError(f"cannot store {k!r}={v!r} as key=value")
        lines.append(f"{k}={format_value(v)}\n")
    Path(path).write_text("".join(lines))


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(format_value(x) for x in v)
    return str(v)


def read_kv(path) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{n}: expected key=value, got {line!r}")
        out[key.strip()] = val.strip()
    return out
