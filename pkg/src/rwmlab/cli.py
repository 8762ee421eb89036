"""Command-line entry point: ``rwmlab {simulate,run,table,qq,curves}``.

Exit status is 0 on success, 2 on a usage error and 1 when a command
fails at run time.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .datasets import DATASETS, get_dataset, parse_inline_spec
from .harness import (
    ExperimentManifest,
    aggregate_reports,
    efficiency_curve,
    profile_lengths,
    qq_from_files,
    run_experiment,
    write_curve,
)
from .mmpp import simulate, write_events, write_hidden_path
from .samplers import ALGORITHMS


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_common(p, seed_default=None):
    p.add_argument("--seed", type=int, default=seed_default, help="base seed (64-bit integer)")
    p.add_argument("--out", help="output file or directory")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rwmlab", description="Random walk Metropolis experiments on Markov modulated Poisson processes.")
    ap.add_argument("-q", "--quiet", action="store_true", help="only report errors")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate an events file")
    p.add_argument("dataset", help=f"one of {', '.join(DATASETS)} or an inline spec 'psi=10,30;q=1,1;t_obs=100'")
    _add_common(p)
    p.add_argument("--hidden", help="also write the hidden state path here")

    p = sub.add_parser("run", help="run a manifest of tuned chains")
    p.add_argument("manifest", nargs="?", help="key=value manifest file; flags below override it")
    p.add_argument("--dataset")
    p.add_argument("--algorithms", help=f"comma-separated subset of {','.join(ALGORITHMS)}")
    p.add_argument("--replicates", type=int)
    p.add_argument("--events", help="events file (default: simulate the dataset)")
    p.add_argument("--profile", choices=("desk", "paper"))
    p.add_argument("--iters", type=int)
    p.add_argument("--burnin", type=int)
    _add_common(p)

    p = sub.add_parser("table", help="aggregate run reports into an ACT table")
    p.add_argument("report_dir")
    p.add_argument("--replicates", type=int)
    p.add_argument("--out", help="also write the table as CSV")

    p = sub.add_parser("qq", help="QQ table of a chain against a reference chain")
    p.add_argument("sample")
    p.add_argument("reference")
    p.add_argument("--burnin", type=int, default=0)
    p.add_argument("--quantiles", type=int, default=99)
    p.add_argument("--resamples", type=int, default=200)
    _add_common(p, seed_default=0)

    p = sub.add_parser("curves", help="diffusion speed and acceptance against mu")
    p.add_argument("--j", type=float, default=1.0, help="roughness")
    p.add_argument("--mu-min", type=float, default=0.1)
    p.add_argument("--mu-max", type=float, default=6.0)
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--out")
    return ap


def _manifest_from_args(a) -> ExperimentManifest:
    raw = {}
    if a.manifest:
        path = Path(a.manifest)
        if not path.exists():
            raise UsageError(f"manifest {path} not found")
        raw = ExperimentManifest.read(path).to_dict()
    if a.profile:
        raw["iterations"], raw["burn_in"] = profile_lengths(a.profile)
    overrides = {
        "dataset": a.dataset,
        "algorithms": a.algorithms,
        "replicates": a.replicates,
        "events": a.events,
        "iterations": a.iters,
        "burn_in": a.burnin,
        "seed": a.seed,
        "out_dir": a.out,
    }
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if "dataset" not in raw or "algorithms" not in raw:
        raise UsageError("run needs a manifest or --dataset and --algorithms")
    try:
        return ExperimentManifest.from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_simulate(a) -> int:
    try:
        spec = get_dataset(a.dataset) if "=" not in a.dataset else parse_inline_spec(a.dataset)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc).strip("'\"")) from exc
    seed = spec.seed if a.seed is None else a.seed
    out = Path(a.out or f"{spec.name}_seed{seed}.events")
    res = simulate(spec.params(), spec.t_obs, seed, return_path=a.hidden is not None)
    data, path = (res if a.hidden is not None else (res, None))
    write_events(out, data)
    if path is not None:
        write_hidden_path(a.hidden, path)
    mean_rate = spec.expected_events() / spec.t_obs
    print(f"{out}: {data.n} events over {spec.t_obs:g}s; stationary mean intensity {mean_rate:.4g}")
    return 0


def cmd_run(a) -> int:
    m = _manifest_from_args(a)
    dirs = run_experiment(m)
    print(f"{len(dirs)} runs written under {m.out_dir}")
    return 0


def cmd_table(a) -> int:
    t = aggregate_reports(a.report_dir, a.replicates)
    sys.stdout.write(t.format())
    if a.out:
        t.to_csv(a.out)
    return 0


def cmd_qq(a) -> int:
    for p in (a.sample, a.reference):
        if not Path(p).exists():
            raise UsageError(f"chain file {p} not found")
    t = qq_from_files(a.sample, a.reference, a.burnin, a.quantiles, a.resamples, a.seed)
    out = a.out or "qq.csv"
    t.to_csv(out)
    inside = t.inside()
    for name, row in zip(t.names, inside):
        print(f"{name}: {row.mean():.0%} of quantiles inside the band")
    return 0


def cmd_curves(a) -> int:
    try:
        pts = efficiency_curve(a.j, a.mu_min, a.mu_max, a.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if a.out:
        write_curve(a.out, pts)
    else:
        write_curve(sys.stdout, pts)
    return 0


COMMANDS = {"simulate": cmd_simulate, "run": cmd_run, "table": cmd_table, "qq": cmd_qq, "curves": cmd_curves}


def main(argv=None) -> int:
    try:
        a = build_parser().parse_args(argv)
        if a.command is None:
            raise UsageError("rwmlab: choose a command: " + ", ".join(COMMANDS))
        logging.basicConfig(level=logging.ERROR if a.quiet else logging.INFO, format="%(message)s")
        return COMMANDS[a.command](a)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
