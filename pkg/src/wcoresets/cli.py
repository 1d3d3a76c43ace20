"""Command-line front end.

Commands::

    wcoresets build       build one coreset -> coreset.csv, trace.json, manifest.json
    wcoresets eval        compare a coreset with a dataset -> report.csv, report.json
    wcoresets experiment  method x size x repeat grid on a task -> report.csv, report.json, manifest.json
    wcoresets check       fast invariant suite, one "CHECK <name> PASS|FAIL" line per check
    wcoresets replay      rerun the command recorded in a manifest.json

``--input`` is a CSV path, ``-`` for a CSV stream on stdin (build only), or the
name of a synthetic distribution or dataset. Exit codes: 0 success, 1 failed
check, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .experiments import (
    METHODS,
    SYNTHETIC_DATASETS,
    SYNTHETIC_SPECS,
    TASKS,
    Dataset,
    FixedData,
    TaskSpec,
    median_kernel,
    repeat_seed,
    run_experiment,
)
from .exact_ot import MAX_SUPPORT, exact_wp
from .io import read_coreset_csv, read_json, sha256_array, sha256_file, write_coreset_csv, write_json
from .measures import (
    DataError,
    EmpiricalSampler,
    PushforwardSampler,
    Sampler,
    StreamSampler,
    SyntheticSampler,
    load_csv,
    make_rng,
    standardize,
    stream_id,
)
from .metrics import KernelSpec, coreset_condition_check, mmd
from .semidiscrete import SiteSet, stochastic_wp
from .solvers import SolverConfig, SolverState, build_coreset
from .tasks import kmeans_task, logreg_posterior_task, svm_task

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

DEFAULT_DATASET = {"kmeans": "cluster-mixture", "svm": "svm-blobs", "logreg": "logreg5d"}
#: synthetic sources are summarised through this many draws when --standardize needs moments
PILOT_DRAWS = 10_000
#: eval falls back to Monte Carlo estimates above the exact solver's size guard
EVAL_SAMPLES = 100_000
MMD_POINTS = 2000

log = logging.getLogger("wcoresets")


class ConfigError(Exception):
    """Invalid command-line configuration (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _int_list(text: str) -> list:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _eta(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--eta must be a number or 'auto', got {text!r}") from None


def _add_input(p, stdin_ok: bool):
    where = "CSV path, '-' for stdin, or a synthetic name" if stdin_ok else "CSV path or a synthetic name"
    p.add_argument("--input", required=True, help=f"{where}: {', '.join(_synthetic_names())}")
    p.add_argument("--labels-col", type=int, default=None, help="0-based column holding integer labels")
    p.add_argument("--header", action="store_true", help="skip the first CSV row")


def _add_solver(p):
    p.add_argument("--minibatch", type=int, default=None, help="minibatch size m (default max(256, 4n))")
    p.add_argument("--iters", type=int, default=100, help="outer iterations")
    p.add_argument("--dual-iters", type=int, default=200, help="dual ascent steps per outer iteration")
    p.add_argument("--step", type=float, default=1.0, help="site step size gamma")
    p.add_argument("--eta", type=_eta, default=None, help="entropic regularization for sd ('auto' by default)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wcoresets", description="Wasserstein measure coresets.")
    parser.add_argument("--version", action="version", version=f"wcoresets {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="construct one coreset")
    _add_input(b, stdin_ok=True)
    b.add_argument("--metric", choices=("w1", "w2", "sd"), default="w2")
    b.add_argument("--n", type=int, required=True, help="coreset size")
    _add_solver(b)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--standardize", action="store_true", help="z-score columns; output stays in input units")
    b.add_argument("--checkpoint", default=None, help="state file written every iteration and resumed from")
    b.add_argument("--out", required=True, help="output directory")

    e = sub.add_parser("eval", help="compare a coreset with a dataset")
    e.add_argument("--coreset", required=True, help="coreset CSV (d columns, optional trailing label)")
    _add_input(e, stdin_ok=False)
    e.add_argument("--p", type=int, choices=(1, 2), action="append", default=None,
                   help="transport order; repeat for both (default 1 and 2)")
    e.add_argument("--samples", type=int, default=EVAL_SAMPLES, help="Monte Carlo samples for large inputs")
    e.add_argument("--epsilon", type=float, default=None, help="run the coreset condition check at this epsilon")
    e.add_argument("--family", default="lip1", help="lip1, sobolev:M or rkhs[:bandwidth]")
    e.add_argument("--task", choices=TASKS, default=None, help="also report a downstream task metric")
    e.add_argument("--k", type=int, default=10, help="clusters for the kmeans task")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)

    x = sub.add_parser("experiment", help="method x size x repeat grid on a downstream task")
    x.add_argument("--task", choices=TASKS, required=True)
    x.add_argument("--input", default=None, help="CSV path or synthetic dataset (default depends on task)")
    x.add_argument("--labels-col", type=int, default=None)
    x.add_argument("--header", action="store_true")
    x.add_argument("--methods", default="w1,w2,uniform", help=f"comma-separated subset of {','.join(METHODS)}")
    x.add_argument("--sizes", type=_int_list, required=True)
    x.add_argument("--repeats", type=int, default=20)
    x.add_argument("--k", type=int, default=10)
    _add_solver(x)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--standardize", action="store_true")
    x.add_argument("--save-coresets", action="store_true", help="also write every summary under coresets/")
    x.add_argument("--out", required=True)

    c = sub.add_parser("check", help="fast invariant suite")
    c.add_argument("--coreset", default=None, help="also validate this coreset file")
    c.add_argument("--input", default=None, help="dataset whose dimension the coreset must match")
    c.add_argument("--labels-col", type=int, default=None)
    c.add_argument("--header", action="store_true")

    r = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    r.add_argument("manifest")
    r.add_argument("--out", default=None, help="write to this directory instead of the recorded one")
    return parser


def _synthetic_names():
    return sorted(SYNTHETIC_SPECS) + sorted(SYNTHETIC_DATASETS)


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------


def _load_source(args, seed: int, allow_stream: bool):
    """Resolve ``--input`` to a Sampler or a Dataset. Data hashes go in the manifest."""
    name = args.input
    if name == "-":
        if not allow_stream:
            raise ConfigError("stdin input is only supported by build")
        return StreamSampler(sys.stdin, label_column=args.labels_col)
    if name in SYNTHETIC_SPECS:
        return SyntheticSampler(SYNTHETIC_SPECS[name](), seed, stream_id("data"))
    if name in SYNTHETIC_DATASETS:
        return SYNTHETIC_DATASETS[name](seed)
    if not Path(name).is_file():
        raise ConfigError(f"--input {name!r} is neither a file nor one of {', '.join(_synthetic_names())}")
    pts, labels = load_csv(name, has_header=args.header, label_column=args.labels_col)
    return Dataset(pts.points, labels, Path(name).name)


def _column_moments(source) -> tuple:
    if isinstance(source, Dataset):
        return standardize(source.X)[1:]
    pilot = source.spawn(stream_id("pilot")).draw(PILOT_DRAWS)
    return standardize(pilot)[1:]


class _Affine:
    """Picklable column-wise affine map."""

    def __init__(self, shift, scale):
        self.shift, self.scale = shift, scale

    def __call__(self, x):
        return (x - self.shift) / self.scale


def _dataset_sampler(data: Dataset, seed: int) -> EmpiricalSampler:
    return EmpiricalSampler(data.X, seed, stream_id("solver-data"))


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


def _manifest(command: str, argv: list, args, out: Path, files: list, timings: dict, seeds: dict,
              extra: Optional[dict] = None) -> dict:
    config = {k: v for k, v in vars(args).items() if k != "verbose"}
    doc = {
        "command": command,
        "argv": argv,
        "config": config,
        "seeds": seeds,
        "files": {f: sha256_file(out / f) for f in files},
        "timings": timings,
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }
    if extra:
        doc.update(extra)
    return doc


def _replay_argv(path: str, out: Optional[str]) -> list:
    """argv of a recorded run, optionally redirected to another output directory."""
    try:
        doc = read_json(path)
        argv = list(doc["argv"])
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot replay manifest {path}: {exc}") from None
    if out is not None:
        i = argv.index("--out")
        argv[i + 1] = out
    return argv


def _prepare_out(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------


def _solver_config(args, metric: str, n: int, seed: int) -> SolverConfig:
    kw = dict(m=args.minibatch, outer_iters=args.iters, T_v=args.dual_iters, gamma=args.step, seed=seed)
    if metric == "sd":
        kw["eta"] = "auto" if args.eta is None else args.eta
    elif args.eta not in (None, 0, 0.0):
        raise ConfigError("--eta only applies to --metric sd")
    try:
        return SolverConfig.for_metric(metric, n, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _solver_kw(args) -> dict:
    kw = dict(m=args.minibatch, outer_iters=args.iters, T_v=args.dual_iters, gamma=args.step)
    if args.eta is not None:
        kw["eta"] = args.eta
    return kw


def _load_checkpoint(path: Path, cfg: SolverConfig) -> Optional[SolverState]:
    if not path.exists():
        return None
    try:
        doc = read_json(path)
        if doc["config"] != json.loads(json.dumps(cfg.to_dict())):
            raise ConfigError(f"checkpoint {path} was written with a different configuration")
        return SolverState.from_dict(doc["state"])
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"unreadable checkpoint {path}: {exc}") from None


def _checkpoint_writer(path: Path, cfg: SolverConfig):
    def write(state: SolverState):
        tmp = path.with_name(path.name + ".tmp")
        write_json(tmp, {"config": cfg.to_dict(), "state": state.to_dict()})
        os.replace(tmp, path)
    return write


def cmd_build(args, argv) -> int:
    if args.n < 1:
        raise ConfigError("--n must be >= 1")
    cfg = _solver_config(args, args.metric, args.n, args.seed)
    if args.input == "-" and args.standardize:
        raise ConfigError("--standardize needs column moments and cannot be used with a stdin stream")
    t0 = time.perf_counter()
    source = _load_source(args, args.seed, allow_stream=True)
    seeds = {"seed": args.seed}
    data_hash = None
    if isinstance(source, Dataset):
        data_hash = sha256_array(source.X)
        sampler: Sampler = _dataset_sampler(source, args.seed)
    else:
        sampler = source
    shift = scale = None
    if args.standardize:
        shift, scale = _column_moments(source)
        sampler = PushforwardSampler(sampler, _Affine(shift, scale), dim=sampler.dim)
    out = _prepare_out(args.out)
    t_load = time.perf_counter()

    ckpt = Path(args.checkpoint) if args.checkpoint else None
    resume = _load_checkpoint(ckpt, cfg) if ckpt else None
    result = build_coreset(sampler, cfg, resume=resume,
                           checkpoint=_checkpoint_writer(ckpt, cfg) if ckpt else None)
    t_solve = time.perf_counter()

    sites = result.points
    if args.standardize:
        sites = sites * scale + shift
    write_coreset_csv(out / "coreset.csv", sites)
    trace = {
        "terminated_by": result.terminated_by,
        "iterations": len(result.trace),
        "metric": cfg.metric,
        "config": cfg.to_dict(),
        "trace": result.trace.to_dict(),
    }
    if isinstance(source, StreamSampler):
        trace["rows_consumed"] = source.consumed
    if args.standardize:
        trace["standardize"] = {"mean": shift, "scale": scale}
    write_json(out / "trace.json", trace)
    timings = {"load": t_load - t0, "solve": t_solve - t_load, "total": time.perf_counter() - t0}
    write_json(out / "manifest.json", _manifest("build", argv, args, out, ["coreset.csv", "trace.json"],
                                                timings, seeds, {"data_sha256": data_hash}))
    print(f"{cfg.metric} coreset of {cfg.n} points written to {out / 'coreset.csv'} "
          f"({result.terminated_by} after {len(result.trace)} iterations)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _parse_family(text: str, data: np.ndarray):
    name, _, arg = text.partition(":")
    try:
        if name == "lip1" and not arg:
            return "lip1"
        if name == "sobolev":
            return ("sobolev", float(arg))
        if name == "rkhs":
            return ("rkhs", KernelSpec("gaussian", float(arg)) if arg else median_kernel(data))
    except ValueError:
        pass
    raise ConfigError(f"--family must be lip1, sobolev:M or rkhs[:bandwidth], got {text!r}")


def _task_metric(task, data: Dataset, S, yS, k, seed) -> float:
    if task == "kmeans":
        return kmeans_task(data.X, S, k, seed)
    if data.labels is None or yS is None:
        raise ConfigError(f"the {task} task needs labels on both the dataset and the coreset")
    if task == "svm":
        return svm_task(data.X, data.labels, S, yS)
    soft = np.issubdtype(np.asarray(yS).dtype, np.floating)
    return logreg_posterior_task(data.X, data.labels, S, yS, soft_labels=soft)


def cmd_eval(args, argv) -> int:
    p_values = sorted(set(args.p or [1, 2]))
    if args.samples < 30:
        raise ConfigError("--samples must be at least 30")
    family_text = args.family
    t0 = time.perf_counter()
    labeled = args.task in ("svm", "logreg")
    coreset = read_coreset_csv(args.coreset, labeled=labeled)
    S, yS = coreset if labeled else (coreset, None)
    source = _load_source(args, args.seed, allow_stream=False)
    dim = source.X.shape[1] if isinstance(source, Dataset) else source.dim
    if S.shape[1] != dim:
        raise DataError(f"coreset has {S.shape[1]} columns but the data has dimension {dim}")
    out = _prepare_out(args.out)

    rows = []  # (metric, value, stderr, passed)
    if isinstance(source, Dataset):
        X = source.X
        exact = X.shape[0] + S.shape[0] <= MAX_SUPPORT
        sampler = _dataset_sampler(source, args.seed)
    else:
        X = source.spawn(stream_id("eval-pool")).draw(MMD_POINTS)
        exact = False
        sampler = source
    for p in p_values:
        if exact:
            rows.append((f"exact_w{p}", exact_wp(X, S, p)[0], 0.0, None))
        else:
            est = stochastic_wp(sampler.spawn(stream_id(f"eval-w{p}")), SiteSet(S), p, M=args.samples)
            rows.append((f"stochastic_w{p}", est.value, est.stderr, None))
    pool = X if X.shape[0] <= MMD_POINTS else \
        X[np.sort(make_rng(args.seed, "eval-mmd").choice(X.shape[0], MMD_POINTS, replace=False))]
    rows.append(("mmd", float(np.sqrt(mmd(pool, S, median_kernel(pool)))), None, None))
    if args.epsilon is not None:
        family = _parse_family(family_text, pool)
        res = coreset_condition_check(X, S, args.epsilon, family, seed=args.seed)
        rows.append((f"condition_{res.family}", res.margin, None, res.passed))
    if args.task is not None:
        if not isinstance(source, Dataset):
            raise ConfigError("task metrics need a finite dataset, not a sampling distribution")
        rows.append((f"task_{args.task}", _task_metric(args.task, source, S, yS, args.k, args.seed), None, None))

    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value", "stderr", "passed"])
        for name, value, se, passed in rows:
            w.writerow([name, repr(float(value)), "" if se is None else repr(float(se)),
                        "" if passed is None else str(passed).lower()])
    write_json(out / "report.json", [{"metric": n, "value": v, "stderr": se, "passed": ok}
                                     for n, v, se, ok in rows])
    write_json(out / "manifest.json", _manifest("eval", argv, args, out, ["report.csv", "report.json"],
                                                {"total": time.perf_counter() - t0}, {"seed": args.seed},
                                                {"coreset_sha256": sha256_file(args.coreset)}))
    for name, value, se, passed in rows:
        extra = f" +- {se:.3g}" if se else ""
        verdict = "" if passed is None else (" PASS" if passed else " FAIL")
        print(f"{name}: {value:.6g}{extra}{verdict}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


class _StandardizedFactory:
    """Data factory applying per-column z-scores to every generated dataset."""

    def __init__(self, factory):
        self.factory = factory

    def __call__(self, seed):
        d = self.factory(seed)
        return Dataset(standardize(d.X)[0], d.labels, d.name)


class _CoresetWriter:
    def __init__(self, root: Path):
        self.root = root
        self.files = []

    def __call__(self, method, size, seed, S, yS):
        name = f"coresets/{method}_n{size}_seed{seed}.csv"
        write_coreset_csv(self.root / name, S, yS)
        self.files.append(name)


def cmd_experiment(args, argv) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise ConfigError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
    if args.repeats < 1:
        raise ConfigError("--repeats must be >= 1")
    if any(s < 1 for s in args.sizes):
        raise ConfigError("--sizes must be positive")
    if args.task == "kmeans" and min(args.sizes) < args.k:
        raise ConfigError(f"every size must be at least k={args.k}")
    _solver_config(args, "sd" if "sd" in methods else "w2", max(args.sizes), args.seed)  # validate flags

    name = args.input or DEFAULT_DATASET[args.task]
    t0 = time.perf_counter()
    if name in SYNTHETIC_DATASETS:
        factory = SYNTHETIC_DATASETS[name]
    elif name in SYNTHETIC_SPECS or name == "-":
        raise ConfigError(f"experiment inputs are datasets: a CSV path or one of {', '.join(sorted(SYNTHETIC_DATASETS))}")
    else:
        factory = FixedData(_load_source(args, args.seed, allow_stream=False))
    probe = factory(repeat_seed(args.seed, 0))
    if args.task != "kmeans":
        if probe.labels is None:
            raise ConfigError(f"the {args.task} task needs --labels-col")
        if np.unique(probe.labels).shape[0] != 2:
            raise DataError(f"the {args.task} task needs exactly two label values")
    if args.standardize:
        factory = _StandardizedFactory(factory)
    out = _prepare_out(args.out)
    writer = None
    if args.save_coresets:
        (out / "coresets").mkdir(exist_ok=True)
        writer = _CoresetWriter(out)

    spec = TaskSpec(args.task, k=args.k, solver_kw=_solver_kw(args))
    report = run_experiment(spec, factory, methods, args.sizes, args.repeats, args.seed, on_summary=writer)
    t_run = time.perf_counter()
    report.write_csv(out / "report.csv")
    report.write_json(out / "report.json")
    seeds = {"seed": args.seed, "repeat_seeds": [repeat_seed(args.seed, r) for r in range(args.repeats)]}
    data_hashes = []
    for s in seeds["repeat_seeds"]:
        d = factory(s)
        data_hashes.append({"X": sha256_array(d.X),
                            "labels": None if d.labels is None else sha256_array(d.labels)})
    files = ["report.csv", "report.json"] + (sorted(writer.files) if writer else [])
    write_json(out / "manifest.json", _manifest("experiment", argv, args, out, files,
                                                {"grid": t_run - t0, "total": time.perf_counter() - t0},
                                                seeds, {"data_sha256": data_hashes, "dataset": name}))
    for row in report.summary():
        std = "" if row["std"] is None else f" +- {row['std']:.4g}"
        print(f"{row['task']} {row['method']:>8} n={row['size']:<5} {row['mean']:.6g}{std}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def cmd_check(args, argv) -> int:
    from .checks import coreset_checks, run_checks, standard_checks

    checks = standard_checks()
    if args.coreset is not None:
        dim = None
        if args.input is not None:
            src = _load_source(args, 0, allow_stream=False)
            dim = src.X.shape[1] if isinstance(src, Dataset) else src.dim
        checks += coreset_checks(args.coreset, dim)
    elif args.input is not None:
        raise ConfigError("--input only applies together with --coreset")
    failed = run_checks(checks, sys.stdout)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

COMMANDS = {"build": cmd_build, "eval": cmd_eval, "experiment": cmd_experiment, "check": cmd_check}


def main(argv: Optional[list] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "replay":
            argv = _replay_argv(args.manifest, args.out)
            args = parser.parse_args(argv)
            if args.command == "replay":
                raise ConfigError("a manifest cannot record a replay")
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args, argv)
    except ConfigError as exc:
        print(f"wcoresets: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError, ValueError) as exc:
        print(f"wcoresets: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, np.linalg.LinAlgError, ZeroDivisionError) as exc:
        print(f"wcoresets: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
