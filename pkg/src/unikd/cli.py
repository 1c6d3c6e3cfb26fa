"""Command-line surface.

Subcommands: train (full experiment from a config file), losscurve (loss
profile CSV on stdout), gradcheck (numerical-vs-analytic gradient table),
verify-geometry (algebraic identity sweeps), eval (re-score a checkpoint).

Exit codes: 0 success, 1 runtime failure (divergence, failed check),
2 usage/config error. All artifact output is deterministic given config and
seeds; wall-clock timings go only to the run.log file. The training output
directory may be overridden with the UNIKD_OUTPUT_DIR environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .checkpoint import load_network, save_network
from .config import RunConfig, SCHEMA, load_config
from .data import generate_dataset
from .errors import ConfigError, DegenerateTripletError, RangeError, UnikdError
from .evaluation import evaluation_report
from .geometry import (
    cosine_sim,
    diag_cosines,
    triplet_angle_direct,
    triplet_angle_from_pairwise,
)
from .gradcheck import run_suite
from .losses import (
    IledParams,
    RpsdParams,
    fc_loss,
    fc_loss_cosform,
    iled_core,
    rpsd_core,
)
from .models import forward
from .training import (
    distill_student,
    format_number,
    pretrain_teacher,
    write_records_csv,
)

OUTPUT_DIR_ENV = "UNIKD_OUTPUT_DIR"

CURVE_DOMAINS = {"iled": (-1.0, 1.0), "fc": (-1.0, 1.0), "rpsd": (0.0, 2.0)}


def _round9(obj):
    """Round every float to the 9-significant-digit output convention."""
    if isinstance(obj, dict):
        return {k: _round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round9(v) for v in obj]
    if isinstance(obj, float):
        return float(format_number(obj))
    return obj


def run_experiment(cfg: RunConfig, outdir: Path) -> dict:
    """Pretrain (or load) the teacher, distill, evaluate, write artifacts."""
    outdir.mkdir(parents=True, exist_ok=True)
    log_lines = [f"started {time.strftime('%Y-%m-%dT%H:%M:%S')}"]
    t0 = time.monotonic()

    data = generate_dataset(cfg.dataset)
    if cfg.teacher_checkpoint:
        teacher, teacher_head = load_network(cfg.teacher_checkpoint)
        log_lines.append(f"teacher loaded from {cfg.teacher_checkpoint}")
    else:
        teacher, teacher_head, teacher_records = pretrain_teacher(
            cfg.teacher_spec, cfg.head, data, cfg.teacher_train
        )
        write_records_csv(teacher_records, outdir / "teacher_metrics.csv")
        save_network(outdir / "teacher.ckpt", teacher, teacher_head)
        log_lines.append(
            f"teacher pretrained for {cfg.teacher_train.iterations} iterations "
            f"in {time.monotonic() - t0:.1f}s"
        )

    t1 = time.monotonic()
    student, student_head, records = distill_student(
        cfg.student_spec, cfg.head, data, cfg.train, teacher, teacher_head
    )
    write_records_csv(records, outdir / "metrics.csv")
    save_network(outdir / "student.ckpt", student, student_head)
    log_lines.append(
        f"student trained ({cfg.train.mode}) for {cfg.train.iterations} "
        f"iterations in {time.monotonic() - t1:.1f}s"
    )

    student_emb, _ = forward(student, data.eval_x)
    teacher_emb, _ = forward(teacher, data.eval_x)
    summary = {
        "mode": cfg.train.mode,
        "iterations": cfg.train.iterations,
        "student": evaluation_report(student_emb, data.pairs, cfg.far_targets, cfg.metric),
        "teacher": evaluation_report(teacher_emb, data.pairs, cfg.far_targets, cfg.metric),
    }
    (outdir / "summary.json").write_text(
        json.dumps(_round9(summary), sort_keys=True, indent=2) + "\n"
    )
    log_lines.append(f"finished in {time.monotonic() - t0:.1f}s")
    (outdir / "run.log").write_text("\n".join(log_lines) + "\n")
    return summary


def cmd_train(args: argparse.Namespace) -> int:
    base_dir_override = os.environ.get(OUTPUT_DIR_ENV)
    runs: list[tuple[str | None, tuple[str, ...]]] = [(None, ())]
    if args.sweep:
        key, sep, values = args.sweep.partition("=")
        key = key.strip()
        if not sep or not values.strip():
            raise ConfigError(f"--sweep expects key=v1,v2,..., got {args.sweep!r}")
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r} in --sweep")
        short = key.rsplit(".", 1)[-1]
        runs = [
            (f"{short}={v.strip()}", (f"{key}={v.strip()}",))
            for v in values.split(",")
        ]
    for suffix, overrides in runs:
        cfg = load_config(args.config, overrides)
        outdir = Path(base_dir_override or cfg.output_dir)
        if suffix is not None:
            outdir = outdir / suffix
        summary = run_experiment(cfg, outdir)
        acc = summary["student"]["pair_accuracy"]
        print(f"{outdir}: mode={summary['mode']} pair_accuracy={format_number(acc)}")
    return 0


def cmd_losscurve(args: argparse.Namespace) -> int:
    lo, hi = CURVE_DOMAINS[args.kind]
    start = lo if args.start is None else args.start
    stop = hi if args.stop is None else args.stop
    if args.points < 2:
        raise RangeError(f"need at least 2 points, got {args.points}")
    if not start < stop:
        raise RangeError(f"empty range [{start}, {stop}]")
    if start < lo - 1e-12 or stop > hi + 1e-12:
        raise RangeError(
            f"range [{start}, {stop}] outside the {args.kind} domain [{lo}, {hi}]"
        )
    try:
        lambdas = tuple(float(v) for v in args.lambdas.split(","))
    except ValueError as exc:
        raise RangeError(f"bad --lambdas value: {exc}") from exc
    grid = np.linspace(start, stop, args.points)
    if args.kind == "iled":
        params = IledParams(
            steepness=args.steepness, margin=args.margin, smoothing=args.smoothing
        )
        core = iled_core(grid, params)
    elif args.kind == "rpsd":
        params = RpsdParams(
            steepness=args.steepness, threshold=args.threshold, smoothing=args.smoothing
        )
        core = rpsd_core(grid, params)
    else:
        core = 2.0 * (1.0 - grid)
    out = sys.stdout
    out.write("x," + ",".join(f"lambda={format_number(lam)}" for lam in lambdas) + "\n")
    for i, x in enumerate(grid):
        row = [format_number(x)] + [format_number(lam * core[i]) for lam in lambdas]
        out.write(",".join(row) + "\n")
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    results = run_suite(seeds=args.seeds, rel_tol=args.rel_tol)
    name_w = max(len(r.name) for r in results) + 2
    print(f"{'check'.ljust(name_w)}{'seeds':>6}  {'max_rel_err':>12}  status  worst case")
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        ok = ok and r.passed
        print(
            f"{r.name.ljust(name_w)}{r.seeds:>6}  {r.max_rel_error:>12.3e}  "
            f"{status:<6}  {r.worst_case}"
        )
    return 0 if ok else 1


def geometry_report(trials: int, seed: int, extra_triplets=()) -> dict:
    """Dual-route identity sweeps used by the verify-geometry subcommand."""
    rng = np.random.default_rng(seed)
    fc_max = 0.0
    for _ in range(trials):
        m = int(rng.integers(1, 33))
        d = int(rng.integers(2, 129))
        t = rng.standard_normal((m, d))
        s = rng.standard_normal((m, d))
        direct = fc_loss(t, s).value
        cosform = fc_loss_cosform(diag_cosines(t, s))
        fc_max = max(fc_max, abs(direct - cosform))
    triplet_max = 0.0
    degenerate = 0
    compared = 0
    triplets = list(extra_triplets) + [
        tuple(rng.standard_normal((3, int(rng.integers(2, 65)))))
        for _ in range(trials)
    ]
    for fi, fj, fk in triplets:
        try:
            direct = triplet_angle_direct(fi, fj, fk)
            pairwise = triplet_angle_from_pairwise(
                cosine_sim(fi, fj), cosine_sim(fj, fk), cosine_sim(fi, fk)
            )
        except DegenerateTripletError:
            degenerate += 1
            continue
        compared += 1
        triplet_max = max(triplet_max, abs(direct - pairwise))
    return {
        "trials": trials,
        "fc_max_dev": fc_max,
        "triplet_max_dev": triplet_max,
        "triplets_compared": compared,
        "degenerate_skipped": degenerate,
    }


def cmd_verify_geometry(args: argparse.Namespace) -> int:
    report = geometry_report(args.trials, args.seed)
    fc_ok = report["fc_max_dev"] <= 1e-10
    trip_ok = report["triplet_max_dev"] <= 1e-9
    print(f"trials                 = {report['trials']}")
    print(f"fc equivalence max dev = {format_number(report['fc_max_dev'])}"
          f"  [{'PASS' if fc_ok else 'FAIL'} <= 1e-10]")
    print(f"triplet identity max   = {format_number(report['triplet_max_dev'])}"
          f"  [{'PASS' if trip_ok else 'FAIL'} <= 1e-9]")
    print(f"triplets compared      = {report['triplets_compared']}")
    print(f"degenerate skipped     = {report['degenerate_skipped']}")
    return 0 if (fc_ok and trip_ok) else 1


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    net, _ = load_network(args.checkpoint)
    data = generate_dataset(cfg.dataset)
    emb, _ = forward(net, data.eval_x)
    report = evaluation_report(emb, data.pairs, cfg.far_targets, cfg.metric)
    print(json.dumps(_round9(report), sort_keys=True, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unikd",
        description="Unified embedding-distillation engine: train, inspect, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a config-driven experiment")
    p_train.add_argument("config", help="path to a section.key = value config file")
    p_train.add_argument(
        "--sweep",
        metavar="KEY=V1,V2,...",
        help="run once per value of one config key, in subdirectories",
    )
    p_train.set_defaults(func=cmd_train)

    p_curve = sub.add_parser("losscurve", help="emit a loss-profile CSV on stdout")
    p_curve.add_argument("--kind", choices=sorted(CURVE_DOMAINS), required=True)
    p_curve.add_argument("--lambdas", default="1", help="comma-separated weights")
    p_curve.add_argument("--start", type=float, default=None)
    p_curve.add_argument("--stop", type=float, default=None)
    p_curve.add_argument("--points", type=int, default=201)
    p_curve.add_argument("--steepness", type=float, default=None)
    p_curve.add_argument("--margin", type=float, default=0.9, help="iled soft margin")
    p_curve.add_argument("--threshold", type=float, default=0.05, help="rpsd transition")
    p_curve.add_argument("--smoothing", type=float, default=None)
    p_curve.set_defaults(func=cmd_losscurve)

    p_grad = sub.add_parser("gradcheck", help="analytic-vs-numeric gradient table")
    p_grad.add_argument("--seeds", type=int, default=20)
    p_grad.add_argument("--rel-tol", type=float, default=1e-5)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_geom = sub.add_parser("verify-geometry", help="run the algebraic identity sweeps")
    p_geom.add_argument("--trials", type=int, default=10000)
    p_geom.add_argument("--seed", type=int, default=0)
    p_geom.set_defaults(func=cmd_verify_geometry)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a config's dataset")
    p_eval.add_argument("checkpoint")
    p_eval.add_argument("config")
    p_eval.set_defaults(func=cmd_eval)

    return parser


def _fill_curve_defaults(args: argparse.Namespace) -> None:
    if getattr(args, "kind", None) is None:
        return
    if args.steepness is None:
        args.steepness = 40.0 if args.kind in ("iled", "fc") else 60.0
    if args.smoothing is None:
        args.smoothing = 0.1 if args.kind in ("iled", "fc") else 1.0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "losscurve":
        _fill_curve_defaults(args)
    try:
        return args.func(args)
    except (ConfigError, RangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UnikdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
