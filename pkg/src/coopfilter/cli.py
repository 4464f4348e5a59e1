"""Command-line front end: simulate, filter, judge, suite, evaluate.

Exit codes: 0 success, 1 I/O failure, 2 usage or validation error,
3 trial cannot be judged (no cue).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import trial_io
from .evaluation import evaluate_suite, render_tables, sweep_count, threshold_sweep
from .judgment import JudgmentConfig, NoCueError, judge
from .kalman import filter_trial
from .model import ModelError, ModelParams
from .simulator import (
    BehaviorMode,
    PhysicalIntensity,
    TrialSpec,
    VerbalCue,
    generate_trial_suite,
    simulate_trial,
    subject_label,
)

log = logging.getLogger("coopfilter")

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_UNJUDGEABLE = 0, 1, 2, 3
CONFIG_ENV = "COOP_FILTER_CONFIG"


class UsageError(Exception):
    pass


def _load_params(args, fallback: dict | None = None) -> ModelParams:
    path = args.params or os.environ.get(CONFIG_ENV)
    if path:
        return trial_io.read_params(path)
    if fallback is not None:
        return trial_io.params_from_mapping(fallback, "manifest params")
    return ModelParams.default()


def _judgment_config(args) -> JudgmentConfig:
    return JudgmentConfig(delay=args.delay, threshold=args.threshold)


def _add_common(p: argparse.ArgumentParser, judgment: bool = False) -> None:
    p.add_argument("--params", help=f"parameter JSON (default: ${CONFIG_ENV} or built-in defaults)")
    if judgment:
        p.add_argument("--delay", type=float, default=0.75, help="seconds after cue onset (default 0.75)")
        p.add_argument("--threshold", type=float, default=0.3, help="xi threshold in (0, 1) (default 0.3)")


def _spec_from_args(args) -> TrialSpec:
    return TrialSpec(
        requested_xi=args.xi,
        physical_intensity=PhysicalIntensity(args.physical),
        verbal_cue=VerbalCue(args.verbal),
        relative_timing=args.timing,
        duration=args.duration,
        seed=args.seed,
    )


def _manifest(entries: list[dict], params: ModelParams, behavior: str, **extra) -> dict:
    return {
        "format_version": trial_io.FORMAT_VERSION,
        "behavior": behavior,
        "params": params.to_dict(),
        **extra,
        "trials": entries,
    }


def _entry(filename: str, spec: TrialSpec, subject_id: str) -> dict:
    return {"file": filename, "subject_id": subject_id, "requested_xi": spec.requested_xi, "spec": spec.to_dict()}


def cmd_simulate(args) -> int:
    params = _load_params(args)
    spec = _spec_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = args.name or f"trial_seed{spec.seed}"
    record = simulate_trial(spec, params, BehaviorMode(args.behavior), subject_id=args.subject)
    path = trial_io.write_trial(record, out / f"{name}.csv", dt=params.dt, force=args.force)
    manifest_path = out / f"{name}.manifest.json"
    trial_io.write_manifest(
        _manifest([_entry(path.name, spec, args.subject)], params, args.behavior), manifest_path, force=args.force
    )
    print(path)
    print(manifest_path)
    return EXIT_OK


def cmd_filter(args) -> int:
    params = _load_params(args)
    src = Path(args.trial)
    record = trial_io.read_trial(src)
    trace = filter_trial(record, params)
    out = Path(args.out) if args.out else src.parent
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / f"{src.stem}.trace.json"
    plot_path = out / f"{src.stem}.plot.csv"
    trial_io.write_trace(trace, trace_path)
    trial_io.write_plot_csv(trace, record.measurements, plot_path)
    print(trace_path)
    print(plot_path)
    return EXIT_OK


def cmd_judge(args) -> int:
    cfg = _judgment_config(args)
    params = _load_params(args)
    record = trial_io.read_trial(args.trial)
    trace = filter_trial(record, params)
    try:
        verdict = judge(trace, record.cues, cfg)
    except NoCueError as exc:
        print(f"unjudgeable: {exc}", file=sys.stderr)
        return EXIT_UNJUDGEABLE
    payload = {
        "trial": str(args.trial),
        "verdict": verdict.value,
        "sampled_xi": verdict.sampled_xi,
        "sample_time": verdict.sample_time,
        "delay": cfg.delay,
        "threshold": cfg.threshold,
        "requested_xi": record.requested_xi,
    }
    print(verdict.label)
    print(json.dumps(payload))
    if args.json:
        trial_io.atomic_write_text(args.json, json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def cmd_suite(args) -> int:
    if args.subjects < 1 or args.trials < 1:
        raise UsageError("--subjects and --trials must be >= 1")
    params = _load_params(args)
    behavior = BehaviorMode(args.behavior)
    specs = generate_trial_suite(args.subjects, args.trials, args.seed, duration=args.duration)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    if manifest_path.exists() and not args.force:
        raise FileExistsError(f"{manifest_path} exists; pass --force to overwrite")
    entries = []
    for i, spec in enumerate(specs):
        sid = subject_label(i // args.trials)
        name = f"{sid}_T{i % args.trials + 1:03d}.csv"
        record = simulate_trial(spec, params, behavior, subject_id=sid)
        trial_io.write_trial(record, out / name, dt=params.dt, force=args.force)
        entries.append(_entry(name, spec, sid))
    manifest = _manifest(
        entries, params, behavior.value, master_seed=args.seed, n_subjects=args.subjects, trials_per_subject=args.trials
    )
    trial_io.write_manifest(manifest, manifest_path, force=True)
    print(manifest_path)
    log.info("wrote %d trials to %s", len(entries), out)
    return EXIT_OK


def _parse_sweep(text: str) -> tuple[float, float, float]:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--sweep-threshold expects lo:hi:step, got {text!r}") from None
    sweep_count(lo, hi, step)
    return lo, hi, step


def cmd_evaluate(args) -> int:
    cfg = _judgment_config(args)
    sweep = _parse_sweep(args.sweep_threshold) if args.sweep_threshold else None
    manifest = trial_io.read_manifest(args.manifest)
    if not manifest["trials"]:
        raise UsageError(f"{args.manifest}: manifest lists no trials")
    params = _load_params(args, manifest.get("params"))
    records = [trial_io.read_trial(p) for p in trial_io.manifest_trial_paths(manifest, args.manifest)]
    report = evaluate_suite(records, params, cfg)
    sys.stdout.write(render_tables(report))
    out = Path(args.out) if args.out else Path(args.manifest).parent
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "evaluation.json"
    trial_io.atomic_write_text(report_path, json.dumps(report.to_dict(), indent=2) + "\n")
    print(report_path)
    if sweep:
        rows = threshold_sweep(records, params, cfg.delay, *sweep)
        sweep_path = out / "threshold_sweep.csv"
        cols = list(rows[0])
        lines = [",".join(cols)] + [",".join(repr(float(r[c])) for c in cols) for r in rows]
        trial_io.atomic_write_text(sweep_path, "\n".join(lines) + "\n")
        print(sweep_path)
    return EXIT_OK


def cmd_defaults(args) -> int:
    text = json.dumps(ModelParams.default().to_dict(), indent=2) + "\n"
    if args.write:
        trial_io.atomic_write_text(args.write, text, force=args.force)
        print(args.write)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coopfilter", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    behaviors = [b.value for b in BehaviorMode]

    p = sub.add_parser("simulate", help="simulate one trial")
    _add_common(p)
    p.add_argument("--xi", type=int, required=True, choices=(-1, 0, 1))
    p.add_argument("--physical", default="none", choices=[v.value for v in PhysicalIntensity])
    p.add_argument("--verbal", default="none", choices=[v.value for v in VerbalCue])
    p.add_argument("--timing", type=int, default=0, choices=range(-4, 5), metavar="{-4..4}")
    p.add_argument("--duration", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subject", default="")
    p.add_argument("--behavior", default=BehaviorMode.MODEL.value, choices=behaviors)
    p.add_argument("--name", help="file stem (default trial_seed<SEED>)")
    p.add_argument("--out", default=".")
    p.add_argument("--force", action="store_true", help="overwrite existing files")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filter", help="run the Kalman filter over a trial file")
    _add_common(p)
    p.add_argument("trial")
    p.add_argument("--out", help="output directory (default: next to the trial)")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("judge", help="filter a trial and print its cooperativeness verdict")
    _add_common(p, judgment=True)
    p.add_argument("trial")
    p.add_argument("--json", help="also write the verdict JSON here")
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("suite", help="simulate a subjects x trials suite")
    _add_common(p)
    p.add_argument("--subjects", type=int, default=4)
    p.add_argument("--trials", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=5.0)
    p.add_argument("--behavior", default=BehaviorMode.MODEL.value, choices=behaviors)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("evaluate", help="judge every trial of a manifest and print the tables")
    _add_common(p, judgment=True)
    p.add_argument("manifest")
    p.add_argument("--out", help="output directory (default: next to the manifest)")
    p.add_argument("--sweep-threshold", metavar="LO:HI:STEP")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("defaults", help="print or write the default parameter file")
    p.add_argument("--write", metavar="PATH")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_defaults)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ModelError, trial_io.TrialFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
