"""Command-line front end.

Exit codes: 0 success, 1 numerical failure, 2 usage or invalid model,
3 data shape (e.g. series shorter than the window).
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .arma import ArmaModel, ChangeInjection, simulate, validate
from .detector import DetectorConfig, run_sequential
from .errors import ChangepointError, ConfigMismatch, InvalidAlpha, InvalidSigma, NonStationary, SeriesTooShort
from .experiments import (
    ExperimentPlan,
    alarm_ratio_rows,
    basic_experiment,
    coefficient_sweep,
    convergence_diagnostic,
    format_value,
    parse_grid,
    parse_process,
    sensitivity_sweep,
    write_csv,
)
from .likelihood import MeanShift, ScaleChange, VarianceChange

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3

PRESETS = ("basic", "sweep", "tuned", "sensitivity", "converge")
TUNED_DEFAULTS = {"alpha": 0.0001, "tuning_max": 0.95, "window": 100, "length": 300, "change_at": 150}


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ar", type=_floats, default=(), help="comma-separated AR coefficients")
    p.add_argument("--ma", type=_floats, default=(), help="comma-separated MA coefficients")
    p.add_argument("--sigma", type=float, default=1.0, help="innovation standard deviation")
    p.add_argument("--mean", type=float, default=0.0, help="process level under H0")


def _add_detector_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int, default=50)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--tuning-max", dest="tuning_max", type=float, default=1.0,
                   help="ignore candidate changepoints with beta above this (1 = off)")
    p.add_argument("--variant", choices=("asymptotic", "finite_n"), default="asymptotic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldcusum", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value file; command-line flags win")
    common.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", parents=[common], help="simulate an ARMA series with a level change")
    _add_model_flags(p)
    p.add_argument("--length", type=int, default=200)
    p.add_argument("--change-at", dest="change_at", type=int, default=None,
                   help="1-based index of the first changed observation (default: no change)")
    p.add_argument("--new-mean", dest="new_mean", type=float, default=None)
    p.add_argument("--mode", choices=("smooth", "abrupt"), default="smooth")
    p.add_argument("-o", "--output", type=Path, default=Path("series.txt"))

    p = sub.add_parser("detect", parents=[common], help="run the sliding-window detector on a series file")
    p.add_argument("series", type=Path, help="one observation per line")
    _add_model_flags(p)
    _add_detector_flags(p)
    test = p.add_mutually_exclusive_group()
    test.add_argument("--nu-bar", dest="nu_bar", type=float, default=None,
                      help="tested mean shift (default 3)")
    test.add_argument("--tau", type=float, default=None, help="tested post-change innovation std")
    test.add_argument("--f", type=float, default=None, help="tested scale factor")
    p.add_argument("--changepoint", type=int, default=1,
                   help="report the first detection in windows that may contain this observation")
    p.add_argument("-o", "--output", type=Path, default=Path("decisions.csv"))

    p = sub.add_parser("experiment", parents=[common], help="Monte-Carlo experiment presets")
    p.add_argument("preset", choices=PRESETS)
    _add_experiment_flags(p)

    p = sub.add_parser("converge", parents=[common], help="t_{n,beta}/(n(1-beta)) minus its limit")
    _add_converge_flags(p)
    p.add_argument("--output-dir", dest="output_dir", type=Path, default=Path("."))
    return parser


def _add_converge_flags(p: argparse.ArgumentParser) -> None:
    if not any(a.dest == "process" for a in p._actions):
        p.add_argument("--process", default="ar1:0.5", help="ar1:C, ma1:C, wn or arma:AR,../MA,..")
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--n-values", dest="n_values", default="10:400:10", help="start:stop:step or list")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--process", default="ar1:0.5", help="ar1:C, ma1:C, wn or arma:AR,../MA,..")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--pre-mean", dest="pre_mean", type=float, default=0.0)
    p.add_argument("--post-mean", dest="post_mean", type=float, default=3.0)
    p.add_argument("--nu-bar", dest="nu_bar", type=float, default=3.0,
                   help="mean shift tested by the detector (sensitivity 'follow' overrides it)")
    p.add_argument("--length", type=int, default=None)
    p.add_argument("--change-at", dest="change_at", type=int, default=None)
    p.add_argument("--runs", type=int, default=300)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--tuning-max", dest="tuning_max", type=float, default=None)
    p.add_argument("--variant", choices=("asymptotic", "finite_n"), default="asymptotic")
    p.add_argument("--coefs", default="-0.9:0.9:0.1", help="sweep grid, start:stop:step or list")
    p.add_argument("--family", choices=("ar1", "ma1"), default="ar1", help="sweep process family")
    p.add_argument("--means", default="1,2,3,5", help="simulated post-change means (sensitivity)")
    p.add_argument("--tested-mean", dest="tested_mean", default="follow",
                   help="'follow' or a fixed tested mean (sensitivity)")
    p.add_argument("--output-dir", dest="output_dir", type=Path, default=Path("."))
    _add_converge_flags(p)


# --------------------------------------------------------------------------
# config files and manifests
# --------------------------------------------------------------------------


def read_config(path: Path) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _attach_dash_values(argv: Sequence[str]) -> list[str]:
    """Glue values such as ``-0.9:0.9:0.1`` to their flag so argparse does not
    read them as options."""
    out: list[str] = []
    argv = list(argv)
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and _DASH_VALUE.fullmatch(argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


_DASH_VALUE = re.compile(r"-[\d.][\d.eE+\-:,/]*")


def parse_args(argv: Optional[Sequence[str]]) -> argparse.Namespace:
    parser = build_parser()
    argv = _attach_dash_values(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        file_values = read_config(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    subparser = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    chosen = subparser.choices[args.command]
    known = {a.dest for a in chosen._actions}
    unknown = sorted(set(file_values) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    chosen.set_defaults(**file_values)
    return parser.parse_args(argv)


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def rerun_argv(args: argparse.Namespace) -> list[str]:
    """Flags that reproduce ``args`` exactly."""
    params = vars(args)
    out = [args.command]
    if getattr(args, "preset", None):
        out.append(args.preset)
    if getattr(args, "series", None):
        out.append(str(args.series))
    for key in sorted(params):
        if key in ("command", "preset", "series", "config"):
            continue
        v = params[key]
        if v is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(v, tuple):
            if not v:
                continue
            v = ",".join(format_value(x) for x in v)
        elif isinstance(v, float):
            v = format_value(v)
        out.append(f"{flag}={v}")
    return out


def write_manifest(target: Path, args: argparse.Namespace, extra: Optional[dict] = None) -> Path:
    params = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k != "config"}
    manifest = {"package": "ldcusum", "version": __version__, "parameters": params,
                "argv": rerun_argv(args)}
    if extra:
        manifest.update(extra)
    path = target.with_name(target.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _model(args) -> ArmaModel:
    return validate(ArmaModel(args.ar, args.ma, args.sigma, args.mean))


def cmd_simulate(args) -> int:
    model = _model(args)
    if args.length < 1:
        raise UsageError("--length must be >= 1")
    if args.change_at is None:
        injection = ChangeInjection.none(args.length)
    else:
        if not 1 <= args.change_at <= args.length + 1:
            raise UsageError("--change-at must lie in 1..length+1")
        new_mean = args.mean if args.new_mean is None else args.new_mean
        injection = ChangeInjection(args.change_at, new_mean, args.mode)
    series = simulate(model, args.length, injection, seed=args.seed)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_text("".join(format_value(x) + "\n" for x in series))
    write_manifest(args.output, args)
    return EXIT_OK


def read_series(path: Path) -> np.ndarray:
    try:
        lines = [ln.strip() for ln in path.read_text().splitlines()]
    except OSError as exc:
        raise UsageError(f"cannot read series: {exc}") from exc
    try:
        return np.array([float(ln) for ln in lines if ln], dtype=float)
    except ValueError as exc:
        raise SeriesTooShort(f"malformed series file: {exc}") from exc


def _detector_change(args):
    if args.tau is not None:
        return VarianceChange(args.tau)
    if args.f is not None:
        return ScaleChange(args.f, args.mean)
    return MeanShift(3.0 if args.nu_bar is None else args.nu_bar)


def cmd_detect(args) -> int:
    series = read_series(args.series)
    cfg = DetectorConfig(model=_model(args), change=_detector_change(args), window=args.window,
                         alpha=args.alpha, tuning_beta_max=args.tuning_max,
                         threshold_variant=args.variant)
    result = run_sequential(series, cfg)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    write_csv(args.output, ["window_index", "margin", "argmax_beta", "alarm"],
              [(d.window_index, d.margin, d.argmax_beta, d.alarm) for d in result.decisions])
    first = result.first_detection(args.changepoint)
    write_manifest(args.output, args, {"first_detection": first})
    print(f"windows={len(result.decisions)} alarms={int(result.alarms.sum())} "
          f"first_detection={'none' if first is None else first}")
    return EXIT_OK


def _plan(args) -> ExperimentPlan:
    preset_tuned = args.preset == "tuned"

    def pick(name, default):
        v = getattr(args, name)
        if v is not None:
            return v
        return TUNED_DEFAULTS[name] if preset_tuned else default

    model = validate(parse_process(args.process, args.sigma, args.pre_mean))
    cfg = DetectorConfig(model=model, change=MeanShift(args.nu_bar),
                         window=pick("window", 50), alpha=pick("alpha", 0.01),
                         tuning_beta_max=pick("tuning_max", 1.0), threshold_variant=args.variant)
    return ExperimentPlan(model=model, series_length=pick("length", 200),
                          changepoint=pick("change_at", 100), post_mean=args.post_mean,
                          runs=args.runs, detector=cfg, seed=args.seed)


def cmd_experiment(args) -> int:
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    if args.preset == "converge":
        return cmd_converge(args)
    plan = _plan(args)
    if args.preset in ("basic", "tuned"):
        rep = basic_experiment(plan)
        path = write_csv(out / f"{args.preset}_alarm_ratio.csv", ["window_index", "alarm_ratio"],
                         alarm_ratio_rows(rep))
        summary = {"mean_false_alarm": rep.mean_false_alarm, "mean_delay": rep.mean_delay,
                   "runs_detected": rep.runs_detected, "first_change_window": rep.first_change_window}
        write_manifest(path, args, {"summary": summary})
        print(" ".join(f"{k}={format_value(v)}" for k, v in summary.items()))
    elif args.preset == "sweep":
        rows = coefficient_sweep(parse_grid(args.coefs), plan, args.family)
        path = write_csv(out / f"sweep_{args.family}.csv", ["coef", "mean_false_alarm", "mean_delay"],
                         [(r.coef, r.mean_false_alarm, r.mean_delay) for r in rows])
        write_manifest(path, args)
    else:  # sensitivity
        tested = args.tested_mean if args.tested_mean == "follow" else float(args.tested_mean)
        rows = sensitivity_sweep(parse_grid(args.means), tested, plan)
        path = write_csv(out / "sensitivity.csv",
                         ["simulated_mean", "tested_mean", "mean_false_alarm", "mean_delay"],
                         [(r.simulated_mean, r.tested_mean, r.mean_false_alarm, r.mean_delay) for r in rows])
        write_manifest(path, args)
    return EXIT_OK


def cmd_converge(args) -> int:
    model = validate(parse_process(args.process, getattr(args, "sigma", 1.0)))
    n_values = [int(v) for v in parse_grid(args.n_values)]
    rows = convergence_diagnostic(model, args.beta, n_values)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    path = write_csv(args.output_dir / "converge.csv", ["n", "diff"], rows)
    write_manifest(path, args)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "detect": cmd_detect, "experiment": cmd_experiment,
            "converge": cmd_converge}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help/--version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SeriesTooShort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonStationary, InvalidSigma, InvalidAlpha, ConfigMismatch, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ChangepointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
