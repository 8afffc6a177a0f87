"""Command-line driver for convergence studies and benchmark-table sweeps.

Subcommands: ``ode``, ``pde1d``, ``pde2d``, ``infsup``, and ``repro-table
<1|2|3|4|5>``.  A plain-text ``key=value`` config file may supply defaults;
explicit flags win.  Exit codes: 0 success, 2 configuration problem, 3
numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional, Sequence, Tuple

from .errors import NumericError
from .report import ConvergenceReport, emit_markdown, emit_report
from .study import (
    StudyConfig,
    expected_rates,
    run_study,
    table_studies,
)

_FAST_SUBDIVISIONS = {"pde1d": 512, "pde2d": 32}
_FAST_REF_CAP = 1024

_DEFAULT_ALPHAS = {
    "ode": "0.3,0.5,0.7,0.9",
    "pde1d": "0.3,0.5,0.7,0.9",
    "pde2d": "0.3,0.5,0.7,0.9",
    "infsup": "0.3,0.5,0.7,0.9,0.98",
}
_DEFAULT_STEPS = {
    "ode": "10,20,40,80,160,320",
    "pde1d": "10,20,40,80,160,320",
    "pde2d": "10,20,40,80,160,320",
    "infsup": "20,40,80,160,320,640",
}

# config-file keys accepted per subcommand, mapped to argparse destinations
_CONFIG_KEYS = {
    "alpha": "alpha",
    "K": "steps",
    "M": "subdivisions",
    "case": "case",
    "lambda": "decay",
    "source": "source",
    "ref-K": "ref_steps",
    "out": "out",
    "format": "format",
    "fast": "fast",
    "jobs": "jobs",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracpg",
        description=(
            "Convergence studies for the space-time solver: scalar decay "
            "problems, 1-D/2-D diffusion, stability constants, and "
            "benchmark-table reproduction."
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def add_output_flags(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--out", help="write the report to this path")
        sub.add_argument(
            "--format",
            choices=("csv", "markdown"),
            help="report format (default markdown)",
        )
        sub.add_argument("--jobs", type=int, help="worker-pool size (default 1)")
        sub.add_argument("--config", help="key=value file supplying defaults")

    def add_grid_flags(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--alpha", help="comma-separated fractional orders")
        sub.add_argument("--K", dest="steps", help="comma-separated step counts")

    ode = commands.add_parser("ode", help="scalar fractional decay problem")
    add_grid_flags(ode)
    ode.add_argument("--lambda", dest="decay", type=float, help="decay coefficient")
    ode.add_argument("--source", help="time source tag (default exp)")
    ode.add_argument("--ref-K", dest="ref_steps", type=int, help="reference step count")
    ode.add_argument("--fast", action="store_true", default=None, help="cap the reference grid")
    add_output_flags(ode)

    for name, blurb in (
        ("pde1d", "diffusion on the unit interval"),
        ("pde2d", "diffusion on the unit square"),
    ):
        pde = commands.add_parser(name, help=blurb)
        add_grid_flags(pde)
        pde.add_argument("--M", dest="subdivisions", type=int, help="subdivisions per side")
        pde.add_argument("--case", help="benchmark case tag")
        pde.add_argument("--ref-K", dest="ref_steps", type=int, help="reference step count")
        pde.add_argument(
            "--fast",
            action="store_true",
            default=None,
            help="shrink the spatial mesh and cap the reference grid",
        )
        add_output_flags(pde)

    infsup = commands.add_parser("infsup", help="stability-constant sweep")
    add_grid_flags(infsup)
    add_output_flags(infsup)

    repro = commands.add_parser("repro-table", help="reproduce one benchmark table")
    repro.add_argument("table", type=int, help="table number, 1-5")
    repro.add_argument(
        "--fast",
        action="store_true",
        default=None,
        help="shrink the spatial mesh and cap the reference grid",
    )
    add_output_flags(repro)
    return parser


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise ValueError(f"cannot read config file {path}: {exc}") from exc
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{number}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{number}: unknown config key {key!r}")
        values[key] = value
    return values


def _coerce(key: str, value: str):
    if key in ("M", "ref-K", "jobs"):
        return int(value)
    if key == "lambda":
        return float(value)
    if key == "fast":
        lowered = value.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"config key fast must be a boolean, got {value!r}")
    return value


def _apply_config_file(args: argparse.Namespace) -> None:
    path = getattr(args, "config", None)
    if not path:
        return
    for key, raw in _read_config_file(path).items():
        dest = _CONFIG_KEYS[key]
        if not hasattr(args, dest):
            raise ValueError(
                f"config key {key!r} is not valid for the {args.command} command"
            )
        if getattr(args, dest) is None:
            setattr(args, dest, _coerce(key, raw))


def _float_list(text: str, flag: str) -> Tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ValueError(f"{flag} expects comma-separated numbers, got {text!r}") from exc


def _int_list(text: str, flag: str) -> Tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ValueError(f"{flag} expects comma-separated integers, got {text!r}") from exc


def _study_configs(args: argparse.Namespace) -> Tuple[List[StudyConfig], str]:
    jobs = args.jobs if args.jobs is not None else 1
    if args.command == "repro-table":
        return table_studies(args.table, fast=bool(args.fast), jobs=jobs)

    mode = args.command
    alphas = _float_list(args.alpha or _DEFAULT_ALPHAS[mode], "--alpha")
    steps = _int_list(args.steps or _DEFAULT_STEPS[mode], "--K")
    if mode == "infsup":
        return [StudyConfig(mode="infsup", alphas=alphas, step_counts=steps, jobs=jobs)], "l2"

    fast = bool(args.fast)
    ref_steps = args.ref_steps if args.ref_steps is not None else 2000
    if fast:
        ref_steps = min(ref_steps, _FAST_REF_CAP)
    if mode == "ode":
        config = StudyConfig(
            mode="ode",
            alphas=alphas,
            step_counts=steps,
            decay=args.decay if args.decay is not None else 1.0,
            source=args.source if args.source is not None else "exp",
            ref_steps=ref_steps,
            jobs=jobs,
        )
        return [config], "l2"

    if args.case is None:
        raise ValueError(f"{mode} needs a --case tag")
    subdivisions = args.subdivisions
    if fast:
        subdivisions = (
            max(2, subdivisions // 2)
            if subdivisions is not None
            else _FAST_SUBDIVISIONS[mode]
        )
    config = StudyConfig(
        mode=mode,
        alphas=alphas,
        step_counts=steps,
        case=args.case,
        subdivisions=subdivisions,
        ref_steps=ref_steps,
        jobs=jobs,
    )
    return [config], "l2"


def _run(args: argparse.Namespace) -> int:
    _apply_config_file(args)
    configs, value = _study_configs(args)
    rows = []
    for config in configs:
        rows.extend(run_study(config).rows)
    report = ConvergenceReport(tuple(rows))
    fmt = args.format if args.format is not None else "markdown"
    if fmt == "csv":
        text = emit_report(report, "csv")
    else:
        text = emit_markdown(report, value, expected_rates(report, value))
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
        except OSError as exc:
            raise OSError(f"cannot write report to {args.out}: {exc}") from exc
    else:
        sys.stdout.write(text)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 2
        return 0 if code == 0 else 2
    try:
        return _run(args)
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
