"""Convergence-study configuration and execution.

A study fixes a problem family (scalar decay problem, 1-D or 2-D diffusion,
or the stability-constant sweep), a list of fractional orders, and a list of
time-step counts; running it produces one report row per (alpha, K) cell,
with the reference solution computed once per (case, alpha) and every error
measured against it on the reference knots.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import NumericError
from .ode import OdeProblem, sampled_error_norms, solve_ode
from .report import ConvergenceReport, ReportRow, pairwise_rates
from .sources import Constant, Exp, ExpMinusOne, Power, Sin, TimeSource
from .spacetime import (
    SeparableSource,
    assemble_load,
    sampled_spacetime_error,
    step_solve,
)
from .spatial import assemble, build_mesh
from .temporal import TemporalMesh, stability_constant

__all__ = [
    "StudyConfig",
    "run_study",
    "theoretical_rate",
    "expected_rates",
    "table_studies",
    "PDE_CASES",
    "ode_source",
]


def parabola_1d(points: np.ndarray) -> np.ndarray:
    x = points[:, 0]
    return x * (1.0 - x)


def constant_one(points: np.ndarray) -> np.ndarray:
    return np.ones(points.shape[0])


def bubble_2d(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return x * (1.0 - x) * y * (1.0 - y)


# Benchmark case tags: (spatial dimension, time factor, space factor).  Tag
# (d) deliberately uses a spatial factor that does not vanish on the
# boundary; its load integrals are still well defined.
PDE_CASES: Dict[str, Tuple[int, TimeSource, object]] = {
    "a": (1, ExpMinusOne(), parabola_1d),
    "b": (1, Exp(), parabola_1d),
    "c": (1, Power(-0.3), parabola_1d),
    "d": (1, Power(-0.3), constant_one),
    "e": (2, Sin(), bubble_2d),
    "f": (2, Power(-0.3), bubble_2d),
}

_DEFAULT_SUBDIVISIONS = {"pde1d": 2000, "pde2d": 100}
_FAST_SUBDIVISIONS = {"pde1d": 512, "pde2d": 32}
_FAST_REF_CAP = 1024

# Extra temporal order of each benchmark load beyond the fractional order
# (the expected-rate annotation printed in parentheses next to measured rates).
_CASE_SMOOTHNESS = {"a": 1.0, "b": 0.5, "c": 0.2, "d": 0.2, "e": 1.0, "f": 0.2}


def ode_source(tag: str) -> TimeSource:
    """Scalar-problem time source from its config tag."""
    catalog = {
        "exp": Exp(),
        "expm1": ExpMinusOne(),
        "sin": Sin(),
        "const": Constant(1.0),
    }
    if tag in catalog:
        return catalog[tag]
    if tag.startswith("power:"):
        try:
            return Power(float(tag.split(":", 1)[1]))
        except ValueError as exc:
            raise ValueError(f"malformed power source tag {tag!r}") from exc
    raise ValueError(
        f"unknown source tag {tag!r}; expected exp, expm1, sin, const, or power:<exponent>"
    )


@dataclass(frozen=True)
class StudyConfig:
    """One convergence study: a problem family swept over alphas and steps."""

    mode: str
    alphas: Tuple[float, ...]
    step_counts: Tuple[int, ...]
    case: str = ""
    decay: float = 1.0
    source: str = "exp"
    subdivisions: Optional[int] = None
    ref_steps: int = 2000
    final_time: float = 1.0
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.mode not in ("ode", "pde1d", "pde2d", "infsup"):
            raise ValueError(f"unknown study mode {self.mode!r}")
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas:
            raise ValueError("study needs at least one fractional order")
        for alpha in alphas:
            if not 0.0 < alpha < 1.0:
                raise ValueError(
                    f"fractional order must lie strictly in (0, 1), got {alpha}"
                )
        steps = tuple(int(k) for k in self.step_counts)
        if not steps:
            raise ValueError("study needs at least one step count")
        if steps[0] < 1:
            raise ValueError(f"step counts must be positive, got {steps[0]}")
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError(f"step counts must be strictly increasing, got {steps}")
        if any(b != 2 * a for a, b in zip(steps, steps[1:])):
            warnings.warn(
                "step counts do not double; pairwise rates will mix scales",
                stacklevel=2,
            )
        if self.mode in ("ode", "pde1d", "pde2d"):
            if self.ref_steps <= steps[-1]:
                raise ValueError(
                    f"reference steps ({self.ref_steps}) must exceed the largest "
                    f"study step count ({steps[-1]})"
                )
        if self.mode in ("pde1d", "pde2d"):
            if self.case not in PDE_CASES:
                raise ValueError(f"unknown case tag {self.case!r}")
            dim = 1 if self.mode == "pde1d" else 2
            if PDE_CASES[self.case][0] != dim:
                raise ValueError(
                    f"case {self.case!r} is a {PDE_CASES[self.case][0]}-D problem, "
                    f"not valid for {self.mode}"
                )
        elif self.case:
            raise ValueError(f"mode {self.mode!r} does not take a case tag")
        if self.mode == "ode":
            ode_source(self.source)  # validates the tag
            if self.decay < 0.0:
                raise ValueError(f"decay coefficient must be nonnegative, got {self.decay}")
        if self.subdivisions is not None and self.subdivisions < 2:
            raise ValueError(f"need at least two subdivisions, got {self.subdivisions}")
        if self.final_time <= 0.0:
            raise ValueError(f"final time must be positive, got {self.final_time}")
        if self.jobs < 1:
            raise ValueError(f"worker count must be positive, got {self.jobs}")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "step_counts", steps)

    @property
    def resolved_subdivisions(self) -> Optional[int]:
        if self.mode in _DEFAULT_SUBDIVISIONS:
            return (
                self.subdivisions
                if self.subdivisions is not None
                else _DEFAULT_SUBDIVISIONS[self.mode]
            )
        return None


def _cell_context(config: StudyConfig, alpha: float, n_steps: int) -> str:
    tag = f" case {config.case}" if config.case else ""
    return f"{config.mode}{tag}, alpha={alpha:g}, K={n_steps}"


def _alpha_rows(config: StudyConfig, alpha: float) -> List[ReportRow]:
    """All report rows of one fractional order (reference computed once)."""
    if config.mode == "infsup":
        rows = []
        for n_steps in config.step_counts:
            constant = stability_constant(alpha, n_steps, config.final_time)
            rows.append(
                ReportRow("infsup", "", alpha, n_steps, None, constant, 0.0, None)
            )
        return rows

    if config.mode == "ode":
        source = ode_source(config.source)

        def solve(n_steps: int):
            mesh = TemporalMesh(config.final_time, n_steps, alpha)
            return solve_ode(OdeProblem(mesh, config.decay, source))

        try:
            reference = solve(config.ref_steps)
        except NumericError as exc:
            raise NumericError(
                f"reference failed for {_cell_context(config, alpha, config.ref_steps)}: {exc}"
            ) from exc
        errors = []
        for n_steps in config.step_counts:
            try:
                errors.append(sampled_error_norms(solve(n_steps), reference))
            except NumericError as exc:
                raise NumericError(
                    f"study cell failed for {_cell_context(config, alpha, n_steps)}: {exc}"
                ) from exc
        rates = _leading_rates([err[0] for err in errors])
        return [
            ReportRow("ode", config.source, alpha, n_steps, None, l2, aux, rate)
            for n_steps, (l2, aux), rate in zip(config.step_counts, errors, rates)
        ]

    # diffusion modes
    _, time_part, space_part = PDE_CASES[config.case]
    dim = 1 if config.mode == "pde1d" else 2
    subdivisions = config.resolved_subdivisions
    smesh = build_mesh(dim, subdivisions)
    mass, stiffness = assemble(smesh)
    source = SeparableSource(((time_part, space_part),))

    def solve(n_steps: int):
        tmesh = TemporalMesh(config.final_time, n_steps, alpha)
        load = assemble_load(source, tmesh, smesh)
        return step_solve(load, tmesh, smesh, mass, stiffness)

    try:
        reference = solve(config.ref_steps)
    except NumericError as exc:
        raise NumericError(
            f"reference failed for {_cell_context(config, alpha, config.ref_steps)}: {exc}"
        ) from exc
    errors = []
    for n_steps in config.step_counts:
        try:
            errors.append(sampled_spacetime_error(solve(n_steps), reference, mass))
        except NumericError as exc:
            raise NumericError(
                f"study cell failed for {_cell_context(config, alpha, n_steps)}: {exc}"
            ) from exc
    rates = _leading_rates([err[0] for err in errors])
    spacing = 1.0 / subdivisions
    return [
        ReportRow(config.mode, config.case, alpha, n_steps, spacing, l2, aux, rate)
        for n_steps, (l2, aux), rate in zip(config.step_counts, errors, rates)
    ]


def _leading_rates(errors: List[float]) -> List[Optional[float]]:
    """Pairwise rates aligned to rows: none for the first step count."""
    if len(errors) < 2 or any(err <= 0.0 for err in errors):
        return [None] * len(errors)
    rates, _ = pairwise_rates(errors)
    return [None] + [float(rate) for rate in rates]


def _alpha_rows_star(args: Tuple[StudyConfig, float]) -> List[ReportRow]:
    return _alpha_rows(*args)


def run_study(config: StudyConfig) -> ConvergenceReport:
    """Execute every cell of a study; deterministic for a fixed config."""
    if config.jobs == 1 or len(config.alphas) == 1:
        groups = [_alpha_rows(config, alpha) for alpha in config.alphas]
    else:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            groups = list(
                pool.map(_alpha_rows_star, [(config, a) for a in config.alphas])
            )
    return ConvergenceReport(tuple(row for group in groups for row in group))


def theoretical_rate(mode: str, case: str, alpha: float, value: str = "l2") -> Optional[float]:
    """Expected convergence rate shown next to measured ones, when one exists."""
    if mode == "ode":
        if value == "l2":
            return min(2.0 * alpha + 0.5, alpha + 1.0)
        return min(alpha + 0.5, 1.0)
    if mode in ("pde1d", "pde2d") and value == "l2":
        return alpha + _CASE_SMOOTHNESS[case]
    return None


def expected_rates(
    report: ConvergenceReport, value: str = "l2"
) -> Dict[Tuple[str, str, float], Optional[float]]:
    """Theory annotations for every group of a report (for Markdown output)."""
    return {
        key: theoretical_rate(key[0], key[1], key[2], value)
        for key, _ in report.groups()
    }


_TABLE_ALPHAS = (0.3, 0.5, 0.7, 0.9)
_TABLE_STEPS = (10, 20, 40, 80, 160, 320)


def table_studies(
    table: int, fast: bool = False, jobs: int = 1
) -> Tuple[List[StudyConfig], str]:
    """Study list reproducing one numbered benchmark table.

    Returns the configs plus the error column the table displays ("l2" or
    "aux").  Fast mode shrinks the spatial mesh and caps the reference grid
    so the sweep finishes in CI time.
    """
    ref = _FAST_REF_CAP if fast else 2000
    if table == 1:
        return (
            [
                StudyConfig(
                    mode="infsup",
                    alphas=(0.3, 0.5, 0.7, 0.9, 0.98),
                    step_counts=(20, 40, 80, 160, 320, 640),
                    jobs=jobs,
                )
            ],
            "l2",
        )
    if table == 2:
        return (
            [
                StudyConfig(
                    mode="ode",
                    alphas=_TABLE_ALPHAS,
                    step_counts=_TABLE_STEPS,
                    decay=1.0,
                    source="exp",
                    ref_steps=ref,
                    jobs=jobs,
                )
            ],
            "l2",
        )
    if table in (3, 4):
        cases = ("a", "b", "c", "d") if table == 3 else ("c", "d")
        subdivisions = _FAST_SUBDIVISIONS["pde1d"] if fast else 2000
        configs = [
            StudyConfig(
                mode="pde1d",
                alphas=_TABLE_ALPHAS,
                step_counts=_TABLE_STEPS,
                case=case,
                subdivisions=subdivisions,
                ref_steps=ref,
                jobs=jobs,
            )
            for case in cases
        ]
        return configs, ("l2" if table == 3 else "aux")
    if table == 5:
        subdivisions = _FAST_SUBDIVISIONS["pde2d"] if fast else 100
        configs = [
            StudyConfig(
                mode="pde2d",
                alphas=_TABLE_ALPHAS,
                step_counts=_TABLE_STEPS,
                case=case,
                subdivisions=subdivisions,
                ref_steps=ref,
                jobs=jobs,
            )
            for case in ("e", "f")
        ]
        return configs, "l2"
    raise ValueError(f"unknown table number {table}; expected 1-5")
