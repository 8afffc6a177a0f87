"""Space-time Petrov-Galerkin solvers for time-fractional diffusion.

The package provides:

- :mod:`fracpg.special` -- certified two-parameter Mittag-Leffler evaluation;
- :mod:`fracpg.temporal` -- the fractional trial space (cumulative /
  differenced power bases), its Gram machinery, projections, and the
  inf-sup stability constant;
- :mod:`fracpg.ode` -- the scalar fractional relaxation solver and its
  error norms;
- :mod:`fracpg.spatial` -- P1 finite elements on the unit interval / square
  with mass and stiffness assembly, solves, and eigendecompositions;
- :mod:`fracpg.spacetime` -- the full space-time marching solver, a modal
  oracle, and space-time error norms;
- :mod:`fracpg.study` / :mod:`fracpg.report` -- the convergence-study
  harness and its CSV/markdown reporting;
- :mod:`fracpg.cli` -- the ``fracpg`` command-line benchmark driver.
"""

from .errors import NumericError
from .ode import OdeProblem, OdeSolution, ode_error_norms, sampled_error_norms, solve_ode
from .report import ConvergenceReport, ReportRow, emit_markdown, emit_report, parse_report
from .sources import Constant, Exp, ExpMinusOne, Power, Sin
from .spacetime import (
    SeparableSource,
    SpaceTimeSolution,
    assemble_load,
    dump_matrix_text,
    eval_solution,
    parse_matrix_text,
    sampled_spacetime_error,
    spacetime_error,
    spectral_oracle_solve,
    step_solve,
)
from .spatial import SpatialMesh, assemble, build_mesh, eigendecompose, spd_solve
from .special import MittagLefflerParams, mittag_leffler
from .study import StudyConfig, run_study, table_studies, theoretical_rate
from .temporal import (
    PiecewiseConstant,
    TemporalMesh,
    TrialCoeffs,
    eval_trial,
    frac_deriv_trial,
    l2_project_time,
    stability_constant,
)

__version__ = "0.1.0"

__all__ = [
    "Constant",
    "ConvergenceReport",
    "Exp",
    "ExpMinusOne",
    "MittagLefflerParams",
    "NumericError",
    "OdeProblem",
    "OdeSolution",
    "PiecewiseConstant",
    "Power",
    "ReportRow",
    "SeparableSource",
    "Sin",
    "SpaceTimeSolution",
    "SpatialMesh",
    "StudyConfig",
    "TemporalMesh",
    "TrialCoeffs",
    "assemble",
    "assemble_load",
    "build_mesh",
    "dump_matrix_text",
    "eigendecompose",
    "emit_markdown",
    "emit_report",
    "eval_solution",
    "eval_trial",
    "frac_deriv_trial",
    "l2_project_time",
    "mittag_leffler",
    "ode_error_norms",
    "parse_matrix_text",
    "parse_report",
    "run_study",
    "sampled_error_norms",
    "sampled_spacetime_error",
    "solve_ode",
    "spacetime_error",
    "spd_solve",
    "spectral_oracle_solve",
    "stability_constant",
    "step_solve",
    "table_studies",
    "theoretical_rate",
    "__version__",
]
