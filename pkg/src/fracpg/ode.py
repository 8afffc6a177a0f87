"""Petrov-Galerkin marching solver for the scalar fractional problem.

Solves ``D^alpha u + decay * u = f`` on ``(0, T]`` with ``u(0) = 0``: trial
space of fractional powers, test space of piecewise constants.  In the
differenced basis the pairing of the fractional derivative is diagonal, so
the full system is lower-triangular Toeplitz and one dense forward
substitution produces the whole trajectory.

Error norms against a refined reference are evaluated exactly: on a nested
refinement both solutions live in the fine trial space, so the squared L2
error is a quadratic form in the fine Gram matrix, and the fractional
derivative of the error is piecewise constant with an elementary norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import solve_triangular

from .errnorm import pc_l2_error, union_l2_error
from .sources import TimeSource, source_slab_integrals
from .temporal import (
    PiecewiseConstant,
    TemporalMesh,
    TemporalSystem,
    TrialCoeffs,
    assemble_temporal_system,
    eval_trial,
    frac_deriv_trial,
    to_cumulative,
    trial_gram,
)

__all__ = [
    "OdeProblem",
    "OdeSolution",
    "slab_loads",
    "march",
    "solve_ode",
    "galerkin_residual",
    "ode_error_norms",
    "sampled_error_norms",
]


@dataclass(frozen=True)
class OdeProblem:
    """Scalar fractional initial value problem with homogeneous start."""

    mesh: TemporalMesh
    decay: float
    source: TimeSource

    def __post_init__(self) -> None:
        if not (np.isfinite(self.decay) and self.decay >= 0.0):
            raise ValueError(f"decay coefficient must be >= 0, got {self.decay}")


@dataclass(frozen=True)
class OdeSolution:
    """Discrete solution: trial coefficients plus the problem they solve."""

    problem: OdeProblem
    coeffs: TrialCoeffs


def slab_loads(mesh: TemporalMesh, source: TimeSource) -> PiecewiseConstant:
    """Right-hand side integrals of the source over each mesh cell.

    The returned cell values are the integrals themselves (the pairing with
    the indicator test functions), not cell averages.
    """
    return PiecewiseConstant(mesh, source_slab_integrals(source, mesh.times))


def march(system: TemporalSystem, decay: float, loads: np.ndarray) -> np.ndarray:
    """Forward substitution on the lower-triangular Toeplitz system.

    Solves ``(mass + decay * stiffness) c = loads`` for the trial
    coefficients in the system's own basis variant.
    """
    n = system.mesh.n_cells
    loads = np.asarray(loads, dtype=float)
    if loads.shape != (n,):
        raise ValueError(f"loads must have shape ({n},), got {loads.shape}")
    full = system.mass_dense()
    if decay != 0.0:
        full += decay * system.stiffness_dense()
    return solve_triangular(full, loads, lower=True)


def solve_ode(problem: OdeProblem) -> OdeSolution:
    """Solve the fractional initial value problem on the problem's mesh."""
    system = assemble_temporal_system(problem.mesh, "differenced")
    loads = slab_loads(problem.mesh, problem.source)
    coeffs = march(system, problem.decay, loads.values)
    return OdeSolution(problem, TrialCoeffs(problem.mesh, coeffs, "differenced"))


def galerkin_residual(sol: OdeSolution) -> float:
    """Largest normalized residual of the discrete equations."""
    problem = sol.problem
    system = assemble_temporal_system(problem.mesh, sol.coeffs.variant)
    full = system.mass_dense() + problem.decay * system.stiffness_dense()
    loads = slab_loads(problem.mesh, problem.source).values
    residual = full @ sol.coeffs.coeffs - loads
    scale = np.abs(full) @ np.abs(sol.coeffs.coeffs) + np.abs(loads)
    return float(np.max(np.abs(residual) / np.maximum(scale, 1e-300)))


def ode_error_norms(sol: OdeSolution, reference: OdeSolution) -> Tuple[float, float]:
    """Relative L2 error and relative fractional-derivative (energy) error.

    Both are normalized by the L2 norm of the reference solution.  When the
    reference grid refines the solution grid by an integer factor, the coarse
    solution is re-expressed exactly in the fine trial basis and both norms
    are quadratic forms with no quadrature error; otherwise the difference is
    integrated on the common refinement (see ``errnorm``).  The energy error
    is exact either way because fractional derivatives of both solutions are
    piecewise constant.
    """
    mesh_c = sol.coeffs.mesh
    mesh_f = reference.coeffs.mesh
    if mesh_c.alpha != mesh_f.alpha:
        raise ValueError(f"orders differ: {mesh_c.alpha} vs {mesh_f.alpha}")
    if not math.isclose(mesh_c.final_time, mesh_f.final_time, rel_tol=1e-12):
        raise ValueError(
            f"final times differ: {mesh_c.final_time} vs {mesh_f.final_time}"
        )

    cum_coarse = to_cumulative(sol.coeffs).coeffs
    cum_fine = to_cumulative(reference.coeffs).coeffs
    gram = trial_gram(mesh_f, "cumulative")
    ref_norm = math.sqrt(max(cum_fine @ gram @ cum_fine, 0.0))
    if ref_norm == 0.0:
        raise ValueError("reference solution vanishes; relative error undefined")

    ratio, remainder = divmod(mesh_f.n_cells, mesh_c.n_cells)
    if remainder == 0:
        injected = np.zeros(mesh_f.n_cells)
        injected[::ratio] = cum_coarse
        diff = cum_fine - injected
        abs_l2 = math.sqrt(max(diff @ gram @ diff, 0.0))
    else:
        abs_l2 = union_l2_error(mesh_c, cum_coarse, mesh_f, cum_fine)

    abs_energy = pc_l2_error(
        mesh_c,
        frac_deriv_trial(sol.coeffs).values,
        mesh_f,
        frac_deriv_trial(reference.coeffs).values,
    )
    return abs_l2 / ref_norm, abs_energy / ref_norm


def sampled_error_norms(sol: OdeSolution, reference: OdeSolution) -> Tuple[float, float]:
    """Relative errors in the discrete norms used by the benchmark tables.

    Both solutions are sampled at the reference grid knots and compared in
    the plain Euclidean (rectangle-rule) norm, normalized by the sampled
    norm of the reference; their fractional derivatives — left limits at the
    knots, i.e. cell values — likewise.  On nested grids this is within a
    fraction of a percent of the exact norms of ``ode_error_norms``; it is
    kept separate because the published error cells follow this sampled
    convention, visibly so on non-nested grid pairs.
    """
    mesh_c = sol.coeffs.mesh
    mesh_f = reference.coeffs.mesh
    if mesh_c.alpha != mesh_f.alpha:
        raise ValueError(f"orders differ: {mesh_c.alpha} vs {mesh_f.alpha}")
    if not math.isclose(mesh_c.final_time, mesh_f.final_time, rel_tol=1e-12):
        raise ValueError(
            f"final times differ: {mesh_c.final_time} vs {mesh_f.final_time}"
        )
    knots = mesh_f.times[1:]
    ref_vals = eval_trial(reference.coeffs, knots)
    denom = float(np.linalg.norm(ref_vals))
    if denom == 0.0:
        raise ValueError("reference solution vanishes; relative error undefined")
    diff = eval_trial(sol.coeffs, knots) - ref_vals
    err_l2 = float(np.linalg.norm(diff)) / denom

    deriv_fine = frac_deriv_trial(reference.coeffs).values
    deriv_coarse = frac_deriv_trial(sol.coeffs).values
    n_f, n_c = mesh_f.n_cells, mesh_c.n_cells
    containing = np.ceil(np.arange(1, n_f + 1) * (n_c / n_f)).astype(int) - 1
    deriv_diff = deriv_fine - deriv_coarse[containing]
    err_energy = float(np.linalg.norm(deriv_diff)) / denom
    return err_l2, err_energy
