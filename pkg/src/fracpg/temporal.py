"""Temporal discretization on fractional-power trial functions.

The trial space over a uniform grid ``0 = t_0 < t_1 < ... < t_K = T`` is
spanned by functions with a ``(t - t_{k-1})^alpha`` profile; the test space is
the space of piecewise constants on the same grid.  Because the
Riemann-Liouville derivative of order ``alpha`` maps the trial space exactly
onto the test space, every matrix of the Petrov-Galerkin pairing is available
in closed form and no quadrature enters the solver itself.

Two bases of the same trial space are supported:

* ``"cumulative"``: ``phi_k(t) = (t - t_{k-1})^alpha`` for ``t >= t_{k-1}``,
  zero before.  Simple to evaluate, but the fractional derivative of each
  ``phi_k`` is supported on all of ``[t_{k-1}, T]`` so the temporal mass
  matrix is dense lower triangular.
* ``"differenced"``: ``phi_k - phi_{k+1}`` (with ``phi_{K+1} = 0``).  The
  fractional derivative of each basis function is the indicator of a single
  cell, which makes the temporal mass matrix a multiple of the identity and
  the whole solve a marching scheme.  This is the default everywhere.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal, Union

import numpy as np
from scipy import integrate
from scipy.linalg import cholesky, matmul_toeplitz, solve_triangular, svdvals
from scipy.special import roots_jacobi, roots_legendre

from .errors import NumericError

__all__ = [
    "TemporalMesh",
    "TrialCoeffs",
    "PiecewiseConstant",
    "TemporalSystem",
    "Variant",
    "power_increments",
    "power_second_diffs",
    "assemble_temporal_system",
    "eval_trial",
    "frac_deriv_trial",
    "rl_integral_of_cells",
    "to_cumulative",
    "to_differenced",
    "l2_project_time",
    "trial_gram",
    "trial_norm_l2",
    "pc_norm_l2",
    "stability_constant",
    "fractional_ritz_project",
]

Variant = Literal["cumulative", "differenced"]

# Orders tried by the self-refining Gauss rules (doubling until two successive
# orders agree).
_QUAD_ORDERS = (8, 16, 32, 64, 128, 256)


@dataclass(frozen=True)
class TemporalMesh:
    """Uniform partition of ``[0, final_time]`` with a fractional order.

    Parameters
    ----------
    final_time
        Right endpoint ``T > 0`` of the time interval.
    n_cells
        Number of cells ``K >= 1``; the grid points are ``k * dt``.
    alpha
        Fractional differentiation order, strictly inside ``(0, 1)``.
    """

    final_time: float
    n_cells: int
    alpha: float

    def __post_init__(self) -> None:
        if not self.final_time > 0.0:
            raise ValueError(f"final_time must be positive, got {self.final_time}")
        if self.n_cells < 1:
            raise ValueError(f"need at least one cell, got n_cells={self.n_cells}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(
                f"fractional order must lie strictly in (0, 1), got {self.alpha}"
            )
        if self.alpha > 0.95:
            warnings.warn(
                f"alpha={self.alpha} is close to 1, where the scheme's "
                "stability constant degenerates; expect amplified errors",
                stacklevel=2,
            )

    @property
    def dt(self) -> float:
        """Time step ``T / K``."""
        return self.final_time / self.n_cells

    @property
    def times(self) -> np.ndarray:
        """All grid points ``t_0 = 0, ..., t_K = T`` (length ``K + 1``)."""
        return np.linspace(0.0, self.final_time, self.n_cells + 1)

    def compatible_with(self, other: "TemporalMesh") -> bool:
        return (
            self.final_time == other.final_time
            and self.n_cells == other.n_cells
            and self.alpha == other.alpha
        )


def _as_vector(values, n: int, what: str) -> np.ndarray:
    out = np.asarray(values, dtype=float)
    if out.shape != (n,):
        raise ValueError(f"{what} must have shape ({n},), got {out.shape}")
    return out


@dataclass(frozen=True)
class TrialCoeffs:
    """Coefficients of a trial-space function in one of the two bases."""

    mesh: TemporalMesh
    coeffs: np.ndarray
    variant: Variant = "differenced"

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "coeffs", _as_vector(self.coeffs, self.mesh.n_cells, "coeffs")
        )
        if self.variant not in ("cumulative", "differenced"):
            raise ValueError(f"unknown basis variant {self.variant!r}")


@dataclass(frozen=True)
class PiecewiseConstant:
    """A piecewise-constant function: one value per mesh cell."""

    mesh: TemporalMesh
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "values", _as_vector(self.values, self.mesh.n_cells, "values")
        )

    def __call__(self, t):
        """Evaluate at scalar or array times (right-continuous at knots)."""
        t = np.asarray(t, dtype=float)
        idx = np.minimum(
            np.floor(t / self.mesh.dt).astype(int), self.mesh.n_cells - 1
        )
        return self.values[idx]


def power_increments(alpha: float, n: int) -> np.ndarray:
    """First differences of ``k -> k**(alpha+1)``: entries ``k=1..n``.

    These are strictly positive and strictly increasing in ``k`` (the map is
    convex), and they telescope: their sum equals ``n**(alpha+1)``.
    """
    k = np.arange(n + 1, dtype=float)
    return np.diff(k ** (alpha + 1.0))


def power_second_diffs(alpha: float, n: int) -> np.ndarray:
    """Second differences of ``k -> k**(alpha+1)``: entries ``k=1..n``.

    Strictly positive and strictly decreasing; they decay like
    ``k**(alpha-1)`` and are the off-diagonal weights of the marching scheme's
    history sum.
    """
    return np.diff(power_increments(alpha, n + 1))


@dataclass(frozen=True)
class TemporalSystem:
    """Closed-form temporal matrices of the Petrov-Galerkin pairing.

    ``stiff_col`` is the first column of the lower-triangular Toeplitz matrix
    of integrals of trial functions over test cells (the temporal stiffness
    matrix).  The temporal mass matrix — integrals of the *fractional
    derivative* of trial functions over test cells — is ``mass_scale`` times
    either the lower-triangular all-ones matrix (cumulative variant) or the
    identity (differenced variant).
    """

    mesh: TemporalMesh
    variant: Variant
    stiff_col: np.ndarray
    mass_scale: float

    def stiffness_dense(self) -> np.ndarray:
        n = self.mesh.n_cells
        out = np.zeros((n, n))
        for k in range(n):
            out[k:, k] = self.stiff_col[: n - k]
        return out

    def mass_dense(self) -> np.ndarray:
        n = self.mesh.n_cells
        if self.variant == "differenced":
            return self.mass_scale * np.eye(n)
        return self.mass_scale * np.tril(np.ones((n, n)))

    def stiffness_matvec(self, coeffs: np.ndarray) -> np.ndarray:
        """Apply the lower-triangular Toeplitz stiffness without forming it."""
        col = self.stiff_col
        row = np.zeros_like(col)
        row[0] = col[0]
        return matmul_toeplitz((col, row), coeffs)


def assemble_temporal_system(
    mesh: TemporalMesh, variant: Variant = "differenced"
) -> TemporalSystem:
    """Build the temporal stiffness column and mass scale for a basis variant.

    Everything is exact (no quadrature): with ``b = dt**(alpha+1)/(alpha+1)``
    the cumulative stiffness column is ``b`` times the first differences of
    ``k**(alpha+1)``, and the differenced column is ``b`` times
    ``(1, e_1, ..., e_{K-1})`` where ``e_k`` are the second differences.  The
    differenced diagonal entry is ``b * 1`` because cell ``k`` sees only the
    leading ``(t - t_{k-1})^alpha`` branch of its own basis function.
    """
    n, a = mesh.n_cells, mesh.alpha
    b = mesh.dt ** (a + 1.0) / (a + 1.0)
    if variant == "cumulative":
        col = b * power_increments(a, n)
    elif variant == "differenced":
        col = np.empty(n)
        col[0] = b
        col[1:] = b * power_second_diffs(a, n - 1)
    else:
        raise ValueError(f"unknown basis variant {variant!r}")
    mass_scale = mesh.dt * math.gamma(a + 1.0)
    return TemporalSystem(mesh, variant, col, mass_scale)


def to_cumulative(coeffs: TrialCoeffs) -> TrialCoeffs:
    if coeffs.variant == "cumulative":
        return coeffs
    return TrialCoeffs(
        coeffs.mesh, np.diff(coeffs.coeffs, prepend=0.0), "cumulative"
    )


def to_differenced(coeffs: TrialCoeffs) -> TrialCoeffs:
    if coeffs.variant == "differenced":
        return coeffs
    return TrialCoeffs(coeffs.mesh, np.cumsum(coeffs.coeffs), "differenced")


def eval_trial(coeffs: TrialCoeffs, t):
    """Evaluate the trial-space function at time(s) ``t`` in ``[0, T]``.

    Exact up to rounding: each basis contribution is a shifted power.
    Accepts a scalar or an array; returns the matching shape.
    """
    mesh = coeffs.mesh
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0.0) or np.any(t_arr > mesh.final_time * (1.0 + 1e-12)):
        raise ValueError(f"time outside [0, {mesh.final_time}]")
    c = to_cumulative(coeffs).coeffs
    starts = mesh.dt * np.arange(mesh.n_cells)
    shifted = t_arr[..., None] - starts
    np.clip(shifted, 0.0, None, out=shifted)
    out = (shifted**mesh.alpha) @ c
    return out[0] if np.isscalar(t) or np.ndim(t) == 0 else out


def frac_deriv_trial(coeffs: TrialCoeffs) -> PiecewiseConstant:
    """Riemann-Liouville derivative of order ``alpha`` of a trial function.

    The result is exactly piecewise constant: ``gamma(alpha+1)`` times the
    differenced coefficients (equivalently, times the running sums of the
    cumulative ones).
    """
    g = math.gamma(coeffs.mesh.alpha + 1.0)
    return PiecewiseConstant(coeffs.mesh, g * to_differenced(coeffs).coeffs)


def rl_integral_of_cells(pc: PiecewiseConstant) -> TrialCoeffs:
    """Riemann-Liouville integral of order ``alpha`` of a piecewise constant.

    The integral of a cell indicator is exactly a differenced basis function
    over ``gamma(alpha+1)``, so the result lies in the trial space; composing
    with :func:`frac_deriv_trial` is the identity on cell values.
    """
    g = math.gamma(pc.mesh.alpha + 1.0)
    return TrialCoeffs(pc.mesh, pc.values / g, "differenced")


def _gauss_cell_averages(mesh: TemporalMesh, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Cell averages of a callable by order-doubling Gauss-Legendre.

    Cells where fixed-order rules stall (integrands with algebraic
    singularities, typically at ``t = 0``) are redone one by one with an
    adaptive rule.
    """
    edges = mesh.times
    prev = None
    settled = np.zeros(mesh.n_cells, dtype=bool)
    for order in _QUAD_ORDERS[:4]:
        x, w = roots_legendre(order)
        # nodes for all cells at once: shape (K, order)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes = mid[:, None] + (0.5 * mesh.dt) * x[None, :]
        avg = np.asarray(f(nodes)) @ w * 0.5
        if prev is not None:
            tol = 1e-12 * np.maximum(1.0, np.abs(avg))
            settled = np.abs(avg - prev) <= tol
            if bool(np.all(settled)):
                return avg
        prev = avg
    avg = avg.copy()
    for cell in np.nonzero(~settled)[0]:
        val, abserr = integrate.quad(
            lambda s: float(f(np.asarray(s, dtype=float))),
            edges[cell],
            edges[cell + 1],
            epsabs=1e-13 * mesh.dt,
            epsrel=1e-13,
            limit=200,
        )
        if abserr > 1e-10 * max(mesh.dt, abs(val)):
            raise NumericError(
                f"cell-average quadrature did not settle (cell {cell + 1})"
            )
        avg[cell] = val / mesh.dt
    return avg


def l2_project_time(
    mesh: TemporalMesh,
    f: Union[PiecewiseConstant, TrialCoeffs, Callable],
) -> PiecewiseConstant:
    """L2-orthogonal projection onto piecewise constants (cell averaging).

    Piecewise constants are returned unchanged (bitwise), trial functions are
    averaged in closed form through the temporal stiffness column, and
    arbitrary callables fall back to self-refining Gauss quadrature.
    """
    if isinstance(f, PiecewiseConstant):
        if f.mesh is not mesh and not f.mesh.compatible_with(mesh):
            raise ValueError("piecewise constant lives on a different mesh")
        return PiecewiseConstant(mesh, f.values)
    if isinstance(f, TrialCoeffs):
        if f.mesh is not mesh and not f.mesh.compatible_with(mesh):
            raise ValueError("trial coefficients live on a different mesh")
        system = assemble_temporal_system(mesh, f.variant)
        return PiecewiseConstant(
            mesh, system.stiffness_matvec(f.coeffs) / mesh.dt
        )
    if not callable(f):
        raise ValueError(f"cannot project object of type {type(f).__name__}")
    return PiecewiseConstant(mesh, _gauss_cell_averages(mesh, f))


@lru_cache(maxsize=8)
def _overlap_table(alpha: float, n: int) -> np.ndarray:
    """Table ``S[g, m] = integral_0^m s^alpha (s+g)^alpha ds``.

    Shape ``(n, n+1)`` with gaps ``g = 0..n-1`` along axis 0 and upper limits
    ``m = 0..n`` along axis 1.  Unit-cell pieces are integrated with
    Gauss-Jacobi (weight ``s^alpha``) on the first cell, where the integrand
    has an algebraic endpoint singularity in its derivatives, and plain
    Gauss-Legendre away from it; orders double until two passes agree to
    1e-12 relative.
    """
    gaps = np.arange(n, dtype=float)

    def build(order: int) -> np.ndarray:
        pieces = np.empty((n, n))
        # first unit cell: weight s^alpha made explicit
        xj, wj = roots_jacobi(order, 0.0, alpha)
        sj = 0.5 * (xj + 1.0)
        pieces[:, 0] = (2.0 ** (-alpha - 1.0)) * (
            (sj[None, :] + gaps[:, None]) ** alpha @ wj
        )
        pieces[0, 0] = 1.0 / (2.0 * alpha + 1.0)  # g = 0 in closed form
        xl, wl = roots_legendre(order)
        sl_unit = 0.5 * (xl + 1.0)
        for j in range(1, n):
            s = j + sl_unit
            smooth = s**alpha * 0.5
            pieces[:, j] = ((s[None, :] + gaps[:, None]) ** alpha * smooth) @ wl
        return pieces

    prev = None
    for order in _QUAD_ORDERS[:4]:
        pieces = build(order)
        if prev is not None:
            scale = np.maximum(1.0, np.abs(pieces))
            if np.all(np.abs(pieces - prev) <= 1e-12 * scale):
                break
            if order == _QUAD_ORDERS[3]:
                raise NumericError(
                    "overlap-integral quadrature did not settle to 1e-12"
                )
        prev = pieces
    table = np.zeros((n, n + 1))
    np.cumsum(pieces, axis=1, out=table[:, 1:])
    return table


def trial_gram(mesh: TemporalMesh, variant: Variant = "cumulative") -> np.ndarray:
    """Dense Gram matrix of the trial basis (symmetric positive definite).

    Cumulative entry ``(k, l)``, for ``k <= l``, is the integral of
    ``(t - t_{k-1})^alpha (t - t_{l-1})^alpha`` over ``[t_{l-1}, T]``; the
    differenced Gram is obtained from it by the (exact) bidiagonal change of
    basis.
    """
    n, a = mesh.n_cells, mesh.alpha
    table = _overlap_table(a, n)
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    upper = n - np.maximum(idx[:, None], idx[None, :])
    gram = mesh.dt ** (2.0 * a + 1.0) * table[gap, upper]
    if variant == "differenced":
        # columns of the change of basis: diff_k = cum_k - cum_{k+1}
        step = np.eye(n)
        step -= np.diag(np.ones(n - 1), k=-1)
        gram = step.T @ gram @ step
    elif variant != "cumulative":
        raise ValueError(f"unknown basis variant {variant!r}")
    return 0.5 * (gram + gram.T)


def trial_norm_l2(coeffs: TrialCoeffs) -> float:
    """Exact L2(0, T) norm of a trial-space function (via the Gram matrix)."""
    gram = trial_gram(coeffs.mesh, coeffs.variant)
    return float(math.sqrt(max(coeffs.coeffs @ gram @ coeffs.coeffs, 0.0)))


def pc_norm_l2(pc: PiecewiseConstant) -> float:
    """Exact L2(0, T) norm of a piecewise constant."""
    return float(math.sqrt(pc.mesh.dt) * np.linalg.norm(pc.values))


def stability_constant(alpha: float, n_cells: int, final_time: float = 1.0) -> float:
    """Smallest value of ``|Pi v|^2 / |v|^2`` over the trial space.

    ``Pi`` is the cell-averaging projection; the minimum is the smallest
    eigenvalue of the generalized symmetric problem pairing the projected
    Gram against the trial Gram.  Computed in the differenced basis (better
    conditioned) by Cholesky reduction and singular values:  with
    ``G = L L^T`` the eigenvalues are squared singular values of
    ``Ms @ inv(L).T / sqrt(dt)`` where ``Ms`` is the temporal stiffness.
    The value is independent of ``final_time`` (both norms rescale alike).
    """
    mesh = TemporalMesh(final_time, n_cells, alpha)
    system = assemble_temporal_system(mesh, "differenced")
    stiff = system.stiffness_dense()
    gram = trial_gram(mesh, "differenced")
    try:
        chol = cholesky(gram, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise NumericError(f"trial Gram not positive definite: {exc}") from exc
    reduced = solve_triangular(chol, stiff.T, lower=True)
    sigma = svdvals(reduced)
    return float(sigma[-1] ** 2 / mesh.dt)


def fractional_ritz_project(
    mesh: TemporalMesh,
    dalpha_v: Union[PiecewiseConstant, Callable],
) -> TrialCoeffs:
    """Trial function whose fractional derivative is the projection of ``dalpha_v``.

    The caller supplies the order-``alpha`` derivative of the target (either
    its exact cell averages or a callable to be averaged); matching it
    against the test space determines the trial coefficients exactly.
    """
    averages = l2_project_time(mesh, dalpha_v)
    return TrialCoeffs(
        mesh, averages.values / math.gamma(mesh.alpha + 1.0), "differenced"
    )
