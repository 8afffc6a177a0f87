"""Space-time error norms between trial-space functions on different grids.

Two uniform temporal grids always share the uniform common refinement with
``lcm`` many cells, and every breakpoint of either solution is a grid point
there.  On each common-refinement cell the difference of the two solutions is
a fixed linear combination of ``(t - t_j)**alpha`` profiles that are smooth on
the cell interior, so composite Gauss-Legendre quadrature (8 points per cell,
i.e. order 16, far above the required order 6) integrates the squared
difference to a relative accuracy orders below the tolerances of interest.

Evaluation at the quadrature nodes exploits uniformity: nodes in cells with
the same offset pattern relative to a solution's own grid see the same kernel
``(g + delta)**alpha`` of integer gaps ``g``, so each batch of values is one
causal convolution of the coefficient array with that kernel.  Coefficients
may be vectors (one spatial coefficient row per time cell); an optional
callback applies the spatial mass matrix so the integrand becomes the squared
spatial L2 norm.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import roots_legendre

from .errors import NumericError
from .temporal import TemporalMesh

__all__ = ["union_cells", "eval_on_refinement", "union_l2_error", "pc_l2_error"]

_MAX_UNION_CELLS = 1_000_000


def union_cells(mesh_a: TemporalMesh, mesh_b: TemporalMesh) -> int:
    """Cell count of the common uniform refinement of two grids."""
    if mesh_a.alpha != mesh_b.alpha:
        raise ValueError(f"orders differ: {mesh_a.alpha} vs {mesh_b.alpha}")
    if not math.isclose(mesh_a.final_time, mesh_b.final_time, rel_tol=1e-12):
        raise ValueError(
            f"final times differ: {mesh_a.final_time} vs {mesh_b.final_time}"
        )
    n_union = int(np.lcm(mesh_a.n_cells, mesh_b.n_cells))
    if n_union > _MAX_UNION_CELLS:
        raise NumericError(
            f"common refinement of {mesh_a.n_cells} and {mesh_b.n_cells} cells "
            f"needs {n_union} cells; choose commensurate grids"
        )
    return n_union


def eval_on_refinement(
    mesh: TemporalMesh,
    cumulative: np.ndarray,
    n_union: int,
    offset: float,
) -> np.ndarray:
    """Values at one node per refinement cell: ``t = (j + offset) * dt_union``.

    ``cumulative`` has shape ``(K,)`` or ``(K, M)`` and holds coefficients in
    the cumulative basis.  Returns matching shape with leading axis
    ``n_union``.  Offset must lie in (0, 1]; the closed right end selects the
    cell's right knot (where the basis function starting at that knot
    contributes exactly zero).
    """
    n = mesh.n_cells
    ratio, remainder = divmod(n_union, n)
    if remainder != 0:
        raise ValueError(f"{n_union} union cells do not refine {n} cells")
    if not 0.0 < offset <= 1.0:
        raise ValueError(f"node offset must lie in (0, 1], got {offset}")
    coeffs = np.asarray(cumulative, dtype=float)
    squeeze = coeffs.ndim == 1
    if squeeze:
        coeffs = coeffs[:, None]
    out = np.empty((n_union,) + coeffs.shape[1:])
    gaps = np.arange(n, dtype=float)
    scale = mesh.dt**mesh.alpha
    for rho in range(ratio):
        delta = (rho + offset) / ratio
        kernel = scale * (gaps + delta) ** mesh.alpha
        values = fftconvolve(coeffs, kernel[:, None], axes=0)[:n]
        out[rho::ratio] = values
    return out[:, 0] if squeeze else out


def union_l2_error(
    mesh_a: TemporalMesh,
    cumulative_a: np.ndarray,
    mesh_b: TemporalMesh,
    cumulative_b: np.ndarray,
    mass_apply: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    order: int = 8,
) -> float:
    """L2(0,T) norm of the difference of two trial-space functions.

    For vector-valued coefficients the pointwise squared magnitude is
    ``d . mass_apply(d)`` (spatial L2 norm when the callback applies the
    spatial mass matrix; plain Euclidean when omitted).
    """
    n_union = union_cells(mesh_a, mesh_b)
    nodes, weights = roots_legendre(order)
    dt_union = mesh_a.final_time / n_union
    total = 0.0
    for node, weight in zip(nodes, weights):
        offset = 0.5 * (node + 1.0)
        diff = eval_on_refinement(mesh_a, cumulative_a, n_union, offset)
        diff -= eval_on_refinement(mesh_b, cumulative_b, n_union, offset)
        if diff.ndim == 1:
            magnitude = float(diff @ diff)
        else:
            weighted = mass_apply(diff) if mass_apply is not None else diff
            magnitude = float(np.sum(diff * weighted))
        total += 0.5 * weight * dt_union * magnitude
    return math.sqrt(max(total, 0.0))


def pc_l2_error(
    mesh_a: TemporalMesh,
    values_a: np.ndarray,
    mesh_b: TemporalMesh,
    values_b: np.ndarray,
    mass_apply: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> float:
    """Exact L2(0,T) norm of the difference of two piecewise constants.

    Each common-refinement cell lies inside exactly one cell of either grid,
    so the integral is a finite sum with no quadrature error.
    """
    n_union = union_cells(mesh_a, mesh_b)
    expand_a = np.repeat(values_a, n_union // mesh_a.n_cells, axis=0)
    diff = expand_a - np.repeat(values_b, n_union // mesh_b.n_cells, axis=0)
    if diff.ndim == 1:
        magnitude = float(diff @ diff)
    else:
        weighted = mass_apply(diff) if mass_apply is not None else diff
        magnitude = float(np.sum(diff * weighted))
    dt_union = mesh_a.final_time / n_union
    return math.sqrt(max(dt_union * magnitude, 0.0))
