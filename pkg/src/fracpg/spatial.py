"""Piecewise-linear finite elements on the unit interval and unit square.

Provides structured meshes (1-D intervals, 2-D right-triangle grids obtained
by splitting each grid square along the same diagonal), exact element-level
mass/stiffness assembly, sparse symmetric-positive-definite solves, the
generalized eigendecomposition of the discrete Laplacian, and L2 projection
of spatial functions onto the interior hat-function space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.linalg import eigh
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.linalg import cg, splu

from .errors import NumericError

__all__ = [
    "SpatialMesh",
    "SpatialEigen",
    "build_mesh",
    "assemble",
    "assemble_full",
    "eigendecompose",
    "spd_solve",
    "load_vector",
    "l2_project_space",
]

_DIRECT_LIMIT = 2000

# Degree-4 quadrature rule on the reference triangle: barycentric abscissae
# and weights (weights sum to one; multiply by the element area).
_TRI_BARY = np.array(
    [
        [0.816847572980459, 0.091576213509771, 0.091576213509771],
        [0.091576213509771, 0.816847572980459, 0.091576213509771],
        [0.091576213509771, 0.091576213509771, 0.816847572980459],
        [0.108103018168070, 0.445948490915965, 0.445948490915965],
        [0.445948490915965, 0.108103018168070, 0.445948490915965],
        [0.445948490915965, 0.445948490915965, 0.108103018168070],
    ]
)
_TRI_WEIGHTS = np.array(
    [
        0.109951743655322,
        0.109951743655322,
        0.109951743655322,
        0.223381589678011,
        0.223381589678011,
        0.223381589678011,
    ]
)


@dataclass(frozen=True)
class SpatialMesh:
    """Structured simplicial mesh of the unit interval or unit square.

    ``nodes`` lists all grid nodes (boundary included) in lexicographic
    coordinate order; ``elements`` indexes into it with positive orientation.
    ``dof_of_node`` maps a node to its interior unknown index, or -1 on the
    Dirichlet boundary.
    """

    dim: int
    subdivisions: int
    nodes: np.ndarray
    elements: np.ndarray
    interior_nodes: np.ndarray
    dof_of_node: np.ndarray

    @property
    def spacing(self) -> float:
        return 1.0 / self.subdivisions

    @property
    def n_interior(self) -> int:
        return self.interior_nodes.size


@dataclass(frozen=True)
class SpatialEigen:
    """Generalized eigenpairs of (stiffness, mass), mass-orthonormal."""

    values: np.ndarray
    vectors: np.ndarray


def build_mesh(dim: int, subdivisions: int) -> SpatialMesh:
    """Uniform mesh with ``subdivisions`` cells per side.

    In two dimensions every grid square is split along its lower-left to
    upper-right diagonal, giving two positively oriented triangles of area
    ``h**2 / 2`` each.
    """
    m = subdivisions
    if dim not in (1, 2):
        raise ValueError(f"spatial dimension must be 1 or 2, got {dim}")
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise ValueError(f"subdivisions must be an integer >= 2, got {m}")
    ticks = np.arange(m + 1) * (1.0 / m)
    if dim == 1:
        nodes = ticks[:, None]
        elements = np.column_stack([np.arange(m), np.arange(1, m + 1)])
        interior = np.arange(1, m)
    else:
        # node index = ix * (m + 1) + iy: lexicographic in (x, y)
        xs = np.repeat(ticks, m + 1)
        ys = np.tile(ticks, m + 1)
        nodes = np.column_stack([xs, ys])
        ix, iy = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        ll = (ix * (m + 1) + iy).ravel()
        lr = ll + (m + 1)
        ul = ll + 1
        ur = lr + 1
        lower = np.column_stack([ll, lr, ur])
        upper = np.column_stack([ll, ur, ul])
        elements = np.vstack([lower, upper])
        gx, gy = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
        is_interior = (gx > 0) & (gx < m) & (gy > 0) & (gy < m)
        interior = np.flatnonzero(is_interior.ravel())
    dof_of_node = np.full(len(nodes), -1, dtype=int)
    dof_of_node[interior] = np.arange(interior.size)
    return SpatialMesh(dim, m, nodes, elements, interior, dof_of_node)


def _element_matrices(mesh: SpatialMesh) -> Tuple[np.ndarray, np.ndarray]:
    """Per-element mass and stiffness blocks, shape (n_el, k, k)."""
    if mesh.dim == 1:
        h = mesh.spacing
        n_el = len(mesh.elements)
        mass = np.broadcast_to(h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]]), (n_el, 2, 2))
        stiff = np.broadcast_to(1.0 / h * np.array([[1.0, -1.0], [-1.0, 1.0]]), (n_el, 2, 2))
        return mass, stiff
    verts = mesh.nodes[mesh.elements]  # (n_el, 3, 2)
    x, y = verts[:, :, 0], verts[:, :, 1]
    b = y[:, [1, 2, 0]] - y[:, [2, 0, 1]]
    c = x[:, [2, 0, 1]] - x[:, [1, 2, 0]]
    area = 0.5 * (
        (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
        - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    )
    stiff = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (
        4.0 * area[:, None, None]
    )
    mass = (area / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))
    return mass, stiff


def _accumulate(mesh: SpatialMesh, blocks: np.ndarray) -> csr_matrix:
    k = mesh.elements.shape[1]
    rows = np.repeat(mesh.elements, k, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, k)).ravel()
    n = len(mesh.nodes)
    out = coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return (out + out.T) * 0.5


def assemble_full(mesh: SpatialMesh) -> Tuple[csr_matrix, csr_matrix]:
    """Mass and stiffness on all nodes, boundary rows included."""
    mass_el, stiff_el = _element_matrices(mesh)
    return _accumulate(mesh, mass_el), _accumulate(mesh, stiff_el)


def assemble(mesh: SpatialMesh) -> Tuple[csr_matrix, csr_matrix]:
    """Mass and stiffness restricted to the interior unknowns."""
    mass, stiff = assemble_full(mesh)
    keep = mesh.interior_nodes
    return (
        mass[keep][:, keep].tocsr(),
        stiff[keep][:, keep].tocsr(),
    )


def eigendecompose(mass: csr_matrix, stiffness: csr_matrix, count: int) -> SpatialEigen:
    """Lowest ``count`` generalized eigenpairs of (stiffness, mass).

    Eigenvalues are ascending; eigenvectors come out mass-orthonormal.  Uses
    the dense symmetric-definite solver, so it is meant for moderate sizes.
    """
    n = mass.shape[0]
    if not (1 <= count <= n):
        raise ValueError(f"count must lie in [1, {n}], got {count}")
    dense_a = stiffness.toarray()
    dense_m = mass.toarray()
    if count == n:
        values, vectors = eigh(dense_a, dense_m)
    else:
        values, vectors = eigh(dense_a, dense_m, subset_by_index=[0, count - 1])
    residual = dense_a @ vectors - dense_m @ vectors * values[None, :]
    scale = np.abs(dense_a).sum(axis=1).max() + values[-1]
    if np.abs(residual).max() > 1e-10 * scale * np.abs(vectors).max():
        raise NumericError("generalized eigendecomposition failed its residual check")
    gram = vectors.T @ (dense_m @ vectors)
    if np.abs(gram - np.eye(count)).max() > 1e-9:
        raise NumericError("eigenvectors failed the mass-orthonormality check")
    return SpatialEigen(values, vectors)


def spd_solve(matrix: csr_matrix, rhs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Solve a sparse symmetric positive definite system to relative residual ``tol``.

    Small systems go through a direct sparse factorization (with iterative
    refinement until the residual target holds); larger ones use conjugate
    gradients with a diagonal preconditioner.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = matrix.shape[0]
    if rhs.shape != (n,):
        raise ValueError(f"rhs must have shape ({n},), got {rhs.shape}")
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros(n)
    if n <= _DIRECT_LIMIT:
        lu = splu(matrix.tocsc())
        x = lu.solve(rhs)
        for _ in range(3):
            residual = rhs - matrix @ x
            if np.linalg.norm(residual) <= tol * rhs_norm:
                return x
            x = x + lu.solve(residual)
        residual = rhs - matrix @ x
        if np.linalg.norm(residual) <= tol * rhs_norm:
            return x
        raise NumericError("direct solve failed to reach the residual target")
    diag = matrix.diagonal()
    if np.any(diag <= 0):
        raise NumericError("matrix is not positive definite (nonpositive diagonal)")
    precond = csr_matrix((1.0 / diag, (np.arange(n), np.arange(n))), shape=(n, n))
    x, info = cg(matrix, rhs, rtol=0.5 * tol, atol=0.0, maxiter=10 * n, M=precond)
    if info != 0:
        raise NumericError(f"conjugate gradients did not converge (info={info})")
    if np.linalg.norm(rhs - matrix @ x) > tol * rhs_norm:
        raise NumericError("conjugate gradients converged outside the residual target")
    return x


def load_vector(mesh: SpatialMesh, w: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Interior load vector of integrals of ``w`` against each hat function.

    ``w`` receives an ``(n_points, dim)`` coordinate array and must return
    the sampled values; integration is elementwise Gauss of polynomial
    degree >= 4.
    """
    full = np.zeros(len(mesh.nodes))
    if mesh.dim == 1:
        gauss_x, gauss_w = np.polynomial.legendre.leggauss(3)
        left = mesh.nodes[mesh.elements[:, 0], 0]
        h = mesh.spacing
        frac = 0.5 * (gauss_x + 1.0)  # in (0, 1)
        pts = left[:, None] + h * frac[None, :]
        vals = w(pts.reshape(-1, 1)).reshape(pts.shape)
        shapes = np.stack([1.0 - frac, frac])  # hat values at the Gauss points
        weights = 0.5 * h * gauss_w
        contrib = np.einsum("eq,q,lq->el", vals, weights, shapes)
    else:
        verts = mesh.nodes[mesh.elements]  # (n_el, 3, 2)
        area = mesh.spacing**2 / 2.0
        pts = np.einsum("qk,ekd->eqd", _TRI_BARY, verts)
        vals = w(pts.reshape(-1, 2)).reshape(pts.shape[:2])
        contrib = area * np.einsum("eq,q,ql->el", vals, _TRI_WEIGHTS, _TRI_BARY)
    np.add.at(full, mesh.elements.ravel(), contrib.ravel())
    return full[mesh.interior_nodes]


def l2_project_space(
    mesh: SpatialMesh,
    mass: csr_matrix,
    w: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-12,
) -> np.ndarray:
    """Nodal coefficients of the L2 projection of ``w`` onto interior hats."""
    return spd_solve(mass, load_vector(mesh, w), tol=tol)
