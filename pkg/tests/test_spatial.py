"""Tests for the piecewise-linear spatial finite element layer.

Oracles: hand-solved small systems (3x3 tridiagonal solve, the one-node
two-dimensional patch, the unit-source bubble), the closed-form discrete
eigenvalues of the uniform 1-D mesh, and continuum Laplacian eigenvalues.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracpg.errors import NumericError
from fracpg.spatial import (
    assemble,
    assemble_full,
    build_mesh,
    eigendecompose,
    l2_project_space,
    spd_solve,
)


def _ones(points: np.ndarray) -> np.ndarray:
    return np.ones(len(points))


class TestBuildMesh:
    def test_interval_mesh_layout(self):
        mesh = build_mesh(1, 4)
        np.testing.assert_allclose(
            mesh.nodes[mesh.interior_nodes].ravel(), [0.25, 0.5, 0.75]
        )
        assert mesh.elements.shape == (4, 2)
        assert mesh.spacing == 0.25
        # element lengths all h
        lengths = np.diff(mesh.nodes[mesh.elements], axis=1)
        np.testing.assert_allclose(lengths.ravel(), 0.25, rtol=1e-15)

    def test_square_mesh_counts_smallest(self):
        mesh = build_mesh(2, 2)
        assert mesh.n_interior == 1
        assert len(mesh.elements) == 8
        np.testing.assert_allclose(mesh.nodes[mesh.interior_nodes][0], [0.5, 0.5])

    def test_square_mesh_counts_and_areas(self):
        mesh = build_mesh(2, 16)
        assert mesh.n_interior == 225
        assert len(mesh.elements) == 512
        verts = mesh.nodes[mesh.elements]
        x, y = verts[:, :, 0], verts[:, :, 1]
        signed = 0.5 * (
            (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
            - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
        )
        np.testing.assert_allclose(signed, mesh.spacing**2 / 2.0, rtol=1e-13)
        assert np.all(signed > 0)

    @pytest.mark.parametrize("dim,subdivisions", [(1, 8), (2, 6)])
    def test_refined_mesh_nodes_nest_exactly(self, dim, subdivisions):
        coarse = build_mesh(dim, subdivisions)
        fine = build_mesh(dim, 2 * subdivisions)
        fine_set = {tuple(p) for p in fine.nodes}
        assert all(tuple(p) in fine_set for p in coarse.nodes)

    def test_invalid_arguments_rejected(self):
        with pytest.raises(ValueError):
            build_mesh(3, 4)
        with pytest.raises(ValueError):
            build_mesh(1, 1)
        with pytest.raises(ValueError):
            build_mesh(2, 0)

    def test_boundary_nodes_have_no_dof(self):
        mesh = build_mesh(2, 4)
        on_boundary = (
            (mesh.nodes[:, 0] == 0.0)
            | (mesh.nodes[:, 0] == 1.0)
            | (mesh.nodes[:, 1] == 0.0)
            | (mesh.nodes[:, 1] == 1.0)
        )
        assert np.all(mesh.dof_of_node[on_boundary] == -1)
        interior_dofs = mesh.dof_of_node[~on_boundary]
        assert sorted(interior_dofs) == list(range(mesh.n_interior))


class TestAssembly:
    def test_interval_matrices_closed_form(self):
        mass, stiff = assemble(build_mesh(1, 4))
        np.testing.assert_allclose(
            stiff.toarray(), [[8, -4, 0], [-4, 8, -4], [0, -4, 8]], atol=1e-13
        )
        np.testing.assert_allclose(
            mass.toarray(),
            [
                [1 / 6, 1 / 24, 0],
                [1 / 24, 1 / 6, 1 / 24],
                [0, 1 / 24, 1 / 6],
            ],
            atol=1e-15,
        )

    def test_one_node_square_patch(self):
        mass, stiff = assemble(build_mesh(2, 2))
        assert stiff[0, 0] == pytest.approx(4.0, rel=1e-14)
        assert mass[0, 0] == pytest.approx(0.125, rel=1e-14)
        assert stiff.shape == (1, 1) and mass.shape == (1, 1)

    @pytest.mark.parametrize("dim,subdivisions", [(1, 7), (2, 5)])
    def test_symmetry_and_stiffness_kernel(self, dim, subdivisions):
        mesh = build_mesh(dim, subdivisions)
        mass_full, stiff_full = assemble_full(mesh)
        for matrix in (mass_full, stiff_full):
            assert abs(matrix - matrix.T).max() <= 1e-14
        ones = np.ones(stiff_full.shape[0])
        assert np.abs(stiff_full @ ones).max() <= 1e-12

    @pytest.mark.parametrize("dim,subdivisions", [(1, 4), (1, 10), (2, 4), (2, 9)])
    def test_hat_function_integrals(self, dim, subdivisions):
        # interior rows of the full mass matrix sum to the hat integrals,
        # because the hats (boundary included) sum to one everywhere
        mesh = build_mesh(dim, subdivisions)
        mass_full, _ = assemble_full(mesh)
        hat_integrals = np.asarray(mass_full.sum(axis=1)).ravel()[mesh.interior_nodes]
        h = mesh.spacing
        expected_total = (1.0 - h) ** dim
        assert hat_integrals.sum() == pytest.approx(expected_total, rel=1e-13)
        if dim == 1:
            np.testing.assert_allclose(hat_integrals, h, rtol=1e-13)
        else:
            np.testing.assert_allclose(hat_integrals, h * h, rtol=1e-13)

    def test_interior_quadratic_form_of_ones(self):
        # integral of the squared sum of interior hats: 1 - 4h/3 in 1-D
        mesh = build_mesh(1, 4)
        mass, _ = assemble(mesh)
        ones = np.ones(mesh.n_interior)
        assert ones @ (mass @ ones) == pytest.approx(
            1.0 - 4.0 * mesh.spacing / 3.0, rel=1e-14
        )

    def test_mass_positive_definite(self):
        mass, _ = assemble(build_mesh(2, 6))
        eigvals = np.linalg.eigvalsh(mass.toarray())
        assert eigvals.min() > 0


class TestEigendecompose:
    def test_interval_eigenvalues_match_discrete_closed_form(self):
        mesh = build_mesh(1, 100)
        mass, stiff = assemble(mesh)
        eig = eigendecompose(mass, stiff, 5)
        h = mesh.spacing
        j = np.arange(1, 6)
        closed = (6.0 / h**2) * (1 - np.cos(j * np.pi * h)) / (2 + np.cos(j * np.pi * h))
        np.testing.assert_allclose(eig.values, closed, rtol=1e-10)

    def test_interval_eigenvalues_near_continuum(self):
        mass, stiff = assemble(build_mesh(1, 100))
        eig = eigendecompose(mass, stiff, 3)
        assert eig.values[0] == pytest.approx(np.pi**2, rel=5e-3)
        assert eig.values[1] == pytest.approx(4 * np.pi**2, rel=1e-2)
        assert np.all(np.diff(eig.values) > 0)

    def test_square_fundamental_eigenvalue(self):
        mass, stiff = assemble(build_mesh(2, 16))
        eig = eigendecompose(mass, stiff, 1)
        assert eig.values[0] == pytest.approx(2 * np.pi**2, rel=2e-2)

    @pytest.mark.parametrize("dim,subdivisions,count", [(1, 100, 5), (2, 12, 4)])
    def test_residual_and_orthonormality(self, dim, subdivisions, count):
        mass, stiff = assemble(build_mesh(dim, subdivisions))
        eig = eigendecompose(mass, stiff, count)
        for j in range(count):
            residual = stiff @ eig.vectors[:, j] - eig.values[j] * (
                mass @ eig.vectors[:, j]
            )
            assert np.abs(residual).max() <= 1e-9
        gram = eig.vectors.T @ (mass @ eig.vectors)
        assert np.abs(gram - np.eye(count)).max() <= 1e-10

    def test_full_spectrum_is_complete(self):
        mass, stiff = assemble(build_mesh(1, 12))
        eig = eigendecompose(mass, stiff, 11)
        assert eig.values.shape == (11,)
        # completeness: modal expansion reproduces an arbitrary vector
        rng = np.random.default_rng(7)
        v = rng.standard_normal(11)
        coeffs = eig.vectors.T @ (mass @ v)
        np.testing.assert_allclose(eig.vectors @ coeffs, v, atol=1e-10)

    def test_invalid_count_rejected(self):
        mass, stiff = assemble(build_mesh(1, 8))
        with pytest.raises(ValueError):
            eigendecompose(mass, stiff, 0)
        with pytest.raises(ValueError):
            eigendecompose(mass, stiff, 8)


class TestSpdSolve:
    def test_identity_returns_rhs(self):
        from scipy.sparse import identity

        rhs = np.array([3.0, -1.0, 2.5, 0.0])
        out = spd_solve(identity(4, format="csr"), rhs)
        np.testing.assert_allclose(out, rhs, rtol=1e-14)

    def test_tridiagonal_unit_load(self):
        _, stiff = assemble(build_mesh(1, 4))
        x = spd_solve(stiff, np.array([1.0, 0.0, 0.0]))
        np.testing.assert_allclose(x, [0.1875, 0.125, 0.0625], rtol=1e-12)

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_random_spd_residual(self, seed):
        from scipy.sparse import csr_matrix

        rng = np.random.default_rng(seed)
        raw = rng.standard_normal((50, 50))
        spd = csr_matrix(raw @ raw.T + 50 * np.eye(50))
        rhs = rng.standard_normal(50)
        x = spd_solve(spd, rhs)
        assert np.linalg.norm(spd @ x - rhs) <= 1e-12 * np.linalg.norm(rhs)

    def test_iterative_path_reaches_tolerance(self):
        # 2-D mesh with more than 2000 unknowns exercises conjugate gradients
        mesh = build_mesh(2, 51)
        mass, stiff = assemble(mesh)
        assert mass.shape[0] == 2500
        system = (stiff + mass).tocsr()
        rng = np.random.default_rng(3)
        rhs = rng.standard_normal(2500)
        x = spd_solve(system, rhs)
        assert np.linalg.norm(system @ x - rhs) <= 1e-12 * np.linalg.norm(rhs)

    def test_zero_rhs_shortcut(self):
        mass, _ = assemble(build_mesh(1, 4))
        np.testing.assert_array_equal(spd_solve(mass, np.zeros(3)), np.zeros(3))

    def test_shape_mismatch_rejected(self):
        mass, _ = assemble(build_mesh(1, 4))
        with pytest.raises(ValueError):
            spd_solve(mass, np.zeros(5))

    def test_indefinite_large_system_raises(self):
        from scipy.sparse import diags

        n = 2100
        # indefinite diagonal: conjugate gradients cannot certify this
        entries = np.ones(n)
        entries[0] = -1.0
        with pytest.raises(NumericError):
            spd_solve(diags(entries).tocsr(), np.ones(n))


class TestL2Projection:
    def test_reproduces_interior_members(self):
        mesh = build_mesh(1, 4)
        mass, _ = assemble(mesh)
        coeffs = np.array([0.2, -0.4, 1.1])
        centers = mesh.nodes[mesh.interior_nodes].ravel()

        def member(points):
            x = points[:, 0]
            vals = np.zeros(len(x))
            for c, xc in zip(coeffs, centers):
                vals += c * np.maximum(0.0, 1.0 - np.abs(x - xc) / mesh.spacing)
            return vals

        np.testing.assert_allclose(
            l2_project_space(mesh, mass, member), coeffs, atol=1e-12
        )

    def test_unit_source_bubble(self):
        mesh = build_mesh(1, 4)
        mass, _ = assemble(mesh)
        proj = l2_project_space(mesh, mass, _ones)
        np.testing.assert_allclose(proj, [9 / 7, 6 / 7, 9 / 7], rtol=1e-12)

    def test_parabola_projection_second_order(self):
        errors = []
        for subdivisions in (16, 32, 64):
            mesh = build_mesh(1, subdivisions)
            mass, _ = assemble(mesh)
            coeffs = l2_project_space(mesh, mass, lambda p: p[:, 0] * (1 - p[:, 0]))
            gauss_x, gauss_w = np.polynomial.legendre.leggauss(3)
            h = mesh.spacing
            frac = 0.5 * (gauss_x + 1.0)
            left = mesh.nodes[mesh.elements[:, 0], 0]
            pts = left[:, None] + h * frac[None, :]
            nodal = np.zeros(len(mesh.nodes))
            nodal[mesh.interior_nodes] = coeffs
            linear = (
                nodal[mesh.elements[:, 0]][:, None] * (1 - frac)[None, :]
                + nodal[mesh.elements[:, 1]][:, None] * frac[None, :]
            )
            squared = (pts * (1 - pts) - linear) ** 2
            errors.append(np.sqrt((squared * (0.5 * h * gauss_w)[None, :]).sum()))
        rates = np.log2(np.array(errors[:-1]) / errors[1:])
        assert np.all(rates > 1.9)
        assert np.all(rates < 2.15)

    def test_two_dimensional_product_profile(self):
        # projection of the separable bubble on a fine mesh stays within
        # second-order distance of its interpolant at the nodes
        mesh = build_mesh(2, 16)
        mass, _ = assemble(mesh)

        def bubble(points):
            return points[:, 0] * (1 - points[:, 0]) * points[:, 1] * (1 - points[:, 1])

        proj = l2_project_space(mesh, mass, bubble)
        nodal = bubble(mesh.nodes[mesh.interior_nodes])
        assert np.abs(proj - nodal).max() <= 0.5 * mesh.spacing**2
