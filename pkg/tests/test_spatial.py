import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from heatwave.spatial import (ProblemData, build_mesh_hierarchy,
                              build_prolongation, assemble_spatial,
                              project_initial, assemble_load, l2_error_on_mesh)
from conftest import relative_diff


class TestHierarchy:
    def test_interior_counts(self):
        for d, K in ((1, 4), (2, 3), (2, 6), (3, 3)):
            h = build_mesh_hierarchy(d, K)
            for k, mesh in enumerate(h.levels, start=1):
                assert mesh.n_interior == (2 ** k - 1) ** d

    def test_production_scale_dimensions(self):
        assert build_mesh_hierarchy(2, 6).N_x == 3969
        assert build_mesh_hierarchy(2, 9).N_x == 261121
        assert build_mesh_hierarchy(3, 6).N_x == 250047

    def test_element_counts_and_volumes(self):
        for d in (1, 2, 3):
            h = build_mesh_hierarchy(d, 2)
            mesh = h.finest
            per_cell = {1: 1, 2: 2, 3: 6}[d]
            assert len(mesh.elements) == per_cell * (2 ** 2) ** d
            from heatwave.spatial import _element_geometry
            vol, _ = _element_geometry(mesh)
            assert abs(vol.sum() - 1.0) <= 1e-12

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            build_mesh_hierarchy(4, 2)
        with pytest.raises(ValueError):
            build_mesh_hierarchy(2, 0)


class TestAssembly:
    def test_1d_literals(self):
        mesh = build_mesh_hierarchy(1, 2).finest
        out = assemble_spatial(mesh)
        A = 4.0 * np.array([[2, -1, 0], [-1, 2, -1], [0, -1, 2]], dtype=float)
        M = np.array([[4, 1, 0], [1, 4, 1], [0, 1, 4]], dtype=float) / 24.0
        assert np.allclose(out.A_x.to_dense(), A, atol=1e-14)
        assert np.allclose(out.M_x.to_dense(), M, atol=1e-15)

    def test_2d_five_point_stencil(self):
        h = build_mesh_hierarchy(2, 3)
        mesh = h.finest
        A = assemble_spatial(mesh).A_x.to_dense()
        n = 7
        center = (n // 2) * n + n // 2   # interior vertex away from boundary
        row = A[center]
        assert abs(row[center] - 4.0) <= 1e-13
        for nb in (center - 1, center + 1, center - n, center + n):
            assert abs(row[nb] + 1.0) <= 1e-13
        for diag in (center - n - 1, center + n + 1, center - n + 1, center + n - 1):
            assert abs(row[diag]) <= 1e-13

    def test_mass_positivity_and_interior_deficit(self, rng):
        for d in (1, 2, 3):
            mesh = build_mesh_hierarchy(d, 2).finest
            M = assemble_spatial(mesh).M_x.to_scipy()
            for _ in range(100):
                x = rng.standard_normal(M.shape[0])
                assert x @ (M @ x) > 0
            assert M.sum() < 1.0

    def test_symmetry_and_sparsity(self):
        for d, K in ((1, 5), (2, 4), (3, 3)):
            mesh = build_mesh_hierarchy(d, K).finest
            out = assemble_spatial(mesh)
            for mat in (out.A_x, out.M_x):
                assert mat.check_symmetric(1e-13)
            assert out.A_x.nnz <= 3 ** d * mesh.n_interior

    def test_anisotropic_diffusion_and_reaction(self):
        mesh = build_mesh_hierarchy(2, 3).finest
        D = np.array([[2.0, 0.5], [0.5, 1.0]])
        out = assemble_spatial(mesh, D=D, c=1.5)
        plain = assemble_spatial(mesh, D=D, c=0.0)
        M = assemble_spatial(mesh).M_x.to_dense()
        assert np.allclose(out.A_x.to_dense(),
                           plain.A_x.to_dense() + 1.5 * M, atol=1e-13)
        assert np.linalg.eigvalsh(out.A_x.to_dense()).min() > 0

    def test_non_spd_diffusion_rejected(self):
        mesh = build_mesh_hierarchy(2, 2).finest
        with pytest.raises(ValueError):
            assemble_spatial(mesh, D=np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(ValueError):
            ProblemData(D=np.array([[1.0, 2.0], [2.0, 1.0]]), c=0.0, u0=lambda x: x)
        with pytest.raises(ValueError):
            ProblemData(D=np.eye(2), c=-1.0, u0=lambda x: x)

    def test_dirichlet_laplacian_smallest_eigenvalue(self):
        # smallest eigenvalue of M^-1 A approximates d pi^2 within 2%
        for d in (1, 2):
            mesh = build_mesh_hierarchy(d, 5).finest
            out = assemble_spatial(mesh)
            ev = sla.eigh(out.A_x.to_dense(), out.M_x.to_dense(),
                          eigvals_only=True)
            assert abs(ev[0] - d * np.pi ** 2) <= 0.02 * d * np.pi ** 2


class TestProlongation:
    def test_unit_vector_interpolation(self):
        h = build_mesh_hierarchy(1, 3)
        P = build_prolongation(h, 3).to_dense()
        coarse_mid = 1        # x = 1/2 on level 2
        col = P[:, coarse_mid]
        fine_mid = 3          # x = 1/2 on level 3
        assert col[fine_mid] == 1.0
        assert col[fine_mid - 1] == 0.5 and col[fine_mid + 1] == 0.5
        assert np.count_nonzero(col) == 3

    def test_row_structure(self):
        for d in (1, 2, 3):
            h = build_mesh_hierarchy(d, 2)
            P = build_prolongation(h, 2).to_scipy()
            per_row = np.diff(P.indptr)
            assert per_row.max() <= 2
            assert set(np.round(P.data, 12)) <= {0.5, 1.0}

    def test_galerkin_property(self):
        h = build_mesh_hierarchy(2, 4)
        for k in (2, 3, 4):
            P = build_prolongation(h, k).to_scipy()
            A_f = assemble_spatial(h.mesh(k)).A_x.to_scipy()
            A_c = assemble_spatial(h.mesh(k - 1)).A_x.to_dense()
            assert np.abs(P.T @ A_f @ P - A_c).max() <= 1e-12

    def test_constants_preserved_away_from_boundary(self):
        h = build_mesh_hierarchy(2, 4)
        P = build_prolongation(h, 4).to_scipy()
        ones = np.ones(h.mesh(3).n_interior)
        fine = P @ ones
        mesh = h.mesh(4)
        grid = np.rint(mesh.vertices[mesh.interior] * 16).astype(int)
        away = np.all((grid > 1) & (grid < 15), axis=1)
        assert np.abs(fine[away] - 1.0).max() <= 1e-14

    def test_level_bounds(self):
        h = build_mesh_hierarchy(2, 3)
        with pytest.raises(ValueError):
            h.prolongation(1)
        with pytest.raises(ValueError):
            h.prolongation(4)


class TestDataVectors:
    def test_zero_initial_datum(self):
        mesh = build_mesh_hierarchy(2, 3).finest
        out = project_initial(mesh, lambda x: np.zeros(len(x)))
        assert np.array_equal(out, np.zeros(mesh.n_interior))

    def test_projection_vs_interpolation_second_order(self):
        # L2 distance between projection and nodal interpolation of a smooth
        # function shrinks by ~4x per refinement
        u0 = lambda x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])
        errs = []
        for K in (3, 4, 5):
            mesh = build_mesh_hierarchy(2, K).finest
            M = assemble_spatial(mesh).M_x.to_scipy().tocsc()
            proj = spla.spsolve(M, project_initial(mesh, u0))
            nodal = u0(mesh.vertices[mesh.interior])
            diff = proj - nodal
            errs.append(np.sqrt(diff @ (M @ diff)))
        assert 3.0 <= errs[0] / errs[1] <= 5.0
        assert 3.0 <= errs[1] / errs[2] <= 5.0

    def test_eigenfunction_consistency_second_order(self):
        # for the first Laplace eigenfunction, A_x M_x^-1 b ~ lambda b at O(h^2)
        u0 = lambda x: np.sin(np.pi * x[:, 0])
        lam = np.pi ** 2
        errs = []
        for K in (3, 4, 5):
            mesh = build_mesh_hierarchy(1, K).finest
            out = assemble_spatial(mesh)
            b = project_initial(mesh, u0)
            c = spla.spsolve(out.M_x.to_scipy().tocsc(), b)
            res = out.A_x.to_scipy() @ c - lam * b
            errs.append(np.linalg.norm(res) / np.linalg.norm(b))
        assert errs[0] / errs[1] >= 3.0
        assert errs[1] / errs[2] >= 3.0

    def test_zero_forcing_load(self):
        mesh = build_mesh_hierarchy(2, 2).finest
        g = lambda t, x: np.zeros(len(x))
        out = assemble_load(mesh, 2, g)
        assert not np.any(out.array)

    def test_constant_forcing_exact(self):
        # g = 1 on one time element: entries (int xi_i) * (int phi_j), exactly
        mesh = build_mesh_hierarchy(1, 2).finest
        out = assemble_load(mesh, 0, lambda t, x: np.ones(len(x))).array
        assert np.allclose(out[0], [0.25, 0.25, 0.25], atol=1e-15)
        assert np.abs(out[1]).max() <= 1e-15

    def test_separable_forcing_factorizes(self):
        # g(t,x) = q(t) w(x) must equal (temporal moments) x (spatial moments)
        mesh = build_mesh_hierarchy(2, 3).finest
        J = 2
        q = lambda t: np.exp(-t)
        w = lambda x: x[:, 0] * (1 - x[:, 1])
        got = assemble_load(mesh, J, lambda t, x: q(t) * w(x)).array

        wvec = project_initial(mesh, w)
        n, ht = 2 ** J, 2.0 ** -J
        gp = 0.5 / np.sqrt(3)
        tq = np.array([0.5 - gp, 0.5 + gp])
        moments = np.zeros(2 * n)
        for k in range(n):
            for i in range(2):
                t = (k + tq[i]) * ht
                moments[2 * k] += 0.5 * ht * q(t) / np.sqrt(ht)
                moments[2 * k + 1] += 0.5 * ht * q(t) * np.sqrt(3 / ht) * (2 * tq[i] - 1)
        assert relative_diff(got, np.outer(moments, wvec)) <= 1e-13

    def test_l2_error_of_exact_nodal_field(self):
        mesh = build_mesh_hierarchy(2, 3).finest
        linear = lambda x: x[:, 0]            # in the P1 space (up to boundary)
        vals = linear(mesh.vertices[mesh.interior])
        err = l2_error_on_mesh(mesh, vals, lambda x: np.zeros(len(x)))
        norm2 = err ** 2                      # integral of x^2 minus boundary strip
        assert 0 < norm2 < 1 / 3
