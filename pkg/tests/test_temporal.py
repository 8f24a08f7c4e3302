import numpy as np
import pytest

from heatwave.temporal import (TemporalDiscretization, assemble_temporal_trial,
                               assemble_temporal_test, evaluate_trace)


def test_dimensions():
    for J in range(0, 7):
        disc = TemporalDiscretization(J)
        assert disc.N_t == 2 ** J + 1
        assert disc.mesh_width == 2.0 ** -J
    with pytest.raises(ValueError):
        TemporalDiscretization(-1)


class TestTrialMatrices:
    def test_single_element_literals(self):
        tm = assemble_temporal_trial(0)
        assert np.allclose(tm.M_t.to_dense(), [[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
        assert np.allclose(tm.A_t.to_dense(), [[1, -1], [-1, 1]])
        # L[i, j] = integral phi_j' phi_i on the basis {1-t, t}
        assert np.allclose(tm.L.to_dense(), [[-0.5, 0.5], [-0.5, 0.5]])
        assert np.allclose(tm.L.to_dense().T, [[-0.5, -0.5], [0.5, 0.5]])
        assert np.array_equal(tm.Gamma0.to_dense(), [[1.0, 0.0], [0.0, 0.0]])

    def test_mass_row_sums_are_support_measures(self):
        for J in (0, 2, 4):
            h = 2.0 ** -J
            M = assemble_temporal_trial(J).M_t.to_dense()
            sums = M.sum(axis=1)
            want = np.full(2 ** J + 1, h)
            want[0] = want[-1] = h / 2
            assert np.allclose(sums, want, atol=1e-15)
            assert abs(M.sum() - 1.0) <= 1e-14   # |I| = 1

    def test_stiffness_kernel_is_constants(self):
        for J in (0, 3, 5):
            A = assemble_temporal_trial(J).A_t
            ones = np.ones(A.rows)
            assert np.abs(A.to_scipy() @ ones).max() == 0.0

    def test_integration_by_parts(self):
        for J in range(0, 7):
            tm = assemble_temporal_trial(J)
            L = tm.L.to_dense()
            gamma_T = np.outer(tm.phi_at_T, tm.phi_at_T)
            gamma_0 = np.outer(tm.phi_at_0, tm.phi_at_0)
            assert np.abs(L + L.T - (gamma_T - gamma_0)).max() <= 1e-14

    def test_spd_structure(self):
        tm = assemble_temporal_trial(4)
        assert np.linalg.eigvalsh(tm.M_t.to_dense()).min() > 0
        ev = np.linalg.eigvalsh(tm.A_t.to_dense())
        assert ev[0] >= -1e-13 and ev[1] > 0
        G0 = tm.Gamma0.to_scipy()
        assert G0.nnz == 1 and G0[0, 0] == 1.0


class TestTestMatrices:
    def test_single_element_literals(self):
        ts = assemble_temporal_test(0)
        assert np.array_equal(ts.O.to_dense(), np.eye(2))
        assert np.allclose(ts.T.to_dense(), [[-1.0, 1.0], [0.0, 0.0]])
        s3 = np.sqrt(3) / 6
        assert np.allclose(ts.N.to_dense(), [[0.5, 0.5], [-s3, s3]])

    def test_gram_is_identity(self):
        for J in (1, 3, 5):
            O = assemble_temporal_test(J).O.to_dense()
            assert np.abs(O - np.eye(2 ** (J + 1))).max() <= 1e-14

    def test_derivative_matrix_bidiagonal_columns(self):
        ts = assemble_temporal_test(4)
        per_col = np.diff(ts.T.to_scipy().tocsc().indptr)
        assert per_col.max() <= 2

    def test_trial_test_identities(self):
        # these three identities together make the two Schur forms coincide
        for J in range(0, 7):
            tm = assemble_temporal_trial(J)
            ts = assemble_temporal_test(J)
            T, N, O = ts.T.to_dense(), ts.N.to_dense(), ts.O.to_dense()
            Oi = np.linalg.inv(O)
            assert np.abs(T.T @ Oi @ N - tm.L.to_dense().T).max() <= 1e-13
            assert np.abs(N.T @ Oi @ N - tm.M_t.to_dense()).max() <= 1e-13
            assert np.abs(T.T @ Oi @ T - tm.A_t.to_dense()).max() <= 1e-13

    def test_trial_space_inside_test_space(self):
        # residual of the L2 projection of phi and phi' onto the test span
        for J in range(0, 6):
            tm = assemble_temporal_trial(J)
            ts = assemble_temporal_test(J)
            N, T = ts.N.to_dense(), ts.T.to_dense()
            Mt, At = tm.M_t.to_dense(), tm.A_t.to_dense()
            for j in range(2 ** J + 1):
                res_phi = Mt[j, j] - (N[:, j] ** 2).sum()
                res_dphi = At[j, j] - (T[:, j] ** 2).sum()
                assert abs(res_phi) <= 1e-13
                assert abs(res_dphi) <= 1e-13


class TestTrace:
    def test_endpoint_vectors(self):
        assert np.array_equal(evaluate_trace(3, 0.0), np.eye(9)[0])
        assert np.array_equal(evaluate_trace(3, 1.0), np.eye(9)[8])

    def test_interior_time_rejected(self):
        with pytest.raises(ValueError):
            evaluate_trace(3, 0.5)

    def test_outer_product_reconstructs_trace_matrix(self):
        tm = assemble_temporal_trial(4)
        v = evaluate_trace(4, 0.0)
        assert np.array_equal(np.outer(v, v), tm.Gamma0.to_dense())
