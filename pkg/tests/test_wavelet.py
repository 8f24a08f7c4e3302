import numpy as np
import pytest
import scipy.sparse as sp

from heatwave.sparse import SpaceTimeVector, counter
from heatwave.temporal import assemble_temporal_trial
from heatwave.wavelet import (build_wavelet, WaveletTransform, wavelet_apply,
                              wavelet_transpose_apply, dense_transform,
                              _two_scale_pair)
from conftest import relative_diff


class TestConstruction:
    def test_level_map(self):
        levels = build_wavelet(3)
        assert np.array_equal(levels.level_of, [0, 0, 1, 2, 2, 3, 3, 3, 3])
        assert np.array_equal(levels.dims, [2, 3, 5, 9])
        assert np.array_equal(levels.scaling_weights(),
                              2.0 ** levels.level_of)

    def test_two_scale_sparsity(self):
        for j in range(1, 9):
            P, Q = _two_scale_pair(j)
            assert np.diff(Q.tocsc().indptr).max() <= 3
            assert np.diff(P.tocsc().indptr).max() <= 3
            assert np.diff(P.indptr).max() <= 2      # rows: {1} or {1/2, 1/2}
            assert set(np.round(P.data, 12)) <= {0.5, 1.0}

    def test_combined_stage_matrix_square_invertible(self):
        # smallest singular value bounded away from zero, uniformly in level
        sigmas = []
        for j in range(1, 9):
            P, Q = _two_scale_pair(j)
            M = sp.hstack([P, Q]).toarray()
            assert M.shape == (2 ** j + 1, 2 ** j + 1)
            sigmas.append(np.linalg.svd(M, compute_uv=False)[-1])
        assert min(sigmas) >= 0.5

    def test_uniform_l2_norms(self):
        # every wavelet has L2 norm sqrt(2/3): level j coefficients against
        # the hat mass matrix on level j
        for j in (1, 2, 4, 6):
            _, Q = _two_scale_pair(j)
            M = assemble_temporal_trial(j).M_t.to_scipy()
            G = (Q.T @ M @ Q).toarray()
            assert np.abs(np.diag(G) - 2.0 / 3.0).max() <= 1e-13

    def test_vanishing_moments(self):
        # every wavelet integrates to zero (hat integrals: h at interior
        # nodes, h/2 at the endpoints)
        for j in (1, 2, 3, 5):
            _, Q = _two_scale_pair(j)
            h = 2.0 ** -j
            w = np.full(2 ** j + 1, h)
            w[0] = w[-1] = h / 2
            assert np.abs(w @ Q.toarray()).max() <= 1e-13


class TestTransform:
    def test_level_zero_is_identity(self, rng):
        wt = WaveletTransform(build_wavelet(0))
        v = SpaceTimeVector(rng.standard_normal((1, 4)))
        with pytest.raises(ValueError):
            wavelet_apply(wt, v)
        v = SpaceTimeVector(rng.standard_normal((2, 4)))
        assert np.array_equal(wavelet_apply(wt, v).array, v.array)
        assert np.array_equal(wavelet_transpose_apply(wt, v).array, v.array)

    def test_matches_dense_recursion(self, rng):
        for J in range(1, 7):
            levels = build_wavelet(J)
            wt = WaveletTransform(levels)
            W = dense_transform(levels)
            X = rng.standard_normal((2 ** J + 1, 3))
            assert relative_diff(wt.apply_array(X), W @ X) <= 1e-13
            assert relative_diff(wt.transpose_apply_array(X), W.T @ X) <= 1e-13

    def test_coarse_block_interpolates(self):
        # only the two coarsest coefficients set: result is the linear
        # interpolation of that coarse function onto the fine nodes
        J = 4
        wt = WaveletTransform(build_wavelet(J))
        X = np.zeros((2 ** J + 1, 1))
        X[0, 0], X[1, 0] = 1.0, 3.0
        out = wt.apply_array(X)[:, 0]
        nodes = np.linspace(0, 1, 2 ** J + 1)
        assert np.abs(out - (1.0 + 2.0 * nodes)).max() <= 1e-14

    def test_adjoint_identity(self, rng):
        wt = WaveletTransform(build_wavelet(5))
        for _ in range(100):
            x = rng.standard_normal((33, 2))
            y = rng.standard_normal((33, 2))
            lhs = (wt.apply_array(x) * y).sum()
            rhs = (x * wt.transpose_apply_array(y)).sum()
            assert abs(lhs - rhs) <= 1e-13 * max(abs(lhs), 1.0)

    def test_stage_depth_equals_level_count(self, rng):
        for J in (2, 5):
            wt = WaveletTransform(build_wavelet(J))
            counter.reset()
            wt.apply_array(rng.standard_normal((2 ** J + 1, 2)))
            assert counter.wavelet_stages == J

    def test_serial_cost_linear(self):
        def flops(J):
            wt = WaveletTransform(build_wavelet(J))
            counter.reset()
            wt.apply_array(np.ones((2 ** J + 1, 8)))
            return counter.flops

        f = [flops(J) for J in (6, 7, 8, 9)]
        for a, b in zip(f, f[1:]):
            assert b / a <= 2.3


class TestRieszStability:
    def test_l2_gram_condition_bounded(self):
        kappas = []
        for J in range(3, 9):
            W = dense_transform(build_wavelet(J))
            M = assemble_temporal_trial(J).M_t.to_dense()
            kappas.append(np.linalg.cond(W.T @ M @ W))
        assert max(kappas) / min(kappas) <= 1.3
        assert max(kappas) <= 6.0

    def test_scaled_h1_gram_condition_bounded(self):
        kappas = []
        for J in range(3, 9):
            levels = build_wavelet(J)
            W = dense_transform(levels)
            tm = assemble_temporal_trial(J)
            G = W.T @ (tm.A_t.to_dense() + tm.M_t.to_dense()) @ W
            Dinv = np.diag(2.0 ** -levels.level_of.astype(float))
            kappas.append(np.linalg.cond(Dinv @ G @ Dinv))
        assert max(kappas) / min(kappas) <= 1.3
        assert max(kappas) <= 25.0
