"""Three-point piecewise-linear wavelets in time and the fast transform.

Level 0 carries the two hat functions of the single-element mesh; level j
(j >= 1) carries the 2^(j-1) wavelets spanning the complement of V_{j-1} in
V_j.  The interior wavelet at the new node 2k+1 of level j is the
combination (-1/2, 1, -1/2) of the three fine hats around it, scaled by
2^(j/2); the combination coefficient on a boundary hat doubles to -1 so that
every wavelet keeps its vanishing moment (the level-1 wavelet touches both
endpoints and becomes (-1, 1, -1)).  This scaling gives every wavelet the
same L2 norm sqrt(2/3), uniformly in level and position.

The synthesis transform (wavelet -> nodal coordinates) factors into J sparse
two-scale stages

    W_J = M_{J-1} diag(W_{J-1}, Id),   W_0 = Id,   M_j = [P_j | Q_j],

applied prefix-by-prefix in O(N_t) serial time and J parallel stages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .sparse import SparseMatrix, SpaceTimeVector, counter


@dataclass
class WaveletLevels:
    """Level structure and two-scale matrices of the wavelet basis.

    two_scale[j-1] is the pair (P_j, Q_j) for the step V_{j-1} -> V_j;
    stage_mats[j-1] is the square matrix M_j = [P_j | Q_j] acting on the
    length-(2^j + 1) coordinate prefix, stored in CSR together with its
    transpose.
    """

    J: int
    level_of: np.ndarray            # per wavelet coordinate, in {0, .., J}
    dims: np.ndarray                # dims[j] = dim V_j = 2^j + 1
    two_scale: list                 # [(P_j, Q_j)], j = 1..J
    stage_mats: list                # [(M_j, M_j^T)], j = 1..J

    @property
    def n_t(self):
        return 2 ** self.J + 1

    def scaling_weights(self):
        """diag(2^|lambda|), the H1 scaling of the basis."""
        return 2.0 ** self.level_of.astype(float)


def _two_scale_pair(j):
    nc = 2 ** (j - 1) + 1
    nf = 2 ** j + 1
    nw = 2 ** (j - 1)
    P = sp.lil_matrix((nf, nc))
    for i in range(nc):
        P[2 * i, i] = 1.0
        if 2 * i + 1 < nf:
            P[2 * i + 1, i] = 0.5
        if 2 * i - 1 >= 0:
            P[2 * i - 1, i] = 0.5
    Q = sp.lil_matrix((nf, nw))
    s = 2.0 ** (j / 2.0)
    for k in range(nw):
        m = 2 * k + 1
        a = -1.0 if k == 0 else -0.5
        b = -1.0 if k == nw - 1 else -0.5
        Q[m - 1, k] = s * a
        Q[m, k] = s * 1.0
        Q[m + 1, k] = s * b
    return P.tocsr(), Q.tocsr()


def build_wavelet(J: int) -> WaveletLevels:
    if J < 0:
        raise ValueError("J must be >= 0")
    n_t = 2 ** J + 1
    level_of = np.zeros(n_t, dtype=np.int64)
    for j in range(1, J + 1):
        level_of[2 ** (j - 1) + 1: 2 ** j + 1] = j
    dims = np.array([2 ** j + 1 for j in range(J + 1)], dtype=np.int64)
    two_scale = []
    stage_mats = []
    for j in range(1, J + 1):
        P, Q = _two_scale_pair(j)
        M = sp.hstack([P, Q]).tocsr()
        two_scale.append((SparseMatrix.from_scipy(P), SparseMatrix.from_scipy(Q)))
        stage_mats.append((SparseMatrix.from_scipy(M),
                           SparseMatrix.from_scipy(M.T.tocsr())))
    return WaveletLevels(J=J, level_of=level_of, dims=dims,
                         two_scale=two_scale, stage_mats=stage_mats)


@dataclass
class WaveletTransform:
    """W_t (x) Id_x, applied levelwise on the temporal coordinate prefix."""

    levels: WaveletLevels

    @property
    def J(self):
        return self.levels.J

    def _stages(self, transpose):
        # synthesis runs coarse -> fine, the transpose reverses the order
        rng = range(1, self.J + 1)
        return reversed(list(rng)) if transpose else rng

    def _apply_stages(self, X, transpose, pool=None, out=None, scratch=None):
        out = np.empty_like(X) if out is None else out
        scratch = np.empty_like(X) if scratch is None else scratch
        np.copyto(out, X)
        nnz_total = 0
        for j in self._stages(transpose):
            nf = int(self.levels.dims[j])
            M, MT = self.levels.stage_mats[j - 1]
            S = MT if transpose else M
            if pool is None:
                _kernels.temporal_apply(S.row_offsets, S.col_indices, S.values,
                                        out, scratch, 0, nf)
                _kernels.copy_rows(scratch, out, 0, nf)
            else:
                pool.run_ranges(
                    lambda c0, c1, S=S: _kernels.temporal_apply(
                        S.row_offsets, S.col_indices, S.values, out, scratch, c0, c1),
                    nf)
                pool.run_ranges(
                    lambda c0, c1: _kernels.copy_rows(scratch, out, c0, c1), nf)
            nnz_total += S.nnz
            counter.add_stage()
        counter.add(2 * nnz_total * X.shape[1])
        return out

    def apply_array(self, X, pool=None, out=None, scratch=None):
        if X.shape[0] != self.levels.n_t:
            raise ValueError(f"expected {self.levels.n_t} temporal rows, "
                             f"got {X.shape[0]}")
        return self._apply_stages(X, False, pool, out, scratch)

    def transpose_apply_array(self, X, pool=None, out=None, scratch=None):
        if X.shape[0] != self.levels.n_t:
            raise ValueError(f"expected {self.levels.n_t} temporal rows, "
                             f"got {X.shape[0]}")
        return self._apply_stages(X, True, pool, out, scratch)


def wavelet_apply(wt: WaveletTransform, v: SpaceTimeVector) -> SpaceTimeVector:
    """Wavelet -> single-scale coordinates (synthesis)."""
    return SpaceTimeVector(wt.apply_array(v.array))


def wavelet_transpose_apply(wt: WaveletTransform, v: SpaceTimeVector) -> SpaceTimeVector:
    return SpaceTimeVector(wt.transpose_apply_array(v.array))


def dense_transform(levels: WaveletLevels) -> np.ndarray:
    """Dense W_J built by the explicit two-scale recursion (test oracle)."""
    W = np.eye(2)
    for j in range(1, levels.J + 1):
        P, Q = levels.two_scale[j - 1]
        Pd, Qd = P.to_dense(), Q.to_dense()
        nf = 2 ** j + 1
        Wn = np.zeros((nf, nf))
        Wn[:, : 2 ** (j - 1) + 1] = Pd @ W
        Wn[:, 2 ** (j - 1) + 1:] = Qd
        W = Wn
    return W
