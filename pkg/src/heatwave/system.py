"""The preconditioned Schur system: S-hat, K_Y, K_X and right-hand sides.

Everything is a matrix-free composition of the temporal matrices, the P1
spatial matrices, a spatial approximate inverse K_x, and the temporal
wavelet transform.  Two equivalent forms of the Schur operator are kept: the
test-space form

    S = B^T K_Y B + Gamma0 (x) M_x,     B = T (x) M_x + N (x) A_x,

and the production five-term form that eliminates the test space,

    S = A_t (x) (M_x K_x M_x) + M_t (x) (A_x K_x A_x)
      + L^T (x) (M_x K_x A_x) + L  (x) (A_x K_x M_x) + Gamma0 (x) M_x.

Both share the same K_x object, so their agreement is a pure structure
check.  Applications are phase-split over temporal columns; a worker pool
may be passed to run each phase in parallel (reads may cross the range
boundary, writes never do).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .sparse import SparseMatrix, SpaceTimeVector, counter
from .temporal import TemporalMatrices, TestMatrices
from .spatial import SpatialMatrices, ProblemData, project_initial, assemble_load
from .wavelet import WaveletTransform


def _run(pool, fn, ncols):
    if pool is None:
        fn(0, ncols)
    else:
        pool.run_ranges(fn, ncols)


def _temporal(B: SparseMatrix, X, out, pool):
    _run(pool, lambda c0, c1: _kernels.temporal_apply(
        B.row_offsets, B.col_indices, B.values, X, out, c0, c1), B.rows)
    counter.add(2 * B.nnz * X.shape[1])


def _spatial(B: SparseMatrix, X, out, pool):
    _run(pool, lambda c0, c1: _kernels.csr_rows_matvec(
        B.row_offsets, B.col_indices, B.values, X, out, c0, c1), X.shape[0])
    counter.add(2 * B.nnz * X.shape[0])


def _add(X, Y, pool):
    """Y += X, row-partitioned."""
    _run(pool, lambda c0, c1: _kernels.axpy_rows(1.0, X, Y, c0, c1), X.shape[0])


def _solve_rows(solver, B, out, pool):
    n = B.shape[0]
    if pool is None or not solver.thread_safe:
        solver.apply_rows(B, out, 0, n)
    else:
        pool.run_ranges(lambda c0, c1: solver.apply_rows(B, out, c0, c1), n)


@dataclass
class SchurOperator:
    """S-hat = W^T S W as a matrix-free operator on wavelet-coordinate
    space-time vectors."""

    temporal: TemporalMatrices
    spatial: SpatialMatrices
    K_x: object                       # MultigridSolver or ExactSolver
    wavelet: WaveletTransform
    form: str = "five_term"            # production path; "test_space" is the oracle
    test: Optional[TestMatrices] = None
    _LT: SparseMatrix = field(init=False, default=None)
    _TT: SparseMatrix = field(init=False, default=None)
    _NT: SparseMatrix = field(init=False, default=None)

    def __post_init__(self):
        if self.form not in ("test_space", "five_term"):
            raise ValueError("form must be 'five_term' or 'test_space'")
        if self.form == "test_space" and self.test is None:
            raise ValueError("the test-space form needs the test matrices")
        self._LT = self.temporal.L.T
        if self.test is not None:
            self._TT = self.test.T.T
            self._NT = self.test.N.T
        self._bufs = {}

    def _buf(self, name, shape):
        """Persistent work buffers; one solve per operator instance, so
        reusing them across applies is safe and avoids churning ~N-sized
        allocations in the iteration loop."""
        b = self._bufs.get(name)
        if b is None or b.shape != shape:
            b = np.empty(shape)
            self._bufs[name] = b
        return b

    @property
    def n_t(self):
        return self.temporal.M_t.rows

    @property
    def n_x(self):
        return self.spatial.M_x.rows

    def _apply_single_scale(self, U, pool):
        if self.form == "five_term":
            return self._apply_five_term(U, pool)
        return self._apply_test_space(U, pool)

    def _apply_five_term(self, U, pool):
        nt, nx = U.shape
        Mx, Ax = self.spatial.M_x, self.spatial.A_x
        MxU = self._buf("MxU", U.shape)
        AxU = self._buf("AxU", U.shape)
        _spatial(Mx, U, MxU, pool)
        _spatial(Ax, U, AxU, pool)

        # group 1: M_x K_x (A_t (x) M_x + L^T-in-time A_x) -- temporal factors
        # act on rows as their transposes, see the layout note in sparse.py
        t1 = self._buf("t1", U.shape)
        t2 = self._buf("t2", U.shape)
        g1 = self._buf("g1", U.shape)
        out = self._buf("sum", U.shape)
        _temporal(self.temporal.A_t, MxU, t1, pool)
        _temporal(self._LT, AxU, t2, pool)
        _add(t2, t1, pool)
        _solve_rows(self.K_x, t1, g1, pool)
        _spatial(Mx, g1, out, pool)

        # group 2: A_x K_x (M_t-in-time A_x + L-in-time M_x)
        _temporal(self.temporal.M_t, AxU, t1, pool)
        _temporal(self.temporal.L, MxU, t2, pool)
        _add(t2, t1, pool)
        _solve_rows(self.K_x, t1, g1, pool)
        _spatial(Ax, g1, t2, pool)
        _add(t2, out, pool)

        # trace term Gamma0 (x) M_x: only the first temporal row survives
        out[0] += MxU[0]
        counter.add(2 * nx)
        return out

    def _apply_test_space(self, U, pool):
        nt, nx = U.shape
        Mx, Ax = self.spatial.M_x, self.spatial.A_x
        MxU = self._buf("MxU", U.shape)
        AxU = self._buf("AxU", U.shape)
        _spatial(Mx, U, MxU, pool)
        _spatial(Ax, U, AxU, pool)

        # B u: rows run over the test-space temporal index
        m = self.test.T.rows
        y1 = self._buf("y1", (m, nx))
        y2 = self._buf("y2", (m, nx))
        _temporal(self.test.T, MxU, y1, pool)
        _temporal(self.test.N, AxU, y2, pool)
        _add(y2, y1, pool)
        # K_Y = O^{-1} (x) K_x
        _solve_rows(self.K_x, y1, y2, pool)
        y2 /= self.test.O.diagonal()[:, None]
        # B^T
        w1 = self._buf("t1", U.shape)
        w2 = self._buf("t2", U.shape)
        out = self._buf("sum", U.shape)
        _temporal(self._TT, y2, w1, pool)
        _spatial(Mx, w1, w2, pool)
        np.copyto(out, w2)
        _temporal(self._NT, y2, w1, pool)
        _spatial(Ax, w1, w2, pool)
        _add(w2, out, pool)

        out[0] += MxU[0]
        counter.add(2 * nx)
        return out

    def apply_array(self, X, pool=None, out=None):
        U = self.wavelet.apply_array(X, pool, out=self._buf("U", X.shape),
                                     scratch=self._buf("ws", X.shape))
        SU = self._apply_single_scale(U, pool)
        return self.wavelet.transpose_apply_array(
            SU, pool, out=out, scratch=self._buf("ws", X.shape))

    def apply(self, v: SpaceTimeVector, pool=None) -> SpaceTimeVector:
        if v.array.shape != (self.n_t, self.n_x):
            raise ValueError(f"expected shape ({self.n_t}, {self.n_x}), "
                             f"got {v.array.shape}")
        return SpaceTimeVector(self.apply_array(v.array, pool))


def schur_apply(S: SchurOperator, w: SpaceTimeVector, pool=None) -> SpaceTimeVector:
    return S.apply(w, pool)


def apply_KY(spatial: SpatialMatrices, test: TestMatrices, K_x,
             v: SpaceTimeVector) -> SpaceTimeVector:
    """K_Y = O^{-1} (x) K_x on a test-space vector (2 * 2^J rows)."""
    if v.n_t != test.O.rows:
        raise ValueError(f"expected {test.O.rows} test-space rows, got {v.n_t}")
    out = np.empty_like(v.array)
    _solve_rows(K_x, v.array, out, None)
    out /= test.O.diagonal()[:, None]
    return SpaceTimeVector(out)


@dataclass
class PreconditionerKX:
    """K_X = blockdiag[C_|lambda| A_x C_|lambda|] over wavelet coordinates.

    blocks[j] approximates (alpha A_x + 2^j M_x)^{-1}; the middle factor is
    always the plain A_x.
    """

    blocks: dict
    A_x: SparseMatrix
    level_of: np.ndarray
    alpha: float

    def __post_init__(self):
        self._range_cache = {}
        self._mid = None

    def _level_rows(self, c0, c1):
        """Rows of [c0, c1) grouped by wavelet level (cached per range)."""
        key = (c0, c1)
        got = self._range_cache.get(key)
        if got is None:
            got = []
            local = self.level_of[c0:c1]
            for j in sorted(self.blocks):
                rows = c0 + np.nonzero(local == j)[0].astype(np.int64)
                if rows.size:
                    got.append((j, rows))
            self._range_cache[key] = got
        return got

    def _rows(self, X, out, buf, c0, c1):
        # out = C x, buf = A_x out, out = C buf -- all per-row, no barriers
        Ax = self.A_x
        for j, rows in self._level_rows(c0, c1):
            self.blocks[j].apply_rows_indexed(X, out, rows)
        _kernels.csr_rows_matvec(Ax.row_offsets, Ax.col_indices, Ax.values,
                                 out, buf, c0, c1)
        for j, rows in self._level_rows(c0, c1):
            self.blocks[j].apply_rows_indexed(buf, out, rows)

    def apply_array(self, X, pool=None, out=None):
        for lvl in np.unique(self.level_of[: X.shape[0]]):
            if int(lvl) not in self.blocks:
                raise KeyError(f"no preconditioner block for level {int(lvl)}")
        out = np.empty_like(X) if out is None else out
        counter.add(2 * self.A_x.nnz * X.shape[0])
        if all(b.thread_safe for b in self.blocks.values()):
            if self._mid is None or self._mid.shape != X.shape:
                self._mid = np.empty_like(X)
            buf = self._mid
            _run(pool, lambda c0, c1: self._rows(X, out, buf, c0, c1),
                 X.shape[0])
            return out
        # exact blocks: batch the sparse-LU solves level by level
        Ax = self.A_x
        for j, C in self.blocks.items():
            rows = np.where(self.level_of == j)[0]
            if len(rows) == 0:
                continue
            Z = C.solve_block(X[rows])
            for i in range(len(rows)):
                _kernels.csr_matvec(Ax.row_offsets, Ax.col_indices, Ax.values,
                                    Z[i].copy(), Z[i])
            out[rows] = C.solve_block(Z)
        return out

    def apply(self, v: SpaceTimeVector, pool=None) -> SpaceTimeVector:
        return SpaceTimeVector(self.apply_array(v.array, pool))


def apply_KX(P: PreconditionerKX, r: SpaceTimeVector, pool=None) -> SpaceTimeVector:
    return P.apply(r, pool)


@dataclass
class RightHandSide:
    """f-hat = W^T (B^T K_Y g + u0) split into its two sources."""

    f_hat: SpaceTimeVector
    g_part: SpaceTimeVector
    u0_part: SpaceTimeVector


def assemble_rhs(problem: ProblemData, mesh, J: int,
                 temporal: TemporalMatrices, test: TestMatrices,
                 spatial: SpatialMatrices, K_x,
                 wavelet: WaveletTransform) -> RightHandSide:
    n_t = temporal.M_t.rows
    n_x = spatial.M_x.rows

    u0_ss = np.zeros((n_t, n_x))
    u0_ss[0] = project_initial(mesh, problem.u0)   # Phi_t(0) (x) <u0, Phi_x>

    if problem.g is None:
        g_ss = np.zeros((n_t, n_x))
    else:
        gvec = assemble_load(mesh, J, problem.g)
        ky_g = apply_KY(spatial, test, K_x, gvec)
        # B^T (K_Y g)
        w1 = np.empty((n_t, n_x))
        w2 = np.empty((n_t, n_x))
        _temporal(test.T.T, ky_g.array, w1, None)
        _spatial(spatial.M_x, w1, w2, None)
        g_ss = w2.copy()
        _temporal(test.N.T, ky_g.array, w1, None)
        _spatial(spatial.A_x, w1, w2, None)
        g_ss += w2

    g_hat = wavelet.transpose_apply_array(g_ss)
    u0_hat = wavelet.transpose_apply_array(u0_ss)
    return RightHandSide(f_hat=SpaceTimeVector(g_hat + u0_hat),
                         g_part=SpaceTimeVector(g_hat),
                         u0_part=SpaceTimeVector(u0_hat))
