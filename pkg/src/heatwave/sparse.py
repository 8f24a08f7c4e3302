"""Sparse and structured linear algebra core.

CSR is the single sparse format of the package: every assembly routine emits
it, and all production matvecs run through the deterministic numba kernels in
:mod:`heatwave._kernels` (strict left-to-right accumulation per row).  The
Kronecker and block-diagonal operators here are lazy: the big product matrix
is never formed, applications go through the vec identity

    (B_t (x) B_x) vec(X) = vec(B_x (B_t X^T)^T).

Space-time coefficient vectors are stored as (N_t, N_x) C-contiguous arrays;
row j holds the spatial coefficients of temporal DOF j, which is exactly
column j of the column-major N_x-by-N_t matrix the identity above refers to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels

DENSE_MATERIALIZE_CAP = 5000


class FlopCounter:
    """Analytic operation counter; operators report 2*nnz per matvec etc."""

    def __init__(self):
        self.flops = 0
        self.wavelet_stages = 0

    def add(self, n):
        self.flops += int(n)

    def add_stage(self, n=1):
        self.wavelet_stages += n

    def reset(self):
        self.flops = 0
        self.wavelet_stages = 0


#: Module-level counter used by all operators. Tests reset() and read it.
counter = FlopCounter()


@dataclass
class SparseMatrix:
    """Compressed-row real sparse matrix."""

    rows: int
    cols: int
    row_offsets: np.ndarray   # int64, len rows+1
    col_indices: np.ndarray   # int64
    values: np.ndarray        # float64
    symmetric: bool = False

    @classmethod
    def from_scipy(cls, m, symmetric=False):
        m = sp.csr_matrix(m)
        m.sort_indices()
        return cls(m.shape[0], m.shape[1],
                   m.indptr.astype(np.int64), m.indices.astype(np.int64),
                   m.data.astype(np.float64), symmetric)

    @classmethod
    def identity(cls, n):
        return cls.from_scipy(sp.identity(n, format="csr"), symmetric=True)

    @classmethod
    def from_diagonal(cls, d):
        return cls.from_scipy(sp.diags(np.asarray(d, dtype=float)).tocsr(),
                              symmetric=True)

    def to_scipy(self):
        return sp.csr_matrix((self.values, self.col_indices, self.row_offsets),
                             shape=(self.rows, self.cols))

    def to_dense(self):
        return self.to_scipy().toarray()

    @property
    def nnz(self):
        return len(self.values)

    @property
    def T(self):
        return SparseMatrix.from_scipy(self.to_scipy().T.tocsr(), self.symmetric)

    def diagonal(self):
        return self.to_scipy().diagonal()

    def check_symmetric(self, tol=1e-12):
        """Full-scan symmetry check (test mode): |A - A^T|_max <= tol*max|A|."""
        if self.rows != self.cols:
            return False
        d = self.to_scipy()
        err = abs(d - d.T).max()
        scale = abs(d).max() if d.nnz else 1.0
        return err <= tol * max(scale, 1.0)

    def validate(self):
        if len(self.row_offsets) != self.rows + 1:
            raise ValueError("row_offsets must have rows+1 entries")
        if np.any(np.diff(self.row_offsets) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if self.nnz and (self.col_indices.min() < 0
                         or self.col_indices.max() >= self.cols):
            raise ValueError("col_indices out of range")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        if self.symmetric and not self.check_symmetric():
            raise ValueError("matrix flagged symmetric is not")
        return self


def csr_matvec(A: SparseMatrix, x):
    """y = A x with deterministic per-row left-to-right accumulation."""
    x = np.asarray(x, dtype=float)
    if x.shape != (A.cols,):
        raise ValueError(f"dimension mismatch: matrix is {A.rows}x{A.cols}, "
                         f"vector has shape {x.shape}")
    y = np.empty(A.rows)
    _kernels.csr_matvec(A.row_offsets, A.col_indices, A.values, x, y)
    counter.add(2 * A.nnz)
    return y


@dataclass
class SpaceTimeVector:
    """Coefficient vector of a space-time tensor basis.

    ``array`` has shape (n_t, n_x); row j = spatial coefficients of temporal
    DOF j.  ``vec()`` flattens in the column-major N_x-by-N_t sense used by
    the Kronecker identity (row-major flatten of ``array``, which is the same
    thing).
    """

    array: np.ndarray

    def __post_init__(self):
        self.array = np.ascontiguousarray(self.array, dtype=float)
        if self.array.ndim != 2:
            raise ValueError("SpaceTimeVector needs a 2-d coefficient array")

    @classmethod
    def zeros(cls, n_t, n_x):
        return cls(np.zeros((n_t, n_x)))

    @classmethod
    def from_vec(cls, data, n_t, n_x):
        data = np.asarray(data, dtype=float)
        if data.size != n_t * n_x:
            raise ValueError("length does not factor as n_t * n_x")
        return cls(data.reshape(n_t, n_x).copy())

    @property
    def n_t(self):
        return self.array.shape[0]

    @property
    def n_x(self):
        return self.array.shape[1]

    def vec(self):
        return self.array.reshape(-1).copy()

    def copy(self):
        return SpaceTimeVector(self.array.copy())

    def norm(self):
        return float(np.linalg.norm(self.array))


@dataclass
class KroneckerOperator:
    """Lazy B_t (x) B_x; the tensor-product matrix is never materialized.

    ``temporal_factor`` / ``spatial_factor`` may be None, meaning identity.
    """

    temporal_factor: SparseMatrix | None
    spatial_factor: SparseMatrix | None
    dims: tuple  # (n_t_out, n_t_in, n_x_out, n_x_in)

    @classmethod
    def from_factors(cls, B_t, B_x, n_t=None, n_x=None):
        if B_t is None and n_t is None:
            raise ValueError("need n_t when temporal factor is identity")
        if B_x is None and n_x is None:
            raise ValueError("need n_x when spatial factor is identity")
        nt_out, nt_in = (B_t.rows, B_t.cols) if B_t is not None else (n_t, n_t)
        nx_out, nx_in = (B_x.rows, B_x.cols) if B_x is not None else (n_x, n_x)
        return cls(B_t, B_x, (nt_out, nt_in, nx_out, nx_in))

    def apply_columns(self, X, out, scratch, c0, c1):
        """Column-range application; the parallel engine calls this per worker.

        Temporal stage writes rows [c0, c1) of ``scratch`` (reading halo rows
        of ``X`` freely); spatial stage then maps scratch rows to ``out``.
        Both stages must be separated by a barrier when run concurrently, so
        the engine calls temporal_stage / spatial_stage instead; this method
        is the serial fusion of the two.
        """
        self.temporal_stage(X, scratch, c0, c1)
        self.spatial_stage(scratch, out, c0, c1)

    def temporal_stage(self, X, out, c0, c1):
        if self.temporal_factor is None:
            _kernels.copy_rows(X, out, c0, c1)
        else:
            B = self.temporal_factor
            _kernels.temporal_apply(B.row_offsets, B.col_indices, B.values,
                                    X, out, c0, c1)

    def spatial_stage(self, X, out, c0, c1):
        if self.spatial_factor is None:
            _kernels.copy_rows(X, out, c0, c1)
        else:
            B = self.spatial_factor
            _kernels.csr_rows_matvec(B.row_offsets, B.col_indices, B.values,
                                     X, out, c0, c1)

    def apply(self, v: SpaceTimeVector) -> SpaceTimeVector:
        nt_out, nt_in, nx_out, nx_in = self.dims
        if v.array.shape != (nt_in, nx_in):
            raise ValueError(f"dimension mismatch: operator expects "
                             f"({nt_in}, {nx_in}), got {v.array.shape}")
        scratch = np.empty((nt_out, nx_in))
        out = np.empty((nt_out, nx_out))
        self.apply_columns(v.array, out, scratch, 0, nt_out)
        nnz_t = self.temporal_factor.nnz if self.temporal_factor is not None else nt_in
        nnz_x = self.spatial_factor.nnz if self.spatial_factor is not None else nx_in
        counter.add(2 * nnz_t * nx_in + 2 * nnz_x * nt_out)
        return SpaceTimeVector(out)


@dataclass
class BlockDiagOperator:
    """Per-column spatial operator selected by a level map.

    ``blocks[block_index[j]]`` is applied to column j; columns never interact.
    Blocks are callables vector -> vector (e.g. multigrid applies or exact
    solves composed in the preconditioner module).
    """

    blocks: dict
    block_index: np.ndarray

    def apply(self, v: SpaceTimeVector) -> SpaceTimeVector:
        if len(self.block_index) != v.n_t:
            raise ValueError("block_index must cover every column")
        out = np.empty_like(v.array)
        for j in range(v.n_t):
            lvl = self.block_index[j]
            if lvl not in self.blocks:
                raise KeyError(f"no block for level {lvl}")
            out[j] = self.blocks[lvl](v.array[j])
        return SpaceTimeVector(out)


def dense_materialize(op, n, m=None):
    """Apply ``op`` to all unit vectors; the standard small-instance oracle.

    ``op`` maps 1-d arrays of length n to 1-d arrays of length m (default n).
    Capped at n <= 5000 so nobody materializes a production-size operator.
    """
    if n > DENSE_MATERIALIZE_CAP or (m or n) > DENSE_MATERIALIZE_CAP:
        raise ValueError(f"dense_materialize capped at n <= {DENSE_MATERIALIZE_CAP}")
    m = m or n
    out = np.empty((m, n))
    e = np.zeros(n)
    for k in range(n):
        e[k] = 1.0
        out[:, k] = op(e)
        e[k] = 0.0
    return out
