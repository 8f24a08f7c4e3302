"""Temporal discretization on I = (0, 1).

Trial space: continuous piecewise linears (hat functions) on the uniform
partition into 2^J subintervals, so N_t = 2^J + 1.  Test space: discontinuous
piecewise linears spanned by per-element L2-normalized shifted Legendre
polynomials, so the Gram matrix O comes out as the identity (it is still
stored and inverted explicitly to keep the general code path honest).

Matrix orientation convention, fixed once for the whole package: for a pair
of basis tuples, ``mat(F, G)[i, j] = integral F_j * G_i`` - rows index the
second (test) tuple, columns the first.  All matrices below are exact
analytic element integrals, no quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sparse import SparseMatrix


@dataclass(frozen=True)
class TemporalDiscretization:
    J: int

    def __post_init__(self):
        if self.J < 0:
            raise ValueError("refinement level J must be >= 0")

    @property
    def n_elements(self):
        return 2 ** self.J

    @property
    def N_t(self):
        return 2 ** self.J + 1

    @property
    def mesh_width(self):
        return 2.0 ** -self.J

    @property
    def p_t(self):
        return 1

    def nodes(self):
        return np.linspace(0.0, 1.0, self.N_t)


@dataclass
class TemporalMatrices:
    """Trial-side matrices: mass M_t, stiffness A_t, first-derivative form L
    (L[i, j] = integral phi_j' phi_i), rank-one trace matrix Gamma0, and the
    endpoint evaluation vectors of the hat basis."""

    M_t: SparseMatrix
    A_t: SparseMatrix
    L: SparseMatrix
    Gamma0: SparseMatrix
    phi_at_0: np.ndarray
    phi_at_T: np.ndarray


@dataclass
class TestMatrices:
    """Test-side matrices against the per-element Legendre basis.

    Rows index the 2 * 2^J test functions (element by element, degree 0 then
    degree 1), columns the N_t hats:  O = Gram of the test basis (identity
    under our normalization), T[i, j] = integral phi_j' xi_i, and
    N[i, j] = integral phi_j xi_i.
    """

    O: SparseMatrix
    T: SparseMatrix
    N: SparseMatrix


def assemble_temporal_trial(J: int) -> TemporalMatrices:
    disc = TemporalDiscretization(J)
    n, h, N = disc.n_elements, disc.mesh_width, disc.N_t

    main = np.full(N, 2 * h / 3)
    main[0] = main[-1] = h / 3
    M_t = sp.diags([np.full(N - 1, h / 6), main, np.full(N - 1, h / 6)],
                   [-1, 0, 1], format="csr")

    main = np.full(N, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    A_t = sp.diags([np.full(N - 1, -1.0 / h), main, np.full(N - 1, -1.0 / h)],
                   [-1, 0, 1], format="csr")

    # L[i, i+1] = int phi_{i+1}' phi_i = 1/2, L[i, i-1] = -1/2; the only
    # diagonal entries are the endpoint ones from integrating phi phi'.
    main = np.zeros(N)
    main[0], main[-1] = -0.5, 0.5
    L = sp.diags([np.full(N - 1, -0.5), main, np.full(N - 1, 0.5)],
                 [-1, 0, 1], format="csr")

    Gamma0 = sp.csr_matrix(([1.0], ([0], [0])), shape=(N, N))
    phi0 = np.zeros(N)
    phi0[0] = 1.0
    phiT = np.zeros(N)
    phiT[-1] = 1.0
    return TemporalMatrices(
        M_t=SparseMatrix.from_scipy(M_t, symmetric=True),
        A_t=SparseMatrix.from_scipy(A_t, symmetric=True),
        L=SparseMatrix.from_scipy(L),
        Gamma0=SparseMatrix.from_scipy(Gamma0, symmetric=True),
        phi_at_0=phi0,
        phi_at_T=phiT,
    )


def assemble_temporal_test(J: int) -> TestMatrices:
    disc = TemporalDiscretization(J)
    n, h = disc.n_elements, disc.mesh_width
    N = disc.N_t
    sq = np.sqrt(h)

    # per element k: xi_{2k} = 1/sqrt(h), xi_{2k+1} = sqrt(3/h)(2(t-t_k)/h - 1)
    rows, cols, tvals, nvals = [], [], [], []
    for k in range(n):
        for (r, c, tv, nv) in (
            (2 * k, k, -1.0 / sq, sq / 2),
            (2 * k, k + 1, 1.0 / sq, sq / 2),
            (2 * k + 1, k, 0.0, -np.sqrt(3 * h) / 6),
            (2 * k + 1, k + 1, 0.0, np.sqrt(3 * h) / 6),
        ):
            rows.append(r)
            cols.append(c)
            tvals.append(tv)
            nvals.append(nv)
    shape = (2 * n, N)
    T = sp.csr_matrix((tvals, (rows, cols)), shape=shape)
    T.eliminate_zeros()
    Nmat = sp.csr_matrix((nvals, (rows, cols)), shape=shape)
    O = sp.identity(2 * n, format="csr")
    return TestMatrices(O=SparseMatrix.from_scipy(O, symmetric=True),
                        T=SparseMatrix.from_scipy(T),
                        N=SparseMatrix.from_scipy(Nmat))


def evaluate_trace(J: int, t: float) -> np.ndarray:
    """Nodal values of the hat basis at an endpoint of I."""
    disc = TemporalDiscretization(J)
    if t == 0.0:
        out = np.zeros(disc.N_t)
        out[0] = 1.0
        return out
    if t == 1.0:
        out = np.zeros(disc.N_t)
        out[-1] = 1.0
        return out
    raise ValueError("trace evaluation only defined at t = 0 or t = T = 1")
