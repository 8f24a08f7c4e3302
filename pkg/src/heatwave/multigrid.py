"""Geometric multigrid V-cycles for alpha*A_x + mu*M_x.

The induced map b -> (result of n_vcycles V-cycles from a zero start) is a
fixed linear operator; forward Gauss-Seidel pre-smoothing paired with
backward post-smoothing and P^T restriction make it symmetric, and the usual
contraction argument makes it positive definite.  The coarsest level (K = 1,
a single interior vertex for d <= 3) is solved by a dense factorization.

Every level is rediscretized rather than Galerkin-coarsened; for the
constant-coefficient forms on these nested meshes the two coincide exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from . import _kernels
from .sparse import SparseMatrix, counter
from .spatial import MeshHierarchy, assemble_spatial


def assemble_level_operators(hierarchy: MeshHierarchy, D=None, c=0.0):
    """Per-level (M_x, A_x), assembled once and shared by all solvers."""
    return [assemble_spatial(mesh, D, c) for mesh in hierarchy.levels]


@dataclass
class MultigridSolver:
    hierarchy: MeshHierarchy
    alpha: float
    mu: float
    n_vcycles: int
    n_smooth: int
    flops_per_apply: int
    thread_safe = True
    # flattened per-level arrays consumed by the numba kernel
    _k: tuple = None

    @property
    def n(self):
        return int(self._k[1][-1])

    def apply(self, b):
        b = np.ascontiguousarray(b, dtype=float)
        if b.shape != (self.n,):
            raise ValueError(f"right-hand side must have length {self.n}")
        x = np.zeros_like(b)
        _kernels.mg_solve(*self._k, b, x, self.n_vcycles, self.n_smooth)
        counter.add(self.flops_per_apply)
        return x

    __call__ = apply

    def apply_rows(self, B, out, r0, r1):
        """V-cycle solves for rows r0..r1 of B; safe to call concurrently on
        disjoint row ranges (this is how the time-parallel engine drives it)."""
        _kernels.mg_solve_rows(*self._k, B, out, self.n_vcycles, self.n_smooth,
                               r0, r1)
        counter.add(self.flops_per_apply * (r1 - r0))

    def apply_rows_indexed(self, B, out, rows):
        _kernels.mg_solve_indexed(*self._k, B, out, self.n_vcycles,
                                  self.n_smooth, rows)
        counter.add(self.flops_per_apply * len(rows))

    def solve_into(self, b, x):
        """x[:] = solver(b); b and x must not alias."""
        x[:] = 0.0
        _kernels.mg_solve(*self._k, b, x, self.n_vcycles, self.n_smooth)
        counter.add(self.flops_per_apply)


def make_solver(hierarchy: MeshHierarchy, alpha: float, mu: float,
                n_vcycles: int = 2, n_smooth: int = 3,
                level_operators=None, D=None, c=0.0) -> MultigridSolver:
    if alpha <= 0 and mu <= 0:
        raise ValueError("need alpha > 0 or mu > 0")
    if not hierarchy.levels:
        raise ValueError("empty hierarchy")
    if level_operators is None:
        level_operators = assemble_level_operators(hierarchy, D, c)

    mats = []
    for ops in level_operators:
        A = alpha * ops.A_x.to_scipy() + mu * ops.M_x.to_scipy()
        A.sort_indices()
        mats.append(A.tocsr())

    nlev = len(mats)
    nk = np.array([m.shape[0] for m in mats], dtype=np.int64)
    xoff = np.concatenate([[0], np.cumsum(nk)]).astype(np.int64)

    def cat_csr(ms):
        ip = np.concatenate([m.indptr.astype(np.int64) for m in ms])
        ip_off = np.concatenate(
            [[0], np.cumsum([m.shape[0] + 1 for m in ms])]).astype(np.int64)
        idx = np.concatenate([m.indices.astype(np.int64) for m in ms])
        nnz_off = np.concatenate(
            [[0], np.cumsum([m.nnz for m in ms])]).astype(np.int64)
        dat = np.concatenate([m.data.astype(float) for m in ms])
        return ip, ip_off, idx, nnz_off, dat

    A_ip, ip_off, A_idx, nnz_off, A_dat = cat_csr(mats)
    diag = np.concatenate([m.diagonal() for m in mats])

    # prolongations P_k (level k-1 -> k) and restrictions P_k^T; pad level 0
    # with 1x1 dummies so kernel offsets line up with level indices
    dummy = SparseMatrix.identity(1).to_scipy()
    Ps = [dummy] + [hierarchy.prolongation(k).to_scipy() for k in range(2, nlev + 1)]
    Rs = [dummy] + [p.T.tocsr() for p in Ps[1:]]
    P_ip, pip_off, P_idx, pnnz_off, P_dat = cat_csr(Ps)
    R_ip, rip_off, R_idx, rnnz_off, R_dat = cat_csr(Rs)

    coarse_inv = np.ascontiguousarray(sla.inv(mats[0].toarray()))

    nnz_fine = sum(m.nnz for m in mats[1:]) if nlev > 1 else 0
    nnz_p = sum(p.nnz for p in Ps[1:])
    smooth_cost = 2 * n_smooth * 2 * nnz_fine
    flops = n_vcycles * (smooth_cost + 2 * nnz_fine + 4 * nnz_p
                         + 2 * nk[0] ** 2 + int(nk.sum()))

    k = (nlev, nk, xoff, ip_off, nnz_off, A_ip, A_idx, A_dat, diag,
         pip_off, pnnz_off, P_ip, P_idx, P_dat,
         rip_off, rnnz_off, R_ip, R_idx, R_dat, coarse_inv)
    return MultigridSolver(hierarchy=hierarchy, alpha=alpha, mu=mu,
                           n_vcycles=n_vcycles, n_smooth=n_smooth,
                           flops_per_apply=int(flops), _k=k)


class ExactSolver:
    """Sparse-LU inverse of alpha*A + mu*M; the 'exact inner inverse' mode."""

    thread_safe = False

    def __init__(self, A: SparseMatrix, M: SparseMatrix = None,
                 alpha: float = 1.0, mu: float = 0.0):
        mat = alpha * A.to_scipy()
        if mu:
            mat = mat + mu * M.to_scipy()
        self.n = mat.shape[0]
        self._lu = spla.splu(mat.tocsc())
        self.flops_per_apply = 4 * mat.nnz  # rough LU-solve accounting

    def apply(self, b):
        counter.add(self.flops_per_apply)
        return self._lu.solve(np.ascontiguousarray(b, dtype=float))

    __call__ = apply

    def apply_rows(self, B, out, r0, r1):
        out[r0:r1] = self._lu.solve(B[r0:r1].T).T
        counter.add(self.flops_per_apply * (r1 - r0))

    def solve_into(self, b, x):
        x[:] = self._lu.solve(np.ascontiguousarray(b))
        counter.add(self.flops_per_apply)

    def solve_block(self, B):
        counter.add(self.flops_per_apply * B.shape[0])
        return self._lu.solve(B.T).T


@dataclass
class SpectralEquivalenceReport:
    lambda_min: float
    lambda_max: float
    kappa: float


def spectral_report(solver, exact_inverse: np.ndarray, n: int = None
                    ) -> SpectralEquivalenceReport:
    """Extreme generalized eigenvalues of (solver-as-operator, exact inverse).

    Both operands are materialized densely, so this is a small-instance
    oracle only.  Raises if either side fails to be symmetric positive
    definite.
    """
    from .sparse import dense_materialize

    n = n or exact_inverse.shape[0]
    B = dense_materialize(solver.apply, n)
    if not np.allclose(B, B.T, atol=1e-10 * max(1.0, abs(B).max())):
        raise ValueError("multigrid operator is not symmetric")
    for name, mat in (("operator", B), ("exact inverse", exact_inverse)):
        if np.linalg.eigvalsh((mat + mat.T) / 2).min() <= 0:
            raise ValueError(f"{name} is not positive definite")
    ev = sla.eigh(0.5 * (B + B.T), 0.5 * (exact_inverse + exact_inverse.T),
                  eigvals_only=True)
    return SpectralEquivalenceReport(lambda_min=float(ev[0]),
                                     lambda_max=float(ev[-1]),
                                     kappa=float(ev[-1] / ev[0]))
