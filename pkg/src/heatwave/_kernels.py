"""Compiled kernels for the hot apply paths.

Everything here is numba-jitted with ``nogil=True`` so that the thread pool
in :mod:`heatwave.solver` gets real parallelism.  All kernels accumulate
strictly left-to-right in CSR index order; results are therefore independent
of how columns are partitioned between workers.
"""

import numpy as np
from numba import njit

_JIT = dict(nogil=True, cache=True)


@njit(**_JIT)
def csr_matvec(indptr, indices, data, x, out):
    n = indptr.shape[0] - 1
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        out[i] = acc


@njit(**_JIT)
def csr_rows_matvec(indptr, indices, data, X, out, r0, r1):
    """out[r] = A @ X[r] for rows r in [r0, r1): spatial factor per column."""
    for r in range(r0, r1):
        n = indptr.shape[0] - 1
        for i in range(n):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc += data[k] * X[r, indices[k]]
            out[r, i] = acc


@njit(**_JIT)
def temporal_apply(indptr, indices, data, X, out, r0, r1):
    """out[c] = sum_k B[c, k] * X[k] for output columns c in [r0, r1).

    B is the temporal factor in CSR form; reads of X may cross the range
    boundary (halo columns), writes never do.
    """
    nx = X.shape[1]
    for c in range(r0, r1):
        for i in range(nx):
            out[c, i] = 0.0
        for k in range(indptr[c], indptr[c + 1]):
            a = data[k]
            src = indices[k]
            for i in range(nx):
                out[c, i] += a * X[src, i]


@njit(**_JIT)
def col_dots(X, Y, out, r0, r1):
    for c in range(r0, r1):
        acc = 0.0
        for i in range(X.shape[1]):
            acc += X[c, i] * Y[c, i]
        out[c] = acc


@njit(**_JIT)
def axpy_rows(a, X, Y, r0, r1):
    for c in range(r0, r1):
        for i in range(X.shape[1]):
            Y[c, i] += a * X[c, i]


@njit(**_JIT)
def xpay_rows(a, X, Y, r0, r1):
    """Y[c] = X[c] + a * Y[c] (CG direction update)."""
    for c in range(r0, r1):
        for i in range(X.shape[1]):
            Y[c, i] = X[c, i] + a * Y[c, i]


@njit(**_JIT)
def copy_rows(X, Y, r0, r1):
    for c in range(r0, r1):
        for i in range(X.shape[1]):
            Y[c, i] = X[c, i]


@njit(**_JIT)
def gs_forward(indptr, indices, data, diag, x, b, sweeps, n):
    for _ in range(sweeps):
        for i in range(n):
            acc = b[i]
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j != i:
                    acc -= data[k] * x[j]
            x[i] = acc / diag[i]


@njit(**_JIT)
def gs_backward(indptr, indices, data, diag, x, b, sweeps, n):
    for _ in range(sweeps):
        for i in range(n - 1, -1, -1):
            acc = b[i]
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j != i:
                    acc -= data[k] * x[j]
            x[i] = acc / diag[i]


@njit(**_JIT)
def _mg_core(nlev, nk, xoff, ip_off, nnz_off, A_indptr, A_indices, A_data,
             diag, pip_off, pnnz_off, P_indptr, P_indices, P_data,
             rip_off, rnnz_off, R_indptr, R_indices, R_data,
             coarse_inv, b, x, n_vcycles, n_smooth, xw, bw, rw):
    """n_vcycles V-cycles for the flattened level hierarchy, zero start.

    Level 0 is the coarsest (solved densely via ``coarse_inv``); level
    ``nlev-1`` is the target grid.  Smoothing is forward Gauss-Seidel on the
    way down and backward on the way up, which makes the induced operator
    symmetric.  xw/bw/rw are caller-provided workspaces of total level size.
    """
    top = nlev - 1
    n0 = nk[0]

    if nlev == 1:
        for i in range(n0):
            acc = 0.0
            for j in range(n0):
                acc += coarse_inv[i, j] * b[j]
            x[i] = acc
        return

    for i in range(nk[top]):
        bw[xoff[top] + i] = b[i]
        xw[xoff[top] + i] = 0.0

    for _ in range(n_vcycles):
        for k in range(top, 0, -1):
            o = xoff[k]
            ip = ip_off[k]
            nz = nnz_off[k]
            n = nk[k]
            # pre-smooth (forward GS)
            for _s in range(n_smooth):
                for i in range(n):
                    acc = bw[o + i]
                    for t in range(A_indptr[ip + i], A_indptr[ip + i + 1]):
                        j = A_indices[nz + t]
                        if j != i:
                            acc -= A_data[nz + t] * xw[o + j]
                    xw[o + i] = acc / diag[o + i]
            # residual
            for i in range(n):
                acc = bw[o + i]
                for t in range(A_indptr[ip + i], A_indptr[ip + i + 1]):
                    acc -= A_data[nz + t] * xw[o + A_indices[nz + t]]
                rw[o + i] = acc
            # restrict to level k-1, zero the coarse iterate
            oc = xoff[k - 1]
            rip = rip_off[k]
            rnz = rnnz_off[k]
            for i in range(nk[k - 1]):
                acc = 0.0
                for t in range(R_indptr[rip + i], R_indptr[rip + i + 1]):
                    acc += R_data[rnz + t] * rw[o + R_indices[rnz + t]]
                bw[oc + i] = acc
                xw[oc + i] = 0.0
        # coarsest: dense solve
        for i in range(n0):
            acc = 0.0
            for j in range(n0):
                acc += coarse_inv[i, j] * bw[j]
            xw[i] = acc
        for k in range(1, top + 1):
            o = xoff[k]
            oc = xoff[k - 1]
            ip = ip_off[k]
            nz = nnz_off[k]
            n = nk[k]
            pip = pip_off[k]
            pnz = pnnz_off[k]
            # prolongate and correct
            for i in range(n):
                acc = 0.0
                for t in range(P_indptr[pip + i], P_indptr[pip + i + 1]):
                    acc += P_data[pnz + t] * xw[oc + P_indices[pnz + t]]
                xw[o + i] += acc
            # post-smooth (backward GS)
            for _s in range(n_smooth):
                for i in range(n - 1, -1, -1):
                    acc = bw[o + i]
                    for t in range(A_indptr[ip + i], A_indptr[ip + i + 1]):
                        j = A_indices[nz + t]
                        if j != i:
                            acc -= A_data[nz + t] * xw[o + j]
                    xw[o + i] = acc / diag[o + i]

    for i in range(nk[top]):
        x[i] = xw[xoff[top] + i]


@njit(**_JIT)
def mg_solve(nlev, nk, xoff, ip_off, nnz_off, A_indptr, A_indices, A_data,
             diag, pip_off, pnnz_off, P_indptr, P_indices, P_data,
             rip_off, rnnz_off, R_indptr, R_indices, R_data,
             coarse_inv, b, x, n_vcycles, n_smooth):
    ntot = xoff[nlev]
    xw = np.zeros(ntot)
    bw = np.zeros(ntot)
    rw = np.zeros(ntot)
    _mg_core(nlev, nk, xoff, ip_off, nnz_off, A_indptr, A_indices, A_data,
             diag, pip_off, pnnz_off, P_indptr, P_indices, P_data,
             rip_off, rnnz_off, R_indptr, R_indices, R_data,
             coarse_inv, b, x, n_vcycles, n_smooth, xw, bw, rw)


@njit(**_JIT)
def mg_solve_rows(nlev, nk, xoff, ip_off, nnz_off, A_indptr, A_indices, A_data,
                  diag, pip_off, pnnz_off, P_indptr, P_indices, P_data,
                  rip_off, rnnz_off, R_indptr, R_indices, R_data,
                  coarse_inv, B, X, n_vcycles, n_smooth, r0, r1):
    """Apply the V-cycle solver to rows r0..r1 of B, writing into X."""
    ntot = xoff[nlev]
    xw = np.zeros(ntot)
    bw = np.zeros(ntot)
    rw = np.zeros(ntot)
    for r in range(r0, r1):
        _mg_core(nlev, nk, xoff, ip_off, nnz_off, A_indptr, A_indices, A_data,
                 diag, pip_off, pnnz_off, P_indptr, P_indices, P_data,
                 rip_off, rnnz_off, R_indptr, R_indices, R_data,
                 coarse_inv, B[r], X[r], n_vcycles, n_smooth, xw, bw, rw)


@njit(**_JIT)
def mg_solve_indexed(nlev, nk, xoff, ip_off, nnz_off, A_indptr, A_indices,
                     A_data, diag, pip_off, pnnz_off, P_indptr, P_indices,
                     P_data, rip_off, rnnz_off, R_indptr, R_indices, R_data,
                     coarse_inv, B, X, n_vcycles, n_smooth, rows):
    """V-cycle solves for an arbitrary set of rows (preconditioner blocks)."""
    ntot = xoff[nlev]
    xw = np.zeros(ntot)
    bw = np.zeros(ntot)
    rw = np.zeros(ntot)
    for k in range(rows.shape[0]):
        r = rows[k]
        _mg_core(nlev, nk, xoff, ip_off, nnz_off, A_indptr, A_indices, A_data,
                 diag, pip_off, pnnz_off, P_indptr, P_indices, P_data,
                 rip_off, rnnz_off, R_indptr, R_indices, R_data,
                 coarse_inv, B[r], X[r], n_vcycles, n_smooth, xw, bw, rw)


@njit(**_JIT)
def csr_matvec_indexed(indptr, indices, data, X, out, rows):
    for k in range(rows.shape[0]):
        r = rows[k]
        n = indptr.shape[0] - 1
        for i in range(n):
            acc = 0.0
            for t in range(indptr[i], indptr[i + 1]):
                acc += data[t] * X[r, indices[t]]
            out[r, i] = acc
