"""PCG on the wavelet-coordinate Schur system, with a time-parallel engine.

The parallel engine is a shared-memory realization of distributing temporal
degrees of freedom: a worker owns a contiguous range of temporal columns,
operator applications are split into phases (temporal factor, spatial factor,
preconditioner blocks), and each phase is a fork-join over the worker ranges
with direct reads of neighbor (halo) columns.  Every output column is
computed by the identical instruction sequence no matter how columns are
partitioned, and inner products reduce per-column partials through a fixed
binary tree, so iterates and iteration counts are independent of the worker
count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .sparse import SpaceTimeVector, counter
from .spatial import ProblemData, build_mesh_hierarchy, l2_error_on_mesh
from .temporal import (TemporalDiscretization, assemble_temporal_trial,
                       assemble_temporal_test)
from .multigrid import make_solver, assemble_level_operators, ExactSolver
from .system import (SchurOperator, PreconditionerKX, RightHandSide,
                     assemble_rhs)
from .wavelet import build_wavelet, WaveletTransform


@dataclass
class SolveConfig:
    alpha: float = 0.3
    epsilon: float = 1e-6
    vcycles: int = 2
    smooth: int = 3
    workers: int = 1
    exact_inverses: bool = False
    max_iterations: int = 200
    recompute_every: int = 50
    form: str = "five_term"


@dataclass
class ParallelPlan:
    """Partition of temporal columns into per-worker contiguous ranges."""

    n_workers: int
    column_ranges: tuple
    halo_width: int
    reduction: str = "tree"

    @classmethod
    def create(cls, n_workers: int, n_columns: int, halo_width: int = 2):
        return cls(n_workers=n_workers,
                   column_ranges=tuple(split_ranges(n_columns, n_workers)),
                   halo_width=halo_width)

    def validate(self):
        prev = 0
        for (a, b) in self.column_ranges:
            if a != prev:
                raise ValueError("ranges must be disjoint and contiguous")
            prev = b
        return self


def split_ranges(n, parts):
    ranges = []
    base, extra = divmod(n, parts)
    start = 0
    for w in range(parts):
        stop = start + base + (1 if w < extra else 0)
        if stop > start:
            ranges.append((start, stop))
        start = stop
    return ranges


class WorkerPool:
    """Fork-join phase runner over column ranges (shared-memory halos)."""

    def __init__(self, n_workers: int = 1):
        self.n_workers = n_workers
        self._ex = (ThreadPoolExecutor(max_workers=n_workers)
                    if n_workers > 1 else None)

    def run_ranges(self, fn, ncols):
        if self._ex is None or ncols < 2 * self.n_workers:
            fn(0, ncols)
            return
        futs = [self._ex.submit(fn, a, b)
                for (a, b) in split_ranges(ncols, self.n_workers)]
        for f in futs:
            f.result()   # barrier; re-raises worker failures

    def close(self):
        if self._ex is not None:
            self._ex.shutdown(wait=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def tree_reduce(values):
    """Fixed-order pairwise summation, independent of worker count."""
    buf = np.asarray(values, dtype=float)
    while buf.size > 1:
        n = buf.size
        half = n // 2
        s = buf[: 2 * half : 2] + buf[1: 2 * half : 2]
        buf = np.concatenate([s, buf[2 * half:]]) if n % 2 else s
    return float(buf[0])


def _dot(X, Y, partials, pool):
    n = X.shape[0]
    if pool is None:
        _kernels.col_dots(X, Y, partials, 0, n)
    else:
        pool.run_ranges(lambda c0, c1: _kernels.col_dots(X, Y, partials, c0, c1), n)
    counter.add(2 * X.size)
    return tree_reduce(partials[:n])


class IterationLimitError(RuntimeError):
    """PCG hit the iteration cap; carries the residual-norm history."""

    def __init__(self, message, residual_norms):
        super().__init__(message)
        self.residual_norms = residual_norms


@dataclass
class PCGResult:
    w: SpaceTimeVector
    iterations: int
    residual_norms: list
    kappa_estimate: Optional[float]
    wall_times: dict
    cg_alphas: list = field(default_factory=list)
    cg_betas: list = field(default_factory=list)


def lanczos_tridiagonal(alphas, betas):
    """Lanczos matrix of the preconditioned operator from CG coefficients."""
    n = len(alphas)
    d = np.zeros(n)
    e = np.zeros(max(n - 1, 0))
    for k in range(n):
        d[k] = 1.0 / alphas[k]
        if k > 0:
            d[k] += betas[k - 1] / alphas[k - 1]
        if k < n - 1:
            e[k] = np.sqrt(max(betas[k], 0.0)) / alphas[k]
    return d, e


def _kappa_from_cg(alphas, betas):
    if len(alphas) < 2:
        return None
    d, e = lanczos_tridiagonal(alphas, betas)
    ev = np.linalg.eigvalsh(np.diag(d) + np.diag(e, 1) + np.diag(e, -1))
    return float(ev[-1] / ev[0])


def estimate_condition(result: PCGResult) -> float:
    """kappa_2(K_X S-hat) from the CG Lanczos tridiagonal of the run."""
    if result.iterations < 5:
        raise ValueError("need at least 5 recorded iterations for a "
                         "condition estimate")
    return _kappa_from_cg(result.cg_alphas, result.cg_betas)


def pcg(S: SchurOperator, K: PreconditionerKX, f_hat, epsilon: float,
        plan: Optional[ParallelPlan] = None, max_iterations: int = 200,
        recompute_every: int = 50) -> PCGResult:
    """Preconditioned CG on S-hat w = f-hat, stopping on r^T K_X r <= eps^2."""
    if epsilon <= 0:
        raise ValueError("tolerance must be positive")
    f = f_hat.f_hat.array if isinstance(f_hat, RightHandSide) else f_hat.array
    n_t, n_x = f.shape
    times = {"schur": 0.0, "precond": 0.0, "vector": 0.0, "total": 0.0}
    t_start = time.perf_counter()

    pool = WorkerPool(plan.n_workers) if plan is not None else None
    partials = np.empty(max(n_t, 1))
    alphas, betas = [], []
    try:
        w = np.zeros_like(f)
        if not np.any(f):
            return PCGResult(SpaceTimeVector(w), 0, [0.0], None, times)
        # w0 = 0 makes the true residual f - S w0 equal f exactly
        r = f.copy()
        z = np.empty_like(f)
        q = np.empty_like(f)
        t0 = time.perf_counter()
        K.apply_array(r, pool, out=z)
        times["precond"] += time.perf_counter() - t0
        rho = _dot(r, z, partials, pool)
        history = [np.sqrt(max(rho, 0.0))]
        if rho <= epsilon ** 2:
            times["total"] = time.perf_counter() - t_start
            return PCGResult(SpaceTimeVector(w), 0, history, None, times)
        p = z.copy()
        for k in range(1, max_iterations + 1):
            t0 = time.perf_counter()
            S.apply_array(p, pool, out=q)
            times["schur"] += time.perf_counter() - t0
            pq = _dot(p, q, partials, pool)
            if pq <= 0:
                raise RuntimeError("operator lost positive definiteness "
                                   f"(p^T S p = {pq:g})")
            alpha = rho / pq
            t0 = time.perf_counter()
            if pool is None:
                _kernels.axpy_rows(alpha, p, w, 0, n_t)
            else:
                pool.run_ranges(
                    lambda c0, c1: _kernels.axpy_rows(alpha, p, w, c0, c1), n_t)
            if k % recompute_every == 0:
                tq = time.perf_counter()
                r = f - S.apply_array(w, pool)
                times["schur"] += time.perf_counter() - tq
            elif pool is None:
                _kernels.axpy_rows(-alpha, q, r, 0, n_t)
            else:
                pool.run_ranges(
                    lambda c0, c1: _kernels.axpy_rows(-alpha, q, r, c0, c1), n_t)
            times["vector"] += time.perf_counter() - t0
            t0 = time.perf_counter()
            K.apply_array(r, pool, out=z)
            times["precond"] += time.perf_counter() - t0
            rho_new = _dot(r, z, partials, pool)
            beta = rho_new / rho
            alphas.append(alpha)
            betas.append(beta)
            rho = rho_new
            history.append(np.sqrt(max(rho, 0.0)))
            if rho <= epsilon ** 2:
                times["total"] = time.perf_counter() - t_start
                kappa = _kappa_from_cg(alphas, betas) if k >= 5 else None
                return PCGResult(SpaceTimeVector(w), k, history, kappa, times,
                                 alphas, betas)
            t0 = time.perf_counter()
            if pool is None:
                _kernels.xpay_rows(beta, z, p, 0, n_t)
            else:
                pool.run_ranges(
                    lambda c0, c1: _kernels.xpay_rows(beta, z, p, c0, c1), n_t)
            times["vector"] += time.perf_counter() - t0
        raise IterationLimitError(
            f"PCG did not reach tolerance {epsilon:g} within "
            f"{max_iterations} iterations", history)
    finally:
        if pool is not None:
            pool.close()


def lanczos_condition(S: SchurOperator, K: PreconditionerKX, seed: int = 0,
                      tol: float = 1e-4, max_iterations: int = 250,
                      check_every: int = 10):
    """Converged kappa_2(K_X S-hat) estimate from a random-vector CG-Lanczos
    run (no solve tolerance: iterate until the extreme Ritz values settle)."""
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((S.n_t, S.n_x))
    r = f.copy()
    z = K.apply_array(r)
    rho = float((r * z).sum())
    p = z.copy()
    alphas, betas = [], []
    prev = None
    for k in range(1, max_iterations + 1):
        q = S.apply_array(p)
        pq = float((p * q).sum())
        if pq <= 0:
            break
        alpha = rho / pq
        r -= alpha * q
        z = K.apply_array(r)
        rho_new = float((r * z).sum())
        if rho_new <= 0:
            break
        beta = rho_new / rho
        alphas.append(alpha)
        betas.append(beta)
        rho = rho_new
        p = z + beta * p
        if k >= check_every and k % check_every == 0:
            kap = _kappa_from_cg(alphas, betas)
            if prev is not None and abs(kap - prev) <= tol * kap:
                return kap, k
            prev = kap
    return _kappa_from_cg(alphas, betas), len(alphas)


def parallel_execute(plan: ParallelPlan, operator, v: SpaceTimeVector
                     ) -> SpaceTimeVector:
    """Run one operator application under the worker plan."""
    plan.validate()
    with WorkerPool(plan.n_workers) as pool:
        return operator.apply(v, pool)


@dataclass
class HeatSolution:
    """Single-scale solution coefficients plus evaluation helpers."""

    coefficients: SpaceTimeVector     # (N_t, N_x), nodal in time and space
    mesh: object                      # finest spatial mesh
    temporal: TemporalDiscretization
    algebraic_error: float            # final (r^T K_X r)^(1/2) of the solve

    def trace_coefficients(self, t: float) -> np.ndarray:
        """Spatial P1 coefficients of u_h(t, .) by hat interpolation in time."""
        if not 0.0 <= t <= 1.0:
            raise ValueError("time must lie in [0, T] = [0, 1]")
        X = self.coefficients.array
        pos = t * self.temporal.n_elements
        k = min(int(pos), self.temporal.n_elements - 1)
        s = pos - k
        return (1.0 - s) * X[k] + s * X[k + 1]


def measure_error(solution: HeatSolution, exact, t: float) -> float:
    """L2(Omega) error of the discrete trace at time t against a callable."""
    coeffs = solution.trace_coefficients(t)
    return l2_error_on_mesh(solution.mesh, coeffs, lambda x: exact(t, x))


@dataclass
class ProblemAssembly:
    """All discrete pieces of one space-time solve."""

    temporal_disc: TemporalDiscretization
    temporal: object
    test: object
    hierarchy: object
    spatial: object
    wavelet: WaveletTransform
    K_x: object
    S: SchurOperator
    K_X: PreconditionerKX
    rhs: RightHandSide


def assemble_system(problem: ProblemData, J: int, K: int,
                    config: SolveConfig = None) -> ProblemAssembly:
    config = config or SolveConfig()
    d = problem.D.shape[0]
    tdisc = TemporalDiscretization(J)
    temporal = assemble_temporal_trial(J)
    test = assemble_temporal_test(J)
    hierarchy = build_mesh_hierarchy(d, K)
    level_ops = assemble_level_operators(hierarchy, problem.D, problem.c)
    spatial = level_ops[-1]
    levels = build_wavelet(J)
    wt = WaveletTransform(levels)

    if config.exact_inverses:
        K_x = ExactSolver(spatial.A_x)
        blocks = {j: ExactSolver(spatial.A_x, spatial.M_x,
                                 alpha=config.alpha, mu=2.0 ** j)
                  for j in range(J + 1)}
    else:
        K_x = make_solver(hierarchy, 1.0, 0.0, config.vcycles, config.smooth,
                          level_operators=level_ops)
        blocks = {j: make_solver(hierarchy, config.alpha, 2.0 ** j,
                                 config.vcycles, config.smooth,
                                 level_operators=level_ops)
                  for j in range(J + 1)}

    S = SchurOperator(temporal=temporal, spatial=spatial, K_x=K_x,
                      wavelet=wt, form=config.form, test=test)
    K_X = PreconditionerKX(blocks=blocks, A_x=spatial.A_x,
                           level_of=levels.level_of, alpha=config.alpha)
    rhs = assemble_rhs(problem, hierarchy.finest, J, temporal, test,
                       spatial, K_x, wt)
    return ProblemAssembly(tdisc, temporal, test, hierarchy, spatial, wt,
                           K_x, S, K_X, rhs)


def solve_heat(problem: ProblemData, J: int, K: int,
               config: SolveConfig = None):
    """Assemble, run PCG, and return (PCGResult, HeatSolution)."""
    config = config or SolveConfig()
    asm = assemble_system(problem, J, K, config)
    plan = (ParallelPlan.create(config.workers, asm.temporal_disc.N_t)
            if config.workers > 1 else None)
    result = pcg(asm.S, asm.K_X, asm.rhs, config.epsilon, plan,
                 config.max_iterations, config.recompute_every)
    u = asm.wavelet.apply_array(result.w.array)   # back to single scale
    solution = HeatSolution(coefficients=SpaceTimeVector(u),
                            mesh=asm.hierarchy.finest,
                            temporal=asm.temporal_disc,
                            algebraic_error=result.residual_norms[-1])
    return result, solution
