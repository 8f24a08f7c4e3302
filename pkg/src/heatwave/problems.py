"""Built-in manufactured heat problems on [0,1]^d."""

from __future__ import annotations

import numpy as np

from .spatial import ProblemData


def _prod_sines(pts):
    return np.prod(np.sin(np.pi * pts), axis=1)


def decaying_heat(d: int) -> ProblemData:
    """u = exp(-d pi^2 t) * prod sin(pi x_i): zero forcing, pure decay."""
    rate = d * np.pi ** 2

    def exact(t, pts):
        return np.exp(-rate * t) * _prod_sines(pts)

    return ProblemData(D=np.eye(d), c=0.0,
                       u0=_prod_sines, g=None, exact_solution=exact)


def forced_heat(d: int) -> ProblemData:
    """u = exp(-t) * prod sin(pi x_i): mild decay, nonzero forcing.

    g = u_t - Laplace(u) = (d pi^2 - 1) u; the O(1) solution scale at final
    time makes this the right problem for convergence studies (the pure-decay
    solution above is ~1e-9 at T, far below useful algebraic tolerances).
    """
    factor = d * np.pi ** 2 - 1.0

    def exact(t, pts):
        return np.exp(-t) * _prod_sines(pts)

    def g(t, pts):
        return factor * np.exp(-t) * _prod_sines(pts)

    return ProblemData(D=np.eye(d), c=0.0,
                       u0=_prod_sines, g=g, exact_solution=exact)


PROBLEMS = {"decaying": decaying_heat, "forced": forced_heat}
