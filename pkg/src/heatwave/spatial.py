"""Nested uniform simplicial meshes of [0,1]^d and P1 finite elements.

d = 1: intervals; d = 2: right triangles with every square split along the
same lower-left to upper-right diagonal; d = 3: the six-tetrahedra Kuhn
subdivision of every cube, all sharing the main diagonal direction.  These
choices make every refinement nested: a fine vertex is either a coarse
vertex or the midpoint of a coarse edge, so prolongation rows carry either
{1} or {1/2, 1/2}.

Homogeneous Dirichlet conditions are imposed by eliminating boundary
vertices at assembly; all matrices live on interior vertices, enumerated
lexicographically.  Element integrals of the constant-coefficient forms are
exact; load vectors use a fixed degree-2 Gauss rule per element.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .sparse import SparseMatrix, SpaceTimeVector


@dataclass
class ProblemData:
    """Coefficients and data of the reaction-diffusion problem."""

    D: np.ndarray
    c: float
    u0: Callable
    g: Optional[Callable] = None          # forcing g(t, points) or None for 0
    exact_solution: Optional[Callable] = None   # u(t, points)

    def __post_init__(self):
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        if not np.allclose(self.D, self.D.T):
            raise ValueError("diffusion matrix must be symmetric")
        if np.any(np.linalg.eigvalsh(self.D) <= 0):
            raise ValueError("diffusion matrix must be positive definite")
        if self.c < 0:
            raise ValueError("reaction coefficient must be >= 0")


@dataclass
class Mesh:
    d: int
    level: int
    vertices: np.ndarray          # (nv, d)
    elements: np.ndarray          # (ne, d+1) vertex ids
    interior: np.ndarray          # interior vertex ids, lexicographic
    interior_index: np.ndarray    # nv-array: position among interior or -1

    @property
    def n_interior(self):
        return len(self.interior)

    @property
    def h(self):
        return 2.0 ** -self.level


@dataclass
class SpatialMatrices:
    M_x: SparseMatrix
    A_x: SparseMatrix


@dataclass
class MeshHierarchy:
    d: int
    K: int
    levels: list                      # Mesh, coarse (level 1) to fine (level K)
    prolongations: list               # SparseMatrix, level k-1 -> k (k >= 2)

    @property
    def finest(self) -> Mesh:
        return self.levels[-1]

    @property
    def N_x(self):
        return self.finest.n_interior

    def mesh(self, k) -> Mesh:
        return self.levels[k - 1]

    def prolongation(self, k) -> SparseMatrix:
        """Interpolation from level k-1 interior DOFs to level k."""
        if not 2 <= k <= self.K:
            raise ValueError(f"no prolongation onto level {k}")
        return self.prolongations[k - 2]


def _build_mesh(d, k):
    npts = 2 ** k + 1
    idx = np.arange(npts)
    if d == 1:
        verts = (idx[:, None]).astype(float) / (npts - 1)
        elems = np.stack([idx[:-1], idx[1:]], axis=1)
    elif d == 2:
        X, Y = np.meshgrid(idx, idx, indexing="ij")
        verts = np.stack([X.ravel(), Y.ravel()], axis=1).astype(float) / (npts - 1)
        vid = lambda i, j: i * npts + j
        i, j = (a.ravel() for a in np.meshgrid(idx[:-1], idx[:-1], indexing="ij"))
        t1 = np.stack([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)], axis=1)
        t2 = np.stack([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)], axis=1)
        elems = np.concatenate([t1, t2], axis=0)
    elif d == 3:
        X, Y, Z = np.meshgrid(idx, idx, idx, indexing="ij")
        verts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1).astype(float)
        verts /= (npts - 1)
        vid = lambda c: (c[:, 0] * npts + c[:, 1]) * npts + c[:, 2]
        i, j, kk = (a.ravel() for a in
                    np.meshgrid(idx[:-1], idx[:-1], idx[:-1], indexing="ij"))
        c = np.stack([i, j, kk], axis=1)
        parts = []
        for perm in itertools.permutations(range(3)):
            v0 = c
            v1 = v0 + np.eye(3, dtype=int)[perm[0]]
            v2 = v1 + np.eye(3, dtype=int)[perm[1]]
            v3 = v2 + np.eye(3, dtype=int)[perm[2]]
            parts.append(np.stack([vid(v0), vid(v1), vid(v2), vid(v3)], axis=1))
        elems = np.concatenate(parts, axis=0)
    else:
        raise ValueError("dimension must be 1, 2 or 3")

    grid = np.rint(verts * (npts - 1)).astype(int)
    is_int = np.all((grid > 0) & (grid < npts - 1), axis=1)
    interior = np.where(is_int)[0]
    interior_index = np.full(len(verts), -1, dtype=np.int64)
    interior_index[interior] = np.arange(len(interior))
    return Mesh(d=d, level=k, vertices=verts, elements=elems,
                interior=interior, interior_index=interior_index)


def _build_prolongation(coarse: Mesh, fine: Mesh) -> SparseMatrix:
    # Fine vertex at even grid coords sits on a coarse vertex; otherwise it is
    # the midpoint of the coarse edge between grid/2 rounded both ways along
    # its odd parity directions (an edge of the mesh thanks to the fixed
    # diagonal orientation).
    nf = 2 ** fine.level
    grid = np.rint(fine.vertices * nf).astype(int)
    rows, cols, vals = [], [], []
    nc = 2 ** coarse.level

    def coarse_id(gc):
        if np.any(gc <= 0) or np.any(gc >= nc):
            return -1
        flat = 0
        for comp in gc:
            flat = flat * (nc + 1) + comp
        return coarse.interior_index[flat]

    for fid in fine.interior:
        g = grid[fid]
        par = g % 2
        r = fine.interior_index[fid]
        if not par.any():
            cid = coarse_id(g // 2)
            if cid >= 0:
                rows.append(r), cols.append(cid), vals.append(1.0)
        else:
            for end in ((g - par) // 2, (g + par) // 2):
                cid = coarse_id(end)
                if cid >= 0:
                    rows.append(r), cols.append(cid), vals.append(0.5)
    P = sp.csr_matrix((vals, (rows, cols)),
                      shape=(fine.n_interior, coarse.n_interior))
    return SparseMatrix.from_scipy(P)


def build_mesh_hierarchy(d: int, K: int) -> MeshHierarchy:
    if d not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    if K < 1:
        raise ValueError("finest level K must be >= 1")
    levels = [_build_mesh(d, k) for k in range(1, K + 1)]
    prols = [_build_prolongation(levels[k - 1], levels[k])
             for k in range(1, len(levels))]
    return MeshHierarchy(d=d, K=K, levels=levels, prolongations=prols)


def build_prolongation(hierarchy: MeshHierarchy, k: int) -> SparseMatrix:
    return hierarchy.prolongation(k)


def _element_geometry(mesh: Mesh):
    d = mesh.d
    v = mesh.vertices[mesh.elements]              # (ne, d+1, d)
    E = v[:, 1:, :] - v[:, :1, :]                 # (ne, d, d)
    vol = np.abs(np.linalg.det(E)) / math.factorial(d)
    Einv = np.linalg.inv(E)
    G = np.swapaxes(Einv, 1, 2)                   # rows = grad lambda_{i+1}
    grads = np.concatenate([-G.sum(axis=1, keepdims=True), G], axis=1)
    return vol, grads


def assemble_spatial(mesh: Mesh, D=None, c: float = 0.0) -> SpatialMatrices:
    """Exact P1 mass and stiffness(+reaction), interior DOFs only."""
    d = mesh.d
    D = np.eye(d) if D is None else np.atleast_2d(np.asarray(D, dtype=float))
    if not np.allclose(D, D.T) or np.any(np.linalg.eigvalsh(D) <= 0):
        raise ValueError("diffusion matrix must be symmetric positive definite")
    vol, grads = _element_geometry(mesh)
    DG = np.einsum("ij,ekj->eki", D, grads)
    locA = np.einsum("eki,eli->ekl", grads, DG) * vol[:, None, None]
    locM = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    locM = locM[None, :, :] * vol[:, None, None]
    if c:
        locA = locA + c * locM

    elems = mesh.elements
    rows = np.repeat(elems, d + 1, axis=1).ravel()
    cols = np.tile(elems, (1, d + 1)).ravel()
    nv = len(mesh.vertices)
    A = sp.coo_matrix((locA.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()
    M = sp.coo_matrix((locM.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()
    ii = mesh.interior
    A = A[ii][:, ii].tocsr()
    M = M[ii][:, ii].tocsr()
    # symmetrize away assembly roundoff so downstream symmetry checks are exact
    A = (A + A.T) / 2
    M = (M + M.T) / 2
    return SpatialMatrices(M_x=SparseMatrix.from_scipy(M, symmetric=True),
                           A_x=SparseMatrix.from_scipy(A, symmetric=True))


# degree-2 quadrature rules on the reference simplex: (barycentric points, weights)
_QUAD = {
    1: (np.array([[0.5 + 0.5 / np.sqrt(3), 0.5 - 0.5 / np.sqrt(3)],
                  [0.5 - 0.5 / np.sqrt(3), 0.5 + 0.5 / np.sqrt(3)]]),
        np.array([0.5, 0.5])),
    2: (np.array([[0.5, 0.5, 0.0],
                  [0.0, 0.5, 0.5],
                  [0.5, 0.0, 0.5]]),
        np.array([1 / 3, 1 / 3, 1 / 3])),
    3: ((lambda a, b: np.array([[a, b, b, b], [b, a, b, b],
                                [b, b, a, b], [b, b, b, a]]))(
            0.5854101966249685, 0.1381966011250105),
        np.array([0.25, 0.25, 0.25, 0.25])),
}


def quadrature_points(mesh: Mesh):
    """Physical quadrature points (ne, nq, d), weights (nq,), element volumes."""
    bary, w = _QUAD[mesh.d]
    v = mesh.vertices[mesh.elements]              # (ne, d+1, d)
    pts = np.einsum("qk,ekd->eqd", bary, v)
    vol, _ = _element_geometry(mesh)
    return pts, bary, w, vol


def project_initial(mesh: Mesh, u0: Callable) -> np.ndarray:
    """Moment vector <u0, phi_i> on interior P1 basis, degree-2 Gauss."""
    pts, bary, w, vol = quadrature_points(mesh)
    vals = np.asarray(u0(pts.reshape(-1, mesh.d))).reshape(pts.shape[:2])
    # contribution of qpoint q to local basis l is w_q * bary[q, l] * u0
    loc = np.einsum("eq,ql,q->el", vals, bary, w) * vol[:, None]
    nv = len(mesh.vertices)
    out = np.zeros(nv)
    np.add.at(out, mesh.elements.ravel(), loc.ravel())
    return out[mesh.interior]


def assemble_load(mesh: Mesh, J: int, g: Callable) -> SpaceTimeVector:
    """Moments <g, xi_i (x) phi_j> of the forcing against the test basis.

    Temporal integration uses 2-point Gauss per time element against the
    normalized Legendre pair; spatial integration the degree-2 simplex rule.
    Rows of the result run over the 2 * 2^J temporal test functions.
    """
    n = 2 ** J
    ht = 1.0 / n
    pts, bary, w, vol = quadrature_points(mesh)
    nq = len(w)
    flat = pts.reshape(-1, mesh.d)
    nv = len(mesh.vertices)

    gp = 0.5 / np.sqrt(3)
    tq = np.array([0.5 - gp, 0.5 + gp])     # Gauss points on (0,1)
    tw = np.array([0.5, 0.5])
    out = np.zeros((2 * n, mesh.n_interior))
    for k in range(n):
        for q in range(2):
            t = (k + tq[q]) * ht
            gv = np.asarray(g(t, flat)).reshape(-1, nq)
            loc = np.einsum("eq,ql,q->el", gv, bary, w) * vol[:, None]
            sv = np.zeros(nv)
            np.add.at(sv, mesh.elements.ravel(), loc.ravel())
            sv = sv[mesh.interior]
            wt = tw[q] * ht
            xi0 = 1.0 / np.sqrt(ht)
            xi1 = np.sqrt(3.0 / ht) * (2 * tq[q] - 1)
            out[2 * k] += wt * xi0 * sv
            out[2 * k + 1] += wt * xi1 * sv
    return SpaceTimeVector(out)


def l2_error_on_mesh(mesh: Mesh, coeffs: np.ndarray, exact: Callable) -> float:
    """L2(Omega) distance between a P1 interior-coefficient field and a
    callable, by the degree-2 element rule."""
    pts, bary, w, vol = quadrature_points(mesh)
    full = np.zeros(len(mesh.vertices))
    full[mesh.interior] = coeffs
    nodal = full[mesh.elements]                   # (ne, d+1)
    uh = np.einsum("el,ql->eq", nodal, bary)
    ue = np.asarray(exact(pts.reshape(-1, mesh.d))).reshape(uh.shape)
    err2 = np.einsum("eq,q->e", (uh - ue) ** 2, w) * vol
    return float(np.sqrt(err2.sum()))
