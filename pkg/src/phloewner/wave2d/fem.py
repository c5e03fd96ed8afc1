"""Mixed finite elements for the damped wave equation in co-energy variables.

Stress ``e_q`` is discretized with vector-valued piecewise constants (two
basis functions per triangle), velocity ``e_p`` with continuous piecewise
linears and the boundary control/observation with piecewise linears on the
boundary loop. The gradient of a ``p`` basis function lies in the ``q``
space, so every integral below is exact.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import SingularShiftError, ValidationError
from ..lti import PHRealization, TransferSample
from .mesh import Mesh

log = logging.getLogger(__name__)

P1_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
EDGE_MASS = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
FAR_POINT = (0.5, 2.0)


def _per_element(value, n_tri: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n_tri, float(arr))
    if arr.shape != (n_tri,):
        raise ValidationError(f"{name} must be scalar or have one value per triangle")
    return arr


@dataclass(frozen=True)
class WaveParams:
    """Density, stiffness tensor and damping (scalars or per-triangle arrays)."""

    rho: float | np.ndarray = 1.0
    T_tensor: np.ndarray = field(default_factory=lambda: np.eye(2))
    eps: float | np.ndarray = 1e-3

    def resolve(self, n_tri: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rho = _per_element(self.rho, n_tri, "rho")
        eps = _per_element(self.eps, n_tri, "eps")
        T = np.asarray(self.T_tensor, dtype=float)
        if T.shape == (2, 2):
            T = np.broadcast_to(T, (n_tri, 2, 2))
        if T.shape != (n_tri, 2, 2):
            raise ValidationError("T_tensor must be 2x2 or (n_triangles, 2, 2)")
        if np.any(rho <= 0):
            raise ValidationError("rho must be positive")
        if np.any(eps < 0):
            raise ValidationError("eps must be nonnegative")
        if not np.allclose(T, np.swapaxes(T, 1, 2)):
            raise ValidationError("T_tensor must be symmetric")
        if np.any(np.linalg.eigvalsh(T)[:, 0] <= 0):
            raise ValidationError("T_tensor must be positive definite")
        return rho, T, eps


@dataclass(frozen=True)
class FEMatrices:
    M_q: sp.csr_matrix
    M_p: sp.csr_matrix
    M_eps: sp.csr_matrix
    M_bnd: sp.csr_matrix
    G_mat: sp.csr_matrix
    B_mat: sp.csr_matrix
    mesh: Mesh | None = None
    params: WaveParams | None = None

    @property
    def N_q(self) -> int:
        return self.M_q.shape[0]

    @property
    def N_p(self) -> int:
        return self.M_p.shape[0]

    @property
    def N_bnd(self) -> int:
        return self.M_bnd.shape[0]

    @property
    def n(self) -> int:
        return self.N_q + self.N_p


def p1_gradients(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Areas and constant gradients of the three hat functions, ``(T,)`` and ``(T, 3, 2)``."""
    x, y = pts[..., 0], pts[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    grads = np.stack([b, c], axis=2) / (2 * area)[:, None, None]
    return area, grads


def assemble(mesh: Mesh, params: WaveParams | None = None) -> FEMatrices:
    """Exact assembly of the mass, gradient and boundary matrices."""
    params = params or WaveParams()
    nt, nv = mesh.n_triangles, mesh.n_vertices
    rho, T, eps = params.resolve(nt)
    area, grads = p1_gradients(mesh.vertices[mesh.triangles])
    if np.any(area <= 0):
        raise ValidationError("degenerate element")
    tri = mesh.triangles

    # M_q: 2x2 block area * T^{-1} per triangle
    blocks = area[:, None, None] * np.linalg.inv(T)
    q = 2 * np.arange(nt)
    rows = np.stack([q, q, q + 1, q + 1], axis=1).ravel()
    cols = np.stack([q, q + 1, q, q + 1], axis=1).ravel()
    M_q = sp.csr_matrix((blocks.reshape(nt, 4).ravel(), (rows, cols)), shape=(2 * nt, 2 * nt))

    # P1 masses
    r = np.repeat(tri, 3, axis=1).ravel()
    c = np.tile(tri, (1, 3)).ravel()
    loc = P1_MASS.ravel()[None, :]
    M_p = sp.csr_matrix((((rho * area)[:, None] * loc).ravel(), (r, c)), shape=(nv, nv))
    M_eps = sp.csr_matrix((((eps * area)[:, None] * loc).ravel(), (r, c)), shape=(nv, nv))
    M_eps.eliminate_zeros()

    # G_ij = int phi_q^i . grad phi_p^j
    g = area[:, None, None] * grads  # (T, 3, 2)
    rows = np.stack([np.repeat(q, 3), np.repeat(q + 1, 3)], axis=1).ravel()
    cols = np.repeat(tri.ravel(), 2)
    vals = np.stack([g[:, :, 0].ravel(), g[:, :, 1].ravel()], axis=1).ravel()
    G = sp.csr_matrix((vals, (rows, cols)), shape=(2 * nt, nv))

    # boundary
    nb = len(mesh.boundary_edges)
    ell = mesh.edge_lengths()
    k = np.arange(nb)
    kn = np.roll(k, -1)
    br = np.stack([k, k, kn, kn], axis=1).ravel()
    bc = np.stack([k, kn, k, kn], axis=1).ravel()
    M_b = sp.csr_matrix(((ell[:, None] * EDGE_MASS.ravel()[None, :]).ravel(), (br, bc)), shape=(nb, nb))
    inject = sp.csr_matrix((np.ones(nb), (mesh.boundary_vertices, k)), shape=(nv, nb))
    B = (inject @ M_b).tocsr()
    for X in (M_q, M_p, M_eps, M_b, G, B):
        X.sum_duplicates()
        X.sort_indices()
    return FEMatrices(M_q, M_p, M_eps, M_b, G, B, mesh, params)


def fom_realization(fem: FEMatrices) -> PHRealization:
    """Sparse pH model ``M z' = (J - R) z + G u``, ``y = G^T z`` with ``z = (e_q, e_p)``.

    The output ``G^T z = B^T e_p`` equals ``M_bnd y_bnd``, the collocated
    boundary observation weighted by the boundary mass matrix.
    """
    nq, npv, nb = fem.N_q, fem.N_p, fem.N_bnd
    Gm = fem.G_mat
    J = sp.bmat([[None, Gm], [-Gm.T, None]], format="csr")
    J = sp.csr_matrix(J, shape=(nq + npv, nq + npv))
    R = sp.block_diag([sp.csr_matrix((nq, nq)), fem.M_eps], format="csr")
    M = sp.block_diag([fem.M_q, fem.M_p], format="csr")
    Gp = sp.vstack([sp.csr_matrix((nq, nb)), fem.B_mat], format="csr")
    return PHRealization(J=J, R=R, G=Gp, M=M, Q=sp.eye(nq + npv, format="csr"))


def discrete_hamiltonian(fem: FEMatrices, e_q, e_p) -> float:
    """``0.5 e_q^T M_q e_q + 0.5 e_p^T M_p e_p``."""
    e_q, e_p = np.asarray(e_q, dtype=float), np.asarray(e_p, dtype=float)
    if e_q.shape != (fem.N_q,) or e_p.shape != (fem.N_p,):
        raise ValidationError("state dimension mismatch")
    return 0.5 * float(e_q @ (fem.M_q @ e_q)) + 0.5 * float(e_p @ (fem.M_p @ e_p))


def far_channel(fem_or_mesh, point=FAR_POINT) -> int:
    """Boundary channel (0-based) nearest to ``point``, by default on the far leg of the L."""
    mesh = fem_or_mesh.mesh if isinstance(fem_or_mesh, FEMatrices) else fem_or_mesh
    return mesh.nearest_boundary_vertex(point)


def _check_channels(channels, m: int) -> np.ndarray:
    ch = np.atleast_1d(np.asarray(channels, dtype=np.int64))
    if ch.size == 0 or ch.size > m:
        raise ValidationError(f"need between 1 and {m} channels")
    if ch.min() < 0 or ch.max() >= m:
        raise ValidationError(f"channel index out of range [0, {m})")
    if len(set(ch.tolist())) != ch.size:
        raise ValidationError("channels must be distinct")
    return ch


def sample_fom(fem: FEMatrices | PHRealization, omega_grid, channels=(0,),
               threads: int = 1) -> list[TransferSample]:
    """Transfer samples ``H(i w)`` restricted to ``channels`` (0-based, boundary order).

    Each frequency uses one sparse LU of ``i w M - (J - R)``; results are
    returned in grid order even when ``threads > 1``.
    """
    ph = fom_realization(fem) if isinstance(fem, FEMatrices) else fem
    ch = _check_channels(channels, ph.m)
    Gc = ph.G[:, ch]
    rhs = np.asarray((Gc - ph.P[:, ch]).todense() if sp.issparse(Gc) else Gc - ph.P[:, ch])
    out_map = (Gc + ph.P[:, ch]).T
    JR = sp.csc_matrix((ph.J - ph.R) @ ph.Q)
    M = sp.csc_matrix(ph.M)
    ff = ph.N[np.ix_(ch, ch)] + ph.S[np.ix_(ch, ch)]

    def one(w: float) -> TransferSample:
        s = 1j * float(w)
        K = (s * M - JR).tocsc()
        try:
            lu = spla.splu(K)
        except RuntimeError as exc:
            raise SingularShiftError(s, f"FOM is singular at omega={w!r}") from exc
        X = lu.solve(rhs.astype(complex))
        if not np.all(np.isfinite(X)):
            raise SingularShiftError(s, f"FOM is singular at omega={w!r}")
        return TransferSample(s, np.asarray(out_map @ (ph.Q @ X)) + ff)

    grid = np.asarray(omega_grid, dtype=float).ravel()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, grid))
    return [one(w) for w in grid]
