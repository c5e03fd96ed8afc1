"""Right/left tangential data: sampling, conjugate closure, shifting, realification.

Right data are triples ``(lambda_j, r_j, w_j)`` with ``w_j = H(lambda_j) r_j``;
left data are ``(mu_i, l_i^T, v_i^T)`` with ``v_i^T = l_i^T H(mu_i)``. In
matrix form the right directions/responses are stored column-wise (``R``,
``W`` are ``m x k``) and the left ones row-wise (``L``, ``V`` are ``q x m``),
so that the Loewner Sylvester equations read ``M LL - LL Lam = V R - L W``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError, PHLoewnerError, ValidationError

PAIR_RTOL = 1e-12


@dataclass(frozen=True)
class RightData:
    points: np.ndarray  # (k,)
    R: np.ndarray  # (m, k)
    W: np.ndarray  # (p, k)

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=complex))
        R = np.asarray(self.R, dtype=complex).reshape(-1, pts.size)
        W = np.asarray(self.W, dtype=complex).reshape(-1, pts.size)
        if np.any(np.linalg.norm(R, axis=0) == 0):
            raise ValidationError("right directions must be nonzero")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "W", W)

    @property
    def k(self) -> int:
        return self.points.size

    @property
    def Lam(self) -> np.ndarray:
        return np.diag(self.points)


@dataclass(frozen=True)
class LeftData:
    points: np.ndarray  # (q,)
    L: np.ndarray  # (q, p)
    V: np.ndarray  # (q, m)

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=complex))
        L = np.asarray(self.L, dtype=complex).reshape(pts.size, -1)
        V = np.asarray(self.V, dtype=complex).reshape(pts.size, -1)
        if np.any(np.linalg.norm(L, axis=1) == 0):
            raise ValidationError("left directions must be nonzero")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "V", V)

    @property
    def q(self) -> int:
        return self.points.size

    @property
    def Mu(self) -> np.ndarray:
        return np.diag(self.points)


@dataclass(frozen=True)
class SamplingPlan:
    """Frequency grid plus the direction and left/right partition policies.

    ``direction_policy`` is ``"cycled-identity"`` (unit vectors ``e_1, e_2,
    ..., e_m, e_1, ...``), ``"random-unit"`` (real Gaussian vectors of unit
    norm drawn from ``seed``) or ``"block"`` (every unit vector at every
    point, i.e. full matrix samples; the same as cycled-identity for SISO). ``partition_policy`` is ``"alternate"``
    (grid points 1, 3, 5, ... go right, 2, 4, ... go left) or
    ``"split-half"`` (lower half right, upper half left).
    """

    omega_grid: np.ndarray
    direction_policy: str = "cycled-identity"
    partition_policy: str = "alternate"
    seed: int = 0

    def __post_init__(self):
        grid = np.asarray(self.omega_grid, dtype=float).ravel()
        if grid.size < 2:
            raise ValidationError("sampling grid needs at least two points")
        if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
            raise ValidationError("omega grid must be positive and strictly increasing")
        if self.direction_policy not in ("cycled-identity", "random-unit", "block"):
            raise ValidationError(f"unknown direction policy {self.direction_policy!r}")
        if self.partition_policy not in ("alternate", "split-half"):
            raise ValidationError(f"unknown partition policy {self.partition_policy!r}")
        object.__setattr__(self, "omega_grid", grid)

    @classmethod
    def logspace(cls, lo_exp: float, hi_exp: float, num: int, **kw) -> "SamplingPlan":
        return cls(np.logspace(lo_exp, hi_exp, num), **kw)

    def partition(self) -> tuple[np.ndarray, np.ndarray]:
        """Indices of the grid assigned to the right and left sides."""
        idx = np.arange(self.omega_grid.size)
        if self.partition_policy == "alternate":
            return idx[0::2], idx[1::2]
        half = (idx.size + 1) // 2
        return idx[:half], idx[half:]

    def directions(self, count: int, m: int, rng: np.random.Generator) -> np.ndarray:
        """``m x count`` matrix of directions."""
        if self.direction_policy in ("cycled-identity", "block"):
            D = np.zeros((m, count))
            D[np.arange(count) % m, np.arange(count)] = 1.0
            return D
        D = rng.standard_normal((m, count))
        return D / np.linalg.norm(D, axis=0)


def tangential_from_samples(omega_grid, samples: np.ndarray,
                            plan: SamplingPlan) -> tuple[RightData, LeftData]:
    """Build tangential data from full transfer samples ``samples[l] = H(i w_l)``."""
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim == 1:
        samples = samples[:, None, None]
    grid = np.asarray(omega_grid, dtype=float)
    p, m = samples.shape[1:]
    ri, li = plan.partition()
    if plan.direction_policy == "block":
        W = np.concatenate([samples[k] for k in ri], axis=1)
        V = np.concatenate([samples[k] for k in li], axis=0)
        return (RightData(np.repeat(1j * grid[ri], m), np.tile(np.eye(m), ri.size), W),
                LeftData(np.repeat(1j * grid[li], p), np.tile(np.eye(p), (li.size, 1)), V))
    rng = np.random.default_rng(plan.seed)
    Rd = plan.directions(ri.size, m, rng)
    Ld = plan.directions(li.size, p, rng).T
    W = np.einsum("kpm,mk->pk", samples[ri], Rd)
    V = np.einsum("qp,qpm->qm", Ld, samples[li])
    return (RightData(1j * grid[ri], Rd, W), LeftData(1j * grid[li], Ld, V))


def sample_data(oracle: Callable[[complex], np.ndarray],
                plan: SamplingPlan) -> tuple[RightData, LeftData]:
    """Sample ``oracle`` at ``i w`` for every grid point and split into tangential data."""
    values = []
    for w in plan.omega_grid:
        try:
            values.append(np.atleast_2d(oracle(1j * w)))
        except PHLoewnerError as exc:
            raise NumericalError(f"oracle evaluation failed at omega={w!r}: {exc}") from exc
    return tangential_from_samples(plan.omega_grid, np.array(values), plan)


def _close_side(points, dirs, resps, rtol):
    """Conjugate-close one side. ``dirs``/``resps`` are indexed by point along axis 0."""
    n = points.size
    used = np.zeros(n, dtype=bool)
    out_p, out_d, out_r = [], [], []
    for i in range(n):
        if used[i]:
            continue
        used[i] = True
        p = points[i]
        tol = rtol * max(abs(p), 1.0)
        if abs(p.imag) <= tol:
            out_p.append(p)
            out_d.append(dirs[i])
            out_r.append(resps[i])
            continue
        cand = np.flatnonzero(~used & (np.abs(points - p.conjugate()) <= tol))
        if cand.size:
            j = cand[0]
            used[j] = True
            pair = [(p, dirs[i], resps[i]), (points[j], dirs[j], resps[j])]
        else:
            pair = [(p, dirs[i], resps[i]), (p.conjugate(), dirs[i].conj(), resps[i].conj())]
        pair.sort(key=lambda t: -t[0].imag)
        for a, b, c in pair:
            out_p.append(a)
            out_d.append(b)
            out_r.append(c)
    return np.array(out_p), np.array(out_d), np.array(out_r)


def conjugate_close(right: RightData, left: LeftData,
                    rtol: float = PAIR_RTOL) -> tuple[RightData, LeftData]:
    """Add the complex-conjugate of every non-real sample that lacks one.

    Conjugate pairs are placed adjacently, positive imaginary part first.
    Applying the function twice gives the same result.
    """
    p, d, r = _close_side(right.points, right.R.T, right.W.T, rtol)
    new_right = RightData(p, d.T, r.T)
    p, d, r = _close_side(left.points, left.L, left.V, rtol)
    new_left = LeftData(p, d, r)
    return new_right, new_left


def check_shift(Ds, m: int) -> np.ndarray:
    Ds = np.atleast_2d(np.asarray(Ds, dtype=float))
    if Ds.shape == (1, 1) and m > 1:
        Ds = Ds[0, 0] * np.eye(m)
    if Ds.shape != (m, m):
        raise ValidationError(f"shift must be {m}x{m}, got {Ds.shape}")
    return Ds


def is_positive_shift(Ds) -> bool:
    Ds = np.atleast_2d(Ds)
    return bool(np.linalg.eigvalsh(Ds + Ds.T).min() > 0)


def shift_data(right: RightData, left: LeftData, Ds,
               validate: bool = True) -> tuple[RightData, LeftData]:
    """Shift responses by a constant feedthrough: ``w <- w + Ds r``, ``v^T <- v^T + l^T Ds``.

    With ``validate`` the shift must satisfy ``Ds + Ds^T > 0``.
    """
    Ds = check_shift(Ds, right.R.shape[0])
    if validate and not is_positive_shift(Ds):
        raise ValidationError("shift must satisfy Ds + Ds^T > 0")
    return (
        RightData(right.points, right.R, right.W + Ds @ right.R),
        LeftData(left.points, left.L, left.V + left.L @ Ds),
    )


# --------------------------------------------------------------------------
# realification


def pair_structure(points: np.ndarray, rtol: float = 1e-10) -> list[tuple[int, ...]]:
    """Group indices into real singletons and adjacent conjugate pairs."""
    groups = []
    i = 0
    n = points.size
    while i < n:
        p = points[i]
        tol = rtol * max(abs(p), 1.0)
        if abs(p.imag) <= tol:
            groups.append((i,))
            i += 1
        elif i + 1 < n and abs(points[i + 1] - p.conjugate()) <= tol:
            groups.append((i, i + 1))
            i += 2
        else:
            raise ValidationError(f"point {i} ({p}) has no adjacent conjugate; close the data first")
    return groups


def realifying_unitary(points: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Block-diagonal unitary with ``(1/sqrt2)[[1, 1], [i, -i]]`` per conjugate pair."""
    n = points.size
    U = np.zeros((n, n), dtype=complex)
    blk = np.array([[1, 1], [1j, -1j]]) / np.sqrt(2)
    for g in pair_structure(points, rtol):
        if len(g) == 1:
            U[g[0], g[0]] = 1.0
        else:
            i = g[0]
            U[i:i + 2, i:i + 2] = blk
    return U


def _to_real(X: np.ndarray, name: str, rtol: float) -> np.ndarray:
    scale = max(float(np.abs(X).max()) if X.size else 0.0, np.finfo(float).tiny)
    imag = float(np.abs(X.imag).max()) if X.size else 0.0
    if imag > rtol * scale:
        raise ValidationError(
            f"{name} keeps an imaginary part of relative size {imag / scale:.2e}; data are not conjugate-closed"
        )
    return np.ascontiguousarray(X.real)


def realify(pencil, rtol: float = 1e-10):
    """Transform a pencil built from conjugate-closed data into real arithmetic.

    Applies ``U_left (.) U_right^H`` to the Loewner matrices, ``U_left`` to
    ``V``/``L``/``Mu`` and ``U_right^H`` to ``W``/``R``/``Lam``. The transfer
    function of the pencil is unchanged.
    """
    if pencil.realified:
        return pencil
    Ul = realifying_unitary(np.diag(pencil.Mu), rtol)
    Ur = realifying_unitary(np.diag(pencil.Lam), rtol)
    UrH = Ur.conj().T
    new = {
        "LL": Ul @ pencil.LL @ UrH,
        "sLL": Ul @ pencil.sLL @ UrH,
        "V": Ul @ pencil.V,
        "W": pencil.W @ UrH,
        "L": Ul @ pencil.L,
        "R": pencil.R @ UrH,
        "Mu": Ul @ pencil.Mu @ Ul.conj().T,
        "Lam": Ur @ pencil.Lam @ UrH,
    }
    new = {k: _to_real(v, k, rtol) for k, v in new.items()}
    return dataclasses.replace(pencil, realified=True, **new)
