"""Closest stable approximation in the L-infinity norm.

A realization is split into stable and antistable parts. The antistable
part ``G_u`` is replaced by its optimal stable L-infinity approximation:
with ``Ghat(s) = G_u(-s)`` (a stable system), the optimal Hankel-norm
construction with zero stable poles gives an antistable ``Fhat`` such that
``Ghat - Fhat`` is all-pass with gain equal to the largest Hankel singular
value ``sigma_1``. Mapping back, ``F(s) = Fhat(-s)`` is stable and
``||G_u - F||_inf = sigma_1``, which is the smallest achievable error.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import AxisEigenvalueError, NumericalError, ValidationError
from .lti import DescriptorRealization, eval_transfer, to_standard

log = logging.getLogger(__name__)

AXIS_RTOL = 1e-8
ERROR_GRID_POINTS = 2000


@dataclass
class AdditiveSplit:
    stable_part: DescriptorRealization
    antistable_part: DescriptorRealization
    feedthrough: np.ndarray
    reflected: list = field(default_factory=list)


@dataclass
class ProjectionResult:
    projected: DescriptorRealization
    achieved_error: float
    hankel_bound: float
    mode: str
    eig_before: np.ndarray
    eig_after: np.ndarray
    reflected: list = field(default_factory=list)


def _empty(n_out: int, n_in: int, dtype=float) -> DescriptorRealization:
    return DescriptorRealization(
        A=np.zeros((0, 0), dtype=dtype), B=np.zeros((0, n_in), dtype=dtype),
        C=np.zeros((n_out, 0), dtype=dtype), D=np.zeros((n_out, n_in), dtype=dtype),
    )


def _block_starts(T: np.ndarray, k: int) -> list[tuple[int, int]]:
    out, i = [], 0
    while i < k:
        size = 2 if i + 1 < k and T[i + 1, i] != 0 else 1
        out.append((i, size))
        i += size
    return out


def separate(realization: DescriptorRealization, on_axis: str = "raise",
             axis_rtol: float = AXIS_RTOL) -> AdditiveSplit:
    """Block-diagonalize into stable and antistable subsystems.

    Uses an ordered Schur form followed by a Sylvester solve that removes
    the coupling block. Eigenvalues with ``|Re| <= axis_rtol * rho(A)`` are
    either rejected (``on_axis="raise"``) or moved to ``-max(|Re|, tol)``
    and kept in the stable part (``on_axis="reflect"``), with a warning.
    """
    if on_axis not in ("raise", "reflect"):
        raise ValidationError(f"on_axis must be 'raise' or 'reflect', got {on_axis!r}")
    sys = to_standard(realization)
    A, B, C, D = (np.asarray(x) for x in (sys.A, sys.B, sys.C, sys.D))
    n = A.shape[0]
    real = not any(np.iscomplexobj(x) for x in (A, B, C, D))
    if n == 0:
        return AdditiveSplit(sys, _empty(*D.shape), D)
    eigs = la.eigvals(A)
    tol = axis_rtol * float(np.abs(eigs).max())
    near = eigs[np.abs(eigs.real) <= tol]
    if near.size and on_axis == "raise":
        raise AxisEigenvalueError(near)
    if near.size:
        warnings.warn(f"{near.size} eigenvalue(s) within {tol:.1e} of the imaginary axis moved "
                      "into the open left half-plane", stacklevel=2)
    if real:
        T, Z, k = la.schur(A, output="real", sort=lambda re, im: re <= tol)
    else:
        T, Z, k = la.schur(A.astype(complex), output="complex", sort=lambda x: x.real <= tol)
    T = T.copy()
    if near.size:
        for i, size in _block_starts(T, k) if real else [(i, 1) for i in range(k)]:
            blk = T[i:i + size, i:i + size]
            a = float(np.trace(blk).real) / size
            if abs(a) <= tol:
                new = -max(abs(a), tol)
                T[range(i, i + size), range(i, i + size)] += new - a
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    X = la.solve_sylvester(T11, -T22, -T12) if 0 < k < n else np.zeros((k, n - k))
    Bt = Z.conj().T @ B
    Ct = C @ Z
    stable = DescriptorRealization(A=T11, B=Bt[:k] - X @ Bt[k:], C=Ct[:, :k], D=D)
    anti = DescriptorRealization(A=T22, B=Bt[k:], C=Ct[:, :k] @ X + Ct[:, k:], D=np.zeros_like(D))
    return AdditiveSplit(stable, anti, D, list(near))


def hankel_gramians(antistable: DescriptorRealization) -> tuple[np.ndarray, np.ndarray]:
    """Gramians of the reflected system ``G_u(-s)``.

    Solves ``A P + P A^H = B B^H`` and ``A^H Q + Q A = C^H C`` for an
    antistable ``A``. The Hankel singular values are ``sqrt(eig(P Q))``.
    """
    sys = to_standard(antistable)
    A, B, C = (np.asarray(x) for x in (sys.A, sys.B, sys.C))
    if A.shape[0] == 0:
        return np.zeros((0, 0)), np.zeros((0, 0))
    eigs = la.eigvals(A)
    if np.any(eigs.real <= 0):
        raise AxisEigenvalueError(eigs[eigs.real <= 0],
                                  "antistable part has eigenvalues outside the open right half-plane")
    P = la.solve_continuous_lyapunov(A, B @ B.conj().T)
    Q = la.solve_continuous_lyapunov(A.conj().T, C.conj().T @ C)
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Q))):
        raise NumericalError("Lyapunov solve failed (spectrum too close to the axis?)")
    return (P + P.conj().T) / 2, (Q + Q.conj().T) / 2


def hankel_singular_values(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    if P.size == 0:
        return np.zeros(0)
    ev = la.eigvals(P @ Q).real
    return np.sqrt(np.clip(np.sort(ev)[::-1], 0, None))


def _psd_factor(X: np.ndarray) -> np.ndarray:
    w, U = la.eigh(X)
    return U * np.sqrt(np.clip(w, 0, None))


def nehari_stable(antistable: DescriptorRealization, cluster_rtol: float = 1e-6,
                  trunc_rtol: float = 1e-13) -> tuple[DescriptorRealization, float]:
    """Optimal stable approximation ``F`` of an antistable system.

    Returns ``(F, sigma_1)`` with ``||G_u - F||_inf = sigma_1``.
    """
    sys = to_standard(antistable)
    Au, Bu, Cu = (np.asarray(x) for x in (sys.A, sys.B, sys.C))
    p, m = Cu.shape[0], Bu.shape[1]
    if Au.shape[0] == 0:
        return _empty(p, m), 0.0
    P, Q = hankel_gramians(sys)
    # reflected stable system Ghat = (-Au, -Bu, Cu)
    Ah, Bh, Ch = -Au, -Bu, Cu
    Lc, Lo = _psd_factor(P), _psd_factor(Q)
    U, hsv, Vh = la.svd(Lo.conj().T @ Lc)
    sigma = float(hsv[0]) if hsv.size else 0.0
    if sigma == 0.0:
        return _empty(p, m), 0.0
    k = int(np.sum(hsv > trunc_rtol * sigma))
    s_half = 1.0 / np.sqrt(hsv[:k])
    Tb = Lc @ Vh[:k].conj().T * s_half
    Tbi = (s_half[:, None] * U[:, :k].conj().T) @ Lo.conj().T
    Ab, Bb, Cb = Tbi @ Ah @ Tb, Tbi @ Bh, Ch @ Tb
    sv = hsv[:k]
    rc = int(np.sum(sv >= sigma * (1 - cluster_rtol)))
    i1, i2 = np.arange(rc, k), np.arange(rc)
    A11 = Ab[np.ix_(i1, i1)]
    B1, B2 = Bb[i1], Bb[i2]
    C1, C2 = Cb[:, i1], Cb[:, i2]
    S1 = sv[i1]
    Uu = -la.pinv(C2.conj().T) @ B2
    Gam = S1 ** 2 - sigma ** 2
    if Gam.size and np.min(np.abs(Gam)) <= 1e-12 * sigma ** 2:
        raise NumericalError("largest Hankel singular value is nearly repeated; AAK system is singular")
    S1d = np.diag(S1)
    Af = (sigma ** 2 * A11.conj().T + S1d @ A11 @ S1d - sigma * C1.conj().T @ Uu @ B1.conj().T) / Gam[:, None]
    Bf = (S1d @ B1 + sigma * C1.conj().T @ Uu) / Gam[:, None]
    Cf = C1 @ S1d + sigma * Uu @ B1.conj().T
    Df = -sigma * Uu
    # F(s) = Fhat(-s)
    F = DescriptorRealization(A=-Af, B=-Bf, C=Cf, D=Df)
    if F.n and np.any(la.eigvals(F.A).real >= 0):
        raise NumericalError("Nehari approximant is not stable (ill-conditioned balancing)")
    if not any(np.iscomplexobj(x) for x in (Au, Bu, Cu)):
        F = DescriptorRealization(A=F.A.real, B=F.B.real, C=F.C.real, D=F.D.real)
    return F, sigma


def reflect_antistable(antistable: DescriptorRealization) -> DescriptorRealization:
    """Mirror antistable eigenvalues ``lambda -> -conj(lambda)`` by eigendecomposition."""
    A = np.asarray(antistable.A)
    if A.shape[0] == 0:
        return antistable
    w, V = la.eig(A)
    An = V @ np.diag(-w.conj()) @ la.inv(V)
    if not np.iscomplexobj(A):
        An = An.real
    return DescriptorRealization(A=An, B=antistable.B, C=antistable.C, D=antistable.D)


def _sum(a: DescriptorRealization, b: DescriptorRealization) -> DescriptorRealization:
    return DescriptorRealization(
        A=la.block_diag(a.A, b.A),
        B=np.vstack([a.B, b.B]),
        C=np.hstack([a.C, b.C]),
        D=a.D + b.D,
    )


def batch_response(sys: DescriptorRealization, points: np.ndarray) -> np.ndarray:
    """``H(s)`` at all ``points`` via stacked dense solves, chunked to bound memory."""
    if sys.n == 0 or not isinstance(sys.A, np.ndarray) or not isinstance(sys.E, np.ndarray):
        return np.array([eval_transfer(sys, s) for s in points])
    A, E, B, C = sys.A, sys.E, sys.B, sys.C
    chunk = max(1, int(4e6 // (sys.n * sys.n)))
    out = []
    for k in range(0, points.size, chunk):
        s = points[k:k + chunk]
        K = s[:, None, None] * E - A
        try:
            X = np.linalg.solve(K, np.broadcast_to(B, (s.size, *B.shape)))
        except np.linalg.LinAlgError:
            out.append(np.array([eval_transfer(sys, si) for si in s]))
            continue
        out.append(C @ X + sys.D)
    return np.concatenate(out)


def linf_error(err_parts, band: tuple[float, float], num: int = ERROR_GRID_POINTS) -> float:
    """Largest singular value of ``sum(parts)`` over a log grid on ``band``."""
    lo, hi = band
    points = 1j * np.logspace(np.log10(lo), np.log10(hi), num)
    val = sum(sign * batch_response(p, points) for p, sign in err_parts)
    return float(np.linalg.svd(val, compute_uv=False)[:, 0].max())


def default_band(eigs: np.ndarray) -> tuple[float, float]:
    mags = np.abs(eigs[np.abs(eigs) > 0]) if eigs.size else np.zeros(0)
    if mags.size == 0:
        return (1e-2, 1e2)
    return (1e-2 * float(mags.min()), 1e2 * float(mags.max()))


def p_infinity(realization: DescriptorRealization, mode: str = "nehari",
               band: tuple[float, float] | None = None,
               axis_rtol: float = AXIS_RTOL) -> ProjectionResult:
    """Project onto the stable systems (``mode`` ``"nehari"``, ``"reflect"`` or ``"off"``).

    ``band`` is the data band ``(w_min, w_max)``; the L-infinity error is
    estimated on 2000 log-spaced points over ``[1e-2 w_min, 1e2 w_max]``. By
    default the band is taken from the eigenvalue magnitudes.
    """
    if mode not in ("nehari", "reflect", "off"):
        raise ValidationError(f"unknown stabilization mode {mode!r}")
    sys = to_standard(realization)
    eig_before = la.eigvals(np.asarray(sys.A)) if sys.n else np.zeros(0, complex)
    band = band if band is not None else default_band(eig_before)
    band = (1e-2 * band[0], 1e2 * band[1])
    tol = axis_rtol * (float(np.abs(eig_before).max()) if eig_before.size else 0.0)
    if mode == "off" or eig_before.size == 0 or np.all(eig_before.real < -tol):
        hb = 0.0
        if mode == "off" and np.any(eig_before.real > tol) and not np.any(np.abs(eig_before.real) <= tol):
            split = separate(sys, "raise", axis_rtol)
            hb = float(hankel_singular_values(*hankel_gramians(split.antistable_part))[0])
        return ProjectionResult(realization, 0.0, hb, mode, eig_before, eig_before)
    split = separate(sys, "reflect", axis_rtol)
    anti = split.antistable_part
    if mode == "nehari":
        try:
            F, sigma = nehari_stable(anti)
        except NumericalError as exc:
            warnings.warn(f"Nehari construction failed ({exc}); falling back to reflection",
                          stacklevel=2)
            mode = "reflect"
    if mode == "reflect":
        F = reflect_antistable(anti)
        sigma = float(hankel_singular_values(*hankel_gramians(anti))[0]) if anti.n else 0.0
    projected = _sum(split.stable_part, F)
    err = linf_error([(anti, 1.0), (F, -1.0)], band) if anti.n else 0.0
    if split.reflected:
        # reflection of near-axis modes also perturbs the stable part
        err = max(err, linf_error([(sys, 1.0), (projected, -1.0)], band))
    eig_after = la.eigvals(projected.A) if projected.n else np.zeros(0, complex)
    return ProjectionResult(projected, err, sigma, mode, eig_before, eig_after, split.reflected)
