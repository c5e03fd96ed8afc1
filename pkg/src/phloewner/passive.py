"""Passive port-Hamiltonian identification from frequency-domain data.

The data are shifted by a constant feedthrough ``Ds`` (so that a passive
system becomes strictly passive), a Loewner model of the shifted data is
projected onto the stable systems, its spectral zeros in the right
half-plane are used as interpolation points, and the resulting passive
Loewner pencil is normalized into port-Hamiltonian form. Finally the shift
is removed from the feedthrough.
"""

from __future__ import annotations

import dataclasses
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import (IndefiniteLoewnerError, NumericalError, PHLoewnerError, SpectralZeroError,
                     ValidationError)
from .loewner import (DEFAULT_RANK_TOL, LoewnerPencil, OrderReport, build_loewner, detect_orders,
                      reduce_realization, subtract_feedthrough)
from .lti import DescriptorRealization, PHRealization, as_oracle, to_standard
from .stable import ProjectionResult, batch_response, p_infinity
from .tangential import LeftData, RightData, check_shift, conjugate_close, shift_data

log = logging.getLogger(__name__)

TOL_ZERO = 1e-9
CHOLESKY_JITTER = 1e-12


@dataclass
class SpectralZeroSet:
    """Spectral zeros with positive real part and their zero directions.

    ``zeros`` are ordered by ``|Im|`` with conjugate pairs adjacent (positive
    imaginary part first). ``directions`` is ``m x r`` with unit columns.
    """

    zeros: np.ndarray
    directions: np.ndarray
    all_zeros: np.ndarray
    tol_zero: float
    n_infinite: int = 0
    near_axis: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    aux: np.ndarray | None = None


@dataclass
class SMatrix:
    """``S = [[-A, -B], [C, D]]`` of a normalized standard model."""

    S: np.ndarray
    n: int
    factor: np.ndarray | None = None
    Dsym: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def skew(self) -> np.ndarray:
        return (self.S - self.S.T) / 2

    @property
    def sym(self) -> np.ndarray:
        """Symmetric part; ``F^T sym(D) F`` when the factor is known.

        For passive data the symmetric part has exactly this rank-``m``
        form. Using it avoids the cancellation against a much larger skew
        part, so the computed dissipation block stays semidefinite.
        """
        if self.factor is None:
            return (self.S + self.S.T) / 2
        out = self.factor.T @ self.Dsym @ self.factor
        return (out + out.T) / 2

    def sym_mismatch(self) -> float:
        """Relative gap between the naive and the factored symmetric part."""
        naive = (self.S + self.S.T) / 2
        return float(np.linalg.norm(naive - self.sym) / max(np.linalg.norm(self.S), np.finfo(float).tiny))


@dataclass
class IdentificationResult:
    ph: PHRealization
    shift: np.ndarray
    order: int
    reduced: DescriptorRealization
    projection: ProjectionResult
    zeros: SpectralZeroSet
    passive_pencil: PassiveLoewnerPencil | None
    order_report: OrderReport | None
    normalized: PHRealization
    diagnostics: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# spectral zeros


def spectral_zero_pencil(sys: DescriptorRealization) -> tuple[np.ndarray, np.ndarray]:
    """Hamiltonian pencil whose finite eigenvalues are the zeros of ``H(s) + H(-s)^T``.

    The eigenvector is ordered ``[y; x; u]`` with ``u`` the zero direction.
    The ``u`` block is scaled to balance ``D + D^T`` against ``A``.
    """
    E, A, B, C = (np.asarray(x.toarray() if hasattr(x, "toarray") else x) for x in
                  (sys.E, sys.A, sys.B, sys.C))
    D = np.asarray(sys.D)
    n, m = B.shape
    if C.shape[0] != m:
        raise ValidationError("spectral zeros need a square transfer function")
    Dsym = D + D.T
    nd = np.linalg.norm(Dsym)
    na = max(np.linalg.norm(A), np.linalg.norm(E), np.finfo(float).tiny)
    a = np.sqrt(na / nd) if nd > 0 else 1.0
    Z = np.zeros
    big_a = np.block([
        [Z((n, n)), A, a * B],
        [A.T, Z((n, n)), a * C.T],
        [a * B.T, a * C, a * a * Dsym],
    ])
    big_e = np.block([
        [Z((n, n)), E, Z((n, m))],
        [-E.T, Z((n, n)), Z((n, m))],
        [Z((m, 2 * n + m))],
    ])
    return big_a, big_e


def _sort_key(z):
    return (round(abs(z.imag), 12), z.real)


def spectral_zeros(sys: DescriptorRealization, tol_zero: float = TOL_ZERO,
                   expected: int | None = None, check: bool = True) -> SpectralZeroSet:
    """Spectral zeros in the open right half-plane with their directions.

    Zeros count as positive when ``Re xi > tol_zero * max|xi|``. With
    ``check`` a :class:`SpectralZeroError` is raised unless there are
    ``2 n`` finite zeros and exactly ``expected`` (default ``n``) positive
    ones; the message lists zeros found near the imaginary axis.
    """
    if not sys.is_real:
        raise ValidationError("spectral zeros are implemented for real realizations")
    n, m = sys.n, sys.m
    expected = n if expected is None else expected
    big_a, big_e = spectral_zero_pencil(sys)
    (alpha, beta), vecs = la.eig(big_a, big_e, homogeneous_eigvals=True)
    nrm = np.hypot(np.abs(alpha), np.abs(beta))
    nrm[nrm == 0] = 1.0
    alpha, beta = alpha / nrm, beta / nrm
    finite = np.abs(beta) > 1e-12
    xi = alpha[finite] / beta[finite]
    u = vecs[2 * n:, finite]
    n_inf = int(np.sum(~finite))
    scale = float(np.abs(xi).max()) if xi.size else 0.0
    tol = tol_zero * scale
    near = xi[np.abs(xi.real) <= tol]
    pos = np.flatnonzero(xi.real > tol)
    if check and xi.size != 2 * n:
        raise SpectralZeroError(
            f"expected {2 * n} finite spectral zeros, found {xi.size} "
            "(D + D^T is singular; shift the data)", near, xi)
    if check and (near.size or pos.size != expected):
        raise SpectralZeroError(
            f"{pos.size} spectral zeros with Re > {tol:.2e}, expected {expected}; "
            f"{near.size} zero(s) near the imaginary axis: {list(near[:8])}", near, xi)
    # one representative per conjugate pair, directions of partners conjugated
    cand = pos[xi[pos].imag >= -tol]
    reps = []
    for k in cand:
        z = xi[k]
        if abs(z.imag) <= tol:
            z = complex(z.real, 0.0)
        reps.append((z, u[:, k]))
    reps.sort(key=lambda t: _sort_key(t[0]))
    zeros, dirs = [], []
    for z, d in reps:
        d = d / np.linalg.norm(d)
        if z.imag == 0:
            j = int(np.argmax(np.abs(d)))
            d = (d * np.exp(-1j * np.angle(d[j]))).real.astype(complex)
            d /= np.linalg.norm(d)
            zeros.append(z)
            dirs.append(d)
        else:
            j = int(np.argmax(np.abs(d)))
            d = d * np.exp(-1j * np.angle(d[j]))
            zeros += [z, z.conjugate()]
            dirs += [d, d.conj()]
    if check and len(zeros) != expected:
        raise SpectralZeroError(
            f"positive spectral zeros are not conjugate-closed ({len(zeros)} vs {expected})",
            near, xi)
    dirs_arr = np.array(dirs).T if dirs else np.zeros((m, 0), complex)
    return SpectralZeroSet(np.array(zeros, dtype=complex), dirs_arr, xi, tol, n_inf, near)


def select_positive(zset: SpectralZeroSet, r: int) -> SpectralZeroSet:
    """Keep the first ``r`` positive zeros (``r`` must not split a conjugate pair)."""
    if r > zset.zeros.size:
        raise SpectralZeroError(f"only {zset.zeros.size} positive zeros, {r} requested")
    if 0 < r < zset.zeros.size and zset.zeros[r - 1].imag > 0:
        raise ValidationError(f"order {r} would split a conjugate pair of spectral zeros")
    return SpectralZeroSet(zset.zeros[:r], zset.directions[:, :r], zset.all_zeros,
                           zset.tol_zero, zset.n_infinite, zset.near_axis)


# --------------------------------------------------------------------------
# passive pencil and normalization


def build_passive_data(zset: SpectralZeroSet, model) -> tuple[RightData, LeftData]:
    """Right data at the spectral zeros, left data at their mirror images.

    Right: ``(xi_j, x_j, H(xi_j) x_j)``; left: ``(-conj(xi_j), x_j^H, -w_j^H)``.
    ``model`` is a realization or a callable returning ``H(s)``.
    """
    oracle = model if callable(model) else as_oracle(model)
    X = zset.directions
    W = np.column_stack([np.atleast_2d(oracle(z)) @ X[:, j] for j, z in enumerate(zset.zeros)])
    right = RightData(zset.zeros, X, W)
    left = LeftData(-zset.zeros.conj(), X.conj().T, -W.conj().T)
    return right, left


@dataclass(frozen=True)
class PassiveLoewnerPencil(LoewnerPencil):
    """Loewner pencil of passive data; ``T`` is set once ``LL = T^T T`` is factored."""

    T: np.ndarray | None = None

    def structure_residuals(self) -> tuple[float, float]:
        """Relative Hermitian residual of ``LL`` and skew residual of ``sLL``."""
        def rel(x, y):
            return float(np.linalg.norm(x) / max(np.linalg.norm(y), np.finfo(float).tiny))
        return (rel(self.LL - self.LL.conj().T, self.LL),
                rel(self.sLL + self.sLL.conj().T, self.sLL))


def passive_loewner(data: tuple[RightData, LeftData], rtol: float = 1e-10) -> PassiveLoewnerPencil:
    """Realified passive Loewner pencil; ``LL`` is symmetric and ``sLL`` skew.

    Raises :class:`ValidationError` if the structure residuals exceed ``rtol``.
    """
    right, left = data
    base = build_loewner(right, left)
    pencil = PassiveLoewnerPencil(**{f.name: getattr(base, f.name) for f in dataclasses.fields(base)})
    res = pencil.structure_residuals()
    if max(res) > rtol:
        raise ValidationError(f"passive pencil lacks Hermitian/skew structure (residuals {res})")
    pencil = pencil.realify()
    return dataclasses.replace(pencil, LL=(pencil.LL + pencil.LL.T) / 2,
                               sLL=(pencil.sLL - pencil.sLL.T) / 2)


def unshift_pencil(pencil: PassiveLoewnerPencil, Ds) -> PassiveLoewnerPencil:
    """``sLL - L Ds R``, ``V - L Ds``, ``W - Ds R``."""
    return subtract_feedthrough(pencil, Ds)


def cholesky_factor(LL: np.ndarray, jitter: float = CHOLESKY_JITTER) -> tuple[np.ndarray, float]:
    """Upper factor ``T`` with ``LL = T^T T`` and the jitter that was added.

    A tiny negative eigenvalue (above ``-jitter * ||LL||``) is tolerated by
    adding ``jitter * ||LL||`` to the diagonal once.
    """
    LL = (LL + LL.T) / 2
    try:
        return la.cholesky(LL, lower=False), 0.0
    except la.LinAlgError:
        pass
    nrm = np.linalg.norm(LL, 2)
    lmin = float(la.eigvalsh(LL, subset_by_index=[0, 0])[0])
    if lmin <= -jitter * nrm:
        raise IndefiniteLoewnerError(lmin)
    eps = jitter * nrm
    try:
        return la.cholesky(LL + eps * np.eye(LL.shape[0]), lower=False), eps
    except la.LinAlgError as exc:
        raise IndefiniteLoewnerError(lmin) from exc


def normalize_ph(pencil: PassiveLoewnerPencil, D) -> tuple[DescriptorRealization, SMatrix]:
    """Normalized standard model and its ``S`` matrix.

    With ``LL = T^T T`` the pencil ``(E, A, B, C) = (-LL, -sLL, V, W)`` is
    congruent to ``A = T^-T sLL T^-1``, ``B = -T^-T V``, ``C = W T^-1`` with
    ``E = I``. ``info`` of the returned ``SMatrix`` holds the factor ``T``.
    """
    T, eps = cholesky_factor(pencil.LL)
    TinvT_sLL = la.solve_triangular(T, pencil.sLL, trans="T")
    A = la.solve_triangular(T, TinvT_sLL.T, trans="T").T
    B = -la.solve_triangular(T, pencil.V, trans="T")
    C = la.solve_triangular(T, pencil.W.T, trans="T").T
    n = A.shape[0]
    D = np.atleast_2d(np.asarray(D, dtype=float))
    S = np.block([[-A, -B], [C, D]])
    Y = la.solve_triangular(T, pencil.R.T, trans="T").T
    smat = SMatrix(S, n, np.hstack([Y, -np.eye(D.shape[0])]), (D + D.T) / 2)
    smat.info = {"T": T, "cholesky_jitter": eps, "cond_T": float(np.linalg.cond(T)),
                 "sym_mismatch": smat.sym_mismatch()}
    return DescriptorRealization(A=A, B=B, C=C, D=D), smat


def extract_ph(smat: SMatrix) -> PHRealization:
    """Split ``S`` into skew and symmetric parts, ``M = Q = I``."""
    n = smat.n
    K, Hs = smat.skew, smat.sym
    return PHRealization(
        J=-K[:n, :n], G=-K[:n, n:], N=K[n:, n:],
        R=Hs[:n, :n], P=Hs[:n, n:], S=Hs[n:, n:],
    )


def remove_shift(ph: PHRealization, Ds: np.ndarray) -> PHRealization:
    """Subtract ``Ds`` from the feedthrough (symmetric part from ``S``, skew part from ``N``)."""
    Ds = np.asarray(Ds)
    return PHRealization(J=ph.J, R=ph.R, G=ph.G, P=ph.P, M=ph.M, Q=ph.Q,
                         N=ph.N - (Ds - Ds.T) / 2, S=ph.S - (Ds + Ds.T) / 2)


def estimate_feedthrough(oracle, omega_max: float, factor: float = 1e3) -> np.ndarray:
    """Real part of ``H(i * factor * omega_max)`` as a feedthrough estimate."""
    return np.real(np.atleast_2d(oracle(1j * factor * omega_max)))


# --------------------------------------------------------------------------
# driver


def interpolation_residual(model: DescriptorRealization, right: RightData, left: LeftData) -> float:
    """Largest tangential mismatch ``|H(lam) r - w|``, ``|l^T H(mu) - v^T|`` over the largest response."""
    Hr = batch_response(model, right.points)
    Hl = batch_response(model, left.points)
    res_r = np.linalg.norm(np.einsum("kpm,mk->kp", Hr, right.R) - right.W.T, axis=1)
    res_l = np.linalg.norm(np.einsum("qm,qmp->qp", left.L, Hl) - left.V, axis=1)
    scale = max(np.linalg.norm(right.W, axis=0).max(), np.linalg.norm(left.V, axis=1).max(),
                np.finfo(float).tiny)
    return float(max(res_r.max(), res_l.max()) / scale)


def _stage(k: int, name: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except PHLoewnerError as exc:
        raise exc.with_stage(f"step {k}: {name}")
    except (la.LinAlgError, ValueError) as exc:
        raise NumericalError(str(exc)).with_stage(f"step {k}: {name}") from exc


def _static_result(sys_p, Ds, shifted, std, proj, rep, diag, t0) -> IdentificationResult:
    """Order-zero projected model: a constant gain, passive iff its symmetric part is PSD."""
    D = np.asarray(sys_p.D, dtype=float)
    m = D.shape[0]
    sym, skew = (D + D.T) / 2, (D - D.T) / 2
    lmin = float(np.linalg.eigvalsh(sym).min())
    if lmin < -1e-12 * max(np.linalg.norm(D), 1.0):
        raise NumericalError(f"projected model is a static gain with indefinite symmetric part "
                             f"(smallest eigenvalue {lmin:.3e})").with_stage("step 5: spectral zeros")
    empty = np.zeros((0, 0))
    normalized = PHRealization(J=empty, R=empty, G=np.zeros((0, m)), N=skew, S=sym)
    ph = remove_shift(normalized, Ds) if shifted else normalized
    zset = SpectralZeroSet(np.zeros(0, complex), np.zeros((m, 0), complex), np.zeros(0, complex), 0.0)
    diag["structure"] = {"J_skew": 0.0, "dissipation_min_eig": lmin}
    diag["timings"]["total"] = time.perf_counter() - t0
    return IdentificationResult(ph, Ds, 0, std, proj, zset, None, rep, normalized, diag)


def identify_ph(right: RightData, left: LeftData, shift=1.0, order="auto",
                stabilize: str = "nehari", feedthrough="auto",
                rank_tol: float = DEFAULT_RANK_TOL, tol_zero: float = TOL_ZERO,
                band: tuple[float, float] | None = None) -> IdentificationResult:
    """Identify a passive port-Hamiltonian model from tangential data.

    Parameters
    ----------
    right, left
        Tangential data (not necessarily conjugate-closed).
    shift
        Feedthrough shift ``Ds`` (scalar or ``m x m`` with ``Ds + Ds^T > 0``).
        ``None`` or ``0`` disables shifting, which only works for strictly
        passive data.
    order
        ``"auto"`` (numerical rank of ``[LL, sLL]``) or the reduction order.
    stabilize
        ``"nehari"``, ``"reflect"`` or ``"off"``.
    feedthrough
        Feedthrough of the unshifted data. ``"auto"`` extracts it from the
        pencil (index-one elimination) when the ranks of ``LL`` and
        ``[LL, sLL]`` differ, and otherwise, or when that elimination finds
        a higher-index pencil, assumes zero so that the reduced model has
        ``D = Ds``. ``"pencil"`` always extracts it, ``None`` assumes zero
        and an array is used as given.
    band
        Frequency band for the L-infinity error estimate; defaults to the
        range of the data.

    Returns
    -------
    IdentificationResult
        ``ph`` is the final model; ``normalized`` is the model before the
        shift is removed (its dissipation block is positive semidefinite).
    """
    diag: dict = {"timings": {}}
    t0 = time.perf_counter()
    m = right.R.shape[0]
    if left.V.shape[1] != m or right.W.shape[0] != left.L.shape[1]:
        raise ValidationError("left and right data have inconsistent dimensions")
    if right.W.shape[0] != m:
        raise ValidationError("passive identification needs a square transfer function")
    shifted = shift is not None and np.any(np.asarray(shift) != 0)
    Ds = check_shift(shift, m) if shifted else np.zeros((m, m))
    if band is None:
        pts = np.abs(np.concatenate([right.points, left.points]))
        pts = pts[pts > 0]
        band = (float(pts.min()), float(pts.max())) if pts.size else None

    # 1. shift
    r_s, l_s = _stage(1, "shift", shift_data, right, left, Ds) if shifted else (right, left)
    # 2. Loewner pencil of the shifted data
    r_c, l_c = _stage(2, "loewner", conjugate_close, r_s, l_s)
    pencil = _stage(2, "loewner", lambda: build_loewner(r_c, l_c).realify())
    diag["timings"]["loewner"] = time.perf_counter() - t0
    # 3. reduced model of the shifted data
    if isinstance(feedthrough, str) and feedthrough not in ("auto", "pencil"):
        raise ValidationError(f"unknown feedthrough option {feedthrough!r}")
    D0 = np.zeros((m, m)) if feedthrough is None or isinstance(feedthrough, str) \
        else np.atleast_2d(np.asarray(feedthrough, dtype=float))
    D_feed = Ds + D0
    base = subtract_feedthrough(pencil, D_feed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = _stage(3, "order", detect_orders, base, rank_tol)
    for w in caught:
        log.warning("%s", w.message)
    diag["rank_warnings"] = [str(w.message) for w in caught]
    use_pencil = feedthrough == "pencil" or (feedthrough == "auto" and rep.nu < rep.r)
    r = rep.r if order == "auto" else int(order)
    if r < 1:
        raise ValidationError("order must be positive").with_stage("step 3: order")
    reduced = _stage(3, "reduce", reduce_realization, base, r, D_feed, rank_tol)
    path = "pencil" if use_pencil else "given"
    try:
        try:
            std = to_standard(reduced, rank_tol if use_pencil else 0.0)
        except ValidationError:
            # a rank gap from noise rather than from a feedthrough: keep D_feed
            if feedthrough != "auto":
                raise
            std = to_standard(reduced, 0.0)
            path = "given (pencil extraction found index > 1)"
    except ValidationError as exc:
        # a higher-index interpolant comes from the data, not from the caller
        raise NumericalError(f"{exc.args[0]}; shift the data").with_stage("step 3: standardize") from exc
    except la.LinAlgError as exc:
        raise NumericalError(str(exc)).with_stage("step 3: standardize") from exc
    diag["order_report"] = {"r": rep.r, "nu": rep.nu, "r_row": rep.r_row, "r_col": rep.r_col,
                            "used": r, "dynamic_order": std.n, "feedthrough": path}
    diag["timings"]["reduce"] = time.perf_counter() - t0
    # 4. stable projection
    proj = _stage(4, "stabilize", p_infinity, std, stabilize, band)
    sys_p = proj.projected
    diag["projection"] = {"mode": proj.mode, "error": proj.achieved_error,
                          "hankel_bound": proj.hankel_bound, "n_reflected": len(proj.reflected),
                          "n_unstable": int(np.sum(proj.eig_before.real > 0))}
    # the projection need not preserve interpolation: report both residuals
    diag["interpolation_residual"] = {"before_projection": interpolation_residual(std, r_s, l_s),
                                      "after_projection": interpolation_residual(sys_p, r_s, l_s)}
    diag["timings"]["stabilize"] = time.perf_counter() - t0
    if sys_p.n == 0:
        return _static_result(sys_p, Ds, shifted, std, proj, rep, diag, t0)
    # 5-6. spectral zeros
    zset = _stage(5, "spectral zeros", spectral_zeros, sys_p, tol_zero)
    zset = _stage(6, "select zeros", select_positive, zset, sys_p.n)
    diag["timings"]["spectral_zeros"] = time.perf_counter() - t0
    # 7. passive Loewner pencil
    data = _stage(7, "passive data", build_passive_data, zset, sys_p)
    ppencil = _stage(7, "passive pencil", passive_loewner, data)
    # 8. unshift
    D_p = np.asarray(sys_p.D, dtype=float)
    upencil = _stage(8, "unshift", unshift_pencil, ppencil, D_p)
    # 9-10. Cholesky and normalized standard form
    _, smat = _stage(9, "cholesky", normalize_ph, upencil, D_p)
    ppencil = dataclasses.replace(ppencil, T=smat.info["T"])
    diag.update({k: v for k, v in smat.info.items() if k != "T"})
    # 11. port-Hamiltonian matrices
    normalized = _stage(11, "extract", extract_ph, smat)
    # 12. remove the shift
    ph = remove_shift(normalized, Ds) if shifted else normalized
    chk = normalized.check()
    diag["structure"] = {"J_skew": chk["J_skew"], "dissipation_min_eig": chk["dissipation_min_eig"]}
    diag["timings"]["total"] = time.perf_counter() - t0
    return IdentificationResult(ph, Ds, sys_p.n, std, proj, zset, ppencil, rep, normalized, diag)
