"""Realization containers, transfer evaluation and passivity classification.

Two containers are provided:

* :class:`DescriptorRealization` -- ``E x' = A x + B u``, ``y = C x + D u``.
* :class:`PHRealization` -- ``M x' = (J - R) Q x + (G - P) u``,
  ``y = (G + P)^T Q x + (N + S) u``.

Matrices may be dense numpy arrays or scipy sparse matrices. Realizations
with more than :data:`SPARSE_THRESHOLD` states are evaluated with a sparse
LU factorization per frequency.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularShiftError, ValidationError

SPARSE_THRESHOLD = 2000
DENSE_EIG_LIMIT = 2000
STRUCT_RTOL = 1e-10


def _mat(x, dtype=None):
    if sp.issparse(x):
        return sp.csr_matrix(x, dtype=dtype)
    return np.atleast_2d(np.asarray(x, dtype=dtype))


def _dense(x) -> np.ndarray:
    return x.toarray() if sp.issparse(x) else np.asarray(x)


def _fro(x) -> float:
    return float(sp.linalg.norm(x)) if sp.issparse(x) else float(np.linalg.norm(x))


def _is_identity(x) -> bool:
    if x.shape[0] != x.shape[1]:
        return False
    if sp.issparse(x):
        return (x - sp.eye(x.shape[0], format="csr")).count_nonzero() == 0
    return bool(np.array_equal(x, np.eye(x.shape[0])))


@dataclass(frozen=True)
class DescriptorRealization:
    """Matrices ``(E, A, B, C, D)``; ``E`` defaults to identity and ``D`` to zero."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray | None = None
    E: np.ndarray | None = None

    def __post_init__(self):
        A, B, C = _mat(self.A), _mat(self.B), _mat(self.C)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValidationError(f"A must be square, got {A.shape}")
        if B.shape[0] != n or C.shape[1] != n:
            raise ValidationError(f"inconsistent shapes A{A.shape} B{B.shape} C{C.shape}")
        E = (sp.eye(n, format="csr") if sp.issparse(A) else np.eye(n)) if self.E is None else _mat(self.E)
        if E.shape != (n, n):
            raise ValidationError(f"E must be {n}x{n}, got {E.shape}")
        D = np.zeros((C.shape[0], B.shape[1])) if self.D is None else _dense(_mat(self.D))
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValidationError(f"D must be {C.shape[0]}x{B.shape[1]}, got {D.shape}")
        for name, val in zip("ABCDE", (A, B, C, D, E)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def kind(self) -> str:
        return "standard" if _is_identity(self.E) else "descriptor"

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.A)

    @property
    def is_real(self) -> bool:
        return all(not np.iscomplexobj(x.data if sp.issparse(x) else x)
                   for x in (self.E, self.A, self.B, self.C, self.D))

    def with_feedthrough(self, D) -> "DescriptorRealization":
        return DescriptorRealization(self.A, self.B, self.C, D, self.E)


@dataclass(frozen=True)
class TransferSample:
    """Transfer value ``value = H(s)`` at one complex frequency."""

    s: complex
    value: np.ndarray


@dataclass(frozen=True)
class PHRealization:
    """Port-Hamiltonian realization ``(M, Q, J, R, G, P, N, S)``.

    Only ``J``, ``R`` and ``G`` are required; ``M`` and ``Q`` default to the
    identity and ``P``, ``N``, ``S`` to zero. Structure is *not* enforced at
    construction; call :meth:`check` or :meth:`validate`.
    """

    J: np.ndarray
    R: np.ndarray
    G: np.ndarray
    P: np.ndarray | None = None
    N: np.ndarray | None = None
    S: np.ndarray | None = None
    M: np.ndarray | None = None
    Q: np.ndarray | None = None

    def __post_init__(self):
        J, R, G = _mat(self.J), _mat(self.R), _mat(self.G)
        n, m = G.shape
        sparse = sp.issparse(J)
        eye = (lambda k: sp.eye(k, format="csr")) if sparse else np.eye
        zeros_nm = sp.csr_matrix((n, m)) if sp.issparse(G) else np.zeros((n, m))
        vals = {
            "J": J,
            "R": R,
            "G": G,
            "P": zeros_nm if self.P is None else _mat(self.P),
            "N": np.zeros((m, m)) if self.N is None else _dense(_mat(self.N)),
            "S": np.zeros((m, m)) if self.S is None else _dense(_mat(self.S)),
            "M": eye(n) if self.M is None else _mat(self.M),
            "Q": eye(n) if self.Q is None else _mat(self.Q),
        }
        for name in "JRMQ":
            if vals[name].shape != (n, n):
                raise ValidationError(f"{name} must be {n}x{n}, got {vals[name].shape}")
        if vals["P"].shape != (n, m):
            raise ValidationError(f"P must be {n}x{m}")
        for name in "NS":
            if vals[name].shape != (m, m):
                raise ValidationError(f"{name} must be {m}x{m}")
        for name, val in vals.items():
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def m(self) -> int:
        return self.G.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.J)

    def dissipation_block(self) -> np.ndarray:
        """Dense ``[[R, P], [P^T, S]]`` (only sensible for small systems)."""
        return np.block([[_dense(self.R), _dense(self.P)], [_dense(self.P).T, self.S]])

    def check(self, rtol: float = STRUCT_RTOL) -> dict:
        """Return a dict of structural residuals and flags.

        Skewness and symmetry residuals are relative to the Frobenius norm
        of the matrix; definiteness is judged by the smallest eigenvalue
        against ``-rtol * ||X||_F``.
        """
        out = {}
        out["J_skew"] = _rel(self.J + self.J.T, self.J)
        out["N_skew"] = _rel(self.N + self.N.T, self.N)
        out["M_sym"] = _rel(self.M - self.M.T, self.M)
        out["Q_sym"] = _rel(self.Q - self.Q.T, self.Q)
        out["M_min_eig"] = _min_sym_eig(self.M)
        out["Q_min_eig"] = _min_sym_eig(self.Q)
        if self.is_sparse:
            diss_sym = max(_rel(self.R - self.R.T, self.R), _rel(self.S - self.S.T, self.S))
            diss_min = _min_sym_eig(self.R) if _fro(self.P) == 0 else np.nan
            if not np.isnan(diss_min):
                diss_min = min(diss_min, float(np.linalg.eigvalsh((self.S + self.S.T) / 2).min()))
            diss_scale = max(_fro(self.R), _fro(self.S))
        else:
            W = self.dissipation_block()
            diss_sym = _rel(W - W.T, W)
            diss_min = float(np.linalg.eigvalsh((W + W.T) / 2).min())
            diss_scale = float(np.linalg.norm(W))
        out["dissipation_sym"] = diss_sym
        out["dissipation_min_eig"] = diss_min
        ok = (
            out["J_skew"] <= rtol
            and out["N_skew"] <= rtol
            and out["M_sym"] <= rtol
            and out["Q_sym"] <= rtol
            and diss_sym <= rtol
            and not np.isnan(diss_min)
            and diss_min >= -rtol * max(diss_scale, np.finfo(float).tiny)
            and out["M_min_eig"] > 0
            and out["Q_min_eig"] >= -rtol * max(_fro(self.Q), 1.0)
        )
        out["valid"] = bool(ok)
        return out

    def validate(self, rtol: float = STRUCT_RTOL) -> "PHRealization":
        res = self.check(rtol)
        if not res["valid"]:
            bad = {k: v for k, v in res.items() if k != "valid"}
            raise ValidationError(f"port-Hamiltonian structure violated: {bad}")
        return self


def _rel(diff, ref) -> float:
    den = _fro(ref)
    return 0.0 if den == 0 else _fro(diff) / den


def _min_sym_eig(X) -> float:
    n = X.shape[0]
    if sp.issparse(X):
        Xs = (X + X.T) / 2
        # weak diagonal dominance with nonnegative diagonal is a cheap PSD certificate
        diag = Xs.diagonal()
        off = np.asarray(abs(Xs).sum(axis=1)).ravel() - np.abs(diag)
        if np.all(diag >= off) and n > DENSE_EIG_LIMIT:
            return float(np.min(diag - off))
        if n <= 4 * DENSE_EIG_LIMIT:
            return float(la.eigvalsh(Xs.toarray(), subset_by_index=[0, 0])[0])
        return float(spla.eigsh(Xs, k=1, which="SA", return_eigenvectors=False)[0])
    X = np.asarray(X)
    return float(np.linalg.eigvalsh((X + X.conj().T) / 2).min()) if n else np.inf


Realization = Union[DescriptorRealization, PHRealization]


def ph_to_descriptor(ph: PHRealization) -> DescriptorRealization:
    """``(E, A, B, C, D) = (M, (J-R)Q, G-P, (G+P)^T Q, N+S)``."""
    JR = ph.J - ph.R
    return DescriptorRealization(
        E=ph.M,
        A=JR @ ph.Q,
        B=ph.G - ph.P,
        C=((ph.G + ph.P).T @ ph.Q),
        D=ph.N + ph.S,
    )


def to_coenergy(ph: PHRealization, rtol: float = 1e-10) -> PHRealization:
    """Rewrite in co-energy variables ``e = Q x`` so that the new ``Q`` is identity.

    The new mass matrix is ``M Q^{-1}``, which is symmetric exactly when
    ``Q^T M`` is (the usual compatibility condition between ``M`` and
    ``Q``). All other blocks are unchanged, so the transfer is invariant.
    """
    if _is_identity(ph.Q):
        return ph
    Qd = _dense(ph.Q)
    try:
        lu = la.lu_factor(Qd, check_finite=True)
        if np.min(np.abs(np.diag(lu[0]))) <= 1e-14 * np.abs(Qd).max():
            raise la.LinAlgError("singular")
    except la.LinAlgError as exc:
        raise ValidationError("Q is singular; co-energy form needs an invertible Q") from exc
    Mn = la.lu_solve(lu, _dense(ph.M).T, trans=0).T  # M Q^{-1}, Q symmetric
    asym = np.linalg.norm(Mn - Mn.T) / max(np.linalg.norm(Mn), 1e-300)
    if asym > rtol:
        raise ValidationError(f"M Q^-1 is not symmetric (rel. {asym:.2e}); Q^T M must be symmetric")
    return PHRealization(J=ph.J, R=ph.R, G=ph.G, P=ph.P, N=ph.N, S=ph.S, M=(Mn + Mn.T) / 2, Q=None)


def _solve_shift(K, rhs, s):
    if sp.issparse(K):
        try:
            lu = spla.splu(sp.csc_matrix(K))
        except RuntimeError as exc:
            raise SingularShiftError(s) from exc
        X = lu.solve(np.asarray(_dense(rhs), dtype=complex))
        if not np.all(np.isfinite(X)):
            raise SingularShiftError(s)
        return X
    with warnings.catch_warnings(), np.errstate(divide="ignore", invalid="ignore"):
        warnings.simplefilter("error", la.LinAlgWarning)
        try:
            X = la.solve(K, _dense(rhs))
        except (la.LinAlgError, la.LinAlgWarning) as exc:
            raise SingularShiftError(s) from exc
    # scipy's diagonal fast path returns inf/nan instead of raising
    if not np.all(np.isfinite(X)):
        raise SingularShiftError(s)
    return X


def eval_transfer(realization: Realization, s: complex) -> np.ndarray:
    """Evaluate the transfer matrix at ``s``.

    Raises :class:`SingularShiftError` when the pencil is numerically
    singular at ``s``.
    """
    s = complex(s)
    if isinstance(realization, PHRealization):
        ph = realization
        K = s * ph.M - (ph.J - ph.R) @ ph.Q
        if not sp.issparse(K):
            K = np.asarray(K, dtype=complex)
        X = _solve_shift(K, ph.G - ph.P, s)
        out = (ph.G + ph.P).T @ (ph.Q @ X)
        return np.asarray(out) + ph.N + ph.S
    sys = realization
    K = s * sys.E - sys.A
    if not sp.issparse(K):
        K = np.asarray(K, dtype=complex)
    X = _solve_shift(K, sys.B, s)
    return np.asarray(sys.C @ X) + sys.D


def frequency_response(realization: Realization, points: Sequence[complex]) -> np.ndarray:
    """Stack of transfer values, shape ``(len(points), p, m)``, in input order."""
    return np.array([eval_transfer(realization, s) for s in points])


def _is_real(realization: Realization) -> bool:
    if isinstance(realization, DescriptorRealization):
        return realization.is_real
    mats = [realization.J, realization.R, realization.G, realization.P,
            realization.N, realization.S, realization.M, realization.Q]
    return all(not np.iscomplexobj(x.data if sp.issparse(x) else x) for x in mats)


def spectral_density(realization: Realization, s: complex) -> np.ndarray:
    """``Phi(s) = H(s) + H(-s)^T``."""
    s = complex(s)
    H = eval_transfer(realization, s)
    if s.real == 0 and _is_real(realization):
        return H + H.conj().T
    return H + eval_transfer(realization, -s).T


# --------------------------------------------------------------------------
# passivity classification


@dataclass
class PassivityReport:
    classification: str
    min_eig_curve: list[tuple[float, float]]
    stability: str
    tol: float
    feedthrough_min_eig: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def min_eig(self) -> float:
        return min(v for _, v in self.min_eig_curve)


def pencil_eigenvalues(realization: Realization) -> np.ndarray:
    """Finite eigenvalues of the pencil (dense computation)."""
    if isinstance(realization, PHRealization):
        realization = ph_to_descriptor(realization)
    A, E = _dense(realization.A), _dense(realization.E)
    if _is_identity(realization.E):
        return la.eigvals(A)
    alpha, beta = la.eig(A, E, right=False, homogeneous_eigvals=True)
    scale = np.hypot(np.abs(alpha), np.abs(beta))
    finite = np.abs(beta) > 1e-12 * scale
    return alpha[finite] / beta[finite]


def stability_class(eigs: np.ndarray, A=None, E=None, axis_rtol: float = 1e-10,
                    cluster_gap: float = 1e-8) -> str:
    """Classify stability from pencil eigenvalues.

    Eigenvalues with ``|Re| <= axis_rtol * spectral_radius`` count as lying on
    the imaginary axis. Axis eigenvalues are clustered (gap ``cluster_gap``
    relative to the spectral radius); a cluster of size > 1 is acceptable
    only when it is semisimple, which is checked with the rank of
    ``A - lambda E`` when ``A`` is supplied.
    """
    eigs = np.asarray(eigs, dtype=complex)
    if eigs.size == 0:
        return "asymptotically-stable"
    rho = max(float(np.abs(eigs).max()), 1.0)
    tol_axis = axis_rtol * rho
    if np.any(eigs.real > tol_axis):
        return "unstable"
    axis = eigs[np.abs(eigs.real) <= tol_axis]
    if axis.size == 0:
        return "asymptotically-stable"
    axis = axis[np.argsort(axis.imag)]
    clusters = [[axis[0]]]
    for lam in axis[1:]:
        if abs(lam - clusters[-1][-1]) <= cluster_gap * rho:
            clusters[-1].append(lam)
        else:
            clusters.append([lam])
    for cl in clusters:
        if len(cl) == 1:
            continue
        if A is None:
            return "unstable"
        lam = complex(np.mean(cl).imag) * 1j
        Ad, Ed = _dense(A), _dense(E)
        sv = la.svdvals(Ad - lam * Ed)
        nullity = int(np.sum(sv <= 1e-8 * max(sv.max(), 1.0)))
        if nullity < len(cl):
            return "unstable"
    return "stable"


def _stability(realization: Realization, details: dict) -> str:
    n = realization.n
    if isinstance(realization, PHRealization) and (n > DENSE_EIG_LIMIT or realization.is_sparse):
        chk = realization.check()
        details["stability_method"] = "structural"
        if chk["valid"]:
            # M > 0, Q = Q^T >= 0, R >= 0: Lyapunov stable with semisimple axis spectrum.
            return "stable"
    if n > DENSE_EIG_LIMIT:
        details["stability_method"] = "unavailable"
        return "unknown"
    details.setdefault("stability_method", "eigenvalues")
    desc = ph_to_descriptor(realization) if isinstance(realization, PHRealization) else realization
    eigs = pencil_eigenvalues(desc)
    details["max_real_eig"] = float(eigs.real.max()) if eigs.size else None
    return stability_class(eigs, desc.A, desc.E)


def _feedthrough(realization: Realization) -> np.ndarray:
    if isinstance(realization, PHRealization):
        return realization.N + realization.S
    return realization.D


def classify_passivity(realization: Realization, omega_grid: Sequence[float],
                       rtol: float = 1e-10) -> PassivityReport:
    """Sampled passivity classification.

    Positive-realness is judged on the grid by the smallest eigenvalue of
    the Hermitian part of ``Phi(i w)``; the tolerance is ``rtol`` times the
    largest ``||Phi||`` seen. The high-frequency limit ``D + D^T`` enters the
    strictness test. ``undetermined`` is returned for an asymptotically
    stable model whose sampled minimum sits within the tolerance band, so
    that strict and non-strict passivity cannot be told apart.
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    if omega_grid.size == 0:
        raise ValidationError("omega grid must be non-empty")
    details: dict = {}
    curve = []
    scale = 0.0
    for w in omega_grid:
        Phi = spectral_density(realization, 1j * w)
        Hh = (Phi + Phi.conj().T) / 2
        curve.append((float(w), float(np.linalg.eigvalsh(Hh).min())))
        scale = max(scale, float(np.linalg.norm(Hh, 2)))
    D = _dense(_feedthrough(realization))
    d_min = float(np.linalg.eigvalsh((D + D.T.conj()) / 2).min()) if D.size else 0.0
    scale = max(scale, abs(d_min), np.finfo(float).tiny)
    tol = rtol * scale
    stability = _stability(realization, details)
    grid_min = min(v for _, v in curve)
    if stability == "unstable" or grid_min < -tol:
        cls = "not-passive"
    elif stability == "unknown":
        cls = "undetermined"
    elif stability == "asymptotically-stable" and d_min > tol:
        cls = "strictly-passive" if grid_min > tol else "undetermined"
    else:
        cls = "passive"
    return PassivityReport(cls, curve, stability, tol, d_min, details)


FrequencyOracle = Callable[[complex], np.ndarray]


def as_oracle(realization: Realization) -> FrequencyOracle:
    return lambda s: eval_transfer(realization, s)


def to_standard(sys: DescriptorRealization, rtol: float = 1e-10) -> DescriptorRealization:
    """Equivalent realization with ``E = I``.

    An invertible ``E`` is simply inverted. A singular ``E`` is handled for
    index-one pencils by eliminating the algebraic part through an SVD of
    ``E``; the eliminated part contributes to the feedthrough.
    """
    E, A, B, C = (_dense(x) for x in (sys.E, sys.A, sys.B, sys.C))
    if _is_identity(sys.E):
        return DescriptorRealization(A=A, B=B, C=C, D=sys.D)
    U, sv, Vh = la.svd(E)
    k = int(np.sum(sv > rtol * sv[0])) if sv.size and sv[0] > 0 else 0
    if k == E.shape[0]:
        lu = la.lu_factor(E)
        return DescriptorRealization(A=la.lu_solve(lu, A), B=la.lu_solve(lu, B), C=C, D=sys.D)
    V = Vh.conj().T
    At = U.conj().T @ A @ V
    Bt = U.conj().T @ B
    Ct = C @ V
    A11, A12, A21, A22 = At[:k, :k], At[:k, k:], At[k:, :k], At[k:, k:]
    sv22 = la.svdvals(A22)
    if sv22.size and sv22[-1] <= rtol * max(sv22[0], np.abs(At).max()):
        raise ValidationError("pencil has index > 1; cannot eliminate the algebraic part")
    X = la.solve(A22, np.hstack([A21, Bt[k:]]))
    X21, X2B = X[:, :k], X[:, k:]
    Sinv = 1.0 / sv[:k]
    return DescriptorRealization(
        A=Sinv[:, None] * (A11 - A12 @ X21),
        B=Sinv[:, None] * (Bt[:k] - A12 @ X2B),
        C=Ct[:, :k] - Ct[:, k:] @ X21,
        D=sys.D - Ct[:, k:] @ X2B,
    )
