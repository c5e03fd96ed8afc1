"""Loewner pencil assembly, order detection and reduced realizations."""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import CoincidentPointError, RankError, ValidationError
from .lti import DescriptorRealization
from .tangential import LeftData, RightData, realify

DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True)
class LoewnerPencil:
    """Loewner matrices together with the data matrices they were built from.

    ``Lam``/``Mu`` are diagonal for raw data and block-diagonal after
    :func:`~phloewner.tangential.realify`; the Sylvester identities hold in
    both cases.
    """

    LL: np.ndarray
    sLL: np.ndarray
    V: np.ndarray
    W: np.ndarray
    Lam: np.ndarray
    Mu: np.ndarray
    R: np.ndarray
    L: np.ndarray
    right: RightData | None = None
    left: LeftData | None = None
    realified: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.LL.shape

    def transfer(self, s: complex) -> np.ndarray:
        """``W (sLL - s LL)^{-1} V`` of the full (unprojected) pencil."""
        return self.W @ np.linalg.solve(self.sLL - s * self.LL, self.V)

    def realify(self, rtol: float = 1e-10) -> "LoewnerPencil":
        return realify(self, rtol)


@dataclass
class OrderReport:
    r: int
    nu: int
    singular_values: np.ndarray
    tol_used: float
    r_row: int
    r_col: int
    undetermined: bool = False


def build_loewner(right: RightData, left: LeftData, rtol: float = 1e-14) -> LoewnerPencil:
    """Entrywise Loewner and shifted Loewner matrices.

    ``LL[i, j] = (v_i^T r_j - l_i^T w_j) / (mu_i - lambda_j)`` and
    ``sLL[i, j] = (mu_i v_i^T r_j - l_i^T w_j lambda_j) / (mu_i - lambda_j)``.
    """
    lam, mu = right.points, left.points
    diff = mu[:, None] - lam[None, :]
    scale = np.maximum(np.abs(mu)[:, None], np.abs(lam)[None, :])
    bad = np.abs(diff) <= rtol * np.maximum(scale, 1.0)
    if bad.any():
        i, j = map(int, np.argwhere(bad)[0])
        raise CoincidentPointError(i, j, lam[j])
    VR = left.V @ right.R
    LW = left.L @ right.W
    LL = (VR - LW) / diff
    sLL = (mu[:, None] * VR - LW * lam[None, :]) / diff
    return LoewnerPencil(
        LL=LL, sLL=sLL, V=left.V.copy(), W=right.W.copy(),
        Lam=np.diag(lam), Mu=np.diag(mu), R=right.R.copy(), L=left.L.copy(),
        right=right, left=left,
    )


def sylvester_residual(pencil: LoewnerPencil) -> tuple[float, float]:
    """Relative Frobenius residuals of the two Sylvester identities."""
    P = pencil
    rhs1 = P.V @ P.R - P.L @ P.W
    rhs2 = P.Mu @ P.V @ P.R - P.L @ P.W @ P.Lam
    lhs1 = P.Mu @ P.LL - P.LL @ P.Lam
    lhs2 = P.Mu @ P.sLL - P.sLL @ P.Lam

    def rel(lhs, rhs, terms):
        den = max(np.linalg.norm(x) for x in terms)
        return 0.0 if den == 0 else float(np.linalg.norm(lhs - rhs) / den)

    r1 = rel(lhs1, rhs1, (rhs1, P.Mu @ P.LL, P.LL @ P.Lam))
    r2 = rel(lhs2, rhs2, (rhs2, P.Mu @ P.sLL, P.sLL @ P.Lam))
    return r1, r2


def _rank(sv: np.ndarray, tol: float) -> int:
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv >= tol * sv[0]))


def detect_orders(pencil: LoewnerPencil, tol: float = DEFAULT_RANK_TOL) -> OrderReport:
    """Numerical ranks of ``[LL, sLL]``, ``[LL; sLL]`` and ``LL``.

    A rank is the number of singular values ``>= tol * sigma_max``. If the
    two concatenations disagree by one, the larger value is used with a
    warning; a larger mismatch raises :class:`RankError`.
    """
    if not 0 < tol < 1:
        raise ValidationError("tol must lie in (0, 1)")
    sv_row = la.svdvals(np.hstack([pencil.LL, pencil.sLL]))
    sv_col = la.svdvals(np.vstack([pencil.LL, pencil.sLL]))
    r_row, r_col = _rank(sv_row, tol), _rank(sv_col, tol)
    nu = _rank(la.svdvals(pencil.LL), tol)
    undetermined = r_row != r_col
    if abs(r_row - r_col) > 1:
        raise RankError(f"row/column ranks disagree ({r_row} vs {r_col}); data look ill-posed")
    if undetermined:
        warnings.warn(f"row/column ranks differ ({r_row} vs {r_col}); using {max(r_row, r_col)}",
                      stacklevel=2)
    return OrderReport(max(r_row, r_col), nu, sv_row, tol, r_row, r_col, undetermined)


def subtract_feedthrough(pencil: LoewnerPencil, D) -> LoewnerPencil:
    """Pencil of the data with a constant ``D`` removed.

    ``sLL - L D R``, ``V - L D``, ``W - D R``; ``LL`` is unaffected. The
    resulting pencil plus feedthrough ``D`` interpolates the same data.
    """
    D = np.atleast_2d(np.asarray(D))
    return dataclasses.replace(
        pencil,
        sLL=pencil.sLL - pencil.L @ D @ pencil.R,
        V=pencil.V - pencil.L @ D,
        W=pencil.W - D @ pencil.R,
    )


def projectors(pencil: LoewnerPencil, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Left (``Y``) and right (``X``) singular factors of rank ``r``."""
    Yf, _, _ = la.svd(np.hstack([pencil.LL, pencil.sLL]), full_matrices=False)
    _, _, Xh = la.svd(np.vstack([pencil.LL, pencil.sLL]), full_matrices=False)
    return Yf[:, :r], Xh[:r].conj().T


def reduce_realization(pencil: LoewnerPencil, r: int, D=None,
                       tol: float = DEFAULT_RANK_TOL) -> DescriptorRealization:
    """Order-``r`` Loewner realization ``(-Y^H LL X, -Y^H sLL X, Y^H V, W X, D)``.

    ``D`` defaults to zero; pass the feedthrough that was removed with
    :func:`subtract_feedthrough` to restore it.
    """
    if r < 1:
        raise ValidationError("order must be positive")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rank = detect_orders(pencil, tol).r
    if r > rank:
        raise RankError(f"order {r} exceeds the numerical rank {rank}")
    Y, X = projectors(pencil, r)
    YH = Y.conj().T
    E = -YH @ pencil.LL @ X
    A = -YH @ pencil.sLL @ X
    B = YH @ pencil.V
    C = pencil.W @ X
    if D is None:
        D = np.zeros((C.shape[0], B.shape[1]))
    return DescriptorRealization(A=A, B=B, C=C, D=D, E=E)
