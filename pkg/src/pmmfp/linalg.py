"""Small dense kernels: QR least squares, ridged Cholesky solves, SVD reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import RankDeficient, SingularSystem

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class SpectralReport:
    singular_values: np.ndarray
    condition_number: float
    infinite: bool = False

    def to_dict(self) -> dict:
        return {
            "singular_values": [float(s) for s in self.singular_values],
            "condition_number": None if self.infinite else float(self.condition_number),
            "condition_infinite": bool(self.infinite),
        }


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def least_squares_solve(X, y) -> np.ndarray:
    """Minimise ``||y - X beta||`` through a Householder QR factorisation.

    Raises ``RankDeficient`` when fewer than ``cols`` singular values exceed
    ``1e-10 * sigma_max``.
    """
    return qr_least_squares(X, y)[0]


def qr_least_squares(X, y) -> tuple[np.ndarray, np.ndarray]:
    """Like :func:`least_squares_solve` but also returns the triangular factor."""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    n, k = X.shape
    if n < k:
        raise RankDeficient(f"{n} rows cannot determine {k} coefficients")
    Q, R = np.linalg.qr(X, mode="reduced")
    sv = np.linalg.svd(R, compute_uv=False)
    if sv[0] == 0.0 or np.count_nonzero(sv > RANK_RTOL * sv[0]) < k:
        raise RankDeficient(f"effective rank below {k}")
    beta = sla.solve_triangular(R, Q.T @ y, lower=False, check_finite=False)
    return beta, R


def symmetric_solve(A, b, ridge: float = 0.0) -> tuple[np.ndarray, float]:
    """Solve ``(A + ridge I) x = b`` by Cholesky; returns ``(x, ridge_used)``.

    A failed factorisation at ``ridge == 0`` is retried once with
    ``ridge = 1e-8 * trace(A) / dim``.
    """
    A = _as_matrix(A)
    b = np.asarray(b, dtype=float)
    m = A.shape[0]
    if A.shape != (m, m):
        raise ValueError("A must be square")
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    if np.abs(A - A.T).max() > 1e-10 * scale:
        raise ValueError("A is not symmetric")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    ridges = [float(ridge)]
    if ridge == 0.0:
        ridges.append(1e-8 * abs(np.trace(A)) / m)
    for r in ridges:
        try:
            c = sla.cho_factor(A + r * np.eye(m), lower=False, check_finite=False)
        except sla.LinAlgError:
            continue
        x = sla.cho_solve(c, b, check_finite=False)
        if np.all(np.isfinite(x)):
            return x, r
    raise SingularSystem("symmetric system is not positive definite even after ridging")


def spectral_analyze(A) -> SpectralReport:
    """Singular values (descending) and ``kappa = s_max / s_min``.

    ``kappa`` is flagged infinite when ``s_min`` is zero at working precision.
    """
    A = _as_matrix(A)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return SpectralReport(sv, float("inf"), True)
    floor = sv[0] * max(A.shape) * np.finfo(float).eps
    if sv[-1] <= floor:
        return SpectralReport(sv, float("inf"), True)
    return SpectralReport(sv, float(sv[0] / sv[-1]), False)


def inverse_gram(X=None, *, R=None) -> np.ndarray:
    """``(X^T X)^{-1}``, from ``X`` or from its triangular QR factor ``R``."""
    if R is None:
        R = np.linalg.qr(_as_matrix(X), mode="r")
    Rinv = sla.solve_triangular(R, np.eye(R.shape[0]), lower=False, check_finite=False)
    return Rinv @ Rinv.T
