"""Signed-parity residual score bases and their correlant diagnostics.

These objects quantify how much a richer residual score could reduce slope
variance, and how badly conditioned that calculation is. They are reporting
tools only; coefficient estimation uses the second-order score in
:mod:`pmmfp.estimators`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .basis import Track
from .errors import SingularCorrelant, TooFewObservations, UnstableBasis, ZeroResidual
from .linalg import SpectralReport, spectral_analyze

KAPPA_LIMIT = 1e8
TAU_SENSITIVITY = 0.10
BD0_INV_SQ_LIMIT = 100.0
BD0_NEAR_ZERO = 0.01
BD0_TAIL_LIMIT = 0.005


class Parity(str, enum.Enum):
    EVEN = "even"
    ODD = "odd"
    LOG = "log"


@dataclass(frozen=True)
class ScoreBasisFn:
    """``|xi|^p`` (even), ``sign(xi)|xi|^p`` (odd) or ``log|xi|``."""

    power: float
    parity: Parity

    def __post_init__(self):
        parity = Parity(self.parity)
        power = 0.0 if parity is Parity.LOG else float(self.power)
        if parity is Parity.ODD and power == 0.0:
            raise ValueError("the odd power-0 score is excluded")
        if parity is not Parity.LOG and power == 0.0:
            raise ValueError("use Parity.LOG for the power-0 score")
        object.__setattr__(self, "parity", parity)
        object.__setattr__(self, "power", power)

    @property
    def label(self) -> str:
        if self.parity is Parity.LOG:
            return "log|e|"
        p = f"{self.power:g}"
        return f"|e|^{p}" if self.parity is Parity.EVEN else f"sgn(e)|e|^{p}"

    @property
    def singular_at_zero(self) -> bool:
        return self.parity is Parity.LOG or self.power < 1.0

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        a = np.abs(xi)
        if self.parity is Parity.LOG:
            return np.log(a)
        v = _pow(a, self.power)
        return v if self.parity is Parity.EVEN else np.sign(xi) * v

    def derivative(self, xi: np.ndarray) -> np.ndarray:
        if self.parity is Parity.LOG:
            return 1.0 / xi
        p = self.power
        a = np.abs(xi)
        if p == 1.0:
            base = np.ones_like(a)
        else:
            base = _pow(a, p - 1.0)
        return p * base if self.parity is Parity.ODD else p * np.sign(xi) * base


@dataclass(frozen=True)
class CustomBasisFn:
    """User-supplied score function; derivative by central differences if absent."""

    func: Callable[[np.ndarray], np.ndarray]
    label: str
    deriv: Callable[[np.ndarray], np.ndarray] | None = None
    power: float = 1.0
    singular_at_zero: bool = False

    def __call__(self, xi):
        return self.func(xi)

    def derivative(self, xi):
        if self.deriv is not None:
            return self.deriv(xi)
        h = 1e-6 * np.maximum(1.0, np.abs(xi))
        return (self.func(xi + h) - self.func(xi - h)) / (2 * h)


def _pow(a: np.ndarray, p: float) -> np.ndarray:
    if p == 0.5:
        return np.sqrt(a)
    if p == -0.5:
        return 1.0 / np.sqrt(a)
    if float(p).is_integer():
        return a ** int(p) if p > 0 else 1.0 / a ** int(-p)
    return a**p


@dataclass(frozen=True)
class InverseMomentDiagnostic:
    """Empirical check of ``E|xi|^-2 < inf`` on standardised residuals.

    Both cutoffs are operational choices, not derived bounds.
    """

    mean_inv_sq: float
    tail_fraction: float
    admissible: bool
    inv_sq_limit: float = BD0_INV_SQ_LIMIT
    near_zero: float = BD0_NEAR_ZERO
    tail_limit: float = BD0_TAIL_LIMIT

    def to_dict(self) -> dict:
        return {
            "mean_inv_sq": float(self.mean_inv_sq),
            "tail_fraction": float(self.tail_fraction),
            "admissible": bool(self.admissible),
            "thresholds": {"mean_inv_sq": self.inv_sq_limit, "near_zero": self.near_zero,
                           "tail_fraction": self.tail_limit, "operational": True},
        }


@dataclass(frozen=True)
class CorrelantReport:
    basis: tuple
    F: np.ndarray
    b: np.ndarray
    g_hat: float
    g_hat_tau_over_10: float
    spectral: SpectralReport
    tau_used: float
    bd0: InverseMomentDiagnostic | None
    stable: bool

    def to_dict(self) -> dict:
        return {
            "basis": [fn.label for fn in self.basis],
            "g_hat": float(self.g_hat),
            "g_hat_tau_over_10": float(self.g_hat_tau_over_10),
            "tau": float(self.tau_used),
            "spectral": self.spectral.to_dict(),
            "stable": bool(self.stable),
            "bd0": None if self.bd0 is None else self.bd0.to_dict(),
        }


def kunchenko_b2() -> list[ScoreBasisFn]:
    """The two-element basis ``{xi, xi^2}``."""
    return [ScoreBasisFn(1.0, Parity.ODD), ScoreBasisFn(2.0, Parity.EVEN)]


def default_basis(track: "Track | str" = Track.POSITIVE) -> list[ScoreBasisFn]:
    """Both parities of every nonzero track power, plus ``log|xi|``.

    Track a gives 9 functions, track b 15.
    """
    track = Track.parse(track)
    powers = [0.5, 1.0, 2.0, 3.0]
    if track is Track.FULL:
        powers = [-2.0, -1.0, -0.5] + powers
    out = []
    for p in powers:
        out.append(ScoreBasisFn(p, Parity.ODD))
        out.append(ScoreBasisFn(p, Parity.EVEN))
    out.append(ScoreBasisFn(0.0, Parity.LOG))
    return out


def standardise(residuals) -> np.ndarray:
    e = np.asarray(residuals, dtype=float).ravel()
    d = e - e.mean()
    sd = math.sqrt(float(np.mean(d * d)))
    if not sd > 0:
        raise ValueError("residuals have zero variance")
    return d / sd


def inverse_moment_diagnostic(xi: np.ndarray) -> InverseMomentDiagnostic:
    a = np.abs(xi)
    with np.errstate(divide="ignore"):
        inv = float(np.mean(1.0 / (a * a)))
    tail = float(np.mean(a < BD0_NEAR_ZERO))
    ok = inv <= BD0_INV_SQ_LIMIT and tail <= BD0_TAIL_LIMIT
    return InverseMomentDiagnostic(inv, tail, ok)


def _quadratic_g(F: np.ndarray, b: np.ndarray, tau: float) -> float:
    K = F.shape[0]
    try:
        c = sla.cho_factor(F + tau * np.eye(K), check_finite=False)
    except sla.LinAlgError as exc:
        raise SingularCorrelant("correlant matrix is not positive definite at this tau") from exc
    q = float(b @ sla.cho_solve(c, b, check_finite=False))
    if not q > 0 or not math.isfinite(q):
        raise SingularCorrelant("b' F^-1 b is not positive")
    return 1.0 / q


def default_tau(F: np.ndarray) -> float:
    return 1e-8 * float(np.trace(F)) / F.shape[0]


def correlant_report(residuals, basis: Sequence, tau: float | None = None) -> CorrelantReport:
    """Empirical ``F``, ``b`` and ``g(B) = 1 / (b' (F + tau I)^-1 b)``.

    Residuals are centred and scaled to unit ``1/n`` variance first, so the
    ``sigma^2`` factor is one. ``stable`` is false when ``kappa(F) > 1e8`` or
    ``g`` moves by more than 10% between ``tau`` and ``tau/10``.
    """
    basis = tuple(basis)
    if not basis:
        raise ValueError("basis must not be empty")
    e = np.asarray(residuals, dtype=float).ravel()
    if e.size < 5 * len(basis):
        raise TooFewObservations(f"need n >= 5K = {5 * len(basis)} residuals")
    xi = standardise(e)
    if (np.any(e == 0.0) or np.any(xi == 0.0)) and any(fn.singular_at_zero for fn in basis):
        raise ZeroResidual("exact zero residual with a score singular at zero")
    G = np.column_stack([fn(xi) for fn in basis])
    D = np.column_stack([fn.derivative(xi) for fn in basis])
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(D))):
        raise ZeroResidual("score evaluations overflowed near zero")
    Gc = G - G.mean(axis=0)
    F = Gc.T @ Gc / xi.size
    F = 0.5 * (F + F.T)
    b = -D.mean(axis=0)
    tau_used = default_tau(F) if tau is None else float(tau)
    g = _quadratic_g(F, b, tau_used)
    g10 = _quadratic_g(F, b, tau_used / 10) if tau_used > 0 else g
    spectral = spectral_analyze(F)
    bd0 = None
    if any(getattr(fn, "power", 1.0) < 0 for fn in basis):
        bd0 = inverse_moment_diagnostic(xi)
    ratio = g / g10 if g10 > 0 else math.inf
    stable = (not spectral.infinite and spectral.condition_number <= KAPPA_LIMIT
              and abs(ratio - 1.0) <= TAU_SENSITIVITY and g > 0)
    return CorrelantReport(basis, F, b, g, g10, spectral, tau_used, bd0, stable)


@dataclass(frozen=True)
class SchurCheck:
    g_values: tuple[float, ...]
    passed: bool
    tol: float


def schur_monotonicity_check(residuals, nested: Sequence[Sequence], tol: float = 1e-6,
                             tau: float | None = None) -> SchurCheck:
    """``g`` along nested bases, which must be non-increasing.

    Every basis is regularised with the same ``tau`` (default: that of the
    largest basis) so the comparison is between principal submatrices.
    """
    nested = [tuple(b) for b in nested]
    for small, big in zip(nested, nested[1:]):
        if not set(small) <= set(big):
            raise ValueError("each basis must contain the previous one")
    if tau is None:
        tau = correlant_report(residuals, nested[-1]).tau_used
    reports = []
    for b in nested:
        rep = correlant_report(residuals, b)
        if not rep.stable:
            raise UnstableBasis(f"basis of size {len(b)} is unstable; check skipped")
        reports.append(correlant_report(residuals, b, tau))
    g = tuple(r.g_hat for r in reports)
    passed = all(later <= earlier + tol for earlier, later in zip(g, g[1:]))
    return SchurCheck(g, passed, tol)
