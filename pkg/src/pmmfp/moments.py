"""Residual cumulants and the closed-form PMM2 variance-reduction factor."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateVariance, InvalidKurtosis, TooFewObservations
from .laws import ErrorLaw

MIN_OBS = 8
G2_FLOOR = 1e-6


@dataclass(frozen=True)
class ResidualCumulants:
    """Variance, skewness and excess kurtosis with the derived PMM2 constants.

    ``a = gamma3 / (2 + gamma4)`` is the score coefficient and
    ``g2 = 1 - gamma3**2 / (2 + gamma4)`` the variance-reduction factor.
    ``degraded`` marks a clamped ``g2``; ``degenerate`` marks a residual vector
    whose cumulants could not be estimated (perfect fit or too few points), in
    which case ``a = 0`` and ``g2 = 1`` so downstream fits revert to OLS.
    """

    sigma2: float
    gamma3: float
    gamma4: float
    a: float
    g2: float
    degraded: bool = False
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_shape(cls, sigma2: float, gamma3: float, gamma4: float) -> "ResidualCumulants":
        g2 = g2_closed_form(gamma3, gamma4)
        degraded = False
        if g2 < G2_FLOOR:
            g2, degraded = G2_FLOOR, True
        return cls(float(sigma2), float(gamma3), float(gamma4),
                   float(gamma3 / (2 + gamma4)), float(g2), degraded)

    @classmethod
    def degenerate_placeholder(cls, sigma2: float = 0.0) -> "ResidualCumulants":
        return cls(float(sigma2), 0.0, 0.0, 0.0, 1.0, False, True)


def g2_closed_form(gamma3: float, gamma4: float) -> float:
    """``1 - gamma3^2 / (2 + gamma4)``."""
    denom = 2.0 + gamma4
    if not denom > 0:
        raise InvalidKurtosis(f"2 + gamma4 = {denom} must be positive")
    return 1.0 - gamma3 * gamma3 / denom


def sample_cumulants(residuals, reference_scale: float | None = None) -> ResidualCumulants:
    """Plug-in cumulants with ``1/n`` central moments.

    ``sigma2`` is ``mean(e**2)`` (residuals are assumed centred by the fit);
    skewness and kurtosis use moments about the sample mean. The variance is
    treated as zero when ``m2 <= (1e-10 * reference_scale)**2``, or exactly zero
    if no reference scale is given. Residuals with ``2 + gamma4 <= 0`` (two-point
    samples) get ``a = 0``, ``g2 = 1`` and the degraded flag.
    """
    e = np.asarray(residuals, dtype=float).ravel()
    n = e.size
    if n < MIN_OBS:
        raise TooFewObservations(f"need at least {MIN_OBS} residuals, got {n}")
    d = e - e.mean()
    d2 = d * d
    m2 = d2.mean()
    floor = 0.0 if reference_scale is None else (1e-10 * reference_scale) ** 2
    if not m2 > floor:
        raise DegenerateVariance("residual variance is zero within tolerance")
    m3 = (d2 * d).mean()
    m4 = (d2 * d2).mean()
    gamma3 = m3 / m2**1.5
    gamma4 = m4 / (m2 * m2) - 3.0
    sigma2 = float((e * e).mean())
    if 2.0 + gamma4 <= 1e-12:
        # Two-point residuals sit on the moment boundary where the score
        # coefficient is undefined; fall back to the OLS score.
        return ResidualCumulants(sigma2, float(gamma3), float(gamma4), 0.0, 1.0, True)
    return ResidualCumulants.from_shape(sigma2, gamma3, gamma4)


def analytic_cumulants(law: "ErrorLaw | str") -> ResidualCumulants:
    """Exact cumulants of a supported error law."""
    law = ErrorLaw.parse(law)
    var, g3, g4 = law.moments()
    return ResidualCumulants.from_shape(var, g3, g4)
