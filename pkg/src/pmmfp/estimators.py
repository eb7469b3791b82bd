"""Coefficient estimators for one FP design: OLS, PMM2 and Huber."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .basis import DesignMatrix, FpBlock, fp_columns
from .errors import (
    DegenerateVariance,
    NonFiniteScore,
    NonPositiveInput,
    SingularSystem,
    TooFewObservations,
)
from .linalg import inverse_gram, qr_least_squares, symmetric_solve
from .moments import ResidualCumulants, sample_cumulants


class Estimator(str, enum.Enum):
    OLS = "ols"
    PMM = "pmm"
    HUBER = "huber"

    @classmethod
    def parse(cls, value: "str | Estimator") -> "Estimator":
        if isinstance(value, Estimator):
            return value
        key = str(value).strip().lower().replace("-fp", "").replace("_fp", "")
        aliases = {"ols": cls.OLS, "pmm": cls.PMM, "pmm2": cls.PMM, "huber": cls.HUBER}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown estimator {value!r}") from None


@dataclass(frozen=True)
class SolverConfig:
    """Settings for the damped Newton iteration (and Huber IRLS).

    ``reestimate_cumulants`` refreshes ``a`` and ``sigma`` from the current
    residuals at every iteration instead of freezing them at the OLS start.
    ``se_kind`` selects the model-based ``g2 sigma^2 (X'X)^-1`` covariance or a
    sandwich estimate.
    """

    tol: float = 1e-8
    max_iter: int = 50
    initial_damping: float = 1.0
    min_damping: float = 1.0 / 64
    ridge: float = 0.0
    reestimate_cumulants: bool = False
    se_kind: str = "model"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 1 <= self.max_iter <= 1000:
            raise ValueError("max_iter must be in 1..1000")
        if not 0 < self.min_damping <= self.initial_damping <= 1:
            raise ValueError("need 0 < min_damping <= initial_damping <= 1")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        if self.se_kind not in ("model", "sandwich"):
            raise ValueError("se_kind must be 'model' or 'sandwich'")


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class FitResult:
    estimator: Estimator
    block: FpBlock
    beta: np.ndarray
    residuals: np.ndarray
    cumulants: ResidualCumulants
    se_asymptotic: np.ndarray
    covariance: np.ndarray
    rss: float
    converged: bool
    iterations: int
    used_ridge: float
    applied_offset: float
    column_labels: tuple[str, ...]
    n_covariates: int = 0
    flags: tuple[str, ...] = field(default=())

    @property
    def n(self) -> int:
        return self.residuals.size

    @property
    def k(self) -> int:
        return self.beta.size

    @property
    def g2(self) -> float:
        return self.cumulants.g2

    def coef(self, label: str) -> float:
        return float(self.beta[self.column_labels.index(label)])

    def design_row(self, x_star: float, covariates=None) -> np.ndarray:
        x = float(x_star) + self.applied_offset
        if not x > 0:
            raise NonPositiveInput(f"x* = {x_star} is outside the shifted positive domain")
        parts = [np.ones(1), fp_columns(np.array([x]), self.block)[0]]
        if self.n_covariates:
            if covariates is None:
                raise ValueError("this fit has covariates; pass their values for prediction")
            z = np.atleast_1d(np.asarray(covariates, dtype=float))
            if z.size != self.n_covariates:
                raise ValueError("covariate vector has the wrong length")
            parts.append(z)
        return np.concatenate(parts)

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator.value,
            "block": self.block.label,
            "columns": list(self.column_labels),
            "beta": [float(b) for b in self.beta],
            "se_asymptotic": [float(s) for s in self.se_asymptotic],
            "rss": float(self.rss),
            "n": int(self.n),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "used_ridge": float(self.used_ridge),
            "applied_offset": float(self.applied_offset),
            "cumulants": self.cumulants.to_dict(),
            "flags": list(self.flags),
        }


def _unpack(X, y):
    if isinstance(X, DesignMatrix):
        meta = (X.block, X.offset, X.column_labels, X.n_covariates)
        values = X.values
    else:
        values = np.asarray(X, dtype=float)
        meta = (None, 0.0, tuple(f"c{j}" for j in range(values.shape[1])), 0)
    y = np.asarray(y, dtype=float).ravel()
    if values.shape[0] != y.size:
        raise ValueError("X and y have different row counts")
    if not values.shape[0] > values.shape[1]:
        raise TooFewObservations("need more observations than columns")
    return values, y, meta


def _cumulants_or_placeholder(e: np.ndarray, y: np.ndarray) -> ResidualCumulants:
    scale = float(np.sqrt(np.mean(y * y))) or 1.0
    try:
        return sample_cumulants(e, reference_scale=scale)
    except (DegenerateVariance, TooFewObservations):
        return ResidualCumulants.degenerate_placeholder(float(np.mean(e * e)))


def fit_ols(X, y) -> FitResult:
    """Least-squares fit with ``se_j = sqrt(s^2 [(X'X)^-1]_jj)``, ``s^2 = RSS/(n-k)``."""
    values, y, (block, offset, labels, ncov) = _unpack(X, y)
    beta, R = qr_least_squares(values, y)
    e = y - values @ beta
    rss = float(e @ e)
    n, k = values.shape
    cov = rss / (n - k) * inverse_gram(R=R)
    cum = _cumulants_or_placeholder(e, y)
    flags = ("degenerate_cumulants",) if cum.degenerate else ()
    return FitResult(Estimator.OLS, block, beta, e, cum, np.sqrt(np.diag(cov)), cov, rss,
                     True, 0, 0.0, offset, labels, ncov, flags)


def psi2(u, a: float) -> np.ndarray:
    """Second-order PMM score ``u - a (u^2 - 1)``."""
    u = np.asarray(u, dtype=float)
    return u - a * (u * u - 1.0)


def pmm2_score(values: np.ndarray, y: np.ndarray, beta: np.ndarray, sigma: float, a: float):
    """Return ``(U, H_newton, u)`` for the PMM2 estimating equation at ``beta``.

    ``U = X' psi2(e/sigma) / sigma`` and ``H = X' diag(1 - 2 a u) X / sigma^2``,
    so that ``H = -dU/dbeta``.
    """
    u = (y - values @ beta) / sigma
    if not np.all(np.isfinite(u)):
        raise NonFiniteScore("standardised residuals overflowed")
    U = values.T @ psi2(u, a) / sigma
    w = 1.0 - 2.0 * a * u
    H = (values.T * w) @ values / (sigma * sigma)
    return U, H, u


def fit_pmm2(X, y, config: SolverConfig = DEFAULT_CONFIG) -> FitResult:
    """PMM2 fit started at OLS, solved by damped Newton steps.

    The cumulants ``a`` and ``sigma`` come from the OLS residuals and stay
    fixed unless ``config.reestimate_cumulants``. A non positive-definite
    Newton matrix falls back to the Fisher-scoring matrix ``X'X / sigma^2``.
    """
    values, y, meta = _unpack(X, y)
    block, offset, labels, ncov = meta
    ols = fit_ols(X, y)
    cum = ols.cumulants
    if cum.degenerate:
        return FitResult(Estimator.PMM, block, ols.beta, ols.residuals, cum, ols.se_asymptotic,
                         ols.covariance, ols.rss, True, 0, 0.0, offset, labels, ncov,
                         ("degenerate_cumulants",))
    n, k = values.shape
    sigma = float(np.sqrt(cum.sigma2))
    a = cum.a
    fisher = values.T @ values
    beta = ols.beta.copy()
    U, H, u = pmm2_score(values, y, beta, sigma, a)
    norm = float(np.linalg.norm(U))
    converged = False
    used_ridge = float(config.ridge)
    fisher_steps = 0
    it = 0
    for it in range(1, config.max_iter + 1):
        try:
            step, r = symmetric_solve(H, U, config.ridge)
        except SingularSystem:
            step, r = symmetric_solve(fisher / (sigma * sigma), U, config.ridge)
            fisher_steps += 1
        used_ridge = max(used_ridge, r)
        lam = config.initial_damping
        while True:
            cand = beta + lam * step
            Uc, Hc, uc = pmm2_score(values, y, cand, sigma, a)
            nc = float(np.linalg.norm(Uc))
            if nc <= norm or lam / 2 < config.min_damping:
                break
            lam /= 2
        delta = float(np.max(np.abs(cand - beta)))
        beta, U, H, u, norm = cand, Uc, Hc, uc, nc
        if config.reestimate_cumulants:
            fresh = _cumulants_or_placeholder(y - values @ beta, y)
            if not fresh.degenerate:
                sigma, a = float(np.sqrt(fresh.sigma2)), fresh.a
                U, H, u = pmm2_score(values, y, beta, sigma, a)
                norm = float(np.linalg.norm(U))
        if delta < config.tol:
            converged = True
            break
    e = y - values @ beta
    xtx_inv = ols.covariance / (ols.rss / (n - k))
    if config.se_kind == "model":
        cov = cum.g2 * (ols.rss / (n - k)) * xtx_inv
    else:
        uu = e / sigma
        w = 1.0 - 2.0 * a * uu
        bread = np.linalg.inv((values.T * w) @ values)
        meat = (values.T * psi2(uu, a) ** 2) @ values
        cov = sigma * sigma * bread @ meat @ bread.T
    flags = ["degraded_cumulants"] if cum.degraded else []
    if not converged:
        flags.append("not_converged")
    if fisher_steps:
        flags.append(f"fisher_fallback_steps={fisher_steps}")
    return FitResult(Estimator.PMM, block, beta, e, cum, np.sqrt(np.diag(cov)), cov,
                     float(e @ e), converged, it, used_ridge, offset, labels, ncov, tuple(flags))


def _mad_scale(r: np.ndarray) -> float:
    med = np.median(r)
    return float(np.median(np.abs(r - med)) / 0.6744897501960817)


def fit_huber(X, y, tuning: float = 1.345, config: SolverConfig = DEFAULT_CONFIG) -> FitResult:
    """Huber M-estimate by IRLS, with the MAD scale refreshed every iteration."""
    if not tuning > 0:
        raise ValueError("tuning must be positive")
    values, y, meta = _unpack(X, y)
    block, offset, labels, ncov = meta
    n, k = values.shape
    beta, R = qr_least_squares(values, y)
    converged = False
    it = 0
    s = _mad_scale(y - values @ beta)
    for it in range(1, config.max_iter + 1):
        r = y - values @ beta
        s = _mad_scale(r)
        if not s > 0:
            converged = True
            break
        ar = np.abs(r) / s
        w = np.where(ar <= tuning, 1.0, tuning / np.maximum(ar, tuning))
        sw = np.sqrt(w)
        new, _ = qr_least_squares(values * sw[:, None], y * sw)
        delta = float(np.max(np.abs(new - beta)))
        beta = new
        if delta < config.tol:
            converged = True
            break
    e = y - values @ beta
    s = _mad_scale(e) or float(np.sqrt(np.mean(e * e)))
    z = e / s if s > 0 else np.zeros_like(e)
    psi = np.clip(z, -tuning, tuning)
    dpsi = np.mean(np.abs(z) <= tuning)
    xtx_inv = inverse_gram(R=np.linalg.qr(values, mode="r"))
    if dpsi > 0:
        cov = s * s * (psi @ psi / (n - k)) / dpsi**2 * xtx_inv
    else:
        cov = np.full((k, k), np.nan)
    cum = _cumulants_or_placeholder(e, y)
    flags = [] if converged else ["not_converged"]
    if cum.degenerate:
        flags.append("degenerate_cumulants")
    return FitResult(Estimator.HUBER, block, beta, e, cum, np.sqrt(np.diag(cov)), cov,
                     float(e @ e), converged, it, 0.0, offset, labels, ncov, tuple(flags))


def fit(X, y, estimator: "Estimator | str" = Estimator.PMM,
        config: SolverConfig = DEFAULT_CONFIG) -> FitResult:
    est = Estimator.parse(estimator)
    if est is Estimator.OLS:
        return fit_ols(X, y)
    if est is Estimator.PMM:
        return fit_pmm2(X, y, config)
    return fit_huber(X, y, config=config)


def predict_mean(fit: FitResult, x_star: float, covariates=None) -> float:
    """Fitted FP surface at ``x_star`` (original units; the fit's offset is applied)."""
    return float(fit.design_row(x_star, covariates) @ fit.beta)


def prediction_variance(fit: FitResult, x_star: float, covariates=None) -> float:
    row = fit.design_row(x_star, covariates)
    return float(row @ fit.covariance @ row)
