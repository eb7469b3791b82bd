"""BIC sweeps over candidate FP blocks and frequentist model averaging."""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .basis import EnumerationMode, FpBlock, Track, build_design, enumerate_blocks, shift_domain
from .errors import (
    AllCandidatesFailed,
    FpError,
    InsufficientCandidates,
    NonPositiveCovariate,
    PerfectFit,
)
from .estimators import DEFAULT_CONFIG, Estimator, FitResult, SolverConfig, fit, predict_mean
from .estimators import prediction_variance

log = logging.getLogger(__name__)

SINGLE_BEST_DELTA = 6.0


class SingleBestRule(str, enum.Enum):
    SINGLE_BEST_OK = "single_best_ok"
    RECOMMEND_FMA = "recommend_fma"


@dataclass(frozen=True)
class Candidate:
    block: FpBlock
    fit: FitResult
    bic: float
    perfect_fit: bool = False


@dataclass(frozen=True)
class SelectionResult:
    candidates: tuple[Candidate, ...]
    ranking: tuple[int, ...]
    best: int
    delta_bic_runner_up: float
    n: int
    estimator: Estimator
    failures: tuple[tuple[str, str], ...] = field(default=())

    @property
    def best_fit(self) -> FitResult:
        return self.candidates[self.best].fit

    def top(self, j: int) -> list[Candidate]:
        return [self.candidates[i] for i in self.ranking[:j]]

    def to_dict(self) -> dict:
        best_bic = self.candidates[self.best].bic
        rows = []
        for rank, i in enumerate(self.ranking, start=1):
            c = self.candidates[i]
            rows.append({
                "rank": rank,
                "block": c.block.label,
                "bic": _finite_or_none(c.bic),
                "delta_bic": _finite_or_none(c.bic - best_bic) if math.isfinite(best_bic) else None,
                "k": int(c.fit.k),
                "rss": float(c.fit.rss),
                "converged": bool(c.fit.converged),
                "iterations": int(c.fit.iterations),
                "gamma3": float(c.fit.cumulants.gamma3),
                "gamma4": float(c.fit.cumulants.gamma4),
                "g2": float(c.fit.cumulants.g2),
                "perfect_fit": bool(c.perfect_fit),
            })
        return {
            "estimator": self.estimator.value,
            "n": int(self.n),
            "best": self.candidates[self.best].block.label,
            "delta_bic_runner_up": _finite_or_none(self.delta_bic_runner_up),
            "candidates": rows,
            "failures": [{"block": b, "reason": r} for b, r in self.failures],
        }


@dataclass(frozen=True)
class FmaResult:
    weights: np.ndarray
    theta_fma: float
    var_fma: float
    ci95: tuple[float, float]
    blocks: tuple[str, ...]
    thetas: np.ndarray
    variances: np.ndarray

    @property
    def se(self) -> float:
        return math.sqrt(self.var_fma)

    def to_dict(self) -> dict:
        return {
            "blocks": list(self.blocks),
            "weights": [float(w) for w in self.weights],
            "thetas": [float(t) for t in self.thetas],
            "variances": [float(v) for v in self.variances],
            "theta_fma": float(self.theta_fma),
            "var_fma": float(self.var_fma),
            "ci95": [float(self.ci95[0]), float(self.ci95[1])],
        }


def _finite_or_none(v: float):
    return float(v) if math.isfinite(v) else None


def bic(fit: FitResult, n: int | None = None, y=None) -> float:
    """``n log(RSS/n) + k log n`` with ``k`` counting every coefficient.

    Raises ``PerfectFit`` when ``RSS <= 1e-12 * sum(y^2)`` (needs ``y``) or RSS
    is exactly zero.
    """
    n = fit.n if n is None else int(n)
    rss = float(fit.rss)
    if y is not None:
        yy = float(np.dot(np.asarray(y, float), np.asarray(y, float)))
        if rss <= 1e-12 * yy:
            raise PerfectFit("RSS is numerically zero")
    if not rss > 0:
        raise PerfectFit("RSS is zero")
    return n * math.log(rss / n) + fit.k * math.log(n)


def _prepare_x(x, offset):
    """Apply the domain shift: ``None`` (x must be positive), ``"auto"`` or a number."""
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("x has non-finite values")
    if offset is None:
        if np.any(x <= 0):
            raise NonPositiveCovariate("x has values <= 0; pass an offset or 'auto' (see shift_domain)")
        return x, 0.0
    if offset == "auto":
        return shift_domain(x)
    return shift_domain(x, float(offset))


def sweep(
    x,
    y,
    covariates=None,
    track: "Track | str" = Track.POSITIVE,
    mode: "EnumerationMode | str" = EnumerationMode.SUBSETS,
    estimator: "Estimator | str" = Estimator.PMM,
    config: SolverConfig = DEFAULT_CONFIG,
    *,
    max_terms: int = 4,
    blocks: Sequence[FpBlock] | None = None,
    offset: float | str | None = None,
    covariate_labels: Sequence[str] | None = None,
    x_name: str = "x",
    threads: int = 1,
) -> SelectionResult:
    """Fit every candidate block with one estimator and rank the fits by BIC.

    The candidate list depends only on ``track``/``mode``/``max_terms`` (or an
    explicit ``blocks`` list), never on the estimator. Failed fits are
    dropped and listed in ``failures``.
    """
    xs, applied = _prepare_x(x, offset)
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError("y has non-finite values")
    est = Estimator.parse(estimator)
    if blocks is None:
        blocks = enumerate_blocks(track, mode, max_terms)

    def run(block: FpBlock):
        try:
            D = build_design(xs, block, covariates, offset=applied,
                             covariate_labels=covariate_labels, x_name=x_name)
            f = fit(D, y, est, config)
        except FpError as exc:
            return block, None, f"{type(exc).__name__}: {exc}"
        if not np.all(np.isfinite(f.beta)):
            return block, None, "non-finite coefficients"
        return block, f, None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, blocks))
    else:
        outcomes = [run(b) for b in blocks]

    candidates: list[Candidate] = []
    failures: list[tuple[str, str]] = []
    for block, f, reason in outcomes:
        if f is None:
            log.info("candidate %s failed: %s", block.label, reason)
            failures.append((block.label, reason))
            continue
        try:
            candidates.append(Candidate(block, f, bic(f, y.size, y)))
        except PerfectFit:
            candidates.append(Candidate(block, f, -math.inf, True))
    if not candidates:
        raise AllCandidatesFailed("no candidate block could be fitted")
    bics = np.array([c.bic for c in candidates])
    ranking = tuple(int(i) for i in np.argsort(bics, kind="stable"))
    delta = math.inf
    if len(ranking) > 1:
        lo, hi = bics[ranking[0]], bics[ranking[1]]
        delta = 0.0 if lo == hi else float(hi - lo)
    return SelectionResult(tuple(candidates), ranking, ranking[0], delta, y.size, est,
                           tuple(failures))


def akaike_weights(bics) -> np.ndarray:
    """Burnham-Anderson weights ``exp(-dBIC/2)``, normalised."""
    b = np.asarray(bics, dtype=float)
    d = b - b.min()
    w = np.exp(-0.5 * d)
    return w / w.sum()


def fma(
    selection: SelectionResult,
    estimand: Callable[[FitResult], tuple[float, float]],
    top_j: int = 5,
) -> FmaResult:
    """Average a scalar estimand over the ``top_j`` candidates by BIC.

    ``Var = sum w_j [Var_j + (theta_j - theta_fma)^2]`` and the interval is
    ``theta_fma +/- 1.96 sqrt(Var)``.
    """
    if top_j < 1 or top_j > len(selection.candidates):
        raise InsufficientCandidates(
            f"top_j={top_j} but only {len(selection.candidates)} candidates succeeded")
    chosen = selection.top(top_j)
    if getattr(estimand, "column_specific", False):
        cols = {c.fit.column_labels for c in chosen}
        if len(cols) > 1:
            raise ValueError("coefficient-level averaging needs identical columns; "
                             "use a prediction estimand")
    bics = np.array([c.bic for c in chosen])
    if np.isneginf(bics).any():
        bics = np.where(np.isneginf(bics), 0.0, math.inf)
    w = akaike_weights(bics)
    vals = np.array([estimand(c.fit) for c in chosen], dtype=float)
    theta, var = vals[:, 0], vals[:, 1]
    t = float(w @ theta)
    v = float(w @ (var + (theta - t) ** 2))
    half = 1.96 * math.sqrt(v)
    return FmaResult(w, t, v, (t - half, t + half), tuple(c.block.label for c in chosen),
                     theta, var)


def prediction_estimand(x_star: float, covariates=None) -> Callable[[FitResult], tuple[float, float]]:
    """Estimand ``mu(x*)`` with its asymptotic variance, comparable across blocks."""
    def estimand(f: FitResult) -> tuple[float, float]:
        return predict_mean(f, x_star, covariates), prediction_variance(f, x_star, covariates)
    return estimand


def coefficient_estimand(label: str) -> Callable[[FitResult], tuple[float, float]]:
    def estimand(f: FitResult) -> tuple[float, float]:
        j = f.column_labels.index(label)
        return float(f.beta[j]), float(f.covariance[j, j])
    estimand.column_specific = True
    return estimand


def report_single_best_rule(selection: SelectionResult) -> SingleBestRule:
    """Single-best inference is acceptable only when the runner-up trails by > 6 BIC."""
    if len(selection.candidates) < 2:
        raise InsufficientCandidates("the rule needs at least two candidates")
    if selection.delta_bic_runner_up > SINGLE_BEST_DELTA:
        return SingleBestRule.SINGLE_BEST_OK
    return SingleBestRule.RECOMMEND_FMA
