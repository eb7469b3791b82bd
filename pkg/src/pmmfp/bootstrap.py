"""Bootstrap standard errors, percentile intervals and selection stability."""

from __future__ import annotations

import csv
import enum
import io
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .basis import EnumerationMode, FpBlock, Track, build_design
from .errors import FpError, TooManyFailures
from .estimators import DEFAULT_CONFIG, Estimator, SolverConfig, fit, fit_ols
from .selection import _prepare_x, sweep
from .streams import TAG_BOOTSTRAP, TAG_SELECTION, parallel_map, stream

MIN_REPLICATES = 100


class ResamplingUnit(str, enum.Enum):
    PAIRS = "pairs"
    RESIDUAL = "residual"


@dataclass(frozen=True)
class BootstrapResult:
    """Replicate coefficient vectors per estimator and their summaries.

    ``replicates[est]`` has one row per successful replicate. ``variance_ratio``
    is ``Var_boot(PMM) / Var_boot(OLS)`` per coefficient, or ``None`` unless
    both estimators ran.
    """

    block: FpBlock
    column_labels: tuple[str, ...]
    estimators: tuple[Estimator, ...]
    point: dict
    se_asymptotic: dict
    replicates: dict
    se_boot: dict
    ci95_percentile: dict
    variance_ratio: np.ndarray | None
    n_failed: int
    B: int
    seed: int
    unit: ResamplingUnit = ResamplingUnit.PAIRS

    @property
    def n_ok(self) -> int:
        return self.B - self.n_failed

    def to_dict(self, include_replicates: bool = False) -> dict:
        rows = []
        for est in self.estimators:
            for j, lab in enumerate(self.column_labels):
                rows.append({
                    "estimator": est.value,
                    "term": lab,
                    "beta": float(self.point[est][j]),
                    "se_asymptotic": float(self.se_asymptotic[est][j]),
                    "se_boot": float(self.se_boot[est][j]),
                    "ci95_lower": float(self.ci95_percentile[est][0, j]),
                    "ci95_upper": float(self.ci95_percentile[est][1, j]),
                })
        out = {
            "block": self.block.label,
            "B": int(self.B),
            "n_failed": int(self.n_failed),
            "seed": int(self.seed),
            "unit": self.unit.value,
            "coefficients": rows,
            "variance_ratio": None if self.variance_ratio is None else {
                lab: float(v) for lab, v in zip(self.column_labels, self.variance_ratio)},
        }
        if include_replicates:
            out["replicates"] = {e.value: self.replicates[e].tolist() for e in self.estimators}
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["estimator", "term", "beta", "se_asymptotic", "se_boot", "ci95_lower",
                    "ci95_upper"])
        for r in self.to_dict()["coefficients"]:
            w.writerow([r["estimator"], r["term"], repr(r["beta"]), repr(r["se_asymptotic"]),
                        repr(r["se_boot"]), repr(r["ci95_lower"]), repr(r["ci95_upper"])])
        return buf.getvalue()


@dataclass(frozen=True)
class SelectionFrequencyTable:
    """``(block label, count, frequency)`` rows, most frequent first.

    Frequencies are normalised by the number of successful replicates.
    """

    rows: tuple[tuple[str, int, float], ...]
    B: int
    n_failed: int
    seed: int

    def top(self, k: int = 5):
        return self.rows[:k]

    def to_dict(self) -> dict:
        return {
            "B": int(self.B),
            "n_failed": int(self.n_failed),
            "seed": int(self.seed),
            "rows": [{"block": b, "count": int(c), "frequency": float(f)} for b, c, f in self.rows],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "block", "count", "frequency"])
        for i, (b, c, f) in enumerate(self.rows, start=1):
            w.writerow([i, b, c, repr(float(f))])
        return buf.getvalue()


def percentile_interval(values, level: float = 0.95) -> np.ndarray:
    """Lower and upper quantiles by linear interpolation (type 7), per column."""
    alpha = (1.0 - level) / 2.0
    return np.quantile(np.asarray(values, dtype=float), [alpha, 1.0 - alpha], axis=0,
                       method="linear")


def _check_B(B: int):
    if int(B) != B or B < MIN_REPLICATES:
        raise ValueError(f"B must be an integer >= {MIN_REPLICATES}, got {B}")


def _check_failures(n_failed: int, B: int):
    if n_failed > B / 10:
        raise TooManyFailures(f"{n_failed} of {B} bootstrap replicates failed")


def resample_indices(seed: int, replicate: int, n: int, tag: int = TAG_BOOTSTRAP) -> np.ndarray:
    return stream(seed, tag, replicate).integers(0, n, size=n)


def bootstrap_fixed_model(
    x,
    y,
    covariates=None,
    block: "FpBlock | str" = "{1}",
    estimators: Iterable["Estimator | str"] = (Estimator.OLS, Estimator.PMM),
    B: int = 2000,
    seed: int = 0,
    *,
    threads: int | None = 1,
    offset: float | str | None = None,
    config: SolverConfig = DEFAULT_CONFIG,
    unit: "ResamplingUnit | str" = ResamplingUnit.PAIRS,
    covariate_labels: Sequence[str] | None = None,
    x_name: str = "x",
) -> BootstrapResult:
    """Refit a fixed FP block on bootstrap resamples.

    Every requested estimator sees the same resampled rows within a replicate,
    which is what makes the variance ratio meaningful. A replicate in which
    any estimator fails is dropped for all of them and counted in
    ``n_failed``. ``unit="residual"`` resamples OLS residuals onto the OLS fit
    instead of resampling rows.
    """
    _check_B(B)
    unit = ResamplingUnit(unit)
    if isinstance(block, str):
        block = FpBlock.parse(block)
    ests = tuple(dict.fromkeys(Estimator.parse(e) for e in estimators))
    if not ests:
        raise ValueError("at least one estimator is required")
    xs, applied = _prepare_x(x, offset)
    y = np.asarray(y, dtype=float).ravel()
    D = build_design(xs, block, covariates, offset=applied, covariate_labels=covariate_labels,
                     x_name=x_name)
    X = D.values
    n = X.shape[0]
    full = {e: fit(D, y, e, config) for e in ests}
    base = fit_ols(D, y)

    def one(r: int):
        idx = resample_indices(seed, r, n)
        if unit is ResamplingUnit.PAIRS:
            Xr, yr = X[idx], y[idx]
        else:
            Xr, yr = X, X @ base.beta + base.residuals[idx]
        out = []
        try:
            for e in ests:
                f = fit(Xr, yr, e, config)
                if not np.all(np.isfinite(f.beta)):
                    return None
                out.append(f.beta)
        except FpError:
            return None
        return out

    results = parallel_map(one, range(int(B)), threads)
    ok = [r for r in results if r is not None]
    n_failed = int(B) - len(ok)
    _check_failures(n_failed, B)
    reps = {e: np.array([r[i] for r in ok]) for i, e in enumerate(ests)}
    se = {e: reps[e].std(axis=0, ddof=1) for e in ests}
    ci = {e: percentile_interval(reps[e]) for e in ests}
    ratio = None
    if Estimator.PMM in ests and Estimator.OLS in ests:
        ratio = reps[Estimator.PMM].var(axis=0, ddof=1) / reps[Estimator.OLS].var(axis=0, ddof=1)
    return BootstrapResult(
        block, D.column_labels, ests,
        {e: full[e].beta for e in ests}, {e: full[e].se_asymptotic for e in ests},
        reps, se, ci, ratio, n_failed, int(B), int(seed), unit)


def bootstrap_selection_stability(
    x,
    y,
    covariates=None,
    track: "Track | str" = Track.POSITIVE,
    mode: "EnumerationMode | str" = EnumerationMode.SUBSETS,
    B: int = 2000,
    seed: int = 0,
    *,
    estimator: "Estimator | str" = Estimator.OLS,
    max_terms: int = 4,
    threads: int | None = 1,
    offset: float | str | None = None,
    config: SolverConfig = DEFAULT_CONFIG,
) -> SelectionFrequencyTable:
    """How often each block wins the BIC sweep across pairs-bootstrap resamples."""
    _check_B(B)
    xs, applied = _prepare_x(x, offset)
    y = np.asarray(y, dtype=float).ravel()
    cov = None if covariates is None else np.asarray(covariates, dtype=float)
    n = y.size

    def one(r: int):
        idx = resample_indices(seed, r, n, TAG_SELECTION)
        try:
            sel = sweep(xs[idx], y[idx], None if cov is None else cov[idx], track, mode,
                        estimator, config, max_terms=max_terms)
        except FpError:
            return None
        return sel.candidates[sel.best].block.label

    winners = [w for w in parallel_map(one, range(int(B)), threads) if w is not None]
    n_failed = int(B) - len(winners)
    _check_failures(n_failed, B)
    return frequency_table(winners, int(B), n_failed, int(seed))


def frequency_table(winners: Sequence[str], B: int, n_failed: int = 0,
                    seed: int = 0) -> SelectionFrequencyTable:
    counts = Counter(winners)
    total = len(winners)
    rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return SelectionFrequencyTable(
        tuple((b, c, c / total if total else math.nan) for b, c in rows), B, n_failed, seed)
