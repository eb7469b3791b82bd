"""Monte Carlo experiments comparing OLS-FP, PMM-FP and Huber-FP.

Each replicate draws its data from a Philox stream keyed by
``(seed, n, replicate)``, and summaries are computed from the collected
replicate vectors, so results are identical for any thread count.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .basis import EnumerationMode, FpBlock, Track, build_design, enumerate_blocks, fp_columns
from .errors import FpError
from .estimators import DEFAULT_CONFIG, Estimator, SolverConfig, fit, predict_mean
from .estimators import prediction_variance
from .laws import ErrorLaw
from .moments import analytic_cumulants
from .selection import fma, prediction_estimand, sweep
from .streams import TAG_MONTE_CARLO, parallel_map, stream

Z95 = 1.959963984540054


@dataclass(frozen=True)
class McDesign:
    """One Monte Carlo design: ``y = FP(x; true_block, true_beta) + error``.

    ``x`` is drawn from ``Uniform(*x_range)``; errors are centred by the law's
    exact mean but not rescaled.
    """

    n_grid: tuple[int, ...] = (100, 200, 500)
    M: int = 1000
    law: ErrorLaw = field(default_factory=lambda: ErrorLaw("gaussian"))
    true_block: FpBlock = field(default_factory=lambda: FpBlock.parse("{0.5}"))
    true_beta: tuple[float, ...] = (1.0, 2.0)
    x_range: tuple[float, float] = (0.5, 5.0)
    x_star: float = 2.0
    seed: int = 20240601

    def __post_init__(self):
        law = ErrorLaw.parse(self.law) if isinstance(self.law, str) else self.law
        block = FpBlock.parse(self.true_block) if isinstance(self.true_block, str) else self.true_block
        object.__setattr__(self, "law", law)
        object.__setattr__(self, "true_block", block)
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "true_beta", tuple(float(b) for b in self.true_beta))
        object.__setattr__(self, "x_range", tuple(float(v) for v in self.x_range))
        if self.M < 50:
            raise ValueError("M must be at least 50")
        if not self.n_grid or min(self.n_grid) < 30:
            raise ValueError("every n must be at least 30")
        if len(self.true_beta) != 1 + block.n_columns:
            raise ValueError("true_beta needs an intercept plus one value per FP column")
        lo, hi = self.x_range
        if not 0 < lo < hi:
            raise ValueError("x_range must satisfy 0 < lo < hi")
        if not lo <= self.x_star <= hi:
            raise ValueError("x_star must lie inside x_range")

    @property
    def mu_star(self) -> float:
        """True mean response at ``x_star``."""
        row = np.concatenate([[1.0], fp_columns(np.array([self.x_star]), self.true_block)[0]])
        return float(row @ np.array(self.true_beta))

    @property
    def true_slope(self) -> float:
        return self.true_beta[1]

    def to_dict(self) -> dict:
        return {
            "n_grid": list(self.n_grid), "M": self.M, "law": self.law.label,
            "true_block": self.true_block.label, "true_beta": list(self.true_beta),
            "x_range": list(self.x_range), "x_star": self.x_star, "seed": self.seed,
        }


def sample_dgp(design: McDesign, replicate: int, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Covariate and response for one replicate at sample size ``n``."""
    n = design.n_grid[0] if n is None else int(n)
    rng = stream(design.seed, TAG_MONTE_CARLO, n, replicate)
    x = rng.uniform(design.x_range[0], design.x_range[1], n)
    X = np.column_stack([np.ones(n), fp_columns(x, design.true_block)])
    y = X @ np.array(design.true_beta) + design.law.sample(rng, n)
    return x, y


def _iqr(v: np.ndarray) -> float:
    q1, q3 = np.quantile(v, [0.25, 0.75])
    return float(q3 - q1)


def robust_variance_ratio(est: np.ndarray, ref: np.ndarray) -> float:
    """``(IQR(est) / IQR(ref))^2`` over matched replicates."""
    return (_iqr(est) / _iqr(ref)) ** 2


@dataclass(frozen=True)
class EstimatorStats:
    bias: float
    var: float
    mse: float
    coverage: float
    mean_se: float

    @classmethod
    def from_replicates(cls, est: np.ndarray, se: np.ndarray, truth: float) -> "EstimatorStats":
        err = est - truth
        cover = np.abs(err) <= Z95 * se
        return cls(float(err.mean()), float(est.var(ddof=1)), float(np.mean(err * err)),
                   float(cover.mean()), float(se.mean()))


@dataclass(frozen=True)
class McCellSummary:
    """Matched-basis OLS vs PMM2 summary for one (law, n) cell."""

    law: str
    n: int
    M: int
    n_failed: int
    g2_theoretical: float | None
    g2_robust_hat: float
    variance_ratio: float
    slope_variance_reduction_pct: float
    coverage_ols: float
    coverage_pmm: float
    pred_eff_pmm: float
    slope: dict
    prediction: dict
    median_fit_time_ms: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _theoretical_g2(law: ErrorLaw) -> float | None:
    try:
        return analytic_cumulants(law).g2
    except FpError:
        return None


def _matched_replicate(design: McDesign, n: int, r: int, config: SolverConfig,
                       record_timings: bool):
    x, y = sample_dgp(design, r, n)
    D = build_design(x, design.true_block)
    out = {}
    try:
        for est in (Estimator.OLS, Estimator.PMM):
            t0 = time.perf_counter()
            f = fit(D, y, est, config)
            elapsed = time.perf_counter() - t0
            out[est] = (f.beta[1], f.se_asymptotic[1], predict_mean(f, design.x_star),
                        math.sqrt(prediction_variance(f, design.x_star)),
                        elapsed if record_timings else math.nan)
    except FpError:
        return None
    return out


def run_matched_basis_experiment(
    design: McDesign,
    *,
    config: SolverConfig = DEFAULT_CONFIG,
    threads: int | None = 1,
    record_timings: bool = False,
) -> list[McCellSummary]:
    """Fit OLS and PMM2 on the true block for every replicate, per ``n``.

    ``g2_robust_hat`` is the squared IQR ratio of the slope estimates and
    ``pred_eff_pmm`` the same ratio for ``mu(x*)``. Coverage uses
    ``beta +/- 1.96 se`` with the model-based standard errors. Timings are
    off by default because they are not reproducible.
    """
    cells = []
    g2_th = _theoretical_g2(design.law)
    for n in design.n_grid:
        reps = parallel_map(lambda r: _matched_replicate(design, n, r, config, record_timings),
                            range(design.M), threads)
        ok = [r for r in reps if r is not None]
        if len(ok) < 2:
            raise FpError(f"fewer than two successful replicates at n={n}")
        arr = {e: np.array([r[e] for r in ok]) for e in (Estimator.OLS, Estimator.PMM)}
        slope = {e.value: EstimatorStats.from_replicates(arr[e][:, 0], arr[e][:, 1],
                                                         design.true_slope) for e in arr}
        pred = {e.value: EstimatorStats.from_replicates(arr[e][:, 2], arr[e][:, 3],
                                                        design.mu_star) for e in arr}
        g2_hat = robust_variance_ratio(arr[Estimator.PMM][:, 0], arr[Estimator.OLS][:, 0])
        raw = slope["pmm"].var / slope["ols"].var
        timings = None
        if record_timings:
            timings = {e.value: float(np.median(arr[e][:, 4]) * 1e3) for e in arr}
        cells.append(McCellSummary(
            design.law.label, n, design.M, design.M - len(ok), g2_th, g2_hat, raw,
            100.0 * (1.0 - g2_hat), slope["ols"].coverage, slope["pmm"].coverage,
            robust_variance_ratio(arr[Estimator.PMM][:, 2], arr[Estimator.OLS][:, 2]),
            {k: asdict(v) for k, v in slope.items()}, {k: asdict(v) for k, v in pred.items()},
            timings))
    return cells


@dataclass(frozen=True)
class FmaCellSummary:
    """Estimates of ``mu(x*)`` for one (law, n, variant) cell."""

    law: str
    n: int
    variant: str
    M: int
    n_failed: int
    bias: float
    var: float
    mse: float
    coverage: float
    mean_se: float

    def to_dict(self) -> dict:
        return asdict(self)


def _fma_replicate(design, n, r, blocks, top_j_list, config):
    x, y = sample_dgp(design, r, n)
    est = prediction_estimand(design.x_star)
    out = {}
    try:
        for estimator in (Estimator.OLS, Estimator.PMM):
            sel = sweep(x, y, estimator=estimator, config=config, blocks=blocks)
            theta, var = est(sel.best_fit)
            out[f"{estimator.value}_single"] = (theta, math.sqrt(var))
            for j in top_j_list:
                res = fma(sel, est, j)
                out[f"{estimator.value}_fma_top{j}"] = (res.theta_fma, res.se)
    except FpError:
        return None
    return out


def run_fma_experiment(
    design: McDesign,
    top_j_list: Sequence[int] = (3, 5),
    *,
    track: "Track | str" = Track.POSITIVE,
    max_terms: int = 2,
    config: SolverConfig = DEFAULT_CONFIG,
    threads: int | None = 1,
) -> list[FmaCellSummary]:
    """Single-best BIC selection versus FMA over the top-J candidates.

    The default candidate set is every block of at most two distinct powers
    from the positive track (15 models). Target is the true ``mu(x*)``.
    """
    blocks = enumerate_blocks(track, EnumerationMode.SUBSETS, max_terms)
    top_j_list = tuple(int(j) for j in top_j_list)
    cells = []
    for n in design.n_grid:
        reps = parallel_map(lambda r: _fma_replicate(design, n, r, blocks, top_j_list, config),
                            range(design.M), threads)
        ok = [r for r in reps if r is not None]
        if len(ok) < 2:
            raise FpError(f"fewer than two successful replicates at n={n}")
        for variant in ok[0]:
            v = np.array([r[variant] for r in ok])
            s = EstimatorStats.from_replicates(v[:, 0], v[:, 1], design.mu_star)
            cells.append(FmaCellSummary(design.law.label, n, variant, design.M,
                                        design.M - len(ok), s.bias, s.var, s.mse,
                                        s.coverage, s.mean_se))
    return cells


@dataclass(frozen=True)
class AreRow:
    """Empirical slope-variance ratio of ``estimator`` to OLS, with a 95% CI.

    ``robust_are`` is the squared IQR ratio, reported for reference only.
    """

    law: str
    estimator: str
    n: int
    M: int
    n_failed: int
    are: float
    ci_lower: float
    ci_upper: float
    robust_are: float = math.nan

    def to_dict(self) -> dict:
        return asdict(self)


def variance_ratio_ci(est: np.ndarray, ref: np.ndarray) -> tuple[float, float, float]:
    """``Var(est)/Var(ref)`` for paired replicates with a delta-method CI.

    The interval is built on the log scale from the squared deviations, so
    the correlation between the paired estimators is accounted for.
    """
    a = (est - est.mean()) ** 2
    b = (ref - ref.mean()) ** 2
    ratio = float(est.var(ddof=1) / ref.var(ddof=1))
    m = a.size
    ma, mb = a.mean(), b.mean()
    c = np.cov(a, b, ddof=1)
    v = (c[0, 0] / ma**2 + c[1, 1] / mb**2 - 2 * c[0, 1] / (ma * mb)) / m
    half = Z95 * math.sqrt(max(v, 0.0))
    return ratio, ratio * math.exp(-half), ratio * math.exp(half)


SYMMETRIC_LAWS = ("uniform(-1,1)", "laplace(1)", "gengauss(0.5)")


def run_symmetric_degradation_experiment(
    laws: Iterable["ErrorLaw | str"] = SYMMETRIC_LAWS,
    n: int = 200,
    M: int = 10_000,
    seed: int = 20240601,
    *,
    huber_laws: Iterable["ErrorLaw | str"] = ("laplace(1)",),
    base: McDesign | None = None,
    config: SolverConfig = DEFAULT_CONFIG,
    threads: int | None = 1,
) -> list[AreRow]:
    """PMM-vs-OLS slope ARE under symmetric errors, plus Huber for contrast."""
    if M < 500:
        raise ValueError("M must be at least 500")
    base = base or McDesign()
    huber = {ErrorLaw.parse(h).label for h in huber_laws}
    rows = []
    for law in laws:
        design = replace(base, law=ErrorLaw.parse(law), n_grid=(n,), M=M, seed=seed)
        ests = [Estimator.OLS, Estimator.PMM]
        if design.law.label in huber:
            ests.append(Estimator.HUBER)

        def one(r):
            x, y = sample_dgp(design, r, n)
            D = build_design(x, design.true_block)
            try:
                return [fit(D, y, e, config).beta[1] for e in ests]
            except FpError:
                return None

        reps = [r for r in parallel_map(one, range(M), threads) if r is not None]
        arr = np.array(reps)
        for j, e in enumerate(ests[1:], start=1):
            are, lo, hi = variance_ratio_ci(arr[:, j], arr[:, 0])
            rows.append(AreRow(design.law.label, e.value, n, M, M - len(reps), are, lo, hi,
                               robust_variance_ratio(arr[:, j], arr[:, 0])))
    return rows


@dataclass(frozen=True)
class TimingRow:
    estimator: str
    n: int
    k: int
    law: str
    median_ms: float
    sd_ms: float
    n_timed: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TimingSummary:
    rows: tuple[TimingRow, ...]
    scaling: dict

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "scaling": dict(self.scaling)}


def capture_timings(
    design: McDesign | None = None,
    n_values: Sequence[int] = (100, 1000),
    estimators: Sequence["Estimator | str"] = (Estimator.OLS, Estimator.PMM),
    repeats: int = 200,
    warmup: int = 10,
    block: "FpBlock | str | None" = None,
    config: SolverConfig = DEFAULT_CONFIG,
) -> TimingSummary:
    """Per-fit wall-clock time on a prepared design matrix.

    The first ``warmup`` fits of every cell are discarded. ``scaling`` maps
    each estimator to ``median(n_max) / median(n_min)``. Data generation and
    design construction are not timed.
    """
    design = design or McDesign(law=ErrorLaw.parse("gamma(3)"))
    blk = design.true_block if block is None else (
        FpBlock.parse(block) if isinstance(block, str) else block)
    rows = []
    for est in (Estimator.parse(e) for e in estimators):
        for n in n_values:
            x, y = sample_dgp(design, 0, n)
            D = build_design(x, blk)
            times = []
            for _ in range(warmup + repeats):
                t0 = time.perf_counter()
                fit(D, y, est, config)
                times.append(time.perf_counter() - t0)
            t = np.array(times[warmup:]) * 1e3
            rows.append(TimingRow(est.value, int(n), D.k, design.law.label,
                                  float(np.median(t)), float(t.std(ddof=1)), t.size))
    lo, hi = min(n_values), max(n_values)
    med = {(r.estimator, r.n): r.median_ms for r in rows}
    scaling = {e: med[(e, hi)] / med[(e, lo)] for e in {r.estimator for r in rows}}
    return TimingSummary(tuple(rows), scaling)


# Desk profiles run in minutes; the "paper" profile uses the full replication counts.
PROFILES = {
    "desk": {
        "matched_basis": {"M": 300, "n_grid": (100, 200, 500)},
        "fma": {"M": 200, "n_grid": (200,)},
        "symmetric": {"M": 2000, "n": 200},
        "timings": {"repeats": 200},
    },
    "paper": {
        "matched_basis": {"M": 1000, "n_grid": (100, 200, 500)},
        "fma": {"M": 1000, "n_grid": (100, 200, 500)},
        "symmetric": {"M": 10_000, "n": 200},
        "timings": {"repeats": 1000},
    },
}

MATCHED_LAWS = ("gaussian", "beta(2,5)", "gamma(3)", "exponential(1)", "lognormal(1)")
FMA_LAWS = ("gaussian", "gamma(3)", "lognormal(1)")


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float) else v)
                    for v in row])
    return buf.getvalue()


def matched_basis_csv(cells: Sequence[McCellSummary]) -> str:
    """Table with one row per (law, n): theoretical and robust g2, reduction, coverage."""
    return _csv(
        ["law", "n", "M", "g2_theoretical", "g2_robust_hat", "variance_ratio",
         "reduction_pct", "coverage_ols", "coverage_pmm", "pred_eff_pmm", "n_failed"],
        ([c.law, c.n, c.M, c.g2_theoretical, c.g2_robust_hat, c.variance_ratio,
          c.slope_variance_reduction_pct, c.coverage_ols, c.coverage_pmm, c.pred_eff_pmm,
          c.n_failed] for c in cells))


def fma_csv(cells: Sequence[FmaCellSummary]) -> str:
    return _csv(["law", "n", "variant", "M", "bias", "var", "mse", "coverage", "mean_se",
                 "n_failed"],
                ([c.law, c.n, c.variant, c.M, c.bias, c.var, c.mse, c.coverage, c.mean_se,
                  c.n_failed] for c in cells))


def symmetric_csv(rows: Sequence[AreRow]) -> str:
    return _csv(["law", "estimator", "n", "M", "are", "ci_lower", "ci_upper", "robust_are",
                 "n_failed"],
                ([r.law, r.estimator, r.n, r.M, r.are, r.ci_lower, r.ci_upper, r.robust_are,
                  r.n_failed]
                 for r in rows))


def timings_csv(summary: TimingSummary) -> str:
    return _csv(["estimator", "n", "k", "law", "median_ms", "sd_ms", "n_timed"],
                ([r.estimator, r.n, r.k, r.law, r.median_ms, r.sd_ms, r.n_timed]
                 for r in summary.rows))
