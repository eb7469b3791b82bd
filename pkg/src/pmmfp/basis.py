"""Fractional-polynomial transforms, power blocks and design matrices."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import NonPositiveInput

FULL_POWERS: tuple[float, ...] = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0)
POSITIVE_POWERS: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0, 3.0)

MAX_TERMS = 4


class Track(str, enum.Enum):
    """Power set used for the FP surface: positive-only (a) or full grid (b)."""

    POSITIVE = "a"
    FULL = "b"

    @property
    def powers(self) -> tuple[float, ...]:
        return POSITIVE_POWERS if self is Track.POSITIVE else FULL_POWERS

    @classmethod
    def parse(cls, value: "str | Track") -> "Track":
        if isinstance(value, Track):
            return value
        key = str(value).strip().lower()
        aliases = {"a": cls.POSITIVE, "pos": cls.POSITIVE, "positive": cls.POSITIVE,
                   "b": cls.FULL, "full": cls.FULL}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown track {value!r}") from None


class EnumerationMode(str, enum.Enum):
    SUBSETS = "subsets"
    RA_DEG2 = "ra2"

    @classmethod
    def parse(cls, value: "str | EnumerationMode") -> "EnumerationMode":
        if isinstance(value, EnumerationMode):
            return value
        key = str(value).strip().lower()
        aliases = {"subsets": cls.SUBSETS, "subsets_up_to_4": cls.SUBSETS,
                   "ra2": cls.RA_DEG2, "royston_altman": cls.RA_DEG2, "fp2": cls.RA_DEG2}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown enumeration mode {value!r}") from None


@dataclass(frozen=True, order=True)
class FpPower:
    """One admissible FP exponent; ``0`` stands for the log transform."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if v not in FULL_POWERS:
            raise ValueError(f"{self.value!r} is not an admissible FP power {FULL_POWERS}")
        object.__setattr__(self, "value", v)

    def __str__(self):
        return _fmt_power(self.value)


@dataclass(frozen=True)
class FpTerm:
    power: FpPower
    repeated: bool = False


@dataclass(frozen=True)
class FpBlock:
    """Ordered FP terms defining one candidate regression surface.

    A repeated term contributes the pair of columns ``x^p`` and ``x^p log x``.
    """

    terms: tuple[FpTerm, ...]
    track: Track = Track.FULL

    def __post_init__(self):
        terms = tuple(
            t if isinstance(t, FpTerm) else FpTerm(FpPower(t[0]), bool(t[1])) for t in self.terms
        )
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "track", Track.parse(self.track))
        if not 1 <= len(terms) <= MAX_TERMS:
            raise ValueError(f"a block needs 1..{MAX_TERMS} terms, got {len(terms)}")
        powers = [t.power.value for t in terms]
        if len(set(powers)) != len(powers):
            raise ValueError(f"duplicate power in block {powers}; use repeated=True instead")
        if self.track is Track.POSITIVE and any(p not in POSITIVE_POWERS for p in powers):
            raise ValueError(f"block {powers} uses powers outside the positive track")

    @classmethod
    def from_powers(cls, powers: Iterable[float], track: "Track | str" = Track.FULL) -> "FpBlock":
        """Build a block from a power list; a power listed twice becomes a repeated term."""
        seen: dict[float, int] = {}
        order: list[float] = []
        for p in powers:
            p = float(p)
            if p not in seen:
                order.append(p)
            seen[p] = seen.get(p, 0) + 1
        if any(c > 2 for c in seen.values()):
            raise ValueError("a power may appear at most twice")
        return cls(tuple(FpTerm(FpPower(p), seen[p] == 2) for p in order), Track.parse(track))

    @classmethod
    def parse(cls, text: str, track: "Track | str" = Track.FULL) -> "FpBlock":
        """Parse ``"0.5"``, ``"1,2"`` or ``"{-2,-2}"`` into a block."""
        body = text.strip().strip("{}[]() ")
        parts = [s for s in body.replace(";", ",").split(",") if s.strip() and s.strip() != "NA"]
        return cls.from_powers([float(s) for s in parts], track)

    @property
    def powers(self) -> tuple[float, ...]:
        return tuple(t.power.value for t in self.terms)

    @property
    def n_columns(self) -> int:
        """FP columns, excluding the intercept."""
        return sum(2 if t.repeated else 1 for t in self.terms)

    @property
    def label(self) -> str:
        out = []
        for t in self.terms:
            out.append(_fmt_power(t.power.value))
            if t.repeated:
                out.append(_fmt_power(t.power.value))
        return "{" + ",".join(out) + "}"

    def key(self) -> frozenset:
        return frozenset((t.power.value, t.repeated) for t in self.terms)

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class DesignMatrix:
    """Intercept-first FP design, optionally followed by fixed covariate columns."""

    values: np.ndarray
    column_labels: tuple[str, ...]
    block: FpBlock
    offset: float = 0.0
    n_covariates: int = 0
    covariate_labels: tuple[str, ...] = field(default=())

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]


def _fmt_power(p: float) -> str:
    return str(int(p)) if float(p).is_integer() else str(p)


def fp_transform(x, p: "FpPower | float") -> np.ndarray:
    """Elementwise ``x**p``, with ``p == 0`` meaning ``log x``."""
    p = p.value if isinstance(p, FpPower) else FpPower(p).value
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise NonPositiveInput("FP transforms need x > 0; apply shift_domain first")
    if p == 0.0:
        return np.log(x)
    if p == 0.5:
        return np.sqrt(x)
    if p.is_integer():
        return x ** int(p)
    return x**p


def shift_domain(x, offset: float | None = None) -> tuple[np.ndarray, float]:
    """Move ``x`` onto the positive half-line.

    With no explicit offset, data already positive is returned as is; otherwise
    ``x - min(x) + delta`` with ``delta = max(1, range(x)/100)``.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise ValueError("shift_domain needs a non-empty finite vector")
    if offset is not None:
        return x + float(offset), float(offset)
    lo = float(x.min())
    if lo > 0:
        return x.copy(), 0.0
    delta = max(1.0, (float(x.max()) - lo) / 100.0)
    applied = -lo + delta
    return x + applied, applied


def column_labels(block: FpBlock, offset: float = 0.0, name: str = "x") -> list[str]:
    inner = name if offset == 0.0 else f"{name}+{offset:g}"
    xs = inner if offset == 0.0 else f"({inner})"
    log = f"log({inner})"
    labels = []
    for t in block.terms:
        p = t.power.value
        base = log if p == 0 else f"{xs}^{_fmt_power(p)}"
        labels.append(base)
        if t.repeated:
            labels.append(f"{base}*{log}")
    return labels


def fp_columns(x, block: FpBlock) -> np.ndarray:
    """FP columns (no intercept) in block order, companions after their base."""
    x = np.asarray(x, dtype=float)
    cols = []
    logx = None
    for t in block.terms:
        base = fp_transform(x, t.power)
        cols.append(base)
        if t.repeated:
            if logx is None:
                logx = np.log(x)
            cols.append(base * logx)
    return np.column_stack(cols)


def build_design(
    x,
    block: FpBlock,
    covariates: np.ndarray | None = None,
    *,
    offset: float = 0.0,
    covariate_labels: Sequence[str] | None = None,
    x_name: str = "x",
) -> DesignMatrix:
    """Intercept column, then FP columns of ``x``, then any fixed covariates.

    ``x`` must already be positive; ``offset`` is only recorded for labelling
    and prediction.
    """
    x = np.asarray(x, dtype=float).ravel()
    fp = fp_columns(x, block)
    parts = [np.ones((x.size, 1)), fp]
    labels = ["intercept", *column_labels(block, offset, x_name)]
    ncov = 0
    cov_labels: tuple[str, ...] = ()
    if covariates is not None:
        cov = np.asarray(covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None]
        if cov.shape[0] != x.size:
            raise ValueError("covariates must have one row per observation")
        ncov = cov.shape[1]
        cov_labels = tuple(covariate_labels) if covariate_labels else tuple(f"z{j + 1}" for j in range(ncov))
        if len(cov_labels) != ncov:
            raise ValueError("covariate_labels length mismatch")
        parts.append(cov)
        labels.extend(cov_labels)
    values = np.hstack(parts)
    if not np.all(np.isfinite(values)):
        raise ValueError("design matrix has non-finite entries")
    return DesignMatrix(values, tuple(labels), block, float(offset), ncov, cov_labels)


def enumerate_blocks(
    track: "Track | str" = Track.POSITIVE,
    mode: "EnumerationMode | str" = EnumerationMode.SUBSETS,
    max_terms: int = MAX_TERMS,
) -> list[FpBlock]:
    """Candidate blocks in a deterministic order (by size, then grid order).

    ``SUBSETS`` gives every non-empty subset of the track's powers with at most
    ``max_terms`` elements (30 for track a, 162 for track b). ``RA_DEG2`` gives
    the degree-1 blocks plus unordered degree-2 pairs, a repeated pair being one
    repeated term.
    """
    track = Track.parse(track)
    mode = EnumerationMode.parse(mode)
    powers = track.powers
    blocks: list[FpBlock] = []
    if mode is EnumerationMode.SUBSETS:
        if not 1 <= max_terms <= MAX_TERMS:
            raise ValueError("max_terms must be in 1..4")
        for size in range(1, max_terms + 1):
            for combo in itertools.combinations(powers, size):
                blocks.append(FpBlock(tuple(FpTerm(FpPower(p)) for p in combo), track))
        return blocks
    for p in powers:
        blocks.append(FpBlock((FpTerm(FpPower(p)),), track))
    for i, p in enumerate(powers):
        for q in powers[i:]:
            if p == q:
                blocks.append(FpBlock((FpTerm(FpPower(p), True),), track))
            else:
                blocks.append(FpBlock((FpTerm(FpPower(p)), FpTerm(FpPower(q))), track))
    return blocks
