"""Centred error laws: analytic moments and sampling."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedLaw

_ALIASES = {
    "gaussian": "gaussian", "normal": "gaussian", "gauss": "gaussian",
    "beta": "beta",
    "gamma": "gamma",
    "exponential": "exponential", "exp": "exponential",
    "lognormal": "lognormal", "logn": "lognormal", "log-normal": "lognormal",
    "uniform": "uniform",
    "laplace": "laplace",
    "gg": "gengauss", "gengauss": "gengauss", "generalised_gaussian": "gengauss",
    "generalized_gaussian": "gengauss",
    "negmix": "negmix", "gbsg": "negmix",
}

_DEFAULTS = {
    "gaussian": (1.0,),
    "beta": (2.0, 5.0),
    "gamma": (3.0,),
    "exponential": (1.0,),
    "lognormal": (1.0,),
    "uniform": (-1.0, 1.0),
    "laplace": (1.0,),
    "gengauss": (0.5,),
}

# Residual shape reported for the GBSG cohort; the "gbsg" alias matches it.
GBSG_GAMMA3 = -1.7436
GBSG_GAMMA4 = 4.9143


@dataclass(frozen=True)
class ErrorLaw:
    """A mean-zero error distribution.

    ``kind`` is one of gaussian(sd), beta(a, b), gamma(shape), exponential(rate),
    lognormal(sigma), uniform(lo, hi), laplace(scale), gengauss(shape) and
    negmix(k, c). The last is ``-(G - k) + c Z`` with ``G ~ Gamma(k)``, a
    left-skewed law whose skewness and kurtosis can be dialled in jointly.
    """

    kind: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        kind = _ALIASES.get(self.kind.lower())
        if kind is None:
            raise UnsupportedLaw(f"unknown error law {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        if not params:
            if kind == "negmix":
                params = _negmix_params(GBSG_GAMMA3, GBSG_GAMMA4)
            else:
                params = _DEFAULTS[kind]
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)
        self._validate()

    def _validate(self):
        p = self.params
        need = {"beta": 2, "uniform": 2, "negmix": 2}.get(self.kind, 1)
        if len(p) != need:
            raise UnsupportedLaw(f"{self.kind} takes {need} parameter(s), got {p}")
        if self.kind == "uniform":
            if not p[0] < p[1]:
                raise UnsupportedLaw("uniform needs lo < hi")
        elif self.kind == "negmix":
            if p[0] <= 0 or p[1] < 0:
                raise UnsupportedLaw("negmix needs k > 0, c >= 0")
        elif any(v <= 0 for v in p):
            raise UnsupportedLaw(f"{self.kind} parameters must be positive")

    @classmethod
    def parse(cls, text: "str | ErrorLaw") -> "ErrorLaw":
        """Parse names such as ``"gamma(3)"``, ``"LogN(0,1)"`` or ``"gaussian"``."""
        if isinstance(text, ErrorLaw):
            return text
        m = re.fullmatch(r"\s*([A-Za-z_\-]+)\s*(?:\(([^)]*)\))?\s*", text)
        if not m:
            raise UnsupportedLaw(f"cannot parse error law {text!r}")
        name = m.group(1).lower()
        args = [float(a) for a in (m.group(2) or "").split(",") if a.strip()]
        kind = _ALIASES.get(name)
        if kind is None:
            raise UnsupportedLaw(f"unknown error law {text!r}")
        if kind == "lognormal" and len(args) == 2:
            if args[0] != 0.0:
                raise UnsupportedLaw("only LogN(0, sigma) is supported")
            args = args[1:]
        if kind == "gaussian" and len(args) == 2:
            args = args[1:]
        return cls(kind, tuple(args))

    @classmethod
    def matching_left_skew(cls, gamma3: float, gamma4: float) -> "ErrorLaw":
        """negmix law with the given (negative) skewness and excess kurtosis."""
        return cls("negmix", _negmix_params(gamma3, gamma4))

    @property
    def label(self) -> str:
        p = ",".join(f"{v:g}" for v in self.params)
        names = {"gaussian": "Gaussian", "beta": "Beta", "gamma": "Gamma",
                 "exponential": "Exponential", "lognormal": "LogNormal",
                 "uniform": "Uniform", "laplace": "Laplace", "gengauss": "GG",
                 "negmix": "NegMix"}
        return f"{names[self.kind]}({p})"

    @property
    def symmetric(self) -> bool:
        return self.kind in {"gaussian", "uniform", "laplace", "gengauss"}

    def moments(self) -> tuple[float, float, float]:
        """Exact ``(variance, skewness, excess kurtosis)``."""
        k, p = self.kind, self.params
        if k == "gaussian":
            return p[0] ** 2, 0.0, 0.0
        if k == "beta":
            a, b = p
            s = a + b
            var = a * b / (s * s * (s + 1))
            g3 = 2 * (b - a) * math.sqrt(s + 1) / ((s + 2) * math.sqrt(a * b))
            g4 = 6 * ((a - b) ** 2 * (s + 1) - a * b * (s + 2)) / (a * b * (s + 2) * (s + 3))
            return var, g3, g4
        if k == "gamma":
            return p[0], 2 / math.sqrt(p[0]), 6 / p[0]
        if k == "exponential":
            return 1 / p[0] ** 2, 2.0, 6.0
        if k == "lognormal":
            w = math.exp(p[0] ** 2)
            return (w - 1) * w, (w + 2) * math.sqrt(w - 1), w**4 + 2 * w**3 + 3 * w**2 - 6
        if k == "uniform":
            return (p[1] - p[0]) ** 2 / 12, 0.0, -1.2
        if k == "laplace":
            return 2 * p[0] ** 2, 0.0, 3.0
        if k == "gengauss":
            b = p[0]
            lg = math.lgamma
            var = math.exp(lg(3 / b) - lg(1 / b))
            g4 = math.exp(lg(5 / b) + lg(1 / b) - 2 * lg(3 / b)) - 3
            return var, 0.0, g4
        kk, c = p
        var = kk + c * c
        return var, -2 * kk / var**1.5, 6 * kk / var**2

    def mean_offset(self) -> float:
        """Mean of the uncentred draw, subtracted during sampling."""
        k, p = self.kind, self.params
        if k == "beta":
            return p[0] / (p[0] + p[1])
        if k == "gamma":
            return p[0]
        if k == "exponential":
            return 1 / p[0]
        if k == "lognormal":
            return math.exp(p[0] ** 2 / 2)
        if k == "uniform":
            return (p[0] + p[1]) / 2
        return 0.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "gaussian":
            raw = p[0] * rng.standard_normal(size)
        elif k == "beta":
            raw = rng.beta(p[0], p[1], size)
        elif k == "gamma":
            raw = rng.standard_gamma(p[0], size)
        elif k == "exponential":
            raw = rng.standard_exponential(size) / p[0]
        elif k == "lognormal":
            raw = np.exp(p[0] * rng.standard_normal(size))
        elif k == "uniform":
            raw = rng.uniform(p[0], p[1], size)
        elif k == "laplace":
            raw = rng.laplace(0.0, p[0], size)
        elif k == "gengauss":
            mag = rng.standard_gamma(1 / p[0], size) ** (1 / p[0])
            sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
            raw = sign * mag
        else:
            kk, c = p
            raw = -(rng.standard_gamma(kk, size) - kk) + c * rng.standard_normal(size)
        return raw - self.mean_offset()


def _negmix_params(gamma3: float, gamma4: float) -> tuple[float, float]:
    # var/k = gamma4 / (1.5 gamma3^2) must be >= 1 for the Gaussian part to exist
    if gamma3 >= 0:
        raise UnsupportedLaw("negmix is left-skewed; gamma3 must be negative")
    r = gamma4 / (1.5 * gamma3 * gamma3)
    if r < 1:
        raise UnsupportedLaw("negmix needs gamma4 >= 1.5 gamma3^2")
    k = (2 / (abs(gamma3) * r**1.5)) ** 2
    return k, math.sqrt((r - 1) * k)
