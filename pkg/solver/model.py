#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Parametric families of utilities, probability weightings, loss models and
weight functions phi, plus the ProblemSpec that bundles them.

All specs are frozen dataclasses and every method is vectorised: pass a
float to get a float back, pass an array to get an array of the same shape.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from solver import constants as _cfg
from solver.errors import DomainError, EvalError, InversionError, RangeError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

# Tversky-Kahneman weighting stops being monotone below this gamma
TK_MIN_GAMMA = 0.28


# ============================================================================
# HELPERS
# ============================================================================

def _as_array(x: ArrayLike) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _ret(arr: np.ndarray, scalar: bool) -> Any:
    return float(arr) if scalar else arr


def _frozen_array(values: Sequence[float]) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_probability(p: np.ndarray, what: str) -> None:
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise DomainError(f"{what} must lie in [0, 1]")


# ============================================================================
# UTILITY
# ============================================================================

@dataclass(frozen=True, eq=False)
class UtilitySpec:
    """Strictly concave increasing utility u with closed-form derivatives.

    ``kind`` is one of ``cara``, ``crra``, ``log`` or ``tabulated``. A
    tabulated utility is given by samples of the marginal utility u' at
    increasing wealth levels and is piecewise linear in u' between them.
    """

    kind: str
    alpha: float = 1.0
    gamma: float = 2.0
    wealth: np.ndarray = field(default_factory=lambda: _frozen_array(()))
    marginal: np.ndarray = field(default_factory=lambda: _frozen_array(()))

    def __post_init__(self) -> None:
        if self.kind not in _cfg.UTILITY_KINDS:
            raise DomainError(f"unknown utility kind {self.kind!r}")
        if self.kind == "cara" and not self.alpha > 0:
            raise DomainError("CARA alpha must be > 0")
        if self.kind == "crra" and (not self.gamma > 0 or self.gamma == 1.0):
            raise DomainError("CRRA gamma must be > 0 and != 1 (use log)")
        if self.kind == "tabulated":
            xs = _frozen_array(self.wealth)
            ms = _frozen_array(self.marginal)
            if xs.size < 2 or xs.shape != ms.shape:
                raise DomainError("tabulated utility needs >= 2 matching samples")
            if np.any(np.diff(xs) <= 0):
                raise DomainError("tabulated wealth samples must be strictly increasing")
            if np.any(ms <= 0) or np.any(np.diff(ms) >= 0):
                raise DomainError("tabulated marginal utility must be positive and strictly decreasing")
            object.__setattr__(self, "wealth", xs)
            object.__setattr__(self, "marginal", ms)
            # u at each sample; exact integral of the piecewise-linear u'
            levels = np.concatenate(([0.0], np.cumsum(0.5 * (ms[1:] + ms[:-1]) * np.diff(xs))))
            levels.setflags(write=False)
            object.__setattr__(self, "_levels", levels)
            slopes = np.diff(ms) / np.diff(xs)
            slopes.setflags(write=False)
            object.__setattr__(self, "_slopes", slopes)

    # ---- constructors ----

    @classmethod
    def cara(cls, alpha: float) -> "UtilitySpec":
        return cls("cara", alpha=float(alpha))

    @classmethod
    def crra(cls, gamma: float) -> "UtilitySpec":
        return cls("crra", gamma=float(gamma))

    @classmethod
    def log(cls) -> "UtilitySpec":
        return cls("log")

    @classmethod
    def tabulated(cls, wealth: Sequence[float], marginal: Sequence[float]) -> "UtilitySpec":
        return cls("tabulated", wealth=np.asarray(wealth, dtype=float),
                   marginal=np.asarray(marginal, dtype=float))

    # ---- domain ----

    @property
    def lower_bound(self) -> float:
        """Infimum of the wealth domain."""
        if self.kind == "cara":
            return -np.inf
        if self.kind == "tabulated":
            return float(self.wealth[0])
        return 0.0

    @property
    def open_lower(self) -> bool:
        """True when the lower bound itself is excluded (log and CRRA)."""
        return self.kind in ("crra", "log")

    def check_domain(self, x: np.ndarray) -> None:
        if np.any(np.isnan(x)):
            raise DomainError("wealth is NaN")
        lo = self.lower_bound
        bad = x <= lo if self.open_lower else x < lo
        if np.any(bad):
            raise DomainError(
                f"wealth {float(np.min(x)):.17g} is below the {self.kind} domain bound {lo:.17g}"
            )
        if self.kind == "tabulated" and np.any(x > self.wealth[-1]):
            raise DomainError(
                f"wealth {float(np.max(x)):.17g} is above the last tabulated sample"
            )

    def _segment(self, x: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.wealth, x, side="right") - 1
        return np.clip(idx, 0, self.wealth.size - 2)

    # ---- evaluation ----

    def value(self, x: ArrayLike) -> Any:
        arr, scalar = _as_array(x)
        self.check_domain(arr)
        if self.kind == "cara":
            out = -np.expm1(-self.alpha * arr) / self.alpha
        elif self.kind == "crra":
            out = (arr ** (1.0 - self.gamma) - 1.0) / (1.0 - self.gamma)
        elif self.kind == "log":
            out = np.log(arr)
        else:
            k = self._segment(arr)
            dx = arr - self.wealth[k]
            out = self._levels[k] + self.marginal[k] * dx + 0.5 * self._slopes[k] * dx * dx
        return _ret(np.asarray(out, dtype=float), scalar)

    def marginal_at(self, x: ArrayLike) -> Any:
        """u'(x)."""
        arr, scalar = _as_array(x)
        self.check_domain(arr)
        if self.kind == "cara":
            out = np.exp(-self.alpha * arr)
        elif self.kind == "crra":
            out = arr ** (-self.gamma)
        elif self.kind == "log":
            out = 1.0 / arr
        else:
            out = np.interp(arr, self.wealth, self.marginal)
        return _ret(np.asarray(out, dtype=float), scalar)

    def curvature(self, x: ArrayLike) -> Any:
        """u''(x)."""
        arr, scalar = _as_array(x)
        self.check_domain(arr)
        if self.kind == "cara":
            out = -self.alpha * np.exp(-self.alpha * arr)
        elif self.kind == "crra":
            out = -self.gamma * arr ** (-self.gamma - 1.0)
        elif self.kind == "log":
            out = -1.0 / (arr * arr)
        else:
            out = self._slopes[self._segment(arr)]
        return _ret(np.asarray(out, dtype=float), scalar)

    # ---- marginal-space maps used by the free-boundary solver ----

    def marginal_range(self) -> Tuple[float, float]:
        if self.kind == "tabulated":
            return float(self.marginal[-1]), float(self.marginal[0])
        return 0.0, np.inf

    def check_marginal(self, y: np.ndarray) -> None:
        lo, hi = self.marginal_range()
        if np.any(np.isnan(y)):
            raise RangeError("marginal utility is NaN")
        if self.kind == "tabulated":
            bad = (y < lo * (1.0 - _cfg.INVERSION_RTOL)) | (y > hi * (1.0 + _cfg.INVERSION_RTOL))
        else:
            bad = (y <= lo) | (y >= hi)
        if np.any(bad):
            raise RangeError(
                f"marginal {float(y[bad].flat[0]):.17g} outside the range "
                f"({lo:.17g}, {hi:.17g}) of u'"
            )

    def prime_inverse(self, y: ArrayLike) -> Any:
        """(u')^{-1}(y)."""
        arr, scalar = _as_array(y)
        self.check_marginal(arr)
        if self.kind == "cara":
            out = -np.log(arr) / self.alpha
        elif self.kind == "crra":
            out = arr ** (-1.0 / self.gamma)
        elif self.kind == "log":
            out = 1.0 / arr
        else:
            out = np.interp(arr, self.marginal[::-1], self.wealth[::-1])
        return _ret(np.asarray(out, dtype=float), scalar)

    def kappa(self, y: ArrayLike) -> Any:
        """u''((u')^{-1}(y)) in closed form, without inverting u'."""
        arr, scalar = _as_array(y)
        if self.kind == "cara":
            out = -self.alpha * arr
        elif self.kind == "crra":
            out = -self.gamma * arr ** ((self.gamma + 1.0) / self.gamma)
        elif self.kind == "log":
            out = -arr * arr
        else:
            x = np.interp(arr, self.marginal[::-1], self.wealth[::-1])
            out = self._slopes[self._segment(x)]
        return _ret(np.asarray(out, dtype=float), scalar)

    def kappa_prime(self, y: ArrayLike) -> Any:
        """Derivative of kappa with respect to the marginal y."""
        arr, scalar = _as_array(y)
        if self.kind == "cara":
            out = np.full_like(arr, -self.alpha)
        elif self.kind == "crra":
            out = -(self.gamma + 1.0) * arr ** (1.0 / self.gamma)
        elif self.kind == "log":
            out = -2.0 * arr
        else:
            out = np.zeros_like(arr)
        return _ret(np.asarray(out, dtype=float), scalar)

    def describe(self) -> str:
        if self.kind == "cara":
            return f"CARA({self.alpha:g})"
        if self.kind == "crra":
            return f"CRRA({self.gamma:g})"
        if self.kind == "log":
            return "Log"
        return f"Tabulated({self.wealth.size} samples)"


def utility_eval(spec: UtilitySpec, x: ArrayLike) -> Tuple[Any, Any, Any]:
    """Return (u(x), u'(x), u''(x)); DomainError below the domain bound."""
    return spec.value(x), spec.marginal_at(x), spec.curvature(x)


def utility_prime_inverse(spec: UtilitySpec, y: ArrayLike) -> Any:
    """Return the wealth at which u' equals y; RangeError outside u'(domain)."""
    return spec.prime_inverse(y)


# ============================================================================
# PROBABILITY WEIGHTING
# ============================================================================

@dataclass(frozen=True)
class WeightingSpec:
    """Increasing C^1 bijection w of [0, 1] with w(0)=0 and w(1)=1.

    Kinds: ``identity``; ``power`` w(p)=p^gamma; ``prelec``
    w(p)=exp(-b(-ln p)^a); ``tk`` the Tversky-Kahneman form
    p^gamma / (p^gamma + (1-p)^gamma)^(1/gamma).
    """

    kind: str
    gamma: float = 1.0
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in _cfg.WEIGHTING_KINDS:
            raise DomainError(f"unknown weighting kind {self.kind!r}")
        if self.kind == "power" and not self.gamma > 0:
            raise DomainError("power weighting gamma must be > 0")
        if self.kind == "prelec" and not (self.a > 0 and self.b > 0):
            raise DomainError("Prelec parameters a, b must be > 0")
        if self.kind == "tk" and not self.gamma >= TK_MIN_GAMMA:
            raise DomainError(
                f"Tversky-Kahneman gamma must be >= {TK_MIN_GAMMA} for monotonicity"
            )

    @classmethod
    def identity(cls) -> "WeightingSpec":
        return cls("identity")

    @classmethod
    def power(cls, gamma: float) -> "WeightingSpec":
        return cls("power", gamma=float(gamma))

    @classmethod
    def prelec(cls, a: float, b: float = 1.0) -> "WeightingSpec":
        return cls("prelec", a=float(a), b=float(b))

    @classmethod
    def tversky_kahneman(cls, gamma: float) -> "WeightingSpec":
        return cls("tk", gamma=float(gamma))

    # ---- forward map ----

    def value(self, p: ArrayLike) -> Any:
        arr, scalar = _as_array(p)
        _check_probability(arr, "probability")
        if self.kind == "identity":
            out = arr.copy()
        elif self.kind == "power":
            out = arr ** self.gamma
        elif self.kind == "prelec":
            with np.errstate(divide="ignore"):
                out = np.exp(-self.b * (-np.log(arr)) ** self.a)
        else:
            g = self.gamma
            with np.errstate(divide="ignore", invalid="ignore"):
                out = arr ** g / (arr ** g + (1.0 - arr) ** g) ** (1.0 / g)
        out = np.where(arr == 0.0, 0.0, np.where(arr == 1.0, 1.0, out))
        return _ret(np.asarray(out, dtype=float), scalar)

    def density(self, p: ArrayLike) -> Any:
        """w'(p); may be 0 or +inf at the endpoints."""
        arr, scalar = _as_array(p)
        _check_probability(arr, "probability")
        if self.kind == "identity":
            out = np.ones_like(arr)
        elif self.kind == "power":
            with np.errstate(divide="ignore"):
                out = self.gamma * arr ** (self.gamma - 1.0)
        elif self.kind == "prelec":
            out = self._prelec_density(arr)
        else:
            out = self._tk_density(arr)
        return _ret(np.asarray(out, dtype=float), scalar)

    def _prelec_density(self, p: np.ndarray) -> np.ndarray:
        a, b = self.a, self.b
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lnp = -np.log(p)
            out = np.exp(-b * lnp ** a) * a * b * lnp ** (a - 1.0) / p
        # endpoint limits
        if a < 1.0:
            at0, at1 = np.inf, np.inf
        elif a > 1.0:
            at0, at1 = 0.0, 0.0
        else:
            at0 = np.inf if b < 1.0 else (1.0 if b == 1.0 else 0.0)
            at1 = b
        out = np.where(p == 0.0, at0, np.where(p == 1.0, at1, out))
        return out

    def _tk_density(self, p: np.ndarray) -> np.ndarray:
        g = self.gamma
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            d = p ** g + (1.0 - p) ** g
            bracket = g * p ** g + g * (1.0 - p) ** g - p ** g + p * (1.0 - p) ** (g - 1.0)
            out = p ** (g - 1.0) * d ** (-1.0 / g - 1.0) * bracket
        if g < 1.0:
            at0, at1 = np.inf, np.inf
        elif g > 1.0:
            at0, at1 = 0.0, g - 1.0
        else:
            at0, at1 = 1.0, 1.0
        return np.where(p == 0.0, at0, np.where(p == 1.0, at1, out))

    # ---- inverse ----

    def inverse(self, q: ArrayLike) -> Any:
        arr, scalar = _as_array(q)
        _check_probability(arr, "weighted probability")
        if self.kind == "identity":
            out = arr.copy()
        elif self.kind == "power":
            out = arr ** (1.0 / self.gamma)
        elif self.kind == "prelec":
            with np.errstate(divide="ignore"):
                out = np.exp(-((-np.log(arr)) / self.b) ** (1.0 / self.a))
        else:
            out = np.array([self._tk_inverse_scalar(float(v)) for v in arr.ravel()])
            out = out.reshape(arr.shape)
        out = np.where(arr == 0.0, 0.0, np.where(arr == 1.0, 1.0, out))
        return _ret(np.asarray(out, dtype=float), scalar)

    def _tk_inverse_scalar(self, q: float) -> float:
        if q <= 0.0:
            return 0.0
        if q >= 1.0:
            return 1.0
        try:
            return float(optimize.brentq(
                lambda t: float(self.value(t)) - q, 0.0, 1.0,
                xtol=1e-15, rtol=4.0 * np.finfo(float).eps,
                maxiter=_cfg.INVERSION_MAX_STEPS,
            ))
        except (ValueError, RuntimeError) as exc:
            raise InversionError(f"cannot invert Tversky-Kahneman weighting at {q!r}: {exc}", q)

    def describe(self) -> str:
        if self.kind == "identity":
            return "Identity"
        if self.kind == "power":
            return f"Power({self.gamma:g})"
        if self.kind == "prelec":
            return f"Prelec({self.a:g}, {self.b:g})"
        return f"TverskyKahneman({self.gamma:g})"


def weighting_eval(spec: WeightingSpec, p: ArrayLike) -> Tuple[Any, Any, Any]:
    """Return (w(p), w'(p), w^{-1}(p))."""
    return spec.value(p), spec.density(p), spec.inverse(p)


# ============================================================================
# LOSS MODEL
# ============================================================================

@dataclass(frozen=True, eq=False)
class LossModel:
    """Loss distribution described by its quantile function F_X^{-1}.

    Kinds: ``uniform`` on (0, b); ``mass_at_zero`` with an atom of size q
    at 0 and the rest uniform on (0, b); ``tabulated`` piecewise-linear
    quantile through (probabilities, quantiles).
    """

    kind: str
    b: float = 1.0
    q: float = 0.0
    probabilities: np.ndarray = field(default_factory=lambda: _frozen_array(()))
    quantiles: np.ndarray = field(default_factory=lambda: _frozen_array(()))

    def __post_init__(self) -> None:
        if self.kind not in _cfg.LOSS_KINDS:
            raise DomainError(f"unknown loss kind {self.kind!r}")
        if self.kind in ("uniform", "mass_at_zero") and not self.b > 0:
            raise DomainError("loss upper bound b must be > 0")
        if self.kind == "mass_at_zero" and not 0.0 <= self.q < 1.0:
            raise DomainError("mass at zero q must lie in [0, 1)")
        if self.kind == "tabulated":
            ps = _frozen_array(self.probabilities)
            qs = _frozen_array(self.quantiles)
            if ps.size < 2 or ps.shape != qs.shape:
                raise DomainError("tabulated quantile needs >= 2 matching samples")
            if ps[0] != 0.0 or ps[-1] != 1.0 or np.any(np.diff(ps) <= 0):
                raise DomainError("tabulated probabilities must increase from 0 to 1")
            if qs[0] < 0.0 or np.any(np.diff(qs) < 0):
                raise DomainError("tabulated quantiles must be nonnegative and nondecreasing")
            object.__setattr__(self, "probabilities", ps)
            object.__setattr__(self, "quantiles", qs)

    @classmethod
    def uniform(cls, b: float) -> "LossModel":
        return cls("uniform", b=float(b))

    @classmethod
    def mass_at_zero(cls, q: float, b: float) -> "LossModel":
        return cls("mass_at_zero", b=float(b), q=float(q))

    @classmethod
    def tabulated(cls, probabilities: Sequence[float], quantiles: Sequence[float]) -> "LossModel":
        return cls("tabulated", probabilities=np.asarray(probabilities, dtype=float),
                   quantiles=np.asarray(quantiles, dtype=float))

    # ---- quantile and its derivative ----

    def quantile(self, s: ArrayLike) -> Any:
        arr, scalar = _as_array(s)
        _check_probability(arr, "probability")
        if self.kind == "uniform":
            out = self.b * arr
        elif self.kind == "mass_at_zero":
            out = np.maximum(0.0, (arr - self.q) / (1.0 - self.q)) * self.b
        else:
            out = np.interp(arr, self.probabilities, self.quantiles)
        return _ret(np.asarray(out, dtype=float), scalar)

    def quantile_slope(self, s: ArrayLike) -> Any:
        """Left derivative of F_X^{-1} at s (right derivative at s=0)."""
        arr, scalar = _as_array(s)
        _check_probability(arr, "probability")
        if self.kind == "uniform":
            out = np.full_like(arr, self.b)
        elif self.kind == "mass_at_zero":
            rate = self.b / (1.0 - self.q)
            active = (arr > self.q) | ((arr == 0.0) & (self.q == 0.0))
            out = np.where(active, rate, 0.0)
        else:
            slopes = np.diff(self.quantiles) / np.diff(self.probabilities)
            idx = np.clip(np.searchsorted(self.probabilities, arr, side="left") - 1,
                          0, slopes.size - 1)
            out = slopes[idx]
        return _ret(np.asarray(out, dtype=float), scalar)

    def kinks(self) -> np.ndarray:
        """Probabilities in (0, 1) where F_X^{-1} is not differentiable."""
        if self.kind == "mass_at_zero" and self.q > 0.0:
            return np.array([self.q])
        if self.kind == "tabulated":
            slopes = np.diff(self.quantiles) / np.diff(self.probabilities)
            jump = ~np.isclose(slopes[1:], slopes[:-1], rtol=1e-12, atol=0.0)
            return self.probabilities[1:-1][jump]
        return np.empty(0)

    def rate(self, p: ArrayLike) -> Any:
        """h(p) = (F_X^{-1})'(1-p)."""
        arr, scalar = _as_array(p)
        _check_probability(arr, "probability")
        return _ret(np.asarray(self.quantile_slope(1.0 - arr), dtype=float), scalar)

    # ---- moments ----

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * self.b
        if self.kind == "mass_at_zero":
            return 0.5 * self.b * (1.0 - self.q)
        ps, qs = self.probabilities, self.quantiles
        return float(np.sum(0.5 * (qs[1:] + qs[:-1]) * np.diff(ps)))

    @property
    def supremum(self) -> float:
        return float(self.quantile(1.0))

    def describe(self) -> str:
        if self.kind == "uniform":
            return f"Uniform(0, {self.b:g})"
        if self.kind == "mass_at_zero":
            return f"MassAtZeroPlusUniform({self.q:g}, {self.b:g})"
        return f"TabulatedQuantile({self.probabilities.size} samples)"


def loss_quantile(spec: LossModel, p: ArrayLike, strict: bool = False) -> Tuple[Any, Any]:
    """Return (F_X^{-1}(p), h(p)).

    At a kink of F_X^{-1} (seen from s = 1-p) the one-sided value is
    returned; with ``strict=True`` an EvalError carrying it is raised.
    """
    arr, scalar = _as_array(p)
    value = spec.quantile(arr)
    rate = spec.rate(arr)
    kinks = spec.kinks()
    if kinks.size:
        hit = np.isin(1.0 - arr, kinks)
        if np.any(hit):
            where = float(arr[hit].flat[0])
            one_sided = float(np.asarray(rate)[hit].flat[0])
            if strict:
                raise EvalError(
                    f"quantile is not differentiable at 1-p for p={where:.17g}",
                    where, one_sided,
                )
            logger.debug("one-sided quantile derivative at p=%.17g: %.17g", where, one_sided)
    return _ret(np.asarray(value), scalar), _ret(np.asarray(rate), scalar)


# ============================================================================
# WEIGHT FUNCTION PHI
# ============================================================================

@dataclass(frozen=True, eq=False)
class PhiSpec:
    """Nonnegative weight phi on [0, 1] entering the budget constraint.

    Kinds: ``constant`` phi=c, ``power`` phi=c*t^k (k >= 0) and
    ``tabulated`` piecewise linear through (points, values).
    """

    kind: str = "constant"
    c: float = 1.0
    k: float = 0.0
    points: np.ndarray = field(default_factory=lambda: _frozen_array(()))
    values: np.ndarray = field(default_factory=lambda: _frozen_array(()))

    def __post_init__(self) -> None:
        if self.kind not in _cfg.PHI_KINDS:
            raise DomainError(f"unknown phi kind {self.kind!r}")
        if self.kind in ("constant", "power") and not self.c >= 0:
            raise DomainError("phi coefficient c must be >= 0")
        if self.kind == "power" and not self.k >= 0:
            raise DomainError("phi exponent k must be >= 0")
        if self.kind == "tabulated":
            ts = _frozen_array(self.points)
            vs = _frozen_array(self.values)
            if ts.size < 2 or ts.shape != vs.shape:
                raise DomainError("tabulated phi needs >= 2 matching samples")
            if ts[0] != 0.0 or ts[-1] != 1.0 or np.any(np.diff(ts) <= 0):
                raise DomainError("tabulated phi points must increase from 0 to 1")
            if np.any(vs < 0):
                raise DomainError("phi must be nonnegative")
            object.__setattr__(self, "points", ts)
            object.__setattr__(self, "values", vs)

    @classmethod
    def constant(cls, c: float = 1.0) -> "PhiSpec":
        return cls("constant", c=float(c))

    @classmethod
    def power(cls, c: float, k: float) -> "PhiSpec":
        return cls("power", c=float(c), k=float(k))

    @classmethod
    def tabulated(cls, points: Sequence[float], values: Sequence[float]) -> "PhiSpec":
        return cls("tabulated", points=np.asarray(points, dtype=float),
                   values=np.asarray(values, dtype=float))

    def __call__(self, t: ArrayLike) -> Any:
        arr, scalar = _as_array(t)
        if self.kind == "constant":
            out = np.full_like(arr, self.c)
        elif self.kind == "power":
            out = self.c * arr ** self.k
        else:
            out = np.interp(arr, self.points, self.values)
        return _ret(np.asarray(out, dtype=float), scalar)

    @property
    def total(self) -> float:
        """Closed-form integral of phi over [0, 1]."""
        if self.kind == "constant":
            return self.c
        if self.kind == "power":
            return self.c / (self.k + 1.0)
        ts, vs = self.points, self.values
        return float(np.sum(0.5 * (vs[1:] + vs[:-1]) * np.diff(ts)))


# ============================================================================
# PROBLEM
# ============================================================================

@dataclass(frozen=True)
class ProblemSpec:
    """Insurance problem: wealth beta, budget (direct or via premium), phi, u, w, X."""

    beta: float
    utility: UtilitySpec
    weighting: WeightingSpec
    loss: LossModel
    phi: PhiSpec = field(default_factory=PhiSpec.constant)
    premium: Optional[float] = None
    budget: Optional[float] = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.beta):
            raise DomainError("beta must be finite")
        if (self.premium is None) == (self.budget is None):
            raise DomainError("give exactly one of premium and budget")
        if self.loss.supremum >= self.beta:
            raise DomainError(
                f"loss supremum {self.loss.supremum:.17g} must be below beta {self.beta:.17g}"
            )
        # terminal wealth and the worst attainable wealth must be admissible
        self.utility.check_domain(np.array([self.beta - self.loss.supremum, self.beta]))

    @property
    def varpi(self) -> float:
        """Transformed budget: given directly, or beta + premium - E[X]."""
        if self.budget is not None:
            return float(self.budget)
        return float(self.beta + self.premium - self.loss.mean)  # type: ignore[operator]
