"""
Population-size profiles and the deterministic time change of a coalescent.

If ``nu(t)`` is the relative population size at coalescent time ``t``
before sampling, the genealogy in real time is ``Pi_{g(t)}`` with
``g(t) = int_0^t nu(s)^(-beta) ds``. The exponent ``beta`` is not a
property of the coalescent measure: it depends on the pre-limit
reproduction model, hence it is carried separately by
:class:`TimeScaleExponent`.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Any

import numpy as np


class DemographyProfile:
    kind: str = ""

    def nu(self, t):
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **dataclasses.asdict(self)}


@dataclasses.dataclass(frozen=True)
class Constant(DemographyProfile):
    kind = "constant"

    def nu(self, t):
        return np.ones_like(np.asarray(t, dtype=float))


@dataclasses.dataclass(frozen=True)
class ExponentialGrowth(DemographyProfile):
    """``nu(t) = exp(-rho t)``: growth at rate ``rho`` forwards in time."""

    rho: float
    kind = "exponential"

    def __post_init__(self):
        if not self.rho >= 0:
            raise ValueError(f"growth rate must be non-negative, got {self.rho}")

    def nu(self, t):
        return np.exp(-self.rho * np.asarray(t, dtype=float))


@dataclasses.dataclass(frozen=True)
class PiecewiseConstant(DemographyProfile):
    """
    ``nu = levels[i]`` on ``[breakpoints[i-1], breakpoints[i])`` with an
    implicit first breakpoint at 0, so ``len(levels) == len(breakpoints) + 1``.
    """

    breakpoints: tuple[float, ...]
    levels: tuple[float, ...]
    kind = "piecewise"

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(float(x) for x in self.breakpoints))
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))
        bp = np.asarray(self.breakpoints)
        if len(self.levels) != len(bp) + 1:
            raise ValueError("need exactly one more level than breakpoints")
        if len(bp) and (bp[0] <= 0 or np.any(np.diff(bp) <= 0)):
            raise ValueError("breakpoints must be positive and strictly increasing")
        if min(self.levels) <= 0:
            raise ValueError("population size levels must be positive")

    def nu(self, t):
        idx = np.searchsorted(self.breakpoints, np.asarray(t, dtype=float), side="right")
        return np.asarray(self.levels)[idx]


def profile_from_dict(d: dict[str, Any]) -> DemographyProfile:
    kind = d["kind"].lower()
    if kind == "constant":
        return Constant()
    if kind == "exponential":
        return ExponentialGrowth(float(d["rho"]))
    if kind == "piecewise":
        return PiecewiseConstant(tuple(d["breakpoints"]), tuple(d["levels"]))
    raise ValueError(f"unknown demography kind {kind!r}")


@dataclasses.dataclass(frozen=True)
class TimeScaleExponent:
    """
    The exponent ``beta`` in ``g(t) = int nu^-beta``, tagged with the
    reproduction model it comes from. Use the named constructors.
    """

    beta: float
    provenance: str
    parameter: float | None = None

    def __post_init__(self):
        if self.beta < 0 or (self.beta == 0 and self.provenance != "schweinsberg_beta"):
            raise ValueError(f"time-scale exponent must be positive, got {self.beta}")

    @classmethod
    def wright_fisher(cls) -> TimeScaleExponent:
        return cls(1.0, "wright_fisher")

    @classmethod
    def dirac_modified_moran(cls, gamma: float) -> TimeScaleExponent:
        """Modified Moran model with rare sweepstakes ``P(B) = N^-gamma``."""
        if not 0 < gamma < 2:
            raise ValueError("gamma must lie in (0, 2)")
        return cls(gamma, "dirac_modified_moran", gamma)

    @classmethod
    def beta_modified_moran(cls, a: float) -> TimeScaleExponent:
        """Variant A modified Moran model for Beta(a, b), ``0 <= a < 1``;
        ``a = 0`` is the standard Moran model."""
        if not 0 <= a < 1:
            raise ValueError("a must lie in [0, 1)")
        return cls(2.0 - a, "beta_modified_moran", a)

    @classmethod
    def standard_moran(cls) -> TimeScaleExponent:
        return cls.beta_modified_moran(0.0)

    @classmethod
    def schweinsberg_beta(cls, alpha: float) -> TimeScaleExponent:
        """Schweinsberg's heavy-tailed model; ``alpha = 1`` gives ``beta = 0``."""
        if not 1 <= alpha < 2:
            raise ValueError("alpha must lie in [1, 2)")
        return cls(alpha - 1.0, "schweinsberg_beta", alpha)

    def to_dict(self) -> dict[str, Any]:
        return {"provenance": self.provenance, "value": self.beta, "parameter": self.parameter}


_PROVENANCES = {
    "wright_fisher": lambda p: TimeScaleExponent.wright_fisher(),
    "dirac_modified_moran": TimeScaleExponent.dirac_modified_moran,
    "beta_modified_moran": TimeScaleExponent.beta_modified_moran,
    "standard_moran": lambda p: TimeScaleExponent.standard_moran(),
    "schweinsberg_beta": TimeScaleExponent.schweinsberg_beta,
}


def exponent_from_dict(d: dict[str, Any]) -> TimeScaleExponent:
    prov = d["provenance"].lower()
    if prov == "custom":
        return TimeScaleExponent(float(d["value"]), "custom")
    if prov not in _PROVENANCES:
        raise ValueError(f"unknown exponent provenance {prov!r}; expected one of {sorted(_PROVENANCES)}")
    return _PROVENANCES[prov](d.get("parameter"))


_TINY = np.finfo(float).tiny


def is_identity(profile: DemographyProfile, exponent: TimeScaleExponent) -> bool:
    # A growth rate so small that beta * rho underflows is numerically no
    # growth at all.
    return (
        isinstance(profile, Constant)
        or exponent.beta == 0
        or (isinstance(profile, ExponentialGrowth) and exponent.beta * profile.rho < _TINY)
    )


def _check_nonneg(x: np.ndarray, name: str) -> None:
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError(f"{name} must be non-negative")


def _piecewise_knots(profile: PiecewiseConstant, beta: float):
    bp = np.concatenate([[0.0], profile.breakpoints])
    slopes = np.asarray(profile.levels) ** (-beta)
    g_at = np.concatenate([[0.0], np.cumsum(slopes[:-1] * np.diff(bp))])
    return bp, slopes, g_at


def log_intensity(profile: DemographyProfile, exponent: TimeScaleExponent, t):
    """``log g(t)``, finite even when ``g`` itself overflows."""
    t = np.asarray(t, dtype=float)
    _check_nonneg(t, "t")
    if isinstance(profile, ExponentialGrowth) and not is_identity(profile, exponent):
        c = exponent.beta * profile.rho
        with np.errstate(divide="ignore"):
            x = c * t
            small = x <= 700.0
            out = np.where(small, np.log(np.expm1(np.minimum(x, 700.0))), x + np.log1p(-np.exp(-x)))
            return out - math.log(c)
    with np.errstate(divide="ignore"):
        return np.log(intensity(profile, exponent, t))


def intensity(profile: DemographyProfile, exponent: TimeScaleExponent, t):
    """
    ``g(t) = int_0^t nu(s)^-beta ds``. Accepts scalars or arrays; raises
    :class:`OverflowError` if ``g(t)`` is not representable.
    """
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    _check_nonneg(t, "t")
    if is_identity(profile, exponent):
        out = t.copy()
    elif isinstance(profile, ExponentialGrowth):
        c = exponent.beta * profile.rho
        x = c * t
        if np.any(x > 700.0):
            lg = log_intensity(profile, exponent, t)
            if np.any(lg > 709.0):
                raise OverflowError("time change exceeds the floating point range")
            out = np.exp(lg)
        else:
            out = np.expm1(x) / c
    elif isinstance(profile, PiecewiseConstant):
        bp, slopes, g_at = _piecewise_knots(profile, exponent.beta)
        i = np.searchsorted(bp, t, side="right") - 1
        out = g_at[i] + slopes[i] * (t - bp[i])
    else:
        raise TypeError(f"unsupported profile {profile!r}")
    return float(out) if scalar else out


def inverse_intensity(profile: DemographyProfile, exponent: TimeScaleExponent, u):
    """
    ``g^-1(u)``: maps internal coalescent time to real time. Closed form for
    every supported profile (``g`` is piecewise linear for piecewise
    constant sizes).
    """
    scalar = np.ndim(u) == 0
    u = np.asarray(u, dtype=float)
    _check_nonneg(u, "u")
    if np.any(np.isinf(u)):
        raise OverflowError("cannot invert the time change at infinity")
    if is_identity(profile, exponent):
        out = u.copy()
    elif isinstance(profile, ExponentialGrowth):
        c = exponent.beta * profile.rho
        out = np.log1p(c * u) / c
    elif isinstance(profile, PiecewiseConstant):
        bp, slopes, g_at = _piecewise_knots(profile, exponent.beta)
        i = np.searchsorted(g_at, u, side="right") - 1
        out = bp[i] + (u - g_at[i]) / slopes[i]
    else:
        raise TypeError(f"unsupported profile {profile!r}")
    return float(out) if scalar else out
