"""
Coalescent measures on [0, 1] and the merger rates they induce.

A Lambda-coalescent is fully described by a finite measure on the unit
interval. With ``b`` blocks present, any particular ``k`` of them merge at
rate ``lambda_{b,k} = int x^(k-2) (1-x)^(b-k) Lambda(dx)``. This module
provides the supported families together with closed forms for those
rates, the jump-chain transition law of the block-counting process and the
dust constants.
"""
from __future__ import annotations

import dataclasses
import functools
import math
from typing import Any, ClassVar

import numpy as np
from scipy import special


class CoalescentMeasure:
    """
    Base class for the finite measures supported by the toolkit.

    Subclasses are frozen dataclasses, so measures are hashable and can be
    used as cache keys.
    """

    family: ClassVar[str] = ""

    @property
    def total_mass(self) -> float:
        return 1.0

    def log_rates(self, n: int) -> np.ndarray:
        """
        Returns ``log(lambda_{n,k})`` for ``k = 2, ..., n`` (``-inf`` for
        zero rates).
        """
        raise NotImplementedError

    def rate(self, n: int, k: int) -> float:
        return float(np.exp(self.log_rates(n)[k - 2]))

    def params(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "params": self.params()}

    def __str__(self) -> str:
        inner = ", ".join(f"{k}={v:g}" for k, v in self.params().items())
        return f"{self.family}({inner})"


@dataclasses.dataclass(frozen=True)
class Kingman(CoalescentMeasure):
    """Point mass at 0: only binary mergers, each pair at rate 1."""

    family: ClassVar[str] = "kingman"

    def log_rates(self, n):
        out = np.full(n - 1, -np.inf)
        out[0] = 0.0
        return out


@dataclasses.dataclass(frozen=True)
class Beta(CoalescentMeasure):
    """
    ``Lambda = Beta(a, b)``. The Beta(2 - alpha, alpha) coalescents of
    sweepstake reproduction are built with :func:`beta_from_alpha`.
    """

    a: float
    b: float
    family: ClassVar[str] = "beta"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"Beta parameters must be positive, got a={self.a}, b={self.b}")

    def log_rates(self, n):
        k = np.arange(2, n + 1)
        return special.betaln(k - 2 + self.a, n - k + self.b) - special.betaln(self.a, self.b)


@dataclasses.dataclass(frozen=True)
class BolthausenSznitman(Beta):
    """The uniform measure on [0, 1], i.e. Beta(1, 1)."""

    a: float = dataclasses.field(default=1.0, init=False)
    b: float = dataclasses.field(default=1.0, init=False)
    family: ClassVar[str] = "bolthausen_sznitman"

    def params(self):
        return {}


@dataclasses.dataclass(frozen=True)
class Dirac(CoalescentMeasure):
    """Point mass at ``p`` in (0, 1)."""

    p: float
    family: ClassVar[str] = "dirac"

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"Dirac atom must lie in (0, 1), got p={self.p}")

    def log_rates(self, n):
        k = np.arange(2, n + 1)
        return (k - 2) * math.log(self.p) + (n - k) * math.log1p(-self.p)


@dataclasses.dataclass(frozen=True)
class EldonWakeley(CoalescentMeasure):
    """
    Sweepstake limit with ``gamma = 2``: the mixture
    ``2/(2+psi^2) delta_0 + psi^2/(2+psi^2) delta_psi``.
    """

    psi: float
    family: ClassVar[str] = "eldon_wakeley"

    def __post_init__(self):
        if not 0.0 < self.psi < 1.0:
            raise ValueError(f"psi must lie in (0, 1), got psi={self.psi}")

    @property
    def kingman_weight(self) -> float:
        return 2.0 / (2.0 + self.psi**2)

    @property
    def dirac_weight(self) -> float:
        return self.psi**2 / (2.0 + self.psi**2)

    def log_rates(self, n):
        dirac = math.log(self.dirac_weight) + Dirac(self.psi).log_rates(n)
        dirac[0] = np.logaddexp(dirac[0], math.log(self.kingman_weight))
        return dirac


FAMILIES: dict[str, type[CoalescentMeasure]] = {
    cls.family: cls for cls in (Kingman, Beta, BolthausenSznitman, Dirac, EldonWakeley)
}


def beta_from_alpha(alpha: float) -> Beta:
    """Returns the Beta(2 - alpha, alpha) measure, or BSZ when alpha == 1."""
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if alpha == 1.0:
        return BolthausenSznitman()
    return Beta(2.0 - alpha, alpha)


def measure_from_dict(d: dict[str, Any]) -> CoalescentMeasure:
    """
    Inverse of :meth:`CoalescentMeasure.to_dict`. Besides the family
    parameters, a Beta measure may be given as ``{"alpha": ...}``.
    """
    family = d["family"].lower()
    params = dict(d.get("params", {}))
    if family not in FAMILIES:
        raise ValueError(f"unknown measure family {family!r}; expected one of {sorted(FAMILIES)}")
    if family == "beta" and "alpha" in params:
        return beta_from_alpha(float(params.pop("alpha")))
    return FAMILIES[family](**{k: float(v) for k, v in params.items()})


def _check_n(n: int) -> None:
    if n < 2:
        raise ValueError(f"need at least two blocks, got n={n}")


def merger_rate(measure: CoalescentMeasure, n: int, k: int) -> float:
    """
    Rate ``lambda_{n,k}`` at which a particular set of ``k`` out of ``n``
    blocks merges.
    """
    _check_n(n)
    if not 2 <= k <= n:
        raise ValueError(f"k must lie in [2, n], got n={n}, k={k}")
    return measure.rate(n, k)


@dataclasses.dataclass(frozen=True)
class Transition:
    """Jump-chain law of the block-counting process with ``n`` blocks."""

    n: int
    total_rate: float
    probs: np.ndarray  # probs[k - 2] = P(merger of k blocks)

    def prob(self, k: int) -> float:
        return float(self.probs[k - 2])


@functools.lru_cache(maxsize=4096)
def transition_distribution(measure: CoalescentMeasure, n: int) -> Transition:
    """
    Total event rate ``sum_k C(n,k) lambda_{n,k}`` and the probabilities
    ``C(n,k) lambda_{n,k} / total`` for ``k = 2..n``. Evaluated in log
    space, so large ``n`` is safe.
    """
    _check_n(n)
    k = np.arange(2, n + 1)
    logw = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
    logw = logw + measure.log_rates(n)
    top = logw.max()
    if not np.isfinite(top):
        raise RuntimeError(f"{measure} has zero total merger rate at n={n}")
    probs = np.exp(logw - top)
    mass = probs.sum()
    log_total = top + math.log(mass)
    probs /= mass
    probs.setflags(write=False)
    return Transition(n, float(np.exp(log_total)), probs)


@dataclasses.dataclass(frozen=True)
class DustProfile:
    """
    ``mu_minus_one = int x^-1 Lambda(dx)``; the coalescent has dust iff it
    is finite, and ``gamma = Lambda([0,1]) / mu_minus_one`` then gives the
    mean stick-breaking fraction of the block frequency jump chain.
    """

    mu_minus_one: float
    has_dust: bool
    gamma: float | None


def dust_profile(measure: CoalescentMeasure) -> DustProfile:
    if isinstance(measure, Dirac):
        mu = 1.0 / measure.p
    elif isinstance(measure, Beta) and measure.a > 1.0:
        mu = (measure.a + measure.b - 1.0) / (measure.a - 1.0)
    else:
        # Kingman and Eldon-Wakeley carry an atom at 0; Beta with a <= 1
        # has a non-integrable x^(a-2) singularity.
        return DustProfile(math.inf, False, None)
    return DustProfile(mu, True, measure.total_mass / mu)
