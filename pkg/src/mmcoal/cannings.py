"""
Modified Moran models and checks that their rescaled genealogies approach
the (time-changed) Lambda-n-coalescent.

In every generation one parent has ``U >= 2`` offspring, ``U - 1`` parents
have none and everybody else has exactly one. Under variant A, ``U`` is the
size of the first merger of a Lambda-N-coalescent; under variant B this
law is only used with probability ``N^-gamma_b`` and ``U = 2`` otherwise.

Looking backwards, the ``b`` ancestral lineages of the sample merge in a
generation iff at least two of them descend from the large family. The
number ``H`` that do is hypergeometric given ``U``. Generations with a
constant pair of consecutive population sizes share the same merger
probability, so runs of them are skipped in one step.
"""
from __future__ import annotations

import csv
import dataclasses
import functools
import io
import math
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

from . import demography
from ._rng import as_generator, task_generator
from .genealogy import Genealogy, draw_uniforms, functionals, simulate_from_uniforms
from .measures import Beta, CoalescentMeasure, Kingman, transition_distribution


def variant_a_pmf(measure: CoalescentMeasure, N: int) -> np.ndarray:
    """Law of ``U`` under variant A, as an array over ``0..N``."""
    if N < 2:
        raise ValueError(f"population size must be at least 2, got {N}")
    pmf = np.zeros(N + 1)
    pmf[2:] = transition_distribution(measure, N).probs
    return pmf


def variant_b_pmf(measure: CoalescentMeasure, N: int, gamma_b: float) -> np.ndarray:
    """Law of ``U`` under variant B, as an array over ``0..N``."""
    if not 1 < gamma_b < 2:
        raise ValueError(f"gamma_b must lie in (1, 2), got {gamma_b}")
    big = N ** (-gamma_b)
    pmf = big * variant_a_pmf(measure, N)
    pmf[2] += 1.0 - big
    return pmf


def sample_U_variantA(measure: CoalescentMeasure, N: int, rng_seed=None) -> int:
    """Draws the large family size under variant A."""
    rng = as_generator(rng_seed)
    return int(rng.choice(N + 1, p=variant_a_pmf(measure, N)))


def sample_U_variantB(measure: CoalescentMeasure, N: int, gamma_b: float, rng_seed=None) -> int:
    """Draws the large family size under variant B."""
    if not 1 < gamma_b < 2:
        raise ValueError(f"gamma_b must lie in (1, 2), got {gamma_b}")
    rng = as_generator(rng_seed)
    if rng.random() < N ** (-gamma_b):
        return sample_U_variantA(measure, N, rng)
    return 2


@dataclasses.dataclass(frozen=True)
class ModifiedMoranModel:
    """
    A modified Moran model with constant or exponentially varying size.

    :param measure: Coalescent measure defining the law of ``U``.
    :param N0: Population size at the sampling generation.
    :param variant: ``"A"`` or ``"B"``.
    :param gamma_b: Exponent of the sweepstake probability for variant B.
    :param rho: Growth rate; generation ``r`` back has
        ``floor(N0 (1 - c rho)^r)`` individuals with ``c = c_{N0}``.
    :param offspring_pmf: Optional custom law of ``U``: a function of the
        population size returning an array over ``0..N``.
    """

    measure: CoalescentMeasure
    N0: int
    variant: str = "A"
    gamma_b: float | None = None
    rho: float = 0.0
    offspring_pmf: Callable[[int], np.ndarray] | None = None

    def __post_init__(self):
        if self.N0 < 2:
            raise ValueError(f"population size must be at least 2, got {self.N0}")
        if self.variant not in ("A", "B"):
            raise ValueError(f"variant must be 'A' or 'B', got {self.variant!r}")
        if self.variant == "B" and (self.gamma_b is None or not 1 < self.gamma_b < 2):
            raise ValueError("variant B needs gamma_b in (1, 2)")
        if self.rho < 0:
            raise ValueError(f"growth rate must be non-negative, got {self.rho}")
        if self.rho * self.c_N0 >= 1:
            raise ValueError("rho * c_N must be below 1")

    def u_pmf(self, N: int) -> np.ndarray:
        if self.offspring_pmf is not None:
            pmf = np.asarray(self.offspring_pmf(N), dtype=float)
            if pmf.shape != (N + 1,) or pmf[:2].sum() > 0:
                raise ValueError("custom offspring law must be an array over 0..N with U >= 2")
            return pmf
        if self.variant == "A":
            return variant_a_pmf(self.measure, N)
        return variant_b_pmf(self.measure, N, self.gamma_b)

    def coalescence_probability(self, N: int | None = None) -> float:
        """``c_N = E[U(U - 1)] / (N (N - 1))`` for constant size ``N``."""
        N = self.N0 if N is None else N
        pmf = self.u_pmf(N)
        u = np.arange(N + 1)
        return float(pmf @ (u * (u - 1.0)) / (N * (N - 1.0)))

    @functools.cached_property
    def c_N0(self) -> float:
        return self.coalescence_probability(self.N0)

    @functools.cached_property
    def _laws(self) -> dict:
        return {}

    @functools.cached_property
    def _runs(self) -> list[tuple[int, float, int, int]]:
        # (first generation, end, N_r, N_{r+1}) of stretches with a constant size pair
        return []

    def _run(self, i: int) -> tuple[int, float, int, int]:
        runs = self._runs
        while len(runs) <= i:
            r = runs[-1][1] if runs else 0
            runs.append((r, self._run_end(r), self.size(r), self.size(r + 1)))
        return runs[i]

    def size(self, r: int) -> int:
        """Population size ``r`` generations before sampling."""
        if self.rho == 0:
            return self.N0
        return int(math.floor(self.N0 * (1.0 - self.c_N0 * self.rho) ** r))

    def _run_end(self, r: int) -> float:
        # First generation r' > r whose (N_r', N_r'+1) pair differs from r's.
        if self.rho == 0:
            return math.inf
        n_r, n_next = self.size(r), self.size(r + 1)
        if n_r != n_next or n_r < 2:
            return r + 1
        x = 1.0 - self.c_N0 * self.rho
        # largest s with N0 x^s >= n_r is where the size stays n_r
        last = math.floor(math.log(n_r / self.N0) / math.log(x))
        while self.size(last + 1) == n_r:
            last += 1
        while last > r and self.size(last) != n_r:
            last -= 1
        return max(last, r + 1)

    def profile(self) -> demography.DemographyProfile:
        """The limiting profile ``nu(t) = exp(-rho t)`` on the coalescent time scale."""
        return demography.ExponentialGrowth(self.rho) if self.rho > 0 else demography.Constant()

    def exponent(self) -> demography.TimeScaleExponent:
        """
        Exponent of the time change of the coalescent limit under growth.
        """
        if self.variant == "B":
            return demography.TimeScaleExponent.dirac_modified_moran(self.gamma_b)
        if isinstance(self.measure, Kingman):
            return demography.TimeScaleExponent.standard_moran()
        if isinstance(self.measure, Beta) and self.measure.a < 1:
            return demography.TimeScaleExponent.beta_modified_moran(self.measure.a)
        if self.rho == 0:
            return demography.TimeScaleExponent.wright_fisher()
        raise ValueError(
            f"no coalescent time change is known for variant A with {self.measure}; "
            "use variant B"
        )


def coalescence_probability(model: ModifiedMoranModel, N: int | None = None) -> float:
    """Exact pair coalescence probability per generation at constant size ``N``."""
    return model.coalescence_probability(N)


def coalescence_probability_mc(model: ModifiedMoranModel, N: int, mc_reps: int, rng_seed=None):
    """
    Monte Carlo check of ``c_N``: draws ``U`` and two distinct offspring and
    records whether both belong to the large family.
    """
    from .analytics import mc_estimate

    rng = as_generator(rng_seed)
    u = rng.choice(N + 1, size=mc_reps, p=model.u_pmf(N))
    first = rng.integers(0, N, size=mc_reps)
    second = rng.integers(0, N - 1, size=mc_reps)
    second = second + (second >= first)
    return mc_estimate((first < u) & (second < u))


def offspring_counts(model: ModifiedMoranModel, r: int, rng_seed=None) -> np.ndarray:
    """
    Offspring numbers of the ``N_{r+1}`` parents of generation ``r``.

    The large family comes first. Extra offspring from a size increase
    join it; on a decrease the offspring are thinned to a uniform subset.
    The counts always sum to ``N_r``.
    """
    rng = as_generator(rng_seed)
    n_off, n_par = model.size(r), model.size(r + 1)
    u = int(rng.choice(n_par + 1, p=model.u_pmf(n_par)))
    counts = np.ones(n_par, dtype=np.int64)
    counts[0] = u
    counts[1:u] = 0
    if n_off >= n_par:
        counts[0] += n_off - n_par
        return counts
    return rng.multivariate_hypergeometric(counts, n_off)


def _merger_law(model: ModifiedMoranModel, n_off: int, n_par: int, b: int) -> tuple[float, float, np.ndarray]:
    # Probability q that at least two of b lineages find the large family in
    # one generation (n_off offspring, n_par parents), the hazard
    # -log(1 - q) and the cumulative law of H on 2..b given a merger.
    key = (n_off, n_par, b)
    hit = model._laws.get(key)
    if hit is not None:
        return hit
    pmf = model.u_pmf(n_par)
    u = np.flatnonzero(pmf)
    w = pmf[u]
    if n_off >= n_par:
        pop, u = n_off, u + (n_off - n_par)
    else:
        pop = n_par
    h = np.arange(2, b + 1)
    U = u[:, None].astype(float)
    ok = (h[None, :] <= U) & (b - h[None, :] <= pop - U)
    lg = special.gammaln
    logp = (
        lg(b + 1) - lg(h + 1) - lg(b - h + 1)
        + lg(U + 1) - lg(np.maximum(U - h + 1, 1))
        + lg(pop - U + 1) - lg(np.maximum(pop - U - (b - h) + 1, 1))
        - lg(pop + 1) + lg(pop - b + 1)
    )
    law = (w[:, None] * np.where(ok, np.exp(np.where(ok, logp, 0.0)), 0.0)).sum(axis=0)
    q = min(float(law.sum()), 1.0)
    hazard = -math.log1p(-q) if q < 1 else math.inf
    cdf = np.cumsum(law)
    out = (q, hazard, cdf / cdf[-1] if q > 0 else cdf)
    model._laws[key] = out
    return out


@dataclasses.dataclass(frozen=True)
class DiscreteGenealogy:
    """
    Genealogy of a sample in a modified Moran model. Event times are
    generation numbers; at most one merger happens per generation.

    :param tree: Mergers with integer times.
    :param c_N: Pair coalescence probability used to rescale time.
    """

    tree: Genealogy
    c_N: float

    @property
    def absorption_generation(self) -> int:
        return int(self.tree.height)

    def partition(self, r: int) -> list[frozenset[int]]:
        """Ancestral partition of the sample ``r`` generations back."""
        t = self.tree
        blocks = {i: frozenset([i]) for i in range(t.n)}
        for e in range(t.num_events):
            if t.times[e] > r:
                break
            merged = frozenset().union(*(blocks.pop(int(c)) for c in t.event_children(e)))
            blocks[t.n + e] = merged
        return sorted(blocks.values(), key=min)

    def rescaled(self) -> Genealogy:
        """The genealogy with time measured in units of ``1 / c_N`` generations."""
        return self.tree.with_times(self.tree.times * self.c_N)


def _discrete_from_uniforms(model: ModifiedMoranModel, n: int, exps, uks, usub) -> DiscreteGenealogy:
    if n > model.N0:
        raise ValueError(f"sample size {n} exceeds the population size {model.N0}")
    active = list(range(n))
    b = n
    r = 0
    pos = 0
    times, ks, children = [], [], []
    e = 0
    ri = 0
    while b > 1:
        budget = float(exps[e])
        while True:
            start, end, n_off, n_par = model._run(ri)
            if r >= end:
                ri += 1
                continue
            if n_par < 2 or n_off < b:
                raise ValueError(
                    f"population shrank to {n_par} at generation {r + 1} before the sample coalesced"
                )
            q, hazard, cdf = _merger_law(model, n_off, n_par, b)
            if q > 0:
                need = max(math.ceil(budget / hazard), 1) if hazard < math.inf else 1
                if r + need <= end:
                    r += need
                    break
                budget -= hazard * (end - r)
            if end == math.inf:
                raise RuntimeError("merger probability is zero in a constant-size stretch")
            r = int(end)
            ri += 1
        k = 2 + int(np.searchsorted(cdf, uks[e], side="right"))
        k = min(k, b)
        merged = []
        for j in range(k):
            idx = j + int(usub[pos] * (b - j))
            pos += 1
            idx = min(idx, b - 1)
            active[j], active[idx] = active[idx], active[j]
            merged.append(active[j])
        times.append(float(r))
        ks.append(k)
        children.extend(merged)
        nb = b - k + 1
        active[0] = n + e
        src = b - 1
        for j in range(1, min(k, nb)):
            active[j] = active[src]
            src -= 1
        del active[nb:]
        b = nb
        e += 1
    tree = Genealogy(n, np.array(times), np.array(ks, dtype=np.int64), np.array(children, dtype=np.int64))
    return DiscreteGenealogy(tree, model.c_N0)


def simulate_discrete_genealogy(model: ModifiedMoranModel, n: int, rng_seed=None) -> DiscreteGenealogy:
    """
    Follows the ancestral lineages of ``n`` sampled individuals back
    through the generations until they have one common ancestor.

    Offspring generation ``r`` has ``N_r`` individuals and its parents
    ``N_{r+1}``. If ``N_r < N_{r+1}`` the offspring are a uniform subsample
    of the fixed-size model's ``N_{r+1}``; if ``N_r > N_{r+1}`` the extra
    ``N_r - N_{r+1}`` offspring belong to the large family.
    """
    if n < 2:
        raise ValueError(f"sample size must be at least 2, got {n}")
    rng = as_generator(rng_seed)
    return _discrete_from_uniforms(model, n, *draw_uniforms(n, rng))


@dataclasses.dataclass(frozen=True)
class ConvergenceRow:
    N: int
    c_N: float
    ks_height: float
    ks_length: float
    reps: int


@dataclasses.dataclass(frozen=True)
class ConvergenceReport:
    """Two-sample KS distances between rescaled discrete genealogies and the limit."""

    rows: list[ConvergenceRow]

    @property
    def decreasing(self) -> bool:
        """True if both KS statistics strictly decrease along the grid."""
        h = [r.ks_height for r in self.rows]
        L = [r.ks_length for r in self.rows]
        return all(a > b for a, b in zip(h, h[1:])) and all(a > b for a, b in zip(L, L[1:]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "c_N", "ks_height", "ks_length", "reps"])
        for r in self.rows:
            w.writerow([r.N, repr(r.c_N), repr(r.ks_height), repr(r.ks_length), r.reps])
        return buf.getvalue()


def convergence_check(
    model: ModifiedMoranModel,
    n: int,
    N_grid: Sequence[int],
    reps: int,
    rng_seed: int = 0,
) -> ConvergenceReport:
    """
    For each population size in ``N_grid`` (replacing ``model.N0``),
    simulates ``reps`` rescaled discrete genealogies and as many
    time-changed Lambda-n-coalescents, and records KS distances on tree
    height and total length.

    Replicate ``i`` of both samples is driven by the same random numbers
    (stream ``(rng_seed, i)``), for every ``N``. The coupling removes
    sampling noise that is common to both, so the distances track the
    discrepancy between the laws.
    """
    profile = model.profile()
    exponent = model.exponent()
    rows = []
    for N in N_grid:
        m = dataclasses.replace(model, N0=int(N))
        disc_h, disc_l, cont_h, cont_l = [], [], [], []
        for i in range(reps):
            u = draw_uniforms(n, task_generator(rng_seed, i))
            d = _discrete_from_uniforms(m, n, *u).rescaled()
            c = simulate_from_uniforms(m.measure, n, *u)
            if not demography.is_identity(profile, exponent):
                c = c.with_times(demography.inverse_intensity(profile, exponent, c.times))
            disc_h.append(d.height)
            cont_h.append(c.height)
            disc_l.append(functionals(d)["total_length"])
            cont_l.append(functionals(c)["total_length"])
        rows.append(
            ConvergenceRow(
                int(N), m.c_N0,
                float(stats.ks_2samp(disc_h, cont_h, method="asymp").statistic),
                float(stats.ks_2samp(disc_l, cont_l, method="asymp").statistic),
                reps,
            )
        )
    return ConvergenceReport(rows)
