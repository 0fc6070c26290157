"""
Exact and semi-exact quantities of Lambda-n-coalescents: root sharing
between a sample and a subsample, expected total branch length, and the
block frequency of a fixed individual for coalescents with dust.
"""
from __future__ import annotations

import dataclasses
import functools
import math

import numpy as np
from scipy import integrate, linalg, special

from . import demography
from ._rng import as_generator
from .genealogy import simulate
from .measures import (
    Beta,
    BolthausenSznitman,
    CoalescentMeasure,
    Dirac,
    Kingman,
    dust_profile,
    transition_distribution,
)

N_MAX = 2000
BSZ_N_MAX = 100_000
# Support cap for the Poisson-binomial tail count in the Bernoulli
# representation; its mean is only about log(n).
BSZ_SUPPORT_CAP = 200


# --------------------------------------------------------------------------
# Root sharing


class PnmTable:
    """
    Memoised probabilities ``p_{n,m}`` that the genealogy of ``[m]`` shares
    the root of the genealogy of ``[n]``.

    The table is filled bottom-up in ``n``: with ``b`` blocks of which
    ``c`` contain subsample leaves, a ``k``-merger takes ``l`` subsample
    blocks with hypergeometric probability and leads to ``(b - k + 1,
    c - l + 1)`` blocks if ``l > 1`` and ``(b - k + 1, c)`` otherwise.

    :param measure: The coalescent measure.
    :param m_max: Largest subsample size that will be requested.
    :param n_max: Largest sample size allowed.
    """

    def __init__(self, measure: CoalescentMeasure, m_max: int = 2, n_max: int = N_MAX):
        self.measure = measure
        self.n_max = n_max
        self.m_max = m_max
        # _p[b, c]: sharing probability with b blocks, c of them carrying
        # subsample leaves; only c <= min(b, m_max) is meaningful.
        self._p = np.zeros((2, m_max + 1))
        self._p[1, 1] = 1.0
        self._filled = 1

    def _extend(self, n: int) -> None:
        if n <= self._filled:
            return
        m_max = self.m_max
        p = np.zeros((n + 1, m_max + 1))
        p[: self._filled + 1] = self._p[: self._filled + 1]
        for b in range(self._filled + 1, n + 1):
            if b <= m_max:
                p[b, b] = 1.0
            tr = transition_distribution(self.measure, b)
            ks = np.arange(2, b + 1)
            keep = tr.probs > 0
            ks, probs = ks[keep], tr.probs[keep]
            for c in range(2, min(b - 1, m_max) + 1):
                ls = np.arange(0, min(c, ks.max()) + 1)
                kk, ll = np.meshgrid(ks, ls, indexing="ij")
                valid = (kk - ll >= 0) & (kk - ll <= b - c)
                kv = np.where(valid, kk, 2)
                lv = np.where(valid, ll, 0)
                w = np.where(valid, np.exp(_log_comb(b - c, kv - lv) + _log_comb(c, lv) - _log_comb(b, kv)), 0.0)
                new_c = np.where(lv > 1, c - lv + 1, c)
                vals = p[b - kv + 1, new_c]
                p[b, c] = float(probs @ (w * vals).sum(axis=1))
        self._p = p
        self._filled = n

    def __call__(self, n: int, m: int) -> float:
        if not 1 <= m <= n <= self.n_max:
            raise ValueError(f"need 1 <= m <= n <= {self.n_max}, got n={n}, m={m}")
        if m > self.m_max:
            raise ValueError(f"table built for m <= {self.m_max}, got m={m}")
        if m == n:
            return 1.0
        if m == 1:
            return 0.0
        self._extend(n)
        return float(self._p[n, m])


def _log_comb(n, k):
    return special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)


_TABLES: dict[CoalescentMeasure, PnmTable] = {}


def pnm_table(measure: CoalescentMeasure, m_max: int) -> PnmTable:
    """Shared table for ``measure`` covering subsample sizes up to ``m_max``."""
    table = _TABLES.get(measure)
    if table is None or table.m_max < m_max:
        grown = 2 * table.m_max if table is not None else 2
        table = PnmTable(measure, m_max=max(m_max, grown, 10))
        _TABLES[measure] = table
    return table


def p_nm(measure: CoalescentMeasure, n: int, m: int) -> float:
    """
    Probability that the genealogy of the subsample ``[m]`` contains the
    root of the genealogy of ``[n]``.

    :param measure: The coalescent measure.
    :param n: Sample size, at most :data:`N_MAX`.
    :param m: Subsample size, ``1 <= m <= n``.
    """
    if not 1 <= m <= n <= N_MAX:
        raise ValueError(f"need 1 <= m <= n <= N_MAX = {N_MAX} (recursion cap), got n={n}, m={m}")
    return pnm_table(measure, m)(n, m)


def p_nm_kingman_closed(n: int, m: int) -> float:
    """``(m - 1)(n + 1) / ((m + 1)(n - 1))`` for Kingman's coalescent."""
    if not 2 <= m <= n:
        raise ValueError(f"need 2 <= m <= n, got n={n}, m={m}")
    return (m - 1) * (n + 1) / ((m + 1) * (n - 1))


def p_nm_kingman_limit(m: int) -> float:
    """Limit of the Kingman probability as ``n`` grows: ``(m - 1) / (m + 1)``."""
    if m < 2:
        raise ValueError(f"need m >= 2, got {m}")
    return (m - 1) / (m + 1)


def _poisson_binomial(probs: np.ndarray, cap: int) -> tuple[np.ndarray, float]:
    # pmf on 0..cap of a sum of independent Bernoullis, plus the dropped mass
    pmf = np.zeros(cap + 1)
    pmf[0] = 1.0
    dropped = 0.0
    for r in probs:
        dropped += pmf[-1] * r
        pmf[1:] = pmf[1:] * (1.0 - r) + pmf[:-1] * r
        pmf[0] *= 1.0 - r
    return pmf, dropped


@dataclasses.dataclass(frozen=True)
class BszPnm:
    value: float
    dropped_mass: float


def p_nm_bsz_detailed(n: int, m: int) -> BszPnm:
    """
    Bolthausen-Sznitman root sharing via independent Bernoulli variables
    ``B_i`` with ``P(B_i = 1) = 1/i``:
    ``E[(B_1 + .. + B_{m-1}) / (B_1 + .. + B_{n-1})]``.

    The tail sum ``B_m + .. + B_{n-1}`` is tracked on ``0..BSZ_SUPPORT_CAP``;
    the probability of exceeding it is returned as ``dropped_mass``.
    """
    if not 2 <= m < n:
        raise ValueError(f"need 2 <= m < n, got n={n}, m={m}")
    if n > BSZ_N_MAX:
        raise MemoryError(f"n={n} exceeds the configured cap {BSZ_N_MAX}")
    head, _ = _poisson_binomial(1.0 / np.arange(2, m), m)
    tail, dropped = _poisson_binomial(1.0 / np.arange(m, n), BSZ_SUPPORT_CAP)
    a = np.arange(1, m + 2)[:, None]  # B_1 = 1 always
    c = np.arange(BSZ_SUPPORT_CAP + 1)[None, :]
    value = float(head @ (a / (a + c)) @ tail)
    return BszPnm(value, dropped)


def p_nm_bsz(n: int, m: int) -> float:
    """Value of :func:`p_nm_bsz_detailed`."""
    return p_nm_bsz_detailed(n, m).value


@dataclasses.dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with its standard error."""

    mean: float
    se: float
    reps: int

    def within(self, value: float, n_se: float = 3.0) -> bool:
        return abs(self.mean - value) <= n_se * self.se


def mc_estimate(samples) -> McEstimate:
    x = np.asarray(samples, dtype=float)
    return McEstimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), int(x.size))


def last_merger_sharing(block_sizes: np.ndarray, n: int, m: int) -> float:
    """
    Conditional root-sharing probability given the leaf counts of the
    blocks merged at the root: one minus the chance that ``m`` labels fall
    into a single one of them.
    """
    sizes = np.asarray(block_sizes, dtype=float)
    k = np.arange(m)
    same = np.prod((sizes[:, None] - k[None, :]) / (n - k[None, :]), axis=1)
    return float(1.0 - np.clip(same, 0.0, None).sum())


def p_nm_last_merger_mc(measure: CoalescentMeasure, n: int, m: int, reps: int, rng_seed=None) -> McEstimate:
    """
    Monte Carlo estimate of ``p_{n,m}`` from the block sizes merged at the
    root of simulated genealogies.
    """
    if not 2 <= m <= n:
        raise ValueError(f"need 2 <= m <= n, got n={n}, m={m}")
    if reps < 100:
        raise ValueError(f"need at least 100 replicates, got {reps}")
    rng = as_generator(rng_seed)
    out = np.empty(reps)
    for r in range(reps):
        tree = simulate(measure, n, rng)
        sizes = tree.leaf_counts[tree.event_children(tree.num_events - 1)]
        out[r] = last_merger_sharing(sizes, n, m)
    return mc_estimate(out)


# --------------------------------------------------------------------------
# Total branch length


def _transition_rows(measure: CoalescentMeasure, n: int):
    return [None, None] + [transition_distribution(measure, b) for b in range(2, n + 1)]


def _expected_length_constant(measure: CoalescentMeasure, n: int) -> float:
    if isinstance(measure, Kingman):
        return 2.0 * float(np.sum(1.0 / np.arange(1, n)))
    e = np.zeros(n + 1)
    for b in range(2, n + 1):
        tr = transition_distribution(measure, b)
        # k = 2..b leads to b - k + 1 = b - 1 .. 1
        e[b] = b / tr.total_rate + float(tr.probs @ e[b - 1 : 0 : -1])
    return float(e[n])


def _discounted_occupation(measure: CoalescentMeasure, n: int, s: float) -> float:
    # R_b(s) = E int_0^inf B(u) e^{-s u} du started from b blocks
    if isinstance(measure, Kingman):
        b = np.arange(2, n + 1)
        lam = b * (b - 1) / 2.0
        stay = lam / (lam + s)
        # probability of reaching state b from n, discounted
        reach = np.concatenate([np.cumprod(stay[::-1])[::-1][1:], [1.0]])
        return float(np.sum(b / (lam + s) * reach))
    r = np.zeros(n + 1)
    for b in range(2, n + 1):
        tr = transition_distribution(measure, b)
        lam = tr.total_rate
        r[b] = (b + lam * float(tr.probs @ r[b - 1 : 0 : -1])) / (lam + s)
    return float(r[n])


def _generator_matrix(measure: CoalescentMeasure, n: int) -> np.ndarray:
    # Sub-generator of the block-counting chain on states n, n-1, .., 2.
    q = np.zeros((n - 1, n - 1))
    for b in range(2, n + 1):
        i = n - b
        tr = transition_distribution(measure, b)
        q[i, i] = -tr.total_rate
        for k in range(2, b):
            q[i, n - (b - k + 1)] += tr.total_rate * tr.probs[k - 2]
    return q


def _expected_length_piecewise(measure, n, profile: demography.PiecewiseConstant, beta: float) -> float:
    q = _generator_matrix(measure, n)
    blocks = np.arange(n, 1, -1, dtype=float)
    bp, slopes, g_at = demography._piecewise_knots(profile, beta)
    q_inv = np.linalg.inv(q)
    start = np.zeros(n - 1)
    start[0] = 1.0
    total = 0.0
    dist = start
    for i in range(len(slopes)):
        if i + 1 < len(slopes):
            du = g_at[i + 1] - g_at[i]
            step = linalg.expm(q * du)
            occupancy = dist @ q_inv @ (step - np.eye(n - 1))
            total += float(occupancy @ blocks) / slopes[i]
            dist = dist @ step
        else:
            occupancy = dist @ (-q_inv)
            total += float(occupancy @ blocks) / slopes[i]
    return total


def expected_total_length(
    measure: CoalescentMeasure,
    n: int,
    profile: demography.DemographyProfile | None = None,
    exponent: demography.TimeScaleExponent | None = None,
) -> float:
    """
    Expected total branch length ``E(L_n)`` in real time.

    Without a profile (or with an identity time change) this is the
    recursion ``E(L_b) = b / rate(b) + sum_k P(k | b) E(L_{b-k+1})``. Under
    exponential growth it is the integral of the discounted block-count
    occupation ``int_0^inf e^-x R_n(beta rho x) dx``; under piecewise
    constant sizes it is evaluated with matrix exponentials of the
    block-counting generator.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if profile is None or exponent is None or demography.is_identity(profile, exponent):
        return _cached_length(measure, n)
    if isinstance(profile, demography.ExponentialGrowth):
        kappa = exponent.beta * profile.rho
        val, _ = integrate.quad(
            lambda x: math.exp(-x) * _discounted_occupation(measure, n, kappa * x),
            0, np.inf, epsabs=0, epsrel=1e-10, limit=200,
        )
        return val
    if isinstance(profile, demography.PiecewiseConstant):
        return _expected_length_piecewise(measure, n, profile, exponent.beta)
    raise TypeError(f"unsupported profile {profile!r}")


@functools.lru_cache(maxsize=256)
def _cached_length(measure: CoalescentMeasure, n: int) -> float:
    return _expected_length_constant(measure, n)


# --------------------------------------------------------------------------
# Minimal observable clades and block frequencies


def bsz_f1T_beta_params(theta: float) -> tuple[float, float]:
    """
    Parameters of the Beta law of the limiting scaled minimal observable
    clade size under the Bolthausen-Sznitman coalescent.
    """
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    h = theta / 2.0
    return 1.0 / (1.0 + h), h / (1.0 + h)


def expected_scaled_observable_clade(measure: CoalescentMeasure, n: int, theta: float) -> float:
    """
    Exact ``E(O_n(1) / n)`` for finite ``n``.

    Follows the block of leaf 1 down the block-counting chain. Before its
    first merger its mutations are private. Afterwards, with ``b`` blocks,
    a mutation (rate ``theta / 2``) stops the chain and reports the block
    size ``c``; otherwise a ``k``-merger involves the block with
    probability ``k / b`` and adds ``(k - 1)(n - c)/(b - 1)`` leaves in
    expectation. The answer is affine in ``c`` at every stage, which gives
    an ``O(n^2)`` recursion.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    h = theta / 2.0
    # after the first merger: E[c_stop | b, c] = alpha[b] + beta[b] * c
    alpha = np.zeros(n + 1)
    beta = np.zeros(n + 1)
    beta[1] = 1.0
    # before the first merger: E[c_stop | b]
    before = np.zeros(n + 1)
    for b in range(2, n + 1):
        tr = transition_distribution(measure, b)
        k = np.arange(2, b + 1)
        p = tr.probs
        nb = b - k + 1
        inv = k / b
        frac = (k - 1) / (b - 1)
        # involved: c -> c + frac (n - c) = frac n + (1 - frac) c
        a_inv = alpha[nb] + beta[nb] * frac * n
        b_inv = beta[nb] * (1.0 - frac)
        a_next = float(p @ (inv * a_inv + (1 - inv) * alpha[nb]))
        b_next = float(p @ (inv * b_inv + (1 - inv) * beta[nb]))
        stop = h / (h + tr.total_rate)
        alpha[b] = (1 - stop) * a_next
        beta[b] = stop + (1 - stop) * b_next
        first = alpha[nb] + beta[nb] * (1 + frac * (n - 1))
        before[b] = float(p @ (inv * first + (1 - inv) * before[nb]))
    return float(before[n] / n)


@dataclasses.dataclass(frozen=True)
class DustJumpChain:
    """
    The jump chain of the asymptotic frequency of the block of individual
    1 for a coalescent with dust, simulated by the paintbox.

    Poisson points ``(t, x)`` arrive at total rate ``int x^-2 Lambda(dx)``
    (finite for the supported measures). At each point a fraction ``x`` of
    the remaining dust forms a new chunk, and every existing block, as well
    as individual 1 while still in the dust, joins the merger with
    probability ``x``. Blocks are tracked as sets of chunk indices, so
    frequencies are exact.
    """

    measure: CoalescentMeasure
    mu_minus_one: float
    gamma: float
    point_rate: float

    @classmethod
    def for_measure(cls, measure: CoalescentMeasure) -> DustJumpChain:
        prof = dust_profile(measure)
        if not prof.has_dust:
            raise ValueError(f"{measure} has no dust")
        if isinstance(measure, Dirac):
            rate = 1.0 / measure.p**2
        elif isinstance(measure, Beta) and measure.a > 2.0:
            rate = math.exp(special.betaln(measure.a - 2, measure.b) - special.betaln(measure.a, measure.b))
        else:
            raise NotImplementedError(
                "exact paintbox simulation needs finitely many Poisson points per unit time "
                "(Dirac, or Beta with a > 2)"
            )
        return cls(measure, prof.mu_minus_one, prof.gamma, rate)

    def _draw_x(self, rng: np.random.Generator) -> float:
        if isinstance(self.measure, Dirac):
            return self.measure.p
        return float(rng.beta(self.measure.a - 2, self.measure.b))

    def run(self, rng: np.random.Generator, k_max: int | None = None, theta: float | None = None):
        """
        Runs one realisation.

        With ``k_max``, returns the chunk sets (bitmasks) and chunk masses
        after each of the first ``k_max`` jumps of block 1. With ``theta``,
        stops at the first mutation on the lineage of 1 after its first jump
        and returns the frequency at that moment.
        """
        masses: list[float] = []
        dust = 1.0
        blocks: list[int] = []  # bitmasks of chunk indices, excluding block 1
        one = 0  # bitmask of block 1; 0 while 1 is in the dust
        jumps: list[int] = []
        stop_prob = None
        if theta is not None:
            stop_prob = (theta / 2.0) / (theta / 2.0 + self.point_rate)
        while True:
            if stop_prob is not None and one and rng.random() < stop_prob:
                return sum(masses[i] for i in range(len(masses)) if one >> i & 1)
            x = self._draw_x(rng)
            chunk = len(masses)
            masses.append(x * dust)
            dust *= 1.0 - x
            joined = 1 << chunk
            if blocks:
                flips = rng.random(len(blocks)) < x
                keep = []
                for blk, f in zip(blocks, flips):
                    if f:
                        joined |= blk
                    else:
                        keep.append(blk)
                blocks = keep
            if rng.random() < x:
                one |= joined
                jumps.append(one)
                if k_max is not None and len(jumps) == k_max:
                    return jumps, masses
            else:
                blocks.append(joined)

    def frequencies(self, rng: np.random.Generator, k_max: int) -> np.ndarray:
        jumps, masses = self.run(rng, k_max=k_max)
        m = np.array(masses)
        return np.array([m[_bits(mask, len(m))].sum() for mask in jumps])


def _bits(mask: int, length: int) -> np.ndarray:
    return np.array([(mask >> i) & 1 for i in range(length)], dtype=bool)


def dust_jump_chain_mc(measure: CoalescentMeasure, k_max: int, reps: int, rng_seed=None) -> list[McEstimate]:
    """
    Monte Carlo estimates of ``E(f_1[k])`` for ``k = 1..k_max``.
    """
    chain = DustJumpChain.for_measure(measure)
    rng = as_generator(rng_seed)
    f = np.array([chain.frequencies(rng, k_max) for _ in range(reps)])
    return [mc_estimate(f[:, k]) for k in range(k_max)]


def dust_f1_first_jump_samples(p: float, reps: int, rng_seed=None) -> list[frozenset[int]]:
    """
    Chunk index sets ``J`` (1-based) of the block of 1 after its first jump
    under the Dirac coalescent; ``f_1[1] = sum_{i in J} p q^(i-1)``.
    """
    chain = DustJumpChain.for_measure(Dirac(p))
    rng = as_generator(rng_seed)
    out = []
    for _ in range(reps):
        jumps, masses = chain.run(rng, k_max=1)
        mask = jumps[0]
        out.append(frozenset(i + 1 for i in range(len(masses)) if mask >> i & 1))
    return out


def dust_expected_f1(measure: CoalescentMeasure, k: int) -> float:
    """``E(f_1[k]) = 1 - (1 - gamma)^k``."""
    prof = dust_profile(measure)
    if not prof.has_dust:
        raise ValueError(f"{measure} has no dust")
    return 1.0 - (1.0 - prof.gamma) ** k


@dataclasses.dataclass(frozen=True)
class DiracFirstJumpPmf:
    """Atoms of ``f_1[1]`` indexed by the chunk set ``J``."""

    p: float
    atoms: dict[frozenset[int], float]

    @property
    def total_mass(self) -> float:
        return float(sum(self.atoms.values()))

    def value(self, chunks: frozenset[int]) -> float:
        q = 1.0 - self.p
        return float(sum(self.p * q ** (i - 1) for i in chunks))

    def by_value(self) -> dict[float, float]:
        out: dict[float, float] = {}
        for J, prob in self.atoms.items():
            x = self.value(J)
            out[x] = out.get(x, 0.0) + prob
        return out


def dirac_f1_first_jump_pmf(p: float, depth: int, min_prob: float = 1e-13) -> DiracFirstJumpPmf:
    """
    Distribution of the block frequency of individual 1 after its first
    jump under ``Lambda = delta_p``, for chunk sets with largest element
    ``j <= depth``:

    ``P(J) = p q^(j-1) prod_{i in J, i<j} P(Y+i in J) prod_{i notin J, i<j} P(Y+i notin J)``

    with ``Y`` geometric on ``{1, 2, ..}`` with success probability ``p``.
    Chunk sets of probability below ``min_prob`` are pruned; the returned
    total mass shows what was covered.
    """
    if not 0.5 <= p < 1.0:
        raise ValueError(
            "p must lie in [1/2, 1): for smaller p different chunk sets can give the same "
            "frequency, so the atoms of f_1[1] are not identified by the chunk set"
        )
    q = 1.0 - p
    atoms: dict[frozenset[int], float] = {}

    def hit(i: int, members: list[int]) -> float:
        # P(Y + i in J) for J restricted to indices above i
        return sum(p * q ** (l - i - 1) for l in members)

    for j in range(1, depth + 1):
        top = p * q ** (j - 1)
        if top < min_prob:
            break
        stack = [(j - 1, top, [j])]
        while stack:
            i, prob, members = stack.pop()
            if i == 0:
                atoms[frozenset(members)] = prob
                continue
            h = hit(i, members)
            if prob * h >= min_prob:
                stack.append((i - 1, prob * h, members + [i]))
            if prob * (1 - h) >= min_prob:
                stack.append((i - 1, prob * (1 - h), members))
    return DiracFirstJumpPmf(p, atoms)


@dataclasses.dataclass(frozen=True)
class OnKMeans:
    """
    Candidate values of the limit of ``E(O_n / n)`` for a coalescent with
    dust.

    :param printed: The closed form ``1 - theta/(2 mu) * a/(1-a)``.
    :param naive: Mixture of ``E(f_1[k])`` over ``K`` geometric with success
        probability ``mu/(mu + theta/2)`` on ``{1, 2, ..}``.
    :param conventions: Mixtures for each geometric convention, keyed by
        ``(success, support_start)`` where ``success`` is ``"rate_ratio"``
        for ``mu/(mu + theta/2)`` or ``"complement"`` for
        ``(theta/2)/(mu + theta/2)``.
    """

    printed: float
    naive: float
    conventions: dict[tuple[str, int], float]

    @property
    def exchangeable(self) -> float:
        """The convention implied by memoryless competition of mutation
        and jump clocks after the first jump."""
        return self.conventions[("complement", 1)]


def _geometric_mixture(success: float, start: int, gamma: float) -> float:
    keep = (1.0 - success) * (1.0 - gamma)
    if start == 1:
        return 1.0 - success * (1.0 - gamma) / (1.0 - keep)
    return 1.0 - success / (1.0 - keep)


def dust_onK_mean(measure: CoalescentMeasure, theta: float) -> OnKMeans:
    """
    Closed-form candidates for ``E(f_1[K])``, the limiting expected scaled
    minimal observable clade size of a coalescent with dust.
    """
    prof = dust_profile(measure)
    if not prof.has_dust:
        raise ValueError(f"{measure} has no dust")
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    mu, h, gamma = prof.mu_minus_one, theta / 2.0, prof.gamma
    a = (1.0 - measure.total_mass / mu) * (h / (h + mu))
    printed = 1.0 - h / mu * a / (1.0 - a)
    conventions = {
        (name, start): _geometric_mixture(s, start, gamma)
        for name, s in (("rate_ratio", mu / (mu + h)), ("complement", h / (mu + h)))
        for start in (1, 0)
    }
    return OnKMeans(printed, conventions[("rate_ratio", 1)], conventions)


def dust_onK_mc(measure: CoalescentMeasure, theta: float, reps: int, rng_seed=None) -> McEstimate:
    """
    Monte Carlo of ``f_1[K]``: the frequency of the block of 1 when the
    first mutation after its first jump hits its lineage.
    """
    chain = DustJumpChain.for_measure(measure)
    rng = as_generator(rng_seed)
    return mc_estimate([chain.run(rng, theta=theta) for _ in range(reps)])


def arbitrate(estimate: McEstimate, candidates: dict) -> tuple:
    """
    The candidate closest to a Monte Carlo estimate, with its distance in
    standard errors.
    """
    key = min(candidates, key=lambda k: abs(candidates[k] - estimate.mean))
    return key, abs(candidates[key] - estimate.mean) / estimate.se
