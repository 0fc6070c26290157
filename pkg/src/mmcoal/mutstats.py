"""
Infinite-sites mutations on a genealogy and the summary statistics used
for model selection.

Mutations fall on every branch as a Poisson process of rate ``theta / 2``;
each one creates a new segregating site carried by exactly the leaves below
its branch. Statistics are computed from the resulting ``S x n`` boolean
genotype matrix.
"""
from __future__ import annotations

import dataclasses
from typing import Iterable, Sequence

import numpy as np

from ._rng import as_generator
from .genealogy import Genealogy

QUANTILE_LEVELS = (0.1, 0.3, 0.5, 0.7, 0.9)
# Linear interpolation between order statistics (position q(N-1) + 1).
QUANTILE_METHOD = "linear"


def _qnames(prefix: str) -> list[str]:
    return [f"{prefix}_q{int(round(q * 100)):02d}" for q in QUANTILE_LEVELS]


FEATURE_GROUPS: dict[str, list[str]] = {
    "AF": _qnames("AF"),
    "S": ["S"],
    "pi": ["pi"],
    "Ham": _qnames("Ham"),
    "r2": _qnames("r2"),
    "O": _qnames("O") + ["O_mean", "O_sd", "O_harmonic_mean"],
}
FEATURE_NAMES: list[str] = [name for group in FEATURE_GROUPS.values() for name in group]


@dataclasses.dataclass(frozen=True, eq=False)
class SiteMatrix:
    """
    Segregating sites of a sample of ``n`` leaves.

    :param n: Sample size.
    :param genotypes: Boolean array of shape ``(S, n)``; entry ``(s, i)``
        is true if leaf ``i`` carries the derived allele at site ``s``.
    """

    n: int
    genotypes: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.genotypes, dtype=bool).reshape(-1, self.n)
        counts = g.sum(axis=1)
        if np.any(counts < 1) or np.any(counts > self.n - 1):
            raise ValueError("every site must be carried by between 1 and n - 1 leaves")
        g.setflags(write=False)
        object.__setattr__(self, "genotypes", g)

    @classmethod
    def from_leaf_sets(cls, n: int, sites: Iterable[Iterable[int]]) -> SiteMatrix:
        """Builds the matrix from the leaf ids (``0..n-1``) carrying each site."""
        rows = []
        for leaves in sites:
            row = np.zeros(n, dtype=bool)
            row[list(leaves)] = True
            rows.append(row)
        return cls(n, np.array(rows, dtype=bool).reshape(-1, n))

    @property
    def num_sites(self) -> int:
        return self.genotypes.shape[0]

    @property
    def allele_counts(self) -> np.ndarray:
        return self.genotypes.sum(axis=1)

    @property
    def sites(self) -> list[frozenset[int]]:
        return [frozenset(np.flatnonzero(row).tolist()) for row in self.genotypes]


def drop_mutations(genealogy: Genealogy, theta: float, rng_seed=None) -> SiteMatrix:
    """
    Places ``Poisson(theta / 2 * length)`` mutations on every branch.

    :param genealogy: The genealogy to mutate.
    :param theta: Scaled mutation rate, positive.
    :param rng_seed: Integer seed or :class:`numpy.random.Generator`.
    """
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    rng = as_generator(rng_seed)
    lengths = genealogy.branch_lengths
    counts = rng.poisson(theta / 2.0 * lengths)
    nodes = np.flatnonzero(counts)
    rows = genealogy.clade_membership(nodes)
    return SiteMatrix(genealogy.n, np.repeat(rows, counts[nodes], axis=0))


def sfs(matrix: SiteMatrix) -> np.ndarray:
    """Site frequency spectrum ``xi_1 .. xi_{n-1}``."""
    return np.bincount(matrix.allele_counts, minlength=matrix.n)[1 : matrix.n]


def quantiles(values: np.ndarray) -> np.ndarray:
    """The configured quantiles, all zero for an empty sample."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(len(QUANTILE_LEVELS))
    return np.quantile(values, QUANTILE_LEVELS, method=QUANTILE_METHOD)


def hamming_distances(matrix: SiteMatrix) -> np.ndarray:
    """Pairwise Hamming distances over all ``n(n-1)/2`` leaf pairs."""
    g = matrix.genotypes.astype(np.int64)
    shared = g.T @ g
    carried = g.sum(axis=0)
    d = carried[:, None] + carried[None, :] - 2 * shared
    return d[np.triu_indices(matrix.n, 1)]


def r2_values(matrix: SiteMatrix) -> np.ndarray:
    """Squared allele frequency correlation over all pairs of sites."""
    s = matrix.num_sites
    if s < 2:
        return np.zeros(0)
    g = matrix.genotypes.astype(float)
    freq = g.mean(axis=1)
    joint = (g @ g.T) / matrix.n
    cov = joint - np.outer(freq, freq)
    var = freq * (1.0 - freq)
    r2 = cov**2 / np.outer(var, var)
    return r2[np.triu_indices(s, 1)]


def classic_stats(matrix: SiteMatrix) -> dict[str, float | np.ndarray]:
    """
    Number of sites, nucleotide diversity and quantiles of the allele
    counts, pairwise Hamming distances and pairwise ``r^2``. All quantiles
    are zero without sites, the ``r^2`` quantiles also with a single site.
    """
    ham = hamming_distances(matrix)
    s = matrix.num_sites
    return {
        "S": float(s),
        "pi": float(ham.mean()) if s else 0.0,
        "AF_quantiles": quantiles(matrix.allele_counts),
        "Ham_quantiles": quantiles(ham) if s else np.zeros(len(QUANTILE_LEVELS)),
        "r2_quantiles": quantiles(r2_values(matrix)),
    }


def pi_from_sfs(xi: np.ndarray) -> float:
    """Nucleotide diversity from the SFS: ``sum i (n - i) xi_i / C(n, 2)``."""
    n = len(xi) + 1
    i = np.arange(1, n)
    return float((i * (n - i) * xi).sum() / (n * (n - 1) / 2))


def observable_clade_vector(matrix: SiteMatrix) -> np.ndarray:
    """
    ``O(i)`` for every leaf: the smallest allele count above one among the
    sites carried by ``i``, or ``n`` if ``i`` carries no such site.
    """
    counts = matrix.allele_counts
    shared = matrix.genotypes & (counts >= 2)[:, None]
    cand = np.where(shared, counts[:, None], matrix.n)
    if cand.shape[0] == 0:
        return np.full(matrix.n, matrix.n, dtype=np.int64)
    return cand.min(axis=0).astype(np.int64)


def observable_clade_of_leaf(genealogy: Genealogy, theta: float, leaf: int = 0, rng_seed=None) -> int:
    """
    ``O(leaf)`` under infinite-sites mutations at rate ``theta / 2``,
    drawing mutations only on the ancestral path of ``leaf``. Has the law
    of ``observable_clade_vector(drop_mutations(genealogy, theta))[leaf]``
    at a fraction of the cost for large samples.
    """
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if not 0 <= leaf < genealogy.n:
        raise ValueError(f"leaf must lie in [0, {genealogy.n}), got {leaf}")
    rng = as_generator(rng_seed)
    parent = genealogy.parent
    path = []
    v = int(parent[leaf])
    while v >= 0:
        path.append(v)
        v = int(parent[v])
    path = np.array(path, dtype=np.int64)
    # leaf counts grow along the path, so the first mutated branch is minimal
    hits = rng.poisson(theta / 2.0 * genealogy.branch_lengths[path]) > 0
    if not hits.any():
        return genealogy.n
    return int(genealogy.leaf_counts[path[np.argmax(hits)]])


def observable_clade_sizes(matrix: SiteMatrix) -> dict[str, float | np.ndarray]:
    """
    Minimal observable clade sizes and their quantiles, mean, standard
    deviation (``ddof=1``) and harmonic mean.
    """
    o = observable_clade_vector(matrix)
    of = o.astype(float)
    return {
        "O": o,
        "quantiles": quantiles(of),
        "mean": float(of.mean()),
        "sd": float(of.std(ddof=1)) if o.size > 1 else 0.0,
        "harmonic_mean": float(o.size / np.sum(1.0 / of)),
    }


@dataclasses.dataclass(frozen=True)
class StatVector:
    """Summary statistics in the fixed order of :data:`FEATURE_NAMES`."""

    values: np.ndarray

    def __getitem__(self, name: str) -> float:
        return float(self.values[FEATURE_NAMES.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in zip(FEATURE_NAMES, self.values)}

    def to_csv_row(self) -> str:
        return ",".join(repr(float(v)) for v in self.values)

    @staticmethod
    def csv_header() -> str:
        return ",".join(FEATURE_NAMES)


def feature_indices(groups: Sequence[str]) -> np.ndarray:
    """Column indices of the named feature groups (e.g. ``["AF", "S"]``)."""
    out = []
    for g in groups:
        if g not in FEATURE_GROUPS:
            raise ValueError(f"unknown statistic group {g!r}; expected one of {list(FEATURE_GROUPS)}")
        out.extend(FEATURE_NAMES.index(name) for name in FEATURE_GROUPS[g])
    return np.array(out, dtype=np.int64)


def summary_statistics(matrix: SiteMatrix) -> StatVector:
    """All statistics of a site matrix as one :class:`StatVector`."""
    c = classic_stats(matrix)
    o = observable_clade_sizes(matrix)
    values = np.concatenate(
        [
            c["AF_quantiles"],
            [c["S"], c["pi"]],
            c["Ham_quantiles"],
            c["r2_quantiles"],
            o["quantiles"],
            [o["mean"], o["sd"], o["harmonic_mean"]],
        ]
    )
    return StatVector(values)


def watterson_theta(measure, n: int, s_target: float, profile=None, exponent=None) -> float:
    """
    Mutation rate producing ``s_target`` segregating sites on average:
    ``2 s / E(L_n)``, with the expected total length taken under the
    optional population-size profile.
    """
    from .analytics import expected_total_length

    if not s_target > 0:
        raise ValueError(f"target number of sites must be positive, got {s_target}")
    return 2.0 * s_target / expected_total_length(measure, n, profile, exponent)
