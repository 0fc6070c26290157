"""
Sampling of Lambda-n-coalescent genealogies and the tree functionals built
on them.

Genealogies are generated with the block-counting jump chain: with ``b``
blocks the next event happens after an ``Exp(total_rate(b))`` waiting time,
its size ``k`` is drawn from the transition law and a uniformly random
``k``-subset of the current blocks merges. This is equal in law to the
paintbox construction and much cheaper.

Node ``i < n`` of a :class:`Genealogy` is the leaf labelled ``i + 1``; the
``e``-th merger creates node ``n + e``.
"""
from __future__ import annotations

import dataclasses
import functools
import json
import math
from typing import Sequence

import numpy as np

from . import demography
from ._backend import kernels
from ._pykernels import BETA, DIRAC, KINGMAN
from ._rng import as_generator
from .measures import Beta, CoalescentMeasure, Dirac, EldonWakeley, Kingman, transition_distribution


@dataclasses.dataclass(frozen=True, eq=False)
class Genealogy:
    """
    An ultrametric labelled tree stored as its sequence of merger events.

    :param n: Number of leaves.
    :param times: Event times, strictly increasing.
    :param ks: Number of blocks merged by each event.
    :param children: Ids of the merged nodes, concatenated over events.
    """

    n: int
    times: np.ndarray
    ks: np.ndarray
    children: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        ks = np.asarray(self.ks, dtype=np.int64)
        children = np.asarray(self.children, dtype=np.int64)
        if times.shape != ks.shape or ks.sum() != children.size:
            raise ValueError("inconsistent event arrays")
        if np.any(ks < 2):
            raise ValueError("every event must merge at least two blocks")
        if self.n - int((ks - 1).sum()) != 1:
            raise ValueError("events must reduce the sample to a single block")
        for name, arr in (("times", times), ("ks", ks), ("children", children)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_events(cls, n: int, events: Sequence[tuple[float, Sequence[int]]]) -> Genealogy:
        """
        Builds a genealogy from ``(time, merged_node_ids)`` pairs in time
        order.
        """
        times = [float(t) for t, _ in events]
        ks = [len(c) for _, c in events]
        children = [int(x) for _, c in events for x in c]
        return cls(n, np.array(times), np.array(ks, dtype=np.int64), np.array(children, dtype=np.int64))

    @property
    def num_events(self) -> int:
        return int(self.times.size)

    @property
    def num_nodes(self) -> int:
        return self.n + self.num_events

    @property
    def root(self) -> int:
        return self.num_nodes - 1

    @property
    def height(self) -> float:
        return float(self.times[-1]) if self.num_events else 0.0

    @functools.cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.ks)])

    def event_children(self, e: int) -> np.ndarray:
        return self.children[self.offsets[e] : self.offsets[e + 1]]

    @property
    def events(self) -> list[tuple[float, tuple[int, ...], int]]:
        """Events as ``(time, merged_node_ids, new_node_id)``."""
        return [
            (float(self.times[e]), tuple(int(c) for c in self.event_children(e)), self.n + e)
            for e in range(self.num_events)
        ]

    @functools.cached_property
    def parent(self) -> np.ndarray:
        parent = np.full(self.num_nodes, -1, dtype=np.int64)
        parent[self.children] = np.repeat(np.arange(self.n, self.num_nodes), self.ks)
        return parent

    @functools.cached_property
    def node_times(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.n), self.times])

    @functools.cached_property
    def branch_lengths(self) -> np.ndarray:
        """Length of the branch above each node (0 for the root)."""
        out = np.zeros(self.num_nodes)
        nonroot = self.parent >= 0
        out[nonroot] = self.node_times[self.parent[nonroot]] - self.node_times[nonroot]
        return out

    @functools.cached_property
    def leaf_counts(self) -> np.ndarray:
        ch, off = self.children.tolist(), self.offsets.tolist()
        counts = [1] * self.n
        for e in range(self.num_events):
            total = 0
            for c in ch[off[e] : off[e + 1]]:
                total += counts[c]
            counts.append(total)
        return np.array(counts, dtype=np.int64)

    @functools.cached_property
    def _leaf_layout(self) -> tuple[np.ndarray, np.ndarray]:
        # start[v]: first position of v's clade in a leaf ordering where
        # every clade is contiguous.
        counts = self.leaf_counts.tolist()
        ch, off = self.children.tolist(), self.offsets.tolist()
        start = [0] * self.num_nodes
        for e in range(self.num_events - 1, -1, -1):
            pos = start[self.n + e]
            for c in ch[off[e] : off[e + 1]]:
                start[c] = pos
                pos += counts[c]
        start = np.array(start, dtype=np.int64)
        order = np.empty(self.n, dtype=np.int64)
        order[start[: self.n]] = np.arange(self.n)
        return start, order

    def clade(self, v: int) -> np.ndarray:
        """Leaf ids below node ``v``."""
        start, order = self._leaf_layout
        return order[start[v] : start[v] + self.leaf_counts[v]]

    def clade_membership(self, nodes: np.ndarray) -> np.ndarray:
        """
        Boolean matrix whose row ``i`` marks the leaves below ``nodes[i]``.
        """
        start, order = self._leaf_layout
        nodes = np.asarray(nodes, dtype=np.int64)
        pos = np.arange(self.n)
        inside = (pos >= start[nodes, None]) & (pos < (start + self.leaf_counts)[nodes, None])
        out = np.zeros((nodes.size, self.n), dtype=bool)
        out[:, order] = inside
        return out

    def restricted_counts(self, m: int) -> np.ndarray:
        """Number of leaves among ``1..m`` below each node."""
        counts = np.zeros(self.num_nodes, dtype=np.int64)
        counts[:m] = 1
        for e in range(self.num_events):
            counts[self.n + e] = counts[self.event_children(e)].sum()
        return counts

    def to_newick(self, precision: int = 17) -> str:
        """Newick string with leaf labels ``1..n`` and branch lengths."""
        bl = self.branch_lengths
        text = [str(i + 1) for i in range(self.n)]
        for e in range(self.num_events):
            inner = ",".join(f"{text[c]}:{bl[c]:.{precision}g}" for c in self.event_children(e))
            text.append(f"({inner})")
        return text[self.root] + ";"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "events": [
                {"time": float(self.times[e]), "children": [int(c) for c in self.event_children(e)]}
                for e in range(self.num_events)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> Genealogy:
        return cls.from_events(int(d["n"]), [(ev["time"], ev["children"]) for ev in d["events"]])

    @classmethod
    def from_json(cls, text: str) -> Genealogy:
        return cls.from_dict(json.loads(text))

    def with_times(self, times: np.ndarray) -> Genealogy:
        return Genealogy(self.n, times, self.ks, self.children)

    def __eq__(self, other):
        if not isinstance(other, Genealogy):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.ks, other.ks)
            and np.array_equal(self.children, other.children)
        )

    __hash__ = None


@dataclasses.dataclass(frozen=True)
class KernelTables:
    """Per-measure lookup tables consumed by the jump-chain kernel."""

    family: int
    a: float
    b: float
    p: float
    rates: np.ndarray
    p2: np.ndarray
    logm2: np.ndarray


@functools.lru_cache(maxsize=64)
def kernel_tables(measure: CoalescentMeasure, n: int) -> KernelTables:
    """
    Total event rates, probabilities of a binary merger and (for atomic
    measures) the log probability of a binary merger driven by the atom,
    for ``b = 2..n`` blocks. Index ``b`` directly; entries 0 and 1 are
    unused.
    """
    rates = np.zeros(n + 1)
    p2 = np.zeros(n + 1)
    logm2 = np.full(n + 1, -np.inf)
    if isinstance(measure, Kingman):
        b = np.arange(2, n + 1)
        rates[2:] = b * (b - 1) / 2.0
        p2[2:] = 1.0
        return KernelTables(KINGMAN, 0.0, 0.0, 0.0, rates, p2, logm2)
    if isinstance(measure, Beta):
        family, a, bb, p = BETA, measure.a, measure.b, 0.0
    elif isinstance(measure, EldonWakeley):
        family, a, bb, p = DIRAC, 0.0, 0.0, measure.psi
        log_atom_weight = math.log(measure.dirac_weight)
    elif isinstance(measure, Dirac):
        family, a, bb, p = DIRAC, 0.0, 0.0, measure.p
        log_atom_weight = 0.0
    else:
        raise TypeError(f"unsupported measure {measure!r}")
    for b in range(2, n + 1):
        tr = transition_distribution(measure, b)
        rates[b] = tr.total_rate
        p2[b] = tr.probs[0]
        if family == DIRAC:
            logm2[b] = (math.log(b * (b - 1) / 2.0) + log_atom_weight
                        + (b - 2) * math.log1p(-p) - math.log(tr.total_rate))
    return KernelTables(family, a, bb, p, rates, p2, logm2)


def _check_n(n: int) -> None:
    if n < 2:
        raise ValueError(f"sample size must be at least 2, got {n}")


def simulate_from_uniforms(
    measure: CoalescentMeasure,
    n: int,
    exps: np.ndarray,
    uks: np.ndarray,
    usub: np.ndarray,
) -> Genealogy:
    """
    Runs the jump chain on pre-drawn randomness: ``exps`` (``n - 1``
    standard exponentials), ``uks`` (``n - 1`` uniforms choosing merger
    sizes) and ``usub`` (``2n`` uniforms choosing merged blocks). Used to
    couple simulations that share random numbers.
    """
    _check_n(n)
    tab = kernel_tables(measure, n)
    ks = np.empty(n - 1, dtype=np.int64)
    children = np.empty(2 * n, dtype=np.int64)
    ne = kernels.coalescent_events(
        n, tab.family, tab.a, tab.b, tab.p, tab.p2, tab.logm2,
        np.ascontiguousarray(uks, dtype=np.float64),
        np.ascontiguousarray(usub, dtype=np.float64), ks, children,
    )
    ks = ks[:ne]
    blocks = n - np.concatenate([[0], np.cumsum(ks - 1)[:-1]])
    times = np.cumsum(np.asarray(exps[:ne]) / tab.rates[blocks])
    return Genealogy(n, times, ks, children[: int(ks.sum())])


def draw_uniforms(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The randomness consumed by one call of :func:`simulate_from_uniforms`."""
    exps = rng.standard_exponential(n - 1)
    uks = rng.random(n - 1)
    usub = rng.random(2 * n)
    return exps, uks, usub


def simulate(measure: CoalescentMeasure, n: int, rng_seed=None) -> Genealogy:
    """
    Samples a genealogy of ``n`` leaves under the Lambda-coalescent
    ``measure``.

    :param measure: The coalescent measure.
    :param n: Sample size, at least 2.
    :param rng_seed: Integer seed or :class:`numpy.random.Generator`.
    :return: The sampled genealogy.
    """
    _check_n(n)
    rng = as_generator(rng_seed)
    return simulate_from_uniforms(measure, n, *draw_uniforms(n, rng))


def simulate_time_changed(
    measure: CoalescentMeasure,
    n: int,
    profile: demography.DemographyProfile,
    exponent: demography.TimeScaleExponent,
    rng_seed=None,
) -> Genealogy:
    """
    Samples a genealogy in coalescent time and maps each event time ``u``
    to real time ``g^-1(u)``. The topology is unaffected by the time change.
    """
    tree = simulate(measure, n, rng_seed)
    if demography.is_identity(profile, exponent):
        return tree
    return tree.with_times(demography.inverse_intensity(profile, exponent, tree.times))


@dataclasses.dataclass(frozen=True, eq=False)
class NestedGenealogy:
    """
    A genealogy of ``[n]`` together with the induced genealogy of the
    subsample ``[m]``.

    :param full: Genealogy of all ``n`` leaves.
    :param sub: Genealogy of leaves ``1..m``.
    :param embedding: ``embedding[s]`` is the node of ``full`` at which node
        ``s`` of ``sub`` is born; the branch above ``s`` follows the path of
        ``full`` from there to the node of its parent.
    :param sub_counts: Number of leaves of ``[m]`` below each node of
        ``full``.
    """

    full: Genealogy
    sub: Genealogy | None
    m: int
    embedding: np.ndarray
    sub_counts: np.ndarray


def restrict(full: Genealogy, m: int) -> NestedGenealogy:
    """
    Restricts ``full`` to leaves ``1..m``: each event keeps the merged
    blocks containing subsample leaves and is dropped if fewer than two
    remain.
    """
    if not 1 <= m <= full.n:
        raise ValueError(f"subsample size must lie in [1, n], got m={m}, n={full.n}")
    counts = full.restricted_counts(m)
    rep = np.full(full.num_nodes, -1, dtype=np.int64)
    rep[:m] = np.arange(m)
    embedding = list(range(m))
    times, ks, children = [], [], []
    for e in range(full.num_events):
        kids = full.event_children(e)
        kept = kids[counts[kids] > 0]
        node = full.n + e
        if kept.size >= 2:
            rep[node] = m + len(times)
            embedding.append(node)
            times.append(full.times[e])
            ks.append(kept.size)
            children.extend(rep[kept])
        elif kept.size == 1:
            rep[node] = rep[kept[0]]
    sub = None
    if m >= 2:
        sub = Genealogy(m, np.array(times), np.array(ks, dtype=np.int64), np.array(children, dtype=np.int64))
    return NestedGenealogy(full, sub, m, np.array(embedding, dtype=np.int64), counts)


def simulate_nested(measure: CoalescentMeasure, n: int, m: int, rng_seed=None) -> NestedGenealogy:
    """
    Samples the genealogy of ``[n]`` once and derives the naturally coupled
    genealogy of ``[m]`` from it.
    """
    if m > n:
        raise ValueError(f"subsample size m={m} exceeds n={n}")
    return restrict(simulate(measure, n, rng_seed), m)


def _check_sub(nested: NestedGenealogy) -> None:
    if nested.m < 2:
        raise ValueError(f"subsample must contain at least two leaves, got m={nested.m}")


def root_shared(nested: NestedGenealogy) -> bool:
    """True iff the subsample's most recent common ancestor is the root."""
    _check_sub(nested)
    return bool(nested.sub.height == nested.full.height)


def shared_internal_length_fraction(nested: NestedGenealogy) -> float:
    """
    Fraction of the internal branch length of the full genealogy that lies
    on the subsample's genealogy. A branch is internal if it subtends at
    least two leaves; it lies on the subsample's tree iff it carries some
    but not all subsample leaves.
    """
    _check_sub(nested)
    full = nested.full
    if full.n < 3:
        raise ValueError("need n >= 3 for a non-empty internal tree")
    nodes = np.arange(full.n, full.root)
    bl = full.branch_lengths[nodes]
    c = nested.sub_counts[nodes]
    covered = (c > 0) & (c < nested.m)
    return float(bl[covered].sum() / bl.sum())


def bsz_cycle_merge_sequence(n: int, rng_seed=None) -> list[frozenset[int]]:
    """
    Cycles of a uniform random permutation of ``{2, ..., n}`` (grown by the
    Chinese restaurant process) in the order in which they merge with the
    block of leaf 1 under i.i.d. exponential clocks.
    """
    _check_n(n)
    rng = as_generator(rng_seed)
    tables: list[list[int]] = []
    for j, x in enumerate(range(2, n + 1), start=1):
        u = rng.random() * j
        if u < 1.0:
            tables.append([x])
        else:
            # Joining a table with probability proportional to its size is
            # the same as sitting next to a uniform earlier customer.
            target = _table_of(tables, int(u) - 1)
            tables[target].append(x)
    stamps = rng.standard_exponential(len(tables))
    return [frozenset(tables[i]) for i in np.argsort(stamps)]


def _table_of(tables: list[list[int]], index: int) -> int:
    for t, members in enumerate(tables):
        if index < len(members):
            return t
        index -= len(members)
    raise IndexError(index)


def cycles_root_shared(cycles: list[frozenset[int]], m: int) -> bool:
    """Root sharing of ``[m]`` read off a cycle merge sequence."""
    return any(x <= m for x in cycles[-1])


def functionals(genealogy: Genealogy) -> dict[str, float | np.ndarray]:
    """
    Height, total branch length, external branch length of every leaf and
    internal branch length.
    """
    bl = genealogy.branch_lengths
    external = bl[: genealogy.n].copy()
    internal = float(bl[genealogy.n :].sum())
    return {
        "height": genealogy.height,
        "total_length": float(external.sum()) + internal,
        "external_length_per_leaf": external,
        "internal_length": internal,
    }
