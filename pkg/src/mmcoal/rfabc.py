"""
Model selection between coalescent model classes with random-forest ABC.

Each model class has a prior over its parameters and over the expected
number of segregating sites ``s``. A reference table holds summary
statistics simulated under every class; a forest of classification
trees grown on bootstrap samples of it then assigns data to the class
with most votes.
"""
from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import io
import json
import math
from typing import Any, Sequence

import numpy as np

from . import demography
from ._backend import kernels
from ._rng import as_generator, task_generator
from .genealogy import simulate_time_changed
from .measures import CoalescentMeasure, Kingman, beta_from_alpha
from .mutstats import (
    FEATURE_GROUPS,
    FEATURE_NAMES,
    StatVector,
    drop_mutations,
    feature_indices,
    summary_statistics,
    watterson_theta,
)

S_VALUES = (15, 20, 30, 40, 60, 75)
MAX_ATTEMPTS = 3


# --------------------------------------------------------------------------
# Model classes and priors


@dataclasses.dataclass(frozen=True)
class ModelClass:
    """Base class: a named family of coalescent models with a prior."""

    name: str
    s_values: tuple[int, ...] = S_VALUES

    def sample_parameters(self, rng: np.random.Generator) -> dict[str, float]:
        raise NotImplementedError

    def measure(self, params: dict[str, float]) -> CoalescentMeasure:
        raise NotImplementedError

    def profile(self, params: dict[str, float]) -> demography.DemographyProfile:
        return demography.Constant()

    def exponent(self, params: dict[str, float]) -> demography.TimeScaleExponent:
        return demography.TimeScaleExponent.wright_fisher()

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["s_values"] = list(self.s_values)
        return {"kind": type(self).__name__, **d}


@dataclasses.dataclass(frozen=True)
class BetaClass(ModelClass):
    """Beta(2 - alpha, alpha) coalescents with ``alpha ~ U[alpha_low, alpha_high)``."""

    name: str = "Beta"
    alpha_low: float = 1.0
    alpha_high: float = 2.0

    def __post_init__(self):
        if not 1.0 <= self.alpha_low < self.alpha_high <= 2.0:
            raise ValueError("alpha prior must be a subinterval of [1, 2)")

    def sample_parameters(self, rng):
        return {"alpha": float(rng.uniform(self.alpha_low, self.alpha_high))}

    def measure(self, params):
        return beta_from_alpha(params["alpha"])


@dataclasses.dataclass(frozen=True)
class GrowthClass(ModelClass):
    """
    Kingman's coalescent with exponential growth. The rate is 0 with
    probability ``atom_weight`` and log-uniform on ``[rho_low, rho_high]``
    otherwise.
    """

    name: str = "Growth"
    atom_weight: float = 0.1
    rho_low: float = 0.1
    rho_high: float = 1000.0

    def __post_init__(self):
        if not 0 <= self.atom_weight <= 1:
            raise ValueError("atom weight must lie in [0, 1]")
        if not 0 < self.rho_low < self.rho_high:
            raise ValueError("need 0 < rho_low < rho_high")

    def sample_parameters(self, rng):
        if rng.random() < self.atom_weight:
            return {"rho": 0.0}
        return {"rho": float(math.exp(rng.uniform(math.log(self.rho_low), math.log(self.rho_high))))}

    def measure(self, params):
        return Kingman()

    def profile(self, params):
        return demography.ExponentialGrowth(params["rho"])


@dataclasses.dataclass(frozen=True)
class FixedClass(ModelClass):
    """A single measure with constant size; useful as a control."""

    name: str = "Fixed"
    measure_spec: dict = dataclasses.field(default_factory=lambda: {"family": "kingman"})

    def sample_parameters(self, rng):
        return {}

    def measure(self, params):
        from .measures import measure_from_dict

        return measure_from_dict(self.measure_spec)


_CLASS_KINDS = {c.__name__: c for c in (BetaClass, GrowthClass, FixedClass)}


def model_class_from_dict(d: dict[str, Any]) -> ModelClass:
    """Inverse of :meth:`ModelClass.to_dict`."""
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _CLASS_KINDS:
        raise ValueError(f"unknown model class kind {kind!r}; expected one of {list(_CLASS_KINDS)}")
    if "s_values" in d:
        d["s_values"] = tuple(int(s) for s in d["s_values"])
    return _CLASS_KINDS[kind](**d)


@dataclasses.dataclass(frozen=True)
class ParameterRecord:
    """One prior draw: model parameters, target site count and mutation rate."""

    model: str
    params: dict[str, float]
    s: int
    theta: float | None

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def sample_prior(model_class: ModelClass, rng_seed=None, n: int | None = None) -> ParameterRecord:
    """
    Draws parameters and ``s`` from the prior. With a sample size ``n``
    the mutation rate is set to the generalised Watterson value for ``s``.
    """
    rng = as_generator(rng_seed)
    params = model_class.sample_parameters(rng)
    s = int(rng.choice(model_class.s_values))
    theta = None
    if n is not None:
        theta = watterson_theta(
            model_class.measure(params), n, s,
            model_class.profile(params), model_class.exponent(params),
        )
    return ParameterRecord(model_class.name, params, s, theta)


# --------------------------------------------------------------------------
# Reference table


@dataclasses.dataclass(frozen=True, eq=False)
class ReferenceTable:
    """
    Simulated statistics, one row per simulation.

    :param X: Statistics, one column per feature name.
    :param y: Class index of every row.
    :param class_names: Names of the classes, in index order.
    :param records: Parameter draw of every row.
    :param feature_names: Column names; the summary statistics of
        :data:`FEATURE_NAMES` by default.
    """

    X: np.ndarray
    y: np.ndarray
    class_names: tuple[str, ...]
    records: tuple[ParameterRecord, ...] = ()
    feature_names: tuple[str, ...] = tuple(FEATURE_NAMES)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=np.int64)
        names = tuple(self.feature_names)
        if X.ndim != 2 or X.shape[1] != len(names) or len(y) != len(X):
            raise ValueError(f"expected an (N, {len(names)}) matrix with N labels")
        if not np.all(np.isfinite(X)):
            raise ValueError("reference table contains missing or infinite values")
        if y.size and (y.min() < 0 or y.max() >= len(self.class_names)):
            raise ValueError("labels out of range")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "feature_names", names)

    @property
    def num_rows(self) -> int:
        return len(self.y)

    def to_csv(self) -> str:
        """CSV with columns ``class``, the features, ``s``, ``theta`` and ``params`` (JSON)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", *self.feature_names, "s", "theta", "params"])
        recs = self.records or [None] * self.num_rows
        for row, label, rec in zip(self.X, self.y, recs):
            extra = ["", "", "{}"] if rec is None else [rec.s, repr(rec.theta), json.dumps(rec.params, sort_keys=True)]
            w.writerow([self.class_names[label], *(repr(float(v)) for v in row), *extra])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, class_names: Sequence[str] | None = None) -> ReferenceTable:
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        if header[0] != "class" or header[-3:] != ["s", "theta", "params"]:
            raise ValueError("expected columns class, <features>, s, theta, params")
        names = header[1:-3]
        if class_names is None:
            class_names = list(dict.fromkeys(r[0] for r in body))
        index = {c: i for i, c in enumerate(class_names)}
        X = np.array([[float(v) for v in r[1:-3]] for r in body]).reshape(-1, len(names))
        y = np.array([index[r[0]] for r in body], dtype=np.int64)
        recs = []
        for r in body:
            s, theta, params = r[-3:]
            if s:
                recs.append(ParameterRecord(r[0], json.loads(params), int(s), float(theta)))
        return cls(X, y, tuple(class_names), tuple(recs) if len(recs) == len(body) else (), tuple(names))


def _simulate_row(model_class: ModelClass, n: int, rng_seed: int, label: int, row: int):
    errors = []
    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng([rng_seed, label, row, attempt])
        try:
            rec = sample_prior(model_class, rng, n)
            params = rec.params
            tree = simulate_time_changed(
                model_class.measure(params), n,
                model_class.profile(params), model_class.exponent(params), rng,
            )
            stats = summary_statistics(drop_mutations(tree, rec.theta, rng))
            if not np.all(np.isfinite(stats.values)):
                raise FloatingPointError("non-finite statistic")
            return stats.values, rec
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            errors.append(exc)
    raise RuntimeError(f"row {row} of class {model_class.name} failed {MAX_ATTEMPTS} times: {errors[-1]}")


def _simulate_chunk(args):
    model_class, n, rng_seed, label, rows = args
    return [_simulate_row(model_class, n, rng_seed, label, r) for r in rows]


def _map(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, tasks))


def simulate_reference_table(
    classes: Sequence[ModelClass],
    rows_per_class: int,
    n: int,
    rng_seed: int = 0,
    workers: int = 1,
) -> ReferenceTable:
    """
    Simulates ``rows_per_class`` rows for every class: a prior draw, a
    (time-changed) genealogy of ``n`` leaves, mutations at the calibrated
    rate and the summary statistics.

    Row ``i`` of class ``c`` uses the stream ``(rng_seed, c, i, attempt)``;
    a failed simulation is retried on the next attempt's stream, at most
    three times. The result does not depend on ``workers``.
    """
    if rows_per_class < 1:
        raise ValueError("need at least one row per class")
    if len({c.name for c in classes}) != len(classes):
        raise ValueError("model class names must be distinct")
    chunk = 250
    tasks = [
        (mc, n, rng_seed, label, range(start, min(start + chunk, rows_per_class)))
        for label, mc in enumerate(classes)
        for start in range(0, rows_per_class, chunk)
    ]
    out = [r for part in _map(_simulate_chunk, tasks, workers) for r in part]
    X = np.array([v for v, _ in out])
    y = np.repeat(np.arange(len(classes)), rows_per_class)
    return ReferenceTable(X, y, tuple(c.name for c in classes), tuple(r for _, r in out))


# --------------------------------------------------------------------------
# Forest


@dataclasses.dataclass(frozen=True, eq=False)
class Tree:
    """
    Array form of a classification tree. ``feature[i] == -1`` marks a leaf;
    internal nodes send rows with ``x[feature] <= threshold`` left.
    Features index the forest's selected columns.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity_decrease: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf reached by every row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            r, nd, ff = rows[inner], node[inner], f[inner]
            go_left = X[r, ff] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict[str, list]:
        return {f.name: getattr(self, f.name).tolist() for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, d: dict[str, list]) -> Tree:
        return cls(
            *(np.asarray(d[f.name], dtype=float if f.name in ("threshold", "impurity_decrease") else np.int64)
              for f in dataclasses.fields(cls))
        )


@dataclasses.dataclass(frozen=True, eq=False)
class Forest:
    """
    :param trees: The trees, in growth order.
    :param inbag: Bootstrap multiplicity of every training row, per tree.
    :param columns: Columns of the full feature vector the trees use.
    :param class_names: Class names in label order.
    :param feature_names: Names of all columns of the full feature vector.
    """

    trees: tuple[Tree, ...]
    inbag: np.ndarray
    columns: np.ndarray
    class_names: tuple[str, ...]
    config: dict = dataclasses.field(default_factory=dict)
    feature_names: tuple[str, ...] = tuple(FEATURE_NAMES)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def votes(self, X_full: np.ndarray) -> np.ndarray:
        """Vote counts of shape ``(rows, classes)`` for full statistic rows."""
        X = np.asarray(X_full, dtype=float)[:, self.columns]
        out = np.zeros((len(X), len(self.class_names)), dtype=np.int64)
        rows = np.arange(len(X))
        for t in self.trees:
            np.add.at(out, (rows, t.predict(X)), 1)
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "class_names": list(self.class_names),
                "columns": self.columns.tolist(),
                "config": self.config,
                "feature_names": list(self.feature_names),
                "inbag": self.inbag.tolist(),
                "trees": [t.to_dict() for t in self.trees],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> Forest:
        d = json.loads(text)
        return cls(
            tuple(Tree.from_dict(t) for t in d["trees"]),
            np.asarray(d["inbag"], dtype=np.int64).reshape(len(d["trees"]), -1),
            np.asarray(d["columns"], dtype=np.int64),
            tuple(d["class_names"]),
            d.get("config", {}),
            tuple(d.get("feature_names", FEATURE_NAMES)),
        )


CRITERIA = {"gini": 0, "entropy": 1}


def _grow_one(args):
    X, y, n_classes, mtry, min_node_size, criterion, seed, index = args
    rng = task_generator(seed, index)
    n_rows, n_feat = X.shape
    rows = rng.integers(0, n_rows, size=n_rows)
    perms = rng.permuted(np.tile(np.arange(n_feat, dtype=np.int64), (2 * n_rows, 1)), axis=1)
    arrays = kernels.grow_tree(X, y, rows, perms, mtry, min_node_size, n_classes, CRITERIA[criterion])
    return Tree(*arrays), np.bincount(rows, minlength=n_rows)


def train_forest(
    table: ReferenceTable,
    n_trees: int = 500,
    mtry: int | None = None,
    rng_seed: int = 0,
    groups: Sequence[str] | None = None,
    min_node_size: int = 2,
    workers: int = 1,
    criterion: str = "gini",
) -> Forest:
    """
    Grows ``n_trees`` classification trees, each on a bootstrap sample of
    the table's rows.

    Every node picks the best threshold split among ``mtry`` features
    drawn afresh (default ``ceil(sqrt(features))``); if none of them
    separates its rows, the remaining features are tried. Nodes are split
    until they are pure or hold fewer than ``min_node_size`` rows. Equal
    scores go to the lowest feature index, then the lowest threshold. A
    split sends ``x <= t`` left, with ``t`` the largest training value on
    the left, so the forest depends on each feature only through its order.

    :param table: Training data.
    :param groups: Statistic groups to use (see :data:`FEATURE_GROUPS`);
        all columns by default. Only for tables of summary statistics.
    :param workers: Processes; tree ``i`` always uses stream ``(rng_seed, i)``.
    :param criterion: ``"gini"`` or ``"entropy"``; both are weighted by row
        counts, and importances are decreases of the same measure.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {sorted(CRITERIA)}, got {criterion!r}")
    if n_trees < 1:
        raise ValueError("need at least one tree")
    if len(np.unique(table.y)) < 2:
        raise ValueError("training table must contain at least two classes")
    if groups is None:
        cols = np.arange(len(table.feature_names))
    elif table.feature_names != tuple(FEATURE_NAMES):
        raise ValueError("statistic groups need a table of the standard summary statistics")
    else:
        groups = list(groups)
        cols = feature_indices(groups)
    n_feat = len(cols)
    mtry = math.ceil(math.sqrt(n_feat)) if mtry is None else int(mtry)
    if not 1 <= mtry <= n_feat:
        raise ValueError(f"mtry must lie in [1, {n_feat}], got {mtry}")
    if min_node_size < 2:
        raise ValueError("min_node_size must be at least 2")
    X = np.ascontiguousarray(table.X[:, cols])
    k = len(table.class_names)
    tasks = [(X, table.y, k, mtry, min_node_size, criterion, rng_seed, i) for i in range(n_trees)]
    grown = _map(_grow_one, tasks, workers)
    config = {"n_trees": n_trees, "mtry": mtry, "min_node_size": min_node_size,
              "groups": groups, "criterion": criterion, "seed": rng_seed}
    return Forest(
        tuple(t for t, _ in grown),
        np.array([b for _, b in grown], dtype=np.int64),
        cols, table.class_names, config, table.feature_names,
    )


def _full_vector(stat_vector, names: tuple[str, ...]) -> np.ndarray:
    if isinstance(stat_vector, StatVector):
        stat_vector = stat_vector.as_dict()
    if isinstance(stat_vector, dict):
        missing = [f for f in names if f not in stat_vector]
        if missing:
            raise ValueError(f"missing statistics: {missing}")
        return np.array([float(stat_vector[f]) for f in names])
    v = np.asarray(stat_vector, dtype=float)
    if v.shape != (len(names),):
        raise ValueError(f"expected {len(names)} statistics, got shape {v.shape}")
    return v


def classify(forest: Forest, stat_vector) -> tuple[str, float]:
    """
    Majority class over the trees and the fraction of votes it received.
    Equal vote counts go to the class listed first.
    """
    v = _full_vector(stat_vector, forest.feature_names)
    if not np.all(np.isfinite(v[forest.columns])):
        raise ValueError("statistics must be finite")
    votes = forest.votes(v[None, :])[0]
    best = int(np.argmax(votes))
    return forest.class_names[best], float(votes[best] / forest.n_trees)


@dataclasses.dataclass(frozen=True)
class OobReport:
    """Out-of-bag misclassification rate per class and overall."""

    per_class: dict[str, float]
    overall: float
    n_skipped: int
    mode: str

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def oob_error(forest: Forest, table: ReferenceTable, mode: str = "vote") -> OobReport:
    """
    Out-of-bag error. Every row is judged only by the trees whose bootstrap
    sample missed it. In ``"vote"`` mode the row counts as misclassified
    if the majority of those trees picks a wrong class; in ``"tree"`` mode
    it contributes the fraction of them that do. Rows that are in every
    bootstrap sample are skipped and counted.
    """
    if mode not in ("vote", "tree"):
        raise ValueError(f"mode must be 'vote' or 'tree', got {mode!r}")
    if forest.inbag.shape[1] != table.num_rows:
        raise ValueError("forest was not trained on this table")
    X = table.X[:, forest.columns]
    k = len(forest.class_names)
    votes = np.zeros((table.num_rows, k), dtype=np.int64)
    for tree, inbag in zip(forest.trees, forest.inbag):
        oob = np.flatnonzero(inbag == 0)
        np.add.at(votes, (oob, tree.predict(X[oob])), 1)
    total = votes.sum(axis=1)
    seen = total > 0
    if mode == "vote":
        wrong = (np.argmax(votes, axis=1) != table.y).astype(float)
    else:
        right = votes[np.arange(table.num_rows), table.y]
        wrong = np.where(seen, 1.0 - right / np.maximum(total, 1), 0.0)
    per_class = {}
    for c, name in enumerate(forest.class_names):
        sel = seen & (table.y == c)
        per_class[name] = float(wrong[sel].mean()) if sel.any() else float("nan")
    overall = float(wrong[seen].mean()) if seen.any() else float("nan")
    return OobReport(per_class, overall, int((~seen).sum()), mode)


def variable_importance(forest: Forest) -> dict[str, float]:
    """
    Mean decrease in impurity (of the split criterion the forest was grown
    with): for every statistic, the row-weighted impurity decrease summed
    over the nodes splitting on it, averaged over trees and normalised to
    sum to 1.
    """
    names = [forest.feature_names[c] for c in forest.columns]
    total = np.zeros(len(names))
    for t in forest.trees:
        inner = t.feature >= 0
        np.add.at(total, t.feature[inner], t.impurity_decrease[inner])
    s = total.sum()
    scores = total / s if s > 0 else total
    return {name: float(v) for name, v in zip(names, scores)}


def classification_report(forest: Forest, stat_vector) -> dict[str, Any]:
    """``{label, vote_fraction, importances}`` for one observation."""
    label, frac = classify(forest, stat_vector)
    return {"label": label, "vote_fraction": frac, "importances": variable_importance(forest)}
