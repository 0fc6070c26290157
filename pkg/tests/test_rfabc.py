import math

import numpy as np
import pytest

from mmcoal import rfabc as R
from mmcoal.mutstats import FEATURE_NAMES

from .conftest import mc_close


def _table(X, y, names=None, classes=("a", "b")):
    X = np.asarray(X, dtype=float)
    if names is None:
        names = tuple(f"x{i}" for i in range(X.shape[1]))
    return R.ReferenceTable(X, y, classes, feature_names=names)


def _stump(label):
    return R.Tree(
        np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
        np.array([label]), np.array([1]), np.array([0.0]),
    )


# --------------------------------------------------------------------------
# Priors


def test_growth_prior_atom():
    rng = np.random.default_rng(1)
    draws = [R.GrowthClass().sample_parameters(rng)["rho"] for _ in range(100_000)]
    zero = np.array(draws) == 0
    assert mc_close(zero, 0.1)
    pos = np.array(draws)[~zero]
    assert pos.min() >= 0.1 and pos.max() <= 1000
    # log-uniform: the log has mean log(sqrt(0.1 * 1000)) = log(10)
    assert mc_close(np.log(pos), math.log(10.0))


def test_beta_prior_mean():
    rng = np.random.default_rng(2)
    alpha = [R.BetaClass().sample_parameters(rng)["alpha"] for _ in range(100_000)]
    assert mc_close(alpha, 1.5)
    assert 1.0 <= min(alpha) and max(alpha) < 2.0


def test_prior_s_support_and_theta():
    rng = np.random.default_rng(3)
    seen = {R.sample_prior(R.BetaClass(), rng).s for _ in range(2000)}
    assert seen == set(R.S_VALUES)
    rec = R.sample_prior(R.FixedClass(), 4, n=10)
    h9 = sum(1 / i for i in range(1, 10))
    assert rec.theta == pytest.approx(2 * rec.s / (2 * h9), rel=1e-12)


def test_class_validation_and_round_trip():
    with pytest.raises(ValueError):
        R.BetaClass(alpha_low=0.5)
    with pytest.raises(ValueError):
        R.GrowthClass(atom_weight=1.5)
    for mc in (R.BetaClass(), R.GrowthClass(atom_weight=0.3), R.FixedClass(measure_spec={"family": "dirac", "p": 0.5})):
        assert R.model_class_from_dict(mc.to_dict()) == mc
    with pytest.raises(ValueError):
        R.model_class_from_dict({"kind": "Nope"})


# --------------------------------------------------------------------------
# Reference table


def test_table_shape_and_labels():
    t = R.simulate_reference_table([R.BetaClass(), R.GrowthClass()], 30, 20, 5)
    assert t.X.shape == (60, len(FEATURE_NAMES))
    assert t.y.tolist() == [0] * 30 + [1] * 30
    assert t.class_names == ("Beta", "Growth")
    assert len(t.records) == 60 and t.records[0].model == "Beta"
    assert np.all(np.isfinite(t.X))


def test_table_deterministic_and_worker_independent():
    classes = [R.BetaClass(), R.GrowthClass()]
    a = R.simulate_reference_table(classes, 20, 15, 9)
    b = R.simulate_reference_table(classes, 20, 15, 9, workers=2)
    assert np.array_equal(a.X, b.X)
    c = R.simulate_reference_table(classes, 20, 15, 10)
    assert not np.array_equal(a.X, c.X)


def test_kingman_table_hits_target_sites():
    fixed = R.FixedClass(s_values=(20,))
    t = R.simulate_reference_table([fixed], 3000, 100, 11)
    s = t.X[:, FEATURE_NAMES.index("S")]
    assert mc_close(s, 20.0)


def test_table_rejects_bad_input():
    with pytest.raises(ValueError):
        R.ReferenceTable(np.zeros((3, 4)), [0, 1, 0], ("a", "b"))
    with pytest.raises(ValueError):
        _table([[np.nan], [1.0]], [0, 1])
    with pytest.raises(ValueError):
        _table([[0.0], [1.0]], [0, 2])
    with pytest.raises(ValueError):
        R.simulate_reference_table([R.BetaClass(), R.BetaClass()], 5, 10)


def test_table_csv_round_trip():
    t = R.simulate_reference_table([R.BetaClass(), R.GrowthClass()], 5, 12, 1)
    back = R.ReferenceTable.from_csv(t.to_csv())
    assert np.array_equal(back.X, t.X)
    assert np.array_equal(back.y, t.y)
    assert back.records == t.records
    g = _table([[0.5, 1.0], [2.0, 3.0]], [0, 1], names=("u", "v"))
    back = R.ReferenceTable.from_csv(g.to_csv())
    assert back.feature_names == ("u", "v") and np.array_equal(back.X, g.X)


def test_identical_classes_are_indistinguishable():
    t = R.simulate_reference_table([R.FixedClass(name="a"), R.FixedClass(name="b")], 1000, 20, 12)
    f = R.train_forest(t, 200, rng_seed=1)
    assert abs(R.oob_error(f, t).overall - 0.5) <= 0.05


# --------------------------------------------------------------------------
# Forest


def test_separable_single_split():
    # a few repeated levels per class, so every bootstrap sample sees them all
    rng = np.random.default_rng(4)
    x = np.concatenate([rng.choice([-3.0, -2.0, -1.0], 200), rng.choice([1.0, 2.0, 3.0], 200)])
    t = _table(x[:, None], [0] * 200 + [1] * 200)
    f = R.train_forest(t, 50, rng_seed=2)
    assert all(tree.num_nodes == 3 for tree in f.trees)
    # the threshold is the largest training value sent left
    assert all(tree.threshold[0] == -1.0 for tree in f.trees)
    rep = R.oob_error(f, t)
    assert rep.overall == 0.0 and rep.per_class == {"a": 0.0, "b": 0.0}

@pytest.mark.slow

def test_shuffled_labels_give_chance_error():
    base = R.simulate_reference_table([R.BetaClass(), R.GrowthClass()], 5000, 30, 13)
    y = np.random.default_rng(5).permutation(base.y)
    t = R.ReferenceTable(base.X, y, base.class_names)
    f = R.train_forest(t, 500, rng_seed=3)
    assert abs(R.oob_error(f, t).overall - 0.5) <= 0.05


def test_forest_deterministic_per_seed():
    t = R.simulate_reference_table([R.BetaClass(), R.GrowthClass()], 100, 20, 14)
    a = R.train_forest(t, 20, rng_seed=5)
    b = R.train_forest(t, 20, rng_seed=5, workers=2)
    assert a.to_json() == b.to_json()
    c = R.train_forest(t, 20, rng_seed=6)
    assert a.to_json() != c.to_json()


def test_forest_json_round_trip():
    t = R.simulate_reference_table([R.BetaClass(), R.GrowthClass()], 60, 20, 15)
    f = R.train_forest(t, 10, rng_seed=1, groups=["S", "O"])
    g = R.Forest.from_json(f.to_json())
    assert np.array_equal(g.votes(t.X), f.votes(t.X))
    assert g.columns.tolist() == f.columns.tolist()
    assert R.oob_error(g, t) == R.oob_error(f, t)


def test_entropy_criterion():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(600, 4))
    y = (X[:, 1] > 0.2).astype(int)
    t = _table(X, y)
    f = R.train_forest(t, 60, rng_seed=3, criterion="entropy")
    assert f.config["criterion"] == "entropy"
    assert R.oob_error(f, t).overall < 0.05
    assert max(R.variable_importance(f).items(), key=lambda kv: kv[1])[0] == "x1"
    assert f.to_json() != R.train_forest(t, 60, rng_seed=3).to_json()
    with pytest.raises(ValueError):
        R.train_forest(t, 5, criterion="mse")


def test_train_validation():
    t = _table([[0.0], [1.0]], [0, 0])
    with pytest.raises(ValueError):
        R.train_forest(t, 5)
    t = _table([[0.0], [1.0]], [0, 1])
    with pytest.raises(ValueError):
        R.train_forest(t, 5, mtry=2)
    with pytest.raises(ValueError):
        R.train_forest(t, 0)
    with pytest.raises(ValueError):
        R.train_forest(t, 5, groups=["S"])


def test_classify_unanimous_and_tie():
    rng = np.random.default_rng(6)
    x = np.concatenate([rng.uniform(-2, -0.1, 100), rng.uniform(0.1, 2, 100)])
    f = R.train_forest(_table(x[:, None], [0] * 100 + [1] * 100), 25, rng_seed=1)
    assert R.classify(f, [1.5]) == ("b", 1.0)
    assert R.classify(f, {"x0": -1.5}) == ("a", 1.0)

    tie = R.Forest((_stump(1), _stump(0)), np.zeros((2, 1), dtype=np.int64), np.array([0]),
                   ("first", "second"), feature_names=("x0",))
    assert R.classify(tie, [0.0]) == ("first", 0.5)


def test_classify_missing_feature():
    f = R.Forest((_stump(0),), np.zeros((1, 1), dtype=np.int64), np.arange(25), ("a", "b"))
    v = {name: 1.0 for name in FEATURE_NAMES[:-1]}
    with pytest.raises(ValueError, match="missing"):
        R.classify(f, v)
    with pytest.raises(ValueError):
        R.classify(f, np.zeros(24))
    v[FEATURE_NAMES[-1]] = np.nan
    with pytest.raises(ValueError):
        R.classify(f, v)


def test_oob_modes():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(400, 3))
    y = (X[:, 0] + 0.5 * rng.normal(size=400) > 0).astype(int)
    t = _table(X, y)
    f = R.train_forest(t, 100, rng_seed=2)
    vote, tree = R.oob_error(f, t), R.oob_error(f, t, mode="tree")
    assert vote.n_skipped == 0
    # single trees err more often than the majority of them
    assert vote.overall < tree.overall < 0.5
    with pytest.raises(ValueError):
        R.oob_error(f, t, mode="x")
    with pytest.raises(ValueError):
        R.oob_error(f, _table(X[:10], y[:10]))


def test_importance_single_informative_feature():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(1000, 4))
    y = (X[:, 2] > 0).astype(int)
    imp = R.variable_importance(R.train_forest(_table(X, y), 200, rng_seed=4))
    assert sum(imp.values()) == pytest.approx(1.0)
    assert imp["x2"] > 0.9


def test_importance_duplicated_feature_splits_evenly():
    rng = np.random.default_rng(9)
    z = rng.normal(size=1000)
    X = np.column_stack([z, rng.normal(size=1000), z, rng.normal(size=1000)])
    y = (z > 0).astype(int)
    imp = R.variable_importance(R.train_forest(_table(X, y), 500, rng_seed=5))
    assert 0.5 <= imp["x0"] / imp["x2"] <= 2.0
    assert imp["x0"] + imp["x2"] > 0.9


def test_monotone_transform_invariance():
    base = R.simulate_reference_table([R.BetaClass(), R.GrowthClass()], 500, 30, 16)
    a = R.oob_error(R.train_forest(base, 100, rng_seed=8), base)
    # dense ranks, cubed: strictly increasing and exact in floating point
    X = np.column_stack([np.unique(c, return_inverse=True)[1].astype(float) ** 3 for c in base.X.T])
    moved = R.ReferenceTable(X, base.y, base.class_names)
    b = R.oob_error(R.train_forest(moved, 100, rng_seed=8), moved)
    assert a == b

@pytest.mark.slow

def test_noise_features_barely_matter():
    base = R.simulate_reference_table([R.BetaClass(), R.GrowthClass()], 5000, 30, 17)
    a = R.oob_error(R.train_forest(base, 500, rng_seed=9), base).overall
    noise = np.random.default_rng(10).uniform(size=(base.num_rows, 5))
    names = base.feature_names + tuple(f"noise{i}" for i in range(5))
    noisy = R.ReferenceTable(np.hstack([base.X, noise]), base.y, base.class_names, feature_names=names)
    b = R.oob_error(R.train_forest(noisy, 500, rng_seed=9), noisy).overall
    assert abs(a - b) < 0.03

@pytest.mark.slow

def test_held_out_growth_rows(beta_growth_table, beta_growth_forests):
    forest = beta_growth_forests(["AF", "S", "pi", "Ham", "r2", "O"])
    held = R.simulate_reference_table([R.BetaClass(), R.GrowthClass()], 1000, 100, 99)
    growth = held.X[held.y == 1]
    votes = forest.votes(growth)
    assert np.mean(np.argmax(votes, axis=1) == 1) >= 0.7


def test_classification_report_keys():
    f = R.Forest((_stump(0),), np.zeros((1, 1), dtype=np.int64), np.array([0]), ("a", "b"), feature_names=("x0",))
    rep = R.classification_report(f, [0.0])
    assert rep["label"] == "a" and rep["vote_fraction"] == 1.0
    assert set(rep["importances"]) == {"x0"}
