"""Classifier tests.

Metric oracles were computed by hand from the confusion matrix (spelled out
in comments); model behavior is checked on constructed separable sets and
on small simulated traces against the rule-engine labels.
"""

import numpy as np
import pytest

from emedge.appliances import ApplianceSpec
from emedge.classifier import (
    BaggedTrees,
    DecisionTree,
    KnnModel,
    build_features,
    dataset_from_trace,
    evaluate,
    knn_predict,
    load_model,
    save_model,
    stratified_split,
    train_ensemble,
    train_tree,
)
from emedge.errors import ValidationError
from emedge.simulate import (
    ApplianceSchedule,
    NoiseModel,
    OccupancyRule,
    SimConfig,
    generate,
)


class FixedModel:
    def __init__(self, pred):
        self.pred = np.asarray(pred)

    def predict(self, X):
        return self.pred


def leaf_tree(cls):
    counts = np.zeros((1, 5))
    counts[0, cls] = 1
    return DecisionTree(
        feature=np.array([-1]), threshold=np.array([0.0]),
        left=np.array([-1]), right=np.array([-1]), counts=counts,
    )


class TestDecisionTree:
    def test_pure_input_single_leaf(self):
        X = np.random.default_rng(0).random((10, 3))
        tree = train_tree(X, np.full(10, 3))
        assert tree.n_splits == 0
        assert np.all(tree.predict(X) == 3)

    def test_separable_classes_one_split(self):
        X = np.array([[0.0], [0.1], [0.9], [1.0]])
        y = np.array([0, 0, 3, 3])
        tree = train_tree(X, y)
        assert tree.n_splits == 1
        assert tree.threshold[0] == pytest.approx(0.5)
        assert np.array_equal(tree.predict(X), y)

    def test_same_data_same_seed_identical_serialization(self):
        rng = np.random.default_rng(5)
        X = rng.random((200, 4))
        y = (X[:, 0] * 4.99).astype(np.int64)
        a = train_tree(X, y, max_splits=20, seed=9)
        b = train_tree(X, y, max_splits=20, seed=9)
        assert a.to_dict() == b.to_dict()

    def test_split_budget_respected(self):
        rng = np.random.default_rng(2)
        X = rng.random((500, 3))
        y = rng.integers(0, 5, 500)
        tree = train_tree(X, y, max_splits=7)
        assert tree.n_splits <= 7

    def test_empty_input_rejected(self):
        with pytest.raises(ValidationError):
            train_tree(np.empty((0, 2)), np.empty(0, dtype=int))

    def test_labels_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            train_tree(np.ones((3, 1)), np.array([0, 1, 7]))


class TestEnsemble:
    def test_single_learner_is_one_bootstrap_tree(self):
        rng = np.random.default_rng(0)
        X = rng.random((50, 2))
        y = (X[:, 0] > 0.5).astype(np.int64) * 3
        model = train_ensemble(X, y, n_learners=1, seed=4)
        assert model.n_learners == 1
        assert np.array_equal(model.predict(X), model.trees[0].predict(X))

    def test_majority_vote(self):
        model = BaggedTrees(trees=[leaf_tree(3), leaf_tree(3), leaf_tree(0)])
        assert model.predict(np.zeros((1, 1)))[0] == 3

    def test_tie_breaks_to_lowest_class(self):
        model = BaggedTrees(trees=[leaf_tree(0), leaf_tree(4)])
        assert model.predict(np.zeros((1, 1)))[0] == 0
        model = BaggedTrees(trees=[leaf_tree(4), leaf_tree(0)])
        assert model.predict(np.zeros((1, 1)))[0] == 0

    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(1)
        X = rng.random((120, 3))
        y = rng.integers(0, 5, 120)
        a = train_ensemble(X, y, n_learners=5, max_splits=10, seed=3)
        b = train_ensemble(X, y, n_learners=5, max_splits=10, seed=3)
        assert a.to_dict() == b.to_dict()
        c = train_ensemble(X, y, n_learners=5, max_splits=10, seed=4)
        assert c.to_dict() != a.to_dict()


class TestKnn:
    def test_query_on_training_point(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        y = np.array([0, 3, 4])
        assert knn_predict(X, y, [[1.0, 0.0]])[0] == 3

    def test_k_larger_than_n_rejected(self):
        with pytest.raises(ValidationError):
            knn_predict(np.ones((2, 1)), np.array([0, 1]), [[1.0]], k=3)

    def test_hand_computed_distances(self):
        # q=(0.4,0): d^2 = 0.16 to (0,0), 0.36 to (1,0), 1.16 to (0,1).
        X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        y = np.array([0, 3, 4])
        assert knn_predict(X, y, [[0.4, 0.0]], k=1)[0] == 0

    def test_distance_tie_takes_smaller_training_index(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([2, 3])
        assert knn_predict(X, y, [[0.5]], k=1)[0] == 2

    def test_empty_train_set_rejected(self):
        with pytest.raises(ValidationError):
            knn_predict(np.empty((0, 1)), np.empty(0, dtype=int), [[1.0]])

    def test_k3_vote(self):
        X = np.array([[0.0], [0.1], [0.2], [5.0]])
        y = np.array([1, 1, 3, 3])
        assert knn_predict(X, y, [[0.0]], k=3)[0] == 1


class TestEvaluate:
    def test_hand_computed_report(self):
        # confusion: truth 0 -> pred {0,3}; truth 3 -> pred {3,3};
        # truth 4 -> pred {4,0}. accuracy 4/6.
        # class 0: P=1/2, R=1/2, F1=0.5 ; class 3: P=2/3, R=1, F1=0.8 ;
        # class 4: P=1, R=1/2, F1=2/3 ; macro = (0.5+0.8+2/3)/3.
        truth = [0, 0, 3, 3, 4, 4]
        pred = [0, 3, 3, 3, 4, 0]
        report = evaluate(FixedModel(pred), np.zeros((6, 1)), truth)
        assert report.accuracy == pytest.approx(4 / 6)
        assert report.per_class[0]["f1"] == pytest.approx(0.5)
        assert report.per_class[3]["f1"] == pytest.approx(0.8)
        assert report.per_class[4]["f1"] == pytest.approx(2 / 3)
        assert report.macro_f1 == pytest.approx(0.6556, abs=1e-4)

    def test_perfect_prediction(self):
        truth = [0, 1, 2, 3, 4]
        report = evaluate(FixedModel(truth), np.zeros((5, 1)), truth)
        assert report.accuracy == 1.0
        assert report.macro_f1 == 1.0

    def test_degenerate_all_one_class_predictor(self):
        truth = [0, 1, 2, 3, 4] * 4  # balanced
        report = evaluate(FixedModel([2] * 20), np.zeros((20, 1)), truth)
        assert report.accuracy == pytest.approx(0.2)

    def test_confusion_accounting_invariants(self):
        rng = np.random.default_rng(0)
        truth = rng.integers(0, 5, 100)
        pred = rng.integers(0, 5, 100)
        report = evaluate(FixedModel(pred), np.zeros((100, 1)), truth)
        confusion = np.array(report.confusion)
        for c in range(5):
            assert confusion[c].sum() == (truth == c).sum()
        assert report.accuracy == pytest.approx(np.trace(confusion) / 100)

    def test_absent_class_excluded_from_macro(self):
        truth = [0, 0, 3, 3]
        pred = [0, 0, 3, 3]
        report = evaluate(FixedModel(pred), np.zeros((4, 1)), truth)
        assert report.macro_f1 == 1.0  # classes 1,2,4 absent, ignored

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            evaluate(FixedModel([0]), np.zeros((2, 1)), [0, 1, 2])


class TestSerialization:
    def test_tree_round_trip(self, tmp_path):
        rng = np.random.default_rng(7)
        X = rng.random((100, 3))
        y = rng.integers(0, 5, 100)
        tree = train_tree(X, y, max_splits=10)
        save_model(tree, tmp_path / "m.json")
        loaded = load_model(tmp_path / "m.json")
        assert np.array_equal(loaded.predict(X), tree.predict(X))

    def test_model_file_bytes_deterministic(self, tmp_path):
        rng = np.random.default_rng(7)
        X = rng.random((100, 3))
        y = rng.integers(0, 5, 100)
        save_model(train_ensemble(X, y, n_learners=3, max_splits=5, seed=1), tmp_path / "a.json")
        save_model(train_ensemble(X, y, n_learners=3, max_splits=5, seed=1), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_knn_round_trip(self, tmp_path):
        X = np.array([[0.0, 0.0], [1.0, 0.0]])
        y = np.array([0, 3])
        save_model(KnnModel(train_X=X, train_y=y, k=1), tmp_path / "k.json")
        loaded = load_model(tmp_path / "k.json")
        assert loaded.predict(np.array([[0.9, 0.0]]))[0] == 3


class TestFeaturesAndSplit:
    def test_feature_shape_and_first_prev(self):
        spec = ApplianceSpec(
            id="a", name="a", zone_id="z", dacr_max_w=100, dspc_w=2, dot_s=3600,
            requires_presence=True,
        )
        X = build_features(spec, [0, 60, 120], [50, 80, 0], [True, True, False])
        assert X.shape == (3, 7)
        assert X[0, 1] == 0.0  # no prior observation
        assert X[1, 1] == pytest.approx(0.5)
        assert np.isfinite(X).all()

    def test_stratified_split_deterministic_and_stratified(self):
        y = np.array([0] * 70 + [3] * 20 + [4] * 10)
        tr1, te1 = stratified_split(y, 0.3, seed=2)
        tr2, te2 = stratified_split(y, 0.3, seed=2)
        assert np.array_equal(tr1, tr2) and np.array_equal(te1, te2)
        assert set(tr1) | set(te1) == set(range(100))
        assert not set(tr1) & set(te1)
        assert (y[te1] == 0).sum() == 21
        assert (y[te1] == 3).sum() == 6
        assert (y[te1] == 4).sum() == 3


def small_trace(sigma=0.0, seed=3):
    ac = ApplianceSpec(
        id="ac1", name="Air conditioner", zone_id="room", dacr_max_w=1000,
        dspc_w=4, dot_s=55800, dacr_min_w=100, requires_presence=True,
    )
    light = ApplianceSpec(
        id="light1", name="Light", zone_id="room", dacr_max_w=60, dspc_w=0,
        dot_s=28800, requires_presence=True,
    )
    hourly = tuple(0.9 if 7 <= h <= 22 else 0.3 for h in range(24))
    cfg = SimConfig(
        seed=seed,
        duration_s=2 * 86400,
        sample_interval_s=60,
        appliances=(
            ApplianceSchedule(spec=ac, on_windows=((8 * 3600, 12 * 3600), (13 * 3600, 18 * 3600))),
            ApplianceSchedule(spec=light, on_windows=((6 * 3600, 9 * 3600), (17 * 3600, 23 * 3600))),
        ),
        occupancy=(OccupancyRule(zone="room", hourly=hourly),),
        noise=NoiseModel(relative_sigma=sigma),
        duty_jitter=0.10,
    )
    return generate(cfg)


def test_ensemble_learns_rule_labels_on_clean_trace():
    trace = small_trace()
    X, y = dataset_from_trace(trace, signal="true")
    train_idx, test_idx = stratified_split(y, 0.3, seed=1)
    model = train_ensemble(X[train_idx], y[train_idx], n_learners=8, max_splits=100, seed=1)
    report = evaluate(model, X[test_idx], y[test_idx])
    assert report.accuracy >= 0.99
