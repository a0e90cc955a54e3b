"""From-scratch classifiers over micro-moment features.

Three models trained to reproduce the rule engine's labels:

  * DecisionTree  - greedy Gini splitting, best-first growth capped at a
                    total split budget (default 100), midpoint thresholds.
  * BaggedTrees   - bootstrap-aggregated trees (default 30 learners),
                    majority vote with ties resolved to the lowest class.
  * KnnModel      - k-nearest neighbors, Euclidean distance (default k=1),
                    distance ties resolved to the smallest training index.

Plus the feature builder (seven per-sample features normalized by the
appliance's operating parameters) and an evaluation harness producing
accuracy, per-class precision/recall/F1, macro-F1, and the confusion
matrix. All training and evaluation is deterministic for fixed seeds and
input order.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .appliances import ApplianceSpec
from .errors import ValidationError
from .micromoment import run_series

N_CLASSES = 5

FEATURE_NAMES = (
    "p_norm",          # watts / dacr_max
    "p_prev_norm",
    "delta_p_norm",
    "occupied",
    "hour_sin",
    "hour_cos",
    "clock_ratio",     # operation clock / dot
)


def build_features(spec: ApplianceSpec, timestamps, watts, occupied) -> np.ndarray:
    """Per-sample feature matrix (n x 7) for one appliance's series.

    The operation clock is threaded over the same series the features are
    built from, so features computed on measured (noisy) power see the
    clock that labeling on that signal would see.
    """
    ts = np.asarray(timestamps, dtype=np.float64)
    w = np.asarray(watts, dtype=np.float64)
    occ = np.asarray(occupied, dtype=np.float64)
    _, clocks = run_series(spec, ts, w, occ.astype(bool))
    p_norm = w / spec.dacr_max_w
    p_prev = np.concatenate(([0.0], p_norm[:-1]))
    sod = np.mod(ts, 86400.0)
    angle = 2.0 * np.pi * sod / 86400.0
    X = np.column_stack(
        [
            p_norm,
            p_prev,
            p_norm - p_prev,
            occ,
            np.sin(angle),
            np.cos(angle),
            clocks / spec.dot_s,
        ]
    )
    if not np.isfinite(X).all():
        raise ValidationError("non-finite feature values")
    return X


# ---------------------------------------------------------------------------
# Decision tree


def _gini(counts: np.ndarray, n: float) -> float:
    if n <= 0:
        return 0.0
    p = counts / n
    return 1.0 - float(np.dot(p, p))


def _best_split(X: np.ndarray, y: np.ndarray, idx: np.ndarray):
    """Best (gain, feature, threshold) over all features for one node.

    Thresholds are midpoints between consecutive distinct sorted values.
    Ties keep the lowest feature index, then the lowest threshold.
    Returns None when no split improves Gini impurity.
    """
    n = idx.size
    if n < 2:
        return None
    labels = y[idx]
    node_counts = np.bincount(labels, minlength=N_CLASSES).astype(np.float64)
    node_gini = _gini(node_counts, n)
    if node_gini == 0.0:
        return None

    best = None  # (gain, feature, threshold)
    for j in range(X.shape[1]):
        x = X[idx, j]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        if xs[0] == xs[-1]:
            continue
        ys = labels[order]
        onehot = np.zeros((n, N_CLASSES), dtype=np.float64)
        onehot[np.arange(n), ys] = 1.0
        left_counts = np.cumsum(onehot, axis=0)  # after k+1 samples
        valid = xs[:-1] < xs[1:]
        if not valid.any():
            continue
        ks = np.nonzero(valid)[0]
        nl = (ks + 1).astype(np.float64)
        nr = n - nl
        lc = left_counts[ks]
        rc = node_counts - lc
        gini_l = 1.0 - np.einsum("ij,ij->i", lc / nl[:, None], lc / nl[:, None])
        gini_r = 1.0 - np.einsum("ij,ij->i", rc / nr[:, None], rc / nr[:, None])
        gain = node_gini - (nl * gini_l + nr * gini_r) / n
        b = int(np.argmax(gain))  # first max: lowest threshold wins ties
        g = float(gain[b])
        if g > 1e-12 and (best is None or g > best[0] + 1e-15):
            k = int(ks[b])
            thr = (xs[k] + xs[k + 1]) / 2.0
            best = (g, j, thr)
    return best


@dataclass
class DecisionTree:
    """Flat-array binary tree; feature[i] == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, N_CLASSES) class distribution
    max_splits: int = 100
    seed: int = 0

    @property
    def n_splits(self) -> int:
        return int((self.feature >= 0).sum())

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = np.nonzero(feat >= 0)[0]
            if active.size == 0:
                break
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return np.argmax(self.counts[node], axis=1).astype(np.int8)

    def to_dict(self) -> dict:
        return {
            "kind": "tree",
            "max_splits": self.max_splits,
            "seed": self.seed,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            counts=np.asarray(d["counts"], dtype=np.float64),
            max_splits=d.get("max_splits", 100),
            seed=d.get("seed", 0),
        )


def _validate_training_input(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("training set must be a non-empty 2-D array")
    if y.shape[0] != X.shape[0]:
        raise ValidationError(f"{X.shape[0]} samples but {y.shape[0]} labels")
    if y.min() < 0 or y.max() >= N_CLASSES:
        raise ValidationError(f"labels must be in 0..{N_CLASSES - 1}")
    return X, y


def train_tree(X, y, max_splits: int = 100, seed: int = 0) -> DecisionTree:
    """Grow a tree best-first until max_splits splits or only pure nodes.

    Single-class input yields a one-leaf tree. The seed is recorded for
    provenance; exact Gini splitting uses no randomness.
    """
    X, y = _validate_training_input(X, y)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[np.ndarray] = []

    def new_node(idx) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=N_CLASSES).astype(np.float64))
        return len(feature) - 1

    all_idx = np.arange(X.shape[0])
    root = new_node(all_idx)
    heap: list[tuple[float, int, int, np.ndarray, tuple]] = []
    tiebreak = 0

    def consider(node_id: int, idx: np.ndarray):
        nonlocal tiebreak
        split = _best_split(X, y, idx)
        if split is not None:
            gain, j, thr = split
            heapq.heappush(heap, (-gain * idx.size, tiebreak, node_id, idx, (j, thr)))
            tiebreak += 1

    consider(root, all_idx)
    splits_done = 0
    while heap and splits_done < max_splits:
        _, _, node_id, idx, (j, thr) = heapq.heappop(heap)
        mask = X[idx, j] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node_id] = j
        threshold[node_id] = thr
        lid = new_node(li)
        rid = new_node(ri)
        left[node_id] = lid
        right[node_id] = rid
        splits_done += 1
        consider(lid, li)
        consider(rid, ri)

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        counts=np.vstack(counts),
        max_splits=max_splits,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Bagged ensemble


@dataclass
class BaggedTrees:
    trees: list[DecisionTree]
    seed: int = 0
    max_splits: int = 100

    @property
    def n_learners(self) -> int:
        return len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros((X.shape[0], N_CLASSES), dtype=np.int64)
        for tree in self.trees:
            pred = tree.predict(X)
            votes[np.arange(X.shape[0]), pred] += 1
        # argmax takes the first maximum: ties go to the lowest class index.
        return np.argmax(votes, axis=1).astype(np.int8)

    def to_dict(self) -> dict:
        return {
            "kind": "ebt",
            "seed": self.seed,
            "n_learners": self.n_learners,
            "max_splits": self.max_splits,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BaggedTrees":
        return cls(
            trees=[DecisionTree.from_dict(t) for t in d["trees"]],
            seed=d.get("seed", 0),
            max_splits=d.get("max_splits", 100),
        )


def train_ensemble(
    X, y, n_learners: int = 30, max_splits: int = 100, seed: int = 0
) -> BaggedTrees:
    """Train n_learners trees on bootstrap resamples (size n, replacement)."""
    X, y = _validate_training_input(X, y)
    if n_learners < 1:
        raise ValidationError(f"n_learners must be >= 1, got {n_learners}")
    n = X.shape[0]
    trees = []
    for t in range(n_learners):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, t)))
        idx = rng.integers(0, n, size=n)
        tree = train_tree(X[idx], y[idx], max_splits=max_splits, seed=seed)
        tree.seed = t
        trees.append(tree)
    return BaggedTrees(trees=trees, seed=seed, max_splits=max_splits)


# ---------------------------------------------------------------------------
# K-nearest neighbors


@dataclass
class KnnModel:
    train_X: np.ndarray
    train_y: np.ndarray
    k: int = 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        return knn_predict(self.train_X, self.train_y, X, k=self.k)

    def to_dict(self) -> dict:
        return {
            "kind": "knn",
            "k": self.k,
            "train_X": self.train_X.tolist(),
            "train_y": self.train_y.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KnnModel":
        return cls(
            train_X=np.asarray(d["train_X"], dtype=np.float64),
            train_y=np.asarray(d["train_y"], dtype=np.int64),
            k=d["k"],
        )


def knn_predict(train_X, train_y, query_X, k: int = 1) -> np.ndarray:
    """Euclidean k-NN. Distance ties resolve to the smaller training index,
    vote ties to the lowest class index."""
    train_X, train_y = _validate_training_input(train_X, train_y)
    query = np.atleast_2d(np.asarray(query_X, dtype=np.float64))
    n = train_X.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"k={k} must be in 1..{n}")
    sq_train = np.einsum("ij,ij->i", train_X, train_X)
    out = np.empty(query.shape[0], dtype=np.int8)
    chunk = max(1, min(512, int(2e7 // max(n, 1))))
    for s in range(0, query.shape[0], chunk):
        q = query[s : s + chunk]
        # squared distances preserve the Euclidean ordering
        d2 = sq_train[None, :] - 2.0 * (q @ train_X.T)
        d2 += np.einsum("ij,ij->i", q, q)[:, None]
        if k == 1:
            nearest = np.argmin(d2, axis=1)  # first min: smallest index
            out[s : s + chunk] = train_y[nearest]
        else:
            order = np.argsort(d2, axis=1, kind="stable")[:, :k]
            for r in range(order.shape[0]):
                votes = np.bincount(train_y[order[r]], minlength=N_CLASSES)
                out[s + r] = int(np.argmax(votes))
    return out


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class EvalReport:
    accuracy: float
    per_class: dict[int, dict[str, float]]  # class -> precision/recall/f1/support
    macro_f1: float
    confusion: list[list[int]]  # row = truth, column = prediction
    dataset_id: str = ""
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class": {
                str(c): self.per_class[c] for c in sorted(self.per_class)
            },
            "confusion": self.confusion,
            "dataset_id": self.dataset_id,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def table(self) -> str:
        lines = [
            f"dataset: {self.dataset_id}  seed: {self.seed}",
            f"accuracy: {self.accuracy:.4f}  macro-F1: {self.macro_f1:.4f}",
            "class  precision  recall     f1         support",
        ]
        for c in sorted(self.per_class):
            m = self.per_class[c]
            lines.append(
                f"{c:<6} {m['precision']:<10.4f} {m['recall']:<10.4f} "
                f"{m['f1']:<10.4f} {int(m['support'])}"
            )
        return "\n".join(lines)


def evaluate(model, X, y, dataset_id: str = "", seed: int = 0) -> EvalReport:
    """Score a model on a test set.

    Macro-F1 averages F1 over the classes present in the truth only; a
    class absent from the truth contributes nothing to the mean.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValidationError("empty test set")
    if y.shape[0] != X.shape[0]:
        raise ValidationError(f"{X.shape[0]} samples but {y.shape[0]} labels")
    pred = np.asarray(model.predict(X), dtype=np.int64)

    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    accuracy = float(np.trace(confusion)) / float(y.size)

    per_class = {}
    f1s = []
    for c in range(N_CLASSES):
        tp = float(confusion[c, c])
        support = float(confusion[c].sum())
        predicted = float(confusion[:, c].sum())
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[c] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": support,
        }
        if support > 0:
            f1s.append(f1)
    macro_f1 = float(np.mean(f1s)) if f1s else 0.0
    return EvalReport(
        accuracy=accuracy,
        per_class=per_class,
        macro_f1=macro_f1,
        confusion=confusion.tolist(),
        dataset_id=dataset_id,
        seed=seed,
    )


def stratified_split(y, test_fraction: float = 0.3, seed: int = 0):
    """Deterministic per-class shuffle split; returns (train_idx, test_idx).

    A class with a single sample stays in the training set.
    """
    if not 0 < test_fraction < 1:
        raise ValidationError(f"test_fraction must be in (0,1), got {test_fraction}")
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0x5E117)))
    train, test = [], []
    for c in np.unique(y):
        idx = np.nonzero(y == c)[0]
        idx = idx[rng.permutation(idx.size)]
        n_test = int(round(test_fraction * idx.size)) if idx.size >= 2 else 0
        n_test = min(n_test, idx.size - 1)
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    train_idx = np.sort(np.concatenate(train))
    test_idx = np.sort(np.concatenate(test))
    return train_idx, test_idx


# ---------------------------------------------------------------------------
# Model files and trace-directory datasets


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"
    )


def load_model(path: str | Path):
    d = json.loads(Path(path).read_text())
    kind = d.get("kind")
    if kind == "tree":
        return DecisionTree.from_dict(d)
    if kind == "ebt":
        return BaggedTrees.from_dict(d)
    if kind == "knn":
        return KnnModel.from_dict(d)
    raise ValidationError(f"unknown model kind {kind!r} in {path}")


def dataset_from_trace(trace, signal: str = "measured"):
    """(X, y) pooled over a SimTrace's appliances, sorted by appliance id.

    signal selects which power series feeds the features; ground-truth
    labels always come from the true series.
    """
    if signal not in ("measured", "true"):
        raise ValidationError(f"signal must be 'measured' or 'true', got {signal!r}")
    xs, ys = [], []
    for aid in sorted(trace.appliances):
        at = trace.appliances[aid]
        watts = at.measured_w if signal == "measured" else at.true_w
        occ = trace.occupancy[at.spec.zone_id]
        xs.append(build_features(at.spec, trace.timestamps, watts, occ))
        ys.append(at.labels.astype(np.int64))
    return np.vstack(xs), np.concatenate(ys)


def dataset_from_dir(trace_dir: str | Path, signal: str = "measured"):
    """(X, y, dataset_id) from a trace directory written by simulate."""
    trace_dir = Path(trace_dir)
    manifest_path = trace_dir / "manifest.json"
    if not manifest_path.exists():
        raise ValidationError(f"no manifest.json in {trace_dir}")
    manifest = json.loads(manifest_path.read_text())
    col = 2 if signal == "measured" else 1
    xs, ys = [], []
    for entry in manifest["appliances"]:
        spec = ApplianceSpec(
            id=entry["id"],
            name=entry["name"],
            zone_id=entry["zone"],
            dacr_max_w=entry["dacr_max_w"],
            dacr_min_w=entry["dacr_min_w"],
            dspc_w=entry["dspc_w"],
            dot_s=entry["dot_s"],
            requires_presence=entry["requires_presence"],
        )
        power = np.loadtxt(
            trace_dir / f"power_{spec.id}.csv", delimiter=",", skiprows=1, ndmin=2
        )
        occ = np.loadtxt(
            trace_dir / f"occupancy_{spec.zone_id}.csv", delimiter=",", skiprows=1, ndmin=2
        )
        labels = np.loadtxt(
            trace_dir / f"labels_{spec.id}.csv", delimiter=",", skiprows=1, ndmin=2
        )
        xs.append(build_features(spec, power[:, 0], power[:, col], occ[:, 1] > 0.5))
        ys.append(labels[:, 1].astype(np.int64))
    return np.vstack(xs), np.concatenate(ys), manifest["dataset_id"]
