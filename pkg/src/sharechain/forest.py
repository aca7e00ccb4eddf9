"""Random forest classifier used for every specialized detector.

Trees are grown on bootstrap samples with Gini splits over ``ceil(sqrt(d))``
randomly drawn candidate features per node, until nodes are pure or hold
fewer than two samples. Training is fully determined by the data and the
seed: tree ``t`` draws from ``SeedSequence([seed, t])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

FORMAT_VERSION = 1


@dataclass(frozen=True)
class DecisionTree:
    """Flat binary tree; ``feature[i] == -1`` marks leaf ``i``.

    Samples with ``x[feature] <= threshold`` go to ``left``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, n_classes), zero rows for internal nodes

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.counts[self.apply(X)], axis=1)

    def split_features(self) -> list[int]:
        """Split features in node (preorder creation) order."""
        return [int(f) for f in self.feature if f >= 0]

    def to_dict(self) -> dict:
        leaves = np.flatnonzero(self.feature < 0)
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "leaf_counts": {str(i): self.counts[i].tolist() for i in leaves},
        }

    @classmethod
    def from_dict(cls, obj: dict, n_classes: int) -> "DecisionTree":
        feature = np.asarray(obj["feature"], dtype=np.int64)
        counts = np.zeros((len(feature), n_classes), dtype=np.int64)
        for k, v in obj["leaf_counts"].items():
            counts[int(k)] = v
        tree = cls(feature, np.asarray(obj["threshold"], dtype=np.float64),
                   np.asarray(obj["left"], dtype=np.int64), np.asarray(obj["right"], dtype=np.int64), counts)
        tree.validate()
        return tree

    def validate(self) -> None:
        n = self.n_nodes
        if n == 0:
            raise ValueError("empty tree")
        internal = self.feature >= 0
        for arr in (self.left, self.right):
            if np.any(internal & ((arr <= np.arange(n)) | (arr >= n))):
                raise ValueError("tree children must point forward to existing nodes")
        if np.any(self.counts[~internal].sum(axis=1) == 0):
            raise ValueError("tree has an empty leaf")


def _best_split(Xn: np.ndarray, yn: np.ndarray, n_classes: int, candidates: np.ndarray,
                min_features: int):
    """Best (feature, threshold) over the candidate order, or None.

    Candidates are scanned in the given random order; scanning stops once
    ``min_features`` have been looked at and a valid split exists. Among the
    scanned features the split maximizing ``sum_child S_c / n_c`` (with
    ``S_c`` the sum of squared class counts, i.e. minimal weighted Gini)
    wins; ties go to the smaller feature index, then the smaller threshold.
    """
    n = len(yn)
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), yn] = 1
    total = onehot.sum(axis=0)
    best = None  # (score, feature, threshold)
    seen = 0
    for f in candidates:
        if seen >= min_features and best is not None:
            break
        seen += 1
        x = Xn[:, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        valid = np.flatnonzero(xs[:-1] < xs[1:])
        if valid.size == 0:
            continue
        left = np.cumsum(onehot[order], axis=0)[valid]
        right = total - left
        n_left = (valid + 1).astype(np.int64)
        n_right = n - n_left
        s_left = (left * left).sum(axis=1)
        s_right = (right * right).sum(axis=1)
        # exact integers below 2**53 -> correctly rounded single division
        score = (s_left * n_right + s_right * n_left).astype(np.float64) / (n_left * n_right).astype(np.float64)
        k = int(np.argmax(score))
        thr = float((xs[valid[k]] + xs[valid[k] + 1]) / 2.0)
        if thr >= xs[valid[k] + 1]:
            thr = float(xs[valid[k]])
        cand = (float(score[k]), int(f), thr)
        if best is None or cand[0] > best[0] or (cand[0] == best[0] and (cand[1], cand[2]) < (best[1], best[2])):
            best = cand
    return None if best is None else (best[1], best[2])


def build_tree(X: np.ndarray, y: np.ndarray, n_classes: int, rng: np.random.Generator,
               max_features: int | None = None) -> DecisionTree:
    n, d = X.shape
    k = max_features or math.ceil(math.sqrt(d))
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(None)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n))]
    while stack:
        node, idx = stack.pop()
        yn = y[idx]
        node_counts = np.bincount(yn, minlength=n_classes)
        split = None
        if len(idx) >= 2 and np.count_nonzero(node_counts) > 1:
            split = _best_split(X[idx], yn, n_classes, rng.permutation(d), k)
        if split is None:
            counts[node] = node_counts
            continue
        f, thr = split
        go_left = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        left[node], right[node] = new_node(), new_node()
        # right pushed first so the left subtree is built (and numbered) first
        stack.append((right[node], idx[~go_left]))
        stack.append((left[node], idx[go_left]))
    zero = np.zeros(n_classes, dtype=np.int64)
    return DecisionTree(
        np.asarray(feature, dtype=np.int64), np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64),
        np.vstack([zero if c is None else c for c in counts]).astype(np.int64),
    )


def tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


class RandomForest(ClassifierMixin, BaseEstimator):
    """Bagged Gini trees with majority voting.

    Parameters
    ----------
    n_estimators : int, default=10
        Number of trees.
    random_state : int, default=0
        Root seed; tree ``t`` uses ``SeedSequence([random_state, t])``.
    n_classes : int, optional
        Size of the label space. Defaults to ``max(y) + 1``; set it to keep
        classes absent from the training data in the output space.
    max_features : int, optional
        Candidate features per node; ``ceil(sqrt(d))`` when unset.

    Attributes
    ----------
    trees_ : list of DecisionTree
    n_classes_ : int
    n_features_in_ : int
    """

    def __init__(self, n_estimators=10, random_state=0, n_classes=None, max_features=None):
        self.n_estimators = n_estimators
        self.random_state = random_state
        self.n_classes = n_classes
        self.max_features = max_features

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64).ravel()
        if X.shape[0] == 0 or len(y) != X.shape[0]:
            raise ValueError("training data must be non-empty and aligned with labels")
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if y.min() < 0:
            raise ValueError("labels must be non-negative class indices")
        n_classes = int(self.n_classes) if self.n_classes is not None else int(y.max()) + 1
        if y.max() >= n_classes:
            raise ValueError(f"label {y.max()} outside 0..{n_classes - 1}")
        n = X.shape[0]
        trees = []
        for t in range(self.n_estimators):
            rng = tree_rng(self.random_state, t)
            boot = rng.integers(0, n, size=n)
            trees.append(build_tree(X[boot], y[boot], n_classes, rng, self.max_features))
        self.trees_ = trees
        self.n_classes_ = n_classes
        self.classes_ = np.arange(n_classes)
        self.n_features_in_ = X.shape[1]
        return self

    def _check_X(self, X) -> np.ndarray:
        check_is_fitted(self, "trees_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1) if X.size else X.reshape(0, self.n_features_in_)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got shape {X.shape}")
        return X

    def votes(self, X) -> np.ndarray:
        """(n_samples, n_classes) count of trees voting for each class."""
        X = self._check_X(X)
        out = np.zeros((X.shape[0], self.n_classes_), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees_:
            np.add.at(out, (rows, tree.predict(X)), 1)
        return out

    def predict(self, X) -> np.ndarray:
        # argmax returns the first maximum: ties go to the smallest class index
        return np.argmax(self.votes(X), axis=1)

    def to_dict(self) -> dict:
        check_is_fitted(self, "trees_")
        return {
            "version": FORMAT_VERSION,
            "n_estimators": int(self.n_estimators),
            "random_state": int(self.random_state),
            "n_classes": int(self.n_classes_),
            "n_features": int(self.n_features_in_),
            "trees": [t.to_dict() for t in self.trees_],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RandomForest":
        if obj.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported forest format version {obj.get('version')!r}")
        model = cls(n_estimators=obj["n_estimators"], random_state=obj["random_state"], n_classes=obj["n_classes"])
        model.trees_ = [DecisionTree.from_dict(t, obj["n_classes"]) for t in obj["trees"]]
        if len(model.trees_) != model.n_estimators:
            raise ValueError("tree count does not match n_estimators")
        model.n_classes_ = int(obj["n_classes"])
        model.classes_ = np.arange(model.n_classes_)
        model.n_features_in_ = int(obj["n_features"])
        return model


def train_forest(X, y, n_estimators: int = 10, seed: int = 0, n_classes: int | None = None) -> RandomForest:
    return RandomForest(n_estimators=n_estimators, random_state=seed, n_classes=n_classes).fit(X, y)


def predict(model: RandomForest, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict expects a single feature vector")
    return int(model.predict(x.reshape(1, -1))[0])


def predict_batch(model: RandomForest, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size == 0:
        return np.zeros(0, dtype=np.int64)
    return model.predict(xs)
