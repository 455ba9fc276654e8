"""From-scratch binary classifiers: CART trees, random forest, AdaBoost,
gradient-boosted trees, and a linear SVM.

All training is bit-deterministic given (data, params, seed): candidate
split thresholds are midpoints of consecutive distinct sorted feature
values, impurity ties break toward the lower feature index and then the
lower threshold, leaf votes tie toward class 0, and every stochastic step
(bootstrap resampling, per-node feature subsets, SGD ordering) draws from
a generator derived with the documented child-seed rule, so the thread
count never changes a result.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyDataset,
    LabelArityError,
    SingleClassInput,
    TooFewSamples,
)
from .sampling import derive_seed, make_rng, stratified_kfold_indices


def binary_f1(pred: np.ndarray, true: np.ndarray) -> float:
    """F1 for {0,1} labels; 0 when the denominator vanishes."""
    pred = np.asarray(pred)
    true = np.asarray(true)
    tp = int(np.sum((pred == 1) & (true == 1)))
    fp = int(np.sum((pred == 1) & (true == 0)))
    fn = int(np.sum((pred == 0) & (true == 1)))
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom > 0 else 0.0


@dataclass(frozen=True)
class TreeParams:
    """Growth limits for one CART tree.

    mtry = None means "use every feature" for a standalone tree; the
    forest trainer substitutes floor(sqrt(n_feat)) instead.
    """

    max_depth: int | None = None
    min_samples_split: int = 2
    mtry: int | None = None

    def __post_init__(self):
        if self.min_samples_split < 2:
            raise ValueError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError(f"mtry must be >= 1, got {self.mtry}")


def _validate_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise EmptyDataset("no training samples")
    if y.shape != (X.shape[0],):
        raise DimensionMismatch(f"y shape {y.shape} does not match X {X.shape}")
    if not np.all(np.isin(y, (0, 1))):
        raise LabelArityError("labels must be binary {0, 1}")
    return X, y.astype(int)


def _gini(n0: np.ndarray, n1: np.ndarray) -> np.ndarray:
    n = n0 + n1
    p0 = n0 / n
    p1 = n1 / n
    return 1.0 - p0 * p0 - p1 * p1


def _best_gini_split(
    X: np.ndarray, y: np.ndarray, idx: np.ndarray, feats: np.ndarray
) -> tuple[float, int, float] | None:
    """Best (gain, feature, threshold) over midpoint candidates, or None.

    Ties break toward the lower feature index (feats must be ascending)
    and then the lower threshold.
    """
    n_node = idx.size
    y_node = y[idx]
    n1_tot = int(y_node.sum())
    n0_tot = n_node - n1_tot
    parent = float(_gini(np.array(n0_tot, float), np.array(n1_tot, float)))
    best: tuple[float, int, float] | None = None
    for f in feats:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        sy = y_node[order]
        boundaries = np.flatnonzero(sv[:-1] < sv[1:])
        if boundaries.size == 0:
            continue
        cum1 = np.cumsum(sy)
        n_left = (boundaries + 1).astype(float)
        n1_left = cum1[boundaries].astype(float)
        n0_left = n_left - n1_left
        n_right = n_node - n_left
        n1_right = n1_tot - n1_left
        n0_right = n0_tot - n0_left
        child = (n_left * _gini(n0_left, n1_left) + n_right * _gini(n0_right, n1_right)) / n_node
        gains = parent - child
        local = int(np.argmax(gains))  # first max -> lowest threshold
        gain = float(gains[local])
        if best is None or gain > best[0]:
            pos = boundaries[local]
            thr = 0.5 * (sv[pos] + sv[pos + 1])
            best = (gain, int(f), float(thr))
    if best is None or best[0] <= 0.0:
        return None
    return best


@dataclass(frozen=True)
class DecisionTree:
    """Flat-array CART tree. feature[i] == -1 marks a leaf; n0/n1 are the
    training class counts at each node."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n0: np.ndarray
    n1: np.ndarray
    n_feat: int
    raw_importance: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _check_dim(X, self.n_feat)
        cur = np.zeros(X.shape[0], dtype=int)
        while True:
            leaf = self.feature[cur] < 0
            if leaf.all():
                break
            f = np.where(leaf, 0, self.feature[cur])
            go_left = X[np.arange(X.shape[0]), f] <= self.threshold[cur]
            nxt = np.where(go_left, self.left[cur], self.right[cur])
            cur = np.where(leaf, cur, nxt)
        return (self.n1[cur] > self.n0[cur]).astype(int)

    @property
    def n_nodes(self) -> int:
        return self.feature.size


class _TreeAccum:
    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.n0: list[int] = []
        self.n1: list[int] = []

    def add(self, n0: int, n1: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.n0.append(n0)
        self.n1.append(n1)
        return len(self.feature) - 1


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    params: TreeParams,
    rng: np.random.Generator,
) -> DecisionTree:
    n_feat = X.shape[1]
    mtry = params.mtry if params.mtry is not None else n_feat
    if not 1 <= mtry <= n_feat:
        raise ValueError(f"mtry must be in [1, {n_feat}], got {mtry}")
    acc = _TreeAccum()
    importance = np.zeros(n_feat)
    n_root = idx.size

    def build(node_idx: np.ndarray, depth: int) -> int:
        yn = y[node_idx]
        n1 = int(yn.sum())
        n0 = node_idx.size - n1
        node = acc.add(n0, n1)
        if (
            n0 == 0
            or n1 == 0
            or node_idx.size < params.min_samples_split
            or (params.max_depth is not None and depth >= params.max_depth)
        ):
            return node
        feats = np.sort(rng.choice(n_feat, size=mtry, replace=False))
        best = _best_gini_split(X, y, node_idx, feats)
        if best is None:
            return node
        gain, f, thr = best
        importance[f] += (node_idx.size / n_root) * gain
        go_left = X[node_idx, f] <= thr
        acc.feature[node] = f
        acc.threshold[node] = thr
        acc.left[node] = build(node_idx[go_left], depth + 1)
        acc.right[node] = build(node_idx[~go_left], depth + 1)
        return node

    build(idx, 0)
    return DecisionTree(
        feature=np.array(acc.feature, dtype=int),
        threshold=np.array(acc.threshold, dtype=float),
        left=np.array(acc.left, dtype=int),
        right=np.array(acc.right, dtype=int),
        n0=np.array(acc.n0, dtype=int),
        n1=np.array(acc.n1, dtype=int),
        n_feat=n_feat,
        raw_importance=importance,
    )


def train_tree(X, y, params: TreeParams | None = None, seed: int = 0) -> DecisionTree:
    """Grow one CART tree with Gini impurity (see module docstring for
    the determinism conventions)."""
    X, y = _validate_xy(X, y)
    params = params or TreeParams()
    rng = make_rng(seed)
    return _grow_tree(X, y, np.arange(X.shape[0]), params, rng)


@dataclass(frozen=True)
class TrainedForest:
    """Bootstrap ensemble of CART trees with impurity importances."""

    trees: tuple[DecisionTree, ...]
    params: TreeParams
    n_trees: int
    seed: int
    importances: np.ndarray
    importance_degenerate: bool
    n_feat: int

    def scores(self, X: np.ndarray) -> np.ndarray:
        """Fraction of trees voting class 1, per sample."""
        X = _check_dim(X, self.n_feat)
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += tree.predict(X)
        return votes / self.n_trees

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.scores(X) > 0.5).astype(int)  # vote tie -> class 0


def train_forest(
    X,
    y,
    n_trees: int = 100,
    params: TreeParams | None = None,
    seed: int = 42,
    bootstrap: bool = True,
    threads: int = 1,
) -> TrainedForest:
    """Train a random forest.

    Each tree gets child seed derive_seed(seed, tree_index), draws its
    size-N bootstrap resample (when enabled) and its per-node feature
    subsets from that generator. Defaults follow the forest configuration
    used throughout: 100 trees, seed 42, mtry = floor(sqrt(n_feat)).
    """
    X, y = _validate_xy(X, y)
    if n_trees < 1:
        raise ValueError(f"n_trees must be >= 1, got {n_trees}")
    n_feat = X.shape[1]
    if params is None:
        params = TreeParams()
    if params.mtry is None:
        params = TreeParams(
            max_depth=params.max_depth,
            min_samples_split=params.min_samples_split,
            mtry=max(1, int(np.sqrt(n_feat))),
        )

    trees: list[DecisionTree | None] = [None] * n_trees

    def build_one(t: int) -> None:
        rng = make_rng(derive_seed(seed, t))
        if bootstrap:
            idx = rng.integers(0, X.shape[0], size=X.shape[0])
        else:
            idx = np.arange(X.shape[0])
        trees[t] = _grow_tree(X, y, idx, params, rng)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(build_one, range(n_trees)))
    else:
        for t in range(n_trees):
            build_one(t)

    raw = np.sum([t.raw_importance for t in trees], axis=0)
    total = raw.sum()
    if total > 0:
        importances = raw / total
        degenerate = False
    else:
        importances = np.full(n_feat, 1.0 / n_feat)
        degenerate = True
    return TrainedForest(
        trees=tuple(trees),
        params=params,
        n_trees=n_trees,
        seed=seed,
        importances=importances,
        importance_degenerate=degenerate,
        n_feat=n_feat,
    )


def feature_importance(forest: TrainedForest) -> np.ndarray:
    """Normalized mean decrease in Gini impurity (uniform when no split
    anywhere reduced impurity; see TrainedForest.importance_degenerate)."""
    return forest.importances


# --- boosting --------------------------------------------------------------


@dataclass(frozen=True)
class Stump:
    """Depth-1 weak learner over one midpoint threshold; labels are +-1."""

    feature: int
    threshold: float
    left_label: int
    right_label: int

    def predict_pm(self, X: np.ndarray) -> np.ndarray:
        return np.where(X[:, self.feature] <= self.threshold, self.left_label, self.right_label)


@dataclass(frozen=True)
class RegressionTree:
    """Flat-array regression tree; value[i] is the leaf response."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_feat: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        cur = np.zeros(X.shape[0], dtype=int)
        while True:
            leaf = self.feature[cur] < 0
            if leaf.all():
                break
            f = np.where(leaf, 0, self.feature[cur])
            go_left = X[np.arange(X.shape[0]), f] <= self.threshold[cur]
            nxt = np.where(go_left, self.left[cur], self.right[cur])
            cur = np.where(leaf, cur, nxt)
        return self.value[cur]


@dataclass(frozen=True)
class BoostModel:
    """Additive ensemble: AdaBoost stump stages or GBDT tree stages."""

    kind: str  # "adaboost" | "gbdt"
    stages: tuple = ()
    f0: float = 0.0
    lr: float = 0.1
    n_feat: int = 0

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = _check_dim(X, self.n_feat)
        if self.kind == "adaboost":
            out = np.zeros(X.shape[0])
            for stump, alpha in self.stages:
                out += alpha * stump.predict_pm(X)
            return out
        out = np.full(X.shape[0], self.f0)
        for tree in self.stages:
            out += self.lr * tree.predict(X)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.scores(X) > 0).astype(int)


def _best_weighted_stump(X: np.ndarray, y_pm: np.ndarray, w: np.ndarray) -> tuple[Stump, float]:
    """Minimum weighted-error stump; ties break by lower feature index,
    lower threshold, then left-label +1 before -1."""
    n = X.shape[0]
    best_err = np.inf
    best: Stump | None = None
    w_pos_total = float(np.sum(w[y_pm == 1]))
    w_total = float(np.sum(w))
    for f in range(X.shape[1]):
        v = X[:, f]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        sy = y_pm[order]
        sw = w[order]
        boundaries = np.flatnonzero(sv[:-1] < sv[1:])
        if boundaries.size == 0:
            continue
        cum_pos = np.cumsum(np.where(sy == 1, sw, 0.0))
        cum_neg = np.cumsum(np.where(sy == -1, sw, 0.0))
        # left predicts +1: wrong on left negatives and right positives
        err_lp = cum_neg[boundaries] + (w_pos_total - cum_pos[boundaries])
        err_ln = w_total - err_lp
        errs = np.column_stack([err_lp, err_ln])  # threshold-major, +1 first
        flat = int(np.argmin(errs))
        err = float(errs.ravel()[flat])
        if err < best_err:
            pos = boundaries[flat // 2]
            thr = 0.5 * (sv[pos] + sv[pos + 1])
            if flat % 2 == 0:
                best = Stump(feature=f, threshold=thr, left_label=1, right_label=-1)
            else:
                best = Stump(feature=f, threshold=thr, left_label=-1, right_label=1)
            best_err = err
    if best is None:
        # every feature constant: degenerate stump predicting majority
        maj = 1 if w_pos_total * 2 > w_total else -1
        best = Stump(feature=0, threshold=np.inf, left_label=maj, right_label=maj)
        best_err = min(w_pos_total, w_total - w_pos_total)
    return best, best_err


def train_adaboost(X, y, n_rounds: int = 50, seed: int = 0) -> BoostModel:
    """Discrete AdaBoost on depth-1 stumps.

    Stage weight is 0.5*ln((1-err)/err) with err clamped to
    [1e-10, 1-1e-10]; sample weights renormalize every round; boosting
    stops early once err >= 0.5 or err <= 1e-10. The procedure draws no
    random numbers; `seed` is accepted for interface uniformity.
    """
    del seed
    X, y = _validate_xy(X, y)
    _require_both_classes(y)
    y_pm = 2 * y - 1
    w = np.full(X.shape[0], 1.0 / X.shape[0])
    stages = []
    for _ in range(n_rounds):
        stump, err = _best_weighted_stump(X, y_pm, w)
        err_c = min(max(err, 1e-10), 1.0 - 1e-10)
        alpha = 0.5 * np.log((1.0 - err_c) / err_c)
        stages.append((stump, float(alpha)))
        if err >= 0.5 or err <= 1e-10:
            break
        h = stump.predict_pm(X)
        w = w * np.exp(-alpha * y_pm * h)
        w = w / w.sum()
    return BoostModel(kind="adaboost", stages=tuple(stages), n_feat=X.shape[1])


def _stable_sigmoid(u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def _best_mse_split(
    X: np.ndarray, r: np.ndarray, idx: np.ndarray
) -> tuple[float, int, float] | None:
    """Best variance-reduction split on residuals, same tie rules as Gini."""
    n_node = idx.size
    rn = r[idx]
    tot = float(rn.sum())
    base = tot * tot / n_node
    best: tuple[float, int, float] | None = None
    for f in range(X.shape[1]):
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        sr = rn[order]
        boundaries = np.flatnonzero(sv[:-1] < sv[1:])
        if boundaries.size == 0:
            continue
        cum = np.cumsum(sr)
        n_left = (boundaries + 1).astype(float)
        sum_left = cum[boundaries]
        sum_right = tot - sum_left
        gains = sum_left**2 / n_left + sum_right**2 / (n_node - n_left) - base
        local = int(np.argmax(gains))
        gain = float(gains[local])
        if best is None or gain > best[0]:
            pos = boundaries[local]
            best = (gain, f, float(0.5 * (sv[pos] + sv[pos + 1])))
    if best is None or best[0] <= 0.0:
        return None
    return best


def _grow_reg_tree(
    X: np.ndarray, r: np.ndarray, hess: np.ndarray, max_depth: int
) -> RegressionTree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def leaf_value(node_idx: np.ndarray) -> float:
        return float(r[node_idx].sum() / max(hess[node_idx].sum(), 1e-12))

    def build(node_idx: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(leaf_value(node_idx))
        if depth >= max_depth or node_idx.size < 2:
            return node
        best = _best_mse_split(X, r, node_idx)
        if best is None:
            return node
        _, f, thr = best
        go_left = X[node_idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = build(node_idx[go_left], depth + 1)
        right[node] = build(node_idx[~go_left], depth + 1)
        return node

    build(np.arange(X.shape[0]), 0)
    return RegressionTree(
        feature=np.array(feature, dtype=int),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=int),
        right=np.array(right, dtype=int),
        value=np.array(value, dtype=float),
        n_feat=X.shape[1],
    )


def train_gbdt(
    X, y, n_rounds: int = 100, lr: float = 0.1, max_depth: int = 3, seed: int = 0
) -> BoostModel:
    """Gradient boosting with logistic loss.

    Regression trees fit the negative gradient (y - p); each leaf takes
    one Newton step sum(r)/sum(p(1-p)); the additive score starts at the
    base-rate log-odds and grows with shrinkage `lr`. Deterministic;
    `seed` is accepted for interface uniformity.
    """
    del seed
    X, y = _validate_xy(X, y)
    _require_both_classes(y)
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    base = float(np.mean(y))
    f0 = float(np.log(base / (1.0 - base)))
    F = np.full(X.shape[0], f0)
    stages = []
    for _ in range(n_rounds):
        p = _stable_sigmoid(F)
        r = y - p
        tree = _grow_reg_tree(X, r, p * (1.0 - p), max_depth)
        stages.append(tree)
        F = F + lr * tree.predict(X)
    return BoostModel(kind="gbdt", stages=tuple(stages), f0=f0, lr=lr, n_feat=X.shape[1])


# --- linear SVM ------------------------------------------------------------


@dataclass(frozen=True)
class LinearSvmModel:
    w: np.ndarray
    b: float
    lambda_: float

    @property
    def n_feat(self) -> int:
        return self.w.size

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = _check_dim(X, self.n_feat)
        return X @ self.w + self.b

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.scores(X) > 0).astype(int)


def svm_objective(w: np.ndarray, b: float, X: np.ndarray, y_pm: np.ndarray, lambda_: float) -> float:
    """Primal objective: lambda/2 ||w||^2 + mean hinge loss."""
    margins = y_pm * (X @ w + b)
    return float(0.5 * lambda_ * np.dot(w, w) + np.mean(np.maximum(0.0, 1.0 - margins)))


def train_linear_svm(
    X, y, lambda_: float = 1e-3, epochs: int = 100, seed: int = 0
) -> LinearSvmModel:
    """Primal hinge-loss minimization by seeded stochastic subgradient
    descent with step 1/(lambda*t), projection onto the 1/sqrt(lambda)
    ball, and averaging of the iterates."""
    X, y = _validate_xy(X, y)
    _require_both_classes(y)
    if lambda_ <= 0:
        raise ValueError(f"lambda must be > 0, got {lambda_}")
    y_pm = (2 * y - 1).astype(float)
    rng = make_rng(seed)
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    w_sum = np.zeros(d)
    b_sum = 0.0
    radius = 1.0 / np.sqrt(lambda_)
    t = 1
    for _ in range(epochs):
        for i in rng.permutation(n):
            eta = 1.0 / (lambda_ * t)
            margin = y_pm[i] * (X[i] @ w + b)
            w = (1.0 - eta * lambda_) * w
            if margin < 1.0:
                w = w + eta * y_pm[i] * X[i]
                b = b + eta * y_pm[i]
            norm = np.sqrt(np.dot(w, w))
            if norm > radius:
                w = w * (radius / norm)
            w_sum += w
            b_sum += b
            t += 1
    total = t - 1
    return LinearSvmModel(w=w_sum / total, b=b_sum / total, lambda_=lambda_)


# --- unified prediction ----------------------------------------------------


def _check_dim(X, n_feat: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != n_feat:
        raise DimensionMismatch(f"model expects {n_feat} features, got {X.shape[1]}")
    return X


def predict(model, x) -> tuple[int, float]:
    """(label, score) for one sample: forests score by positive-vote
    fraction (ties to class 0), boosters and the SVM by their additive
    or margin score thresholded at 0."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    labels, scores = predict_batch(model, x)
    return int(labels[0]), float(scores[0])


def predict_batch(model, X) -> tuple[np.ndarray, np.ndarray]:
    scores = model.scores(np.asarray(X, dtype=float))
    labels = model.predict(np.asarray(X, dtype=float))
    return labels, scores


def _require_both_classes(y: np.ndarray) -> None:
    if np.all(y == y[0]):
        raise SingleClassInput("training labels contain a single class")


# --- cross-validation --------------------------------------------------------

TRAINERS = {
    "tree": lambda X, y, params, seed: train_tree(
        X, y, TreeParams(**params.get("tree_params", {})), seed
    ),
    "rf": lambda X, y, params, seed: train_forest(
        X,
        y,
        n_trees=params.get("n_trees", 100),
        params=TreeParams(**params.get("tree_params", {})),
        seed=seed,
    ),
    "adaboost": lambda X, y, params, seed: train_adaboost(
        X, y, n_rounds=params.get("n_rounds", 50), seed=seed
    ),
    "gbdt": lambda X, y, params, seed: train_gbdt(
        X,
        y,
        n_rounds=params.get("n_rounds", 100),
        lr=params.get("lr", 0.1),
        max_depth=params.get("max_depth", 3),
        seed=seed,
    ),
    "svm": lambda X, y, params, seed: train_linear_svm(
        X,
        y,
        lambda_=params.get("lambda_", 1e-3),
        epochs=params.get("epochs", 100),
        seed=seed,
    ),
}


@dataclass(frozen=True)
class CrossValResult:
    best_params: dict
    best_index: int
    mean_scores: tuple[float, ...]
    fold_scores: tuple[tuple[float, ...], ...]


def cross_validate(
    X, y, model_kind: str, param_grid: list[dict], k_folds: int = 5, seed: int = 0
) -> CrossValResult:
    """Stratified k-fold mean F1 per grid point; the best point is the
    argmax, ties resolved toward the earliest grid entry. Fold membership
    and per-fold training seeds derive from `seed`."""
    X, y = _validate_xy(X, y)
    if model_kind not in TRAINERS:
        raise ValueError(f"unknown model kind {model_kind!r}")
    if k_folds < 2:
        raise ValueError(f"k_folds must be >= 2, got {k_folds}")
    if X.shape[0] < k_folds:
        raise TooFewSamples(f"{X.shape[0]} samples cannot fill {k_folds} folds")
    if not param_grid:
        raise ValueError("param_grid must list at least one configuration")

    folds = stratified_kfold_indices(y, k_folds, make_rng(derive_seed(seed, 0)))
    trainer = TRAINERS[model_kind]
    all_idx = np.arange(X.shape[0])
    mean_scores = []
    fold_scores = []
    for g, params in enumerate(param_grid):
        scores = []
        for f, test_idx in enumerate(folds):
            if test_idx.size == 0:
                continue
            train_idx = np.setdiff1d(all_idx, test_idx)
            model = trainer(
                X[train_idx], y[train_idx], params, derive_seed(seed, 1 + g * k_folds + f)
            )
            scores.append(binary_f1(model.predict(X[test_idx]), y[test_idx]))
        fold_scores.append(tuple(scores))
        mean_scores.append(float(np.mean(scores)))
    best_index = int(np.argmax(mean_scores))  # first max wins ties
    return CrossValResult(
        best_params=param_grid[best_index],
        best_index=best_index,
        mean_scores=tuple(mean_scores),
        fold_scores=tuple(fold_scores),
    )


# --- serialization -----------------------------------------------------------
#
# Versioned flat text. Classification tree nodes are records of
# "feature threshold left right n0 n1"; regression tree nodes swap the
# class counts for the leaf value. Floats use shortest round-trip text.

_MAGIC = "gravzone-model v1"


def _fmt_tree(tree: DecisionTree) -> list[str]:
    lines = [f"tree nodes={tree.n_nodes}"]
    for i in range(tree.n_nodes):
        lines.append(
            f"{tree.feature[i]} {tree.threshold[i]!r} {tree.left[i]} "
            f"{tree.right[i]} {tree.n0[i]} {tree.n1[i]}"
        )
    return lines


def _fmt_reg_tree(tree: RegressionTree) -> list[str]:
    lines = [f"regtree nodes={tree.feature.size}"]
    for i in range(tree.feature.size):
        lines.append(
            f"{tree.feature[i]} {tree.threshold[i]!r} {tree.left[i]} "
            f"{tree.right[i]} {tree.value[i]!r}"
        )
    return lines


def save_model(model, path: str) -> None:
    """Write a trained model (forest, booster, or SVM) as flat text."""
    lines = [_MAGIC]
    if isinstance(model, TrainedForest):
        p = model.params
        lines.append("kind=rf")
        lines.append(f"n_feat={model.n_feat}")
        lines.append(f"seed={model.seed}")
        lines.append(f"n_trees={model.n_trees}")
        lines.append(
            f"params={p.max_depth if p.max_depth is not None else 'none'} "
            f"{p.min_samples_split} {p.mtry}"
        )
        lines.append("importances=" + " ".join(repr(x) for x in model.importances))
        lines.append(f"importance_degenerate={int(model.importance_degenerate)}")
        for tree in model.trees:
            lines.extend(_fmt_tree(tree))
    elif isinstance(model, BoostModel) and model.kind == "adaboost":
        lines.append("kind=adaboost")
        lines.append(f"n_feat={model.n_feat}")
        lines.append(f"n_stages={len(model.stages)}")
        for stump, alpha in model.stages:
            lines.append(
                f"{stump.feature} {stump.threshold!r} {stump.left_label} "
                f"{stump.right_label} {alpha!r}"
            )
    elif isinstance(model, BoostModel) and model.kind == "gbdt":
        lines.append("kind=gbdt")
        lines.append(f"n_feat={model.n_feat}")
        lines.append(f"f0={model.f0!r}")
        lines.append(f"lr={model.lr!r}")
        lines.append(f"n_stages={len(model.stages)}")
        for tree in model.stages:
            lines.extend(_fmt_reg_tree(tree))
    elif isinstance(model, LinearSvmModel):
        lines.append("kind=svm")
        lines.append(f"n_feat={model.n_feat}")
        lines.append(f"lambda={model.lambda_!r}")
        lines.append("w=" + " ".join(repr(x) for x in model.w))
        lines.append(f"b={model.b!r}")
    else:
        raise TypeError(f"cannot serialize {type(model)!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_tree(lines: list[str], start: int, n_feat: int) -> tuple[DecisionTree, int]:
    header = lines[start]
    n_nodes = int(header.split("=", 1)[1])
    feat, thr, left, right, n0, n1 = [], [], [], [], [], []
    for i in range(start + 1, start + 1 + n_nodes):
        a, b, c, d, e, f = lines[i].split()
        feat.append(int(a))
        thr.append(float(b))
        left.append(int(c))
        right.append(int(d))
        n0.append(int(e))
        n1.append(int(f))
    tree = DecisionTree(
        feature=np.array(feat, dtype=int),
        threshold=np.array(thr, dtype=float),
        left=np.array(left, dtype=int),
        right=np.array(right, dtype=int),
        n0=np.array(n0, dtype=int),
        n1=np.array(n1, dtype=int),
        n_feat=n_feat,
        raw_importance=np.zeros(n_feat),
    )
    return tree, start + 1 + n_nodes


def _parse_reg_tree(lines: list[str], start: int, n_feat: int) -> tuple[RegressionTree, int]:
    n_nodes = int(lines[start].split("=", 1)[1])
    feat, thr, left, right, val = [], [], [], [], []
    for i in range(start + 1, start + 1 + n_nodes):
        a, b, c, d, e = lines[i].split()
        feat.append(int(a))
        thr.append(float(b))
        left.append(int(c))
        right.append(int(d))
        val.append(float(e))
    tree = RegressionTree(
        feature=np.array(feat, dtype=int),
        threshold=np.array(thr, dtype=float),
        left=np.array(left, dtype=int),
        right=np.array(right, dtype=int),
        value=np.array(val, dtype=float),
        n_feat=n_feat,
    )
    return tree, start + 1 + n_nodes


def load_model(path: str):
    """Read back a model written by save_model.

    Reloaded forests keep structure and predictions but not the raw
    importance accumulators (importances are persisted implicitly by the
    caller's report, not the model file).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"{path}: not a {_MAGIC} file")
    fields = {}
    pos = 1
    while pos < len(lines) and "=" in lines[pos] and not lines[pos].startswith(("tree", "regtree")):
        key, val = lines[pos].split("=", 1)
        fields[key] = val
        pos += 1
    kind = fields["kind"]
    n_feat = int(fields["n_feat"])
    if kind == "rf":
        max_depth_s, min_split_s, mtry_s = fields["params"].split()
        params = TreeParams(
            max_depth=None if max_depth_s == "none" else int(max_depth_s),
            min_samples_split=int(min_split_s),
            mtry=int(mtry_s),
        )
        trees = []
        for _ in range(int(fields["n_trees"])):
            tree, pos = _parse_tree(lines, pos, n_feat)
            trees.append(tree)
        return TrainedForest(
            trees=tuple(trees),
            params=params,
            n_trees=len(trees),
            seed=int(fields["seed"]),
            importances=np.array([float(x) for x in fields["importances"].split()]),
            importance_degenerate=bool(int(fields["importance_degenerate"])),
            n_feat=n_feat,
        )
    if kind == "adaboost":
        stages = []
        for i in range(int(fields["n_stages"])):
            a, b, c, d, e = lines[pos + i].split()
            stages.append(
                (Stump(feature=int(a), threshold=float(b), left_label=int(c), right_label=int(d)), float(e))
            )
        return BoostModel(kind="adaboost", stages=tuple(stages), n_feat=n_feat)
    if kind == "gbdt":
        stages = []
        for _ in range(int(fields["n_stages"])):
            tree, pos = _parse_reg_tree(lines, pos, n_feat)
            stages.append(tree)
        return BoostModel(
            kind="gbdt",
            stages=tuple(stages),
            f0=float(fields["f0"]),
            lr=float(fields["lr"]),
            n_feat=n_feat,
        )
    if kind == "svm":
        w = np.array([float(x) for x in fields["w"].split()])
        return LinearSvmModel(w=w, b=float(fields["b"]), lambda_=float(fields["lambda"]))
    raise ValueError(f"{path}: unknown model kind {kind!r}")
