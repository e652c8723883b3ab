"""CART decision tree and random forest binary classifiers.

Training works on nonnegative sparse feature matrices (absent entries
compare as 0.0, which is what the presence encodings produce). Splits
maximize Gini impurity decrease over midpoint thresholds; importances are
mean decrease in impurity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import sparse

from .encoding import SparseVector

LOW = 0
HIGH = 1
LABEL_NAMES = ("low", "high")

_GAIN_EPS = 1e-12


class ModelError(Exception):
    pass


@dataclass(frozen=True)
class Hyperparams:
    max_depth: int = 25
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: float = 1.0
    n_estimators: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if not 0.0 < self.max_features <= 1.0:
            raise ValueError("max_features must be in (0, 1]")
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")


@dataclass
class SplitNode:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"
    n_samples: int
    impurity: float

    is_leaf = False


@dataclass
class LeafNode:
    label: int
    class_counts: tuple[int, int]
    n_samples: int
    impurity: float

    is_leaf = True


TreeNode = Union[SplitNode, LeafNode]


@dataclass
class DecisionTreeModel:
    root: TreeNode
    params: Hyperparams
    n_features: int
    importances: np.ndarray = field(repr=False)


@dataclass
class RandomForestModel:
    trees: list[DecisionTreeModel]
    params: Hyperparams
    importances: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SplitChoice:
    feature: int
    threshold: float
    gain: float


def gini(class_counts: Sequence[int]) -> float:
    """Gini impurity 1 - sum(p_c^2) of a two-class count pair."""
    c0, c1 = class_counts
    total = c0 + c1
    if total == 0:
        raise ModelError("gini of an empty node is undefined")
    p0 = c0 / total
    p1 = c1 / total
    return 1.0 - (p0 * p0 + p1 * p1)


def _as_csr(X) -> sparse.csr_matrix:
    if sparse.issparse(X):
        mat = X.tocsr()
    else:
        mat = sparse.csr_matrix(np.asarray(X, dtype=np.float64))
    if mat.nnz and mat.data.min() < 0.0:
        raise ModelError("feature values must be nonnegative "
                         "(absent sparse entries compare as 0.0)")
    mat.data = mat.data.astype(np.float64, copy=False)
    mat.eliminate_zeros()
    return mat


def _impurity_term(left_w, left1):
    """Sum of child sizes times child impurities, i.e. n_child * gini."""
    left0 = left_w - left1
    return left_w - (left0 * left0 + left1 * left1) / left_w


def _best_split_csc(csc: sparse.csc_matrix, y_loc: np.ndarray, w_loc: np.ndarray,
                    min_samples_leaf: int) -> Optional[tuple[int, float, float]]:
    """Best (column, threshold, gain) over a node's candidate-column matrix.

    Columns are the node's candidate features; rows are the node's samples
    with integer weights. Implicit zeros form the low block of every
    sorted column, which keeps the scan linear in stored entries.
    """
    n_eff = float(w_loc.sum())
    c1 = float((w_loc * y_loc).sum())
    c0 = n_eff - c1
    parent_impurity = 1.0 - (c0 * c0 + c1 * c1) / (n_eff * n_eff)
    if parent_impurity <= 0.0:
        return None

    data = csc.data
    if len(data) == 0:
        return None
    indptr = csc.indptr
    n_cols = csc.shape[1]
    counts = np.diff(indptr)
    cols = np.repeat(np.arange(n_cols), counts)
    order = np.lexsort((data, cols))
    svals = data[order]
    srows = csc.indices[order]
    wts = w_loc[srows].astype(np.float64)
    w1s = wts * y_loc[srows]
    cum_w = np.cumsum(wts)
    cum_1 = np.cumsum(w1s)

    starts = indptr[:-1]
    ends = indptr[1:]
    before_w = np.where(starts > 0, cum_w[starts - 1], 0.0)
    before_1 = np.where(starts > 0, cum_1[starts - 1], 0.0)
    after_w = np.where(ends > 0, cum_w[ends - 1], 0.0)
    after_1 = np.where(ends > 0, cum_1[ends - 1], 0.0)
    zero_w = n_eff - (after_w - before_w)
    zero_1 = c1 - (after_1 - before_1)

    msl = float(min_samples_leaf)

    def gains_for(left_w, left_1):
        right_w = n_eff - left_w
        right_1 = c1 - left_1
        with np.errstate(divide="ignore", invalid="ignore"):
            children = _impurity_term(left_w, left_1) + _impurity_term(right_w, right_1)
        g = parent_impurity - children / n_eff
        bad = (left_w < msl) | (right_w < msl)
        return np.where(bad, -np.inf, g)

    # Candidates between consecutive distinct explicit values of a column.
    nnz = len(svals)
    has_next = np.zeros(nnz, dtype=bool)
    if nnz > 1:
        has_next[:-1] = (cols[1:] == cols[:-1]) & (svals[1:] > svals[:-1])
    entry_gain = np.full(nnz, -np.inf)
    if has_next.any():
        left_w = zero_w[cols] + (cum_w - before_w[cols])
        left_1 = zero_1[cols] + (cum_1 - before_1[cols])
        g = gains_for(left_w, left_1)
        entry_gain = np.where(has_next, g, -np.inf)
    best_e = int(np.argmax(entry_gain)) if nnz else 0
    best_e_gain = entry_gain[best_e] if nnz else -np.inf

    # Candidates between the zero block and a column's smallest explicit value.
    col_nonempty = counts > 0
    zero_gain = np.full(n_cols, -np.inf)
    if col_nonempty.any():
        g = gains_for(zero_w, zero_1)
        zero_gain = np.where(col_nonempty & (zero_w > 0), g, -np.inf)
    best_z = int(np.argmax(zero_gain))
    best_z_gain = zero_gain[best_z]

    if max(best_e_gain, best_z_gain) <= _GAIN_EPS:
        return None

    if best_z_gain >= best_e_gain:
        zcol = best_z
        if best_z_gain > best_e_gain or zcol <= cols[best_e]:
            # Zero-block threshold in a column is below every midpoint there.
            return zcol, float(svals[starts[zcol]] / 2.0), float(best_z_gain)
    col = int(cols[best_e])
    v_lo = float(svals[best_e])
    v_hi = float(svals[best_e + 1])
    thr = (v_lo + v_hi) / 2.0
    if thr >= v_hi:
        thr = v_lo
    return col, thr, float(best_e_gain)


def find_best_split(X, y, candidate_features=None, min_samples_leaf: int = 1,
                    sample_weight=None) -> Optional[SplitChoice]:
    """Exhaustive best Gini split over the candidate features.

    Ties break toward the lowest feature index, then the lowest
    threshold; returns None when no split achieves positive gain.
    """
    mat = _as_csr(X)
    y = np.asarray(y, dtype=np.float64)
    if mat.shape[0] < 2:
        raise ModelError("need at least two samples to split")
    w = (np.ones(mat.shape[0]) if sample_weight is None
         else np.asarray(sample_weight, dtype=np.float64))
    if candidate_features is None:
        cand = np.arange(mat.shape[1])
        csc = mat.tocsc()
    else:
        cand = np.sort(np.asarray(candidate_features, dtype=np.intp))
        if len(cand) == 0:
            raise ModelError("need at least one candidate feature")
        csc = mat.tocsc()[:, cand]
    found = _best_split_csc(csc, y, w, min_samples_leaf)
    if found is None:
        return None
    col, thr, gain = found
    return SplitChoice(feature=int(cand[col]), threshold=thr, gain=gain)


def _column_values(csc: sparse.csc_matrix, col: int, n_rows: int) -> np.ndarray:
    out = np.zeros(n_rows)
    lo, hi = csc.indptr[col], csc.indptr[col + 1]
    out[csc.indices[lo:hi]] = csc.data[lo:hi]
    return out


def _fit_tree_on(mat: sparse.csr_matrix, y: np.ndarray, params: Hyperparams,
                 rng: np.random.Generator, rows: np.ndarray,
                 weights: np.ndarray) -> TreeNode:
    n_features = mat.shape[1]
    k = min(n_features, max(1, math.ceil(params.max_features * n_features)))

    def make_leaf(y_loc, w_loc):
        c1 = int((w_loc * y_loc).sum())
        c0 = int(w_loc.sum()) - c1
        label = HIGH if c1 > c0 else LOW
        return LeafNode(label=label, class_counts=(c0, c1),
                        n_samples=c0 + c1, impurity=gini((c0, c1)))

    root_holder: list = [None]
    # Stack entries: (rows, weights, depth, parent node or holder, side).
    stack = [(rows, weights, 0, root_holder, 0)]
    while stack:
        node_rows, node_w, depth, parent, side = stack.pop()
        y_loc = y[node_rows]
        w_loc = node_w.astype(np.float64)
        n_eff = int(w_loc.sum())
        c1 = int((w_loc * y_loc).sum())
        c0 = n_eff - c1

        split = None
        if (depth < params.max_depth and n_eff >= params.min_samples_split
                and 0 < c1 < n_eff):
            if k == n_features:
                cand = np.arange(n_features)
            else:
                cand = np.sort(rng.choice(n_features, size=k, replace=False))
            node_csc = mat[node_rows].tocsc()
            if k != n_features:
                node_csc = node_csc[:, cand]
            found = _best_split_csc(node_csc, y_loc.astype(np.float64), w_loc,
                                    params.min_samples_leaf)
            if found is not None:
                col, thr, gain = found
                split = (int(cand[col]), col, thr)

        if split is None:
            node = make_leaf(y_loc, w_loc)
        else:
            feature, local_col, thr = split
            vals = _column_values(node_csc, local_col, len(node_rows))
            go_left = vals <= thr
            node = SplitNode(feature=feature, threshold=thr, left=None,
                             right=None, n_samples=n_eff,
                             impurity=gini((c0, c1)))
            stack.append((node_rows[~go_left], node_w[~go_left], depth + 1,
                          node, 2))
            stack.append((node_rows[go_left], node_w[go_left], depth + 1,
                          node, 1))

        if side == 0:
            parent[0] = node
        elif side == 1:
            parent.left = node
        else:
            parent.right = node
    return root_holder[0]


def _prepare_training(X, y):
    mat = _as_csr(X)
    y = np.asarray(y)
    if mat.shape[0] == 0:
        raise ModelError("cannot fit on an empty training set")
    if mat.shape[0] != len(y):
        raise ModelError("feature matrix and labels disagree on sample count")
    if not np.isin(y, (LOW, HIGH)).all():
        raise ModelError("labels must be binary (0=low, 1=high)")
    return mat, y.astype(np.float64)


def fit_tree(X, y, params: Hyperparams,
             rng: Optional[np.random.Generator] = None) -> DecisionTreeModel:
    """Fit a single CART tree; `rng` drives per-node feature subsampling
    when max_features < 1 (defaults to a stream seeded from params.seed)."""
    mat, y = _prepare_training(X, y)
    if rng is None:
        rng = np.random.default_rng([params.seed])
    rows = np.arange(mat.shape[0])
    weights = np.ones(mat.shape[0], dtype=np.int64)
    root = _fit_tree_on(mat, y, params, rng, rows, weights)
    model = DecisionTreeModel(root=root, params=params,
                              n_features=mat.shape[1],
                              importances=np.zeros(mat.shape[1]))
    model.importances = compute_importances(model)
    return model


def fit_forest(X, y, params: Hyperparams,
               bootstrap: bool = True) -> RandomForestModel:
    """Fit n_estimators trees, each on its own bootstrap resample.

    Tree i draws every random decision from a stream seeded by
    (params.seed, i), so results do not depend on fitting order. The
    bootstrap flag exists for tests that need forest == single tree.
    """
    mat, y = _prepare_training(X, y)
    n = mat.shape[0]
    trees = []
    for i in range(params.n_estimators):
        rng = np.random.default_rng([params.seed, i])
        if bootstrap:
            picks = rng.integers(0, n, size=n)
            rows, counts = np.unique(picks, return_counts=True)
            weights = counts.astype(np.int64)
        else:
            rows = np.arange(n)
            weights = np.ones(n, dtype=np.int64)
        root = _fit_tree_on(mat, y, params, rng, rows, weights)
        tree = DecisionTreeModel(root=root, params=params,
                                 n_features=mat.shape[1],
                                 importances=np.zeros(mat.shape[1]))
        tree.importances = compute_importances(tree)
        trees.append(tree)
    model = RandomForestModel(trees=trees, params=params,
                              importances=np.zeros(mat.shape[1]))
    model.importances = compute_importances(model)
    return model


def _route(root: TreeNode, get_value) -> int:
    node = root
    while not node.is_leaf:
        node = node.left if get_value(node.feature) <= node.threshold else node.right
    return node.label


def predict_tree(model: DecisionTreeModel, vector: SparseVector) -> int:
    if vector.dim != model.n_features:
        raise ModelError(f"vector dim {vector.dim} != model features "
                         f"{model.n_features}")
    return _route(model.root, lambda f: vector.entries.get(f, 0.0))


def predict_forest(model: RandomForestModel, vector: SparseVector) -> int:
    """Majority vote over the trees; an exact tie predicts low."""
    if vector.dim != model.trees[0].n_features:
        raise ModelError(f"vector dim {vector.dim} != model features "
                         f"{model.trees[0].n_features}")
    votes = sum(_route(t.root, lambda f: vector.entries.get(f, 0.0))
                for t in model.trees)
    return HIGH if 2 * votes > len(model.trees) else LOW


def _matrix_rows(X):
    mat = _as_csr(X)
    for i in range(mat.shape[0]):
        lo, hi = mat.indptr[i], mat.indptr[i + 1]
        yield dict(zip(mat.indices[lo:hi].tolist(), mat.data[lo:hi].tolist()))


def predict_matrix(model, X) -> np.ndarray:
    """Batch prediction for either model kind over a matrix of rows."""
    if isinstance(model, RandomForestModel):
        roots = [t.root for t in model.trees]
        out = np.empty(X.shape[0], dtype=np.int64)
        for i, entries in enumerate(_matrix_rows(X)):
            votes = sum(_route(r, lambda f: entries.get(f, 0.0)) for r in roots)
            out[i] = HIGH if 2 * votes > len(roots) else LOW
        return out
    out = np.empty(X.shape[0], dtype=np.int64)
    for i, entries in enumerate(_matrix_rows(X)):
        out[i] = _route(model.root, lambda f: entries.get(f, 0.0))
    return out


def _tree_raw_importances(tree: DecisionTreeModel) -> np.ndarray:
    raw = np.zeros(tree.n_features)
    root_n = tree.root.n_samples
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            continue
        child_term = (node.left.n_samples * node.left.impurity
                      + node.right.n_samples * node.right.impurity)
        gain = node.impurity - child_term / node.n_samples
        raw[node.feature] += (node.n_samples / root_n) * gain
        stack.append(node.left)
        stack.append(node.right)
    return raw


def compute_importances(model) -> np.ndarray:
    """Mean-decrease-impurity importances, normalized to sum to one
    (all-zero when the model never splits)."""
    if isinstance(model, RandomForestModel):
        raw = np.mean([_tree_raw_importances(t) for t in model.trees], axis=0)
    else:
        raw = _tree_raw_importances(model)
    total = raw.sum()
    return raw / total if total > 0 else raw


def top_k_features(importances: np.ndarray, vocab, k: int):
    """Top-k (term, weight) pairs by importance plus the nonzero count.

    Descending by weight; exact ties order lexicographically by term.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pairs = [(term, float(importances[i])) for term, i in vocab.index.items()
             if importances[i] > 0.0]
    pairs.sort(key=lambda tw: (-tw[1], tw[0]))
    return pairs[:k], len(pairs)


def _node_to_obj(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"leaf": True, "label": node.label,
                "class_counts": list(node.class_counts),
                "n_samples": node.n_samples, "impurity": node.impurity}
    return {"leaf": False, "feature": node.feature, "threshold": node.threshold,
            "n_samples": node.n_samples, "impurity": node.impurity,
            "left": _node_to_obj(node.left), "right": _node_to_obj(node.right)}


def _node_from_obj(obj: dict) -> TreeNode:
    if obj["leaf"]:
        return LeafNode(label=obj["label"],
                        class_counts=tuple(obj["class_counts"]),
                        n_samples=obj["n_samples"], impurity=obj["impurity"])
    return SplitNode(feature=obj["feature"], threshold=obj["threshold"],
                     left=_node_from_obj(obj["left"]),
                     right=_node_from_obj(obj["right"]),
                     n_samples=obj["n_samples"], impurity=obj["impurity"])


def save_model(model, path, vocab_hash: Optional[str] = None) -> None:
    """Persist a model as self-describing JSON; loading reproduces
    predictions exactly."""
    if isinstance(model, RandomForestModel):
        obj = {"kind": "random_forest",
               "params": model.params.__dict__,
               "n_features": model.trees[0].n_features,
               "vocab_hash": vocab_hash,
               "trees": [_node_to_obj(t.root) for t in model.trees]}
    else:
        obj = {"kind": "decision_tree",
               "params": model.params.__dict__,
               "n_features": model.n_features,
               "vocab_hash": vocab_hash,
               "trees": [_node_to_obj(model.root)]}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    params = Hyperparams(**obj["params"])
    n_features = obj["n_features"]
    roots = [_node_from_obj(t) for t in obj["trees"]]
    trees = []
    for root in roots:
        tree = DecisionTreeModel(root=root, params=params,
                                 n_features=n_features,
                                 importances=np.zeros(n_features))
        tree.importances = compute_importances(tree)
        trees.append(tree)
    if obj["kind"] == "decision_tree":
        return trees[0], obj.get("vocab_hash")
    model = RandomForestModel(trees=trees, params=params,
                              importances=np.zeros(n_features))
    model.importances = compute_importances(model)
    return model, obj.get("vocab_hash")
