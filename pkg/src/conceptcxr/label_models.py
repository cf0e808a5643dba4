"""Concept scores -> diagnosis stage: three from-scratch label models with
varying interpretability (decision tree, small MLP, linear SVM).

All models are trained on binary report-derived vectors and applied to
continuous predicted scores at inference. Ties (decision value exactly at
the threshold) resolve to Cancer, the conservative clinical default.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Label
from .errors import DimensionMismatch, EmptyClass, ParseFailure

TIE_LABEL = Label.CANCER


def as_features(x) -> tuple[float, ...]:
    """Accept ConceptScores, ConceptVector, or any float sequence."""
    if hasattr(x, "scores"):
        return tuple(float(v) for v in x.scores)
    if hasattr(x, "bits"):
        return tuple(float(v) for v in x.bits)
    return tuple(float(v) for v in x)


def _training_matrix(data) -> tuple[np.ndarray, np.ndarray]:
    if not data:
        raise EmptyClass("cannot train a label model on an empty dataset")
    rows = [as_features(x) for x, _ in data]
    width = len(rows[0])
    for r in rows:
        if len(r) != width:
            raise DimensionMismatch(f"feature rows of mixed width: {len(r)} vs {width}")
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray([1 if label is Label.CANCER else 0 for _, label in data], dtype=np.int64)
    return X, y


def _canonical_order(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # sort rows lexicographically so training is invariant to input order
    keys = [y] + [X[:, j] for j in reversed(range(X.shape[1]))]
    order = np.lexsort(keys)
    return X[order], y[order]


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_width(n_features: int, features) -> np.ndarray:
    vec = np.asarray(as_features(features), dtype=np.float64)
    if vec.shape[0] != n_features:
        raise DimensionMismatch(f"model expects {n_features} features, got {vec.shape[0]}")
    return vec


# -- decision tree ----------------------------------------------------------------


@dataclass(frozen=True)
class DtConfig:
    max_depth: int = 6
    min_leaf: int = 2


@dataclass
class DtNode:
    feature: int = -1
    threshold: float = 0.0
    left: "DtNode | None" = None
    right: "DtNode | None" = None
    label: Label | None = None
    cancer_count: int = 0
    healthy_count: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class DecisionTree:
    root: DtNode
    n_features: int
    config: DtConfig
    lexicon_hash: str | None = None
    target_space: str | None = None


def _gini(n_cancer: int, n_healthy: int) -> float:
    n = n_cancer + n_healthy
    if n == 0:
        return 0.0
    p = n_cancer / n
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _leaf(y: np.ndarray) -> DtNode:
    cancer = int(y.sum())
    healthy = int(len(y) - cancer)
    if cancer > healthy:
        label = Label.CANCER
    elif healthy > cancer:
        label = Label.HEALTHY
    else:
        label = TIE_LABEL
    return DtNode(label=label, cancer_count=cancer, healthy_count=healthy)


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Lowest weighted child Gini over all (feature, midpoint threshold)
    candidates; ties resolve to the lowest feature index, then the lowest
    threshold."""
    n = len(y)
    best = None  # (score, feature, threshold)
    for f in range(X.shape[1]):
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        col_sorted = col[order]
        y_sorted = y[order]
        cancer_cum = np.cumsum(y_sorted)
        distinct = np.nonzero(col_sorted[:-1] < col_sorted[1:])[0]
        for i in distinct:
            n_left = int(i + 1)
            n_right = n - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            left_cancer = int(cancer_cum[i])
            right_cancer = int(cancer_cum[-1] - left_cancer)
            score = (
                n_left * _gini(left_cancer, n_left - left_cancer)
                + n_right * _gini(right_cancer, n_right - right_cancer)
            ) / n
            threshold = (float(col_sorted[i]) + float(col_sorted[i + 1])) / 2.0
            if best is None or score < best[0] - 1e-15:
                best = (score, f, threshold)
    return best


def _grow(X: np.ndarray, y: np.ndarray, depth: int, config: DtConfig) -> DtNode:
    cancer = int(y.sum())
    if cancer == 0 or cancer == len(y) or depth >= config.max_depth:
        return _leaf(y)
    found = _best_split(X, y, config.min_leaf)
    if found is None:
        return _leaf(y)
    _, f, t = found
    mask = X[:, f] <= t
    node = DtNode(feature=f, threshold=t)
    node.left = _grow(X[mask], y[mask], depth + 1, config)
    node.right = _grow(X[~mask], y[~mask], depth + 1, config)
    node.cancer_count = cancer
    node.healthy_count = len(y) - cancer
    return node


def train_dt(data, config: DtConfig = DtConfig()) -> DecisionTree:
    """CART with Gini impurity; thresholds are midpoints of sorted unique
    values. Splits with zero impurity gain are allowed while the node is
    impure, so e.g. XOR-structured data is still solvable at depth 2."""
    X, y = _training_matrix(data)
    X, y = _canonical_order(X, y)
    return DecisionTree(root=_grow(X, y, 0, config), n_features=X.shape[1], config=config)


def dump_tree(tree: DecisionTree, feature_names=None) -> str:
    def name(f):
        return feature_names[f] if feature_names else f"x[{f}]"

    lines: list[str] = []

    def walk(node: DtNode, indent: str):
        if node.is_leaf:
            lines.append(
                f"{indent}predict {node.label.value} "
                f"(cancer={node.cancer_count}, healthy={node.healthy_count})"
            )
            return
        lines.append(f"{indent}if {name(node.feature)} <= {node.threshold:g}:")
        walk(node.left, indent + "  ")
        lines.append(f"{indent}else:")
        walk(node.right, indent + "  ")

    walk(tree.root, "")
    return "\n".join(lines) + "\n"


# -- multilayer perceptron -------------------------------------------------------------


@dataclass(frozen=True)
class MlpConfig:
    hidden: int = 16
    lr: float = 0.01
    epochs: int = 200
    batch: int = 16
    seed: int = 0


@dataclass
class MlpModel:
    w1: np.ndarray  # (hidden, d)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float
    config: MlpConfig
    lexicon_hash: str | None = None
    target_space: str | None = None

    @property
    def n_features(self) -> int:
        return self.w1.shape[1]


def train_mlp(data, config: MlpConfig = MlpConfig()) -> MlpModel:
    """One ReLU hidden layer, sigmoid output, cross-entropy loss. Hidden
    weights are seeded random; the readout starts at zero, so an untrained
    model predicts exactly 0.5."""
    if config.hidden < 1:
        raise DimensionMismatch("hidden width must be >= 1")
    X, y = _training_matrix(data)
    X, y = _canonical_order(X, y)
    n, d = X.shape
    rng = np.random.default_rng(config.seed)
    scale = 1.0 / math.sqrt(d)
    w1 = rng.uniform(-scale, scale, size=(config.hidden, d))
    b1 = np.zeros(config.hidden)
    w2 = np.zeros(config.hidden)
    b2 = 0.0

    shuffler = random.Random(config.seed)
    order = list(range(n))
    yf = y.astype(np.float64)
    for _ in range(config.epochs):
        shuffler.shuffle(order)
        for start in range(0, n, config.batch):
            idx = order[start : start + config.batch]
            xb, yb = X[idx], yf[idx]
            z1 = xb @ w1.T + b1  # (m, hidden)
            h = np.maximum(z1, 0.0)
            p = _sigmoid(h @ w2 + b2)  # (m,)
            delta = (p - yb) / len(idx)  # dL/dz_out
            grad_w2 = delta @ h
            grad_b2 = float(delta.sum())
            back = np.outer(delta, w2) * (z1 > 0)  # (m, hidden)
            grad_w1 = back.T @ xb
            grad_b1 = back.sum(axis=0)
            w2 -= config.lr * grad_w2
            b2 -= config.lr * grad_b2
            w1 -= config.lr * grad_w1
            b1 -= config.lr * grad_b1
    return MlpModel(w1=w1, b1=b1, w2=w2, b2=b2, config=config)


def _mlp_prob(model: MlpModel, vec: np.ndarray) -> float:
    h = np.maximum(model.w1 @ vec + model.b1, 0.0)
    return float(_sigmoid(np.array([h @ model.w2 + model.b2]))[0])


# -- linear SVM -------------------------------------------------------------------------


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    lr: float = 0.01
    epochs: int = 200
    seed: int = 0


@dataclass
class SvmModel:
    w: np.ndarray
    b: float
    config: SvmConfig
    lexicon_hash: str | None = None
    target_space: str | None = None

    @property
    def n_features(self) -> int:
        return self.w.shape[0]


def train_svm(data, config: SvmConfig = SvmConfig()) -> SvmModel:
    """Linear SVM: hinge loss with L2 regularization (strength 1/(C*n),
    the stochastic-solver convention), seeded per-example subgradient
    descent. When the learned direction separates the classes, the bias is
    re-centered to the margin midpoint, as SMO-style solvers derive it; plain
    subgradient leaves the bias on a flat hinge plateau otherwise."""
    X, y01 = _training_matrix(data)
    X, y01 = _canonical_order(X, y01)
    n, d = X.shape
    y = np.where(y01 == 1, 1.0, -1.0)
    lam = 1.0 / (config.C * n)
    w = np.zeros(d)
    b = 0.0
    shuffler = random.Random(config.seed)
    order = list(range(n))
    for _ in range(config.epochs):
        shuffler.shuffle(order)
        for i in order:
            margin = y[i] * (w @ X[i] + b)
            if margin < 1.0:
                w -= config.lr * (lam * w - y[i] * X[i])
                b += config.lr * y[i]
            else:
                w -= config.lr * lam * w
    proj = X @ w
    cancer = proj[y > 0]
    healthy = proj[y < 0]
    if cancer.size and healthy.size and cancer.min() > healthy.max():
        b = -0.5 * (float(cancer.min()) + float(healthy.max()))
    return SvmModel(w=w, b=b, config=config)


# -- prediction ---------------------------------------------------------------------------


def predict_label(model, features) -> tuple[Label, float]:
    """Deterministic label plus a confidence in [0, 1] for the predicted
    label: leaf purity (DT), sigmoid output (MLP), logistic-squashed margin
    (SVM)."""
    if isinstance(model, DecisionTree):
        vec = _check_width(model.n_features, features)
        node = model.root
        while not node.is_leaf:
            node = node.left if vec[node.feature] <= node.threshold else node.right
        total = node.cancer_count + node.healthy_count
        majority = max(node.cancer_count, node.healthy_count)
        confidence = majority / total if total else 1.0
        return node.label, confidence
    if isinstance(model, MlpModel):
        vec = _check_width(model.n_features, features)
        p = _mlp_prob(model, vec)
        label = Label.CANCER if p >= 0.5 else Label.HEALTHY
        return label, p if label is Label.CANCER else 1.0 - p
    if isinstance(model, SvmModel):
        vec = _check_width(model.n_features, features)
        decision = float(model.w @ vec + model.b)
        label = Label.CANCER if decision >= 0.0 else Label.HEALTHY
        return label, float(_sigmoid(np.array([abs(decision)]))[0])
    raise DimensionMismatch(f"unknown label model type {type(model).__name__}")


# -- persistence ------------------------------------------------------------------------

_FORMAT = "conceptcxr-label-model"


def _node_to_doc(node: DtNode):
    if node.is_leaf:
        return {
            "label": node.label.value,
            "cancer": node.cancer_count,
            "healthy": node.healthy_count,
        }
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "cancer": node.cancer_count,
        "healthy": node.healthy_count,
        "left": _node_to_doc(node.left),
        "right": _node_to_doc(node.right),
    }


def _node_from_doc(doc) -> DtNode:
    if "feature" not in doc:
        return DtNode(
            label=Label(doc["label"]), cancer_count=doc["cancer"], healthy_count=doc["healthy"]
        )
    return DtNode(
        feature=doc["feature"],
        threshold=doc["threshold"],
        cancer_count=doc["cancer"],
        healthy_count=doc["healthy"],
        left=_node_from_doc(doc["left"]),
        right=_node_from_doc(doc["right"]),
    )


def write_label_model(path: str | Path, model) -> None:
    if isinstance(model, DecisionTree):
        kind = "decision_tree"
        config = {"max_depth": model.config.max_depth, "min_leaf": model.config.min_leaf}
        parameters = {"n_features": model.n_features, "root": _node_to_doc(model.root)}
    elif isinstance(model, MlpModel):
        kind = "mlp"
        c = model.config
        config = {"hidden": c.hidden, "lr": c.lr, "epochs": c.epochs, "batch": c.batch, "seed": c.seed}
        parameters = {
            "w1": model.w1.tolist(),
            "b1": model.b1.tolist(),
            "w2": model.w2.tolist(),
            "b2": model.b2,
        }
    elif isinstance(model, SvmModel):
        kind = "svm"
        c = model.config
        config = {"C": c.C, "lr": c.lr, "epochs": c.epochs, "seed": c.seed}
        parameters = {"w": model.w.tolist(), "b": model.b}
    else:
        raise DimensionMismatch(f"unknown label model type {type(model).__name__}")
    doc = {
        "format": _FORMAT,
        "version": 1,
        "kind": kind,
        "config": config,
        "parameters": parameters,
        "lexicon_hash": model.lexicon_hash,
        "target_space": model.target_space,
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def read_label_model(path: str | Path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseFailure(f"model file {path}: {e}") from None
    if doc.get("format") != _FORMAT:
        raise ParseFailure(f"model file {path}: unrecognized format")
    kind = doc["kind"]
    params = doc["parameters"]
    if kind == "decision_tree":
        model = DecisionTree(
            root=_node_from_doc(params["root"]),
            n_features=params["n_features"],
            config=DtConfig(**doc["config"]),
        )
    elif kind == "mlp":
        model = MlpModel(
            w1=np.asarray(params["w1"], dtype=np.float64),
            b1=np.asarray(params["b1"], dtype=np.float64),
            w2=np.asarray(params["w2"], dtype=np.float64),
            b2=float(params["b2"]),
            config=MlpConfig(**doc["config"]),
        )
    elif kind == "svm":
        model = SvmModel(
            w=np.asarray(params["w"], dtype=np.float64),
            b=float(params["b"]),
            config=SvmConfig(**doc["config"]),
        )
    else:
        raise ParseFailure(f"model file {path}: unknown kind {kind!r}")
    model.lexicon_hash = doc.get("lexicon_hash")
    model.target_space = doc.get("target_space")
    return model
