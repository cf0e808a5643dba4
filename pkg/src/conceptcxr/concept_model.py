"""Image -> concept score stage: the desk-scale trainable predictor and the
score exchange file through which any external backbone can feed the pipeline.

The built-in predictor is one independent logistic regression per target
(sigmoid output, cross-entropy loss, seeded mini-batch gradient descent) over
bilinearly downsampled, flattened pixels. Zero initialization makes the
untrained predictor score exactly 0.5 everywhere.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import cv2
import numpy as np

from .data import Example, ImageTensor
from .errors import (
    DimensionMismatch,
    EmptyClass,
    LexiconMismatch,
    MalformedRow,
    ParseFailure,
    ScoreOutOfRange,
)
from .lexicon import ConceptLexicon


class TargetSpace(Enum):
    CONCEPTS = "Concepts28"
    CLUSTERS = "Clusters6"


@dataclass(frozen=True)
class ConceptScores:
    lexicon_hash: str
    target_space: TargetSpace
    scores: tuple[float, ...]

    def __post_init__(self):
        for s in self.scores:
            if not np.isfinite(s) or not 0.0 <= s <= 1.0:
                raise ScoreOutOfRange(f"score {s!r} outside [0, 1]")


@dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 16
    learning_rate: float = 1e-4
    epochs: int = 2000
    seed: int = 0
    feature_side: int = 32


@dataclass
class ConceptPredictor:
    target_space: TargetSpace
    lexicon_hash: str
    target_names: tuple[str, ...]
    weights: np.ndarray  # (n_targets, n_features)
    bias: np.ndarray  # (n_targets,)
    config: TrainingConfig
    loss_history: tuple[float, ...] = field(default=())


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def image_features(image: ImageTensor, feature_side: int) -> np.ndarray:
    """Flattened bilinear downsample of the preprocessed image."""
    small = cv2.resize(image.pixels, (feature_side, feature_side), interpolation=cv2.INTER_LINEAR)
    return small.astype(np.float64).ravel()


def training_targets(
    examples: list[Example], target_space: TargetSpace, lexicon: ConceptLexicon
) -> np.ndarray:
    """Per-example binary target matrix: concept bits, or cluster bits via
    the lexicon's concept->cluster OR."""
    rows = []
    for ex in examples:
        if ex.concept_vector.lexicon_hash != lexicon.content_hash():
            raise LexiconMismatch(f"example {ex.id}: concept vector from a different lexicon")
        if target_space is TargetSpace.CONCEPTS:
            rows.append(ex.concept_vector.bits)
        else:
            rows.append(lexicon.to_clusters(ex.concept_vector).bits)
    return np.asarray(rows, dtype=np.float64)


def _mean_cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    eps = 1e-12
    p = np.clip(probs, eps, 1.0 - eps)
    return float(-(targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p)).mean())


def train_concept_predictor(
    train: list[Example],
    target_space: TargetSpace,
    lexicon: ConceptLexicon,
    config: TrainingConfig = TrainingConfig(),
) -> ConceptPredictor:
    if not train:
        raise EmptyClass("cannot train concept predictor on an empty set")
    X = np.stack([image_features(ex.image, config.feature_side) for ex in train])
    Y = training_targets(train, target_space, lexicon)

    n, n_features = X.shape
    n_targets = Y.shape[1]
    W = np.zeros((n_targets, n_features))
    b = np.zeros(n_targets)
    rng = random.Random(config.seed)

    def full_loss():
        return _mean_cross_entropy(_sigmoid(X @ W.T + b), Y)

    losses = [full_loss()]
    order = list(range(n))
    for _ in range(config.epochs):
        rng.shuffle(order)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = X[idx], Y[idx]
            err = _sigmoid(xb @ W.T + b) - yb  # (batch, targets)
            W -= config.learning_rate * (err.T @ xb) / len(idx)
            b -= config.learning_rate * err.mean(axis=0)
        losses.append(full_loss())

    names = lexicon.clusters if target_space is TargetSpace.CLUSTERS else lexicon.concept_names()
    return ConceptPredictor(
        target_space=target_space,
        lexicon_hash=lexicon.content_hash(),
        target_names=tuple(names),
        weights=W,
        bias=b,
        config=config,
        loss_history=tuple(losses),
    )


def predict_scores(predictor: ConceptPredictor, image: ImageTensor) -> ConceptScores:
    x = image_features(image, predictor.config.feature_side)
    if x.shape[0] != predictor.weights.shape[1]:
        raise DimensionMismatch(
            f"feature length {x.shape[0]} != predictor expectation {predictor.weights.shape[1]}"
        )
    probs = _sigmoid(predictor.weights @ x + predictor.bias)
    return ConceptScores(predictor.lexicon_hash, predictor.target_space, tuple(float(p) for p in probs))


# -- score exchange file --------------------------------------------------------
#
# Line 1: `# lexicon=<hash> space=<Concepts28|Clusters6>`
# Line 2: `id,<target names...>`
# Rows:   id plus one decimal score per target.

_HEADER_RE = re.compile(r"^#\s*lexicon=(\S+)\s+space=(\S+)\s*$")


def target_names_for(lexicon: ConceptLexicon, space: TargetSpace) -> tuple[str, ...]:
    return lexicon.clusters if space is TargetSpace.CLUSTERS else lexicon.concept_names()


def write_scores(path: str | Path, rows: list[tuple[str, ConceptScores]], lexicon: ConceptLexicon) -> None:
    if not rows:
        raise EmptyClass("refusing to write an empty score file")
    space = rows[0][1].target_space
    names = target_names_for(lexicon, space)
    lines = [f"# lexicon={lexicon.content_hash()} space={space.value}", "id," + ",".join(names)]
    for row_id, scores in rows:
        if scores.target_space is not space:
            raise DimensionMismatch(f"row {row_id}: mixed target spaces in one score file")
        if scores.lexicon_hash != lexicon.content_hash():
            raise LexiconMismatch(f"row {row_id}: scores from a different lexicon")
        if len(scores.scores) != len(names):
            raise DimensionMismatch(f"row {row_id}: expected {len(names)} scores, got {len(scores.scores)}")
        lines.append(row_id + "," + ",".join(f"{s:.17g}" for s in scores.scores))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_scores(path: str | Path, lexicon: ConceptLexicon | None = None) -> list[tuple[str, ConceptScores]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if len(lines) < 2:
        raise ParseFailure(f"score file {path}: missing header lines")
    m = _HEADER_RE.match(lines[0])
    if not m:
        raise ParseFailure(f"score file {path}: bad first line {lines[0]!r}")
    file_hash = m.group(1)
    try:
        space = TargetSpace(m.group(2))
    except ValueError:
        raise ParseFailure(f"score file {path}: unknown target space {m.group(2)!r}") from None
    columns = lines[1].split(",")
    if not columns or columns[0] != "id":
        raise ParseFailure(f"score file {path}: bad column header")
    names = tuple(columns[1:])
    if lexicon is not None:
        if file_hash != lexicon.content_hash():
            raise LexiconMismatch(
                f"score file lexicon hash {file_hash} != lexicon {lexicon.content_hash()}"
            )
        if names != target_names_for(lexicon, space):
            raise ParseFailure(f"score file {path}: column names do not match the lexicon")

    rows: list[tuple[str, ConceptScores]] = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(names) + 1:
            raise MalformedRow(f"score file line {lineno}: expected {len(names) + 1} fields")
        try:
            values = tuple(float(p) for p in parts[1:])
        except ValueError:
            raise MalformedRow(f"score file line {lineno}: non-numeric score") from None
        rows.append((parts[0], ConceptScores(file_hash, space, values)))
    return rows


# -- predictor persistence ----------------------------------------------------------


def write_predictor(path: str | Path, predictor: ConceptPredictor) -> None:
    doc = {
        "format": "conceptcxr-concept-predictor",
        "version": 1,
        "target_space": predictor.target_space.value,
        "lexicon_hash": predictor.lexicon_hash,
        "target_names": list(predictor.target_names),
        "config": {
            "batch_size": predictor.config.batch_size,
            "learning_rate": predictor.config.learning_rate,
            "epochs": predictor.config.epochs,
            "seed": predictor.config.seed,
            "feature_side": predictor.config.feature_side,
        },
        "weights": predictor.weights.tolist(),
        "bias": predictor.bias.tolist(),
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def read_predictor(path: str | Path) -> ConceptPredictor:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseFailure(f"predictor file {path}: {e}") from None
    if doc.get("format") != "conceptcxr-concept-predictor":
        raise ParseFailure(f"predictor file {path}: unrecognized format")
    config = TrainingConfig(**doc["config"])
    return ConceptPredictor(
        target_space=TargetSpace(doc["target_space"]),
        lexicon_hash=doc["lexicon_hash"],
        target_names=tuple(doc["target_names"]),
        weights=np.asarray(doc["weights"], dtype=np.float64),
        bias=np.asarray(doc["bias"], dtype=np.float64),
        config=config,
    )
