"""Metrics and explanations: top-k concept accuracy, binary label metrics,
explanation rendering/match rate, and generated-report concept overlap.

Images whose ground-truth concept set is empty carry no signal for
concept-level metrics; they are skipped and reported as a separate count.
Ranking ties always break toward the lower lexicon index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .concept_model import ConceptScores, TargetSpace, target_names_for
from .data import Label
from .errors import DimensionMismatch, EmptyTruth, OutOfRange
from .lexicon import ConceptLexicon
from .reports import RadiologyReport, report_to_vector


@dataclass(frozen=True)
class Explanation:
    image_id: str
    label: Label
    confidence: float
    ranking: tuple[tuple[str, float], ...]  # (target name, score), best first
    ranking_indices: tuple[int, ...]
    lexicon_hash: str
    target_space: TargetSpace


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    topk: dict[int, float] = field(default_factory=dict)
    n_empty_truth: int = 0


def ranked_indices(scores: ConceptScores) -> tuple[int, ...]:
    """Target indices sorted by descending score, ties by ascending index."""
    return tuple(sorted(range(len(scores.scores)), key=lambda i: (-scores.scores[i], i)))


# -- concept metrics ------------------------------------------------------------


def _check_aligned(preds, truths):
    if len(preds) != len(truths):
        raise DimensionMismatch(f"{len(preds)} predictions vs {len(truths)} truth vectors")


def empty_truth_count(truths) -> int:
    return sum(1 for t in truths if not any(t.bits))


def topk_concept_accuracy(preds: list[ConceptScores], truths, k: int) -> float:
    """Mean over images (with non-empty truth) of the fraction of ground-truth
    targets captured by the k highest-scoring predictions."""
    _check_aligned(preds, truths)
    fractions = []
    for scores, truth in zip(preds, truths):
        if len(scores.scores) != len(truth.bits):
            raise DimensionMismatch("prediction and truth vector lengths differ")
        if not 1 <= k <= len(scores.scores):
            raise OutOfRange(f"k={k} outside [1, {len(scores.scores)}]")
        truth_ids = set(truth.positive_ids())
        if not truth_ids:
            continue
        top = set(ranked_indices(scores)[:k])
        fractions.append(len(truth_ids & top) / len(truth_ids))
    if not fractions:
        raise EmptyTruth("no image has a non-empty ground-truth target set")
    return sum(fractions) / len(fractions)


def topk_accuracy_table(preds, truths, ks) -> dict[int, float]:
    return {k: topk_concept_accuracy(preds, truths, k) for k in ks}


# -- label metrics -----------------------------------------------------------------


def label_metrics(
    pred_labels: list[Label],
    true_labels: list[Label],
    positive: Label = Label.CANCER,
    topk: dict[int, float] | None = None,
    n_empty_truth: int = 0,
) -> MetricsReport:
    _check_aligned(pred_labels, true_labels)
    if not pred_labels:
        raise DimensionMismatch("cannot compute metrics on empty label lists")
    tp = fp = tn = fn = 0
    for pred, true in zip(pred_labels, true_labels):
        if pred is positive:
            if true is positive:
                tp += 1
            else:
                fp += 1
        else:
            if true is positive:
                fn += 1
            else:
                tn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    # same quantity as 2PR/(P+R) for P+R>0, computed exactly from counts
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
    return MetricsReport(precision, recall, f1, tp, fp, tn, fn, dict(topk or {}), n_empty_truth)


# -- explanations ----------------------------------------------------------------------


def render_explanation(
    image_id: str,
    scores: ConceptScores,
    label: Label,
    confidence: float,
    lexicon: ConceptLexicon,
) -> Explanation:
    names = target_names_for(lexicon, scores.target_space)
    if len(names) != len(scores.scores):
        raise DimensionMismatch("scores do not match the lexicon target space")
    order = ranked_indices(scores)
    ranking = tuple((names[i], float(scores.scores[i])) for i in order)
    return Explanation(
        image_id=image_id,
        label=label,
        confidence=confidence,
        ranking=ranking,
        ranking_indices=order,
        lexicon_hash=scores.lexicon_hash,
        target_space=scores.target_space,
    )


def explanation_text(explanation: Explanation, top_n: int = 3) -> str:
    top_n = max(1, min(top_n, len(explanation.ranking)))
    width = max(len(name) for name, _ in explanation.ranking[:top_n])
    lines = [
        f"image: {explanation.image_id}",
        f"prediction: {explanation.label.value} ({explanation.confidence * 100:.1f}% confidence)",
        f"top {top_n} targets:",
    ]
    for rank, (name, score) in enumerate(explanation.ranking[:top_n], start=1):
        lines.append(f"  {rank}. {name:<{width}}  {score * 100:.1f}%")
    return "\n".join(lines) + "\n"


def explanation_json(explanation: Explanation) -> str:
    return json.dumps(
        {
            "id": explanation.image_id,
            "label": explanation.label.value,
            "confidence": explanation.confidence,
            "targets": [[name, score] for name, score in explanation.ranking],
            "lexicon_hash": explanation.lexicon_hash,
            "target_space": explanation.target_space.value,
        }
    )


def explanation_match_rate(explanations: list[Explanation], truths, top_n: int = 1) -> float:
    """Fraction of images (with non-empty truth) whose top-n ranked targets
    intersect the ground-truth target set."""
    _check_aligned(explanations, truths)
    hits = total = 0
    for explanation, truth in zip(explanations, truths):
        truth_ids = set(truth.positive_ids())
        if not truth_ids:
            continue
        total += 1
        if truth_ids & set(explanation.ranking_indices[:top_n]):
            hits += 1
    if total == 0:
        raise EmptyTruth("no image has a non-empty ground-truth target set")
    return hits / total


# -- generated-report overlap ---------------------------------------------------------------


def report_concept_overlap(
    generated: list[RadiologyReport], truth: list[RadiologyReport], lexicon: ConceptLexicon
) -> float:
    """Mean per-pair fraction of the truth report's concepts that the
    generated report also mentions (both extracted by the same rules)."""
    _check_aligned(generated, truth)
    fractions = []
    for gen_report, truth_report in zip(generated, truth):
        truth_ids = set(report_to_vector(truth_report, lexicon).positive_ids())
        if not truth_ids:
            continue
        gen_ids = set(report_to_vector(gen_report, lexicon).positive_ids())
        fractions.append(len(truth_ids & gen_ids) / len(truth_ids))
    if not fractions:
        raise EmptyTruth("no truth report yields a non-empty concept set")
    return sum(fractions) / len(fractions)


# -- report formatting -------------------------------------------------------------------------


def metrics_to_dict(report: MetricsReport) -> dict:
    return {
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "confusion": {"tp": report.tp, "fp": report.fp, "tn": report.tn, "fn": report.fn},
        "topk_accuracy": {str(k): v for k, v in sorted(report.topk.items())},
        "n_empty_truth": report.n_empty_truth,
    }


def metrics_text(report: MetricsReport) -> str:
    lines = [
        f"precision  {report.precision:.4f}",
        f"recall     {report.recall:.4f}",
        f"f1         {report.f1:.4f}",
        f"confusion  tp={report.tp} fp={report.fp} tn={report.tn} fn={report.fn}",
    ]
    for k, v in sorted(report.topk.items()):
        lines.append(f"top-{k:<3d}    {v:.4f}")
    if report.n_empty_truth:
        lines.append(f"empty-truth images skipped: {report.n_empty_truth}")
    return "\n".join(lines) + "\n"
