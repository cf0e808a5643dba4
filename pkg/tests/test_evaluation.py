import pytest
from hypothesis import given, strategies as st

from conceptcxr.concept_model import ConceptScores, TargetSpace
from conceptcxr.data import Label
from conceptcxr.errors import DimensionMismatch, EmptyTruth, OutOfRange
from conceptcxr.evaluation import (
    empty_truth_count,
    explanation_json,
    explanation_match_rate,
    explanation_text,
    label_metrics,
    metrics_text,
    metrics_to_dict,
    ranked_indices,
    render_explanation,
    report_concept_overlap,
    topk_accuracy_table,
    topk_concept_accuracy,
)
from conceptcxr.lexicon import default_lexicon
from conceptcxr.reports import RadiologyReport

LEX = default_lexicon()
HASH = LEX.content_hash()
C, H = Label.CANCER, Label.HEALTHY


def cluster_scores(values):
    return ConceptScores(HASH, TargetSpace.CLUSTERS, tuple(values))


def cluster_truth(bits):
    return LEX.cluster_vector(bits)


# Hand-computed five-image fixture over the six clusters
# (Mass, Nodule, Irr. Hilum, Irr. Lung Parenchyma, Irr. Mediastinum, Unremarkable)
FIXTURE_PREDS = [
    cluster_scores([0.9, 0.8, 0.1, 0.0, 0.0, 0.0]),
    cluster_scores([0.9, 0.0, 0.8, 0.1, 0.0, 0.0]),
    cluster_scores([0.6, 0.5, 0.4, 0.3, 0.2, 0.1]),
    cluster_scores([0.0, 0.0, 0.0, 0.0, 0.1, 0.9]),
    cluster_scores([0.5, 0.5, 0.5, 0.5, 0.5, 0.5]),
]
FIXTURE_TRUTHS = [
    cluster_truth([1, 0, 0, 0, 0, 0]),
    cluster_truth([1, 1, 0, 0, 0, 0]),
    cluster_truth([0, 0, 1, 0, 0, 0]),
    cluster_truth([0, 0, 0, 0, 0, 1]),
    cluster_truth([0, 0, 0, 0, 0, 0]),  # empty truth: skipped
]

# per-image fractions over the four non-empty-truth images:
# k=1: 1.0, 0.5, 0.0, 1.0 -> 0.625
# k=2: 1.0, 0.5, 0.0, 1.0 -> 0.625
# k=3: 1.0, 0.5, 1.0, 1.0 -> 0.875
# k=6: all captured        -> 1.0
FIXTURE_EXPECTED = {1: 0.625, 2: 0.625, 3: 0.875, 6: 1.0}


def test_topk_fixture_exact():
    for k, expected in FIXTURE_EXPECTED.items():
        assert topk_concept_accuracy(FIXTURE_PREDS, FIXTURE_TRUTHS, k) == expected
    assert empty_truth_count(FIXTURE_TRUTHS) == 1


def test_topk_monotone_on_fixture():
    values = [topk_concept_accuracy(FIXTURE_PREDS, FIXTURE_TRUTHS, k) for k in range(1, 7)]
    assert values == sorted(values)
    assert values[-1] == 1.0


def test_topk_single_image_half():
    preds = [cluster_scores([0.9, 0.1, 0.8, 0.0, 0.0, 0.0])]  # top-2 = {Mass, Irr. Hilum}
    truths = [cluster_truth([1, 1, 0, 0, 0, 0])]  # truth = {Mass, Nodule}
    assert topk_concept_accuracy(preds, truths, 2) == 0.5


def test_topk_errors():
    with pytest.raises(DimensionMismatch):
        topk_concept_accuracy(FIXTURE_PREDS, FIXTURE_TRUTHS[:3], 1)
    with pytest.raises(OutOfRange):
        topk_concept_accuracy(FIXTURE_PREDS, FIXTURE_TRUTHS, 0)
    with pytest.raises(OutOfRange):
        topk_concept_accuracy(FIXTURE_PREDS, FIXTURE_TRUTHS, 7)
    with pytest.raises(EmptyTruth):
        topk_concept_accuracy([FIXTURE_PREDS[4]], [FIXTURE_TRUTHS[4]], 1)


@given(
    st.lists(
        st.tuples(
            st.lists(st.floats(min_value=0, max_value=1, allow_nan=False), min_size=6, max_size=6),
            st.lists(st.integers(min_value=0, max_value=1), min_size=6, max_size=6),
        ),
        min_size=1,
        max_size=8,
    )
)
def test_topk_non_decreasing_in_k(pairs):
    preds = [cluster_scores(p) for p, _ in pairs]
    truths = [cluster_truth(t) for _, t in pairs]
    if empty_truth_count(truths) == len(truths):
        return
    values = [topk_concept_accuracy(preds, truths, k) for k in range(1, 7)]
    assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] == 1.0


# -- label metrics -------------------------------------------------------------


def test_label_metrics_hand_fixture():
    true = [C, C, C, H]
    pred = [C, C, H, C]
    m = label_metrics(pred, true)
    assert (m.tp, m.fp, m.tn, m.fn) == (2, 1, 0, 1)
    assert m.precision == 2 / 3
    assert m.recall == 2 / 3
    assert m.f1 == 2 / 3
    assert m.tp + m.fp + m.tn + m.fn == 4


def test_label_metrics_perfect():
    labels = [C, H, C, H, H]
    m = label_metrics(labels, labels)
    assert m.precision == m.recall == m.f1 == 1.0


def test_label_metrics_zero_denominators():
    m = label_metrics([H, H], [H, H])
    assert m.precision == 0.0 and m.recall == 0.0 and m.f1 == 0.0


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=30))
def test_label_metrics_positive_class_swap(pairs):
    pred = [C if a else H for a, _ in pairs]
    true = [C if b else H for _, b in pairs]
    m_cancer = label_metrics(pred, true, positive=C)
    m_healthy = label_metrics(pred, true, positive=H)
    assert (m_cancer.tp, m_cancer.fp, m_cancer.tn, m_cancer.fn) == (
        m_healthy.tn,
        m_healthy.fn,
        m_healthy.tp,
        m_healthy.fp,
    )


def test_label_metrics_misaligned():
    with pytest.raises(DimensionMismatch):
        label_metrics([C], [C, H])


# -- explanations ----------------------------------------------------------------


def test_render_explanation_orders_by_score():
    scores = cluster_scores([0.995, 0.1, 0.2, 0.0, 0.0, 0.05])
    expl = render_explanation("img9", scores, C, 0.997, LEX)
    assert expl.ranking[0] == ("Mass", 0.995)
    assert [n for n, _ in expl.ranking[:3]] == ["Mass", "Irregular Hilum", "Nodule"]
    text = explanation_text(expl, top_n=3)
    assert "Cancer" in text and "99.7%" in text
    assert text.index("Mass") < text.index("Irregular Hilum")
    assert "99.5%" in text


def test_explanation_tie_breaks_by_lexicon_order():
    scores = cluster_scores([0.5] * 6)
    expl = render_explanation("img", scores, H, 0.5, LEX)
    assert [n for n, _ in expl.ranking] == list(LEX.clusters)
    assert expl.ranking_indices == (0, 1, 2, 3, 4, 5)


def test_explanation_top_n_clamped():
    scores = cluster_scores([0.5] * 6)
    expl = render_explanation("img", scores, H, 0.5, LEX)
    text = explanation_text(expl, top_n=99)
    assert text.count("\n  ") == 0 or len([l for l in text.splitlines() if l.startswith("  ")]) == 6


def test_explanation_ranking_is_permutation():
    scores = cluster_scores([0.3, 0.9, 0.3, 0.1, 0.9, 0.0])
    expl = render_explanation("img", scores, C, 0.6, LEX)
    assert sorted(expl.ranking_indices) == list(range(6))
    assert {n for n, _ in expl.ranking} == set(LEX.clusters)


def test_explanation_stable_under_reserialization():
    values = (0.3333333333333333, 1 / 3, 0.12345678901234567, 0.9, 0.0, 1.0)
    scores = cluster_scores(values)
    reserialized = cluster_scores(tuple(float(f"{v:.17g}") for v in values))
    a = render_explanation("img", scores, C, 0.9, LEX)
    b = render_explanation("img", reserialized, C, 0.9, LEX)
    assert a.ranking == b.ranking


def test_explanation_json_round_trip():
    import json

    scores = cluster_scores([0.9, 0.1, 0.0, 0.0, 0.0, 0.0])
    expl = render_explanation("img1", scores, C, 0.8, LEX)
    doc = json.loads(explanation_json(expl))
    assert doc["id"] == "img1"
    assert doc["label"] == "Cancer"
    assert doc["targets"][0] == ["Mass", 0.9]


def test_match_rate_counts_hits():
    preds = FIXTURE_PREDS[:4]
    truths = FIXTURE_TRUTHS[:4]
    expls = [render_explanation(f"i{k}", s, C, 0.5, LEX) for k, s in enumerate(preds)]
    # top-1 hits: img1 yes, img2 yes (Mass in truth), img3 no, img4 yes
    assert explanation_match_rate(expls, truths, top_n=1) == 0.75
    assert explanation_match_rate(expls, truths, top_n=6) == 1.0


def test_match_rate_empty_truth_error():
    scores = cluster_scores([0.5] * 6)
    expl = render_explanation("img", scores, H, 0.5, LEX)
    with pytest.raises(EmptyTruth):
        explanation_match_rate([expl], [cluster_truth([0] * 6)], top_n=1)


def test_match_rate_equals_top1_accuracy_for_singleton_truths():
    preds = [FIXTURE_PREDS[0], FIXTURE_PREDS[2], FIXTURE_PREDS[3]]
    truths = [FIXTURE_TRUTHS[0], FIXTURE_TRUTHS[2], FIXTURE_TRUTHS[3]]
    expls = [render_explanation(f"i{k}", s, C, 0.5, LEX) for k, s in enumerate(preds)]
    assert explanation_match_rate(expls, truths, 1) == topk_concept_accuracy(preds, truths, 1)


# -- generated-report overlap ----------------------------------------------------------


def test_overlap_verbatim_is_one():
    truth = [RadiologyReport("a", "FINDINGS: There is a mass. IMPRESSION: Mass.")]
    assert report_concept_overlap(truth, truth, LEX) == 1.0


def test_overlap_partial():
    truth = [RadiologyReport("a", "FINDINGS: There is a hilar mass.")]  # {Hilar mass, Mass}
    generated = [RadiologyReport("a", "FINDINGS: There is a mass.")]  # {Mass}
    assert report_concept_overlap(generated, truth, LEX) == 0.5


def test_overlap_errors():
    r = RadiologyReport("a", "FINDINGS: mass.")
    with pytest.raises(DimensionMismatch):
        report_concept_overlap([r], [r, r], LEX)
    empty = RadiologyReport("b", "FINDINGS: stable silhouette.")
    with pytest.raises(EmptyTruth):
        report_concept_overlap([r], [empty], LEX)


# -- formatting ------------------------------------------------------------------------


def test_metrics_formatting():
    m = label_metrics([C, H], [C, H], topk={1: 0.5, 5: 1.0}, n_empty_truth=2)
    doc = metrics_to_dict(m)
    assert doc["confusion"] == {"tp": 1, "fp": 0, "tn": 1, "fn": 0}
    assert doc["topk_accuracy"] == {"1": 0.5, "5": 1.0}
    text = metrics_text(m)
    assert "top-1" in text and "top-5" in text and "skipped: 2" in text


def test_ranked_indices_tie_rule():
    scores = cluster_scores([0.2, 0.9, 0.2, 0.9, 0.0, 0.2])
    assert ranked_indices(scores) == (1, 3, 0, 2, 5, 4)


def test_topk_table():
    table = topk_accuracy_table(FIXTURE_PREDS, FIXTURE_TRUTHS, [1, 3, 6])
    assert table == {1: 0.625, 3: 0.875, 6: 1.0}
