import pytest
from hypothesis import given, strategies as st

from conceptcxr.errors import MalformedRow
from conceptcxr.lexicon import default_lexicon
from conceptcxr.reports import (
    CleanedReport,
    RadiologyReport,
    annotation_vector,
    clean,
    detect_concepts,
    display_sentence,
    extract_sections,
    load_annotations,
    merge_cleaned,
    oracle_corpus_dir,
    read_report,
    report_to_vector,
)

LEX = default_lexicon()


def names_of(vec):
    return {LEX.concepts[i].name for i in vec.positive_ids()}


# -- section extraction -------------------------------------------------------


def test_extract_both_sections():
    r = RadiologyReport("t", "FINDINGS: A. IMPRESSION: B.")
    assert extract_sections(r) == {"FINDINGS": "A.", "IMPRESSION": "B."}


def test_extract_empty_report():
    assert extract_sections(RadiologyReport("t", "")) == {}


def test_extract_single_section():
    r = RadiologyReport("t", "IMPRESSION: Lungs clear.")
    assert extract_sections(r) == {"IMPRESSION": "Lungs clear."}


def test_extract_case_insensitive_and_optional_colon():
    r = RadiologyReport("t", "Findings\nlungs clear.\nimpression: stable.")
    sections = extract_sections(r)
    assert sections["FINDINGS"] == "lungs clear."
    assert sections["IMPRESSION"] == "stable."


def test_extract_terminated_by_caps_header():
    r = RadiologyReport("t", "FINDINGS: A mass. DICTATED BY: someone. tumor here.")
    assert extract_sections(r) == {"FINDINGS": "A mass."}


def test_extract_ignores_other_sections():
    r = RadiologyReport("t", "HISTORY: lung cancer. TECHNIQUE: PA view. COMPARISON: none.")
    assert extract_sections(r) == {}


# -- cleaning -----------------------------------------------------------------


def test_clean_single_sentence():
    assert clean("There is a Mass.").sentences == ("there is a mass",)


def test_clean_empty():
    assert clean("").sentences == ()


def test_clean_splits_and_strips():
    got = clean("No pneumothorax; no effusion.\nStable.")
    assert got.sentences == ("no pneumothorax", "no effusion", "stable")


def test_clean_charset_invariant():
    got = clean("Wt. 70kg -- BP: 120/80, (stable)?!")
    for s in got.sentences:
        assert s
        assert set(s) <= set("abcdefghijklmnopqrstuvwxyz0123456789 ")


def test_display_sentence_strips_noise():
    assert display_sentence("there is a mass in the lung") == "mass in lung"


# -- concept detection ----------------------------------------------------------


def detect(sentences):
    return detect_concepts(CleanedReport(tuple(sentences), ()), LEX)


def test_detect_plain_mention():
    vec = detect(["there is a large mass in the right upper lobe"])
    assert names_of(vec) == {"Mass"}


def test_detect_healthy_concept_fires_despite_cue():
    vec = detect(["no evidence of malignancy"])
    assert names_of(vec) == {"No evidence"}


def test_detect_negated_mention_suppressed():
    vec = detect(["no nodule is seen"])
    assert names_of(vec) == set()


@pytest.mark.parametrize(
    "sentence",
    [
        "no mass is seen",
        "this does not represent a mass",
        "without evidence of a mass",
        "the lungs are free of mass",
        "chest is negative for mass",
        "atelectasis rather than mass",
        "there is resolved mass effect",
    ],
)
def test_detect_every_cue_suppresses(sentence):
    assert names_of(detect([sentence])) == set()


def test_detect_cue_beyond_window_does_not_suppress():
    # cue is 8 tokens before the phrase
    vec = detect(["no significant interval change in the previously described mass"])
    assert names_of(vec) == {"Mass"}


def test_detect_cue_in_other_sentence_does_not_suppress():
    vec = detect(["no pleural effusion", "a mass is present"])
    assert names_of(vec) == {"Mass"}


def test_detect_cue_after_phrase_does_not_suppress():
    vec = detect(["a nodule is seen that has not changed"])
    assert names_of(vec) == {"Nodule"}


def test_detect_word_boundaries():
    # 'mass' must not match inside 'massive'; 'hilar' alone is not a concept
    assert names_of(detect(["massive cardiomegaly with perihilar haze"])) == set()


def test_detect_overlapping_phrases():
    assert names_of(detect(["right hilar mass is present"])) == {"Hilar mass", "Mass"}
    assert names_of(detect(["bulky hilar lymphadenopathy"])) == {
        "Hilar lymphadenopathy",
        "Lymphadenopathy",
    }


def test_detect_one_unnegated_occurrence_wins():
    vec = detect(["no nodule on frontal view", "lateral view shows a nodule"])
    assert names_of(vec) == {"Nodule"}


# -- full extraction ---------------------------------------------------------------


def test_report_to_vector_combines_sections():
    r = RadiologyReport(
        "t",
        "FINDINGS: There is a nodular opacity.\nIMPRESSION: No evidence of pneumothorax.",
    )
    assert names_of(report_to_vector(r, LEX)) == {"Nodular opacity", "No evidence"}


def test_report_to_vector_empty_report():
    assert report_to_vector(RadiologyReport("t", ""), LEX).bits == (0,) * 28


def test_report_to_vector_ignores_unextracted_sections():
    r = RadiologyReport("t", "HISTORY: known lung cancer.\nIMPRESSION: stable chest.")
    assert report_to_vector(r, LEX).bits == (0,) * 28


# -- invariants ---------------------------------------------------------------------

_WORDS = st.sampled_from(
    "the of is no not without stable lung right left apex effusion mass nodule tumor carcinoma normal unremarkable".split()
)
_SENTENCE = st.lists(_WORDS, min_size=1, max_size=8).map(" ".join)
_BODY = st.lists(_SENTENCE, min_size=0, max_size=5).map(". ".join)


@given(_BODY, _BODY)
def test_determinism(findings, impression):
    r = RadiologyReport("t", f"FINDINGS: {findings}.\nIMPRESSION: {impression}.")
    assert report_to_vector(r, LEX) == report_to_vector(r, LEX)


@given(_BODY, _BODY, st.sampled_from(["mass", "nodule", "tumor", "hilar mass", "carcinomatosis"]))
def test_monotonicity_appending_unnegated_phrase(findings, impression, phrase):
    base = RadiologyReport("t", f"FINDINGS: {findings}.\nIMPRESSION: {impression}.")
    extended = RadiologyReport("t", base.raw_text + f" There remains {phrase} in view.")
    before = report_to_vector(base, LEX).bits
    after = report_to_vector(extended, LEX).bits
    assert all(b <= a for b, a in zip(before, after))


@given(_BODY, _BODY)
def test_section_gating(findings, body_outside):
    inner = f"FINDINGS: {findings}."
    wrapped = f"HISTORY: {body_outside}.\n{inner}\nNOTE: {body_outside}."
    v1 = report_to_vector(RadiologyReport("t", inner), LEX)
    v2 = report_to_vector(RadiologyReport("t", wrapped), LEX)
    assert v1.bits == v2.bits


# -- bundled oracle corpus -------------------------------------------------------------


def test_oracle_corpus_exact_match():
    corpus = oracle_corpus_dir()
    annotations = load_annotations(corpus / "annotations.csv")
    report_paths = sorted((corpus / "reports").glob("*.txt"))
    assert len(report_paths) >= 60
    for path in report_paths:
        report = read_report(path)
        got = report_to_vector(report, LEX)
        want = annotation_vector(annotations[report.id], LEX)
        assert got.bits == want.bits, report.id


def test_annotations_malformed_row(tmp_path):
    p = tmp_path / "ann.csv"
    p.write_text("r1,Mass\n")
    with pytest.raises(MalformedRow):
        load_annotations(p)
    p.write_text("r1,Mass,2\n")
    with pytest.raises(MalformedRow):
        load_annotations(p)


def test_merge_cleaned_preserves_order():
    a = clean("one. two.", "FINDINGS")
    b = clean("three.", "IMPRESSION")
    merged = merge_cleaned([a, b])
    assert merged.sentences == ("one", "two", "three")
    assert merged.source_sections == ("FINDINGS", "IMPRESSION")
