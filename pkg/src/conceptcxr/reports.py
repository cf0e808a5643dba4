"""Free-text radiology report parsing: section extraction, sentence cleaning,
and negation-aware concept detection producing binary concept vectors.

Only the FINDINGS and IMPRESSION sections contribute to extraction. Matching
is exact contiguous word-boundary matching over cleaned sentences; a
cancer-polarity match is suppressed when a negation cue starts at most
``NEGATION_WINDOW`` tokens before the phrase within the same sentence.
Healthy-polarity concepts ("No evidence", "Lungs clear", ...) are themselves
negative findings, so they count on plain occurrence and are never suppressed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import MalformedRow, ParseFailure
from .lexicon import ConceptLexicon, ConceptVector, Polarity

EXTRACTED_SECTIONS = ("FINDINGS", "IMPRESSION")

# Cues that suppress a cancer-phrase occurrence when they start within
# NEGATION_WINDOW tokens before it in the same sentence.
NEGATION_CUES = (
    "no",
    "not",
    "without",
    "free of",
    "negative for",
    "rather than",
    "resolved",
)
NEGATION_WINDOW = 6

# Filler tokens stripped from display renderings only; matching always runs
# on the full cleaned sentence.
NOISE_TOKENS = frozenset({"is", "are", "the", "of", "there", "a", "an"})


@dataclass(frozen=True)
class RadiologyReport:
    id: str
    raw_text: str


@dataclass(frozen=True)
class CleanedReport:
    """Cleaned sentences (lowercase, punctuation stripped) and the sections
    they came from."""

    sentences: tuple[str, ...]
    source_sections: tuple[str, ...]


# -- section extraction ------------------------------------------------------

# FINDINGS / IMPRESSION headers: case-insensitive, optional colon.
_SECTION_HEADER = re.compile(r"\b(findings|impression)\b[ \t]*:?", re.IGNORECASE)
# Any other all-caps header followed by a colon terminates a section.
_CAPS_HEADER = re.compile(r"\b[A-Z][A-Z]+(?:[ \t]+[A-Z][A-Z]*)*[ \t]*:")


def extract_sections(report: RadiologyReport) -> dict[str, str]:
    """Return the text under FINDINGS and IMPRESSION.

    A section spans from its header to the next header (another recognized
    header, or any all-caps header followed by a colon) or end of text.
    Missing sections are absent keys; repeated sections are concatenated.
    """
    text = report.raw_text
    events: list[tuple[int, int, str | None]] = []
    for m in _SECTION_HEADER.finditer(text):
        events.append((m.start(), m.end(), m.group(1).upper()))
    claimed = [(s, e) for s, e, _ in events]
    for m in _CAPS_HEADER.finditer(text):
        if any(m.start() < e and m.end() > s for s, e in claimed):
            continue
        events.append((m.start(), m.end(), None))
    events.sort()

    sections: dict[str, str] = {}
    for i, (_, end, name) in enumerate(events):
        if name is None:
            continue
        stop = events[i + 1][0] if i + 1 < len(events) else len(text)
        body = text[end:stop].strip()
        if name in sections:
            sections[name] = sections[name] + "\n" + body if body else sections[name]
        else:
            sections[name] = body
    return sections


# -- cleaning ----------------------------------------------------------------

_NON_ALNUM = re.compile(r"[^a-z0-9]+")


def _clean_sentence(raw: str) -> str:
    return _NON_ALNUM.sub(" ", raw.lower()).strip()


def clean(section_text: str, section: str = "") -> CleanedReport:
    """Lowercase, split on period/semicolon/newline, strip punctuation,
    collapse whitespace, drop empty sentences."""
    sentences = tuple(
        cleaned for part in re.split(r"[.;\n]", section_text) if (cleaned := _clean_sentence(part))
    )
    return CleanedReport(sentences, (section,) if section else ())


def merge_cleaned(parts: list[CleanedReport]) -> CleanedReport:
    sentences: list[str] = []
    sources: list[str] = []
    for p in parts:
        sentences.extend(p.sentences)
        sources.extend(p.source_sections)
    return CleanedReport(tuple(sentences), tuple(sources))


def display_sentence(sentence: str) -> str:
    """Sentence with filler tokens removed, for human-facing output only."""
    return " ".join(t for t in sentence.split() if t not in NOISE_TOKENS)


# -- concept detection ---------------------------------------------------------

_CUE_TOKENS = tuple(tuple(c.split()) for c in NEGATION_CUES)


def _occurrences(tokens: tuple[str, ...], phrase: tuple[str, ...]):
    m = len(phrase)
    for i in range(len(tokens) - m + 1):
        if tuple(tokens[i : i + m]) == phrase:
            yield i


def _negated_at(tokens: tuple[str, ...], start: int) -> bool:
    for cue in _CUE_TOKENS:
        lo = max(0, start - NEGATION_WINDOW)
        for c in range(lo, start):
            if c + len(cue) <= start and tuple(tokens[c : c + len(cue)]) == cue:
                return True
    return False


def detect_concepts(cleaned: CleanedReport, lexicon: ConceptLexicon) -> ConceptVector:
    """Set each concept bit from word-boundary phrase matches, suppressing
    negated cancer-phrase occurrences."""
    token_lists = [tuple(s.split()) for s in cleaned.sentences]
    bits = [0] * lexicon.concept_count
    for concept in lexicon.concepts:
        suppress = concept.polarity is Polarity.CANCER
        hit = False
        for phrase in concept.phrases:
            phrase_tokens = tuple(_clean_sentence(phrase).split())
            if not phrase_tokens:
                continue
            for tokens in token_lists:
                for i in _occurrences(tokens, phrase_tokens):
                    if not (suppress and _negated_at(tokens, i)):
                        hit = True
                        break
                if hit:
                    break
            if hit:
                break
        bits[concept.id] = 1 if hit else 0
    return lexicon.vector(bits)


def report_to_vector(report: RadiologyReport, lexicon: ConceptLexicon) -> ConceptVector:
    """Full extraction: sections -> cleaned sentences -> concept vector."""
    sections = extract_sections(report)
    parts = [clean(sections[name], name) for name in EXTRACTED_SECTIONS if name in sections]
    return detect_concepts(merge_cleaned(parts), lexicon)


# -- report and annotation files ----------------------------------------------


def read_report(path: str | Path) -> RadiologyReport:
    path = Path(path)
    return RadiologyReport(id=path.stem, raw_text=path.read_text(encoding="utf-8"))


def load_annotations(path: str | Path) -> dict[str, dict[str, int]]:
    """Parse an annotations file: one ``<report-id>,<concept-name>,<0|1>``
    record per line. Returns report id -> {concept name: bit}."""
    out: dict[str, dict[str, int]] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise MalformedRow(f"annotations line {lineno}: expected 3 comma-separated fields")
        report_id, concept, bit_s = (p.strip() for p in parts)
        if bit_s not in ("0", "1"):
            raise MalformedRow(f"annotations line {lineno}: bit must be 0 or 1, got {bit_s!r}")
        out.setdefault(report_id, {})[concept] = int(bit_s)
    return out


def annotation_vector(pairs: dict[str, int], lexicon: ConceptLexicon) -> ConceptVector:
    """Build a full concept vector from annotation pairs; unlisted concepts
    default to 0."""
    bits = [0] * lexicon.concept_count
    for name, bit in pairs.items():
        bits[lexicon.index_of(name)] = bit
    return lexicon.vector(bits)


def write_annotations(path: str | Path, rows: list[tuple[str, ConceptVector]], lexicon: ConceptLexicon) -> None:
    """Write the annotations format: every (report, concept) pair, one per line."""
    names = lexicon.concept_names()
    lines = []
    for report_id, vec in rows:
        if vec.lexicon_hash != lexicon.content_hash():
            raise ParseFailure(f"vector for {report_id!r} was built against a different lexicon")
        for name, bit in zip(names, vec.bits):
            lines.append(f"{report_id},{name},{bit}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def oracle_corpus_dir() -> Path:
    """Directory of the bundled hand-annotated report corpus."""
    return Path(str(resources.files("conceptcxr").joinpath("resources/oracle")))
