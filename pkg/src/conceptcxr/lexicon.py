"""Clinical concept lexicon: the radiologist-curated concepts, their match
phrases, polarity, and clustering into six clinical features.

A lexicon is immutable after load and identified by a stable content hash,
which downstream files (score files, model files, split metadata) embed so
that incompatible combinations fail loudly instead of silently misaligning.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import (
    DuplicateConcept,
    EmptyPhraseList,
    LexiconMismatch,
    OutOfRange,
    ParseFailure,
    UnknownCluster,
)

# Fixed cluster universe and its canonical order. Cluster identity is part of
# every file format, so the order is pinned here rather than inferred.
CANONICAL_CLUSTERS = (
    "Mass",
    "Nodule",
    "Irregular Hilum",
    "Irregular Lung Parenchyma",
    "Irregular Mediastinum",
    "Unremarkable",
)

UNREMARKABLE = "Unremarkable"


class Polarity(Enum):
    CANCER = "Cancer"
    HEALTHY = "Healthy"


@dataclass(frozen=True)
class Concept:
    """One clinical concept: display name, lowercase match phrases, polarity,
    and the cluster it belongs to."""

    id: int
    name: str
    phrases: tuple[str, ...]
    polarity: Polarity
    cluster: str

    def validate(self) -> None:
        if not self.phrases:
            raise EmptyPhraseList(f"concept {self.name!r} has no phrases")
        for phrase in self.phrases:
            if not phrase.strip():
                raise EmptyPhraseList(f"concept {self.name!r} has an empty phrase")
            if phrase != phrase.lower():
                raise ParseFailure(f"concept {self.name!r}: phrase {phrase!r} must be lowercase")
        if self.cluster not in CANONICAL_CLUSTERS:
            raise UnknownCluster(f"concept {self.name!r} references undeclared cluster {self.cluster!r}")
        healthy = self.polarity is Polarity.HEALTHY
        unremarkable = self.cluster == UNREMARKABLE
        if healthy != unremarkable:
            raise ParseFailure(
                f"concept {self.name!r}: polarity {self.polarity.value} is inconsistent "
                f"with cluster {self.cluster!r} (Healthy iff Unremarkable)"
            )


@dataclass(frozen=True)
class ConceptVector:
    """Binary ground-truth presence flags, one per concept in lexicon order."""

    lexicon_hash: str
    bits: tuple[int, ...]

    def __post_init__(self):
        for b in self.bits:
            if b not in (0, 1):
                raise ParseFailure(f"concept vector bits must be 0/1, got {b!r}")

    def positive_ids(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bits) if b)


@dataclass(frozen=True)
class ClusterVector:
    """Binary presence flags, one per cluster in lexicon cluster order."""

    lexicon_hash: str
    bits: tuple[int, ...]

    def __post_init__(self):
        for b in self.bits:
            if b not in (0, 1):
                raise ParseFailure(f"cluster vector bits must be 0/1, got {b!r}")

    def positive_ids(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bits) if b)


@dataclass(frozen=True)
class ConceptLexicon:
    """Ordered, validated concept list plus the clusters they use.

    ``clusters`` lists the referenced clusters in canonical order; the default
    lexicon uses all six.
    """

    concepts: tuple[Concept, ...]
    clusters: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        seen: set[str] = set()
        for i, concept in enumerate(self.concepts):
            if concept.id != i:
                raise ParseFailure(f"concept ids must be consecutive from 0, got {concept.id} at position {i}")
            concept.validate()
            key = concept.name.lower()
            if key in seen:
                raise DuplicateConcept(f"duplicate concept name {concept.name!r}")
            seen.add(key)
        referenced = {c.cluster for c in self.concepts}
        object.__setattr__(
            self, "clusters", tuple(c for c in CANONICAL_CLUSTERS if c in referenced)
        )

    # -- basic lookups ----------------------------------------------------

    @property
    def concept_count(self) -> int:
        return len(self.concepts)

    @property
    def cluster_count(self) -> int:
        return len(self.clusters)

    def concept_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.concepts)

    def index_of(self, name: str) -> int:
        for c in self.concepts:
            if c.name.lower() == name.lower():
                return c.id
        raise OutOfRange(f"unknown concept name {name!r}")

    def cluster_of(self, concept_id: int) -> str:
        if not 0 <= concept_id < self.concept_count:
            raise OutOfRange(f"concept id {concept_id} out of range [0, {self.concept_count})")
        return self.concepts[concept_id].cluster

    def cluster_index(self, cluster: str) -> int:
        try:
            return self.clusters.index(cluster)
        except ValueError:
            raise UnknownCluster(f"cluster {cluster!r} not in lexicon") from None

    def cluster_members(self, cluster: str) -> tuple[int, ...]:
        self.cluster_index(cluster)
        return tuple(c.id for c in self.concepts if c.cluster == cluster)

    # -- vectors -----------------------------------------------------------

    def vector(self, bits) -> ConceptVector:
        bits = tuple(int(b) for b in bits)
        if len(bits) != self.concept_count:
            raise LexiconMismatch(
                f"concept vector length {len(bits)} != lexicon concept count {self.concept_count}"
            )
        return ConceptVector(self.content_hash(), bits)

    def vector_from_names(self, names) -> ConceptVector:
        bits = [0] * self.concept_count
        for name in names:
            bits[self.index_of(name)] = 1
        return self.vector(bits)

    def cluster_vector(self, bits) -> ClusterVector:
        bits = tuple(int(b) for b in bits)
        if len(bits) != self.cluster_count:
            raise LexiconMismatch(
                f"cluster vector length {len(bits)} != lexicon cluster count {self.cluster_count}"
            )
        return ClusterVector(self.content_hash(), bits)

    def to_clusters(self, v: ConceptVector) -> ClusterVector:
        """Cluster bit = OR over the bits of its member concepts."""
        if v.lexicon_hash != self.content_hash():
            raise LexiconMismatch(
                f"vector built against lexicon {v.lexicon_hash}, expected {self.content_hash()}"
            )
        if len(v.bits) != self.concept_count:
            raise LexiconMismatch("concept vector length does not match lexicon")
        bits = [0] * self.cluster_count
        for concept, bit in zip(self.concepts, v.bits):
            if bit:
                bits[self.cluster_index(concept.cluster)] = 1
        return ClusterVector(self.content_hash(), tuple(bits))

    def target_names(self, clustered: bool) -> tuple[str, ...]:
        return self.clusters if clustered else self.concept_names()

    # -- identity ----------------------------------------------------------

    def canonical_text(self) -> str:
        """Canonical serialization used for the content hash: one line per
        concept in id order, single-space normalized fields."""
        lines = []
        for c in self.concepts:
            name = " ".join(c.name.split())
            cluster = " ".join(c.cluster.split())
            phrases = ";".join(" ".join(p.split()) for p in c.phrases)
            lines.append(f"{name}|{c.polarity.value}|{cluster}|{phrases}")
        return "\n".join(lines)

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()[:16]


# -- file format -----------------------------------------------------------
#
# One record per line:  <name> | <polarity> | <cluster> | <phrase>;<phrase>;...
# Lines starting with '#' are comments; blank lines are ignored.


def parse_lexicon(text: str) -> ConceptLexicon:
    concepts = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 4:
            raise ParseFailure(f"lexicon line {lineno}: expected 4 '|'-separated fields, got {len(parts)}")
        name, polarity_s, cluster, phrases_s = parts
        if not name:
            raise ParseFailure(f"lexicon line {lineno}: empty concept name")
        try:
            polarity = Polarity(polarity_s)
        except ValueError:
            raise ParseFailure(f"lexicon line {lineno}: unknown polarity {polarity_s!r}") from None
        phrases = tuple(p.strip() for p in phrases_s.split(";") if p.strip())
        concepts.append(Concept(len(concepts), name, phrases, polarity, cluster))
    return ConceptLexicon(tuple(concepts))


def load_lexicon(path: str | Path | None = None) -> ConceptLexicon:
    """Load a lexicon file, or the embedded default when ``path`` is None."""
    if path is None:
        return default_lexicon()
    path = Path(path)
    if not path.is_file():
        raise ParseFailure(f"lexicon file not found: {path}")
    return parse_lexicon(path.read_text(encoding="utf-8"))


def save_lexicon(lexicon: ConceptLexicon, path: str | Path) -> None:
    lines = ["# concept lexicon: <name> | <polarity> | <cluster> | <phrase>;<phrase>;..."]
    for c in lexicon.concepts:
        lines.append(f"{c.name} | {c.polarity.value} | {c.cluster} | {';'.join(c.phrases)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# The shipped 28-concept table: (name, cluster). Polarity follows from the
# cluster; each concept's sole match phrase is its lowercased name.
_DEFAULT_TABLE = (
    ("Mass", "Mass"),
    ("Cavitary lesion", "Mass"),
    ("Carcinoma", "Mass"),
    ("Neoplasm", "Mass"),
    ("Tumor", "Mass"),
    ("Rounded opacity", "Mass"),
    ("Lung cancer", "Mass"),
    ("Apical opacity", "Mass"),
    ("Nodular density", "Nodule"),
    ("Nodular densities", "Nodule"),
    ("Nodular opacity", "Nodule"),
    ("Nodular opacities", "Nodule"),
    ("Nodular opacification", "Nodule"),
    ("Nodule", "Nodule"),
    ("Hilar mass", "Irregular Hilum"),
    ("Hilar opacity", "Irregular Hilum"),
    ("Hilar adenopathy", "Irregular Hilum"),
    ("Hilus enlarged", "Irregular Hilum"),
    ("Hilus fullness", "Irregular Hilum"),
    ("Hilar lymphadenopathy", "Irregular Hilum"),
    ("Pulmonary metastasis", "Irregular Lung Parenchyma"),
    ("Carcinomatosis", "Irregular Lung Parenchyma"),
    ("Metastatic disease", "Irregular Lung Parenchyma"),
    ("Lymphadenopathy", "Irregular Mediastinum"),
    ("Normal", "Unremarkable"),
    ("Unremarkable", "Unremarkable"),
    ("Lungs clear", "Unremarkable"),
    ("No evidence", "Unremarkable"),
)

_default: ConceptLexicon | None = None


def default_lexicon() -> ConceptLexicon:
    """The embedded 28-concept, 6-cluster lexicon."""
    global _default
    if _default is None:
        concepts = tuple(
            Concept(
                id=i,
                name=name,
                phrases=(name.lower(),),
                polarity=Polarity.HEALTHY if cluster == UNREMARKABLE else Polarity.CANCER,
                cluster=cluster,
            )
            for i, (name, cluster) in enumerate(_DEFAULT_TABLE)
        )
        _default = ConceptLexicon(concepts)
    return _default


def default_lexicon_path() -> Path:
    """Filesystem path of the shipped default lexicon file."""
    return Path(str(resources.files("conceptcxr").joinpath("resources/default_lexicon.txt")))
