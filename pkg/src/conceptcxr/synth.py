"""Deterministic synthetic corpus: images with cluster-keyed geometric
figures, templated reports mentioning the matching concept phrases, and the
intended concept vector as annotations.

The corpus stands in for credentialed clinical data at desk scale and doubles
as the end-to-end oracle: re-parsing every generated report must reproduce
its annotation exactly, and a fifth of the reports carry a negated distractor
phrase so the negation path is exercised throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .data import ManifestRow, write_manifest
from .errors import InvalidConfig
from .lexicon import ConceptLexicon, default_lexicon
from .reports import write_annotations

FRAME_PX = 8  # black frame so preprocessing's border crop is exercised

# Phrases usable in templates without firing any other concept (e.g. "hilar
# mass" is excluded because it would also match the Mass concept).
CLUSTER_PHRASES = {
    "Mass": (
        "mass",
        "cavitary lesion",
        "carcinoma",
        "neoplasm",
        "tumor",
        "rounded opacity",
        "lung cancer",
        "apical opacity",
    ),
    "Nodule": (
        "nodular density",
        "nodular densities",
        "nodular opacity",
        "nodular opacities",
        "nodular opacification",
        "nodule",
    ),
    "Irregular Hilum": ("hilar opacity", "hilar adenopathy", "hilus enlarged", "hilus fullness"),
    "Irregular Lung Parenchyma": ("pulmonary metastasis", "carcinomatosis", "metastatic disease"),
    "Irregular Mediastinum": ("lymphadenopathy",),
}
CANCER_CLUSTERS = tuple(CLUSTER_PHRASES)

HEALTHY_FINDINGS = (
    ("Lungs clear bilaterally.", "Lungs clear"),
    ("The cardiomediastinal silhouette is normal.", "Normal"),
    ("The examination is unremarkable.", "Unremarkable"),
)
HEALTHY_IMPRESSIONS = (
    ("No evidence of acute cardiopulmonary process.", "No evidence"),
    ("Stable chest radiograph.", None),
)

FILLERS = (
    "Heart size within usual limits.",
    "The cardiomediastinal silhouette is stable.",
    "Osseous structures intact.",
    "Low lung volumes.",
    "Degenerative changes of the thoracic spine.",
)
LOCATIONS = (
    "right upper lobe",
    "left lower lobe",
    "right mid zone",
    "left upper zone",
    "lingula",
)

DISTRACTOR_RATE = 0.2


@dataclass(frozen=True)
class SynthConfig:
    n_per_class: int = 200
    image_side: int = 128
    seed: int = 7
    noise_level: float = 0.2
    image_format: str = "png"

    def validate(self) -> None:
        if self.n_per_class < 2:
            raise InvalidConfig("n_per_class must be >= 2")
        if self.image_side < 64:
            raise InvalidConfig("image_side must be >= 64")
        if not 0.0 <= self.noise_level <= 1.0:
            raise InvalidConfig("noise_level must be in [0, 1]")
        if self.image_format not in ("png", "pgm"):
            raise InvalidConfig(f"unsupported image format {self.image_format!r}")


# -- image synthesis ----------------------------------------------------------


def _background(rng: np.random.Generator, side: int, noise: float) -> np.ndarray:
    img = np.zeros((side, side), dtype=np.float64)
    inner = slice(FRAME_PX, side - FRAME_PX)
    yy = np.linspace(0.0, 1.0, side - 2 * FRAME_PX)[:, None]
    img[inner, inner] = 0.10 + 0.06 * yy + noise * 0.3 * rng.random((side - 2 * FRAME_PX,) * 2)
    return img


def _disc(img, cy, cx, radius, value):
    yy, xx = np.mgrid[0 : img.shape[0], 0 : img.shape[1]]
    mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
    img[mask] = np.maximum(img[mask], value)


def _paint_cluster(img: np.ndarray, cluster: str, rng: np.random.Generator) -> None:
    # each cluster gets a jittered canonical region so the figures stay
    # learnable by the desk-scale linear concept model
    side = img.shape[0]
    lo, hi = FRAME_PX, side - FRAME_PX
    if cluster == "Mass":
        r = int(rng.integers(side // 8, side // 5))
        cy = int(rng.integers(int(0.22 * side), int(0.42 * side)))
        cx = int(rng.integers(int(0.58 * side), int(0.76 * side)))
        _disc(img, cy, cx, min(r, hi - cx - 1, hi - cy - 1, cx - lo, cy - lo), 0.92)
    elif cluster == "Nodule":
        r = max(2, side // 32)
        for _ in range(int(rng.integers(6, 10))):
            cy = int(rng.integers(int(0.55 * side), int(0.82 * side)))
            cx = int(rng.integers(int(0.15 * side), int(0.42 * side)))
            _disc(img, cy, cx, r, 0.92)
    elif cluster == "Irregular Hilum":
        # bright wedge at center-left
        cy = side // 2 + int(rng.integers(-side // 16, side // 16 + 1))
        depth = side // 4
        half = side // 6
        yy, xx = np.mgrid[0:side, 0:side]
        within = (xx >= lo) & (xx <= lo + depth)
        spread = np.abs(yy - cy) <= (half * (xx - lo + 1) / depth)
        img[within & spread] = 0.88
    elif cluster == "Irregular Lung Parenchyma":
        r = side // 14
        for _ in range(14):
            cy = int(rng.integers(lo + r, hi - r))
            cx = int(rng.integers(lo + r, hi - r))
            _disc(img, cy, cx, r, 0.55)
    elif cluster == "Irregular Mediastinum":
        width = side // 7
        mid = side // 2 + int(rng.integers(-side // 20, side // 20 + 1))
        img[lo:hi, mid - width // 2 : mid + width // 2] = 0.80
    else:
        raise InvalidConfig(f"no figure defined for cluster {cluster!r}")


def _write_image(path: Path, img: np.ndarray) -> None:
    pixels = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    cv2.imwrite(str(path), pixels)


# -- report synthesis -----------------------------------------------------------------


def _cancer_report(phrase, location, filler, distractor):
    sentences = [f"There is a {phrase} in the {location}.", filler]
    if distractor:
        sentences.append(f"No {distractor} is seen.")
    findings = " ".join(sentences)
    return (
        "EXAMINATION: Chest radiograph PA view.\n"
        f"FINDINGS: {findings}\n"
        "IMPRESSION: Appearance is concerning, dedicated imaging advised.\n"
    )


def _healthy_report(finding_sentence, filler, impression_sentence, distractor):
    sentences = [finding_sentence, filler]
    if distractor:
        sentences.append(f"No {distractor} is seen.")
    findings = " ".join(sentences)
    return (
        "EXAMINATION: Chest radiograph PA view.\n"
        f"FINDINGS: {findings}\n"
        f"IMPRESSION: {impression_sentence}\n"
    )


# -- generation --------------------------------------------------------------------------


def generate(config: SynthConfig, out_dir: str | Path, lexicon: ConceptLexicon | None = None):
    """Write images/, reports/, manifest.csv, and annotations.csv under
    ``out_dir``; returns the manifest rows. Deterministic in the config."""
    config.validate()
    lexicon = lexicon or default_lexicon()
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "reports").mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(config.seed)
    rows: list[ManifestRow] = []
    annotations: list[tuple[str, object]] = []

    def distractor_for(exclude_cluster: str | None) -> str | None:
        if rng.random() >= DISTRACTOR_RATE:
            return None
        clusters = [c for c in CANCER_CLUSTERS if c != exclude_cluster]
        cluster = clusters[int(rng.integers(len(clusters)))]
        phrases = CLUSTER_PHRASES[cluster]
        return phrases[int(rng.integers(len(phrases)))]

    def emit(example_id, label, image, report_text, concepts):
        image_name = f"{example_id}.{config.image_format}"
        _write_image(out / "images" / image_name, image)
        (out / "reports" / f"{example_id}.txt").write_text(report_text, encoding="utf-8")
        rows.append(
            ManifestRow(
                example_id,
                str(out / "images" / image_name),
                str(out / "reports" / f"{example_id}.txt"),
                label,
                "PA",
            )
        )
        annotations.append((example_id, lexicon.vector_from_names(concepts)))

    for i in range(config.n_per_class):
        example_id = f"syn{i:04d}"
        cluster = CANCER_CLUSTERS[int(rng.integers(len(CANCER_CLUSTERS)))]
        phrases = CLUSTER_PHRASES[cluster]
        phrase = phrases[int(rng.integers(len(phrases)))]
        location = LOCATIONS[int(rng.integers(len(LOCATIONS)))]
        filler = FILLERS[int(rng.integers(len(FILLERS)))]
        image = _background(rng, config.image_side, config.noise_level)
        _paint_cluster(image, cluster, rng)
        report = _cancer_report(phrase, location, filler, distractor_for(cluster))
        emit(example_id, "Cancer", image, report, [_concept_of(lexicon, phrase)])

    for i in range(config.n_per_class):
        example_id = f"syn{config.n_per_class + i:04d}"
        finding_sentence, finding_concept = HEALTHY_FINDINGS[int(rng.integers(len(HEALTHY_FINDINGS)))]
        impression_sentence, impression_concept = HEALTHY_IMPRESSIONS[
            int(rng.integers(len(HEALTHY_IMPRESSIONS)))
        ]
        filler = FILLERS[int(rng.integers(len(FILLERS)))]
        image = _background(rng, config.image_side, config.noise_level)
        report = _healthy_report(finding_sentence, filler, impression_sentence, distractor_for(None))
        concepts = [finding_concept] + ([impression_concept] if impression_concept else [])
        emit(example_id, "Healthy", image, report, concepts)

    write_manifest(out / "manifest.csv", rows)
    write_annotations(out / "annotations.csv", annotations, lexicon)
    return rows


def _concept_of(lexicon: ConceptLexicon, phrase: str) -> str:
    for concept in lexicon.concepts:
        if phrase in concept.phrases:
            return concept.name
    raise InvalidConfig(f"template phrase {phrase!r} is not in the lexicon")
