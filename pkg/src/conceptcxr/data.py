"""Dataset assembly: manifest filtering, class balancing, image
preprocessing, and the seeded stratified train/test split.

Preprocessing order is crop -> resize -> normalize so that the output shape
contract (side x side) holds regardless of how much border is cropped.
"""

from __future__ import annotations

import csv
import json
import os
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import cv2
import numpy as np

from .errors import (
    DegenerateImage,
    EmptyClass,
    FileMissing,
    InvalidConfig,
    MalformedRow,
    ParseFailure,
)
from .lexicon import ConceptLexicon, ConceptVector
from .reports import read_report, report_to_vector

PA_VIEW = "PA"
BLACK_BORDER_THRESHOLD = 0.05
DEFAULT_SIDE = 512

MANIFEST_FIELDS = ("id", "image_path", "report_path", "label", "view")


class Label(Enum):
    CANCER = "Cancer"
    HEALTHY = "Healthy"


@dataclass(frozen=True)
class ManifestRow:
    id: str
    image_path: str
    report_path: str
    label: str
    view: str


@dataclass(frozen=True)
class ImageTensor:
    """Square grayscale image with intensities in [0, 1]."""

    pixels: np.ndarray

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class Example:
    id: str
    image: ImageTensor
    concept_vector: ConceptVector
    label: Label


@dataclass(frozen=True)
class SplitDataset:
    train: list
    test: list
    seed: int


# -- manifest ------------------------------------------------------------------


def read_manifest(path: str | Path) -> list[ManifestRow]:
    """Read a manifest CSV; relative image/report paths are resolved against
    the manifest's own directory."""
    path = Path(path)
    if not path.is_file():
        raise FileMissing(f"manifest not found: {path}")
    base = path.parent

    def resolve(p: str) -> str:
        return p if Path(p).is_absolute() else str((base / p).resolve())

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_FIELDS:
            raise ParseFailure(
                f"manifest header must be {','.join(MANIFEST_FIELDS)}, got {reader.fieldnames}"
            )
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if any(rec.get(k) in (None, "") for k in ("id", "image_path", "report_path")):
                raise MalformedRow(f"manifest line {lineno}: empty required field")
            rows.append(
                ManifestRow(
                    rec["id"], resolve(rec["image_path"]), resolve(rec["report_path"]), rec["label"], rec["view"]
                )
            )
    return rows


def write_manifest(path: str | Path, rows: list[ManifestRow]) -> None:
    """Write a manifest CSV; paths are stored relative to the manifest's
    directory so rerun artifacts are byte-identical across locations."""
    path = Path(path)
    base = path.parent.resolve()

    def relativize(p: str) -> str:
        return os.path.relpath(p, base) if Path(p).is_absolute() else p

    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_FIELDS)
        for r in rows:
            writer.writerow([r.id, relativize(r.image_path), relativize(r.report_path), r.label, r.view])


def filter_manifest(rows: list[ManifestRow]) -> list[ManifestRow]:
    """Keep only PA-view rows labelled Cancer or Healthy."""
    wanted = {Label.CANCER.value, Label.HEALTHY.value}
    return [r for r in rows if r.view == PA_VIEW and r.label in wanted]


def balance(rows: list[ManifestRow], seed: int) -> list[ManifestRow]:
    """Keep all minority-class rows plus a seeded uniform subset of the
    majority class of equal size; original row order is preserved."""
    by_label: dict[str, list[int]] = {Label.CANCER.value: [], Label.HEALTHY.value: []}
    for i, r in enumerate(rows):
        if r.label in by_label:
            by_label[r.label].append(i)
    for label, idxs in by_label.items():
        if not idxs:
            raise EmptyClass(f"no rows labelled {label}")
    minority, majority = sorted(by_label.values(), key=len)
    keep = set(minority)
    keep.update(random.Random(seed).sample(majority, len(minority)))
    return [r for i, r in enumerate(rows) if i in keep]


# -- images -------------------------------------------------------------------


def load_image(path: str | Path) -> np.ndarray:
    """Read an 8- or 16-bit grayscale PNG/PGM, scaled by the max
    representable value to float32 in [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise FileMissing(f"image not found: {path}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ParseFailure(f"could not decode image: {path}")
    if raw.ndim == 3:
        raw = cv2.cvtColor(raw, cv2.COLOR_BGR2GRAY)
    if raw.dtype == np.uint8:
        return raw.astype(np.float32) / 255.0
    if raw.dtype == np.uint16:
        return raw.astype(np.float32) / 65535.0
    raise ParseFailure(f"unsupported image dtype {raw.dtype} in {path}")


def crop_black_borders(pixels: np.ndarray, threshold: float = BLACK_BORDER_THRESHOLD) -> np.ndarray:
    """Drop leading/trailing rows and columns whose max intensity is below
    the threshold."""
    rows = np.where(pixels.max(axis=1) >= threshold)[0]
    cols = np.where(pixels.max(axis=0) >= threshold)[0]
    if rows.size == 0 or cols.size == 0:
        raise DegenerateImage("image is entirely below the black-border threshold")
    return pixels[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]


def preprocess_image(pixels: np.ndarray, side: int = DEFAULT_SIDE) -> ImageTensor:
    """Crop black borders, resize to side x side (bilinear), then min-max
    normalize to [0, 1]; a constant image becomes all zeros."""
    if pixels.ndim != 2 or pixels.shape[0] == 0 or pixels.shape[1] == 0:
        raise DegenerateImage(f"expected a non-empty 2-D image, got shape {pixels.shape}")
    cropped = crop_black_borders(np.asarray(pixels, dtype=np.float32))
    resized = cv2.resize(cropped, (side, side), interpolation=cv2.INTER_LINEAR)
    lo, hi = float(resized.min()), float(resized.max())
    if hi > lo:
        normalized = (resized - lo) / (hi - lo)
    else:
        normalized = np.zeros_like(resized)
    return ImageTensor(normalized)


# -- examples and splitting ---------------------------------------------------------


def load_examples(
    rows: list[ManifestRow],
    lexicon: ConceptLexicon,
    side: int = DEFAULT_SIDE,
    threads: int = 1,
) -> list[Example]:
    """Materialize manifest rows: preprocessed image plus the report-derived
    concept vector."""

    def build(row: ManifestRow) -> Example:
        image = preprocess_image(load_image(row.image_path), side)
        report = read_report(row.report_path)
        vector = report_to_vector(report, lexicon)
        return Example(row.id, image, vector, Label(row.label))

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(build, rows))
    return [build(row) for row in rows]


def _test_count(n: int, fraction: float) -> int:
    return int(n * fraction + 0.5)


def stratified_split(items: list, get_label, test_fraction: float, seed: int):
    """Seeded stratified split; per class the test size is
    round(count * fraction)."""
    if not 0.0 < test_fraction < 1.0:
        raise InvalidConfig(f"test_fraction must be in (0, 1), got {test_fraction}")
    by_label: dict[str, list[int]] = {}
    for i, item in enumerate(items):
        by_label.setdefault(get_label(item), []).append(i)
    rng = random.Random(seed)
    test_idx: set[int] = set()
    for label in sorted(by_label):
        idxs = list(by_label[label])
        if len(idxs) < 2:
            raise EmptyClass(f"class {label!r} has fewer than 2 examples")
        rng.shuffle(idxs)
        test_idx.update(idxs[: _test_count(len(idxs), test_fraction)])
    train = [items[i] for i in range(len(items)) if i not in test_idx]
    test = [items[i] for i in range(len(items)) if i in test_idx]
    return train, test


def split(examples: list[Example], test_fraction: float = 0.1, seed: int = 0) -> SplitDataset:
    train, test = stratified_split(examples, lambda e: e.label.value, test_fraction, seed)
    return SplitDataset(train, test, seed)


def split_rows(rows: list[ManifestRow], test_fraction: float = 0.1, seed: int = 0):
    return stratified_split(rows, lambda r: r.label, test_fraction, seed)


# -- split artifacts -----------------------------------------------------------------


def write_split(
    out_dir: str | Path,
    train_rows: list[ManifestRow],
    test_rows: list[ManifestRow],
    seed: int,
    test_fraction: float,
    lexicon_hash: str,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "train_manifest.csv", train_rows)
    write_manifest(out / "test_manifest.csv", test_rows)

    def counts(rows):
        return {
            Label.CANCER.value: sum(r.label == Label.CANCER.value for r in rows),
            Label.HEALTHY.value: sum(r.label == Label.HEALTHY.value for r in rows),
        }

    meta = {
        "seed": seed,
        "test_fraction": test_fraction,
        "counts": {"train": counts(train_rows), "test": counts(test_rows)},
        "lexicon_hash": lexicon_hash,
    }
    (out / "split_meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
