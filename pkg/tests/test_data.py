import numpy as np
import pytest
import cv2
from hypothesis import given, settings, strategies as st

from conceptcxr.data import (
    ImageTensor,
    Label,
    ManifestRow,
    balance,
    crop_black_borders,
    filter_manifest,
    load_image,
    preprocess_image,
    read_manifest,
    split_rows,
    write_manifest,
)
from conceptcxr.errors import (
    DegenerateImage,
    EmptyClass,
    FileMissing,
    InvalidConfig,
    ParseFailure,
)


def row(i, label="Cancer", view="PA"):
    return ManifestRow(f"id{i}", f"img{i}.png", f"rep{i}.txt", label, view)


# -- filter -------------------------------------------------------------------


def test_filter_keeps_pa_cancer_healthy():
    rows = [row(0), row(1), row(2), row(3, view="AP"), row(4, label="Pneumonia"), row(5, label="Healthy")]
    kept = filter_manifest(rows)
    assert [r.id for r in kept] == ["id0", "id1", "id2", "id5"]


def test_filter_empty():
    assert filter_manifest([]) == []


# -- balance ------------------------------------------------------------------


def test_balance_downsamples_majority():
    rows = [row(i, label="Cancer") for i in range(1187)]
    rows += [row(1187 + i, label="Healthy") for i in range(50000)]
    balanced = balance(rows, seed=0)
    assert len(balanced) == 2374
    assert sum(r.label == "Cancer" for r in balanced) == 1187
    assert sum(r.label == "Healthy" for r in balanced) == 1187


def test_balance_already_balanced_unchanged():
    rows = [row(i, label="Cancer") for i in range(10)] + [row(10 + i, label="Healthy") for i in range(10)]
    assert balance(rows, seed=3) == rows


def test_balance_empty_class():
    with pytest.raises(EmptyClass):
        balance([row(i, label="Healthy") for i in range(5)], seed=0)


def test_balance_idempotent():
    rows = [row(i, label="Cancer" if i % 3 else "Healthy") for i in range(40)]
    once = balance(rows, seed=11)
    assert balance(once, seed=11) == once


def test_balance_deterministic():
    rows = [row(i, label="Cancer" if i < 5 else "Healthy") for i in range(30)]
    assert balance(rows, seed=7) == balance(rows, seed=7)


# -- preprocessing -------------------------------------------------------------


def _bordered_image(h, w, margin, fill=0.5):
    img = np.zeros((h, w), dtype=np.float32)
    img[margin : h - margin, margin : w - margin] = fill
    return img


def brute_force_crop_box(pixels, threshold=0.05):
    rows = [i for i in range(pixels.shape[0]) if pixels[i, :].max() >= threshold]
    cols = [j for j in range(pixels.shape[1]) if pixels[:, j].max() >= threshold]
    return rows[0], rows[-1], cols[0], cols[-1]


def test_crop_matches_brute_force():
    img = _bordered_image(600, 700, margin=50)
    img[100:200, 100:300] = 0.9
    r0, r1, c0, c1 = brute_force_crop_box(img)
    assert (r0, r1, c0, c1) == (50, 549, 50, 649)
    cropped = crop_black_borders(img)
    assert cropped.shape == (r1 - r0 + 1, c1 - c0 + 1)
    np.testing.assert_array_equal(cropped, img[r0 : r1 + 1, c0 : c1 + 1])


def test_preprocess_crops_and_resizes():
    img = _bordered_image(600, 700, margin=50)
    out = preprocess_image(img, side=512)
    assert out.pixels.shape == (512, 512)
    assert float(out.pixels.min()) >= 0.0
    assert float(out.pixels.max()) <= 1.0


def test_preprocess_constant_image_is_zero():
    img = np.full((512, 512), 0.5, dtype=np.float32)
    out = preprocess_image(img, side=512)
    assert out.pixels.shape == (512, 512)
    assert float(np.abs(out.pixels).max()) == 0.0


def test_preprocess_all_black_rejected():
    with pytest.raises(DegenerateImage):
        preprocess_image(np.zeros((64, 64), dtype=np.float32), side=32)


def test_preprocess_rejects_empty():
    with pytest.raises(DegenerateImage):
        preprocess_image(np.zeros((0, 10), dtype=np.float32))


@settings(max_examples=25, deadline=None)
@given(
    st.integers(min_value=8, max_value=40),
    st.integers(min_value=8, max_value=40),
    st.integers(min_value=8, max_value=64),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_preprocess_shape_and_range(h, w, side, seed):
    rng = np.random.default_rng(seed)
    img = rng.random((h, w), dtype=np.float32)
    out = preprocess_image(img, side=side)
    assert out.pixels.shape == (side, side)
    assert float(out.pixels.min()) >= 0.0
    assert float(out.pixels.max()) <= 1.0


def test_load_image_scales_bit_depths(tmp_path):
    p8 = tmp_path / "a.png"
    cv2.imwrite(str(p8), np.array([[0, 255]], dtype=np.uint8))
    np.testing.assert_allclose(load_image(p8), [[0.0, 1.0]])
    p16 = tmp_path / "b.png"
    cv2.imwrite(str(p16), np.array([[0, 65535]], dtype=np.uint16))
    np.testing.assert_allclose(load_image(p16), [[0.0, 1.0]])
    pgm = tmp_path / "c.pgm"
    cv2.imwrite(str(pgm), np.array([[128]], dtype=np.uint8))
    np.testing.assert_allclose(load_image(pgm), [[128 / 255.0]], rtol=1e-6)


def test_load_image_missing(tmp_path):
    with pytest.raises(FileMissing):
        load_image(tmp_path / "nope.png")


# -- split ----------------------------------------------------------------------


def balanced_rows(n_per_class):
    rows = []
    for i in range(n_per_class):
        rows.append(row(i, label="Cancer"))
    for i in range(n_per_class):
        rows.append(row(n_per_class + i, label="Healthy"))
    return rows


def test_split_paper_scale_counts():
    rows = balanced_rows(1187)
    train, test = split_rows(rows, test_fraction=0.1, seed=0)
    assert len(test) == 238
    assert sum(r.label == "Cancer" for r in test) == 119
    assert sum(r.label == "Healthy" for r in test) == 119
    assert len(train) == 2374 - 238


def test_split_even():
    train, test = split_rows(balanced_rows(10), test_fraction=0.5, seed=1)
    assert len(train) == len(test) == 10
    assert sum(r.label == "Cancer" for r in test) == 5


def test_split_rounding_small():
    train, test = split_rows(balanced_rows(9), test_fraction=0.1, seed=2)
    assert sum(r.label == "Cancer" for r in test) == 1
    assert sum(r.label == "Healthy" for r in test) == 1


def test_split_disjoint_and_deterministic():
    rows = balanced_rows(25)
    t1, s1 = split_rows(rows, 0.2, seed=9)
    t2, s2 = split_rows(rows, 0.2, seed=9)
    assert t1 == t2 and s1 == s2
    assert {r.id for r in t1}.isdisjoint({r.id for r in s1})
    assert sorted(r.id for r in t1 + s1) == sorted(r.id for r in rows)


def test_split_bad_fraction():
    with pytest.raises(InvalidConfig):
        split_rows(balanced_rows(5), test_fraction=0.0, seed=0)
    with pytest.raises(InvalidConfig):
        split_rows(balanced_rows(5), test_fraction=1.0, seed=0)


def test_split_tiny_class():
    rows = [row(0, label="Cancer"), row(1, label="Healthy"), row(2, label="Healthy")]
    with pytest.raises(EmptyClass):
        split_rows(rows, test_fraction=0.5, seed=0)


# -- manifest IO ------------------------------------------------------------------


def test_manifest_round_trip(tmp_path):
    rows = [row(0), row(1, label="Healthy", view="AP")]
    path = tmp_path / "manifest.csv"
    write_manifest(path, rows)
    back = read_manifest(path)
    # relative paths come back resolved against the manifest directory
    assert [r.id for r in back] == ["id0", "id1"]
    assert back[0].image_path == str((tmp_path / "img0.png").resolve())
    assert back[0].label == "Cancer" and back[1].view == "AP"
    # absolute paths survive a write/read cycle unchanged
    write_manifest(path, back)
    assert read_manifest(path) == back


def test_manifest_bad_header(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("id,image,label\n1,a,b\n")
    with pytest.raises(ParseFailure):
        read_manifest(path)


def test_manifest_missing():
    with pytest.raises(FileMissing):
        read_manifest("/nonexistent/m.csv")


def test_label_enum_round_trip():
    assert Label("Cancer") is Label.CANCER
    assert ImageTensor(np.zeros((4, 4), dtype=np.float32)).height == 4
