import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from capx.core import (BoundingBox, DensityResult, Frame, RegionResult, contour_pixels,
                       list_frame_files, load_frame, save_annotated, to_grayscale)
from capx.errors import FormatError

import oracles


def one_pixel(rgb):
    return Frame("px", np.array(rgb, np.uint8).reshape(1, 1, 3))


@pytest.mark.parametrize("rgb,expected", [
    ((255, 255, 255), 255),
    ((0, 0, 0), 0),
    ((255, 0, 0), 76),
])
def test_grayscale_examples(rgb, expected):
    assert to_grayscale(one_pixel(rgb)).data[0, 0] == expected


def test_grayscale_matches_hand_formula(rng):
    data = rng.integers(0, 256, (7, 9, 3), dtype=np.uint8)
    g = to_grayscale(Frame("r", data)).data
    for y in range(7):
        for x in range(9):
            assert g[y, x] == oracles.gray_pixel(*(int(v) for v in data[y, x]))


@given(arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6))))
def test_grayscale_idempotent_on_single_channel(data):
    f = Frame("g", data)
    once = to_grayscale(f)
    twice = to_grayscale(Frame("g", once.data))
    assert np.array_equal(once.data, data)
    assert np.array_equal(twice.data, once.data)


def test_frame_validation():
    with pytest.raises(FormatError):
        Frame.from_bytes("x", 2, 2, 3, b"\x00" * 11)
    f = Frame.from_bytes("x", 2, 1, 3, bytes(range(6)))
    assert (f.width, f.height, f.channels) == (2, 1, 3)
    assert not f.data.flags.writeable
    with pytest.raises(FormatError):
        Frame("bad", np.zeros((2, 2, 2), np.uint8))


def test_load_png_round_trip(tmp_path):
    data = np.arange(12, dtype=np.uint8).reshape(2, 2, 3)
    Image.fromarray(data).save(tmp_path / "tiny.png")
    f = load_frame(tmp_path / "tiny.png")
    assert f.id == "tiny"
    assert (f.width, f.height, f.channels) == (2, 2, 3)
    assert np.array_equal(f.data, data)


def test_load_pgm_and_ppm(tmp_path):
    (tmp_path / "a.pgm").write_bytes(b"P5\n3 2\n255\n" + bytes(range(6)))
    (tmp_path / "b.ppm").write_bytes(b"P6\n1 2\n255\n" + bytes(range(6)))
    a = load_frame(tmp_path / "a.pgm")
    b = load_frame(tmp_path / "b.ppm")
    assert a.channels == 1 and a.data[:, :, 0].tolist() == [[0, 1, 2], [3, 4, 5]]
    assert b.channels == 3 and b.data.reshape(-1).tolist() == list(range(6))


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_frame(tmp_path / "nope.png")


def test_load_truncated_file(tmp_path):
    Image.fromarray(np.zeros((32, 32, 3), np.uint8)).save(tmp_path / "t.png")
    raw = (tmp_path / "t.png").read_bytes()
    (tmp_path / "t.png").write_bytes(raw[: len(raw) // 2])
    with pytest.raises(FormatError):
        load_frame(tmp_path / "t.png")
    (tmp_path / "junk.png").write_bytes(b"not an image")
    with pytest.raises(FormatError):
        load_frame(tmp_path / "junk.png")


def test_frame_file_ordering(tmp_path):
    for name in ("b.png", "a.ppm", "a.png", "c.txt"):
        (tmp_path / name).write_bytes(b"")
    assert [p.name for p in list_frame_files(tmp_path)] == ["a.png", "a.ppm", "b.png"]


def _result(regions):
    return DensityResult("f", 0.0, tuple(regions))


def test_annotate_nothing_is_identity(tmp_path, rng):
    frame = Frame("f", rng.integers(0, 256, (6, 7, 3), dtype=np.uint8))
    save_annotated(frame, _result([]), tmp_path / "o.png")
    assert np.array_equal(load_frame(tmp_path / "o.png").data, frame.data)


def test_annotate_not_capillary_is_identity(tmp_path, rng):
    frame = Frame("f", rng.integers(0, 256, (6, 7, 3), dtype=np.uint8))
    region = RegionResult(BoundingBox(1, 1, 3, 3), "not-capillary", 0.9, np.ones((3, 3), bool))
    save_annotated(frame, _result([region]), tmp_path / "o.png")
    assert np.array_equal(load_frame(tmp_path / "o.png").data, frame.data)


def test_annotate_box_border_is_green(tmp_path):
    frame = Frame("f", np.full((5, 5, 3), 100, np.uint8))
    region = RegionResult(BoundingBox(0, 0, 3, 3), "capillary", 0.9, np.ones((3, 3), bool))
    save_annotated(frame, _result([region]), tmp_path / "o.png")
    out = load_frame(tmp_path / "o.png").data
    green = {(y, x) for y in range(5) for x in range(5) if tuple(out[y, x]) == (0, 255, 0)}
    border = {(y, x) for y in range(3) for x in range(3) if y in (0, 2) or x in (0, 2)}
    assert len(border) == 8
    assert green == border
    assert tuple(out[1, 1]) == (100, 100, 100)


def test_contour_pixels():
    mask = np.zeros((5, 5), bool)
    mask[1:4, 1:4] = True
    c = contour_pixels(mask)
    assert c.sum() == 8 and not c[2, 2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_annotated_differs_only_at_drawn_pixels(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    h, w = 12, 15
    frame = Frame("f", rng.integers(0, 256, (h, w, 3), dtype=np.uint8))
    regions = []
    drawn = np.zeros((h, w), bool)
    for _ in range(3):
        bw, bh = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        x, y = int(rng.integers(0, w - bw + 1)), int(rng.integers(0, h - bh + 1))
        mask = rng.random((bh, bw)) < 0.6
        label = "capillary" if rng.random() < 0.6 else "not-capillary"
        regions.append(RegionResult(BoundingBox(x, y, bw, bh), label, 0.7, mask))
        if label == "capillary":
            drawn[y:y + bh, x:x + bw] |= contour_pixels(mask)
            drawn[y, x:x + bw] = drawn[y + bh - 1, x:x + bw] = True
            drawn[y:y + bh, x] = drawn[y:y + bh, x + bw - 1] = True
    path = tmp_path_factory.mktemp("ann") / "o.png"
    save_annotated(frame, _result(regions), path)
    out = load_frame(path).data
    changed = (out != frame.data).any(axis=2)
    assert not (changed & ~drawn).any()


def test_density_result_json_round_trip():
    r = DensityResult("f", 0.25, (RegionResult(BoundingBox(1, 2, 3, 4), "capillary", 0.5),), 0.125)
    back = DensityResult.from_dict(r.to_dict())
    assert back.to_dict() == r.to_dict()
    assert set(r.to_dict()) == {"frame_id", "density", "elapsed_s", "regions"}
    assert set(r.to_dict()["regions"][0]) == {"x", "y", "w", "h", "label", "confidence"}
