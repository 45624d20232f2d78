import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from glasskit import labelkit
from glasskit.errors import InvalidInputError

from oracles import brute_force_squared_edt

masks_16 = arrays(np.uint8, st.tuples(st.integers(1, 16), st.integers(1, 16)), elements=st.integers(0, 1))


def centered_square_mask():
    m = np.zeros((5, 5), dtype=np.uint8)
    m[1:4, 1:4] = 1
    return m


def test_rejects_empty_and_nonbinary():
    with pytest.raises(InvalidInputError):
        labelkit.euclidean_distance_transform(np.zeros((0, 4), dtype=np.uint8))
    with pytest.raises(InvalidInputError):
        labelkit.euclidean_distance_transform(np.full((3, 3), 2, dtype=np.uint8))


def test_all_zero_mask_gives_zero_map():
    out = labelkit.euclidean_distance_transform(np.zeros((4, 4), dtype=np.uint8))
    assert (out == 0).all()


def test_centered_square_ring_and_center():
    out = labelkit.euclidean_distance_transform(centered_square_mask())
    ring = [(1, 1), (1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2), (3, 3)]
    for y, x in ring:
        assert out[y, x] == 1.0
    assert out[2, 2] == 2.0
    assert (out[0, :] == 0).all() and (out[:, 0] == 0).all()


def test_all_foreground_uses_virtual_frame():
    # expected values frozen from the all-pairs brute force with the virtual
    # background ring: the ring is one step from every border pixel, two from
    # the center
    mask = np.ones((3, 3), dtype=np.uint8)
    out = labelkit.euclidean_distance_transform(mask)
    np.testing.assert_array_equal(brute_force_squared_edt(mask), [[1, 1, 1], [1, 4, 1], [1, 1, 1]])
    np.testing.assert_array_equal(out, [[1, 1, 1], [1, 2, 1], [1, 1, 1]])
    assert np.isfinite(out).all()


@settings(max_examples=120, deadline=None)
@given(masks_16)
def test_squared_edt_matches_brute_force(mask):
    got = labelkit.squared_distance_transform(mask)
    want = brute_force_squared_edt(mask)
    assert got.dtype == np.int64
    np.testing.assert_array_equal(got, want)


def test_normalize_two_point_map():
    d = np.array([[0.0, 2.0], [2.0, 0.0]])
    np.testing.assert_allclose(labelkit.normalize_distance_map(d), d / 2.0)


def test_normalize_constant_map_is_zero():
    assert (labelkit.normalize_distance_map(np.zeros((3, 3))) == 0).all()
    assert (labelkit.normalize_distance_map(np.full((3, 3), 7.0)) == 0).all()


def test_normalize_centered_square():
    norm = labelkit.normalize_distance_map(labelkit.euclidean_distance_transform(centered_square_mask()))
    assert norm[1, 1] == 0.5
    assert norm[2, 2] == 1.0


def test_decouple_empty_mask():
    labels = labelkit.decouple(np.zeros((4, 6), dtype=np.uint8))
    assert (labels.interior == 0).all()
    assert (labels.boundary == 0).all()


def test_decouple_centered_square_values():
    labels = labelkit.decouple(centered_square_mask())
    assert labels.interior[2, 2] == 1.0
    assert labels.interior[1, 2] == 0.5
    assert labels.boundary[2, 2] == 0.0
    assert labels.boundary[1, 2] == 0.5


@settings(max_examples=100, deadline=None)
@given(masks_16)
def test_decouple_recomposes_mask(mask):
    labels = labelkit.decouple(mask)
    recomposed = labels.interior + labels.boundary
    assert np.abs(recomposed - mask).max() <= 1e-6


@settings(max_examples=100, deadline=None)
@given(masks_16)
def test_decouple_background_purity(mask):
    labels = labelkit.decouple(mask)
    bg = mask == 0
    assert (labels.interior[bg] == 0).all()
    assert (labels.boundary[bg] == 0).all()


@settings(max_examples=60, deadline=None)
@given(
    st.integers(3, 12),
    st.integers(3, 12),
    st.data(),
)
def test_interior_peaks_at_rectangle_center(h, w, data):
    r0 = data.draw(st.integers(0, h - 1))
    r1 = data.draw(st.integers(r0, h - 1))
    c0 = data.draw(st.integers(0, w - 1))
    c1 = data.draw(st.integers(c0, w - 1))
    mask = np.zeros((h, w), dtype=np.uint8)
    mask[r0 : r1 + 1, c0 : c1 + 1] = 1
    interior = labelkit.decouple(mask).interior
    centers = {(r0 + r1) // 2, (r0 + r1 + 1) // 2}
    centers_c = {(c0 + c1) // 2, (c0 + c1 + 1) // 2}
    center_max = max(interior[y, x] for y in centers for x in centers_c)
    assert center_max == interior.max()


@settings(max_examples=50, deadline=None)
@given(masks_16)
def test_decouple_commutes_with_horizontal_flip(mask):
    flipped = labelkit.decouple(mask[:, ::-1])
    straight = labelkit.decouple(mask)
    np.testing.assert_array_equal(flipped.interior, straight.interior[:, ::-1])
    np.testing.assert_array_equal(flipped.boundary, straight.boundary[:, ::-1])


def test_float_sidecar_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    values = rng.random((7, 11), dtype=np.float32)
    path = tmp_path / "map.gldt"
    labelkit.write_float_map(path, values)
    back = labelkit.read_float_map(path)
    np.testing.assert_array_equal(back, values)


def test_float_sidecar_rejects_garbage(tmp_path):
    path = tmp_path / "bad.gldt"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(InvalidInputError):
        labelkit.read_float_map(path)
