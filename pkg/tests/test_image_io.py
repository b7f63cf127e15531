import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aric import Image, center_crop, read_ppm, write_ppm
from aric.errors import DimensionError, FormatError, TruncationError


def test_single_black_pixel():
    img = read_ppm(b"P6 1 1 255\n" + bytes([0, 0, 0]))
    assert (img.width, img.height, img.channels) == (1, 1, 3)
    assert img.pixels.tolist() == [[[0.0, 0.0, 0.0]]]


def test_extremes():
    img = read_ppm(b"P6\n2 1\n255\n" + bytes([255, 255, 255, 0, 0, 0]))
    assert img.pixels[0].tolist() == [[1, 1, 1], [0, 0, 0]]


def test_gray_write():
    assert write_ppm(Image(np.zeros((1, 1)))) == b"P5\n1 1\n255\n\x00"


def test_half_rounds_up():
    assert write_ppm(Image(np.full((1, 1), 0.5)))[-1] == 128


def test_samples_map_to_k_over_255():
    img = read_ppm(b"P5\n256 1\n255\n" + bytes(range(256)))
    assert np.array_equal(img.pixels.ravel(), np.arange(256) / 255.0)


def _messy_header(rng, magic, w, h):
    """Valid header with random whitespace runs and comments between fields."""
    parts = [magic]
    for field in (b"%d" % w, b"%d" % h, b"255"):
        sep = b""
        for _ in range(rng.integers(1, 4)):
            sep += rng.choice([b" ", b"\t", b"\n", b"\r\n", b"\n# note 1 2 3\n", b" #x\n"])
        parts.append(sep + field)
    return b"".join(parts) + b"\n"


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9), st.booleans(), st.integers(0, 2**32 - 1))
def test_canonical_round_trip(w, h, rgb, seed):
    rng = np.random.default_rng(seed)
    c = 3 if rgb else 1
    magic = b"P6" if rgb else b"P5"
    samples = rng.integers(0, 256, w * h * c, dtype=np.uint8).tobytes()
    f = _messy_header(rng, magic, w, h) + samples
    canonical = magic + b"\n%d %d\n255\n" % (w, h) + samples
    img = read_ppm(f)
    assert write_ppm(img) == canonical
    assert read_ppm(write_ppm(img)) == img


def test_random_image_round_trip():
    rng = np.random.default_rng(0)
    raw = rng.integers(0, 256, (17, 23, 3), dtype=np.uint8)
    img = Image.from_uint8(raw)
    assert np.array_equal(read_ppm(write_ppm(img)).to_uint8(), raw)


def test_quantization_is_round_half_up():
    v = np.array([0.0, 0.2, 0.5, 1 / 510, 0.999, 1.0, -0.1, 1.3])
    expected = [min(255, max(0, int(np.floor(min(max(x, 0), 1) * 255 + 0.5)))) for x in v]
    assert Image(v.reshape(1, -1)).to_uint8().ravel().tolist() == expected


@pytest.mark.parametrize("data,exc,offset", [
    (b"P3\n1 1\n255\n\x00\x00\x00", FormatError, 0),
    (b"P6\n1 1\n65535\n\x00\x00\x00", FormatError, None),
    (b"P6\n2 2\n255\n\x00\x00\x00", TruncationError, None),
    (b"P6\n2", TruncationError, None),
    (b"P6\nx 2\n255\n", FormatError, 3),
])
def test_parse_errors(data, exc, offset):
    with pytest.raises(exc) as info:
        read_ppm(data)
    assert "byte offset" in str(info.value)
    if offset is not None:
        assert info.value.offset == offset


def test_crop_identity_and_offsets():
    px = np.arange(16, dtype=float).reshape(4, 4) / 16
    img = Image(px)
    assert center_crop(img, 4, 4) == img
    assert np.array_equal(center_crop(img, 2, 2).pixels[:, :, 0], px[1:3, 1:3])
    wide = Image(np.arange(24, dtype=float).reshape(4, 6) / 24)
    got = center_crop(wide, 3, 3).pixels[:, :, 0]
    assert np.array_equal(got, wide.pixels[0:3, 1:4, 0])  # col offset 1, row offset 0


def test_crop_too_large():
    with pytest.raises(DimensionError):
        center_crop(Image(np.zeros((2, 2))), 3, 1)
