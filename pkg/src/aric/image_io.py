"""Binary Netpbm (P5/P6, maxval 255) I/O and the unit-interval image type."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, TruncationError

_WHITESPACE = b" \t\n\r\x0b\x0c"


@dataclass
class Image:
    """Pixels are float64 in [0, 1], shape ``(height, width, channels)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise DimensionError(f"expected (h, w, 1|3) pixels, got shape {px.shape}")
        self.pixels = px

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def channels(self):
        return self.pixels.shape[2]

    @classmethod
    def from_uint8(cls, data):
        return cls(np.asarray(data, dtype=np.uint8).astype(np.float64) / 255.0)

    def to_uint8(self):
        # round half away from zero; negative values are clipped first anyway
        scaled = np.clip(self.pixels, 0.0, 1.0) * 255.0
        return np.floor(scaled + 0.5).astype(np.uint8)

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)


def _next_token(data, pos):
    """Return (token, position after token), skipping whitespace and # comments."""
    n = len(data)
    while pos < n:
        c = data[pos]
        if c == 0x23:  # '#'
            while pos < n and data[pos] not in (0x0A, 0x0D):
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in _WHITESPACE and data[pos] != 0x23:
        pos += 1
    if start == pos:
        raise TruncationError("unexpected end of header", offset=start)
    return data[start:pos], pos


def _header_int(data, pos, what):
    tok, end = _next_token(data, pos)
    if not tok.isdigit():
        raise FormatError(f"bad {what} {tok!r}", offset=end - len(tok))
    return int(tok), end


def read_ppm(data):
    """Parse a binary P5 (gray) or P6 (RGB) stream with maxval 255."""
    data = bytes(data)
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported magic {magic!r}", offset=0)
    channels = 3 if magic == b"P6" else 1
    width, pos = _header_int(data, 2, "width")
    height, pos = _header_int(data, pos, "height")
    maxval, pos = _header_int(data, pos, "maxval")
    if maxval != 255:
        raise FormatError(f"maxval {maxval} not supported (only 255)", offset=pos)
    if width == 0 or height == 0:
        raise FormatError("zero image dimension", offset=pos)
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise FormatError("missing whitespace after maxval", offset=pos)
    pos += 1
    need = width * height * channels
    if len(data) - pos < need:
        raise TruncationError(
            f"payload has {len(data) - pos} bytes, expected {need}", offset=len(data)
        )
    raw = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    return Image.from_uint8(raw.reshape(height, width, channels))


def write_ppm(img):
    """Canonical output: ``P6\\n<w> <h>\\n255\\n`` (or P5) followed by the samples."""
    magic = b"P6" if img.channels == 3 else b"P5"
    header = magic + b"\n%d %d\n255\n" % (img.width, img.height)
    return header + img.to_uint8().tobytes()


def load_ppm(path):
    return read_ppm(Path(path).read_bytes())


def save_ppm(path, img):
    Path(path).write_bytes(write_ppm(img))


def center_crop(img, w, h):
    if w > img.width or h > img.height or w <= 0 or h <= 0:
        raise DimensionError(f"cannot crop {w}x{h} from {img.width}x{img.height}")
    x0 = (img.width - w) // 2
    y0 = (img.height - h) // 2
    return Image(img.pixels[y0 : y0 + h, x0 : x0 + w].copy())
