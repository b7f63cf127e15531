"""Rate accounting, the compression-ratio decomposition, PSNR and MS-SSIM."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DimensionError

PSNR_CAP = 99.0
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
_WIN = 11
_SIGMA = 1.5
_K1, _K2 = 0.01, 0.03


def bits_per_token(V):
    """``ceil(log2 V)``: size of one token without entropy coding."""
    return max(1, (int(V) - 1).bit_length())


@dataclass
class Ratios:
    raw_bits: int
    token_raw_bits: int
    tokenizer_ratio: float
    payload_bits: int | None = None
    ar_ratio: float | None = None
    overall_ratio: float | None = None


def compression_ratios(width, height, channels, n_tokens, V, payload_bits=None):
    """Raw image bits over token bits (tokenizer), token bits over coded bits
    (AR model) and raw over coded bits (overall)."""
    raw = width * height * channels * 8
    token_raw = n_tokens * bits_per_token(V)
    r = Ratios(raw, token_raw, raw / token_raw)
    if payload_bits is not None:
        if payload_bits <= 0:
            raise ValueError("payload_bits must be positive")
        r.payload_bits = payload_bits
        r.ar_ratio = token_raw / payload_bits
        r.overall_ratio = raw / payload_bits
    return r


@dataclass
class RateReport:
    width: int
    height: int
    channels: int
    n_tokens: int
    V: int
    ideal_bits: float
    payload_bits: int
    header_bits: int
    self_information: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        r = compression_ratios(self.width, self.height, self.channels, self.n_tokens,
                               self.V, self.payload_bits)
        self.raw_bits = r.raw_bits
        self.token_raw_bits = r.token_raw_bits
        self.tokenizer_ratio = r.tokenizer_ratio
        self.ar_ratio = r.ar_ratio
        self.overall_ratio = r.overall_ratio

    @property
    def pixels(self):
        return self.width * self.height

    @property
    def bpp_payload(self):
        return self.payload_bits / self.pixels

    @property
    def bpp_total(self):
        return (self.payload_bits + self.header_bits) / self.pixels

    @property
    def bpp_ideal(self):
        return self.ideal_bits / self.pixels

    def as_dict(self):
        return {
            "width": self.width, "height": self.height, "channels": self.channels,
            "n_tokens": self.n_tokens, "V": self.V,
            "raw_bits": self.raw_bits, "token_raw_bits": self.token_raw_bits,
            "ideal_bits": self.ideal_bits, "payload_bits": self.payload_bits,
            "header_bits": self.header_bits, "bpp_payload": self.bpp_payload,
            "bpp_total": self.bpp_total, "tokenizer_ratio": self.tokenizer_ratio,
            "ar_ratio": self.ar_ratio, "overall_ratio": self.overall_ratio,
        }


def _pixels(img):
    return getattr(img, "pixels", img)


def mse(a, b):
    a, b = _pixels(a), _pixels(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.mean(d * d))


def psnr(a, b):
    """PSNR in dB with peak 1.0, capped at 99 dB."""
    m = mse(a, b)
    if m == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / m))


def gaussian_window(size=_WIN, sigma=_SIGMA):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(x, g):
    h = len(g) // 2
    y = correlate1d(x, g, axis=0, mode="constant")
    y = correlate1d(y, g, axis=1, mode="constant")
    return y[h : x.shape[0] - h, h : x.shape[1] - h]


def _ssim_terms(x, y, g, c1, c2):
    """Mean luminance-contrast-structure and mean contrast-structure."""
    mu_x = _filter_valid(x, g)
    mu_y = _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mu_x * mu_x
    syy = _filter_valid(y * y, g) - mu_y * mu_y
    sxy = _filter_valid(x * y, g) - mu_x * mu_y
    cs = (2.0 * sxy + c2) / (sxx + syy + c2)
    lum = (2.0 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def _pool2(x):
    h, w = x.shape[0] // 2 * 2, x.shape[1] // 2 * 2
    x = x[:h, :w]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def msssim_scales(height, width, max_scales=len(MSSSIM_WEIGHTS)):
    n = 0
    h, w = height, width
    while n < max_scales and min(h, w) >= _WIN:
        n += 1
        h, w = h // 2, w // 2
    return n


def ms_ssim_channel(x, y, data_range=1.0):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = msssim_scales(*x.shape)
    if n == 0:
        raise DimensionError(f"image {x.shape[1]}x{x.shape[0]} too small for an {_WIN}-tap window")
    weights = np.asarray(MSSSIM_WEIGHTS[:n])
    weights = weights / weights.sum()
    g = gaussian_window()
    c1 = (_K1 * data_range) ** 2
    c2 = (_K2 * data_range) ** 2
    score = 1.0
    for j in range(n):
        ssim, cs = _ssim_terms(x, y, g, c1, c2)
        term = ssim if j == n - 1 else cs
        # negative similarity is treated as no similarity
        score *= max(term, 0.0) ** weights[j]
        if j < n - 1:
            x, y = _pool2(x), _pool2(y)
    return score


def ms_ssim(a, b):
    """Multi-scale SSIM averaged over channels; uses fewer than 5 scales on
    images smaller than 176 pixels with the weights renormalized."""
    a, b = _pixels(a), _pixels(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        return ms_ssim_channel(a, b)
    return float(np.mean([ms_ssim_channel(a[:, :, c], b[:, :, c]) for c in range(a.shape[2])]))
