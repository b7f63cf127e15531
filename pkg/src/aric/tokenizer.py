"""Patch vector-quantization tokenizer.

A codebook of ``V`` patch vectors is learned with k-means; an image is cut into
``p x p`` patches and each patch becomes the index of its nearest codeword.
The multi-scale mode builds a coarse-to-fine residual pyramid over the same
codebook, whose entry 0 is reserved for the zero vector.
"""

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numba
import numpy as np

from .errors import CorruptionError, DimensionError, FormatError, MagicError, TrainingError
from .errors import TruncationError, VersionError
from .image_io import Image
from .rng import SplitMix64

MAX_CODEBOOK = 1 << 18
CODEBOOK_MAGIC = b"ARCB"
CODEBOOK_VERSION = 1
_CB_HEADER = struct.Struct("<4sBIIBBB")

# rows x codewords per distance block; bounds the temporary at 128 MiB
_BLOCK_ELEMS = 1 << 24


@numba.njit(cache=True)
def _fnv1a64(buf):
    h = np.uint64(0xCBF29CE484222325)
    prime = np.uint64(0x100000001B3)
    for b in buf:
        h = (h ^ np.uint64(b)) * prime
    return h


def fnv1a64(data):
    """64-bit FNV-1a over a bytes-like object."""
    return int(_fnv1a64(np.frombuffer(bytes(data), dtype=np.uint8)))


@dataclass(eq=False)
class Codebook:
    vectors: np.ndarray
    patch_size: int
    channels: int
    zero_reserved: bool = False

    def __post_init__(self):
        # stored as float32 on disk; keep the in-memory copy exactly representable
        vec = np.asarray(self.vectors, dtype=np.float32).astype(np.float64)
        if vec.ndim != 2:
            raise DimensionError("codebook vectors must be a V x d matrix")
        V, d = vec.shape
        if not 2 <= V <= MAX_CODEBOOK:
            raise DimensionError(f"codebook size {V} outside [2, {MAX_CODEBOOK}]")
        if d != self.patch_size**2 * self.channels:
            raise DimensionError(
                f"vector dim {d} != patch_size^2 * channels = {self.patch_size**2 * self.channels}"
            )
        if not np.all(np.isfinite(vec)):
            raise DimensionError("codebook vectors must be finite")
        if self.zero_reserved and np.any(vec[0] != 0.0):
            raise DimensionError("zero-reserved codebook needs vectors[0] == 0")
        vec.setflags(write=False)
        self.vectors = vec

    @property
    def V(self):
        return self.vectors.shape[0]

    @property
    def d(self):
        return self.vectors.shape[1]

    @cached_property
    def payload(self):
        return self.vectors.astype("<f4").tobytes()

    @cached_property
    def id(self):
        return fnv1a64(self.payload)

    @cached_property
    def sq_norms(self):
        return (self.vectors * self.vectors).sum(axis=1)

    def to_bytes(self):
        head = _CB_HEADER.pack(
            CODEBOOK_MAGIC, CODEBOOK_VERSION, self.V, self.d,
            self.patch_size, self.channels, 1 if self.zero_reserved else 0,
        )
        return head + self.payload

    @classmethod
    def from_bytes(cls, data):
        data = bytes(data)
        if len(data) < _CB_HEADER.size:
            raise TruncationError("codebook header truncated", offset=len(data))
        magic, version, V, d, p, ch, flags = _CB_HEADER.unpack_from(data)
        if magic != CODEBOOK_MAGIC:
            raise MagicError(f"bad codebook magic {magic!r}", offset=0)
        if version != CODEBOOK_VERSION:
            raise VersionError(f"unsupported codebook version {version}", offset=4)
        if not 2 <= V <= MAX_CODEBOOK or ch == 0 or p == 0 or d != p * p * ch:
            raise FormatError(f"inconsistent codebook geometry V={V} d={d} p={p} c={ch}", offset=5)
        need = _CB_HEADER.size + 4 * V * d
        if len(data) < need:
            raise TruncationError("codebook payload truncated", offset=len(data))
        vec = np.frombuffer(data, dtype="<f4", count=V * d, offset=_CB_HEADER.size)
        try:
            return cls(vec.reshape(V, d), p, ch, bool(flags & 1))
        except DimensionError as exc:
            raise FormatError(str(exc)) from exc

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes())


@dataclass
class TokenGrid:
    """Token ids, shape ``(th, tw)``, row-major."""

    tokens: np.ndarray

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        if self.tokens.ndim != 2:
            raise DimensionError("token grid must be 2-D")

    @property
    def tw(self):
        return self.tokens.shape[1]

    @property
    def th(self):
        return self.tokens.shape[0]

    @property
    def resolution(self):
        return (self.tw, self.th)

    def __eq__(self, other):
        return isinstance(other, TokenGrid) and np.array_equal(self.tokens, other.tokens)


@dataclass
class ScalePyramid:
    scales: list = field(default_factory=list)

    @property
    def resolutions(self):
        return [g.resolution for g in self.scales]

    @property
    def n_tokens(self):
        return sum(g.tokens.size for g in self.scales)

    def __eq__(self, other):
        return (
            isinstance(other, ScalePyramid)
            and len(self.scales) == len(other.scales)
            and all(a == b for a, b in zip(self.scales, other.scales))
        )


# -- features ---------------------------------------------------------------

def extract_features(img, patch_size):
    """Grid ``(h/p, w/p, p*p*c)`` of flattened patches."""
    p = patch_size
    h, w, c = img.pixels.shape
    if h % p or w % p:
        raise DimensionError(f"{w}x{h} image not divisible by patch size {p}")
    th, tw = h // p, w // p
    feats = img.pixels.reshape(th, p, tw, p, c).transpose(0, 2, 1, 3, 4)
    return np.ascontiguousarray(feats.reshape(th, tw, p * p * c))


def assemble_patches(feats, patch_size, channels):
    """Inverse of :func:`extract_features` (no clamping)."""
    th, tw, _ = feats.shape
    p = patch_size
    px = feats.reshape(th, tw, p, p, channels).transpose(0, 2, 1, 3, 4)
    return px.reshape(th * p, tw * p, channels)


# -- nearest codeword ---------------------------------------------------------

def _exact_sqdist(x, c):
    diff = x - c
    return (diff * diff).sum(axis=-1)


def nearest(points, vectors, vec_sq_norms=None):
    """Index of the nearest row of ``vectors`` for each row of ``points``.

    Returns ``(ids, sqdist)``. Distances are screened with the expanded
    ``|c|^2 - 2 x.c`` form, then every codeword within rounding slack of the
    best is re-scored with the direct sum of squared differences; exact ties go
    to the lowest index.
    """
    points = np.asarray(points, dtype=np.float64)
    vectors = np.asarray(vectors, dtype=np.float64)
    n = points.shape[0]
    V = vectors.shape[0]
    if points.shape[1] != vectors.shape[1]:
        raise DimensionError(f"feature dim {points.shape[1]} != codebook dim {vectors.shape[1]}")
    if vec_sq_norms is None:
        vec_sq_norms = (vectors * vectors).sum(axis=1)
    pt_sq = (points * points).sum(axis=1)
    ids = np.empty(n, dtype=np.int64)
    max_cn = float(vec_sq_norms.max()) if V else 0.0
    step = max(1, _BLOCK_ELEMS // max(V, 1))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        approx = vec_sq_norms[None, :] - 2.0 * (points[lo:hi] @ vectors.T)
        best = approx.min(axis=1)
        tol = 1e-9 * (pt_sq[lo:hi] + max_cn) + 1e-300
        cand = approx <= (best + tol)[:, None]
        ncand = cand.sum(axis=1)
        block_ids = approx.argmin(axis=1)
        multi = np.nonzero(ncand > 1)[0]
        if multi.size:
            rows, cols = np.nonzero(cand[multi])
            exact = _exact_sqdist(points[lo + multi[rows]], vectors[cols])
            order = np.lexsort((cols, exact, rows))
            rows_s = rows[order]
            first = np.ones(rows_s.size, dtype=bool)
            first[1:] = rows_s[1:] != rows_s[:-1]
            block_ids[multi[rows_s[first]]] = cols[order][first]
        ids[lo:hi] = block_ids
    return ids, _exact_sqdist(points, vectors[ids])


# -- k-means ----------------------------------------------------------------

@dataclass
class KMeansResult:
    codebook: Codebook
    labels: np.ndarray
    history: list  # total squared error after every assignment step
    iterations: int


def _kmeans_pp(X, k, rng):
    n = X.shape[0]
    x_sq = (X * X).sum(axis=1)
    centers = np.empty((k, X.shape[1]))
    first = rng.next_below(n)
    centers[0] = X[first]
    d2 = np.maximum(x_sq - 2.0 * (X @ X[first]) + x_sq[first], 0.0)
    d2[first] = 0.0
    for j in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            target = rng.next_double() * total
            idx = int(np.searchsorted(np.cumsum(d2), target, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = rng.next_below(n)
        centers[j] = X[idx]
        d_new = np.maximum(x_sq - 2.0 * (X @ X[idx]) + x_sq[idx], 0.0)
        d_new[idx] = 0.0
        np.minimum(d2, d_new, out=d2)
    return centers


def _repair_empty(X, centers, labels, dist, k):
    counts = np.bincount(labels, minlength=k)
    for c in np.nonzero(counts == 0)[0]:
        # farthest point among clusters that can spare one; lowest index on ties
        donor_ok = counts[labels] >= 2
        cand = np.where(donor_ok, dist, -1.0)
        idx = int(np.argmax(cand))
        counts[labels[idx]] -= 1
        counts[c] += 1
        labels[idx] = c
        centers[c] = X[idx]
        dist[idx] = 0.0


def _cluster_means(X, labels, k):
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    starts = np.searchsorted(sorted_labels, np.arange(k))
    sums = np.add.reduceat(X[order], starts, axis=0)
    counts = np.bincount(labels, minlength=k)
    return sums / counts[:, None]


def kmeans(features, k, seed, max_iter=50, rel_tol=1e-4):
    """Lloyd's algorithm with k-means++ seeding from a splitmix64 stream."""
    X = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
    if X.ndim != 2:
        X = X.reshape(-1, X.shape[-1])
    if k < 1 or X.shape[0] < k:
        raise TrainingError(f"need at least {k} training vectors, got {X.shape[0]}")
    rng = SplitMix64(seed)
    centers = _kmeans_pp(X, k, rng)
    labels, dist = nearest(X, centers)
    _repair_empty(X, centers, labels, dist, k)
    history = [float(dist.sum())]
    iterations = 0
    for _ in range(max_iter):
        prev = history[-1]
        if prev == 0.0:
            break
        centers = _cluster_means(X, labels, k)
        labels, dist = nearest(X, centers)
        _repair_empty(X, centers, labels, dist, k)
        history.append(float(dist.sum()))
        iterations += 1
        if (prev - history[-1]) < rel_tol * prev:
            break
    return centers, labels, history, iterations


def train_codebook(features, V, seed, patch_size=None, channels=None, reserve_zero=False):
    """Train a ``V``-entry codebook; with ``reserve_zero`` entry 0 is the zero vector
    and only ``V - 1`` centroids are learned.

    ``features`` is an ``(n, d)`` array or a feature map; patch geometry defaults
    to a single channel of ``d`` samples when not given.
    """
    if V < 2:
        raise TrainingError("codebook size must be at least 2")
    X = np.asarray(features, dtype=np.float64)
    X = X.reshape(-1, X.shape[-1])
    d = X.shape[1]
    if patch_size is None:
        patch_size, channels = _infer_geometry(d, channels)
    k = V - 1 if reserve_zero else V
    centers, labels, history, iterations = kmeans(X, k, seed)
    if reserve_zero:
        centers = np.vstack([np.zeros((1, d)), centers])
        labels = labels + 1
    cb = Codebook(centers, patch_size, channels, zero_reserved=reserve_zero)
    return KMeansResult(cb, labels, history, iterations)


def _infer_geometry(d, channels):
    for ch in ([channels] if channels else [3, 1]):
        p = int(round((d / ch) ** 0.5))
        if p * p * ch == d:
            return p, ch
    return 1, d


# -- single scale -------------------------------------------------------------

def _check_dim(feats, cb):
    if feats.shape[-1] != cb.d:
        raise DimensionError(f"feature dim {feats.shape[-1]} != codebook dim {cb.d}")


def tokenize(feats, cb):
    feats = np.asarray(feats, dtype=np.float64)
    _check_dim(feats, cb)
    th, tw, d = feats.shape
    ids, _ = nearest(feats.reshape(-1, d), cb.vectors, cb.sq_norms)
    return TokenGrid(ids.reshape(th, tw))


def _lookup(tokens, cb):
    tokens = np.asarray(tokens)
    if tokens.size and (tokens.min() < 0 or tokens.max() >= cb.V):
        raise CorruptionError(f"token id outside [0, {cb.V})")
    return cb.vectors[tokens]


def detokenize(grid, cb):
    feats = _lookup(grid.tokens, cb)
    px = assemble_patches(feats, cb.patch_size, cb.channels)
    return Image(np.clip(px, 0.0, 1.0))


# -- multi scale --------------------------------------------------------------

def default_resolutions(tw, th, max_scales=4):
    """Halve the token grid while both sides stay even, up to ``max_scales`` levels."""
    res = [(tw, th)]
    while len(res) < max_scales and res[0][0] % 2 == 0 and res[0][1] % 2 == 0:
        res.insert(0, (res[0][0] // 2, res[0][1] // 2))
    return res


def check_resolutions(resolutions, tw, th):
    """Normalize to ``(tw_k, th_k)`` tuples and validate; returns the list of factors."""
    res = [(r, r) if isinstance(r, (int, np.integer)) else tuple(int(v) for v in r) for r in resolutions]
    if not res:
        raise DimensionError("empty resolution list")
    if res[-1] != (tw, th):
        raise DimensionError(f"final resolution {res[-1]} != token grid {(tw, th)}")
    factors = []
    for rw, rh in res:
        if rw <= 0 or rh <= 0 or tw % rw or th % rh or tw // rw != th // rh:
            raise DimensionError(f"resolution {(rw, rh)} does not evenly divide {(tw, th)}")
        factors.append(tw // rw)
    if any(b >= a for a, b in zip(factors, factors[1:])):
        raise DimensionError("resolutions must be strictly increasing")
    return res, factors


def _pool(x, f):
    if f == 1:
        return x
    th, tw, d = x.shape
    return x.reshape(th // f, f, tw // f, f, d).mean(axis=(1, 3))


def _upsample(x, f):
    if f == 1:
        return x
    return np.repeat(np.repeat(x, f, axis=0), f, axis=1)


def _require_zero(cb):
    if not cb.zero_reserved:
        raise DimensionError("multi-scale tokenization needs a zero-reserved codebook")


def tokenize_multiscale(feats, cb, resolutions, return_partials=False):
    """Residual quantization over a coarse-to-fine list of grid resolutions.

    With ``return_partials`` also returns the accumulated reconstruction after
    each scale (before clamping).
    """
    _require_zero(cb)
    feats = np.asarray(feats, dtype=np.float64)
    _check_dim(feats, cb)
    th, tw, d = feats.shape
    res, factors = check_resolutions(resolutions, tw, th)
    acc = np.zeros_like(feats)
    scales, partials = [], []
    for (rw, rh), f in zip(res, factors):
        pooled = _pool(feats - acc, f)
        ids, _ = nearest(pooled.reshape(-1, d), cb.vectors, cb.sq_norms)
        ids = ids.reshape(rh, rw)
        scales.append(TokenGrid(ids))
        acc = acc + _upsample(cb.vectors[ids], f)
        partials.append(acc)
    pyr = ScalePyramid(scales)
    return (pyr, partials) if return_partials else pyr


def reconstruct_multiscale(pyr, cb):
    """Accumulated feature map of a pyramid, before clamping."""
    if not pyr.scales:
        raise DimensionError("empty pyramid")
    tw, th = pyr.scales[-1].resolution
    _, factors = check_resolutions(pyr.resolutions, tw, th)
    acc = np.zeros((th, tw, cb.d))
    for grid, f in zip(pyr.scales, factors):
        acc = acc + _upsample(_lookup(grid.tokens, cb), f)
    return acc


def detokenize_multiscale(pyr, cb):
    acc = reconstruct_multiscale(pyr, cb)
    return Image(np.clip(assemble_patches(acc, cb.patch_size, cb.channels), 0.0, 1.0))


def multiscale_training_vectors(feats, resolutions):
    """Unquantized residual detail at every scale, for training a pyramid codebook.

    Scale 1 contributes its pooled features; scale k contributes the pooled
    difference between the features and the scale k-1 approximation.
    """
    feats = np.asarray(feats, dtype=np.float64)
    th, tw, d = feats.shape
    _, factors = check_resolutions(resolutions, tw, th)
    out = []
    approx = np.zeros_like(feats)
    for f in factors:
        out.append(_pool(feats - approx, f).reshape(-1, d))
        approx = _upsample(_pool(feats, f), f)
    return np.concatenate(out, axis=0)
