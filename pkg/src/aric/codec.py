"""Image codec: VQ tokens entropy-coded with an adaptive next-token model.

Mode 0 codes one token grid in raster order. Mode 1 codes a residual pyramid
scale by scale, coarse to fine, raster order inside each scale; every token
of scale k > 1 has a parent, the co-located token of scale k - 1.
"""

from dataclasses import dataclass

import numpy as np

from . import _core
from .bitstream import Header, check_codebook, parse_stream, write_stream
from .errors import CorruptionError, DimensionError, FormatError, UsageError
from .image_io import Image, center_crop
from .metrics import RateReport
from .prob_model import MODEL_IDS, PPMModel, make_model
from .range_coder import self_information
from .tokenizer import (ScalePyramid, TokenGrid, check_resolutions, default_resolutions, detokenize,
                        detokenize_multiscale, extract_features, tokenize, tokenize_multiscale)

MAX_TOKENS = 1 << 24


@dataclass
class Schedule:
    """Coding order over all tokens plus the step index of each neighbour (-1 if none)."""

    resolutions: list  # (tw, th) per scale, coarse to fine
    north: np.ndarray
    west: np.ndarray
    parent: np.ndarray
    scale_end: np.ndarray  # True on the last step of every scale

    @property
    def n(self):
        return self.north.size

    @property
    def offsets(self):
        sizes = [tw * th for tw, th in self.resolutions]
        return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


def make_schedule(resolutions):
    north, west, parent, ends = [], [], [], []
    offset = 0
    prev = None
    for tw, th in resolutions:
        y, x = np.divmod(np.arange(tw * th, dtype=np.int64), tw)
        idx = offset + y * tw + x
        north.append(np.where(y > 0, idx - tw, -1))
        west.append(np.where(x > 0, idx - 1, -1))
        if prev is None:
            parent.append(np.full(tw * th, -1, dtype=np.int64))
        else:
            ptw, pth, poff = prev
            parent.append(poff + (y * pth // th) * ptw + x * ptw // tw)
        end = np.zeros(tw * th, dtype=bool)
        end[-1] = True
        ends.append(end)
        prev = (tw, th, offset)
        offset += tw * th
    cat = np.concatenate
    return Schedule([tuple(r) for r in resolutions], cat(north), cat(west), cat(parent), cat(ends))


@dataclass
class Trace:
    """What the coder saw at every step; equal on both ends of a correct round trip."""

    freqs: np.ndarray  # frequency of the coded symbol
    cums: np.ndarray
    keys: np.ndarray  # (n, 3) context keys passed to predict, -1 if unused
    update_order: np.ndarray  # step indices in the order updates were applied

    def __eq__(self, other):
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("freqs", "cums", "keys", "update_order"))


def _wiring(model, sched):
    if model.kind == "raster":
        return True, False, sched.north, sched.west, sched.west
    if model.kind == "parent_west":
        return True, False, sched.parent, sched.west, sched.parent
    if model.kind == "parent":
        return False, True, sched.parent, sched.parent, sched.parent
    return False, False, sched.north, sched.west, sched.west


def run_coder(op, tokens, V, model, sched, payload=None, seed=0, temperature=1.0):
    """Drive one job through the compiled loop. ``op`` is "encode", "decode" or
    "sample"; returns ``(tokens, payload_bytes, trace)``."""
    n = sched.n
    adaptive = getattr(model, "adaptive", False)
    state_model = model if adaptive else PPMModel(V)
    if adaptive:
        model.reserve(n)
    use_o2, deferred, o2a, o2b, o1 = _wiring(model, sched)
    code = {"encode": 0, "decode": 1, "sample": 2}[op]
    if code == 0:
        tokens = np.ascontiguousarray(tokens, dtype=np.int64)
        if tokens.size != n:
            raise DimensionError(f"{tokens.size} tokens for a schedule of {n}")
        if n and (tokens.min() < 0 or tokens.max() >= V):
            raise UsageError(f"token ids must lie in [0, {V})")
        buf = np.zeros(3 * n + 16, dtype=np.uint8)
    else:
        tokens = np.zeros(n, dtype=np.int64)
        buf = np.frombuffer(bytes(payload or b""), dtype=np.uint8).copy() if code == 1 else np.zeros(0, np.uint8)
    cst = np.array([0, _core.RANGE_INIT, 0], dtype=np.int64)
    rng_state = np.array([seed & ((1 << 64) - 1)], dtype=np.uint64)
    freq_log = np.zeros(n, dtype=np.int64)
    cum_log = np.zeros(n, dtype=np.int64)
    key_log = np.full((n, 3), -1, dtype=np.int64)
    update_log = np.full(n, -1, dtype=np.int64)
    status = _core.run_job(
        code, tokens, V, adaptive, use_o2, deferred, o2a, o2b, o1, sched.scale_end,
        *state_model.state(), buf, cst, rng_state, 1.0 / temperature,
        freq_log, cum_log, key_log, update_log,
    )
    if status == _core.EXHAUSTED:
        raise CorruptionError("payload exhausted before all tokens were decoded", offset=int(cst[2]))
    if status == _core.INVALID:
        raise CorruptionError("coder state out of range", offset=int(cst[2]))
    if status == _core.TRAILER:
        raise CorruptionError("bad stream terminator", offset=int(cst[2]))
    n_upd = int((update_log >= 0).sum())
    trace = Trace(freq_log, cum_log, key_log, update_log[:n_upd])
    out = bytes(buf[: cst[2]]) if code == 0 else None
    return tokens, out, trace


def _flatten(tokens):
    if isinstance(tokens, ScalePyramid):
        return np.concatenate([g.tokens.ravel() for g in tokens.scales])
    return tokens.tokens.ravel()


def _unflatten(flat, resolutions, mode):
    grids = []
    off = 0
    for tw, th in resolutions:
        grids.append(TokenGrid(flat[off : off + tw * th].reshape(th, tw)))
        off += tw * th
    return ScalePyramid(grids) if mode == 1 else grids[0]


def divisible_crop(img, patch_size):
    w = img.width // patch_size * patch_size
    h = img.height // patch_size * patch_size
    if w == 0 or h == 0:
        raise DimensionError(f"{img.width}x{img.height} image smaller than one {patch_size}px patch")
    if (w, h) == (img.width, img.height):
        return img
    return center_crop(img, w, h)


@dataclass
class Encoded:
    data: bytes
    report: RateReport
    tokens: object  # TokenGrid or ScalePyramid
    trace: Trace
    image: Image  # the (possibly cropped) input that was coded


def tokenize_image(img, cb, mode=0, resolutions=None, num_scales=4):
    """Crop to a patch multiple and tokenize; returns ``(cropped, tokens)``."""
    if img.channels != cb.channels:
        raise DimensionError(f"{img.channels}-channel image vs {cb.channels}-channel codebook")
    img = divisible_crop(img, cb.patch_size)
    feats = extract_features(img, cb.patch_size)
    if mode == 0:
        return img, tokenize(feats, cb)
    if mode != 1:
        raise UsageError(f"unknown mode {mode}")
    th, tw, _ = feats.shape
    if resolutions is None:
        resolutions = default_resolutions(tw, th, num_scales)
    return img, tokenize_multiscale(feats, cb, resolutions)


def reconstruct(tokens, cb):
    if isinstance(tokens, ScalePyramid):
        return detokenize_multiscale(tokens, cb)
    return detokenize(tokens, cb)


def encode_tokens(tokens, cb, mode, model_id, width, height):
    """Entropy-code an existing grid/pyramid; returns ``(stream, report, trace)``."""
    if model_id not in MODEL_IDS:
        raise UsageError(f"unknown model id {model_id}")
    resolutions = tokens.resolutions if mode == 1 else [tokens.resolution]
    sched = make_schedule(resolutions)
    model = make_model(model_id, cb.V)
    _, payload, trace = run_coder("encode", _flatten(tokens), cb.V, model, sched)
    header = Header(mode, width, height, cb.patch_size, cb.channels, model_id, cb.id,
                    list(resolutions) if mode == 1 else [])
    data = write_stream(header, payload)
    info = self_information(trace.freqs)
    report = RateReport(width, height, cb.channels, sched.n, cb.V,
                        ideal_bits=float(np.sum(info)), payload_bits=8 * len(payload),
                        header_bits=8 * header.size, self_information=info)
    return data, report, trace


def encode_image(img, cb, mode=0, model_id=1, resolutions=None, num_scales=4, full=False):
    """Tokenize and entropy-code ``img``; returns ``(stream, RateReport)``, or an
    :class:`Encoded` record with ``full=True``."""
    cropped, tokens = tokenize_image(img, cb, mode, resolutions, num_scales)
    data, report, trace = encode_tokens(tokens, cb, mode, model_id, cropped.width, cropped.height)
    if full:
        return Encoded(data, report, tokens, trace, cropped)
    return data, report


def decode_tokens(data, cb):
    """Recover ``(header, tokens, trace)`` from a stream."""
    header, payload = parse_stream(data)
    check_codebook(header, cb)
    if header.model_id not in MODEL_IDS:
        raise FormatError(f"unknown model id {header.model_id}", offset=16)
    grid = (header.width // header.patch_size, header.height // header.patch_size)
    resolutions = [tuple(r) for r in header.resolutions] if header.mode == 1 else [grid]
    if header.mode == 1:
        try:
            check_resolutions(resolutions, *grid)
        except DimensionError as exc:
            raise FormatError(f"invalid scale list: {exc}", offset=18) from exc
    sched_n = sum(tw * th for tw, th in resolutions)
    if sched_n > MAX_TOKENS:
        raise FormatError(f"{sched_n} tokens exceeds the decoder limit", offset=6)
    sched = make_schedule(resolutions)
    model = make_model(header.model_id, cb.V)
    flat, _, trace = run_coder("decode", None, cb.V, model, sched, payload=payload)
    return header, _unflatten(flat, resolutions, header.mode), trace


def decode_image(data, cb):
    _, tokens, _ = decode_tokens(data, cb)
    return reconstruct(tokens, cb)


def sample_tokens(cb, mode, model_id, shape, seed, temperature=1.0, model=None, num_scales=4):
    """Draw a token grid/pyramid from the model alone. ``shape`` is ``(width, height)``
    in pixels; ``model`` optionally seeds the counts (it is copied, not modified)."""
    if temperature <= 0:
        raise UsageError("temperature must be positive")
    width, height = shape
    if width % cb.patch_size or height % cb.patch_size or width <= 0 or height <= 0:
        raise DimensionError(f"size {width}x{height} not a positive multiple of {cb.patch_size}")
    tw, th = width // cb.patch_size, height // cb.patch_size
    if mode == 1:
        if not cb.zero_reserved:
            raise DimensionError("mode 1 needs a zero-reserved codebook")
        resolutions = default_resolutions(tw, th, num_scales)
    elif mode == 0:
        resolutions = [(tw, th)]
    else:
        raise UsageError(f"unknown mode {mode}")
    if model is None:
        model = make_model(model_id, cb.V)
    else:
        if model.V != cb.V or model.model_id != model_id:
            raise UsageError("seed model does not match codebook size / model id")
        model = model.copy()
    sched = make_schedule(resolutions)
    flat, _, trace = run_coder("sample", None, cb.V, model, sched, seed=seed, temperature=temperature)
    return _unflatten(flat, resolutions, mode), trace


def sample_unconditional(cb, mode, model_id, shape, seed, temperature=1.0, model=None):
    tokens, _ = sample_tokens(cb, mode, model_id, shape, seed, temperature, model)
    return reconstruct(tokens, cb)


def _resolutions_of(tokens):
    return tokens.resolutions if isinstance(tokens, ScalePyramid) else [tokens.resolution]


def fit_model(token_sets, model_id, V, model=None):
    """Accumulate counts over several grids/pyramids, each coded from its own
    start as the encoder would; returns the (new or given) model."""
    if model is None:
        model = make_model(model_id, V)
    for tokens in token_sets:
        run_coder("encode", _flatten(tokens), V, model, make_schedule(_resolutions_of(tokens)))
    return model


def token_log2_probs(tokens, V, model_id, model=None):
    """log2 of the coded probability of every token, in coding order. A given
    ``model`` is copied first, so it can be reused across evaluations."""
    model = make_model(model_id, V) if model is None else model.copy()
    sched = make_schedule(_resolutions_of(tokens))
    _, _, trace = run_coder("encode", _flatten(tokens), V, model, sched)
    return np.log2(trace.freqs / _core.TOTAL)
