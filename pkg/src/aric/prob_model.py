"""Adaptive next-token probability models over a V-symbol codebook.

``PPMModel`` is a PPM method-C blend (no exclusions, full updates) of up to
three context orders plus a uniform floor. Which neighbours form the contexts
depends on the model kind:

=========  ============  =========================  ===============
model_id   kind          order 2                    order 1
=========  ============  =========================  ===============
0          uniform       --                         --
1          raster        (north, west)              west
2          parent        --                         parent
3          parent_west   (parent, west)             parent
=========  ============  =========================  ===============

Missing neighbours (borders, coarsest scale) are the sentinel value ``V``.
"""

from dataclasses import dataclass

import numpy as np
from numba import types
from numba.typed import Dict

from . import _core
from .errors import UsageError

MODEL_IDS = {0: "uniform", 1: "raster", 2: "parent", 3: "parent_west"}
MAX_SYMBOLS = 1 << 18


@dataclass(frozen=True)
class Context:
    """Causal neighbourhood of the next token; ``None`` means unavailable."""

    mode: str = "raster"  # "raster" or "scale"
    west: int | None = None
    north: int | None = None
    parent: int | None = None
    scale_index: int = 0


def _check_V(V):
    if not 2 <= V <= MAX_SYMBOLS:
        raise UsageError(f"alphabet size {V} outside [2, {MAX_SYMBOLS}]")


class UniformModel:
    model_id = 0
    kind = "uniform"
    adaptive = False

    def __init__(self, V):
        _check_V(V)
        self.V = V

    def predict(self, ctx=None):
        return np.full(self.V, 1.0 / self.V)

    def update(self, ctx, symbol):
        if not 0 <= symbol < self.V:
            raise UsageError(f"symbol {symbol} outside [0, {self.V})")

    def copy(self):
        return UniformModel(self.V)


class PPMModel:
    """Adaptive context model; predictions and updates run in compiled code."""

    adaptive = True

    def __init__(self, V, kind="raster"):
        _check_V(V)
        if kind not in ("raster", "parent", "parent_west"):
            raise UsageError(f"unknown model kind {kind!r}")
        self.V = V
        self.kind = kind
        self.model_id = {v: k for k, v in MODEL_IDS.items()}[kind]
        self.ctx_index = Dict.empty(types.int64, types.int64)
        self.entry_index = Dict.empty(types.int64, types.int64)
        self.meta = np.zeros(2, dtype=np.int64)  # slots used, entries used
        self.head = np.empty(0, dtype=np.int64)
        self.total = np.empty(0, dtype=np.int64)
        self.distinct = np.empty(0, dtype=np.int64)
        self.e_sym = np.empty(0, dtype=np.int64)
        self.e_cnt = np.empty(0, dtype=np.int64)
        self.e_next = np.empty(0, dtype=np.int64)

    @property
    def uses_order2(self):
        return self.kind != "parent"

    def reserve(self, n_updates):
        """Make room for ``n_updates`` more updates (each adds <= 3 slots and entries)."""
        need_slots = int(self.meta[0]) + 3 * n_updates
        need_entries = int(self.meta[1]) + 3 * n_updates
        if need_slots > self.head.size:
            size = max(need_slots, 2 * self.head.size, 64)
            for name in ("head", "total", "distinct"):
                setattr(self, name, _grow(getattr(self, name), size))
        if need_entries > self.e_sym.size:
            size = max(need_entries, 2 * self.e_sym.size, 64)
            for name in ("e_sym", "e_cnt", "e_next"):
                setattr(self, name, _grow(getattr(self, name), size))

    def keys(self, ctx):
        """Context keys, highest order first; -1 marks an unused order."""
        V = self.V
        sent = lambda v: V if v is None else int(v)  # noqa: E731
        if self.kind == "raster":
            a, b, c = sent(ctx.north), sent(ctx.west), sent(ctx.west)
        else:
            a, b, c = sent(ctx.parent), sent(ctx.west), sent(ctx.parent)
        for v in (a, b, c):
            if not 0 <= v <= V:
                raise UsageError(f"context symbol {v} outside [0, {V}]")
        k2 = 2 + 3 * (a * (V + 1) + b) if self.uses_order2 else -1
        return np.array([k2, 1 + 3 * c, 0], dtype=np.int64)

    def state(self):
        return (self.ctx_index, self.entry_index, self.head, self.total, self.distinct,
                self.e_sym, self.e_cnt, self.e_next, self.meta)

    def predict(self, ctx):
        p = np.empty(self.V)
        _core.predict_into(p, self.keys(ctx), self.V, self.ctx_index, self.head,
                           self.total, self.distinct, self.e_sym, self.e_cnt, self.e_next)
        return p

    def update(self, ctx, symbol):
        if not 0 <= symbol < self.V:
            raise UsageError(f"symbol {symbol} outside [0, {self.V})")
        self.reserve(1)
        _core.update_counts(self.keys(ctx), int(symbol), self.V, self.ctx_index,
                            self.entry_index, self.head, self.total, self.distinct,
                            self.e_sym, self.e_cnt, self.e_next, self.meta)

    def counts(self, ctx, order):
        """``{symbol: count}`` of one order's context (0, 1 or 2); for inspection."""
        k = int(self.keys(ctx)[2 - order])
        slot = self.ctx_index[k] if k >= 0 and k in self.ctx_index else -1
        out = {}
        if slot < 0:
            return out
        e = self.head[slot]
        while e >= 0:
            out[int(self.e_sym[e])] = int(self.e_cnt[e])
            e = self.e_next[e]
        return out

    def copy(self):
        other = PPMModel(self.V, self.kind)
        for name in ("head", "total", "distinct", "e_sym", "e_cnt", "e_next", "meta"):
            setattr(other, name, getattr(self, name).copy())
        for k, v in self.ctx_index.items():
            other.ctx_index[k] = v
        for k, v in self.entry_index.items():
            other.entry_index[k] = v
        return other


def _grow(arr, size):
    out = np.empty(size, dtype=arr.dtype)
    out[: arr.size] = arr
    return out


def uniform_model(V):
    return UniformModel(V)


def make_model(model_id, V):
    if model_id not in MODEL_IDS:
        raise UsageError(f"unknown model id {model_id} (expected one of {sorted(MODEL_IDS)})")
    if model_id == 0:
        return UniformModel(V)
    return PPMModel(V, MODEL_IDS[model_id])


def predict(model, ctx):
    return model.predict(ctx)


def update(model, ctx, symbol):
    model.update(ctx, symbol)
