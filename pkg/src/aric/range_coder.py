"""Byte-wise range coder over integer frequency tables summing to 2**22.

The coder keeps a carry-propagating ``low`` and a 32-bit ``range``; each
symbol narrows the interval to ``[range*cum >> 22, range*(cum+f) >> 22)`` and a
byte is shifted out whenever ``range`` drops below 2**24. Termination writes
the four bytes of ``low`` followed by four zero bytes; the decoder checks both.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _core
from .errors import CorruptionError, UsageError

TOTAL_BITS = _core.TOTAL_BITS
TOTAL = _core.TOTAL
MAX_SYMBOLS = 1 << 18
_MASK32 = (1 << 32) - 1


@dataclass(eq=False)
class FreqTable:
    freqs: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=np.int64)
        if f.ndim != 1 or not 1 <= f.size <= MAX_SYMBOLS:
            raise UsageError("frequency table must be a vector of 1..2**18 entries")
        if f.min() < 1 or int(f.sum()) != TOTAL:
            raise UsageError("frequencies must be >= 1 and sum to 2**22")
        self.freqs = f

    @property
    def V(self):
        return self.freqs.size

    @cached_property
    def cum(self):
        c = np.zeros(self.V + 1, dtype=np.int64)
        np.cumsum(self.freqs, out=c[1:])
        return c

    @cached_property
    def _lists(self):
        return self.freqs.tolist(), self.cum.tolist()

    def __eq__(self, other):
        return isinstance(other, FreqTable) and np.array_equal(self.freqs, other.freqs)


def quantize(dist):
    """Integer frequencies ``max(1, floor(p*T))`` with the shortfall (or excess)
    spread one unit at a time in order of largest fractional remainder."""
    p = np.ascontiguousarray(dist, dtype=np.float64)
    if p.ndim != 1 or p.size > MAX_SYMBOLS or p.size < 1:
        raise UsageError(f"alphabet size {p.size} outside [1, {MAX_SYMBOLS}]")
    freqs = np.empty(p.size, dtype=np.int64)
    _core.quantize_into(p, freqs, np.empty(p.size))
    return FreqTable(freqs)


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = _core.RANGE_INIT
        self.out = bytearray()

    def encode(self, cum, freq):
        r = self.range
        lo = (r * cum) >> TOTAL_BITS
        hi = (r * (cum + freq)) >> TOTAL_BITS
        low = self.low + lo
        r = hi - lo
        out = self.out
        if low > _MASK32:
            low &= _MASK32
            i = len(out) - 1
            while out[i] == 0xFF:
                out[i] = 0
                i -= 1
            out[i] += 1
        while r < _core.RENORM:
            out.append(low >> 24)
            low = (low & 0xFFFFFF) << 8
            r <<= 8
        self.low = low
        self.range = r

    def finish(self):
        self.out += self.low.to_bytes(4, "big") + bytes(_core.FLUSH_BYTES - 4)
        return bytes(self.out)


class RangeDecoder:
    def __init__(self, payload):
        self.data = bytes(payload)
        if len(self.data) < 4:
            raise CorruptionError("payload shorter than the coder state", offset=len(self.data))
        self.x = int.from_bytes(self.data[:4], "big")
        self.range = _core.RANGE_INIT
        self.pos = 4
        if self.x >= self.range:
            raise CorruptionError("coder state out of range", offset=0)

    def target(self):
        """Cumulative-frequency value the next symbol's interval contains."""
        t = ((self.x + 1) * TOTAL - 1) // self.range
        if t >= TOTAL:
            raise CorruptionError("coder state out of range", offset=self.pos)
        return t

    def consume(self, cum, freq):
        r = self.range
        lo = (r * cum) >> TOTAL_BITS
        hi = (r * (cum + freq)) >> TOTAL_BITS
        x = self.x - lo
        r = hi - lo
        data = self.data
        while r < _core.RENORM:
            if self.pos >= len(data):
                raise CorruptionError("payload exhausted", offset=self.pos)
            x = (x << 8) | data[self.pos]
            self.pos += 1
            r <<= 8
        self.x = x
        self.range = r

    def finish(self):
        tail = self.data[self.pos :]
        if self.x != 0 or tail != bytes(_core.FLUSH_BYTES - 4):
            raise CorruptionError("bad stream terminator", offset=self.pos)


def _table_for(tables, prefix):
    t = tables(prefix) if callable(tables) else tables[len(prefix)]
    return t if isinstance(t, FreqTable) else FreqTable(t)


def encode(symbols, tables):
    """Code ``symbols``; ``tables`` maps the already-coded prefix to the next
    :class:`FreqTable` (or is a sequence indexed by step)."""
    enc = RangeEncoder()
    prefix = []
    for s in symbols:
        s = int(s)
        t = _table_for(tables, prefix)
        if not 0 <= s < t.V:
            raise UsageError(f"symbol {s} outside table of size {t.V}")
        freqs, cum = t._lists
        enc.encode(cum[s], freqs[s])
        prefix.append(s)
    return enc.finish()


def decode(payload, tables, n):
    dec = RangeDecoder(payload)
    out = []
    for _ in range(n):
        t = _table_for(tables, out)
        freqs, cum = t._lists
        s = bisect_right(cum, dec.target()) - 1
        dec.consume(cum[s], freqs[s])
        out.append(s)
    dec.finish()
    return out


def _pool_args(table_idx, pool):
    cums = np.zeros((len(pool), pool[0].V + 1), dtype=np.int64)
    for j, t in enumerate(pool):
        if t.V != pool[0].V:
            raise UsageError("all tables in a pool must share one alphabet")
        cums[j] = t.cum
    idx = np.ascontiguousarray(table_idx, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= len(pool)):
        raise UsageError("table index outside the pool")
    return idx, cums


def encode_batch(symbols, table_idx, pool):
    """Compiled :func:`encode` for long sequences: step ``i`` uses the
    :class:`FreqTable` ``pool[table_idx[i]]``. Output bytes are identical."""
    idx, cums = _pool_args(table_idx, pool)
    sym = np.ascontiguousarray(symbols, dtype=np.int64)
    if sym.size != idx.size:
        raise UsageError("one table index per symbol")
    if sym.size and (sym.min() < 0 or sym.max() >= cums.shape[1] - 1):
        raise UsageError("symbol outside the alphabet")
    out = np.zeros(3 * sym.size + 16, dtype=np.uint8)
    st = np.zeros(3, dtype=np.int64)
    _core.encode_static(sym, idx, cums, out, st)
    return bytes(out[: st[2]])


def decode_batch(payload, table_idx, pool):
    idx, cums = _pool_args(table_idx, pool)
    data = np.frombuffer(bytes(payload), dtype=np.uint8).copy()
    sym = np.zeros(idx.size, dtype=np.int64)
    st = np.zeros(3, dtype=np.int64)
    status = _core.decode_static(data, idx, cums, sym, st)
    if status != _core.OK:
        what = {_core.EXHAUSTED: "payload exhausted", _core.INVALID: "coder state out of range",
                _core.TRAILER: "bad stream terminator"}[status]
        raise CorruptionError(what, offset=int(st[2]))
    return sym


def ideal_bits(symbols, tables):
    """Sum of ``-log2(f[s]/T)`` over the coded sequence."""
    bits = []
    prefix = []
    for s in symbols:
        t = _table_for(tables, prefix)
        bits.append(TOTAL_BITS - math.log2(int(t.freqs[int(s)])))
        prefix.append(int(s))
    return math.fsum(bits)


def self_information(freqs):
    """Per-symbol bits from the coded symbols' frequencies."""
    return TOTAL_BITS - np.log2(np.asarray(freqs, dtype=np.float64))
