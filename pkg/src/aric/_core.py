"""Compiled inner loops shared by prob_model, range_coder and codec.

Everything here works on plain arrays so one coding job runs as a single
nopython call. The Python-facing classes live in the sibling modules.
"""

import numba
import numpy as np

TOTAL_BITS = 22
TOTAL = 1 << TOTAL_BITS
RESCALE_LIMIT = 1 << 16
RANGE_INIT = (1 << 32) - 1
RENORM = 1 << 24
FLUSH_BYTES = 8

OK, EXHAUSTED, INVALID, TRAILER = 0, 1, 2, 3

_jit = numba.njit(cache=True, nogil=True)


# -- adaptive counts ----------------------------------------------------------

@_jit
def _get(d, k):
    if k in d:
        return d[k]
    return -1


@_jit
def predict_into(p, keys, V, ctx_index, head, total, distinct, e_sym, e_cnt, e_next):
    """Blend orders highest first; each seen symbol gets count/(n+d) of the
    escape mass reaching that order, escape shrinks by d/(n+d)."""
    p[:] = 0.0
    esc = 1.0
    for j in range(keys.size):
        k = keys[j]
        if k < 0:
            continue
        slot = _get(ctx_index, k)
        if slot < 0:
            continue
        n = total[slot]
        if n == 0:
            continue
        denom = float(n + distinct[slot])
        e = head[slot]
        while e >= 0:
            p[e_sym[e]] += e_cnt[e] / denom * esc
            e = e_next[e]
        esc = esc * (distinct[slot] / denom)
    bg = esc / V
    for s in range(V):
        p[s] += bg


@_jit
def _rescale(slot, V, entry_index, head, total, distinct, e_sym, e_cnt, e_next):
    prev = -1
    e = head[slot]
    n = 0
    d = 0
    while e >= 0:
        nxt = e_next[e]
        c = e_cnt[e] // 2
        if c == 0:
            if prev < 0:
                head[slot] = nxt
            else:
                e_next[prev] = nxt
            entry_index.pop(slot * (V + 1) + e_sym[e])
        else:
            e_cnt[e] = c
            n += c
            d += 1
            prev = e
        e = nxt
    total[slot] = n
    distinct[slot] = d


@_jit
def update_counts(keys, symbol, V, ctx_index, entry_index, head, total, distinct,
                  e_sym, e_cnt, e_next, meta):
    for j in range(keys.size):
        k = keys[j]
        if k < 0:
            continue
        slot = _get(ctx_index, k)
        if slot < 0:
            slot = meta[0]
            meta[0] += 1
            ctx_index[k] = slot
            head[slot] = -1
            total[slot] = 0
            distinct[slot] = 0
        ek = slot * (V + 1) + symbol
        e = _get(entry_index, ek)
        if e < 0:
            e = meta[1]
            meta[1] += 1
            e_sym[e] = symbol
            e_cnt[e] = 0
            e_next[e] = head[slot]
            head[slot] = e
            entry_index[ek] = e
            distinct[slot] += 1
        e_cnt[e] += 1
        total[slot] += 1
        if total[slot] > RESCALE_LIMIT:
            _rescale(slot, V, entry_index, head, total, distinct, e_sym, e_cnt, e_next)


# -- probability -> integer frequencies ---------------------------------------

@_jit
def _bump(rem, freqs, r, sign, min_f):
    """Apply ``sign`` to the ``r`` symbols with the largest remainder among
    those with freq > min_f; equal remainders go to the lower index first."""
    V = rem.size
    key = np.empty(V)
    for s in range(V):
        key[s] = rem[s] if freqs[s] > min_f else -1.0
    t = np.partition(key, V - r)[V - r]
    need = r
    for s in range(V):
        if key[s] > t:
            freqs[s] += sign
            need -= 1
    for s in range(V):
        if need == 0:
            break
        if key[s] == t:
            freqs[s] += sign
            need -= 1


@_jit
def quantize_into(p, freqs, rem):
    V = p.size
    fsum = 0
    for s in range(V):
        x = p[s] * TOTAL
        fl = np.floor(x)
        rem[s] = x - fl
        f = np.int64(fl)
        if f < 1:
            f = 1
        freqs[s] = f
        fsum += f
    delta = TOTAL - fsum
    if delta > 0:
        q = delta // V
        r = delta % V
        if q > 0:
            for s in range(V):
                freqs[s] += q
        if r > 0:
            _bump(rem, freqs, r, 1, 0)
    elif delta < 0:
        D = -delta
        movable = 0
        gmax = 0
        for s in range(V):
            g = freqs[s] - 1
            if g > 0:
                movable += 1
                if g > gmax:
                    gmax = g
        if movable <= D:
            # whole removal passes: largest k with sum(min(g, k)) <= D
            lo = 0
            hi = gmax
            while lo < hi:
                mid = (lo + hi + 1) // 2
                acc = 0
                for s in range(V):
                    g = freqs[s] - 1
                    acc += g if g < mid else mid
                if acc <= D:
                    lo = mid
                else:
                    hi = mid - 1
            for s in range(V):
                g = freqs[s] - 1
                c = g if g < lo else lo
                freqs[s] -= c
                D -= c
        if D > 0:
            _bump(rem, freqs, D, -1, 1)


@_jit
def sharpen(p, inv_temp):
    m = p.max()
    tot = 0.0
    for s in range(p.size):
        w = np.exp((np.log(p[s]) - np.log(m)) * inv_temp) if p[s] > 0.0 else 0.0
        p[s] = w
        tot += w
    for s in range(p.size):
        p[s] /= tot


# -- range coder --------------------------------------------------------------

@_jit
def enc_put(st, out, cum, freq):
    """st = [low, range, n_out]."""
    r = st[1]
    lo = (r * cum) >> TOTAL_BITS
    hi = (r * (cum + freq)) >> TOTAL_BITS
    low = st[0] + lo
    r = hi - lo
    n = st[2]
    if low >= (1 << 32):
        low -= 1 << 32
        i = n - 1
        while out[i] == 255:
            out[i] = 0
            i -= 1
        out[i] += 1
    while r < RENORM:
        out[n] = (low >> 24) & 0xFF
        n += 1
        low = (low & 0xFFFFFF) << 8
        r <<= 8
    st[0] = low
    st[1] = r
    st[2] = n


@_jit
def enc_finish(st, out):
    low = st[0]
    n = st[2]
    for sh in (24, 16, 8, 0):
        out[n] = (low >> sh) & 0xFF
        n += 1
    for _ in range(FLUSH_BYTES - 4):
        out[n] = 0
        n += 1
    st[2] = n


@_jit
def dec_init(st, data):
    """st = [x = code - low, range, read position]."""
    if data.size < 4:
        return EXHAUSTED
    x = 0
    for i in range(4):
        x = (x << 8) | data[i]
    st[0] = x
    st[1] = RANGE_INIT
    st[2] = 4
    if x >= RANGE_INIT:
        return INVALID
    return OK


@_jit
def dec_target(st):
    return ((st[0] + 1) * TOTAL - 1) // st[1]


@_jit
def dec_consume(st, data, cum, freq):
    r = st[1]
    lo = (r * cum) >> TOTAL_BITS
    hi = (r * (cum + freq)) >> TOTAL_BITS
    x = st[0] - lo
    r = hi - lo
    pos = st[2]
    while r < RENORM:
        if pos >= data.size:
            return EXHAUSTED
        x = (x << 8) | data[pos]
        pos += 1
        r <<= 8
    st[0] = x
    st[1] = r
    st[2] = pos
    return OK


@_jit
def dec_finish(st, data):
    pos = st[2]
    if st[0] != 0 or data.size != pos + FLUSH_BYTES - 4:
        return TRAILER
    for i in range(pos, data.size):
        if data[i] != 0:
            return TRAILER
    return OK


@_jit
def find_symbol(freqs, target):
    acc = 0
    s = 0
    while acc + freqs[s] <= target:
        acc += freqs[s]
        s += 1
    return s, acc


@_jit
def cum_of(freqs, s):
    acc = 0
    for k in range(s):
        acc += freqs[k]
    return acc


# -- coding jobs ----------------------------------------------------------------

@_jit
def _splitmix(state):
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@_jit
def _step_keys(i, tokens, V, use_o2, o2a, o2b, o1i, keys):
    W = V + 1
    if use_o2:
        a = tokens[o2a[i]] if o2a[i] >= 0 else V
        b = tokens[o2b[i]] if o2b[i] >= 0 else V
        keys[0] = 2 + 3 * (a * W + b)
    else:
        keys[0] = -1
    c = tokens[o1i[i]] if o1i[i] >= 0 else V
    keys[1] = 1 + 3 * c
    keys[2] = 0


@_jit
def run_job(op, tokens, V, adaptive, use_o2, deferred, o2a, o2b, o1i, seg_end,
            ctx_index, entry_index, head, total, distinct, e_sym, e_cnt, e_next, meta,
            buf, cst, rng_state, inv_temp, freq_log, cum_log, key_log, update_log):
    """op 0 encodes ``tokens`` into ``buf``; op 1 decodes ``buf`` into ``tokens``;
    op 2 samples into ``tokens``. Returns a status code (OK on success)."""
    n = tokens.size
    p = np.empty(V)
    freqs = np.empty(V, dtype=np.int64)
    rem = np.empty(V)
    keys = np.full(3, -1, dtype=np.int64)
    if not adaptive:
        p[:] = 1.0 / V
        quantize_into(p, freqs, rem)
    if op == 1:
        status = dec_init(cst, buf)
        if status != OK:
            return status
    pending = 0
    n_upd = 0
    for i in range(n):
        if adaptive:
            _step_keys(i, tokens, V, use_o2, o2a, o2b, o1i, keys)
            key_log[i, :] = keys
            predict_into(p, keys, V, ctx_index, head, total, distinct, e_sym, e_cnt, e_next)
            if op == 2 and inv_temp != 1.0:
                sharpen(p, inv_temp)
            quantize_into(p, freqs, rem)
        if op == 0:
            s = tokens[i]
            cum = cum_of(freqs, s)
            enc_put(cst, buf, cum, freqs[s])
        elif op == 1:
            target = dec_target(cst)
            if target >= TOTAL:
                return INVALID
            s, cum = find_symbol(freqs, target)
            tokens[i] = s
            status = dec_consume(cst, buf, cum, freqs[s])
            if status != OK:
                return status
        else:
            target = np.int64(_splitmix(rng_state) >> np.uint64(64 - TOTAL_BITS))
            s, cum = find_symbol(freqs, target)
            tokens[i] = s
        freq_log[i] = freqs[s]
        cum_log[i] = cum
        if adaptive:
            if not deferred:
                update_counts(keys, s, V, ctx_index, entry_index, head, total, distinct,
                              e_sym, e_cnt, e_next, meta)
                update_log[n_upd] = i
                n_upd += 1
            elif seg_end[i]:
                for j in range(pending, i + 1):
                    _step_keys(j, tokens, V, use_o2, o2a, o2b, o1i, keys)
                    update_counts(keys, tokens[j], V, ctx_index, entry_index, head, total,
                                  distinct, e_sym, e_cnt, e_next, meta)
                    update_log[n_upd] = j
                    n_upd += 1
                pending = i + 1
    if op == 0:
        enc_finish(cst, buf)
    elif op == 1:
        return dec_finish(cst, buf)
    return OK


# -- static-table batches ---------------------------------------------------------

@_jit
def encode_static(symbols, table_idx, cums, out, st):
    """Code ``symbols[i]`` with table row ``cums[table_idx[i]]`` (cumulative, V + 1 wide)."""
    st[0] = 0
    st[1] = RANGE_INIT
    st[2] = 0
    for i in range(symbols.size):
        c = cums[table_idx[i]]
        s = symbols[i]
        enc_put(st, out, c[s], c[s + 1] - c[s])
    enc_finish(st, out)


@_jit
def decode_static(data, table_idx, cums, symbols, st):
    status = dec_init(st, data)
    if status != OK:
        return status
    for i in range(symbols.size):
        c = cums[table_idx[i]]
        target = dec_target(st)
        if target >= TOTAL:
            return INVALID
        s = np.searchsorted(c, target, side="right") - 1
        symbols[i] = s
        status = dec_consume(st, data, c[s], c[s + 1] - c[s])
        if status != OK:
            return status
    return dec_finish(st, data)
