from fractions import Fraction

import numpy as np
import pytest

from aric.errors import UsageError
from aric.prob_model import Context, PPMModel, UniformModel, make_model, predict, update


class OraclePPM:
    """Straight dictionary PPM-C blend in exact rationals."""

    def __init__(self, V, kind):
        self.V = V
        self.kind = kind
        self.tables = {}  # (order, key) -> {symbol: count}

    def _keys(self, ctx):
        S = self.V
        pick = lambda v: S if v is None else v  # noqa: E731
        if self.kind == "raster":
            return [(2, (pick(ctx.north), pick(ctx.west))), (1, (pick(ctx.west),)), (0, ())]
        if self.kind == "parent_west":
            return [(2, (pick(ctx.parent), pick(ctx.west))), (1, (pick(ctx.parent),)), (0, ())]
        return [(1, (pick(ctx.parent),)), (0, ())]

    def predict(self, ctx):
        p = [Fraction(0)] * self.V
        esc = Fraction(1)
        for k in self._keys(ctx):
            t = self.tables.get(k)
            if not t:
                continue
            n, d = sum(t.values()), len(t)
            for s, c in t.items():
                p[s] += esc * Fraction(c, n + d)
            esc *= Fraction(d, n + d)
        return [x + esc / self.V for x in p]

    def update(self, ctx, s):
        for k in self._keys(ctx):
            t = self.tables.setdefault(k, {})
            t[s] = t.get(s, 0) + 1
            if sum(t.values()) > 2**16:
                self.tables[k] = {a: c // 2 for a, c in t.items() if c // 2}


def _rand_ctx(rng, V, kind):
    opt = lambda: None if rng.random() < 0.2 else int(rng.integers(V))  # noqa: E731
    if kind == "raster":
        return Context("raster", west=opt(), north=opt())
    return Context("scale", west=opt(), parent=opt(), scale_index=1)


def test_fresh_model_is_uniform():
    for kind in ("raster", "parent", "parent_west"):
        m = PPMModel(10, kind)
        assert np.array_equal(m.predict(Context(west=3, north=None, parent=2)), np.full(10, 0.1))


def test_order0_only_example():
    m = PPMModel(16, "raster")
    m.update(Context(west=1, north=2), 5)
    p = m.predict(Context(west=3, north=4))  # orders 2 and 1 unseen here
    assert p[5] == 0.53125
    assert np.all(np.delete(p, 5) == 0.03125)


@pytest.mark.parametrize("n,expected", [(1, 1 - Fraction(1, 16)), (2, 1 - Fraction(1, 54)),
                                        (3, 1 - Fraction(1, 128))])
def test_binary_closed_form(n, expected):
    # every order holds {0: n}, so the escape reaching the uniform floor is (1/(n+1))**3
    m = PPMModel(2, "raster")
    ctx = Context(west=1, north=0)
    for _ in range(n):
        m.update(ctx, 0)
    assert m.predict(ctx)[0] == pytest.approx(float(expected), abs=1e-15)


def test_binary_monotone():
    m = PPMModel(2, "raster")
    ctx = Context(west=0, north=0)
    last = 0.5
    for _ in range(20):
        m.update(ctx, 0)
        p = m.predict(ctx)[0]
        assert p > last
        last = p


def test_update_raises_probability():
    rng = np.random.default_rng(0)
    m = PPMModel(50, "parent_west")
    for _ in range(200):
        ctx = _rand_ctx(rng, 50, "parent_west")
        s = int(rng.integers(50))
        before = m.predict(ctx)[s]
        m.update(ctx, s)
        assert m.predict(ctx)[s] > before


def test_identical_feeds_identical_predictions():
    rng = np.random.default_rng(1)
    a, b = PPMModel(30, "raster"), PPMModel(30, "raster")
    for _ in range(300):
        ctx = _rand_ctx(rng, 30, "raster")
        assert np.array_equal(a.predict(ctx), b.predict(ctx))
        s = int(rng.integers(30))
        a.update(ctx, s)
        b.update(ctx, s)


@pytest.mark.parametrize("kind", ["raster", "parent", "parent_west"])
def test_matches_oracle(kind):
    rng = np.random.default_rng(["raster", "parent", "parent_west"].index(kind))
    V = 7
    m, o = PPMModel(V, kind), OraclePPM(V, kind)
    for _ in range(400):
        ctx = _rand_ctx(rng, V, kind)
        p = m.predict(ctx)
        q = np.array([float(x) for x in o.predict(ctx)])
        assert np.max(np.abs(p - q)) <= 1e-12
        assert abs(p.sum() - 1) <= 1e-12 and p.min() > 0
        s = int(rng.choice(V, p=q))
        m.update(ctx, s)
        o.update(ctx, s)


def test_rescale_halves_single_symbol():
    m = PPMModel(4, "raster")
    ctx = Context(west=1, north=2)
    for _ in range(2**16):
        m.update(ctx, 3)
    assert m.counts(ctx, 0) == {3: 65536}
    m.update(ctx, 3)  # total 65537 > 2**16
    assert m.counts(ctx, 0) == {3: 32768}
    assert m.counts(ctx, 2) == {3: 32768}


def test_rescale_drops_zero_counts():
    m = PPMModel(4, "raster")
    ctx = Context(west=0, north=0)
    m.update(ctx, 1)
    for _ in range(2**16):
        m.update(ctx, 2)
    assert m.counts(ctx, 1) == {2: 32768}
    o = OraclePPM(4, "raster")
    o.update(ctx, 1)
    for _ in range(2**16):
        o.update(ctx, 2)
    assert np.max(np.abs(m.predict(ctx) - np.array([float(x) for x in o.predict(ctx)]))) < 1e-12


def test_uniform_model():
    m = UniformModel(4096)
    assert np.all(predict(m, Context()) == 1 / 4096)
    update(m, Context(), 17)
    assert np.all(m.predict(None) == 1 / 4096)
    with pytest.raises(UsageError):
        m.update(None, 4096)


def test_copy_is_independent():
    m = PPMModel(5, "raster")
    ctx = Context(west=1, north=1)
    m.update(ctx, 2)
    c = m.copy()
    c.update(ctx, 3)
    assert m.counts(ctx, 0) == {2: 1}
    assert c.counts(ctx, 0) == {2: 1, 3: 1}


def test_registry_and_errors():
    assert isinstance(make_model(0, 8), UniformModel)
    assert [make_model(i, 8).kind for i in (1, 2, 3)] == ["raster", "parent", "parent_west"]
    with pytest.raises(UsageError):
        make_model(4, 8)
    with pytest.raises(UsageError):
        PPMModel(1)
    with pytest.raises(UsageError):
        PPMModel(8).update(Context(), 8)
    with pytest.raises(UsageError):
        PPMModel(8).predict(Context(west=9))
