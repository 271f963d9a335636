from hypothesis import given, strategies as st

from superform_lab.flat_bundle import random_germ
from superform_lab.grassmann import Multivector, Signature, gaussian
from superform_lab.jets import d, extend_base, jet_exp, partial, restrict_s

SIG = Signature(3)


@st.composite
def jets(draw, order=3):
    out = Multivector.zero(SIG, order, True)
    for _ in range(draw(st.integers(1, 5))):
        m = Multivector.scalar(SIG, draw(st.integers(-4, 4)), order, True)
        for _ in range(draw(st.integers(0, order))):
            m = m * Multivector.coordinate(SIG, draw(st.integers(0, 2)), order, True)
        if draw(st.booleans()):
            m = m * Multivector.monomial(SIG, [SIG.dx(draw(st.integers(0, 2)))], 1, order, True)
        out = out + m
    return out


@given(jets())
def test_d_squared_vanishes(f):
    assert d(d(f)).is_zero()


@given(jets(), jets())
def test_graded_leibniz(a, b):
    even = a.even_part()
    odd = a.odd_part()
    lhs = d(even * b) + d(odd * b)
    rhs = d(even) * b + even * d(b) + d(odd) * b - odd * d(b)
    o = min(lhs.order, rhs.order)
    assert lhs.with_order(o) == rhs.with_order(o)


@given(jets())
def test_partials_commute(f):
    assert partial(partial(f, 0), 1) == partial(partial(f, 1), 0)


def test_d_of_coordinate_is_dx():
    x = Multivector.coordinate(SIG, 1, 2, True)
    assert d(x) == Multivector.monomial(SIG, [SIG.dx(1)], 1, 1, True)


@given(jets())
def test_exp_chain_rule(f):
    p = f.even_part()
    p = p - p.const(p.constant_term())
    e = jet_exp(p)
    lhs, rhs = d(e), e * d(p)
    o = min(lhs.order, rhs.order)
    assert lhs.with_order(o) == rhs.with_order(o)


@given(st.integers(0, 50))
def test_rescaled_metric_restricts_to_multiple(seed):
    g = random_germ(2, 3, 2, seed=seed, exact=True)
    ext = extend_base(g, "scale_up", 4)
    for rx, ry in zip(ext.metric.rows, g.metric.rows):
        for x, y in zip(rx, ry):
            r = restrict_s(x)
            o = min(r.order, y.order)
            assert r.with_order(o) == y.scale(gaussian(4)).with_order(o)
