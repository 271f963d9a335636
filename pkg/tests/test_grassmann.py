from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from superform_lab.grassmann import (
    Multivector,
    ParityError,
    Signature,
    berezin_double,
    berezin_single,
    exp_even,
    inverse_even,
    reorder_sign,
    sqrt_even,
    tr_z,
    wedge,
)

SIG = Signature(3)
ORDER = 2
coeff = st.fractions(min_value=-3, max_value=3, max_denominator=4)


@st.composite
def forms(draw, parity=None):
    """Random exact element: forms in dx_0..dx_2 with polynomial coefficients of degree <= 2."""
    out = Multivector.zero(SIG, ORDER, True)
    for _ in range(draw(st.integers(0, 4))):
        gens = draw(st.lists(st.integers(0, 2), unique=True, max_size=3))
        if parity is not None and len(gens) % 2 != parity:
            continue
        m = Multivector.monomial(SIG, [SIG.dx(g) for g in gens], draw(coeff), ORDER, True)
        for _ in range(draw(st.integers(0, 2))):
            m = m * Multivector.coordinate(SIG, draw(st.integers(0, 2)), ORDER, True)
        out = out + m
    return out


@given(forms(), forms(), forms())
def test_product_associative(a, b, c):
    assert (a * b) * c == a * (b * c)


@given(forms(), forms(), forms())
def test_product_distributes(a, b, c):
    assert a * (b + c) == a * b + a * c


@given(forms(1), forms(1))
def test_odd_elements_anticommute(a, b):
    assert a * b == -(b * a)


@given(forms(0), forms())
def test_even_elements_are_central(a, b):
    assert a * b == b * a


@given(st.integers(0, 63), st.integers(0, 63))
def test_reorder_sign_graded_symmetry(a, b):
    if a & b:
        return
    expect = -1 if (a.bit_count() * b.bit_count()) % 2 else 1
    assert reorder_sign(a, b) * reorder_sign(b, a) == expect


@given(forms(0))
def test_exp_of_nilpotent_inverts(a):
    n = a - a.const(a.constant_term())
    assert exp_even(n) * exp_even(-n) == n.const(1)


@given(forms(0))
def test_inverse_and_sqrt(a):
    u = a - a.const(a.constant_term()) + a.const(Fraction(9, 4))
    assert inverse_even(u) * u == u.const(1)
    r = sqrt_even(u)
    assert r * r == u


def test_exp_rejects_odd():
    x = Multivector.monomial(SIG, [SIG.dx(0)], 1, 0, True)
    with pytest.raises(ParityError):
        exp_even(x)


def test_monomial_order_sign():
    a = Multivector.monomial(SIG, [SIG.dx(1), SIG.dx(0)], 1, 0, True)
    b = Multivector.monomial(SIG, [SIG.dx(0), SIG.dx(1)], 1, 0, True)
    assert a == -b
    assert Multivector.monomial(SIG, [SIG.dx(0), SIG.dx(0)], 1, 0, True).is_zero()


def test_wedge_matches_product():
    x = Multivector.monomial(SIG, [SIG.dx(0)], 2, 0, True)
    y = Multivector.monomial(SIG, [SIG.dx(2)], 3, 0, True)
    assert wedge(x, y) == x * y


@pytest.mark.parametrize("N", [1, 2, 3])
def test_berezin_normalisations(N):
    sig = Signature(1, False, N)
    psi = [sig.psi(k) for k in range(N)]
    hat = [sig.psihat(k) for k in range(N)]
    top = Multivector.monomial(sig, psi, 1, 0, True)
    assert berezin_single(top) == top.const(1)
    both = Multivector.monomial(sig, psi + hat, 1, 0, True)
    assert berezin_double(both) == both.const(1)
    lower = Multivector.monomial(sig, psi[:-1] + hat, 1, 0, True)
    assert berezin_double(lower).is_zero()


def test_berezin_passes_base_forms_through_on_the_left():
    sig = Signature(2, False, 1)
    dx = Multivector.monomial(sig, [sig.dx(0)], 1, 0, True)
    top = Multivector.monomial(sig, [sig.psi(0), sig.psihat(0)], 1, 0, True)
    assert berezin_double(dx * top) == dx


def test_tr_z_extracts_z_coefficient():
    sig = Signature(1, has_z=True)
    z = Multivector.monomial(sig, [sig.z], 5, 0, True)
    one = Multivector.scalar(sig, 7, 0, True)
    assert tr_z(z + one).scalar_value() == 5
