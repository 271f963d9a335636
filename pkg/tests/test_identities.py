from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from superform_lab.grassmann import gaussian
from superform_lab.identities import (
    exact_identity_checks,
    lemma_sides,
    pairing_integral,
    random_lemma_inputs,
    random_symmetric_one_forms,
)


@pytest.mark.parametrize("N", [1, 2])
def test_exact_identities_small_rank(N):
    for c in exact_identity_checks(N, seeds=(2,)):
        if not c.informational:
            assert c.residual == "exact-zero", c.check_id


@given(st.integers(1, 40))
def test_odd_insertion_lemma_rank_two(seed):
    V, W = random_lemma_inputs(2, seed, m=4)
    lhs, rhs = lemma_sides(V, W)
    assert (lhs - rhs.lift(lhs.sig) if lhs.sig != rhs.sig else lhs - rhs).is_zero()


def test_pairing_rank_three_equals_half_trace_square():
    # for N = 3 the pairing integral is (1/2) Tr V^2, which vanishes for V = A^2 with A symmetric
    V, _ = random_lemma_inputs(3, 1)
    got = pairing_integral(V)
    half_tr = (V @ V).trace().scale(gaussian(Fraction(1, 2)))
    assert not got.is_zero()
    assert (got - half_tr.lift(got.sig)).is_zero()
    A = random_symmetric_one_forms(3, 1)
    assert pairing_integral(A @ A).is_zero()
