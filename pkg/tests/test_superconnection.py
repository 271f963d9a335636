import math

import pytest
from hypothesis import given, strategies as st

from superform_lab.superconnection import (
    anomaly_check,
    binomial_weight_sum,
    bridge_suite,
    clifford_checks,
    fprime_imaginary,
    monomial_supertraces,
    scaling_constants,
    top_supertrace_sign,
    torsion_form,
    two_term_complex,
)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_clifford_relations_and_supertraces(N):
    for c in clifford_checks(N):
        assert c.residual == "exact-zero"


def test_top_supertrace_sign_values():
    assert [top_supertrace_sign(N) for N in (1, 2, 3, 4)] == [-1, -1, 1, 1]
    ms = monomial_supertraces(1)
    assert ms[((0,), (0,))] == -2


@given(st.integers(1, 12))
def test_binomial_weight_sum(N):
    expect = -1 if N == 1 else 0
    assert binomial_weight_sum(N) == expect


@given(st.floats(0.0, 20.0))
def test_fprime_on_imaginary_axis(t):
    assert fprime_imaginary(t) == pytest.approx((1 - t / 2) * math.exp(-t / 4), abs=1e-14)


@pytest.mark.parametrize("N", [1, 2])
def test_bridge_identity_exact(N):
    for c in bridge_suite(N, 1, True):
        if not c.informational:
            assert c.residual == "exact-zero", c.check_id


def test_scaling_constants_rank_one():
    cd, ce = scaling_constants(1)
    assert cd == pytest.approx(2.0) and ce == pytest.approx(0.5)
    with pytest.raises(ValueError):
        scaling_constants(2)


def test_two_term_anomaly():
    cx = two_term_complex(m=2, K=2, seed=3)
    T = torsion_form(cx)
    c = anomaly_check(cx, 1e-6, tag="-test", torsion=T)
    assert c.passed, c.residual
