import pytest
from hypothesis import given, strategies as st

from superform_lab.flat_bundle import random_germ, trivial_germ
from superform_lab.lattice import (
    LatticeWindow,
    exchange_constant,
    n1_epsilon_checks,
    poisson_check,
    poisson_sides,
    sum_pulled,
    thm219_check,
    zero_mode_check,
)
from superform_lab.suites import window_checks


@given(st.integers(1, 3), st.floats(0.2, 3.0), st.integers(0, 200))
def test_poisson_summation(N, t, seed):
    g = random_germ(N, 2 * N - 1, 1, seed=seed, exact=False, unimodular=False)
    lhs, rhs = poisson_sides(g, t, [0.1 * (k + 1) for k in range(N)])
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


def test_poisson_check_rejects_bad_t():
    g = trivial_germ(1, 1, 1, exact=False)
    with pytest.raises(ValueError):
        poisson_check(g, -1.0)


@pytest.mark.parametrize("c", [1, 2])
def test_rank_one_exchange(c):
    g = random_germ(1, 2, 2, seed=4, exact=False, lattice_scale=c)
    for chk in thm219_check(g, 0.7, 1e-10):
        assert chk.passed, (chk.check_id, chk.residual)


def test_exchange_constant_scales_with_covolume():
    a = random_germ(3, 5, 1, seed=1, exact=False, lattice_scale=1)
    b = random_germ(3, 5, 1, seed=1, exact=False, lattice_scale=2)
    assert exchange_constant(b) == pytest.approx(8 * exchange_constant(a))


@given(st.integers(0, 300))
def test_rank_one_epsilon_value(seed):
    # the value -1/4 needs h(0) = 1: the first dual mode enters as exp(-(2 pi)^2 t / h(0))
    g = random_germ(1, 2, 2, seed=seed, exact=False, unimodular=False, lattice_scale=1, identity_at_origin=True)
    c = n1_epsilon_checks(g)[0]
    assert c.passed and abs(c.detail["value"] + 0.25) < 1e-12


@pytest.mark.parametrize("N", [1, 3])
def test_zero_mode_exact(N):
    g = random_germ(N, 2 if N == 1 else 5, 1, seed=1, exact=True, unimodular=False)
    assert zero_mode_check(g).residual == "exact-zero"


def test_window_tail_and_routes():
    for c in window_checks(1, 2, 2, 1, 0.8, 1e-12):
        assert c.passed, c.check_id


def test_constant_metric_delta_sum_vanishes():
    g = trivial_germ(3, 5, 1, exact=False)
    assert sum_pulled(g, "delta", 1.0).form.is_zero()


@given(st.integers(1, 3), st.floats(0.5, 2.0), st.integers(0, 3))
def test_window_radius_grows_with_tolerance(N, spacing, deg):
    gram = tuple(tuple(float(i == j) for j in range(N)) for i in range(N))
    loose = LatticeWindow.auto(N, spacing, gram, 1.0, deg, 1e-6)
    tight = LatticeWindow.auto(N, spacing, gram, 1.0, deg, 1e-16)
    assert tight.radius >= loose.radius
