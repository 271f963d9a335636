import math

import pytest
from hypothesis import given, strategies as st

from superform_lab.flat_bundle import random_germ
from superform_lab.suites import degree_checks, rank_one_oracles, section_checks, transgression_checks
from superform_lab.thom import pull_delta, pull_rho, pull_vol, transgression_check


def test_rank_one_oracles():
    for c in rank_one_oracles():
        assert c.passed, (c.check_id, c.residual)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_exact_transgressions(N):
    m = 2 if N == 1 else 2 * N - 1
    for c in transgression_checks(N, m, 2 if N < 3 else 1, 1, True, 4, 1e-10):
        assert c.residual == "exact-zero", c.check_id


@given(st.integers(0, 500), st.floats(0.2, 3.0))
def test_float_delta_transgression(seed, t0):
    g = random_germ(1, 2, 2, seed=seed, exact=False, unimodular=False)
    r = transgression_check(g, "delta", [0.8], t0)
    assert max(r.residuals().values()) < 1e-10


@pytest.mark.parametrize("N", [1, 2, 3])
def test_degrees_and_parity(N):
    m = 2 if N == 1 else 2 * N - 1
    for c in degree_checks(N, m, 2 if N < 3 else 1, 1, True):
        assert c.passed, c.check_id


@pytest.mark.parametrize("N", [1, 3])
def test_covariant_derivative_and_control(N):
    m = 2 if N == 1 else 2 * N - 1
    cs = section_checks(N, m, 1, 2, 1e-10)
    assert cs[0].passed
    assert cs[1].informational and cs[1].passed


def test_rho_needs_unimodular_metric():
    g = random_germ(2, 3, 1, seed=1, exact=True, unimodular=False)
    with pytest.raises(ValueError):
        pull_rho(g, [1, 0], 1)
    with pytest.raises(ValueError):
        pull_vol(g, [1, 0])


def test_delta_rejects_nonpositive_t():
    g = random_germ(1, 2, 1, seed=1, exact=False, unimodular=False)
    with pytest.raises(ValueError):
        pull_delta(g, [0.5], 0.0)


@given(st.floats(-2, 2), st.floats(0.1, 4))
def test_rank_one_delta_gaussian_weight(lam, t):
    g = random_germ(1, 2, 1, seed=7, exact=False, unimodular=False)
    pf = pull_delta(g, [lam], t)
    w = pf.weight()
    h_inv = 1 / g.to_float().metric_at_origin().real[0, 0]
    assert w == pytest.approx(math.exp(-t * lam * lam * h_inv), rel=1e-12)
