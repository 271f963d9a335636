"""Named verification suites assembled from the module-level checks.

Every suite takes a validated :class:`~superform_lab.scenario.Scenario` and
returns a list of :class:`CheckResult`.  CSV traces are appended to the
``traces`` mapping (name -> (header, rows)) when one is supplied.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable

import numpy as np

from .flat_bundle import (
    InvariantPolynomial,
    P_z,
    complexify,
    constant_direction_germ,
    random_germ,
    trivial_germ,
)
from .grassmann import AlgebraMatrix, Multivector
from .jets import d, ds_component, extend_base, jet_exp, jet_inverse, partial, rehome, restrict_s, s_variable
from .report import EXACT_ZERO, CheckResult, make_check
from .scenario import Scenario

Traces = dict[str, tuple[list[str], list]]


def _res(x: Multivector, exact: bool = False) -> float | str:
    if x.is_zero():
        return EXACT_ZERO if exact else 0.0
    return x.max_abs()


def _mres(M: AlgebraMatrix, exact: bool = False) -> float | str:
    worst: float | str = EXACT_ZERO if exact else 0.0
    for row in M.rows:
        for x in row:
            r = _res(x, exact)
            if r != EXACT_ZERO and (worst == EXACT_ZERO or r > worst):
                worst = r
    return worst


def _sub(a: Multivector, b: Multivector) -> Multivector:
    if a.sig != b.sig:
        b = b.lift(a.sig)
    order = min(a.order, b.order)
    return a.with_order(order) - b.with_order(order)


def _section(N: int, seed: int, scale: float = 1.0) -> list[float]:
    rng = np.random.default_rng(1000 + seed)
    return [round(float(v) * scale, 3) for v in rng.uniform(-1.0, 1.0, N)]


# ---------------------------------------------------------------------------
# jets: closedness of characteristic and pulled-back forms


def jet_basics(N: int, m: int, K: int, seed: int, tol: float) -> list[CheckResult]:
    """d^2 = 0, graded Leibniz, the exponential chain rule and flatness of omega."""
    g = random_germ(N, m, K, seed=seed, exact=False, unimodular=False)
    tag = f"N{N}/m{m}"
    inp = {"N": N, "m": m, "K": K, "seed": seed}
    om = g.omega
    a = om[0, 0]
    b = g.metric[N - 1, 0]
    out = [
        make_check(f"jets/d-squared/{tag}", "d of d vanishes on metric entries and omega",
                   max(_res(d(d(b))), _res(d(d(a)))), tol, inputs=inp),
        make_check(f"jets/leibniz/{tag}", "graded Leibniz rule for d on a 1-form times a 0-form",
                   _res(_sub(d(a * b), d(a) * b - a * d(b))), tol, inputs=inp),
    ]
    p = b - b.const(b.scalar_value())
    e = jet_exp(p)
    out.append(make_check(f"jets/exp-chain-rule/{tag}", "d exp(p) = exp(p) dp",
                          _res(_sub(d(e), e * d(p))), tol, inputs=inp))
    dxk = [partial(b, j) for j in range(m)]
    out.append(make_check(f"jets/partials-commute/{tag}", "mixed partial derivatives commute",
                          max(_res(_sub(partial(dxk[i], j), partial(dxk[j], i)))
                              for i in range(m) for j in range(i + 1, m)) if m > 1 else 0.0,
                          tol, inputs=inp))
    flat = om.map(d) + om @ om
    out.append(make_check(f"jets/omega-flat/{tag}", "d omega + omega^2 = 0", _mres(flat), tol, inputs=inp))
    ext = extend_base(g, "scale_up", 1.5)
    back = max(_res(_sub(restrict_s(x), y.scale(1.5))) for rx, ry in zip(ext.metric.rows, g.metric.rows)
               for x, y in zip(rx, ry))
    out.append(make_check(f"jets/extend-restrict/{tag}", "restricting the rescaled metric to s = s0 gives s0 h",
                          back, tol, inputs=inp))
    om_e = ext.omega
    s = s_variable(ext.sig, 1.5, om_e[0, 0].order + 1, False)
    log_ds = d(s) * jet_inverse(s)
    shift = 0.0
    for i in range(N):
        for j in range(N):
            expect = rehome(om[i, j], ext.sig) + (log_ds if i == j else log_ds.const(0))
            shift = max(shift, _res(_sub(om_e[i, j], expect)))
    out.append(make_check(f"jets/rescaled-omega/{tag}", "omega of s*h is omega + ds/s",
                          shift, tol, inputs=inp))
    sq = om_e @ om_e
    sq0 = om @ om
    r = max(_res(_sub(restrict_s(sq[i, j]), sq0[i, j])) for i in range(N) for j in range(N))
    r = max(r, max(_res(ds_component(sq[i, j])) for i in range(N) for j in range(N)))
    out.append(make_check(f"jets/rescaled-omega-square/{tag}", "the square of omega is unchanged by rescaling h",
                          r, tol, inputs=inp))
    return out


def z_closedness(N: int, m: int, K: int, seed: int, tol: float) -> list[CheckResult]:
    g = complexify(random_germ(N, m, K, seed=seed, exact=False, field="complex", unimodular=False))
    tag = f"N{N}/m{m}"
    inp = {"N": N, "m": m, "K": K, "seed": seed}
    polys = [("ch", InvariantPolynomial.ch()), ("chern", InvariantPolynomial.chern())]
    polys += [(f"n{j}", InvariantPolynomial.n(j)) for j in range(1, N + 1)]
    out = []
    worst = 0.0
    det = {}
    for name, P in polys:
        r = _res(d(P_z(g, P)))
        det[name] = r
        worst = max(worst, r)
    out.append(make_check(f"jets/closed-z-forms/{tag}", "d P_z = 0 for ch, c and the power sums",
                          worst, tol, inputs=inp, detail=det))
    gr = complexify(random_germ(N, m, K, seed=seed, exact=False, unimodular=False))
    ev = {}
    for j in range(2, N + 1, 2):
        ev[f"n{j}"] = _res(P_z(gr, InvariantPolynomial.n(j)))
    out.append(make_check(f"jets/even-power-sums-real/{tag}",
                          "even power sums of omega vanish for a real germ",
                          max(ev.values(), default=0.0), tol, inputs=inp, detail=ev))
    return out


def pulled_closedness(N: int, m: int, K: int, seed: int, t: float, tol: float,
                      lattice: bool = True) -> list[CheckResult]:
    """d of the pulled-back delta, rho and of the dual-lattice delta sum."""
    from .lattice import sum_closedness_check
    from .thom import pull_delta, pull_rho

    inp = {"N": N, "m": m, "K": K, "seed": seed, "t": t}
    g = random_germ(N, m, K, seed=seed, exact=False, unimodular=False)
    mu = _section(N, seed, 2.0)
    pf = pull_delta(g, mu, t)
    out = [make_check(f"jets/closed-delta/N{N}/t{t:g}", "d of the pulled-back delta vanishes",
                      _res(d(pf.form)) * pf.weight(), tol, inputs={**inp, "section": mu},
                      detail={"form_max": _res(pf.value())})]
    gu = random_germ(N, m, K, seed=seed, exact=False, unimodular=True)
    pr = pull_rho(gu, mu, t)
    out.append(make_check(f"jets/closed-rho/N{N}/t{t:g}", "d of the pulled-back rho vanishes",
                          _res(d(pr.form)) * pr.weight(), tol, inputs={**inp, "section": mu},
                          detail={"form_max": _res(pr.value())}))
    if lattice:
        c = sum_closedness_check(g, t, tol)
        c.check_id = f"jets/closed-delta-sum/N{N}/t{t:g}"
        c.inputs.update(seed=seed)
        out.append(c)
    return out


def jets_suite(sc: Scenario, traces: Traces | None = None) -> list[CheckResult]:
    out = []
    for N in sc.ranks((1, 3)):
        m = sc.base_dim or 2 * N
        K = sc.jet_order or (3 if N == 1 else 2)
        out += jet_basics(N, m, K, sc.base_seed, sc.tol_or(1e-10))
        out += z_closedness(N, m, K, sc.base_seed, sc.tol_or(1e-10))
        for t in sc.t_values((0.5, 1.0, 2.0)):
            out += pulled_closedness(N, m, K, sc.base_seed, t, sc.tol_or(1e-10))
    return out


# ---------------------------------------------------------------------------
# thom: transgressions, rank-one oracles, degrees and parity


def _alpha_section(g, N: int, exact: bool) -> list:
    """Affine section lam_j = (j + 1) + x_(j mod m): not flat, so alpha sees d lam."""
    m, K = g.base_dim, g.order
    return [Multivector.coordinate(g.sig, j % m, K + 1, exact) + (j + 1) for j in range(N)]


def transgression_checks(N: int, m: int, K: int, seed: int, exact: bool, t0, tol: float) -> list[CheckResult]:
    from .thom import transgression_check

    out = []
    mode = "exact" if exact else "float"
    for fam in ("alpha", "delta", "rho"):
        g = random_germ(N, m, K, seed=seed, exact=exact, unimodular=fam == "rho")
        if fam == "alpha":
            lam = _alpha_section(g, N, exact)
            shown = "affine"
        else:
            lam = [1, -2, 1, 3][:N] if exact else _section(N, seed, 1.5)
            shown = [str(v) for v in lam]
        r = transgression_check(g, fam, lam, t0)
        res = r.residuals()
        value = EXACT_ZERO if exact and r.exact_zero() else max(res.values())
        out.append(make_check(f"thom/transgression-{fam}/N{N}/{mode}",
                              f"extended {fam} is closed, restricts to {fam} and its ds part is the transgression",
                              value, 0.0 if exact else tol,
                              inputs={"N": N, "m": m, "K": K, "seed": seed, "t0": str(t0), "section": shown},
                              detail=res))
    return out


def rank_one_oracles(tol: float = 1e-12) -> list[CheckResult]:
    """Closed forms for rank one: Thom integral, delta for omega = S dx, epsilon for omega = 0."""
    from scipy.integrate import quad

    from .thom import alpha_profile, pull_delta, pull_epsilon

    out = []
    worst = 0.0
    rows = []
    for t in (0.5, 1.0, 3.0):
        val, err = quad(lambda l: alpha_profile(t, l), -np.inf, np.inf, epsabs=1e-13)
        rows.append((t, val, err))
        worst = max(worst, abs(val - 1))
    out.append(make_check("thom/rank1-fiber-integral", "fibre integral of the rank-one Thom form is 1",
                          worst, 1e-9, inputs={"t": [0.5, 1.0, 3.0]}, detail={"trace": rows}))
    g = constant_direction_germ([[Fraction(3, 4)]], 2, 2, exact=False)
    w = g.dual().omega[0, 0].at_origin()
    worst = 0.0
    for lam, t in ((0.7, 1.3), (1.1, 0.5), (-0.4, 2.0)):
        got = pull_delta(g, [lam], t).value().at_origin()
        want = w.scale(-(0.25 - 0.5 * t * lam * lam) * math.exp(-t * lam * lam))
        worst = max(worst, _res(_sub(got, want)))
    out.append(make_check("thom/rank1-delta-closed-form",
                          "rank-one delta is -(1/4 - t lam^2/2) exp(-t lam^2) times the dual omega",
                          worst, tol, inputs={"S": "3/4", "m": 2, "K": 2}))
    z = trivial_germ(1, 2, 2, exact=False)
    worst = 0.0
    for lam, t in ((0.7, 1.3), (1.1, 0.5), (0.0, 0.25)):
        got = pull_epsilon(z, [lam], t).value().at_origin()
        want = (lam * lam / 2 - 1 / (4 * t)) * math.exp(-t * lam * lam)
        worst = max(worst, _res(_sub(got, got.const(want))))
    out.append(make_check("thom/rank1-epsilon-flat-metric",
                          "rank-one epsilon with constant metric is (lam^2/2 - 1/(4t)) exp(-t lam^2)",
                          worst, tol, inputs={"m": 2, "K": 2}))
    return out


def degree_checks(N: int, m: int, K: int, seed: int, exact: bool) -> list[CheckResult]:
    """Form degrees: alpha N, beta N - 1, delta and rho 2N - 1, epsilon and sigma 2N - 2; all of
    delta, epsilon, rho and sigma vanish for even N."""
    from .thom import pull_alpha, pull_beta, pull_delta, pull_epsilon, pull_rho, pull_sigma

    g = random_germ(N, m, K, seed=seed, exact=exact, unimodular=False)
    gu = random_germ(N, m, K, seed=seed, exact=exact, unimodular=True)
    lam = _alpha_section(g, N, exact)
    mu = [1, -2, 1, 3][:N] if exact else _section(N, seed, 1.5)
    t = 1
    forms = {
        "alpha": (pull_alpha(g, lam, t), {N}),
        "beta": (pull_beta(g, lam, t), {N - 1}),
        "delta": (pull_delta(g, mu, t), {2 * N - 1}),
        "epsilon": (pull_epsilon(g, mu, t), {2 * N - 2}),
        "rho": (pull_rho(gu, mu, t), {2 * N - 1}),
        "sigma": (pull_sigma(gu, mu, t), {2 * N - 2}),
    }
    out = []
    mode = "exact" if exact else "float"
    inp = {"N": N, "m": m, "K": K, "seed": seed}
    bad = {}
    for name, (pf, want) in forms.items():
        got = pf.degree_profile()
        if name in ("alpha", "beta") or N % 2:
            if got and got != want:
                bad[name] = sorted(got)
    out.append(make_check(f"thom/form-degrees/N{N}/{mode}", "pulled-back forms sit in their expected degree",
                          EXACT_ZERO if not bad and exact else float(len(bad)), 0.0 if exact else 0.5,
                          inputs=inp, detail={k: sorted(v[0].degree_profile()) for k, v in forms.items()}))
    if N % 2 == 0:
        vals = {k: _res(forms[k][0].form, exact) for k in ("delta", "epsilon", "rho", "sigma")}
        worst = EXACT_ZERO if all(v == EXACT_ZERO for v in vals.values()) else max(
            (v for v in vals.values() if v != EXACT_ZERO), default=0.0)
        out.append(make_check(f"thom/even-rank-vanishing/N{N}/{mode}",
                              "delta, epsilon, rho and sigma vanish for even rank", worst, 0.0 if exact else 1e-12,
                              inputs=inp, detail=vals))
    return out


def section_checks(N: int, m: int, K: int, seed: int, tol: float) -> list[CheckResult]:
    from .thom import nabla_xhat_check, pull_delta

    g = random_germ(N, m, K, seed=seed, exact=True, unimodular=False)
    mu = [1, -2, 1, 3][:N]
    r = nabla_xhat_check(g, mu)
    out = [make_check(f"thom/covariant-derivative-xhat/N{N}",
                      "pulled-back covariant derivative of xhat is half the contracted dual omega",
                      _res(r, True), 0.0, inputs={"N": N, "m": m, "K": K, "seed": seed})]
    if N % 2 == 0:
        return out
    gf = random_germ(N, 2 * N, max(K, 1), seed=seed, exact=False, unimodular=False)
    moving = [Multivector.coordinate(gf.sig, 0, gf.order + 1, False) + 0.5] + [0.3] * (N - 1)
    pf = pull_delta(gf, moving, 1.0)
    nz = _res(d(pf.value()))
    out.append(make_check(f"thom/non-flat-section-not-closed/N{N}",
                          "delta pulled back by a non-flat section is not closed (control)",
                          nz, tol, inputs={"N": N, "m": 2 * N, "section": "x0 + 1/2"}, informational=True,
                          passed=nz > tol))
    return out


def thom_suite(sc: Scenario, traces: Traces | None = None) -> list[CheckResult]:
    out = rank_one_oracles()
    for N in sc.ranks((1, 2, 3)):
        m = sc.base_dim or (2 if N == 1 else 2 * N - 1)
        K = sc.jet_order or (2 if N < 3 else 1)
        modes = (True, False) if sc.mode is None else (sc.mode == "exact",)
        for exact in modes:
            t0 = 4 if exact else sc.t_values((1.3,))[0]
            out += transgression_checks(N, m, K, sc.base_seed, exact, t0, sc.tol_or(1e-10))
            out += degree_checks(N, m, K, sc.base_seed, exact)
        out += section_checks(N, m, K, sc.base_seed, sc.tol_or(1e-10))
    return out


# ---------------------------------------------------------------------------
# lattice: Poisson summation, the exchange identity and asymptotics


def _lattice_germ(N: int, m: int, K: int, seed: int, c, unimodular: bool = True, exact: bool = False,
                  identity_at_origin: bool = False):
    return random_germ(N, m, K, seed=seed, exact=exact, unimodular=unimodular, lattice_scale=c,
                       identity_at_origin=identity_at_origin)


def _retag(c: CheckResult, suffix: str) -> CheckResult:
    c.check_id += suffix
    return c


def poisson_checks(ranks, seed: int, scales, tol: float) -> list[CheckResult]:
    from .lattice import poisson_check

    out = []
    for N in ranks:
        for c in scales:
            g = _lattice_germ(N, 2 * N - 1, 1, seed, c, unimodular=False)
            shift = _section(N, seed, 0.5)
            for t in (0.3, 1.0):
                out.append(_retag(poisson_check(g, t, shift, tol), f"/c{c}"))
    return out


def exchange_checks(N: int, m: int, K: int, seed: int, scales, ts, tol: float) -> list[CheckResult]:
    from .lattice import thm219_check

    out = []
    for c in scales:
        g = _lattice_germ(N, m, K, seed, c)
        for t in ts:
            out += thm219_check(g, t, tol)
    return out


def window_checks(N: int, m: int, K: int, seed: int, t: float, tol: float,
                  radius: int | None = None) -> list[CheckResult]:
    """Tail soundness (radius R against 2R + 1) and the moment route against direct summation."""
    from .lattice import residual, sum_pulled

    g = _lattice_germ(N, m, K, seed, 1, unimodular=False)
    auto = sum_pulled(g, "delta", t, radius=radius)
    R = auto.window.radius
    wide = sum_pulled(g, "delta", t, radius=2 * R + 1)
    r = residual(auto.form, wide.form)
    inp = {"N": N, "m": m, "K": K, "t": t}
    out = [make_check(f"lattice/tail-bound-sound/N{N}", "doubling the window changes the sum by less than the tail bound",
                      r, max(auto.tail_bound, tol), inputs=inp,
                      detail={"radius": R, "tail_bound": auto.tail_bound})]
    direct = sum_pulled(g, "delta", t, route="direct")
    out.append(make_check(f"lattice/moments-vs-direct/N{N}",
                          "Gaussian-moment contraction matches term-by-term summation",
                          residual(auto.form, direct.form), tol, inputs=inp,
                          detail={"points": len(direct.window.points)}))
    return out


def flat_metric_check(N: int, m: int, K: int, t: float) -> CheckResult:
    from .lattice import sum_pulled

    g = trivial_germ(N, m, K, exact=False)
    S = sum_pulled(g, "delta", t)
    return make_check(f"lattice/constant-metric-delta-sum/N{N}", "delta sum vanishes when omega = 0",
                      _res(S.form), 1e-14, inputs={"N": N, "m": m, "K": K, "t": t})


def lattice_suite(sc: Scenario, traces: Traces | None = None) -> list[CheckResult]:
    from .lattice import (
        large_t_check,
        n1_epsilon_checks,
        small_t_check,
        sum_transgression_check,
        zero_mode_check,
    )

    ranks = sc.ranks((1, 2, 3))
    scales = (1, 2) if sc.lattice_scale == "1" else (sc.scale,)
    out = poisson_checks(ranks, sc.base_seed, scales, sc.tol_or(1e-12))
    for N in ranks:
        if N % 2 == 0:
            continue
        m = sc.base_dim or (2 if N == 1 else 2 * N - 1)
        K = sc.jet_order if sc.jet_order is not None else (2 if N == 1 else 1)
        ts = sc.t_values((0.5, 1.0, 2.0) if N == 1 else (1.0,))
        out += exchange_checks(N, m, K, sc.base_seed, scales, ts, sc.tol_or(1e-10 if N == 1 else 1e-8))
        g = _lattice_germ(N, m, K, sc.base_seed, 1, unimodular=N > 1)
        ge = _lattice_germ(N, m, K, sc.base_seed, 1, unimodular=N > 1, exact=True)
        out.append(zero_mode_check(ge, 1))
        out.append(large_t_check(g, (0.02, 0.04, 0.08) if N == 1 else (4.0, 8.0, 16.0), 1e-10))
        gu = g if N > 1 else _lattice_germ(N, m, K, sc.base_seed, 1)
        out.append(small_t_check(gu, "delta"))
        out.append(small_t_check(gu, "epsilon"))
        out.append(sum_transgression_check(g, 1.0, 1e-10))
        out += window_checks(N, m, K, sc.base_seed, 1.0, 1e-12, sc.radius_value)
        out.append(flat_metric_check(N, m, K, 1.0))
        if N == 1:
            for c in scales:
                out += n1_epsilon_checks(_lattice_germ(1, m, K, sc.base_seed, c, unimodular=False, identity_at_origin=True))
    return out


# ---------------------------------------------------------------------------
# phi: the Mellin-type transform of the delta sums


def phi_suite(sc: Scenario, traces: Traces | None = None) -> list[CheckResult]:
    from .lattice import dphi0_check, phi_compare_check, phi_quadrature, phi_series, phi_setup

    out = []
    for N in [n for n in sc.ranks((3,)) if n % 2 and n > 1]:
        m = sc.base_dim or 2 * N - 1
        K = sc.jet_order if sc.jet_order is not None else 1
        g = random_germ(N, m, K, seed=sc.base_seed, exact=True, unimodular=False, identity_at_origin=True)
        setup = phi_setup(g)
        rows = []
        for s in sc.s_values((-3.0, -5.0)):
            c = phi_compare_check(g, s, sc.tol_or(1e-6), setup)
            out.append(c)
            rows.append((s, c.detail["max_coefficient"], c.residual, c.detail["series_tail"]))
        out += dphi0_check(g, sc.tol_or(1e-6), setup)
        z = trivial_germ(N, m, K, exact=True)
        q = phi_quadrature(z, -3.0)
        ser, _, _ = phi_series(z, -3.0)
        out.append(make_check(f"phi/constant-metric-vanishes/N{N}", "phi vanishes when omega = 0",
                              max(_res(q.form), _res(ser)), 1e-14, inputs={"N": N, "m": m, "K": K, "s": -3.0}))
        if traces is not None:
            traces[f"phi_N{N}"] = (["s", "max_coefficient", "relative_difference", "series_tail"], rows)
    return out


# ---------------------------------------------------------------------------
# wrappers around the module suites


def exact_identities_suite(sc: Scenario, traces: Traces | None = None) -> list[CheckResult]:
    from .identities import exact_identity_checks

    out = []
    for N in sc.ranks((1, 2, 3)):
        out += exact_identity_checks(N, seeds=sc.seeds((1, 2, 3, 4, 5)), exact=sc.exact_or(True),
                                     base_dim=sc.base_dim, order=sc.jet_order)
    return out


def torsion_suite(sc: Scenario, traces: Traces | None = None) -> list[CheckResult]:
    from .superconnection import torsion_suite as run

    rows: list = []
    out = run(seed=sc.base_seed, m=sc.base_dim or 2, K=sc.jet_order or 2, tol=sc.tol_or(1e-6), csv_trace=rows)
    if traces is not None:
        traces["torsion_integrand"] = (["case", "t", "value"], rows)
    return out


def fock_suite(sc: Scenario, traces: Traces | None = None) -> list[CheckResult]:
    from .superconnection import fock_suite as run

    out = []
    for N in sc.ranks((1, 2, 3)):
        t = sc.t_values((2.0,))[0]
        out += run(N, seed=sc.base_seed, t=t, exact=sc.exact_or(True), base_dim=sc.base_dim,
                   order=sc.jet_order, fourier=N % 2 == 1, bridge=sc.suite != "all")
    return out


SUITE_FUNCTIONS: dict[str, Callable[[Scenario, Traces | None], list[CheckResult]]] = {
    "exact-identities": exact_identities_suite,
    "jets": jets_suite,
    "thom": thom_suite,
    "lattice": lattice_suite,
    "phi": phi_suite,
    "torsion": torsion_suite,
    "fock": fock_suite,
}
