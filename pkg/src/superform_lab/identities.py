"""Exact algebraic identities: Berezin normalisations, the Gaussian Berezin
lemma, Newton/Cayley-Hamilton identities for omega, the z-forms and the two
routes to the pulled-back volume form.

Each function returns ``CheckResult`` records; in exact mode a passing
residual is the string "exact-zero".
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .flat_bundle import (
    FlatBundleGerm,
    InvariantPolynomial,
    P_even,
    P_z,
    P_z_from_omega,
    ch_z_lambda,
    conjugated_dual_omega,
    curvature_argument,
    n_j_z_closed_form,
    newton_identity_scalar,
    random_germ,
)
from .grassmann import (
    AlgebraMatrix,
    Multivector,
    Signature,
    berezin_double,
    berezin_single,
    bilinear,
    det_even,
    exp_even,
    gaussian,
    tr_z,
)
from .report import EXACT_ZERO, CheckResult, make_check
from .thom import pull_vol


def _res(x: Multivector) -> float | str:
    if x.is_zero():
        return EXACT_ZERO if x.exact else 0.0
    return x.max_abs()


def _diff(a: Multivector, b: Multivector) -> float | str:
    if a.sig != b.sig:
        b = b.lift(a.sig)
    order = min(a.order, b.order)
    return _res(a.with_order(order) - b.with_order(order))


def _num(exact: bool, v):
    if exact:
        return gaussian(Fraction(v)) if not isinstance(v, tuple) else gaussian(*map(Fraction, v))
    return complex(*v) if isinstance(v, tuple) else float(v)


def _tol(exact: bool, tol: float) -> float:
    return 0.0 if exact else tol


# ---------------------------------------------------------------------------
# Berezin normalisations


def berezin_normalisation_checks(N: int, exact: bool = True) -> list[CheckResult]:
    sig = Signature(1, False, N)
    one = Multivector.scalar(sig, 1, 0, exact)
    psi = [sig.psi(k) for k in range(N)]
    hat = [sig.psihat(k) for k in range(N)]
    top1 = Multivector.monomial(sig, psi, 1, 0, exact)
    top2 = Multivector.monomial(sig, psi + hat, 1, 0, exact)
    r1 = _diff(berezin_single(top1), one)
    r2 = _diff(berezin_double(top2), one)
    # lower monomials integrate to zero; a base factor passes through
    low = berezin_double(Multivector.monomial(sig, psi[:-1] + hat, 1, 0, exact))
    low = low + berezin_single(Multivector.monomial(sig, psi[:-1], 1, 0, exact))
    dx = Multivector.monomial(sig, [sig.dx(0)], 1, 0, exact)
    r4 = _diff(berezin_single(dx * top1), dx)
    inputs = {"N": N, "exact": exact}
    return [
        make_check(f"grassmann/berezin-single-top/N{N}", "single-block Berezin integral of the top monomial is 1",
                   r1, 0.0, inputs=inputs),
        make_check(f"grassmann/berezin-double-top/N{N}", "double-block Berezin integral of the top monomial is 1",
                   r2, 0.0, inputs=inputs),
        make_check(f"grassmann/berezin-lower-vanish/N{N}", "Berezin integrals vanish below the top degree",
                   _res(low), 0.0, inputs=inputs),
        make_check(f"grassmann/berezin-passthrough/N{N}", "base forms pass through the Berezin integral",
                   r4, 0.0, inputs=inputs),
    ]


# ---------------------------------------------------------------------------
# Gaussian Berezin integral with a symmetric odd insertion


def _random_one_form(proto: Multivector, rng: np.random.Generator) -> Multivector:
    sig = proto.sig
    acc = proto.zero_like()
    for a in range(sig.base_dim):
        c = Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4)))
        coeff = Multivector.scalar(sig, _num(proto.exact, c), proto.order, proto.exact)
        if proto.order >= 1:
            x = Multivector.coordinate(sig, int(rng.integers(0, sig.base_dim)), proto.order, proto.exact)
            coeff = coeff + x.scale(_num(proto.exact, Fraction(int(rng.integers(-2, 3)), 2)))
        acc = acc + coeff * proto.gen(sig.dx(a))
    return acc


def random_lemma_inputs(N: int, seed: int, exact: bool = True, m: int | None = None,
                        order: int = 0) -> tuple[AlgebraMatrix, AlgebraMatrix]:
    """Antisymmetric V (numeric part plus 2-form entries) and symmetric W (1-form entries)."""
    m = 2 * N + 2 if m is None else m
    sig = Signature(m, False, N, True)
    proto = Multivector.zero(sig, order, exact)
    rng = np.random.default_rng(seed)
    V = [[proto.zero_like() for _ in range(N)] for _ in range(N)]
    W = [[proto.zero_like() for _ in range(N)] for _ in range(N)]
    for i in range(N):
        for j in range(i, N):
            w = _random_one_form(proto, rng)
            W[i][j] = w
            W[j][i] = w
            if j > i:
                c = proto.const(_num(exact, Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 4)))))
                v = c + _random_one_form(proto, rng) * _random_one_form(proto, rng) \
                    + _random_one_form(proto, rng) * _random_one_form(proto, rng)
                V[i][j] = v
                V[j][i] = -v
    return AlgebraMatrix(V), AlgebraMatrix(W)


def _gaussian_weight(V: AlgebraMatrix) -> Multivector:
    """exp(1/2 <psi, V psi> - 1/2 <psihat, V psihat>)."""
    proto = V.proto
    sig = proto.sig
    N = V.shape[0]
    psi = [proto.gen(sig.psi(k)) for k in range(N)]
    hat = [proto.gen(sig.psihat(k)) for k in range(N)]
    q = bilinear(psi, V, psi) - bilinear(hat, V, hat)
    return exp_even(q.scale(_num(proto.exact, Fraction(1, 2))))


def _inv_i_pi(proto: Multivector) -> Multivector:
    """1 / (i pi)."""
    if proto.exact:
        return Multivector.pi_power(proto.sig, -2, proto.order, True).scale(gaussian(0, -1))
    return proto.const(1 / (1j * np.pi))


def lemma_sides(V: AlgebraMatrix, W: AlgebraMatrix) -> tuple[Multivector, Multivector]:
    """Berezin integral of <psi, W psihat> times the Gaussian, and -pi^(N-1) Tr_z det(V/(i pi) + z W)."""
    proto = V.proto
    sig = proto.sig
    N = V.shape[0]
    psi = [proto.gen(sig.psi(k)) for k in range(N)]
    hat = [proto.gen(sig.psihat(k)) for k in range(N)]
    lhs = berezin_double(bilinear(psi, W, hat) * _gaussian_weight(V))
    z = proto.gen(sig.z)
    arg = V.map(lambda x: x * _inv_i_pi(proto)) + W.map(lambda x: z * x)
    if proto.exact:
        pref = Multivector.pi_power(sig, 2 * (N - 1), proto.order, True).scale(gaussian(-1))
    else:
        pref = proto.const(-np.pi ** (N - 1))
    rhs = pref * det_even(arg)
    return lhs, tr_z(rhs)


def lemma_checks(N: int, seed: int, exact: bool = True, m: int | None = None) -> list[CheckResult]:
    V, W = random_lemma_inputs(N, seed, exact, m)
    lhs, rhs = lemma_sides(V, W)
    inputs = {"N": N, "seed": seed, "exact": exact, "m": V.proto.sig.base_dim}
    out = [make_check(f"grassmann/gaussian-odd-insertion/N{N}/s{seed}",
                      "Berezin integral of <psi,W psihat> e^(<psi,V psi>/2 - <psihat,V psihat>/2) "
                      "equals -pi^(N-1) Tr_z det(V/(i pi) + zW)",
                      _diff(lhs, rhs), _tol(exact, 1e-12), inputs=inputs,
                      detail={"lhs_terms": len(lhs.terms)})]
    out += pairing_checks(V, seed)
    A = random_symmetric_one_forms(N, seed, exact, V.proto.sig.base_dim)
    out += pairing_checks(A @ A, seed, tag="/square")
    return out


def random_symmetric_one_forms(N: int, seed: int, exact: bool = True, m: int | None = None,
                               order: int = 0) -> AlgebraMatrix:
    m = 2 * N + 2 if m is None else m
    sig = Signature(m, False, N, True)
    proto = Multivector.zero(sig, order, exact)
    rng = np.random.default_rng(seed + 31)
    A = [[proto.zero_like() for _ in range(N)] for _ in range(N)]
    for i in range(N):
        for j in range(i, N):
            A[i][j] = A[j][i] = _random_one_form(proto, rng)
    return AlgebraMatrix(A)


def pairing_integral(V: AlgebraMatrix) -> Multivector:
    """Berezin integral of <psi, psihat> exp(<psi,V psi>/2 - <psihat,V psihat>/2)."""
    proto = V.proto
    sig = proto.sig
    pairing = proto.zero_like()
    for k in range(V.shape[0]):
        pairing = pairing + proto.gen(sig.psi(k)) * proto.gen(sig.psihat(k))
    return berezin_double(pairing * _gaussian_weight(V))


def pairing_checks(V: AlgebraMatrix, seed: int, tag: str = "") -> list[CheckResult]:
    """The pairing integral against 1 (N = 1) or 0 (N > 1).

    For N = 3 the integral equals Tr(V^2)/2, which vanishes for V = A^2 with
    A a symmetric matrix of 1-forms but not for a generic antisymmetric V;
    the closed form is recorded as an informational check.
    """
    proto = V.proto
    N = V.shape[0]
    exact = proto.exact
    val = pairing_integral(V)
    target = proto.const(1 if N == 1 else 0)
    inputs = {"N": N, "seed": seed, "exact": exact, "m": proto.sig.base_dim, "class": tag.strip("/") or "generic"}
    out = [make_check(f"grassmann/gaussian-pairing/N{N}/s{seed}{tag}",
                      "Berezin integral of <psi,psihat> times the Gaussian is 1 for N = 1 and 0 for N > 1",
                      _diff(val, target), _tol(exact, 1e-12), inputs=inputs)]
    if N == 3:
        half_trace = (V @ V).trace().scale(_num(exact, Fraction(1, 2)))
        out.append(make_check(f"grassmann/gaussian-pairing-trace/N{N}/s{seed}{tag}",
                              "for N = 3 the pairing integral equals Tr(V^2)/2",
                              _diff(val, half_trace), _tol(exact, 1e-12), inputs=inputs, informational=True,
                              detail={"half_trace_zero": half_trace.is_zero()}))
    return out


# ---------------------------------------------------------------------------
# Newton identities and z-forms of a flat bundle


def _frac(exact: bool, q: Fraction):
    return gaussian(q) if exact else float(q)


class _ZForms:
    """Memo of P^z values of one germ, keyed by the polynomial description."""

    def __init__(self, g: FlatBundleGerm):
        self.g = g
        self.cache: dict[str, Multivector] = {}

    def __call__(self, P: InvariantPolynomial) -> Multivector:
        key = P.describe()
        if key not in self.cache:
            self.cache[key] = P_z(self.g, P)
        return self.cache[key]


def newton_suite(g: FlatBundleGerm, tag: str = "", extended: bool = True,
                 zf: _ZForms | None = None) -> list[CheckResult]:
    """omega^(2N) = 0, c_j^z = (-1)^(j-1)/j n_j^z and scalar Newton.

    ``extended`` adds Cayley-Hamilton for omega^2/(8 i pi), constancy of the
    even forms, the closed form of n_j^z and its vanishing above the rank.
    """
    zf = _ZForms(g) if zf is None else zf
    N = g.rank
    ex = g.exact
    om = g.omega
    inputs = {"N": N, "m": g.base_dim, "K": g.order, "exact": ex, **{k: g.notes[k] for k in ("seed",) if k in g.notes}}
    out = []
    P2N = om.power(2 * N)
    out.append(make_check(f"flat/omega-power-2N/N{N}{tag}", "omega^(2N) vanishes",
                          _matrix_res(P2N, ex), _tol(ex, 1e-12), inputs=inputs))
    if extended:
        out += _newton_extended(g, tag, inputs)
    worst = EXACT_ZERO if ex else 0.0
    for j in range(1, N + 1):
        nj = zf(InvariantPolynomial.n(j)).scale(_frac(ex, Fraction((-1) ** (j - 1), j)))
        r = _diff(zf(InvariantPolynomial.c_j(j)), nj)
        worst = _worse(worst, r)
    out.append(make_check(f"flat/chern-newton-z/N{N}{tag}", "c_j^z = (-1)^(j-1)/j n_j^z for j <= N",
                          worst, _tol(ex, 1e-12), inputs=inputs))
    rng = np.random.default_rng(int(g.notes.get("seed", 0)) + 17)
    vals = [Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 5))) for _ in range(N)]
    bad = [j for j in range(1, N + 1) if newton_identity_scalar(vals, j) != 0]
    out.append(make_check(f"flat/newton-scalar/N{N}{tag}", "Newton identity on a diagonal matrix",
                          EXACT_ZERO if not bad else float(len(bad)), 0.0,
                          inputs={"values": [str(v) for v in vals]}))
    if extended:
        worst_cf = EXACT_ZERO if ex else 0.0
        for j in range(1, N + 1):
            worst_cf = _worse(worst_cf, _diff(zf(InvariantPolynomial.n(j)), n_j_z_closed_form(g, j)))
        out.append(make_check(f"flat/n-z-closed-form/N{N}{tag}",
                              "n_j^z from the z-trace equals j 2^-(2j-1) (2 i pi)^-(j-1) Tr[omega^(2j-1)]",
                              worst_cf, _tol(ex, 1e-12), inputs=inputs))
        out.append(make_check(f"flat/n-z-above-rank/N{N}{tag}", "n_j^z vanishes for j = N+1",
                              _res(n_j_z_closed_form(g, N + 1)), _tol(ex, 1e-12), inputs=inputs))
    return out


def _newton_extended(g: FlatBundleGerm, tag: str, inputs: dict) -> list[CheckResult]:
    N, ex = g.rank, g.exact
    out = []
    A = curvature_argument(g.omega)
    cs = [P_even(g, InvariantPolynomial.c_j(j)) for j in range(N + 1)]
    acc = A.power(N)
    for j in range(1, N + 1):
        acc = acc + A.power(N - j).map(lambda x, c=cs[j], s=(-1) ** j: (c * x).scale(_frac(ex, Fraction(s))))
    out.append(make_check(f"flat/cayley-hamilton/N{N}{tag}",
                          "Cayley-Hamilton identity for omega^2/(8 i pi)", _matrix_res(acc, ex), _tol(ex, 1e-12),
                          inputs=inputs))
    cj = EXACT_ZERO if ex else 0.0
    for j in range(1, N + 1):
        cj = _worse(cj, _res(cs[j]))
    out.append(make_check(f"flat/even-forms-constant/N{N}{tag}",
                          "c_j(omega^2/(8 i pi)) vanishes for j >= 1, so P of the curvature argument is P(0)",
                          cj, _tol(ex, 1e-12), inputs=inputs))
    return out


def _matrix_res(M: AlgebraMatrix, exact: bool):
    r = EXACT_ZERO if exact else 0.0
    for row in M.rows:
        for x in row:
            r = _worse(r, _res(x))
    return r


def _worse(a, b):
    fa = 0.0 if a == EXACT_ZERO else a
    fb = 0.0 if b == EXACT_ZERO else b
    if fa == 0.0 and fb == 0.0:
        return a if a == EXACT_ZERO and b == EXACT_ZERO else 0.0
    return max(fa, fb)


def z_form_checks(g: FlatBundleGerm, tag: str = "", extended: bool = True,
                  zf: _ZForms | None = None) -> list[CheckResult]:
    """Product rule for z-forms and sign change under the antidual; ``extended``
    adds ch^z of the exterior powers of the antidual."""
    zf = _ZForms(g) if zf is None else zf
    N = g.rank
    ex = g.exact
    inputs = {"N": N, "m": g.base_dim, "K": g.order, "exact": ex, "field": g.field}
    P, Q = InvariantPolynomial.ch(), InvariantPolynomial.chern()
    lhs = P_z(g, P * Q)
    rhs = zf(Q).scale(_frac(ex, P.at_zero(N))) + zf(P).scale(_frac(ex, Q.at_zero(N)))
    out = [make_check(f"flat/z-product-rule/N{N}{tag}", "(PQ)^z = P(0) Q^z + P^z Q(0) for P = ch, Q = c",
                      _diff(lhs, rhs), _tol(ex, 1e-12), inputs=inputs)]
    worst = EXACT_ZERO if ex else 0.0
    conj_om, dual_om = conjugated_dual_omega(g), g.dual().omega
    for poly in (InvariantPolynomial.n(N), P):
        ref = -zf(poly)
        worst = _worse(worst, _diff(P_z_from_omega(conj_om, poly), ref))
        worst = _worse(worst, _diff(P_z_from_omega(dual_om, poly), ref))
    out.append(make_check(f"flat/z-antidual-sign/N{N}{tag}", "P^z of the antidual bundle is -P^z",
                          worst, _tol(ex, 1e-12), inputs=inputs))
    if extended and g.field == "complex":
        lam = ch_z_lambda(g)
        target = zf(InvariantPolynomial.n(N)).scale(_frac(ex, Fraction(1, N)))
        out.append(make_check(f"flat/exterior-chz/N{N}{tag}",
                              "ch^z of the exterior powers of the antidual equals n_N^z / N",
                              _diff(lam, target), _tol(ex, 1e-12), inputs=inputs))
    return out


# ---------------------------------------------------------------------------
# volume form


def volume_routes_check(N: int, seed: int, exact: bool = True, m: int | None = None,
                        K: int | None = None) -> CheckResult:
    """Wedge of the components of omega lambda against the Berezin formula."""
    g = random_germ(N, m, K, seed=seed, exact=exact, unimodular=True)
    rng = np.random.default_rng(seed + 5)
    lam = [Fraction(int(rng.integers(-4, 5)) or 1, int(rng.integers(1, 4))) for _ in range(N)]
    a = pull_vol(g, lam, "wedge").form
    b = pull_vol(g, lam, "berezin").form
    return make_check(f"thom/volume-routes/N{N}/s{seed}", "pulled-back volume form: wedge route equals Berezin route",
                      _diff(a, b), _tol(exact, 1e-12),
                      inputs={"N": N, "seed": seed, "m": g.base_dim, "K": g.order, "section": [str(x) for x in lam]},
                      detail={"terms": len(a.terms)})


# ---------------------------------------------------------------------------
# the suite


def exact_identity_checks(N: int, seeds=(1,), exact: bool = True, base_dim: int | None = None,
                          order: int | None = None, bridge_m: int | None = None) -> list[CheckResult]:
    """All exact identities for rank N: seed-independent ones once, the rest per seed."""
    from .superconnection import bridge_suite, clifford_checks

    out: list[CheckResult] = berezin_normalisation_checks(N, exact)
    out += clifford_checks(N)
    K = (2 if N <= 2 else 1) if order is None else order
    for seed in seeds:
        out += lemma_checks(N, seed, exact)
        g = random_germ(N, base_dim, K, seed=seed, exact=exact, field="complex", unimodular=False)
        tag = f"/s{seed}"
        zf = _ZForms(g)
        extended = seed == seeds[0]
        out += newton_suite(g, tag, extended, zf)
        out += z_form_checks(g, tag, extended, zf)
        out.append(volume_routes_check(N, seed, exact, base_dim, K))
        out += bridge_suite(N, seed, exact, m=bridge_m)
    return out
