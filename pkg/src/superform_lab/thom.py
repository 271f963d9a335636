"""Thom-type forms pulled back to the base by sections.

All forms are evaluated in the flat frame f_1..f_N of the bundle, with the
fiber generators psi_k = f_k.  Pairings carry the inverse Gram matrix:
sum_ij u_i A_ij v_j over an orthonormal frame becomes
sum_ab u_a (A H^-1)_ab v_b, and the Berezin integrals over the f-frame pick
up det(H)^(1/2) (one block) or det(H) (two blocks).

A Gaussian factor exp(-c * q0) whose exponent does not depend on the base
point is kept aside in ``PulledForm`` so that the stored form stays exact
and polynomial in symbolic sections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

from .flat_bundle import FlatBundleGerm
from .grassmann import (
    GEN_MASK,
    AlgebraMatrix,
    ExactnessError,
    Multivector,
    Signature,
    berezin_product,
    berezin_single,
    bilinear,
    det_even,
    exp_even,
    gaussian,
    interior_mult,
    inverse_even,
    key_degree,
    sqrt_even,
    to_exact,
    to_float,
    wedge_all,
)
from .jets import d, ds_component, extend_base, rehome, restrict_s


def exact_sqrt(value) -> Fraction:
    """Square root of a non-negative rational that is a perfect square."""
    v = Fraction(value)
    if v < 0:
        raise ExactnessError("negative value")
    rn, rd = math.isqrt(v.numerator), math.isqrt(v.denominator)
    if rn * rn != v.numerator or rd * rd != v.denominator:
        raise ExactnessError(f"sqrt({v}) is irrational")
    return Fraction(rn, rd)


class Scalars:
    """Numbers of one mode (exact Gaussian rationals or complex floats)."""

    def __init__(self, exact: bool):
        self.exact = exact

    def __call__(self, v):
        if self.exact:
            if isinstance(v, tuple):
                return gaussian(*v)
            if type(v).__name__ == "GaussianRational":
                return v
            return gaussian(Fraction(v))
        if type(v).__name__ == "GaussianRational":
            return complex(float(v.x), float(v.y))
        return complex(v)

    def sqrt(self, v):
        if self.exact:
            return gaussian(exact_sqrt(v))
        return complex(math.sqrt(float(v)))

    def inv(self, v):
        return to_exact(1) / self(v) if self.exact else 1 / self(v)


def check_t(t) -> None:
    if isinstance(t, Multivector):
        return
    if not float(t) > 0:
        raise ValueError("t must be positive")


@dataclass
class PulledForm:
    """Form on the base times exp(-gauss_factor * gauss_q0).

    ``gauss_q0`` is the base-point-independent part of the quadratic form
    (a number for numeric sections, a polynomial in the section parameters
    for symbolic ones).
    """

    form: Multivector
    kind: str
    t: object
    section: tuple
    gauss_q0: Multivector | None = None
    gauss_factor: object = 0

    def weight(self) -> float:
        if self.gauss_q0 is None or self.gauss_q0.is_zero():
            return 1.0
        q = self.gauss_q0
        if any(k >> 37 for k in q.terms):
            raise ValueError("symbolic section: weight is not a number")
        return math.exp(-to_float(self.gauss_factor).real * to_float(q.scalar_value()).real)

    def value(self) -> Multivector:
        w = self.weight()
        if w == 1.0:
            return self.form
        return self.form.to_float().scale(w)

    def degree_profile(self) -> set[int]:
        bm = self.form.sig.base_mask
        return {(k & GEN_MASK & bm).bit_count() for k in self.form.terms}


class Fiber:
    """Generators and metric data of one bundle lifted into a fiber signature."""

    def __init__(self, germ: FlatBundleGerm):
        self.germ = germ
        b = germ.sig
        self.N = N = germ.rank
        self.sig = Signature(b.base_dim, b.extra_s, N, False, b.params)
        self.exact = germ.exact
        self.num = Scalars(self.exact)
        lift = lambda x: rehome(x, self.sig)
        self.H = germ.metric.map(lift)
        self.Hinv = germ.metric_inverse.map(lift)
        self.Om = germ.omega.map(lift)
        self.order = germ.order
        self.proto = self.Om.proto
        self.psi = [self.proto.gen(self.sig.psi(k)) for k in range(N)]
        self.psihat = [self.proto.gen(self.sig.psihat(k)) for k in range(N)]

    def const(self, v) -> Multivector:
        return Multivector.scalar(self.sig, self.num(v), self.order, self.exact)

    @cached_property
    def Om2(self) -> AlgebraMatrix:
        return self.Om @ self.Om

    @cached_property
    def det(self) -> Multivector:
        return det_even(self.H)

    @cached_property
    def sqrtdet(self) -> Multivector:
        return sqrt_even(self.det)

    def pair(self, u: Sequence[Multivector], A: AlgebraMatrix | None, v: Sequence[Multivector]) -> Multivector:
        """<u, A v> in the flat frame: sum u_a (A H^-1)_ab v_b."""
        M = self.Hinv if A is None else A @ self.Hinv
        return bilinear(u, M, v)

    def vec(self, coeffs: Sequence[Multivector], gens: Sequence[Multivector]) -> Multivector:
        acc = self.proto.zero_like()
        for c, g in zip(coeffs, gens):
            acc = acc + c * g
        return acc

    def section(self, lam) -> list[Multivector]:
        out = []
        for v in lam:
            if isinstance(v, Multivector):
                if v.sig != self.sig:
                    v = rehome(v, self.sig)
                out.append(v.with_order(min(v.order, self.order + 1)))
            else:
                out.append(Multivector.scalar(self.sig, self.num(v), self.order + 1, self.exact))
        if len(out) != self.N:
            raise ValueError(f"section of length {len(out)} for rank {self.N}")
        return out

    def matvec(self, A: AlgebraMatrix, lam: Sequence[Multivector]) -> list[Multivector]:
        out = []
        for i in range(self.N):
            acc = self.proto.zero_like()
            for j in range(self.N):
                acc = acc + A[i, j] * lam[j]
            out.append(acc)
        return out

    def quad(self, lam: Sequence[Multivector]) -> Multivector:
        acc = self.proto.zero_like()
        for i in range(self.N):
            for j in range(self.N):
                acc = acc + lam[i] * self.H[i, j] * lam[j]
        return acc

    def top(self, which: str) -> int:
        if which == "psi":
            return self.sig.psi_mask
        if which == "psihat":
            return self.sig.psihat_mask
        return self.sig.psi_mask | self.sig.psihat_mask


def split_quadratic(q: Multivector) -> tuple[Multivector, Multivector]:
    """(x-degree-zero part, rest)."""
    q0 = q.like({k: c for k, c in q.terms.items() if key_degree(k) == 0})
    return q0, q - q0


def _sign(n: int) -> int:
    return -1 if n % 2 else 1


def _pi_factor(F: Fiber, half_exp: int) -> Multivector:
    return Multivector.pi_power(F.sig, half_exp, F.order, F.exact)


def _coerce_t(F: Fiber, t):
    check_t(t)
    return F.num(t), F.num.sqrt(t)


# ---------------------------------------------------------------------------
# Mathai-Quillen forms


def _alpha_parts(F: Fiber, lam, t):
    tt, rt = _coerce_t(F, t)
    lam = F.section(lam)
    N = F.N
    R2 = F.pair(F.psi, F.Om2, F.psi).scale(F.num(Fraction(-1, 16)))
    half = F.num(Fraction(1, 2))
    Oml = F.matvec(F.Om, lam)
    nab = [d(l) + o.scale(half) for l, o in zip(lam, Oml)]
    Dx = F.vec(nab, F.psi)
    q0, q1 = split_quadratic(F.quad(lam))
    expo = exp_even(-(R2 + Dx.scale(rt))) * exp_even(-(q1.scale(tt)))
    pref = _pi_factor(F, -N).scale(F.num(_sign(N * (N + 1) // 2))) * F.sqrtdet
    return lam, expo, pref, q0, tt, rt


def pull_alpha(g: FlatBundleGerm, lam, t) -> PulledForm:
    """Pullback of the Mathai-Quillen form for the unitary connection d + omega/2."""
    F = Fiber(g)
    lam, expo, pref, q0, tt, _ = _alpha_parts(F, lam, t)
    form = pref * berezin_single(expo, "psi")
    return PulledForm(form, "alpha", t, tuple(lam), q0, tt)


def pull_beta(g: FlatBundleGerm, lam, t) -> PulledForm:
    F = Fiber(g)
    lam, expo, pref, q0, tt, rt = _alpha_parts(F, lam, t)
    x = F.vec(lam, F.psi).scale(F.num.inv(2) * (F.num.inv(rt) if F.exact else 1 / rt))
    form = -(pref * berezin_single(x * expo, "psi"))
    return PulledForm(form, "beta", t, tuple(lam), q0, tt)


# ---------------------------------------------------------------------------
# the flat-case forms on V (the caller decides whether V = E or E*)


def _times(x: Multivector, r) -> Multivector:
    return x * r if isinstance(r, Multivector) else x.scale(r)


def _delta_parts(F: Fiber, mu, t, rt=None):
    """Pieces of the delta/epsilon integrands.  ``rt`` may be a jet (e.g. a
    parameter standing for sqrt(t)); then ``t`` is ignored."""
    if rt is None:
        tt, rt = _coerce_t(F, t)
    else:
        tt = rt * rt
    mu = F.section(mu)
    n16 = F.num(Fraction(1, 16))
    half = F.num(Fraction(1, 2))
    Omu = F.matvec(F.Om, mu)
    nab = [d(l) + o.scale(half) for l, o in zip(mu, Omu)]
    Bpsi = F.pair(F.psi, F.Om2, F.psi).scale(-n16) + _times(F.vec(nab, F.psi), rt)
    Bhat = F.pair(F.psihat, F.Om2, F.psihat).scale(n16)
    q0, q1 = split_quadratic(F.quad(mu))
    E1 = exp_even(-Bpsi) * exp_even(-_times(q1, tt))
    E2 = exp_even(-Bhat)
    P = F.pair(F.psi, F.Om, F.psihat).scale(F.num(Fraction(1, 4))) - _times(F.vec(mu, F.psihat), rt)
    return mu, P, E1, E2, q0, tt, rt


def scaled_epsilon(V: FlatBundleGerm, mu, u: Multivector) -> PulledForm:
    """t * epsilon_t with sqrt(t) given by the jet ``u`` (usually a parameter).

    The result is polynomial in u; the Gaussian weight is exp(-u^2 q0).
    """
    F = Fiber(V)
    u = rehome(u, F.sig) if u.sig != F.sig else u
    mu, P, E1, E2, q0, tt, _ = _delta_parts(F, mu, None, rt=u)
    quarter = F.num(Fraction(1, 4))
    x = F.vec(mu, F.psi) * u.scale(F.num(Fraction(1, 2)))
    form = -(F.det * berezin_product((F.pair(F.psi, None, F.psihat).scale(quarter) + x * P) * E2,
                                     E1, F.top("both")))
    return PulledForm(form, "t*epsilon", u, tuple(mu), q0, tt)


def delta_on(V: FlatBundleGerm, mu, t) -> PulledForm:
    F = Fiber(V)
    mu, P, E1, E2, q0, tt, _ = _delta_parts(F, mu, t)
    form = F.det * berezin_product(P * E2, E1, F.top("both"))
    return PulledForm(form, "delta", t, tuple(mu), q0, tt)


def epsilon_on(V: FlatBundleGerm, mu, t) -> PulledForm:
    F = Fiber(V)
    mu, P, E1, E2, q0, tt, rt = _delta_parts(F, mu, t)
    inv_rt = F.num.inv(rt)
    inv_t = F.num.inv(tt)
    pref = F.pair(F.psi, None, F.psihat).scale(inv_t * F.num(Fraction(1, 4)))
    x = F.vec(mu, F.psi).scale(inv_rt * F.num(Fraction(1, 2)))
    form = -(F.det * berezin_product((pref + x * P) * E2, E1, F.top("both")))
    return PulledForm(form, "epsilon", t, tuple(mu), q0, tt)


def _real_check(g: FlatBundleGerm) -> None:
    if g.field != "real":
        raise ValueError("these forms need a real germ")


def pull_delta(g: FlatBundleGerm, mu, t) -> PulledForm:
    """Pullback by a flat section mu of the dual bundle (coordinates in the dual frame)."""
    _real_check(g)
    return delta_on(g.dual(), mu, t)


def pull_epsilon(g: FlatBundleGerm, mu, t) -> PulledForm:
    _real_check(g)
    return epsilon_on(g.dual(), mu, t)


# ---------------------------------------------------------------------------
# volume form and the auxiliary forms


def vol_wedge(F: Fiber, lam: Sequence[Multivector], Om: AlgebraMatrix | None = None) -> Multivector:
    Om = F.Om if Om is None else Om
    return wedge_all(F.matvec(Om, lam))


def vol_berezin(F: Fiber, lam: Sequence[Multivector], Om: AlgebraMatrix | None = None) -> Multivector:
    Om = F.Om if Om is None else Om
    N = F.N
    Y = F.vec(F.matvec(Om, lam), F.psi)
    return berezin_single(exp_even(Y), "psi").scale(F.num(_sign(N * (N - 1) // 2)))


def ivol_wedge(F: Fiber, lam: Sequence[Multivector], Om: AlgebraMatrix | None = None) -> Multivector:
    """Contraction of the volume form with the tautological vector, pulled back."""
    Om = F.Om if Om is None else Om
    w = F.matvec(Om, lam)
    acc = F.proto.zero_like()
    for k in range(F.N):
        rest = [w[j] for j in range(F.N) if j != k]
        term = lam[k] * (wedge_all(rest) if rest else F.proto.const(1))
        acc = acc + term if k % 2 == 0 else acc - term
    return acc


def ivol_berezin(F: Fiber, lam: Sequence[Multivector], Om: AlgebraMatrix | None = None) -> Multivector:
    Om = F.Om if Om is None else Om
    N = F.N
    Y = F.vec(F.matvec(Om, lam), F.psi)
    x = F.vec(lam, F.psi)
    return berezin_single(x * exp_even(Y), "psi").scale(F.num(_sign(N * (N - 1) // 2)))


def _require_unimodular(g: FlatBundleGerm) -> None:
    _real_check(g)
    if not g.unimodular:
        raise ValueError("the volume form needs a unimodular metric")


def pull_vol(g: FlatBundleGerm, lam, route: str = "wedge") -> PulledForm:
    _require_unimodular(g)
    F = Fiber(g)
    lam = F.section(lam)
    form = vol_wedge(F, lam) if route == "wedge" else vol_berezin(F, lam)
    return PulledForm(form, "vol", None, tuple(lam))


def pull_ivol(g: FlatBundleGerm, lam, route: str = "wedge") -> PulledForm:
    _require_unimodular(g)
    F = Fiber(g)
    lam = F.section(lam)
    form = ivol_wedge(F, lam) if route == "wedge" else ivol_berezin(F, lam)
    return PulledForm(form, "ivol", None, tuple(lam))


def hat_integral(F: Fiber, m: Sequence[Multivector]) -> Multivector:
    """int over the hatted block of xhat exp(-<psihat, omega^2 psihat>/16)."""
    xhat = F.vec(m, F.psihat)
    E = exp_even(F.pair(F.psihat, F.Om2, F.psihat).scale(F.num(Fraction(-1, 16))))
    return F.sqrtdet * berezin_single(xhat * E, "psihat")


def _power(F: Fiber, rt, k: int):
    """rt^k for an integer k (rt a number)."""
    if k >= 0:
        return rt ** k
    return F.num.inv(rt) ** (-k)


def _rho_parts(F: Fiber, m, t):
    tt, rt = _coerce_t(F, t)
    m = F.section(m)
    q0, q1 = split_quadratic(F.quad(m))
    inv4t = F.num.inv(tt) * F.num(Fraction(1, 4))
    E = exp_even(-(q1.scale(inv4t)))
    return m, E, hat_integral(F, m), q0, inv4t, rt


def pull_rho(g: FlatBundleGerm, m, t) -> PulledForm:
    _require_unimodular(g)
    F = Fiber(g)
    m, E, hat, q0, inv4t, rt = _rho_parts(F, m, t)
    c = _power(F, rt, -(2 * F.N + 1))
    form = (E * vol_wedge(F, m) * hat).scale(c)
    return PulledForm(form, "rho", t, tuple(m), q0, inv4t)


def pull_sigma(g: FlatBundleGerm, m, t) -> PulledForm:
    _require_unimodular(g)
    F = Fiber(g)
    m, E, hat, q0, inv4t, rt = _rho_parts(F, m, t)
    c = _power(F, rt, -(2 * F.N + 3))
    form = -(E * ivol_wedge(F, m) * hat).scale(c)
    return PulledForm(form, "sigma", t, tuple(m), q0, inv4t)


def nabla_xhat_check(g: FlatBundleGerm, mu) -> Multivector:
    """lambda^*(nabla^u xhat) - 1/2 lambda^*(i_x omegahat) for a flat section of E*."""
    F = Fiber(g.dual())
    mu = F.section(mu)
    half = F.num(Fraction(1, 2))
    lhs = F.vec([d(l) + o.scale(half) for l, o in zip(mu, F.matvec(F.Om, mu))], F.psihat)
    omhat = F.pair(F.psi, F.Om, F.psihat)
    lowered = F.matvec(F.H, mu)
    rhs = interior_mult(lowered, "psi", omhat).scale(half)
    return lhs - rhs


# ---------------------------------------------------------------------------
# transgression on B x R+


@dataclass
class TransgressionResult:
    family: str
    closed: Multivector
    restricted: Multivector
    ds_part: Multivector

    def residuals(self) -> dict[str, float]:
        return {k: _res(getattr(self, k)) for k in ("closed", "restricted", "ds_part")}

    def exact_zero(self) -> bool:
        return all(getattr(self, k).is_zero() for k in ("closed", "restricted", "ds_part"))


def _res(x: Multivector) -> float:
    return 0.0 if x.is_zero() else x.max_abs()


def _lift_section(lam, sig: Signature):
    return [rehome(v, sig) if isinstance(v, Multivector) else v for v in lam]


def transgression_check(g: FlatBundleGerm, family: str, lam, t0) -> TransgressionResult:
    """Closedness of the primed form on the germ over B x R+ and the split
    primed = form_s0 + ds ^ transgression_s0."""
    if family == "alpha":
        ext = extend_base(g, "scale_up", t0)
        big = pull_alpha(ext, _lift_section(lam, ext.sig), 1)
        form = pull_alpha(g, lam, t0)
        trans = pull_beta(g, lam, t0)
    elif family == "delta":
        _real_check(g)
        V = g.dual()
        ext = extend_base(V, "scale_up", t0)
        big = delta_on(ext, lam, 1)
        form = delta_on(V, lam, t0)
        trans = epsilon_on(V, lam, t0)
    elif family == "rho":
        _require_unimodular(g)
        big = _rho_extended(g, lam, t0)
        form = pull_rho(g, lam, t0)
        trans = pull_sigma(g, lam, t0)
    else:
        raise ValueError(f"unknown family {family!r}")
    _same_weight(big, form)
    closed = d(big.form)
    restricted = restrict_s(big.form) - form.form.with_order(big.form.order)
    ds_part = ds_component(big.form) - trans.form.with_order(big.form.order)
    return TransgressionResult(family, closed, restricted, ds_part)


def _same_weight(a: PulledForm, b: PulledForm) -> None:
    def w(p: PulledForm) -> complex:
        if p.gauss_q0 is None or p.gauss_q0.is_zero():
            return 0j
        return to_float(p.gauss_q0.scalar_value()) * to_float(p.gauss_factor)

    wa, wb = w(a), w(b)
    if abs(wa - wb) > 1e-12 * max(1.0, abs(wa)):
        raise AssertionError("Gaussian weights of the primed and unprimed forms differ")


def _rho_extended(g: FlatBundleGerm, m, s0) -> PulledForm:
    """Primed rho on B x R+: Vol' built from omega - ds/s, the rest from h with s = s0 + sigma."""
    down = extend_base(g, "scale_down", s0)
    Fd = Fiber(down)
    base = g.sig
    ext_sig = down.sig
    lifted = FlatBundleGerm(g.metric.map(lambda x: rehome(x, ext_sig)), g.field, g.lattice_scale,
                            g.holonomy, g.unimodular, g.frame)
    F = Fiber(lifted)
    m = F.section(m)
    num = F.num
    s = Multivector.coordinate(F.sig, base.base_dim, F.order + 1, F.exact) + num(s0)
    s_inv = inverse_even(s)
    rs_inv = inverse_even(sqrt_even(s))
    q0, q1 = split_quadratic(F.quad(m))
    inv4s0 = num.inv(s0) * num(Fraction(1, 4))
    q = q0 + q1
    expo = exp_even(-((q * s_inv).scale(num(Fraction(1, 4))) - q0.scale(inv4s0)))
    vol_prime = vol_berezin(F, m, Fd.Om)
    pw = s_inv ** F.N * rs_inv
    form = expo * pw * vol_prime * hat_integral(F, m)
    return PulledForm(form, "rho'", s0, tuple(m), q0, inv4s0)


def alpha_profile(t: float, lam0: float) -> float:
    """dx-coefficient of the pulled-back Thom form for N = 1, h = 1, section x -> lam0 + x."""
    from .flat_bundle import trivial_germ

    g = trivial_germ(1, 1, 1, exact=False)
    x = Multivector.coordinate(g.sig, 0, 2, False)
    pf = pull_alpha(g, [x + lam0], t)
    v = pf.value().at_origin()
    sigF = Fiber(g).sig
    return v.coefficient(1 << sigF.dx(0)).scalar_value().real
