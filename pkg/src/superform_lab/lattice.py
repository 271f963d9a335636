"""Sums of pulled-back forms over the lattice c Z^N and its dual (2 pi / c) Z^N.

A pulled-back form is polynomial in the section's coordinates times a
Gaussian exp(-f * q0(mu)) with q0 constant on the germ.  Building the form
once with symbolic coordinates (jet parameters) reduces every lattice sum to
Gaussian moments sum_mu mu^gamma exp(-f q0(mu)), which are summed over
shell-ordered windows with ``math.fsum``.  The direct route (one pullback per
lattice point) is kept as an independent cross-check.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import mpmath
import numpy as np

from .flat_bundle import FlatBundleGerm, InvariantPolynomial, P_z
from .grassmann import (
    EXP_SHIFT,
    EXP_WIDTH,
    ONE_KEY,
    PI_SHIFT,
    Multivector,
    Signature,
    key_pi2,
    to_float,
)
from .jets import d
from .report import CheckResult, exact_or_float, make_check
from .thom import (
    delta_on,
    epsilon_on,
    pull_rho,
    pull_sigma,
    scaled_epsilon,
)

TWO_PI = 2 * math.pi


# ---------------------------------------------------------------------------
# windows


def shell_count_bound(n: int, N: int) -> int:
    """Number of integer points with sup-norm exactly n."""
    return (2 * n + 1) ** N - (2 * n - 1) ** N if n else 1


@dataclass(frozen=True)
class LatticeWindow:
    """Points spacing * k with |k|_inf <= radius, sorted by norm then lexicographically."""

    dim: int
    spacing: float
    radius: int
    gram: tuple = ()

    @property
    def gram_matrix(self) -> np.ndarray:
        if not self.gram:
            return np.eye(self.dim)
        return np.array(self.gram, dtype=float)

    @cached_property
    def integer_points(self) -> np.ndarray:
        R, N = self.radius, self.dim
        ks = np.array(list(itertools.product(range(-R, R + 1), repeat=N)), dtype=np.int64).reshape(-1, N)
        pts = ks * self.spacing
        norms = np.einsum("ij,jk,ik->i", pts, self.gram_matrix, pts)
        order = np.lexsort(tuple(ks[:, j] for j in reversed(range(N))) + (norms,))
        return ks[order]

    @cached_property
    def points(self) -> np.ndarray:
        return self.integer_points * self.spacing

    @cached_property
    def norms2(self) -> np.ndarray:
        p = self.points
        return np.einsum("ij,jk,ik->i", p, self.gram_matrix, p)

    @property
    def lambda_min(self) -> float:
        return float(np.linalg.eigvalsh(self.gram_matrix).min())

    def gaussian_tail(self, degree: int, factor: float) -> float:
        """Upper bound for sum over points outside the window of |mu|^degree exp(-factor q0(mu))."""
        a = factor * self.lambda_min * self.spacing ** 2
        b = self.spacing * math.sqrt(self.dim)
        total = 0.0
        n = self.radius + 1
        peak = math.sqrt(max(degree + self.dim, 1) / (2 * a)) + 1
        while True:
            term = shell_count_bound(n, self.dim) * (b * n) ** degree * math.exp(-a * n * n)
            total += term
            if n > peak and (term == 0.0 or term < 1e-30 * total):
                break
            n += 1
        return total

    def power_tail(self, degree: int, power: float) -> float:
        """Upper bound for sum over points outside the window of |mu|^degree q0(mu)^power, power < 0."""
        N = self.dim
        lam = self.lambda_min * self.spacing ** 2
        p = N - 1 + degree + 2 * power
        if p >= -1:
            return math.inf
        c = 2 * N * 3 ** (N - 1) * (self.spacing * math.sqrt(N)) ** degree * lam ** power
        R = self.radius
        return c * R ** (p + 1) / (-p - 1)

    @classmethod
    def auto(cls, dim: int, spacing: float, gram, factor: float, degree: int, tol: float,
             max_points: int = 3_000_000) -> "LatticeWindow":
        g = tuple(tuple(float(x) for x in row) for row in np.asarray(gram, dtype=float))
        R = 1
        while True:
            w = cls(dim, spacing, R, g)
            if w.gaussian_tail(degree, factor) < tol:
                return w
            R += 1
            if (2 * R + 1) ** dim > max_points:
                raise ValueError("lattice window would exceed the point budget")


# ---------------------------------------------------------------------------
# moment contraction


def _param_shift(sig: Signature) -> int:
    return EXP_SHIFT + EXP_WIDTH * sig.nvars


def split_params(form: Multivector, nparams: int) -> dict[int, dict[tuple, object]]:
    """key without parameter bits -> {exponent tuple: coefficient}."""
    sig = form.sig
    ps = _param_shift(sig)
    low = (1 << ps) - 1
    out: dict[int, dict[tuple, object]] = {}
    for k, c in form.terms.items():
        gamma = tuple((k >> (ps + EXP_WIDTH * j)) & 31 for j in range(nparams))
        out.setdefault(k & low, {})[gamma] = c
    return out


def quadratic_matrix(q0: Multivector, nparams: int) -> np.ndarray:
    """Symmetric matrix Q with q0 = mu^T Q mu (q0 homogeneous quadratic in the parameters)."""
    Q = np.zeros((nparams, nparams))
    for gamma, c in split_params(q0.to_float(), nparams).get(ONE_KEY, {}).items():
        idx = [j for j, e in enumerate(gamma) for _ in range(e)]
        if len(idx) != 2:
            raise ValueError("Gaussian exponent is not a quadratic form in the section")
        i, j = idx
        v = complex(c).real
        if i == j:
            Q[i, i] += v
        else:
            Q[i, j] += v / 2
            Q[j, i] += v / 2
    return Q


def gaussian_moments(window: LatticeWindow, factor: float, gammas, exclude_origin: bool = False,
                     offset: float = 0.0) -> dict[tuple, float]:
    """sum over window of mu^gamma exp(-factor q0(mu) + offset), compensated."""
    P = window.points
    w = np.exp(-factor * window.norms2 + offset)
    if exclude_origin:
        w = w * (window.norms2 > 0)
    out = {}
    for g in gammas:
        v = w.copy()
        for j, e in enumerate(g):
            if e:
                v = v * P[:, j] ** e
        out[g] = math.fsum(v.tolist())
    return out


def _base_signature(sig: Signature) -> Signature:
    return Signature(sig.base_dim, sig.extra_s, 0, False, 0, sig.cap)


def contract(form: Multivector, nparams: int, moments: Callable[[list[tuple]], dict[tuple, float]],
             tails: Callable[[int], float] | None = None) -> tuple[Multivector, float]:
    """Replace each monomial mu^gamma by its moment; returns (form on the base, tail bound)."""
    f = form.to_float()
    table = split_params(f, nparams)
    gammas = sorted({g for row in table.values() for g in row})
    M = moments(gammas)
    terms: dict[int, complex] = {}
    worst = 0.0
    for key in sorted(table):
        row = table[key]
        re = math.fsum(c.real * M[g] for g, c in sorted(row.items()))
        im = math.fsum(c.imag * M[g] for g, c in sorted(row.items()))
        if re or im:
            terms[key] = complex(re, im)
        if tails is not None:
            worst = max(worst, math.fsum(abs(c) * tails(sum(g)) for g, c in row.items()))
    sig = _base_signature(form.sig)
    return Multivector(sig, terms, form.order, False), worst


@dataclass
class SeriesValue:
    form: Multivector
    tail_bound: float
    window: LatticeWindow
    family: str
    t: float
    details: dict = field(default_factory=dict)


FAMILIES = ("delta", "epsilon", "rho", "sigma")


def lattice_scale(g: FlatBundleGerm) -> float:
    return float(Fraction(g.lattice_scale))


def _family(g: FlatBundleGerm, family: str):
    c = lattice_scale(g)
    if family == "delta":
        return g.dual(), delta_on, TWO_PI / c
    if family == "epsilon":
        return g.dual(), epsilon_on, TWO_PI / c
    if family == "rho":
        return g, _wrap(pull_rho), c
    if family == "sigma":
        return g, _wrap(pull_sigma), c
    raise ValueError(f"unknown family {family!r}")


def _wrap(fn):
    return lambda V, sec, t: fn(V, sec, t)


def symbolic_pullback(V: FlatBundleGerm, builder, t):
    N = V.rank
    Vp = V.with_params(N)
    sec = [Multivector.parameter(Vp.sig, j, Vp.order + 1, Vp.exact) for j in range(N)]
    return builder(Vp, sec, t)


def sum_on(V: FlatBundleGerm, builder, t, spacing: float, family: str = "", tol: float = 1e-17,
           radius: int | None = None) -> SeriesValue:
    """Lattice sum of builder(V, mu, t) over spacing * Z^N via moments."""
    N = V.rank
    pf = symbolic_pullback(V, builder, t)
    factor = to_float(pf.gauss_factor).real
    Q = quadratic_matrix(pf.gauss_q0, N)
    table = split_params(pf.form, N)
    deg = max((sum(g) for row in table.values() for g in row), default=0)
    if radius is None:
        window = LatticeWindow.auto(N, spacing, Q, factor, deg, tol)
    else:
        window = LatticeWindow(N, spacing, radius, tuple(map(tuple, Q)))
    form, tail = contract(pf.form, N, lambda gs: gaussian_moments(window, factor, gs),
                          lambda dd: window.gaussian_tail(dd, factor))
    return SeriesValue(form, tail, window, family, float(t), {"degree": deg, "factor": factor})


def sum_pulled(g: FlatBundleGerm, family: str, t, *, tol: float = 1e-17, radius: int | None = None,
               route: str = "moments") -> SeriesValue:
    """sum over the dual lattice (delta, epsilon) or the lattice (rho, sigma) of the pullbacks."""
    V, builder, spacing = _family(g, family)
    if route == "moments":
        return sum_on(V, builder, t, spacing, family, tol, radius)
    if route != "direct":
        raise ValueError(f"unknown route {route!r}")
    ref = sum_on(V, builder, t, spacing, family, tol, radius)
    window = ref.window
    acc: dict[int, list[complex]] = {}
    sig = None
    order = 0
    for p in window.points:
        pf = builder(V, [float(x) for x in p], t)
        val = pf.value().to_float()
        sig, order = _base_signature(val.sig), val.order
        for k, c in val.terms.items():
            acc.setdefault(k, []).append(c)
    terms = {k: complex(math.fsum(c.real for c in v), math.fsum(c.imag for c in v)) for k, v in sorted(acc.items())}
    return SeriesValue(Multivector(sig, {k: c for k, c in terms.items() if c}, order, False),
                       ref.tail_bound, window, family, float(t), {"route": "direct"})


def residual(a: Multivector, b: Multivector) -> float:
    diff = a.to_float() - b.to_float().lift(a.sig) if a.sig != b.sig else a.to_float() - b.to_float()
    return 0.0 if diff.is_zero() else diff.max_abs()


def to_base(x: Multivector) -> Multivector:
    return x.lift(_base_signature(x.sig))


# ---------------------------------------------------------------------------
# Poisson summation


def poisson_sides(g: FlatBundleGerm, t: float, b: Sequence[float] = (), tol: float = 1e-18) -> tuple[float, complex]:
    """Both sides of the theta-function Poisson identity at the base point."""
    N = g.rank
    h0 = g.to_float().metric_at_origin().real
    hinv = np.linalg.inv(h0)
    c = lattice_scale(g)
    b = np.zeros(N) if len(b) == 0 else np.asarray(b, dtype=float)
    dual = LatticeWindow.auto(N, TWO_PI / c, hinv, t, 0, tol)
    shift = int(math.ceil(np.abs(b).max() / (TWO_PI / c))) + 1 if np.any(b) else 0
    dual = LatticeWindow(N, dual.spacing, dual.radius + shift, dual.gram)
    P = dual.points + b
    lhs = math.fsum(np.exp(-t * np.einsum("ij,jk,ik->i", P, hinv, P)).tolist())
    prim = LatticeWindow.auto(N, c, h0, 1 / (4 * t), 0, tol)
    w = np.exp(-prim.norms2 / (4 * t))
    phase = prim.points @ b
    re = math.fsum((w * np.cos(phase)).tolist())
    im = math.fsum((w * np.sin(phase)).tolist())
    vol = math.sqrt(np.linalg.det(h0)) * c ** N
    pref = (4 * math.pi * t) ** (-N / 2) * vol
    return lhs, complex(pref * re, pref * im)


def poisson_check(g: FlatBundleGerm, t: float, b: Sequence[float] = (), tol: float = 1e-12) -> CheckResult:
    if not t > 0:
        raise ValueError("t must be positive")
    lhs, rhs = poisson_sides(g, t, b)
    res = abs(lhs - rhs)
    return make_check(f"poisson/theta/N{g.rank}/t{t:g}", "Poisson summation for the Gaussian theta sum",
                      res, tol, inputs={"N": g.rank, "t": t, "b": list(map(float, b)), "c": str(g.lattice_scale)},
                      detail={"lhs": lhs, "rhs": rhs.real, "rhs_imag": rhs.imag})


# ---------------------------------------------------------------------------
# the dual-lattice / lattice identity


def exchange_constant(g: FlatBundleGerm) -> float:
    """2^(-3N-1) pi^(-N/2) Vol(E / Lambda)."""
    N = g.rank
    return 2.0 ** (-3 * N - 1) * math.pi ** (-N / 2) * g.volume


def dual_primal_check(g: FlatBundleGerm, t: float, tol: float, *, pair: str = "delta") -> CheckResult:
    """sum over dual lattice of delta (epsilon) = constant * sum over lattice of rho (sigma)."""
    if g.rank % 2 == 0:
        raise ValueError("the exchange identity is stated for odd rank")
    left, right = ("delta", "rho") if pair == "delta" else ("epsilon", "sigma")
    A = sum_pulled(g, left, t)
    B = sum_pulled(g, right, t)
    C = exchange_constant(g)
    diff = A.form - B.form.scale(C)
    res = 0.0 if diff.is_zero() else diff.max_abs()
    scale = max(A.form.max_abs() if not A.form.is_zero() else 0.0, 1e-300)
    bound = A.tail_bound + C * B.tail_bound
    return make_check(f"lattice/exchange-{left}-{right}/N{g.rank}/c{g.lattice_scale}/t{t:g}",
                      f"dual-lattice sum of {left} equals scaled lattice sum of {right}",
                      res, tol, inputs={"N": g.rank, "m": g.base_dim, "K": g.order, "t": t,
                                        "c": str(g.lattice_scale)},
                      detail={"max_coefficient": scale, "tail_bound": bound,
                              "dual_radius": A.window.radius, "primal_radius": B.window.radius,
                              "terms": len(A.form.terms)},
                      passed=res <= tol and bound <= tol)


def thm219_check(g: FlatBundleGerm, t: float = 1.0, tol: float = 1e-8) -> list[CheckResult]:
    return [dual_primal_check(g, t, tol, pair="delta"), dual_primal_check(g, t, tol, pair="epsilon")]


# ---------------------------------------------------------------------------
# closedness and t-derivative of the sums


def sum_closedness_check(g: FlatBundleGerm, t: float, tol: float = 1e-10) -> CheckResult:
    S = sum_pulled(g, "delta", t)
    r = d(S.form)
    res = 0.0 if r.is_zero() else r.max_abs()
    return make_check(f"lattice/closed-delta-sum/N{g.rank}/t{t:g}",
                      "dual-lattice sum of delta is closed", res, tol,
                      inputs={"N": g.rank, "m": g.base_dim, "K": g.order, "t": t})


def sum_transgression_check(g: FlatBundleGerm, t0, tol: float = 1e-10) -> CheckResult:
    """d/dt of the delta sum equals d of the epsilon sum, via the germ over B x R+."""
    from .jets import ds_component, extend_base, restrict_s

    V = g.dual()
    c = lattice_scale(g)
    ext = extend_base(V, "scale_up", t0)
    big = sum_on(ext, delta_on, 1, TWO_PI / c, "delta'")
    eps = sum_pulled(g, "epsilon", t0)
    dl = sum_pulled(g, "delta", t0)
    r1 = d(big.form)
    r2 = ds_component(big.form) - eps.form.with_order(big.form.order)
    r3 = restrict_s(big.form) - dl.form.with_order(big.form.order)
    res = max(0.0 if x.is_zero() else x.max_abs() for x in (r1, r2, r3))
    return make_check(f"lattice/transgression-sum/N{g.rank}/t{float(t0):g}",
                      "t-derivative of the delta sum is d of the epsilon sum", res, tol,
                      inputs={"N": g.rank, "m": g.base_dim, "K": g.order, "t": float(t0)})


# ---------------------------------------------------------------------------
# asymptotics


def limit_form(g: FlatBundleGerm) -> Multivector:
    """(1/2) pi^(N-1) c_N^z of the germ."""
    N = g.rank
    cz = P_z(g, InvariantPolynomial.c_j(N))
    if g.exact:
        from .grassmann import gaussian

        return cz * Multivector.pi_power(cz.sig, 2 * (N - 1), cz.order, True).scale(gaussian(Fraction(1, 2)))
    return cz.scale(0.5 * math.pi ** (N - 1))


def zero_mode_check(g: FlatBundleGerm, t=1) -> CheckResult:
    """The mu = 0 pullback of delta equals minus the limit form of the dual germ."""
    V = g.dual()
    pf = delta_on(V, [0] * g.rank, t)
    lim = limit_form(V)
    diff = to_base(pf.form) + lim.with_order(pf.form.order)
    zero = diff.is_zero() if g.exact else False
    res = exact_or_float(zero, 0.0 if diff.is_zero() else diff.max_abs())
    return make_check(f"lattice/zero-mode-delta/N{g.rank}", "zero-section delta equals the dual limit form",
                      res, 0.0 if g.exact else 1e-12, inputs={"N": g.rank, "exact": g.exact})


def large_t_check(g: FlatBundleGerm, t_grid: Sequence[float], tol: float = 1e-10) -> CheckResult:
    """delta sum minus the limit form is bounded by the tail of the nonzero modes."""
    lim = limit_form(g.to_float())
    rows = []
    ok = True
    for t in t_grid:
        S = sum_pulled(g, "delta", t)
        diff = S.form - lim.with_order(S.form.order)
        r = 0.0 if diff.is_zero() else diff.max_abs()
        V, builder, spacing = _family(g, "delta")
        pf = symbolic_pullback(V, builder, t)
        Q = quadratic_matrix(pf.gauss_q0, g.rank)
        win = LatticeWindow(g.rank, spacing, 0, tuple(map(tuple, Q)))
        _, bound = contract(pf.form, g.rank, lambda gs: {gg: 0.0 for gg in gs},
                            lambda dd: win.gaussian_tail(dd, float(t)))
        rows.append((t, r, bound))
        ok = ok and r <= bound + tol
    worst = max(r for _, r, _ in rows)
    return make_check(f"lattice/large-t-delta/N{g.rank}", "delta sum tends to the limit form",
                      worst, tol, inputs={"N": g.rank, "t_grid": list(t_grid)},
                      detail={"trace": rows}, passed=ok)


def decay_rate(ts: Sequence[float], values: Sequence[float], small: bool) -> float:
    """Least-squares slope of log|value| against t (large t) or 1/t (small t)."""
    xs = np.array([1 / t if small else t for t in ts])
    ys = np.log(np.abs(np.asarray(values)))
    A = np.vstack([xs, np.ones_like(xs)]).T
    slope = np.linalg.lstsq(A, ys, rcond=None)[0][0]
    return float(slope)


def n1_epsilon_checks(g: FlatBundleGerm) -> list[CheckResult]:
    """Rank one, lattice Z: the epsilon sum at t = 1 and its approach to -1/(4t)."""
    if g.rank != 1:
        raise ValueError("rank-one check")
    out = []
    c = lattice_scale(g)
    if c == 1:
        S = sum_pulled(g, "epsilon", 1.0)
        v = to_base(S.form).scalar_value().real
        out.append(make_check("lattice/epsilon-sum-rank1/t1", "rank-one epsilon sum at t = 1",
                              abs(v + 0.25), 1e-12, inputs={"c": str(g.lattice_scale)}, detail={"value": v}))
    h0 = g.to_float().metric_at_origin().real
    expected = -(TWO_PI / c) ** 2 / float(h0[0, 0])
    ts = [k / -expected for k in (2.0, 3.0, 4.0)]
    vals = [to_base(sum_pulled(g, "epsilon", t).form).scalar_value().real + 1 / (4 * t) for t in ts]
    slope = decay_rate(ts, vals, small=False)
    rel = abs(slope / expected - 1)
    out.append(make_check(f"lattice/epsilon-decay-rank1/c{g.lattice_scale}",
                          "rank-one epsilon sum approaches -1/(4t) at the first-mode rate",
                          rel, 0.2, inputs={"t": ts, "c": str(g.lattice_scale)},
                          detail={"slope": slope, "expected": expected, "trace": list(zip(ts, vals))}))
    return out


def small_t_check(g: FlatBundleGerm, family: str, t_grid: Sequence[float] = (0.05, 0.07, 0.1),
                  tol: float = 1e-15) -> CheckResult:
    """The dual-lattice sum stays below the exp(-c/t) envelope of the nonzero lattice modes.

    The envelope is the exchange constant times sum over m != 0 of
    |coefficient| |m|^k exp(-q0(m) / 4t) for the partner family.
    """
    partner = {"delta": "rho", "epsilon": "sigma"}[family]
    C = exchange_constant(g)
    rows = []
    ok = True
    for t in t_grid:
        S = sum_pulled(g, family, t)
        v = 0.0 if S.form.is_zero() else S.form.max_abs()
        V, builder, spacing = _family(g, partner)
        pf = symbolic_pullback(V, builder, t)
        factor = to_float(pf.gauss_factor).real
        Q = quadratic_matrix(pf.gauss_q0, g.rank)
        win = LatticeWindow(g.rank, spacing, 0, tuple(map(tuple, Q)))
        _, env = contract(pf.form, g.rank, lambda gs: {gg: 0.0 for gg in gs},
                          lambda dd: win.gaussian_tail(dd, factor))
        bound = C * env + S.tail_bound
        rows.append((t, v, bound))
        ok = ok and v <= bound * (1 + 1e-9) + tol
    excess = max(v - b for _, v, b in rows)
    nz = [(t, v) for t, v, _ in rows if v > 0]
    detail = {"trace": rows}
    if len(nz) >= 2:
        detail["slope_in_inverse_t"] = decay_rate([t for t, _ in nz], [v for _, v in nz], small=True)
    return make_check(f"lattice/small-t-{family}/N{g.rank}", f"{family} sum lies under the exp(-c/t) envelope",
                      max(excess, 0.0), tol, inputs={"N": g.rank, "t_grid": list(t_grid)},
                      detail=detail, passed=ok)


def write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


# ---------------------------------------------------------------------------
# phi(s): quadrature over t of the epsilon sum, and the lattice series


def _mp_coeff(c, pi2: int):
    if hasattr(c, "x"):
        re = mpmath.mpf(int(c.x.numerator)) / int(c.x.denominator)
        im = mpmath.mpf(int(c.y.numerator)) / int(c.y.denominator)
        v = mpmath.mpc(re, im)
    else:
        v = mpmath.mpc(c.real, c.imag)
    return v * mpmath.pi ** (mpmath.mpf(pi2) / 2) if pi2 else v


@dataclass
class PhiSetup:
    """t * (epsilon pullback) as a polynomial in (mu, sqrt t) with exact coefficients."""

    germ: FlatBundleGerm
    rows: dict[int, list[tuple[tuple, int, object]]]
    sig: Signature
    order: int
    diag: tuple
    spacing: float
    _mp: dict = field(default_factory=dict, repr=False)

    def mp_coefficients(self) -> dict[int, list]:
        """Coefficients at the current working precision (cached per precision)."""
        prec = mpmath.mp.prec
        if prec not in self._mp:
            self._mp[prec] = {k: [_mp_coeff(c, p) for _, _, (c, p) in row] for k, row in self.rows.items()}
        return self._mp[prec]


def phi_setup(g: FlatBundleGerm) -> PhiSetup:
    N = g.rank
    if N % 2 == 0 or N == 1:
        raise ValueError("phi needs odd rank N > 1")
    if not g.exact:
        raise ValueError("phi quadrature needs exact germ coefficients (the dual-lattice sum cancels at small t)")
    V = g.dual()
    H0 = V.to_float().metric_at_origin().real
    if np.abs(H0 - np.diag(np.diag(H0))).max() > 0:
        raise ValueError("phi quadrature needs a diagonal metric at the base point")
    Vp = V.with_params(N + 1)
    mu = [Multivector.parameter(Vp.sig, j, Vp.order + 1, True) for j in range(N)]
    u = Multivector.parameter(Vp.sig, N, Vp.order + 1, True)
    pf = scaled_epsilon(Vp, mu, u)
    sig = pf.form.sig
    ps = _param_shift(sig)
    low = (1 << ps) - 1
    rows: dict[int, list] = {}
    for k, c in pf.form.terms.items():
        ex = [(k >> (ps + EXP_WIDTH * j)) & 31 for j in range(N + 1)]
        base = k & low
        pi2 = key_pi2(base)
        rows.setdefault(base - (pi2 << PI_SHIFT), []).append((tuple(ex[:N]), ex[N], (c, pi2)))
    c = lattice_scale(g)
    diag = []
    for j in range(N):
        v = V.metric[j, j].constant_term()
        diag.append(Fraction(int(v.x.numerator), int(v.x.denominator)))
    return PhiSetup(g, rows, _base_signature(sig), pf.form.order, tuple(diag), TWO_PI / c)


def _theta_moments(t, a, hdiag, emax: int):
    """[sum_n (a n)^e exp(-t hdiag a^2 n^2) for e = 0..emax] at working precision."""
    t = mpmath.mpf(t)
    q = t * mpmath.mpf(hdiag.numerator) / hdiag.denominator * a * a
    digits = mpmath.mp.dps * 2.31 + 40
    nmax = int(math.sqrt((digits + emax * 5) / float(q))) + 3
    out = [mpmath.mpf(0)] * (emax + 1)
    for n in range(1, nmax + 1):
        w = mpmath.exp(-q * n * n)
        x = a * n
        p = w
        for e in range(emax + 1):
            if e % 2 == 0:
                out[e] += 2 * p
            p *= x
    out[0] += 1
    return out


def phi_integrand(setup: PhiSetup, t) -> dict[int, mpmath.mpc]:
    """sum over nonzero dual-lattice points of the epsilon pullback, per form key."""
    N = setup.germ.rank
    if not any(setup.rows.values()):
        return {}
    emax = max(max(g) for r in setup.rows.values() for g, _, _ in r)
    c = Fraction(setup.germ.lattice_scale)
    a = 2 * mpmath.pi * c.denominator / c.numerator
    th = [_theta_moments(t, a, setup.diag[j], emax) for j in range(N)]
    u = mpmath.sqrt(mpmath.mpf(t))
    cache: dict[tuple, object] = {}
    out = {}
    coeffs = setup.mp_coefficients()
    for key, row in setup.rows.items():
        acc = mpmath.mpc(0)
        for (gamma, k, _), c in zip(row, coeffs[key]):
            M = cache.get(gamma)
            if M is None:
                M = mpmath.fprod(th[j][e] for j, e in enumerate(gamma))
                if not any(gamma):
                    M -= 1
                cache[gamma] = M
            acc += c * u ** k * M
        out[key] = acc / t
    return out


@dataclass
class PhiValue:
    form: Multivector
    nodes: int
    step: float
    interval: tuple
    change: float


def phi_quadrature(g: FlatBundleGerm, s: float, *, dps: int = 50, rel_tol: float = 1e-12,
                   setup: PhiSetup | None = None) -> PhiValue:
    """-int_0^inf t^s (sum over the dual lattice of epsilon_t) dt, trapezoid rule in log t.

    The integrand decays double-exponentially in u = log t at both ends, so
    the trapezoid rule converges geometrically as the step is halved.
    """
    setup = setup or phi_setup(g)
    with mpmath.workdps(dps):
        cache: dict[float, dict] = {}

        def f(u: float):
            if u not in cache:
                t = mpmath.exp(mpmath.mpf(u))
                vals = phi_integrand(setup, t)
                w = t ** (mpmath.mpf(s) + 1)
                cache[u] = {k: -v * w for k, v in vals.items()}
            return cache[u]

        def size(v):
            return max((abs(x) for x in v.values()), default=mpmath.mpf(0))

        h = 0.25
        # bracket the support of the integrand
        peak = max(size(f(x * h)) for x in range(-24, 13))
        lo = -24
        while size(f(lo * h)) > 1e-24 * peak and lo > -60:
            lo -= 1
        hi = 12
        while size(f(hi * h)) > 1e-24 * peak and hi < 40:
            hi += 1
        a, b = lo * h, hi * h
        prev = None
        change = math.inf
        n = int(round((b - a) / h))
        for level in range(6):
            step = (b - a) / n
            xs = [a + i * step for i in range(n + 1)]
            tot: dict[int, mpmath.mpc] = {}
            for x in xs:
                for k, v in f(x).items():
                    tot[k] = tot.get(k, 0) + v
            tot = {k: v * step for k, v in tot.items()}
            if prev is not None:
                change = float(max((abs(tot[k] - prev.get(k, 0)) for k in tot), default=0) / max(size(tot), mpmath.mpf(1e-300)))
                if change < rel_tol:
                    break
            prev = tot
            n *= 2
        terms = {}
        for k, v in tot.items():
            c = complex(v)
            if c:
                terms[k] = c
    form = Multivector(setup.sig, dict(sorted(terms.items())), setup.order, False)
    return PhiValue(form, len(cache), float(step), (a, b), change)


def phi_series(g: FlatBundleGerm, s: float, *, radius: int | None = None, rel_tol: float = 1e-7):
    """Lattice-side series for phi(s), valid for s < 0.

    2^(-N-2s) pi^(-N/2) Gamma(N + 1/2 - s) Vol sum_{m != 0} |m|^(2s-2N-1)
    (i_x Vol) (int xhat exp(-omegahat^2 / 8)), with |m|^2 = m^T h m expanded
    binomially around its base-point value.
    """
    from .thom import Fiber, hat_integral, ivol_wedge

    N = g.rank
    if N % 2 == 0 or N == 1:
        raise ValueError("phi needs odd rank N > 1")
    if not s < 0:
        raise ValueError("the lattice series converges only for s < 0")
    gp = g.with_params(N)
    F = Fiber(gp)
    m = F.section([Multivector.parameter(gp.sig, j, gp.order + 1, gp.exact) for j in range(N)])
    from .thom import split_quadratic

    q0, q1 = split_quadratic(F.quad(m))
    P = ivol_wedge(F, m) * hat_integral(F, m)
    a = s - N - 0.5
    Q = quadratic_matrix(q0, N)
    c = lattice_scale(g)
    pieces = []
    term = P.to_float()
    k = 0
    q1f = q1.to_float()
    while not term.is_zero():
        pieces.append((k, term.scale(_binom(a, k))))
        k += 1
        term = term * q1f
    if radius is None:
        radius = 8
    if not pieces:
        win = LatticeWindow(N, c, 0, tuple(map(tuple, Q)))
        return Multivector.zero(_base_signature(P.sig), P.order, False), 0.0, win
    while True:
        win = LatticeWindow(N, c, radius, tuple(map(tuple, Q)))
        total = None
        tail = 0.0
        for k, piece in pieces:
            b = a - k
            form, tb = contract(piece, N, lambda gs: _power_moments(win, gs, b),
                                lambda dd: win.power_tail(dd, b))
            total = form if total is None else total + form
            tail = max(tail, tb)
        mag = total.max_abs() if not total.is_zero() else 0.0
        if tail <= rel_tol * max(mag, 1e-300) or (2 * radius + 3) ** N > 3_000_000:
            break
        radius = int(radius * 1.5) + 1
    pref = 2.0 ** (-N - 2 * s) * math.pi ** (-N / 2) * math.gamma(N + 0.5 - s) * g.volume
    return total.scale(pref), tail * pref, win


def _binom(a: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= (a - i) / (i + 1)
    return out


def _power_moments(win: LatticeWindow, gammas, b: float) -> dict[tuple, float]:
    P = win.points
    q = win.norms2
    mask = q > 0
    w = np.zeros_like(q)
    w[mask] = q[mask] ** b
    out = {}
    for g in gammas:
        v = w.copy()
        for j, e in enumerate(g):
            if e:
                v = v * P[:, j] ** e
        out[g] = math.fsum(v.tolist())
    return out


def phi_compare_check(g: FlatBundleGerm, s: float, tol: float = 1e-6, setup: PhiSetup | None = None) -> CheckResult:
    q = phi_quadrature(g, s, setup=setup)
    ser, tail, win = phi_series(g, s)
    diff = q.form - ser.lift(q.form.sig) if ser.sig != q.form.sig else q.form - ser
    mag = max(q.form.max_abs(), 1e-300)
    rel = (0.0 if diff.is_zero() else diff.max_abs()) / mag
    return make_check(f"phi/quadrature-vs-series/N{g.rank}/s{s:g}",
                      "phi(s) by t-quadrature agrees with the lattice series", rel, tol,
                      inputs={"N": g.rank, "m": g.base_dim, "K": g.order, "s": s},
                      detail={"max_coefficient": mag, "series_tail": tail, "series_radius": win.radius,
                              "nodes": q.nodes, "interval": list(q.interval), "refinement_change": q.change})


def dphi0_check(g: FlatBundleGerm, tol: float = 1e-6, setup: PhiSetup | None = None) -> list[CheckResult]:
    """d phi(0) against +L and -L, where L = (1/2) pi^(N-1) c_N^z.

    The first check tests the identity with the + sign; the second
    (informational) records the comparison with the opposite sign.
    """
    q = phi_quadrature(g, 0.0, setup=setup)
    lhs = d(q.form)
    L = limit_form(g).to_float().with_order(lhs.order).lift(lhs.sig)
    plus = lhs - L
    minus = lhs + L
    rp = 0.0 if plus.is_zero() else plus.max_abs()
    rm = 0.0 if minus.is_zero() else minus.max_abs()
    inputs = {"N": g.rank, "m": g.base_dim, "K": g.order}
    detail = {"limit_form_max": L.max_abs() if not L.is_zero() else 0.0,
              "residual_plus": rp, "residual_minus": rm, "nodes": q.nodes}
    return [
        make_check(f"phi/d-phi0/N{g.rank}", "d phi(0) equals +1/2 pi^(N-1) c_N^z", rp, tol,
                   inputs=inputs, detail=detail),
        make_check(f"phi/d-phi0-opposite-sign/N{g.rank}", "d phi(0) equals -1/2 pi^(N-1) c_N^z", rm, tol,
                   inputs=inputs, detail=detail, informational=True),
    ]
