"""Flat bundle germs, their metric variation form omega = h^-1 dh, and the
odd characteristic forms built from it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import cached_property
from itertools import combinations, permutations
from typing import Sequence

import numpy as np

from .grassmann import (
    AlgebraMatrix,
    Multivector,
    Signature,
    _perm_sign,
    algebra_expm,
    det_even,
    gaussian,
    matrix_series,
    to_exact,
    tr_z,
)
from .jets import d, matrix_inverse, rehome


def _num(exact: bool, value) -> object:
    """Exact Gaussian rational or complex float from a Fraction / complex pair."""
    if exact:
        if isinstance(value, tuple):
            return gaussian(*value)
        return gaussian(value)
    if isinstance(value, tuple):
        return complex(float(value[0]), float(value[1]))
    return complex(float(value))


@dataclass(eq=False)
class FlatBundleGerm:
    """Germ of a flat bundle at a base point, written in a flat frame.

    ``metric`` holds the Gram matrix of the flat frame as mask-free jets of
    order K+1, so that omega is valid to order K.  ``frame`` records whether
    the frame is that of E or of the dual bundle.
    """

    metric: AlgebraMatrix
    field: str = "real"
    lattice_scale: object = 1
    holonomy: tuple | None = None
    unimodular: bool = False
    frame: str = "primal"
    notes: dict = dc_field(default_factory=dict)

    def __post_init__(self) -> None:
        n, m = self.metric.shape
        if n != m or n == 0:
            raise ValueError("metric must be a nonempty square matrix")
        if self.field not in ("real", "complex"):
            raise ValueError(f"unknown field {self.field!r}")
        sig = self.metric.proto.sig
        if sig.rank or sig.has_z:
            raise ValueError("metric entries must live in a base signature")

    @property
    def rank(self) -> int:
        return self.metric.shape[0]

    @property
    def sig(self) -> Signature:
        return self.metric.proto.sig

    @property
    def base_dim(self) -> int:
        return self.sig.base_dim

    @property
    def exact(self) -> bool:
        return self.metric.proto.exact

    @property
    def order(self) -> int:
        """Jet order K to which omega is valid."""
        return self.metric.proto.order - 1

    @property
    def proto(self) -> Multivector:
        return self.metric.proto

    @cached_property
    def metric_inverse(self) -> AlgebraMatrix:
        return matrix_inverse(self.metric)

    @cached_property
    def omega(self) -> AlgebraMatrix:
        return self.metric_inverse @ self.metric.map(d)

    def dual(self) -> "FlatBundleGerm":
        """The germ of the (anti)dual bundle in the dual flat frame: Gram matrix h^-1."""
        return FlatBundleGerm(
            metric=self.metric_inverse,
            field=self.field,
            lattice_scale=self.lattice_scale,
            holonomy=self.holonomy,
            unimodular=self.unimodular,
            frame="dual" if self.frame == "primal" else "primal",
        )

    def to_float(self) -> "FlatBundleGerm":
        if not self.exact:
            return self
        return FlatBundleGerm(self.metric.map(lambda x: x.to_float()), self.field,
                              float(Fraction(self.lattice_scale)), self.holonomy,
                              self.unimodular, self.frame)

    def with_params(self, params: int) -> "FlatBundleGerm":
        sig = self.sig.with_params(params)
        return FlatBundleGerm(self.metric.map(lambda x: rehome(x, sig)), self.field,
                              self.lattice_scale, self.holonomy, self.unimodular, self.frame)

    def metric_at_origin(self) -> np.ndarray:
        return np.array([[x.scalar_value() for x in row] for row in self.metric.rows])

    @property
    def volume(self) -> float:
        """Covolume of the lattice c Z^N in the flat frame."""
        return float(self.lattice_scale) ** self.rank


def omega(g: FlatBundleGerm) -> AlgebraMatrix:
    return g.omega


def dual_omega(g: FlatBundleGerm) -> AlgebraMatrix:
    return g.dual().omega


def conjugated_dual_omega(g: FlatBundleGerm) -> AlgebraMatrix:
    """-h omega h^-1, the same matrix through the metric isometry."""
    return (g.metric @ g.omega @ g.metric_inverse).scale(-1)


# ---------------------------------------------------------------------------
# germ construction


def _monomials(m: int, lo: int, hi: int) -> list[tuple[int, ...]]:
    out = []

    def rec(j: int, left: int, cur: list[int]):
        if j == m:
            if lo <= sum(cur) <= hi:
                out.append(tuple(cur))
            return
        for e in range(left + 1):
            cur.append(e)
            rec(j + 1, left - e, cur)
            cur.pop()

    rec(0, hi, [])
    return sorted(out, key=lambda e: (sum(e), tuple(-x for x in e)))


def _monomial_jet(sig: Signature, exps: Sequence[int], coeff, order: int, exact: bool) -> Multivector:
    out = Multivector.scalar(sig, coeff, order, exact)
    for j, e in enumerate(exps):
        for _ in range(e):
            out = out * Multivector.coordinate(sig, j, order, exact)
    return out


def germ_from_log(S_terms: dict[tuple[int, ...], list[list]], A: list[list], m: int, K: int,
                  exact: bool = True, field: str = "real", **kw) -> FlatBundleGerm:
    """h(x) = A^* exp(S(x)) A with S(x) = sum_alpha S_alpha x^alpha, S(0) = 0."""
    sig = Signature(m)
    order = K + 1
    n = len(A)
    proto = Multivector.zero(sig, order, exact)
    S = AlgebraMatrix.zeros(proto, n)
    for exps, mat in S_terms.items():
        if sum(exps) == 0:
            raise ValueError("S must vanish at the origin")
        rows = [[_monomial_jet(sig, exps, _num(exact, mat[i][j]), order, exact) for j in range(n)]
                for i in range(n)]
        S = S + AlgebraMatrix(rows)
    E = algebra_expm(S) if exact else matrix_series(S, lambda k: 1.0 / math.factorial(k))
    Am = AlgebraMatrix.from_numbers(proto, [[_num(exact, a) for a in row] for row in A])
    Astar = AlgebraMatrix.from_numbers(
        proto, [[_num(exact, _conj_pair(A[j][i])) for j in range(n)] for i in range(n)])
    return FlatBundleGerm(Astar @ E @ Am, field=field, **kw)


def _conj_pair(v):
    if isinstance(v, tuple):
        return (v[0], -Fraction(v[1]))
    return v


def _rand_frac(rng: np.random.Generator, lo: int, hi: int, den: int) -> Fraction:
    return Fraction(int(rng.integers(lo, hi + 1)), den)


def random_germ(rank: int, base_dim: int | None = None, order: int | None = None, seed: int = 0,
                exact: bool = True, field: str = "real", unimodular: bool = True,
                lattice_scale=1, identity_at_origin: bool = False, density: float = 1.0,
                spread: int = 3) -> FlatBundleGerm:
    """Reproducible random germ h = A^* exp(S(x)) A.

    S is symmetric (Hermitian for ``field="complex"``) with S(0) = 0 and
    dyadic rational Taylor coefficients; S is traceless and A is unit lower
    triangular when ``unimodular`` so that det h = 1 identically.
    """
    N = rank
    m = 2 * N - 1 if base_dim is None else base_dim
    K = (3 if N <= 2 else 2) if order is None else order
    rng = np.random.default_rng(seed)
    complex_ = field == "complex"
    S_terms: dict[tuple[int, ...], list[list]] = {}
    for exps in _monomials(m, 1, K + 1):
        if density < 1.0 and rng.random() > density:
            continue
        mat = [[Fraction(0)] * N for _ in range(N)]
        for i in range(N):
            for j in range(i, N):
                re = _rand_frac(rng, -spread, spread, 8)
                if complex_ and i != j:
                    im = _rand_frac(rng, -spread, spread, 8)
                    mat[i][j] = (re, im)
                    mat[j][i] = (re, -im)
                else:
                    mat[i][j] = re
                    mat[j][i] = re
        if unimodular:
            tr = sum(Fraction(mat[i][i]) for i in range(N)) / N
            for i in range(N):
                mat[i][i] = Fraction(mat[i][i]) - tr
        S_terms[exps] = mat
    A = [[Fraction(int(i == j)) for j in range(N)] for i in range(N)]
    if not identity_at_origin:
        for i in range(N):
            for j in range(i):
                re = _rand_frac(rng, -2, 2, 2)
                A[i][j] = (re, _rand_frac(rng, -2, 2, 2)) if complex_ else re
            if not unimodular:
                A[i][i] = Fraction(int(rng.integers(2, 5)), 2)
    g = germ_from_log(S_terms, A, m, K, exact=exact, field=field,
                      lattice_scale=lattice_scale, unimodular=unimodular)
    g.notes.update(seed=seed, rank=N, base_dim=m, order=K)
    return g


def constant_direction_germ(S: list[list], m: int, K: int, var: int = 0, exact: bool = True,
                            field: str = "real") -> FlatBundleGerm:
    """h = exp(x_var * S) for a constant matrix S, so omega = S dx_var."""
    exps = [0] * m
    exps[var] = 1
    n = len(S)
    A = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    tr = sum(Fraction(S[i][i]) for i in range(n)) if field == "real" else None
    return germ_from_log({tuple(exps): S}, A, m, K, exact=exact, field=field,
                         unimodular=tr == 0)


def trivial_germ(rank: int, m: int, K: int, exact: bool = True, lattice_scale=1) -> FlatBundleGerm:
    proto = Multivector.zero(Signature(m), K + 1, exact)
    return FlatBundleGerm(AlgebraMatrix.identity(proto, rank), lattice_scale=lattice_scale,
                          unimodular=True)


def complexify(g: FlatBundleGerm) -> FlatBundleGerm:
    return FlatBundleGerm(g.metric, "complex", g.lattice_scale, g.holonomy, g.unimodular, g.frame)


def is_unimodular(g: FlatBundleGerm) -> bool:
    det = det_even(g.metric)
    one = det.const(1)
    if g.exact:
        return (det - one).is_zero()
    return (det - one).max_abs() < 1e-12


def is_selfadjoint(g: FlatBundleGerm) -> bool:
    n = g.rank
    for i in range(n):
        for j in range(n):
            a = g.metric[i, j]
            b = g.metric[j, i].conj()
            r = a - b
            if g.exact and not r.is_zero():
                return False
            if not g.exact and r.max_abs() > 1e-12:
                return False
    return True


# ---------------------------------------------------------------------------
# invariant polynomials


def _todd_coefficients(n: int) -> list[Fraction]:
    """Taylor coefficients of x / (1 - e^-x) up to x^n."""
    a = [Fraction((-1) ** k, math.factorial(k + 1)) for k in range(n + 1)]
    inv = [Fraction(0)] * (n + 1)
    inv[0] = Fraction(1)
    for k in range(1, n + 1):
        inv[k] = -sum(a[i] * inv[k - i] for i in range(1, k + 1))
    return inv


@dataclass(frozen=True)
class InvariantPolynomial:
    """Ad-invariant polynomial on N x N matrices.

    ``kind`` is one of "n" (Tr A^j), "c" (total Chern det(I+A)), "cj"
    (j-th elementary symmetric function), "ch" (Tr e^A), "td" (Todd),
    "poly" (polynomial in n_1, n_2, ... with rational coefficients) or
    "product".
    """

    kind: str
    j: int = 0
    terms: tuple = ()
    factors: tuple = ()

    @classmethod
    def n(cls, j: int) -> "InvariantPolynomial":
        return cls("n", j)

    @classmethod
    def c_j(cls, j: int) -> "InvariantPolynomial":
        return cls("cj", j)

    @classmethod
    def chern(cls) -> "InvariantPolynomial":
        return cls("c")

    @classmethod
    def ch(cls) -> "InvariantPolynomial":
        return cls("ch")

    @classmethod
    def todd(cls) -> "InvariantPolynomial":
        return cls("td")

    @classmethod
    def poly(cls, terms: dict[tuple[int, ...], Fraction]) -> "InvariantPolynomial":
        return cls("poly", terms=tuple(sorted((tuple(k), Fraction(v)) for k, v in terms.items())))

    def __mul__(self, other: "InvariantPolynomial") -> "InvariantPolynomial":
        return InvariantPolynomial("product", factors=(self, other))

    @property
    def real(self) -> bool:
        return True

    def at_zero(self, N: int) -> Fraction:
        k = self.kind
        if k == "n":
            return Fraction(N if self.j == 0 else 0)
        if k == "cj":
            return Fraction(1 if self.j == 0 else 0)
        if k in ("c", "td"):
            return Fraction(1)
        if k == "ch":
            return Fraction(N)
        if k == "poly":
            return sum((v for e, v in self.terms if not any(e)), Fraction(0))
        return self.factors[0].at_zero(N) * self.factors[1].at_zero(N)

    def evaluate(self, A: AlgebraMatrix) -> Multivector:
        """P(A) for a matrix with even, nilpotent entries."""
        k = self.kind
        proto = A.proto
        exact = proto.exact
        n = A.shape[0]
        if k == "n":
            return A.power(self.j).trace()
        if k == "cj":
            if self.j == 0:
                return proto.const(1)
            acc = proto.zero_like()
            for idx in combinations(range(n), self.j):
                sub = AlgebraMatrix([[A[i, jj] for jj in idx] for i in idx])
                acc = acc + det_even(sub)
            return acc
        if k == "c":
            return det_even(AlgebraMatrix.identity(proto, n) + A)
        if k == "ch":
            coef = (lambda i: gaussian(Fraction(1, math.factorial(i)))) if exact else \
                (lambda i: 1.0 / math.factorial(i))
            return matrix_series(A, coef).trace()
        if k == "td":
            tc = _todd_coefficients(4 * (proto.sig.total + 2))
            coef = (lambda i: gaussian(tc[i])) if exact else (lambda i: float(tc[i]))
            return det_even(matrix_series(A, coef))
        if k == "poly":
            jmax = max((len(e) for e, _ in self.terms), default=0)
            ns = [A.power(j + 1).trace() for j in range(jmax)]
            acc = proto.zero_like()
            for exps, v in self.terms:
                term = proto.const(gaussian(v) if exact else float(v))
                for j, e in enumerate(exps):
                    for _ in range(e):
                        term = term * ns[j]
                acc = acc + term
            return acc
        return self.factors[0].evaluate(A) * self.factors[1].evaluate(A)

    def describe(self) -> str:
        if self.kind in ("n", "cj"):
            return f"{self.kind}{self.j}"
        if self.kind == "product":
            return "(" + self.factors[0].describe() + ")*(" + self.factors[1].describe() + ")"
        if self.kind == "poly":
            return "poly" + str([(e, str(v)) for e, v in self.terms])
        return self.kind


# ---------------------------------------------------------------------------
# characteristic forms


def _inv_8ipi(proto: Multivector) -> Multivector:
    """1 / (8 i pi)."""
    if proto.exact:
        return Multivector.pi_power(proto.sig, -2, proto.order, True).scale(gaussian(0, Fraction(-1, 8)))
    return proto.const(1 / (8j * math.pi))


def curvature_argument(om: AlgebraMatrix) -> AlgebraMatrix:
    """omega^2 / (8 i pi)."""
    c = _inv_8ipi(om.proto)
    return (om @ om).map(lambda x: x * c)


def P_even(g: FlatBundleGerm, P: InvariantPolynomial) -> Multivector:
    return P.evaluate(curvature_argument(g.omega))


def _z_signature(sig: Signature) -> Signature:
    return Signature(sig.base_dim, sig.extra_s, sig.rank, True, sig.params, sig.cap)


def P_z_from_omega(om: AlgebraMatrix, P: InvariantPolynomial) -> Multivector:
    zsig = _z_signature(om.proto.sig)
    omz = om.map(lambda x: rehome(x, zsig))
    proto = omz.proto
    z = proto.gen(zsig.z)
    half = gaussian(Fraction(1, 2)) if proto.exact else 0.5
    arg = curvature_argument(omz) + omz.map(lambda x: (z * x).scale(half))
    return tr_z(P.evaluate(arg))


def P_z(g: FlatBundleGerm, P: InvariantPolynomial) -> Multivector:
    """Tr_z P(omega^2/(8 i pi) + z omega/2)."""
    return P_z_from_omega(g.omega, P)


def n_j_z_closed_form(g: FlatBundleGerm, j: int) -> Multivector:
    """j 2^-(2j-1) (2 i pi)^-(j-1) Tr[omega^(2j-1)]."""
    if j < 1:
        raise ValueError("j must be positive")
    return closed_form_from_omega(g.omega, j)


def closed_form_from_omega(om: AlgebraMatrix, j: int) -> Multivector:
    tr = om.power(2 * j - 1).trace()
    proto = om.proto
    if proto.exact:
        c = gaussian(Fraction(j, 2 ** (2 * j - 1))) * (to_exact(1) / gaussian(0, 2)) ** (j - 1)
        return tr * Multivector.pi_power(tr.sig, -2 * (j - 1), tr.order, True).scale(c)
    c = j * 2.0 ** (-(2 * j - 1)) * (2j * math.pi) ** (-(j - 1))
    return tr.scale(c)


def compound_matrix(M: AlgebraMatrix, p: int) -> AlgebraMatrix:
    """p-th exterior power: minors det M[I, J] over increasing index sets."""
    n = M.shape[0]
    idx = list(combinations(range(n), p))
    if p == 0:
        return AlgebraMatrix.identity(M.proto, 1)
    rows = []
    for I in idx:
        row = []
        for J in idx:
            row.append(det_even(AlgebraMatrix([[M[i, jj] for jj in J] for i in I])))
        rows.append(row)
    return AlgebraMatrix(rows)


def ch_z_lambda(g: FlatBundleGerm) -> Multivector:
    """ch^z of the Z2-graded bundle of exterior powers of the antidual bundle.

    Each Lambda^p carries the Gram matrix of the induced metric (the p-th
    compound of the antidual Gram matrix); its omega is computed from scratch
    and the ch^z forms are combined with alternating signs.
    """
    if g.field != "complex":
        raise ValueError("ch_z_lambda needs a complex germ")
    G = g.dual().metric
    acc = None
    for p in range(g.rank + 1):
        Gp = compound_matrix(G, p)
        om = matrix_inverse(Gp) @ Gp.map(d)
        term = P_z_from_omega(om, InvariantPolynomial.ch())
        term = term if p % 2 == 0 else -term
        acc = term if acc is None else acc + term
    return acc


def newton_identity_scalar(values: Sequence[Fraction], j: int) -> Fraction:
    """n_j - c_1 n_{j-1} + ... + (-1)^j j c_j for A = diag(values)."""
    n = [sum(Fraction(v) ** i for v in values) for i in range(j + 1)]
    c = [Fraction(0)] * (j + 1)
    for i in range(j + 1):
        c[i] = sum((math.prod(Fraction(values[k]) for k in comb) for comb in combinations(range(len(values)), i)),
                   Fraction(0))
    out = n[j]
    for i in range(1, j):
        out += (-1) ** i * c[i] * n[j - i]
    out += (-1) ** j * j * c[j]
    return out


def phi_j_cochain(j: int, mats: Sequence[np.ndarray]) -> complex:
    """Alternating sum over permutations of Tr[M_s(1) ... M_s(2j-1)]."""
    if len(mats) != 2 * j - 1:
        raise ValueError(f"need {2 * j - 1} matrices")
    shapes = {np.shape(M) for M in mats}
    if len(shapes) != 1:
        raise ValueError("size mismatch")
    tot = 0j
    for p in permutations(range(len(mats))):
        prod = mats[p[0]]
        for i in p[1:]:
            prod = prod @ mats[i]
        tot += _perm_sign(p) * np.trace(prod)
    return complex(tot)
