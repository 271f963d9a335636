"""Flat superconnections on graded bundles of finite rank.

Two realisations are used side by side: a Z-graded complex E^0 -> ... -> E^n
written in flat frames (``FlatComplexGerm``), and the exterior algebra of a
flat bundle seen as a Fock space with Clifford generators (``FockOperator``).
Operators are graded ``AlgebraMatrix`` objects whose entries are jet forms,
coefficient on the left.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, zip_longest
from typing import Sequence

import numpy as np
from scipy import sparse

from .dense_algebra import DenseMatrix, algebra_basis, dense_expm
from .flat_bundle import FlatBundleGerm, compound_matrix
from .grassmann import (
    AlgebraMatrix,
    Multivector,
    ParityError,
    Signature,
    algebra_expm,
    berezin_double,
    det_even,
    matrix_series,
    exp_even,
    gaussian,
    sqrt_even,
    sqrtdet_sinc,
    supertrace,
    to_exact,
    to_float,
)
from .jets import d, matrix_inverse, numeric_matrix, partial, rehome, restrict_s, s_variable
from .report import EXACT_ZERO, CheckResult, make_check

MAX_FOCK_RANK = 12


def _num(proto: Multivector, v):
    return to_exact(v) if proto.exact else to_float(v)


def _half(proto: Multivector):
    return gaussian(Fraction(1, 2)) if proto.exact else 0.5


def _res(x: Multivector) -> float | str:
    """Residual of a difference: exact zero, or the largest coefficient."""
    if x.is_zero():
        return EXACT_ZERO if x.exact else 0.0
    return x.max_abs()


def _diff_res(a: Multivector, b: Multivector, order: int | None = None) -> float | str:
    if order is not None:
        a, b = a.with_order(order), b.with_order(order)
    if a.exact != b.exact:
        a, b = a.to_float(), b.to_float()
    return _res(a - b)


def _le(r: float | str, tol: float) -> bool:
    return r == EXACT_ZERO or (not isinstance(r, str) and r <= tol)


# ---------------------------------------------------------------------------
# Fock space of an exterior algebra


@lru_cache(maxsize=None)
def fock_basis(N: int) -> tuple[tuple[int, ...], ...]:
    """Monomials e_I ordered by degree, then lexicographically."""
    if not 0 < N <= MAX_FOCK_RANK:
        raise ValueError(f"Fock rank must be in 1..{MAX_FOCK_RANK}")
    return tuple(I for p in range(N + 1) for I in combinations(range(N), p))


@lru_cache(maxsize=None)
def _basis_index(N: int) -> dict[tuple[int, ...], int]:
    return {I: n for n, I in enumerate(fock_basis(N))}


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Integer operator on Lambda(C^N) in the monomial basis, with a parity."""

    name: str
    N: int
    matrix: sparse.csr_matrix
    parity: int

    @property
    def grading(self) -> tuple[int, ...]:
        return tuple(len(I) for I in fock_basis(self.N))

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(f"{self.name}{other.name}", self.N, (self.matrix @ other.matrix).tocsr(),
                            (self.parity + other.parity) % 2)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        if self.parity != other.parity:
            raise ParityError("sum of operators of different parity")
        return FockOperator(f"({self.name}+{other.name})", self.N, (self.matrix + other.matrix).tocsr(),
                            self.parity)

    def scaled(self, k: int) -> "FockOperator":
        return FockOperator(f"{k}{self.name}", self.N, (self.matrix * k).tocsr(), self.parity)

    def is_zero(self) -> bool:
        m = self.matrix.copy()
        m.eliminate_zeros()
        return m.nnz == 0

    def supertrace(self) -> int:
        diag = self.matrix.diagonal()
        return int(sum(v if p % 2 == 0 else -v for v, p in zip(diag, self.grading)))


def _identity(N: int) -> FockOperator:
    return FockOperator("1", N, sparse.identity(1 << N, dtype=np.int64, format="csr"), 0)


@lru_cache(maxsize=None)
def exterior_operators(N: int) -> tuple[tuple[FockOperator, ...], tuple[FockOperator, ...]]:
    """(e_k ^) and the coordinate contractions i(e_k), k = 1..N."""
    basis = fock_basis(N)
    index = _basis_index(N)
    dim = len(basis)
    ext, intr = [], []
    for k in range(N):
        re, ce, ve, ri, ci, vi = [], [], [], [], [], []
        for col, I in enumerate(basis):
            sign = -1 if sum(1 for i in I if i < k) % 2 else 1
            if k in I:
                ri.append(index[tuple(i for i in I if i != k)])
                ci.append(col)
                vi.append(sign)
            else:
                re.append(index[tuple(sorted(I + (k,)))])
                ce.append(col)
                ve.append(sign)
        ext.append(FockOperator(f"a+{k + 1}", N, sparse.csr_matrix((ve, (re, ce)), shape=(dim, dim),
                                                                     dtype=np.int64), 1))
        intr.append(FockOperator(f"a{k + 1}", N, sparse.csr_matrix((vi, (ri, ci)), shape=(dim, dim),
                                                                    dtype=np.int64), 1))
    return tuple(ext), tuple(intr)


def _anticommutator(a: FockOperator, b: FockOperator) -> FockOperator:
    return FockOperator("", a.N, (a.matrix @ b.matrix + b.matrix @ a.matrix).tocsr(), 0)


@lru_cache(maxsize=None)
def clifford_generators(N: int) -> tuple[tuple[FockOperator, ...], tuple[FockOperator, ...]]:
    """c_k = e_k^ - i(e_k) and chat_k = e_k^ + i(e_k) on the standard Hermitian Lambda(C^N).

    The anticommutation relations are checked exactly before returning.
    """
    ext, intr = exterior_operators(N)
    c = tuple(FockOperator(f"c{k + 1}", N, (ext[k].matrix - intr[k].matrix).tocsr(), 1) for k in range(N))
    ch = tuple(FockOperator(f"ch{k + 1}", N, (ext[k].matrix + intr[k].matrix).tocsr(), 1) for k in range(N))
    one = _identity(N)
    for i in range(N):
        for j in range(N):
            delta = 2 if i == j else 0
            if not FockOperator("", N, (_anticommutator(c[i], c[j]).matrix + delta * one.matrix).tocsr(),
                                0).is_zero():
                raise AssertionError("c relations failed")
            if not FockOperator("", N, (_anticommutator(ch[i], ch[j]).matrix - delta * one.matrix).tocsr(),
                                0).is_zero():
                raise AssertionError("chat relations failed")
            if not _anticommutator(c[i], ch[j]).is_zero():
                raise AssertionError("mixed relations failed")
    return c, ch


def clifford_relation_residuals(N: int) -> dict[str, int]:
    """Largest integer entry of each relation's defect (all zero when the relations hold)."""
    c, ch = clifford_generators(N)
    one = _identity(N).matrix
    out = {"cc": 0, "chch": 0, "cch": 0}
    for i in range(N):
        for j in range(N):
            delta = 2 if i == j else 0
            for key, m in (("cc", _anticommutator(c[i], c[j]).matrix + delta * one),
                           ("chch", _anticommutator(ch[i], ch[j]).matrix - delta * one),
                           ("cch", _anticommutator(c[i], ch[j]).matrix)):
                out[key] = max(out[key], int(abs(m).max()) if m.nnz else 0)
    return out


def top_supertrace_sign(N: int) -> int:
    return -1 if (N * (N + 1) // 2) % 2 else 1


def monomial_supertraces(N: int) -> dict[tuple[tuple[int, ...], tuple[int, ...]], int]:
    """Tr_s[c_I chat_J] for all increasing index sets I, J."""
    c, ch = clifford_generators(N)
    out = {}
    subsets = [I for p in range(N + 1) for I in combinations(range(N), p)]
    for I in subsets:
        left = _identity(N)
        for i in I:
            left = left @ c[i]
        for J in subsets:
            op = left
            for j in J:
                op = op @ ch[j]
            out[(I, J)] = op.supertrace()
    return out


def fock_matrix(terms: Sequence[tuple[object, FockOperator]], proto: Multivector) -> AlgebraMatrix:
    """sum_k coeff_k (x) op_k as a graded matrix over the algebra of ``proto``.

    Coefficients may be numbers or Multivectors; they sit to the left of the
    operator.
    """
    if not terms:
        raise ValueError("empty operator")
    N = terms[0][1].N
    dim = 1 << N
    entries: dict[tuple[int, int], Multivector] = {}
    for coeff, op in terms:
        cm = coeff if isinstance(coeff, Multivector) else proto.const(coeff)
        if cm.is_zero():
            continue
        coo = op.matrix.tocoo()
        for i, j, v in zip(coo.row, coo.col, coo.data):
            if not v:
                continue
            x = cm.scale(_num(proto, int(v)))
            key = (int(i), int(j))
            entries[key] = entries[key] + x if key in entries else x
    rows = [[entries.get((i, j), proto.zero_like()) for j in range(dim)] for i in range(dim)]
    return AlgebraMatrix(rows, [len(I) for I in fock_basis(N)])


# ---------------------------------------------------------------------------
# supertrace / Berezin bridge


def clifford_sinc_factor(M: AlgebraMatrix) -> Multivector:
    """det(sinh(GM) / GM)^(1/2), G = diag(-1 (N times), +1 (N times)) the Clifford form.

    Agrees with det(sin M / M)^(1/2) when M only pairs the first N slots with
    the last N.
    """
    n = M.shape[0]
    if n % 2:
        raise ValueError("M must be 2N x 2N")
    proto = M.proto
    for a in range(n):
        for b in range(n):
            if not (M[a, b] + M[b, a]).is_zero() if proto.exact else (M[a, b] + M[b, a]).max_abs() > 1e-14:
                raise ValueError("M must be skew-symmetric")
    N = n // 2
    GM = AlgebraMatrix([[M[a, b] if a >= N else -M[a, b] for b in range(n)] for a in range(n)])
    S = matrix_series(GM @ GM, lambda k: _num(proto, Fraction(1, math.factorial(2 * k + 1))))
    return sqrt_even(det_even(S))


def _bridge_core(N: int, M: AlgebraMatrix, J: Sequence[Multivector]) -> tuple[Multivector, Multivector]:
    """Supertrace side, and the Berezin side without its determinant prefactor."""
    proto = M.proto
    sig = proto.sig
    if M.shape != (2 * N, 2 * N) or len(J) != 2 * N:
        raise ValueError("M must be 2N x 2N and J of length 2N")
    if sig.rank < N:
        raise ValueError("signature needs fiber blocks of rank N")
    for row in M.rows:
        for x in row:
            if not x.is_even():
                raise ParityError("M must have even entries")
    for j in J:
        if not j.is_odd():
            raise ParityError("J must have odd entries")
    c, ch = clifford_generators(N)
    C = list(c) + list(ch)
    half = _half(proto)
    terms: list[tuple[object, FockOperator]] = []
    for a in range(2 * N):
        for b in range(2 * N):
            if not M[a, b].is_zero():
                terms.append((M[a, b].scale(half), C[a] @ C[b]))
        if not J[a].is_zero():
            terms.append((J[a], C[a]))
    if not terms:
        terms = [(proto.zero_like(), C[0])]
    lhs = supertrace(algebra_expm(fock_matrix(terms, proto)))
    Psi = [proto.gen(sig.psi(k)) for k in range(N)] + [proto.gen(sig.psihat(k)) for k in range(N)]
    quad = proto.zero_like()
    lin = proto.zero_like()
    for a in range(2 * N):
        for b in range(2 * N):
            if not M[a, b].is_zero():
                quad = quad + Psi[a] * M[a, b] * Psi[b]
        lin = lin + J[a] * Psi[a]
    core = berezin_double(exp_even(quad.scale(half) + lin))
    return lhs, core.scale(_num(proto, top_supertrace_sign(N) * 2 ** N))


def _bridge_prefactor(M: AlgebraMatrix, factor: str) -> Multivector:
    if factor == "literal":
        return sqrtdet_sinc(M)
    if factor == "signed":
        return clifford_sinc_factor(M)
    raise ValueError(f"unknown factor {factor!r}")


def _fock_bridge_sides(N: int, M: AlgebraMatrix, J: Sequence[Multivector],
                       factor: str = "literal") -> tuple[Multivector, Multivector]:
    lhs, core = _bridge_core(N, M, J)
    return lhs, _bridge_prefactor(M, factor) * core


def bridge_identity_check(N: int, M: AlgebraMatrix, J: Sequence[Multivector], tol: float = 1e-12,
                          tag: str = "", factor: str = "literal", informational: bool = False,
                          core: tuple[Multivector, Multivector] | None = None) -> CheckResult:
    """Supertrace of a Clifford exponential against the Berezin integral of the same exponent.

    ``factor="literal"`` uses det(sin M / M)^(1/2); ``"signed"`` uses the
    Clifford-form version from ``clifford_sinc_factor``.
    """
    lhs, base = _bridge_core(N, M, J) if core is None else core
    rhs = _bridge_prefactor(M, factor) * base
    r = _diff_res(lhs, rhs)
    label = ("Clifford supertrace equals Berezin integral, sin(M)/M prefactor" if factor == "literal"
             else "Clifford supertrace equals Berezin integral, sinh(GM)/GM prefactor")
    return make_check(f"fock/bridge-{factor}/N{N}{tag}", label, r, tol,
                      inputs={"N": N, "exact": M.proto.exact, "tag": tag, "base_dim": M.proto.sig.base_dim},
                      detail={"lhs_terms": len(lhs.terms), "rhs_norm": _jet_norm(rhs)},
                      informational=informational)


def random_bridge_inputs(N: int, seed: int, exact: bool = True, numeric: float = 0.0,
                         m: int | None = None, blocks: str = "all") -> tuple[AlgebraMatrix, list[Multivector]]:
    """Skew M with 2-form entries (plus an optional numeric part) and J with 1-form entries.

    Entries of M are sums of two wedge products, so their squares need not
    vanish.  ``blocks="cross"`` keeps only the entries pairing slot k <= N
    with slot l > N.  Base dimension 2N + 4 is the smallest in which the
    prefactor's quadratic term survives; it is the default for N <= 2, while
    N >= 3 defaults to 2N to keep exact arithmetic fast.
    """
    if blocks not in ("all", "cross"):
        raise ValueError(f"unknown block pattern {blocks!r}")
    if m is None:
        m = 2 * N + 4 if N <= 2 else 2 * N
    rng = np.random.default_rng(seed)
    sig = Signature(m, False, N)
    proto = Multivector.zero(sig, 0, exact)

    def rnd():
        v = Fraction(int(rng.integers(-3, 4)), 2)
        return v if exact else float(v)

    def one_form():
        acc = proto.zero_like()
        for a in range(m):
            acc = acc + proto.gen(sig.dx(a)).scale(_num(proto, rnd()))
        return acc

    n = 2 * N
    rows = [[proto.zero_like() for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            if blocks == "cross" and (a < N) == (b < N):
                continue
            x = one_form() * one_form() + one_form() * one_form()
            if numeric:
                x = x + proto.const(float(rng.uniform(-numeric, numeric)))
            rows[a][b] = x
            rows[b][a] = -x
    return AlgebraMatrix(rows), [one_form() for _ in range(n)]


def bridge_suite(N: int, seed: int, exact: bool = True, m: int | None = None) -> list[CheckResult]:
    """Literal prefactor on cross-block M, signed prefactor on generic M, and the literal one on generic M."""
    tag = f"/s{seed}" + ("" if m is None else f"/m{m}")
    Mc, Jc = random_bridge_inputs(N, seed, exact, m=m, blocks="cross")
    Mg, Jg = random_bridge_inputs(N, seed + 1000, exact, m=m)
    core = _bridge_core(N, Mg, Jg)
    out = [bridge_identity_check(N, Mc, Jc, tag=tag + "/cross", factor="literal"),
           bridge_identity_check(N, Mg, Jg, tag=tag + "/generic", factor="signed", core=core)]
    if N >= 2:
        out.append(bridge_identity_check(N, Mg, Jg, tag=tag + "/generic", factor="literal", informational=True,
                                         core=core))
    return out


# ---------------------------------------------------------------------------
# the function f and the normaliser


@dataclass(frozen=True)
class GaussPolynomial:
    """f(z) = p(z) exp(z^2) (or just p(z) when ``gauss`` is False), p rational."""

    poly: tuple[Fraction, ...]
    gauss: bool = True

    def derivative(self) -> "GaussPolynomial":
        p = list(self.poly)
        dp = [k * p[k] for k in range(1, len(p))]
        if self.gauss:
            zp = [Fraction(0)] + p
            dp = [Fraction(a) + 2 * Fraction(b) for a, b in zip_longest(dp, zp, fillvalue=0)]
        while len(dp) > 1 and dp[-1] == 0:
            dp.pop()
        return GaussPolynomial(tuple(dp) or (Fraction(0),), self.gauss)

    @property
    def parity(self) -> int | None:
        odd = any(c for k, c in enumerate(self.poly) if k % 2)
        even = any(c for k, c in enumerate(self.poly) if k % 2 == 0)
        return None if odd and even else (1 if odd else 0)

    def __call__(self, z: complex) -> complex:
        val = sum(float(c) * z ** k for k, c in enumerate(self.poly))
        return val * cmath.exp(z * z) if self.gauss else complex(val)

    def on_matrix(self, X: AlgebraMatrix) -> AlgebraMatrix:
        proto = X.proto
        n = X.shape[0]
        out = AlgebraMatrix.identity(proto, n, X.grading).scale(_num(proto, self.poly[-1]))
        for c in reversed(self.poly[:-1]):
            out = out @ X + AlgebraMatrix.identity(proto, n, X.grading).scale(_num(proto, c))
        if self.gauss:
            out = out @ algebra_expm(X @ X)
        return out

    def on_dense(self, X: DenseMatrix) -> DenseMatrix:
        one = DenseMatrix.identity_like(X)
        out = one.scale(complex(self.poly[-1]))
        for c in reversed(self.poly[:-1]):
            out = out @ X + one.scale(complex(c))
        if self.gauss:
            out = out @ dense_expm(X @ X)
        return out


F_STANDARD = GaussPolynomial((Fraction(0), Fraction(1)), True)


def odd_monomial(k: int) -> GaussPolynomial:
    if k < 1 or k % 2 == 0:
        raise ValueError("need a positive odd power")
    return GaussPolynomial(tuple(Fraction(int(i == k)) for i in range(k + 1)), False)


def _inv_2ipi_power(proto: Multivector, j: int) -> Multivector:
    """(2 i pi)^(-j) for j >= 0 as a scalar element (formal pi in exact mode)."""
    if proto.exact:
        c = gaussian(0, Fraction(-1, 2)) ** j if j else gaussian(1)
        return Multivector.pi_power(proto.sig, -2 * j, proto.order, True).scale(c)
    return proto.const((2j * math.pi) ** (-j))


def normalise(form: Multivector, shift: int, tol: float = 1e-13) -> Multivector:
    """Multiply the degree-k part by (2 i pi)^((shift - k)/2).

    Components whose degree has the wrong parity must vanish (up to ``tol``
    relative to the form in float mode); otherwise ParityError.
    """
    out = form.zero_like()
    scale = form.max_abs() if not form.is_zero() else 0.0
    for k in range(form.sig.nvars + 1):
        part = form.form_degree_part(k)
        if part.is_zero():
            continue
        if (shift - k) % 2:
            if form.exact or part.max_abs() > tol * max(1.0, scale):
                raise ParityError(f"degree-{k} component in a form of parity {shift % 2}")
            continue
        j = (k - shift) // 2
        if j >= 0:
            out = out + part * _inv_2ipi_power(part, j)
        else:
            c = (2j * math.pi) ** (-j) if not form.exact else None
            if c is None:
                out = out + part * Multivector.pi_power(part.sig, -2 * j, part.order, True).scale(
                    gaussian(0, 2) ** (-j))
            else:
                out = out + part.scale(c)
    return out


def _check_odd(X: AlgebraMatrix) -> None:
    if X.grading is None:
        raise ParityError("operator needs a grading")
    n = X.shape[0]
    for i in range(n):
        for j in range(n):
            x = X[i, j]
            if x.is_zero():
                continue
            if (X.grading[i] + X.grading[j]) % 2 == 0 and not x.is_odd():
                raise ParityError("operator is not odd")
            if (X.grading[i] + X.grading[j]) % 2 == 1 and not x.is_even():
                raise ParityError("operator is not odd")


BACKEND = "auto"


def _use_dense(X: AlgebraMatrix, backend: str | None) -> bool:
    backend = BACKEND if backend is None else backend
    if backend not in ("auto", "dense", "sparse"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend != "sparse" and not X.proto.exact


def weighted_supertrace(X: AlgebraMatrix, f: GaussPolynomial, weights: Sequence | None = None,
                        backend: str | None = None) -> Multivector:
    """Tr_s[W f(X)] with W = diag(weights) (identity when None)."""
    _check_odd(X)
    proto = X.proto
    n = X.shape[0]
    w = [1] * n if weights is None else list(weights)
    if _use_dense(X, backend):
        F = f.on_dense(DenseMatrix.from_matrix(X))
        sgn = np.array([(-1.0 if g % 2 else 1.0) * float(wi) for g, wi in zip(X.grading, w)])
        vals = np.einsum("bii,i->b", F.data, sgn)
        keys = F.basis.keys
        return proto.like(proto._clean({keys[b]: complex(vals[b]) for b in np.nonzero(vals)[0]}), F.basis.order)
    F = f.on_matrix(X)
    if weights is not None:
        F = AlgebraMatrix([[x.scale(_num(proto, w[i])) for x in row] for i, row in enumerate(F.rows)], F.grading)
    return supertrace(F)


def raw_supertrace(X: AlgebraMatrix, f: GaussPolynomial = F_STANDARD, backend: str | None = None) -> Multivector:
    return weighted_supertrace(X, f, None, backend)


def f_form(X: AlgebraMatrix, f: GaussPolynomial = F_STANDARD, backend: str | None = None) -> Multivector:
    """(2 i pi)^(1/2) phi Tr_s[f(X)] for an odd operator X."""
    if f.parity != 1:
        raise ValueError("f must be odd")
    return normalise(raw_supertrace(X, f, backend), 1)


def f_wedge_form(D: AlgebraMatrix, f: GaussPolynomial = F_STANDARD, backend: str | None = None) -> Multivector:
    """phi Tr_s[(N/2) f'(D)] with N the degree operator."""
    half_degrees = [Fraction(g, 2) for g in D.grading]
    return normalise(weighted_supertrace(D, f.derivative(), half_degrees, backend), 0)


def fprime_imaginary(t: float, f: GaussPolynomial = F_STANDARD) -> float:
    """f'(i sqrt(t) / 2); equals (1 - t/2) exp(-t/4) for the standard f."""
    return f.derivative()(0.5j * math.sqrt(t)).real


# ---------------------------------------------------------------------------
# flat complexes


def _conj_transpose(M: AlgebraMatrix) -> AlgebraMatrix:
    n, m = M.shape
    return AlgebraMatrix([[M[i, j].conj() for i in range(n)] for j in range(m)])


def _block_diag(blocks: Sequence[AlgebraMatrix], proto: Multivector) -> AlgebraMatrix:
    n = sum(b.shape[0] for b in blocks)
    rows = [[proto.zero_like() for _ in range(n)] for _ in range(n)]
    o = 0
    for b in blocks:
        k = b.shape[0]
        for i in range(k):
            for j in range(k):
                rows[o + i][o + j] = b[i, j]
        o += k
    return AlgebraMatrix(rows)


def euler_weighted(ranks: Sequence[int]) -> int:
    """sum_i (-1)^i i rk_i."""
    return sum((-1) ** i * i * r for i, r in enumerate(ranks))


def _jet_norm(x: Multivector) -> float:
    return 0.0 if x.is_zero() else x.max_abs()


@dataclass(eq=False)
class FlatComplexGerm:
    """Z-graded complex E^0 -> E^1 -> ... in flat frames over a base germ.

    ``metrics[i]`` is the Gram matrix of the flat frame of E^i; ``differentials[i]``
    maps E^i to E^{i+1} (shape rk E^{i+1} x rk E^i).  ``kernel`` lists total-basis
    indices of a constant frame of the harmonic space; None means acyclic.
    """

    metrics: list[AlgebraMatrix]
    differentials: list[AlgebraMatrix]
    kernel: tuple[int, ...] | None = None
    flat: bool = True
    tol: float = 1e-12
    notes: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.metrics)
        if len(self.differentials) != n - 1:
            raise ValueError("need one differential between consecutive degrees")
        for i, v in enumerate(self.differentials):
            if v.shape != (self.ranks[i + 1], self.ranks[i]):
                raise ValueError(f"differential {i} has shape {v.shape}")
        for i in range(n - 2):
            sq = self.differentials[i + 1] @ self.differentials[i]
            if not self._small(sq):
                raise ValueError("v^2 is not zero")
        if self.flat:
            for v in self.differentials:
                if not self._small(v.map(d)):
                    raise ValueError("differential is not flat (dv != 0)")
        for h in self.metrics:
            if not self._small(h - _conj_transpose(h)):
                raise ValueError("metric is not self-adjoint")
        self._check_kernel()

    def _small(self, M: AlgebraMatrix) -> bool:
        if M.proto.exact:
            return M.is_zero()
        return all(_jet_norm(x) <= self.tol for row in M.rows for x in row)

    # -- structure ------------------------------------------------------------

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(h.shape[0] for h in self.metrics)

    @property
    def grading(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.ranks) for _ in range(r))

    @property
    def proto(self) -> Multivector:
        return self.metrics[0].proto

    @property
    def order(self) -> int:
        return self.proto.order - 1

    def total_metric(self) -> AlgebraMatrix:
        return _block_diag(self.metrics, self.proto)

    def total_differential(self) -> AlgebraMatrix:
        proto = self.proto
        n = sum(self.ranks)
        offs = np.cumsum((0,) + self.ranks)
        rows = [[proto.zero_like() for _ in range(n)] for _ in range(n)]
        for i, v in enumerate(self.differentials):
            for a in range(v.shape[0]):
                for b in range(v.shape[1]):
                    rows[offs[i + 1] + a][offs[i] + b] = v[a, b]
        return AlgebraMatrix(rows)

    def omega(self) -> AlgebraMatrix:
        blocks = [matrix_inverse(h) @ h.map(d) for h in self.metrics]
        om = _block_diag(blocks, self.proto)
        return AlgebraMatrix(om.rows, self.grading)

    def adjoint_differential(self) -> AlgebraMatrix:
        H = self.total_metric()
        return matrix_inverse(H) @ _conj_transpose(self.total_differential()) @ H

    def laplacian_at_origin(self) -> np.ndarray:
        num = lambda M: np.array([[complex(to_float(x)) for x in row] for row in numeric_matrix(M)])
        v = num(self.total_differential())
        vs = num(self.adjoint_differential())
        return vs @ v + v @ vs

    def _check_kernel(self) -> None:
        lap = self.laplacian_at_origin()
        sv = np.linalg.svd(lap, compute_uv=False)
        scale = max(1.0, float(sv.max()) if sv.size else 1.0)
        dim_ker = int(np.sum(sv <= 1e-9 * scale))
        expected = 0 if self.kernel is None else len(self.kernel)
        if dim_ker != expected:
            raise ValueError(f"Laplacian kernel at the base point has dimension {dim_ker}, "
                             f"but the supplied kernel frame has {expected}")
        if self.kernel:
            v = self.total_differential()
            vs = self.adjoint_differential()
            for k in self.kernel:
                for i in range(v.shape[0]):
                    if _jet_norm(v[i, k]) > self.tol or _jet_norm(vs[i, k]) > self.tol:
                        raise ValueError("kernel frame is not annihilated by v and v*")
            H = self.total_metric()
            rest = [i for i in range(H.shape[0]) if i not in self.kernel]
            for k in self.kernel:
                for i in rest:
                    if _jet_norm(H[k, i]) > self.tol:
                        raise ValueError("kernel frame is not orthogonal to its complement")

    @property
    def d_E(self) -> int:
        return euler_weighted(self.ranks)

    def cohomology_ranks(self) -> tuple[int, ...]:
        grading = self.grading
        out = [0] * len(self.ranks)
        for k in self.kernel or ():
            out[grading[k]] += 1
        return tuple(out)

    @property
    def d_H(self) -> int:
        return euler_weighted(self.cohomology_ranks())

    def cohomology(self) -> "FlatComplexGerm | None":
        """Harmonic part with the restricted metric and zero differential."""
        if not self.kernel:
            return None
        grading = self.grading
        H = self.total_metric()
        by_deg: list[list[int]] = [[] for _ in self.ranks]
        for k in sorted(self.kernel):
            by_deg[grading[k]].append(k)
        proto = self.proto
        metrics = []
        for idx in by_deg:
            metrics.append(AlgebraMatrix([[H[a, b] for b in idx] for a in idx]) if idx else None)
        # empty degrees carry rank 0; represent them by dropping trailing/leading gaps
        degs = [i for i, m in enumerate(metrics) if m is not None]
        lo, hi = degs[0], degs[-1]
        full = []
        for i in range(lo, hi + 1):
            if metrics[i] is None:
                raise ValueError("cohomology with interior gaps is not supported")
            full.append(metrics[i])
        diffs = [AlgebraMatrix([[proto.zero_like() for _ in range(full[i].shape[0])]
                                for _ in range(full[i + 1].shape[0])]) for i in range(len(full) - 1)]
        out = FlatComplexGerm(full, diffs, tuple(range(sum(m.shape[0] for m in full))), self.flat, self.tol)
        out.notes["degree_offset"] = lo
        return out

    def to_float(self) -> "FlatComplexGerm":
        if not self.proto.exact:
            return self
        f = lambda M: M.map(lambda x: x.to_float())
        return FlatComplexGerm([f(h) for h in self.metrics], [f(v) for v in self.differentials],
                               self.kernel, self.flat, self.tol, dict(self.notes))

    def rehomed(self, sig: Signature) -> "FlatComplexGerm":
        f = lambda M: M.map(lambda x: rehome(x, sig))
        return FlatComplexGerm([f(h) for h in self.metrics], [f(v) for v in self.differentials],
                               self.kernel, self.flat, self.tol, dict(self.notes))


def superconnection_operator(cx: FlatComplexGerm, rt) -> AlgebraMatrix:
    """(sqrt(t) (v* - v) + omega) / 2 as a graded matrix; ``rt`` = sqrt(t), number or jet."""
    proto = cx.proto
    v = cx.total_differential()
    vs = cx.adjoint_differential()
    om = cx.omega()
    half = _half(proto)
    if isinstance(rt, Multivector):
        kin = (vs - v).map(lambda x: x * rt)
    else:
        kin = (vs - v).scale(_num(proto, rt))
    out = (kin + AlgebraMatrix(om.rows)).scale(half)
    return AlgebraMatrix(out.rows, cx.grading)


def _degree_offset_sign(cx: FlatComplexGerm) -> int:
    off = cx.notes.get("degree_offset", 0)
    return -1 if off % 2 else 1


def complex_f_form(cx: FlatComplexGerm, t=0, f: GaussPolynomial = F_STANDARD) -> Multivector:
    """f(C'_t, h); t = 0 gives the f-form of the flat connection itself."""
    rt = math.sqrt(t) if not isinstance(t, Multivector) and t else 0
    out = f_form(superconnection_operator(cx, rt), f)
    return out if _degree_offset_sign(cx) > 0 else -out


def complex_f_wedge(cx: FlatComplexGerm, t, f: GaussPolynomial = F_STANDARD) -> Multivector:
    out = f_wedge_form(superconnection_operator(cx, math.sqrt(t)), f)
    off = cx.notes.get("degree_offset", 0)
    if off:
        raise ValueError("f^ of a shifted complex is not needed here")
    return out


def cohomology_f_form(cx: FlatComplexGerm, f: GaussPolynomial = F_STANDARD) -> Multivector | None:
    H = cx.cohomology()
    return None if H is None else complex_f_form(H, 0, f)


def torsion_integrand(cx: FlatComplexGerm, t: float, f: GaussPolynomial = F_STANDARD) -> Multivector:
    """f^(C'_t) - d(H) f'(0)/2 - (d(E) - d(H)) f'(i sqrt(t)/2)/2."""
    fw = complex_f_wedge(cx, t, f)
    fp = f.derivative()
    c = cx.d_H * fp(0).real / 2 + (cx.d_E - cx.d_H) * fprime_imaginary(t, f) / 2
    return fw - fw.const(c)


@dataclass
class TorsionResult:
    form: Multivector
    error_estimate: float
    nodes: int
    step: float
    trace: list[tuple[float, float]]


def _smallest_gap(cx: FlatComplexGerm) -> float:
    ev = np.linalg.eigvals(cx.laplacian_at_origin())
    pos = [e.real for e in ev if abs(e) > 1e-9 * max(1.0, float(np.abs(ev).max()))]
    return min(pos) if pos else 1.0


def torsion_form(cx: FlatComplexGerm, f: GaussPolynomial = F_STANDARD, *, tol: float = 1e-10,
                 t_min: float = 1e-18, step: float = 0.5, max_halvings: int = 6) -> TorsionResult:
    """-int_0^inf [integrand] dt/t by the exp-sinh rule t = exp(pi/2 sinh w).

    The trapezoid step in w is halved until two successive sums agree to ``tol``
    (relative to the largest coefficient).  The upper end is placed where the
    smallest Laplacian eigenvalue gives exp(-t lambda / 4) below 1e-30.
    """
    cx = cx.to_float()
    lam = _smallest_gap(cx)
    t_max = 4 * 80 / lam
    w_lo = -math.asinh(2 / math.pi * math.log(1 / t_min))
    w_hi = math.asinh(2 / math.pi * math.log(t_max))
    cache: dict[float, Multivector] = {}
    trace: dict[float, float] = {}

    def g(w: float) -> Multivector:
        if w not in cache:
            t = math.exp(math.pi / 2 * math.sinh(w))
            val = torsion_integrand(cx, t, f)
            cache[w] = val.scale(math.pi / 2 * math.cosh(w))
            trace[t] = 0.0 if val.is_zero() else val.max_abs()
        return cache[w]

    def trapezoid(h: float) -> Multivector:
        n_lo = math.floor(w_lo / h)
        n_hi = math.ceil(w_hi / h)
        acc = None
        for n in range(n_lo, n_hi + 1):
            v = g(n * h)
            acc = v if acc is None else acc + v
        return acc.scale(h)

    h = step
    prev = trapezoid(h)
    err = math.inf
    for _ in range(max_halvings):
        h /= 2
        cur = trapezoid(h)
        diff = cur - prev
        err = 0.0 if diff.is_zero() else diff.max_abs()
        scale = max(1.0, cur.max_abs() if not cur.is_zero() else 0.0)
        prev = cur
        if err <= tol * scale:
            break
    return TorsionResult(-prev, err, len(cache), h, sorted(trace.items()))


def anomaly_check(cx: FlatComplexGerm, tol: float = 1e-6, tag: str = "",
                  f: GaussPolynomial = F_STANDARD, torsion: TorsionResult | None = None) -> CheckResult:
    """d T = f(flat connection on E) - f(flat connection on H), to jet order K-1."""
    cx = cx.to_float()
    T = torsion or torsion_form(cx, f)
    lhs = d(T.form)
    rhs = complex_f_form(cx, 0, f)
    fh = cohomology_f_form(cx, f)
    if fh is not None:
        rhs = rhs - fh
    r = _diff_res(lhs, rhs, cx.order - 1)
    return make_check(f"torsion/anomaly{tag}", "d(torsion form) = f-form of E minus f-form of cohomology",
                      r, tol, inputs={"ranks": cx.ranks, "kernel": cx.kernel, "tag": tag, **cx.notes},
                      detail={"quadrature_error": T.error_estimate, "nodes": T.nodes,
                              "rhs_norm": _jet_norm(rhs), "torsion_norm": _jet_norm(T.form),
                              "imag_part": T.form.real_residual()})


def limit_checks(cx: FlatComplexGerm, tol: float = 1e-6, tag: str = "", t_large: float = 1e3,
                 t_small: float = 1e-3, f: GaussPolynomial = F_STANDARD) -> list[CheckResult]:
    """Integrand limits at a large and a small t, plus informational O(t) rate checks."""
    cx = cx.to_float()
    fp0 = f.derivative()(0).real
    out = []
    inputs = {"ranks": cx.ranks, "tag": tag, **cx.notes}
    fE = complex_f_form(cx, 0, f)
    fH = cohomology_f_form(cx, f)
    fH = fE.zero_like() if fH is None else fH

    def wedge_res(t, target):
        w = complex_f_wedge(cx, t, f)
        return _jet_norm(w - w.const(target))

    def form_res(t, target):
        return _jet_norm(complex_f_form(cx, t, f) - target)

    r = wedge_res(t_large, cx.d_H * fp0 / 2)
    out.append(make_check(f"torsion/limit-large-wedge{tag}", "f^ tends to d(H) f'(0)/2 at large t", r, tol,
                          inputs={**inputs, "t": t_large}))
    r = form_res(t_large, fH)
    out.append(make_check(f"torsion/limit-large-form{tag}", "f(C'_t) tends to the f-form of cohomology at large t",
                          r, tol, inputs={**inputs, "t": t_large}))
    r1 = wedge_res(t_small, cx.d_E * fp0 / 2)
    r2 = wedge_res(t_small / 10, cx.d_E * fp0 / 2)
    out.append(make_check(f"torsion/limit-small-wedge{tag}", "f^ tends to d(E) f'(0)/2 at small t", r1, tol,
                          inputs={**inputs, "t": t_small}, detail={"residual_over_t": r1 / t_small}))
    out.append(make_check(f"torsion/rate-small-wedge{tag}", "small-t residual of f^ shrinks linearly in t",
                          abs(r1 / max(r2, 1e-300) - 10) / 10, 0.05, inputs={**inputs, "t": t_small},
                          detail={"ratio": r1 / max(r2, 1e-300)}, informational=True))
    s1 = form_res(t_small, fE)
    s2 = form_res(t_small / 10, fE)
    out.append(make_check(f"torsion/limit-small-form{tag}", "f(C'_t) tends to the f-form of E at small t", s1, tol,
                          inputs={**inputs, "t": t_small}, detail={"residual_over_t": s1 / t_small}))
    out.append(make_check(f"torsion/rate-small-form{tag}", "small-t residual of f(C'_t) shrinks linearly in t",
                          abs(s1 / max(s2, 1e-300) - 10) / 10 if s1 > 1e-14 else 0.0, 0.05,
                          inputs={**inputs, "t": t_small}, detail={"ratio": s1 / max(s2, 1e-300)},
                          informational=True))
    return out


def complex_transgression_check(cx: FlatComplexGerm, t0: float = 1.0, tol: float = 1e-10,
                                tag: str = "", f: GaussPolynomial = F_STANDARD) -> CheckResult:
    """d/dt f(C'_t) = (1/t) d f^(C'_t) with t = t0 + sigma carried as a jet."""
    cx = cx.to_float()
    base = cx.proto.sig
    ext = Signature(base.base_dim, True, 0, False, base.params)
    cxe = cx.rehomed(ext)
    s = s_variable(ext, float(t0), cx.proto.order, False)
    rt = sqrt_even(s)
    F = f_form(superconnection_operator(cxe, rt), f)
    lhs = restrict_s(partial(F, base.base_dim))
    rhs = d(complex_f_wedge(cx, t0, f)).scale(1 / t0)
    r = _diff_res(lhs, rhs, cx.order - 1)
    return make_check(f"torsion/transgression{tag}/t{t0:g}", "t-derivative of f(C'_t) equals (1/t) d f^(C'_t)",
                      r, tol, inputs={"ranks": cx.ranks, "t": t0, "tag": tag, **cx.notes})


def realness_check(cx: FlatComplexGerm, t: float = 1.0, tol: float = 1e-12, tag: str = "") -> CheckResult:
    cx = cx.to_float()
    F = complex_f_form(cx, t)
    W = complex_f_wedge(cx, t)
    even = F.part(lambda m: (m & F.sig.base_mask).bit_count() % 2 == 0)
    r = max(F.real_residual(), W.real_residual(), _jet_norm(even))
    return make_check(f"torsion/real-odd{tag}/t{t:g}", "f(C'_t) is real and odd, f^ is real", r, tol,
                      inputs={"ranks": cx.ranks, "t": t, "tag": tag, **cx.notes})


# ---------------------------------------------------------------------------
# example complexes


def _rand_metric_germ(rank: int, m: int, K: int, seed: int, exact: bool) -> AlgebraMatrix:
    from .flat_bundle import random_germ

    return random_germ(rank, m, K, seed=seed, exact=exact, field="complex", unimodular=False).metric


def two_term_complex(a: complex = 1.3 - 0.4j, m: int = 2, K: int = 2, seed: int = 1) -> FlatComplexGerm:
    """0 -> C -> C -> 0 with v = (a) and random metric jets."""
    h0 = _rand_metric_germ(1, m, K, seed, False)
    h1 = _rand_metric_germ(1, m, K, seed + 100, False)
    proto = h0.proto
    v = AlgebraMatrix([[proto.const(complex(a))]])
    cx = FlatComplexGerm([h0, h1], [v])
    cx.notes.update(kind="two-term", seed=seed, m=m, K=K)
    return cx


def split_complex(m: int = 2, K: int = 2, seed: int = 2) -> FlatComplexGerm:
    """Acyclic C^2 -> C^2 plus a rank-2 summand with zero differential in degree 0."""
    hA0 = _rand_metric_germ(2, m, K, seed, False)
    hA1 = _rand_metric_germ(2, m, K, seed + 100, False)
    hZ = _rand_metric_germ(2, m, K, seed + 200, False)
    proto = hA0.proto
    z = proto.zero_like()
    h0 = AlgebraMatrix([[hA0[0, 0], hA0[0, 1], z, z], [hA0[1, 0], hA0[1, 1], z, z],
                        [z, z, hZ[0, 0], hZ[0, 1]], [z, z, hZ[1, 0], hZ[1, 1]]])
    c = proto.const
    v = AlgebraMatrix([[c(1.1), c(0.3 + 0.2j), z, z], [c(-0.5j), c(0.9), z, z]])
    cx = FlatComplexGerm([h0, hA1], [v], kernel=(2, 3))
    cx.notes.update(kind="split", seed=seed, m=m, K=K)
    return cx


def koszul_complex(V: FlatBundleGerm, x0: Sequence) -> FlatComplexGerm:
    """Lambda(V) with differential x0 ^, metrics the compound Gram matrices."""
    N = V.rank
    proto = V.proto
    if all(complex(to_float(_num(proto, x))) == 0 for x in x0):
        raise ValueError("the Koszul complex is acyclic only for x0 != 0")
    metrics = [compound_matrix(V.metric, p) for p in range(N + 1)]
    diffs = []
    for p in range(N):
        src = list(combinations(range(N), p))
        dst = {J: n for n, J in enumerate(combinations(range(N), p + 1))}
        rows = [[proto.zero_like() for _ in src] for _ in dst]
        for col, I in enumerate(src):
            for k in range(N):
                if k in I:
                    continue
                sign = -1 if sum(1 for i in I if i < k) % 2 else 1
                rows[dst[tuple(sorted(I + (k,)))]][col] = rows[dst[tuple(sorted(I + (k,)))]][col] + \
                    proto.const(_num(proto, x0[k])).scale(_num(proto, sign))
        diffs.append(AlgebraMatrix(rows))
    cx = FlatComplexGerm(metrics, diffs)
    cx.notes.update(kind="koszul", N=N)
    return cx


# ---------------------------------------------------------------------------
# exterior algebra of a flat bundle on the Fock side


def exterior_metric(V: FlatBundleGerm) -> AlgebraMatrix:
    blocks = [compound_matrix(V.metric, p) for p in range(V.rank + 1)]
    M = _block_diag(blocks, V.proto)
    return AlgebraMatrix(M.rows, [len(I) for I in fock_basis(V.rank)])


def derivation_extension(A: AlgebraMatrix) -> AlgebraMatrix:
    """Lambda(A) = sum_kl A_kl a+_k a_l for a matrix of forms."""
    N = A.shape[0]
    ext, intr = exterior_operators(N)
    terms = [(A[k, l], ext[k] @ intr[l]) for k in range(N) for l in range(N) if not A[k, l].is_zero()]
    if not terms:
        terms = [(A.proto.zero_like(), ext[0] @ intr[0])]
    return fock_matrix(terms, A.proto)


def wedge_operator(V: FlatBundleGerm, x: Sequence) -> AlgebraMatrix:
    ext, _ = exterior_operators(V.rank)
    return fock_matrix([(V.proto.const(_num(V.proto, xk)), ext[k]) for k, xk in enumerate(x)], V.proto)


def fock_superconnection(V: FlatBundleGerm, x: Sequence, rt) -> AlgebraMatrix:
    """-(i sqrt(t)/2) chat(x) + Lambda(omega)/2 with chat(x) = x^ + (x^)* in the flat frame."""
    proto = V.proto
    H = exterior_metric(V)
    Hp = AlgebraMatrix(H.rows)
    W = AlgebraMatrix(wedge_operator(V, x).rows)
    Wstar = matrix_inverse(Hp) @ _conj_transpose(W) @ Hp
    ch = W + Wstar
    coef = _num(proto, gaussian(0, Fraction(-1, 2)) if proto.exact else -0.5j)
    if isinstance(rt, Multivector):
        kin = ch.map(lambda y: (y * rt).scale(coef))
    else:
        kin = ch.scale(coef * _num(proto, rt)) if rt else ch.scale(_num(proto, 0))
    L = derivation_extension(V.omega)
    out = AlgebraMatrix(kin.rows) + AlgebraMatrix(L.rows).scale(_half(proto))
    return AlgebraMatrix(out.rows, H.grading)


def exterior_f_form_by_degree(V: FlatBundleGerm, f: GaussPolynomial = F_STANDARD) -> Multivector:
    """sum_p (-1)^p f-form of Lambda^p V with its compound metric, one degree at a time."""
    acc = None
    for p in range(V.rank + 1):
        Gp = compound_matrix(V.metric, p)
        om = matrix_inverse(Gp) @ Gp.map(d)
        X = AlgebraMatrix(om.scale(_half(V.proto)).rows, [0] * Gp.shape[0])
        term = f_form(X, f)
        term = term if p % 2 == 0 else -term
        acc = term if acc is None else acc + term
    return acc


def omega_exterior_check(V: FlatBundleGerm, tol: float = 1e-12) -> CheckResult:
    """h^-1 dh of the compound metric equals the derivation extension of omega."""
    H = AlgebraMatrix(exterior_metric(V).rows)
    lhs = matrix_inverse(H) @ H.map(d)
    rhs = AlgebraMatrix(derivation_extension(V.omega).rows)
    worst: float | str = EXACT_ZERO if V.exact else 0.0
    for i in range(lhs.shape[0]):
        for j in range(lhs.shape[1]):
            r = _diff_res(lhs[i, j], rhs[i, j], V.order)
            if r != EXACT_ZERO and (worst == EXACT_ZERO or r > worst):
                worst = r
    return make_check(f"koszul/omega-exterior/N{V.rank}", "metric variation of Lambda(V) is the derivation extension",
                      worst, tol, inputs={"N": V.rank, **V.notes})


# ---------------------------------------------------------------------------
# Koszul suite


def koszul_suite(V: FlatBundleGerm, x0: Sequence, t: float = 1.0, tol: float = 1e-6,
                 f: GaussPolynomial = F_STANDARD, csv_trace: list | None = None) -> list[CheckResult]:
    if all(complex(to_float(_num(V.proto, x))) == 0 for x in x0):
        raise ValueError("x0 must be nonzero")
    N = V.rank
    tag = f"/N{N}"
    out = []
    cx_exact = koszul_complex(V, x0)
    # [nabla, x^] = d(x^) on jets
    dv = [v.map(d) for v in cx_exact.differentials]
    r: float | str = EXACT_ZERO if V.exact else 0.0
    for M in dv:
        for row in M.rows:
            for x in row:
                if not x.is_zero():
                    r = x.max_abs() if r == EXACT_ZERO else max(r, x.max_abs())
    out.append(make_check(f"koszul/flat{tag}", "wedge by a constant vector commutes with the flat connection", r, 0.0,
                          inputs={"N": N, "x0": [str(x) for x in x0]}))
    out.append(omega_exterior_check(V))
    # zero section: graded supertrace of omega/2 against the degree-by-degree sum and the Fock route
    fE = complex_f_form(cx_exact, 0, f)
    by_deg = exterior_f_form_by_degree(V, f)
    fock0 = f_form(fock_superconnection(V, [0] * N, 0), f)
    r1 = _diff_res(fE, by_deg)
    r2 = _diff_res(fock0, by_deg)
    out.append(make_check(f"koszul/zero-section{tag}", "f-form of Lambda(V) at the zero section, two routes",
                          r1 if r1 != EXACT_ZERO else r2, 1e-12, inputs={"N": N, **V.notes},
                          detail={"complex_route": str(r1), "fock_route": str(r2)},
                          passed=_le(r1, 1e-12) and _le(r2, 1e-12)))
    # complex route with v = x^ versus Fock route with i x^
    cx = cx_exact.to_float()
    Vf = V.to_float()
    a = complex_f_form(cx, t, f)
    b = f_form(fock_superconnection(Vf, [complex(to_float(_num(V.proto, x))) for x in x0], math.sqrt(t)), f)
    r3 = _diff_res(a, b)
    out.append(make_check(f"koszul/routes{tag}/t{t:g}", "f(C'_t) of the Koszul complex, complex and Fock routes",
                          r3, 1e-10, inputs={"N": N, "t": t}))
    T = torsion_form(cx, f)
    if csv_trace is not None:
        csv_trace.extend(("koszul", tt, v) for tt, v in T.trace)
    out.append(anomaly_check(cx, tol, tag=f"-koszul{tag}", f=f, torsion=T))
    return out


# ---------------------------------------------------------------------------
# scaling relation with the Berezin forms and the Fourier modes


def scaling_constants(N: int) -> tuple[float, float]:
    if N % 2 == 0:
        raise ValueError("the scaling relation is stated for odd rank")
    s = -1 if ((N - 1) // 2) % 2 else 1
    return s * 2 * math.pi ** (-(N - 1)), s * 0.5 * math.pi ** (-(N - 1))


class FockModeFamily:
    """Operators D_{t,mu} = -(i sqrt(t)/2) chat(mu) + Lambda(omega)/2 for many sections mu.

    The mu-independent pieces are built once on the dense backend, so each
    mode costs one dense exponential.
    """

    def __init__(self, V: FlatBundleGerm, t: float, f: GaussPolynomial = F_STANDARD):
        Vf = V.to_float()
        self.V, self.t, self.f, self.N = Vf, float(t), f, Vf.rank
        proto = Vf.proto
        self.proto = proto
        H = exterior_metric(Vf)
        self.grading = H.grading
        Hp = AlgebraMatrix(H.rows)
        Hinv = matrix_inverse(Hp)
        ext, _ = exterior_operators(self.N)
        basis = algebra_basis(proto.sig, proto.sig.base_mask, Vf.order)
        self.basis = basis
        ch = []
        for k in range(self.N):
            W = AlgebraMatrix(fock_matrix([(proto.const(1.0), ext[k])], proto).rows)
            C = W + Hinv @ _conj_transpose(W) @ Hp
            ch.append(DenseMatrix.from_matrix(AlgebraMatrix(C.rows, self.grading), basis).data)
        self.chat = np.stack(ch)
        L = derivation_extension(Vf.omega)
        self.half_lambda = 0.5 * DenseMatrix.from_matrix(AlgebraMatrix(L.rows, self.grading), basis).data
        self.coef = -0.5j * math.sqrt(self.t)
        self.fp = f.derivative()
        self.standard = f == F_STANDARD

    def operator(self, mu: Sequence[float]) -> DenseMatrix:
        data = self.half_lambda + self.coef * np.tensordot(np.asarray(mu, dtype=float), self.chat, axes=1)
        return DenseMatrix(self.basis, data, self.grading)

    def _trace(self, F: DenseMatrix, weights: np.ndarray) -> Multivector:
        vals = np.einsum("bii,i->b", F.data, weights)
        keys = self.basis.keys
        p = self.proto
        return p.like(p._clean({keys[b]: complex(vals[b]) for b in np.nonzero(vals)[0]}), self.basis.order)

    def forms(self, mu: Sequence[float]) -> tuple[Multivector, Multivector]:
        """(f-form, (1/t) f^) at the section mu."""
        X = self.operator(mu)
        if self.standard:
            X2 = X @ X
            E = dense_expm(X2)
            F = X @ E
            Fp = E + (X2 @ E).scale(2.0)
        else:
            F, Fp = self.f.on_dense(X), self.fp.on_dense(X)
        sgn = np.array([-1.0 if g % 2 else 1.0 for g in self.grading])
        a = normalise(self._trace(F, sgn), 1)
        b = normalise(self._trace(Fp, sgn * np.array(self.grading) / 2), 0)
        return a, b.scale(1 / self.t)


def fock_mode_forms(V: FlatBundleGerm, mu: Sequence, t: float,
                    f: GaussPolynomial = F_STANDARD) -> tuple[Multivector, Multivector]:
    """(f(D_{t,mu}) form, (1/t) f^(D_{t,mu})) through the Fock supertrace."""
    return FockModeFamily(V, t, f).forms([float(x) for x in mu])


def scaling_check(g: FlatBundleGerm, mu: Sequence, t: float, tol: float = 1e-8) -> list[CheckResult]:
    """Fock-route f-forms against the Berezin-route forms at t/4 on the dual bundle."""
    from .thom import delta_on, epsilon_on

    N = g.rank
    cd, ce = scaling_constants(N)
    V = g.dual().to_float()
    mu = [float(x) for x in mu]
    ft, et = fock_mode_forms(V, mu, t)
    dl = delta_on(V, mu, t / 4).value().to_float()
    ep = epsilon_on(V, mu, t / 4).value().to_float()
    base = ft.sig
    dl = restrict_fiber(dl, base)
    ep = restrict_fiber(ep, base)
    top = 2 * N - 1
    lower = ft - ft.form_degree_part(top)
    inputs = {"N": N, "t": t, "mu": mu, **g.notes}
    fit_d, fit_e = fitted_ratio(ft, dl), fitted_ratio(et, ep)
    out = [
        make_check(f"fock/scaling-delta/N{N}/t{t:g}", "Fock f-form equals constant times Berezin delta at t/4",
                   _diff_res(ft, dl.scale(cd)), tol, inputs=inputs,
                   detail={"scale": _jet_norm(ft), "constant": cd}),
        make_check(f"fock/scaling-epsilon/N{N}/t{t:g}", "Fock f^/t equals constant times Berezin epsilon at t/4",
                   _diff_res(et, ep.scale(ce)), tol, inputs=inputs,
                   detail={"scale": _jet_norm(et), "constant": ce}),
        make_check(f"fock/single-degree/N{N}/t{t:g}", "Fock f-form has no components below degree 2N-1",
                   _jet_norm(lower), tol, inputs=inputs),
        make_check(f"fock/scaling-fit/N{N}/t{t:g}", "least-squares constants relating the two routes",
                   abs(fit_d / cd - 1) + abs(fit_e / ce - 1) if cd and ce else math.inf, 1e-8, inputs=inputs,
                   detail={"delta_ratio": fit_d, "epsilon_ratio": fit_e, "stated_delta": cd, "stated_epsilon": ce},
                   informational=True),
    ]
    return out


def fitted_ratio(a: Multivector, b: Multivector) -> complex:
    """argmin_c |a - c b| over the coefficients."""
    keys = set(a.terms) | set(b.terms)
    num = sum(complex(a.terms.get(k, 0)) * complex(b.terms.get(k, 0)).conjugate() for k in keys)
    den = sum(abs(complex(b.terms.get(k, 0))) ** 2 for k in keys)
    r = num / den if den else complex("nan")
    return r.real if abs(r.imag) < 1e-12 * max(1.0, abs(r)) else r


def restrict_fiber(x: Multivector, base: Signature) -> Multivector:
    """Move a fiber-free element back to a base signature."""
    if x.sig == base:
        return x
    keep = {}
    bm = x.sig.base_mask
    for k, c in x.terms.items():
        from .grassmann import GEN_MASK

        if k & GEN_MASK & ~bm:
            raise ValueError("element still has fiber generators")
        keep[k] = c
    return Multivector(base, keep, x.order, x.exact)


def binomial_weight_sum(N: int) -> int:
    """sum_p (-1)^p p C(N, p)."""
    return sum((-1) ** p * p * math.comb(N, p) for p in range(N + 1))


def fourier_suite(g: FlatBundleGerm, t: float = 2.0, tol: float = 1e-8, t_large: float = 1e3,
                  mode_tol: float = 1e-10, max_modes: int | None = None) -> list[CheckResult]:
    """Per-mode scaling relation, the mode sum against the lattice sum, and large-t limits."""
    from .lattice import LatticeWindow, _family, sum_pulled
    from .thom import delta_on

    N = g.rank
    cd, _ = scaling_constants(N)
    V, _, spacing = _family(g, "delta")
    Vf = V.to_float()
    gram = np.real(V.metric_at_origin())
    deg = 2 * N + g.order + 1
    window = LatticeWindow.auto(N, spacing, gram, t / 4, deg, mode_tol)
    out = []
    inputs = {"N": N, "t": t, **g.notes}
    worst = 0.0
    total = None
    fam = FockModeFamily(Vf, t)
    pts = window.points if max_modes is None else window.points[:max_modes]
    for p in pts:
        mu = [float(x) for x in p]
        ft, _ = fam.forms(mu)
        dl = restrict_fiber(delta_on(Vf, mu, t / 4).value().to_float(), ft.sig)
        r = _diff_res(ft, dl.scale(cd))
        worst = max(worst, 0.0 if r == EXACT_ZERO else r)
        total = ft if total is None else total + ft
    out.append(make_check(f"fock/modes-scaling/N{N}/t{t:g}", "each Fourier mode matches the scaled Berezin form",
                          worst, tol, inputs=inputs, detail={"modes": len(pts), "radius": window.radius}))
    if max_modes is None:
        S = sum_pulled(g, "delta", t / 4)
        r = _diff_res(total, S.form.scale(cd))
        bound = window.gaussian_tail(deg, t / 4) + cd * S.tail_bound
        out.append(make_check(f"fock/mode-sum/N{N}/t{t:g}", "sum of Fourier modes equals the scaled lattice sum",
                              r, tol, inputs=inputs, detail={"tail_bound": bound}))
    # zero mode and the large-t limits
    ex = g.dual()
    D0 = fock_superconnection(ex, [0] * N, 0)
    z_form = f_form(D0)
    z_wedge = f_wedge_form(D0)
    by_deg = exterior_f_form_by_degree(ex)
    out.append(make_check(f"fock/zero-mode-form/N{N}", "zero mode equals the f-form of Lambda(E*)",
                          _diff_res(z_form, by_deg), 1e-12, inputs=inputs))
    b = binomial_weight_sum(N)
    expect_b = -1 if N == 1 else 0
    out.append(make_check(f"fock/binomial/N{N}", "sum_p (-1)^p p C(N,p) is -1 for N=1 and 0 otherwise",
                          EXACT_ZERO if b == expect_b else float(abs(b - expect_b)), 0.0, inputs={"N": N},
                          detail={"value": b}))
    half_b = Fraction(b, 2)
    out.append(make_check(f"fock/zero-mode-wedge/N{N}", "zero mode of f^ is the constant (1/2) sum_p (-1)^p p C(N,p)",
                          _diff_res(z_wedge, z_wedge.const(_num(z_wedge, half_b))), 1e-12, inputs=inputs))
    # t large: nonzero modes bounded by the Gaussian tail outside the origin
    first = LatticeWindow(N, spacing, 1, tuple(map(tuple, gram)))
    near = 0.0
    fw_total = None
    fam_large = FockModeFamily(Vf, t_large)
    for p in first.points:
        mu = [float(x) for x in p]
        fw = fam_large.forms(mu)[1].scale(t_large)
        fw_total = fw if fw_total is None else fw_total + fw
        if any(mu):
            near = max(near, _jet_norm(fw))
    tail = LatticeWindow(N, spacing, 1, tuple(map(tuple, gram))).gaussian_tail(deg, t_large / 4)
    r = _jet_norm(fw_total - fw_total.const(float(half_b)))
    out.append(make_check(f"fock/large-t-wedge/N{N}", "f^ at large t tends to -1/2 (N=1) or 0 (N>1)",
                          r, 1e-10 + tail, inputs={**inputs, "t": t_large},
                          detail={"first_shell_max": near, "tail_bound": tail}))
    return out


# ---------------------------------------------------------------------------
# suites


def f_value_checks(t: float = 2.0) -> list[CheckResult]:
    fp = F_STANDARD.derivative()
    r0 = abs(fp(0) - 1)
    rt = abs(fprime_imaginary(t) - (1 - t / 2) * math.exp(-t / 4))
    return [
        make_check("fform/fprime-zero", "f'(0) = 1", EXACT_ZERO if fp(0) == 1 else r0, 0.0, inputs={}),
        make_check(f"fform/fprime-imaginary/t{t:g}", "f'(i sqrt(t)/2) = (1 - t/2) exp(-t/4)", rt, 1e-15,
                   inputs={"t": t}),
    ]


def omega_f_form_checks(g: FlatBundleGerm, tag: str = "") -> list[CheckResult]:
    """f-form of omega/2 against the closed-form odd classes n_j, degree by degree.

    For f = z^(2j-1) the degree-(2j-1) part is n_j / j; for the standard f it
    is n_j / j!.  A third, informational check compares the standard f with
    n_j / j as well.
    """
    from .flat_bundle import closed_form_from_omega

    om = g.omega
    proto = g.proto
    X = AlgebraMatrix(om.scale(_half(proto)).rows, [0] * g.rank)
    F = f_form(X)
    js = [j for j in range(1, g.rank + 1) if 2 * j - 1 <= g.base_dim]
    worst_mono: float | str = EXACT_ZERO if g.exact else 0.0
    worst_std: float | str = EXACT_ZERO if g.exact else 0.0
    worst_lit: float | str = EXACT_ZERO if g.exact else 0.0

    def upd(w, r):
        if r == EXACT_ZERO:
            return w
        return r if w == EXACT_ZERO else max(w, r)

    for j in js:
        nj = closed_form_from_omega(om, j)
        mono = f_form(X, odd_monomial(2 * j - 1)).form_degree_part(2 * j - 1)
        worst_mono = upd(worst_mono, _diff_res(mono, nj.scale(_num(proto, Fraction(1, j)))))
        Fj = F.form_degree_part(2 * j - 1)
        worst_std = upd(worst_std, _diff_res(Fj, nj.scale(_num(proto, Fraction(1, math.factorial(j))))))
        worst_lit = upd(worst_lit, _diff_res(Fj, nj.scale(_num(proto, Fraction(1, j)))))
    inputs = {"N": g.rank, "js": js, "tag": tag, **g.notes}
    return [
        make_check(f"fform/omega-monomial{tag}", "f = z^(2j-1): degree-(2j-1) part of the f-form is n_j / j",
                   worst_mono, 1e-12, inputs=inputs),
        make_check(f"fform/omega-standard{tag}", "f = z exp(z^2): degree-(2j-1) part of the f-form is n_j / j!",
                   worst_std, 1e-12, inputs=inputs),
        make_check(f"fform/omega-standard-vs-1-over-j{tag}",
                   "f = z exp(z^2) compared with n_j / j (differs from j = 3 on)", worst_lit, 1e-12,
                   inputs=inputs, informational=True),
    ]


def constant_complex(a: complex = 0.8 + 0.3j, m: int = 2, K: int = 2) -> FlatComplexGerm:
    """0 -> C -> C -> 0 with constant metrics (2 and 1/2) and v = (a)."""
    from .jets import base_signature

    proto = Multivector.zero(base_signature(m), K + 1, False)
    h0 = AlgebraMatrix([[proto.const(2.0)]])
    h1 = AlgebraMatrix([[proto.const(0.5)]])
    cx = FlatComplexGerm([h0, h1], [AlgebraMatrix([[proto.const(complex(a))]])])
    cx.notes.update(kind="constant", m=m, K=K)
    return cx


def metric_flat_check(tol: float = 1e-12) -> CheckResult:
    cx = constant_complex()
    T = torsion_form(cx)
    dT = d(T.form)
    higher = T.form - T.form.form_degree_part(0)
    fE = complex_f_form(cx, 0)
    r = max(_jet_norm(dT), _jet_norm(higher), _jet_norm(fE))
    return make_check("torsion/metric-flat", "constant metrics: torsion form is a constant 0-form and both sides vanish",
                      r, tol, inputs=dict(cx.notes), detail={"torsion_value": complex(T.form.scalar_value())})


def torsion_suite(seed: int = 1, m: int = 2, K: int = 2, tol: float = 1e-6, koszul_rank: int = 2,
                  csv_trace: list | None = None) -> list[CheckResult]:
    """Anomaly formula on a two-term, a split and a Koszul complex, plus limits and transgression."""
    from .flat_bundle import random_germ

    out = [metric_flat_check()]
    out += f_value_checks()
    cases = [("-two-term", two_term_complex(m=m, K=K, seed=seed)), ("-split", split_complex(m=m, K=K, seed=seed + 1))]
    for tag, cx in cases:
        T = torsion_form(cx)
        if csv_trace is not None:
            csv_trace.extend((tag.lstrip("-"), tt, v) for tt, v in T.trace)
        out.append(anomaly_check(cx, tol, tag=tag, torsion=T))
        out += limit_checks(cx, tol, tag=tag)
        out.append(complex_transgression_check(cx, 1.0, tag=tag))
        out.append(realness_check(cx, 1.0, tag=tag))
    V = random_germ(koszul_rank, max(2 * koszul_rank - 1, m), K, seed=seed, exact=True, field="complex",
                    unimodular=False)
    x0 = [1] + [0] * (koszul_rank - 1)
    out += koszul_suite(V, x0, tol=tol, csv_trace=csv_trace)
    return out


def fock_suite(N: int, seed: int = 1, t: float = 2.0, exact: bool = True, mu: Sequence[float] | None = None,
               base_dim: int | None = None, order: int | None = None, fourier: bool = True,
               bridge: bool = True) -> list[CheckResult]:
    """Clifford relations, monomial supertraces, the bridge identity and, for odd N, the scaling and Fourier checks.

    ``bridge=False`` skips the first three (they are shared with the exact-identity suite).
    """
    from .flat_bundle import random_germ

    out = clifford_checks(N) + bridge_suite(N, seed, exact) if bridge else []
    if N % 2 and fourier:
        m = (2 if N == 1 else 2 * N - 1) if base_dim is None else base_dim
        K = (2 if N == 1 else 1) if order is None else order
        g = random_germ(N, m, K, seed=seed, exact=False, unimodular=False)
        sec = list(mu) if mu is not None else [0.7, -0.3, 0.4, 0.2, -0.1][:N]
        out += scaling_check(g, sec, t)
        out += fourier_suite(g, t)
    return out


def clifford_checks(N: int) -> list[CheckResult]:
    """Anticommutation relations and the supertraces of Clifford monomials."""
    rel = clifford_relation_residuals(N)
    out = [make_check(f"fock/clifford-relations/N{N}", "anticommutation relations of c and chat",
                      EXACT_ZERO if not any(rel.values()) else float(max(rel.values())), 0.0,
                      inputs={"N": N}, detail=rel)]
    ms = monomial_supertraces(N)
    top = (tuple(range(N)), tuple(range(N)))
    bad = [k for k, v in ms.items() if (v != 0) != (k == top)]
    ok = not bad and ms[top] == top_supertrace_sign(N) * 2 ** N
    out.append(make_check(f"fock/monomial-supertraces/N{N}",
                          "only the full monomial has nonzero supertrace, equal to (-1)^(N(N+1)/2) 2^N",
                          EXACT_ZERO if ok else float(len(bad) + 1), 0.0, inputs={"N": N},
                          detail={"top": ms[top]}))
    return out
