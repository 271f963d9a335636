"""Sparse Grassmann algebra with jet-valued coefficients.

Every element lives in the exterior algebra generated by an ordered list of
odd generators

    dx_1 < ... < dx_m < ds < psi_1 < ... < psi_N < psihat_1 < ... < psihat_N < z

tensored with truncated polynomials in the base coordinates.  A term is
stored under one packed integer key:

    bits  0..23   generator subset (bit i = i-th generator in canonical order)
    bits 24..31   twice the exponent of a formal pi, offset by 128
    bits 32..36   total polynomial degree in the base coordinates
    bits 37..     one 5-bit exponent field per base coordinate, then one
                  per parameter (parameters do not count toward the degree)

Adding two keys with disjoint generator subsets adds all exponent fields at
once, so a product of two monomials costs one integer addition plus a sign
lookup.  The formal pi only occurs in exact mode, where it keeps identities
with transcendental constants checkable as exact equalities.

Coefficients are either exact Gaussian rationals (sympy ``QQ_I``) or Python
complex floats.  One element never mixes the two.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from typing import Callable, Iterable, Sequence

from sympy.polys.domains import QQ, QQ_I

MAX_GENERATORS = 24
GEN_MASK = (1 << MAX_GENERATORS) - 1
PI_SHIFT = 24
PI_ZERO = 128
DEG_SHIFT = 32
DEG_FIELD = 31
EXP_SHIFT = 37
EXP_WIDTH = 5
MAX_VARS = 12

ONE_KEY = PI_ZERO << PI_SHIFT
PAIR_OFFSET = ONE_KEY

DROP_TOL = 1e-14


class ModeError(TypeError):
    """Exact and float coefficients were mixed."""


class SignatureError(ValueError):
    """Operands live in different algebras."""


class ParityError(ValueError):
    """An operation needed an even (or odd) element and got something else."""


class ExactnessError(ValueError):
    """An exact result was requested but would need an irrational number."""


@dataclass(frozen=True)
class Signature:
    """Ordered generator blocks of one algebra."""

    base_dim: int = 0
    extra_s: bool = False
    rank: int = 0
    has_z: bool = False
    params: int = 0
    cap: int = MAX_GENERATORS

    def __post_init__(self) -> None:
        if self.base_dim < 0 or self.rank < 0:
            raise ValueError("negative block size")
        if self.cap > MAX_GENERATORS:
            raise ValueError(f"generator cap cannot exceed {MAX_GENERATORS}")
        if self.total > self.cap:
            raise ValueError(f"{self.total} generators exceed the cap {self.cap}")
        if self.nvars + self.params > MAX_VARS:
            raise ValueError("too many base coordinates and parameters")

    @property
    def nvars(self) -> int:
        return self.base_dim + int(self.extra_s)

    @property
    def total(self) -> int:
        return self.nvars + 2 * self.rank + int(self.has_z)

    def dx(self, a: int) -> int:
        if not 0 <= a < self.base_dim:
            raise IndexError(a)
        return a

    @property
    def ds(self) -> int:
        if not self.extra_s:
            raise IndexError("signature has no ds")
        return self.base_dim

    def psi(self, k: int) -> int:
        if not 0 <= k < self.rank:
            raise IndexError(k)
        return self.nvars + k

    def psihat(self, k: int) -> int:
        if not 0 <= k < self.rank:
            raise IndexError(k)
        return self.nvars + self.rank + k

    @property
    def z(self) -> int:
        if not self.has_z:
            raise IndexError("signature has no z")
        return self.nvars + 2 * self.rank

    @property
    def base_mask(self) -> int:
        return (1 << self.nvars) - 1

    @property
    def psi_mask(self) -> int:
        return ((1 << self.rank) - 1) << self.nvars

    @property
    def psihat_mask(self) -> int:
        return ((1 << self.rank) - 1) << (self.nvars + self.rank)

    @property
    def z_mask(self) -> int:
        return (1 << self.z) if self.has_z else 0

    def names(self) -> list[str]:
        out = [f"dx{a + 1}" for a in range(self.base_dim)]
        if self.extra_s:
            out.append("ds")
        out += [f"psi{k + 1}" for k in range(self.rank)]
        out += [f"psihat{k + 1}" for k in range(self.rank)]
        if self.has_z:
            out.append("z")
        return out

    def with_z(self, flag: bool = True) -> "Signature":
        return Signature(self.base_dim, self.extra_s, self.rank, flag, self.params, self.cap)

    def with_rank(self, rank: int) -> "Signature":
        return Signature(self.base_dim, self.extra_s, rank, self.has_z, self.params, self.cap)

    def with_params(self, params: int) -> "Signature":
        return Signature(self.base_dim, self.extra_s, self.rank, self.has_z, params, self.cap)

    def base_only(self) -> "Signature":
        return Signature(self.base_dim, self.extra_s, 0, False, self.params, self.cap)


# ---------------------------------------------------------------------------
# key helpers


def exp_key(exps: Sequence[int]) -> int:
    key = ONE_KEY | (sum(exps) << DEG_SHIFT)
    for j, e in enumerate(exps):
        key |= e << (EXP_SHIFT + EXP_WIDTH * j)
    return key


def key_mask(key: int) -> int:
    return key & GEN_MASK


def key_degree(key: int) -> int:
    return (key >> DEG_SHIFT) & DEG_FIELD


def key_pi2(key: int) -> int:
    """Twice the exponent of the formal pi."""
    return ((key >> PI_SHIFT) & 0xFF) - PI_ZERO


def key_exps(key: int, nvars: int) -> tuple[int, ...]:
    return tuple((key >> (EXP_SHIFT + EXP_WIDTH * j)) & DEG_FIELD for j in range(nvars))


def key_scalar_part(key: int) -> int:
    """Key with the generator bits cleared."""
    return key & ~GEN_MASK


_SIGN_CACHE: dict[int, int] = {}


def reorder_sign(a: int, b: int) -> int:
    """Sign of moving monomial ``a`` (left) past ``b`` into canonical order."""
    ck = (a << MAX_GENERATORS) | b
    s = _SIGN_CACHE.get(ck)
    if s is None:
        n = 0
        bb = b
        while bb:
            low = bb & -bb
            n += ((a & ~((low << 1) - 1))).bit_count()
            bb ^= low
        s = -1 if n & 1 else 1
        _SIGN_CACHE[ck] = s
    return s


# ---------------------------------------------------------------------------
# scalar coercion


def to_exact(v) -> object:
    if isinstance(v, bool):
        v = int(v)
    if isinstance(v, int):
        return QQ_I(v, 0)
    if isinstance(v, Fraction):
        return QQ_I(QQ(v.numerator, v.denominator), 0)
    if type(v).__name__ == "GaussianRational":
        return v
    if type(v).__name__ == "mpq":
        return QQ_I(v, 0)
    if isinstance(v, complex) or isinstance(v, float):
        raise ModeError(f"float value {v!r} in exact mode")
    raise ModeError(f"cannot use {type(v).__name__} as an exact scalar")


def to_float(v) -> complex:
    if type(v).__name__ == "GaussianRational":
        return complex(float(v.x), float(v.y))
    return complex(v)


def gaussian(re, im=0) -> object:
    """Exact Gaussian rational from two rationals."""
    r = Fraction(re)
    i = Fraction(im)
    return QQ_I(QQ(r.numerator, r.denominator), QQ(i.numerator, i.denominator))


def exact_conj(v):
    return QQ_I(v.x, -v.y)


def exact_to_fraction_pair(v) -> tuple[Fraction, Fraction]:
    return (Fraction(int(v.x.numerator), int(v.x.denominator)),
            Fraction(int(v.y.numerator), int(v.y.denominator)))


# ---------------------------------------------------------------------------


class Multivector:
    """Immutable sparse element of the Grassmann algebra of a signature."""

    __slots__ = ("sig", "terms", "order", "exact")

    def __init__(self, sig: Signature, terms: dict[int, object], order: int, exact: bool):
        self.sig = sig
        self.terms = terms
        self.order = order
        self.exact = exact

    # -- construction -------------------------------------------------------

    @classmethod
    def zero(cls, sig: Signature, order: int = 0, exact: bool = True) -> "Multivector":
        return cls(sig, {}, order, exact)

    @classmethod
    def scalar(cls, sig: Signature, value, order: int = 0, exact: bool = True) -> "Multivector":
        c = to_exact(value) if exact else to_float(value)
        return cls(sig, {ONE_KEY: c} if c else {}, order, exact)

    @classmethod
    def monomial(cls, sig: Signature, gens: Iterable[int], coeff=1,
                 order: int = 0, exact: bool = True) -> "Multivector":
        """Product gens[0] * gens[1] * ... in the given (possibly non-canonical) order."""
        mask = 0
        sign = 1
        for g in gens:
            bit = 1 << g
            if mask & bit:
                return cls.zero(sig, order, exact)
            sign *= reorder_sign(mask, bit)
            mask |= bit
        c = to_exact(coeff) if exact else to_float(coeff)
        if sign < 0:
            c = -c
        return cls(sig, {ONE_KEY | mask: c} if c else {}, order, exact)

    @classmethod
    def coordinate(cls, sig: Signature, j: int, order: int, exact: bool = True) -> "Multivector":
        if order < 1:
            return cls.zero(sig, order, exact)
        exps = [0] * sig.nvars
        exps[j] = 1
        one = to_exact(1) if exact else 1 + 0j
        return cls(sig, {exp_key(exps): one}, order, exact)

    @classmethod
    def parameter(cls, sig: Signature, j: int, order: int, exact: bool = True) -> "Multivector":
        if not 0 <= j < sig.params:
            raise IndexError(j)
        key = ONE_KEY | (1 << (EXP_SHIFT + EXP_WIDTH * (sig.nvars + j)))
        one = to_exact(1) if exact else 1 + 0j
        return cls(sig, {key: one}, order, exact)

    @classmethod
    def pi_power(cls, sig: Signature, half_exponent: int, order: int = 0,
                 exact: bool = True) -> "Multivector":
        """pi ** (half_exponent / 2); formal in exact mode."""
        if exact:
            key = ONE_KEY + (half_exponent << PI_SHIFT)
            return cls(sig, {key: to_exact(1)}, order, True)
        return cls(sig, {ONE_KEY: complex(math.pi ** (half_exponent / 2))}, order, False)

    def like(self, terms: dict[int, object], order: int | None = None) -> "Multivector":
        return Multivector(self.sig, terms, self.order if order is None else order, self.exact)

    def const(self, value) -> "Multivector":
        return Multivector.scalar(self.sig, value, self.order, self.exact)

    def gen(self, g: int) -> "Multivector":
        return Multivector.monomial(self.sig, [g], 1, self.order, self.exact)

    def zero_like(self) -> "Multivector":
        return Multivector(self.sig, {}, self.order, self.exact)

    # -- checks -------------------------------------------------------------

    def _check(self, other: "Multivector") -> None:
        if self.exact != other.exact:
            raise ModeError("mixing exact and float elements")
        if self.sig != other.sig:
            raise SignatureError(f"{self.sig} vs {other.sig}")

    def _coerce(self, other) -> "Multivector":
        if isinstance(other, Multivector):
            self._check(other)
            return other
        return self.const(other)

    # -- arithmetic ---------------------------------------------------------

    def _clean(self, terms: dict[int, object]) -> dict[int, object]:
        if self.exact:
            return {k: c for k, c in terms.items() if c}
        if not terms:
            return terms
        big = max(abs(c) for c in terms.values())
        if big == 0:
            return {}
        cut = DROP_TOL * big
        return {k: c for k, c in terms.items() if abs(c) > cut}

    def __add__(self, other) -> "Multivector":
        other = self._coerce(other)
        order = min(self.order, other.order)
        out = {}
        for src in (self.terms, other.terms):
            for k, c in src.items():
                if key_degree(k) > order:
                    continue
                if k in out:
                    out[k] = out[k] + c
                else:
                    out[k] = c
        return Multivector(self.sig, self._clean(out), order, self.exact)

    __radd__ = __add__

    def __neg__(self) -> "Multivector":
        return self.like({k: -c for k, c in self.terms.items()})

    def __sub__(self, other) -> "Multivector":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Multivector":
        return self._coerce(other) - self

    def scale(self, value) -> "Multivector":
        c = to_exact(value) if self.exact else to_float(value)
        if not c:
            return self.zero_like()
        return self.like(self._clean({k: v * c for k, v in self.terms.items()}))

    def __mul__(self, other) -> "Multivector":
        if not isinstance(other, Multivector):
            return self.scale(other)
        return wedge(self, other)

    def __rmul__(self, other) -> "Multivector":
        return self.scale(other)

    def __truediv__(self, value) -> "Multivector":
        if self.exact:
            return self.scale(QQ_I(1, 0) / to_exact(value))
        return self.scale(1 / to_float(value))

    def __pow__(self, n: int) -> "Multivector":
        out = self.const(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Multivector):
            other = self.const(other)
        return (self - other).is_zero()

    __hash__ = None  # type: ignore[assignment]

    # -- inspection -----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def max_abs(self) -> float:
        """Largest coefficient modulus (formal pi evaluated numerically)."""
        best = 0.0
        for k, c in self.terms.items():
            v = abs(to_float(c)) * math.pi ** (key_pi2(k) / 2)
            best = max(best, v)
        return best

    def truncate(self, order: int) -> "Multivector":
        order = min(order, self.order)
        return self.like({k: c for k, c in self.terms.items() if key_degree(k) <= order}, order)

    def masks(self) -> set[int]:
        return {k & GEN_MASK for k in self.terms}

    def coefficient(self, mask: int) -> "Multivector":
        """Jet coefficient of one generator monomial (as a mask-free element)."""
        return self.like({k & ~GEN_MASK: c for k, c in self.terms.items() if k & GEN_MASK == mask})

    def part(self, pred: Callable[[int], bool]) -> "Multivector":
        return self.like({k: c for k, c in self.terms.items() if pred(k & GEN_MASK)})

    def form_degree_part(self, deg: int) -> "Multivector":
        bm = self.sig.base_mask
        return self.part(lambda m: (m & bm).bit_count() == deg)

    def at_origin(self) -> "Multivector":
        """Set all base coordinates to zero (drop positive-degree jet terms)."""
        return self.like({k: c for k, c in self.terms.items() if key_degree(k) == 0})

    def constant_term(self):
        """Coefficient of 1 (no generators, no base coordinates, pi**0)."""
        zero = to_exact(0) if self.exact else 0j
        return self.terms.get(ONE_KEY, zero)

    def scalar_value(self) -> complex:
        """Numeric value of a generator-free element at the origin."""
        tot = 0j
        for k, c in self.terms.items():
            if k & GEN_MASK or key_degree(k):
                continue
            tot += to_float(c) * math.pi ** (key_pi2(k) / 2)
        return tot

    def is_even(self) -> bool:
        return all((k & GEN_MASK).bit_count() % 2 == 0 for k in self.terms)

    def is_odd(self) -> bool:
        return all((k & GEN_MASK).bit_count() % 2 == 1 for k in self.terms)

    def even_part(self) -> "Multivector":
        return self.part(lambda m: m.bit_count() % 2 == 0)

    def odd_part(self) -> "Multivector":
        return self.part(lambda m: m.bit_count() % 2 == 1)

    def to_float(self) -> "Multivector":
        if not self.exact:
            return self
        out: dict[int, complex] = {}
        for k, c in self.terms.items():
            p = key_pi2(k)
            nk = k - (p << PI_SHIFT)
            out[nk] = out.get(nk, 0j) + to_float(c) * math.pi ** (p / 2)
        return Multivector(self.sig, out, self.order, False)._cleaned()

    def _cleaned(self) -> "Multivector":
        return self.like(self._clean(self.terms))

    def conj(self) -> "Multivector":
        """Complex conjugation of the coefficients (generators are real)."""
        if self.exact:
            return self.like({k: exact_conj(c) for k, c in self.terms.items()})
        return self.like({k: c.conjugate() for k, c in self.terms.items()})

    def real_residual(self) -> float:
        """Largest imaginary part of any coefficient."""
        if self.exact:
            return 0.0 if all(c.y == 0 for c in self.terms.values()) else float(
                max(abs(float(c.y)) for c in self.terms.values()))
        return max((abs(c.imag) for c in self.terms.values()), default=0.0)

    def lift(self, sig: Signature) -> "Multivector":
        """Re-home an element that only uses base generators into ``sig``."""
        if sig == self.sig:
            return self
        if sig.base_dim != self.sig.base_dim or sig.extra_s != self.sig.extra_s:
            raise SignatureError("base blocks differ")
        if sig.params < self.sig.params:
            hi = EXP_SHIFT + EXP_WIDTH * (self.sig.nvars + sig.params)
            if any(k >> hi for k in self.terms):
                raise SignatureError("element uses dropped parameters")
        if any(k & GEN_MASK & ~self.sig.base_mask for k in self.terms):
            raise SignatureError("element uses fiber generators")
        return Multivector(sig, dict(self.terms), self.order, self.exact)

    def with_order(self, order: int) -> "Multivector":
        return Multivector(self.sig, {k: c for k, c in self.terms.items() if key_degree(k) <= order},
                           order, self.exact)

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        names = self.sig.names()
        parts = []
        for k in sorted(self.terms):
            c = self.terms[k]
            mask = k & GEN_MASK
            gens = "".join(names[i] for i in range(self.sig.total) if mask >> i & 1)
            exps = key_exps(k, self.sig.nvars)
            xs = "".join(f"x{j + 1}^{e}" if e > 1 else f"x{j + 1}" for j, e in enumerate(exps) if e)
            pexps = key_exps(k, self.sig.nvars + self.sig.params)[self.sig.nvars:]
            xs += "".join(f"p{j + 1}^{e}" if e > 1 else f"p{j + 1}" for j, e in enumerate(pexps) if e)
            p = key_pi2(k)
            pis = f"pi^({p}/2)" if p else ""
            parts.append(f"({c}){xs}{pis}{gens}")
        return " + ".join(parts)


# ---------------------------------------------------------------------------
# products


def wedge(a: Multivector, b: Multivector) -> Multivector:
    """Graded-commutative product a ^ b."""
    a._check(b)
    order = min(a.order, b.order)
    lim = order
    out: dict[int, object] = {}
    get = out.get
    sign = reorder_sign
    for k1, c1 in a.terms.items():
        m1 = k1 & GEN_MASK
        for k2, c2 in b.terms.items():
            if m1 & k2 & GEN_MASK:
                continue
            k = k1 + k2 - PAIR_OFFSET
            if (k >> DEG_SHIFT) & DEG_FIELD > lim:
                continue
            v = c1 * c2
            prev = get(k)
            if sign(m1, k2 & GEN_MASK) < 0:
                out[k] = -v if prev is None else prev - v
            else:
                out[k] = v if prev is None else prev + v
    return Multivector(a.sig, a._clean(out), order, a.exact)


def wedge_all(items: Sequence[Multivector]) -> Multivector:
    out = items[0]
    for x in items[1:]:
        out = out * x
    return out


def commutes_part(a: Multivector) -> bool:
    return a.is_even()


# ---------------------------------------------------------------------------
# Berezin integrals, Tr_z, interior multiplication


def _block_mask(sig: Signature, block: str) -> int:
    if block == "psi":
        return sig.psi_mask
    if block == "psihat":
        return sig.psihat_mask
    raise ValueError(f"unknown block {block!r}")


def berezin_block(a: Multivector, top: int) -> Multivector:
    """Coefficient of the monomial ``top`` written on the right.

    Each term is rewritten as rest * top and ``rest`` is kept, so coefficients
    from the surrounding algebra factor out on the left.
    """
    out: dict[int, object] = {}
    for k, c in a.terms.items():
        m = k & GEN_MASK
        if m & top != top:
            continue
        rest = m & ~top
        s = reorder_sign(rest, top)
        v = -c if s < 0 else c
        nk = k - top
        out[nk] = out[nk] + v if nk in out else v
    return a.like(a._clean(out))


def berezin_single(a: Multivector, block: str = "psi") -> Multivector:
    """Integral over one fiber block normalised by int psi_1...psi_N = 1."""
    return berezin_block(a, _block_mask(a.sig, block))


def berezin_double(a: Multivector) -> Multivector:
    """Integral over both blocks normalised by int psi_1..psi_N psihat_1..psihat_N = 1."""
    return berezin_block(a, a.sig.psi_mask | a.sig.psihat_mask)


def berezin_product(a: Multivector, b: Multivector, top: int) -> Multivector:
    """Integral of a ^ b over the monomial ``top`` without forming a ^ b.

    Only pairs whose fiber parts are complementary inside ``top`` survive, so
    b is bucketed by its fiber part first.
    """
    a._check(b)
    order = min(a.order, b.order)
    buckets: dict[int, list[tuple[int, object]]] = {}
    for k2, c2 in b.terms.items():
        f = k2 & top
        buckets.setdefault(f, []).append((k2, c2))
    out: dict[int, object] = {}
    for k1, c1 in a.terms.items():
        m1 = k1 & GEN_MASK
        f1 = m1 & top
        for k2, c2 in buckets.get(top & ~f1, ()):
            m2 = k2 & GEN_MASK
            if m1 & m2:
                continue
            k = k1 + k2 - PAIR_OFFSET
            if (k >> DEG_SHIFT) & DEG_FIELD > order:
                continue
            m = m1 | m2
            s = reorder_sign(m1, m2) * reorder_sign(m & ~top, top)
            v = c1 * c2
            if s < 0:
                v = -v
            nk = k - top
            out[nk] = out[nk] + v if nk in out else v
    return Multivector(a.sig, a._clean(out), order, a.exact)


def tr_z(a: Multivector) -> Multivector:
    """z-coefficient of a = a0 + z a1 (z written on the left)."""
    sig = a.sig
    zb = 1 << sig.z
    out: dict[int, object] = {}
    for k, c in a.terms.items():
        m = k & GEN_MASK
        if not m & zb:
            continue
        rest = m & ~zb
        v = -c if reorder_sign(zb, rest) < 0 else c
        nk = k - zb
        out[nk] = out[nk] + v if nk in out else v
    return Multivector(sig.with_z(False), a._clean(out), a.order, a.exact)


def interior_mult(v: Sequence, block: str, a: Multivector) -> Multivector:
    """Graded derivation i_v contracting the psi or psihat block.

    ``v`` holds N scalars or mask-free (even) elements.
    """
    sig = a.sig
    if len(v) != sig.rank:
        raise ValueError(f"vector of length {len(v)} for rank {sig.rank}")
    first = sig.psi(0) if block == "psi" else sig.psihat(0)
    out = a.zero_like()
    for k in range(sig.rank):
        coef = v[k]
        if not isinstance(coef, Multivector):
            coef = a.const(coef)
        bit = 1 << (first + k)
        terms: dict[int, object] = {}
        for key, c in a.terms.items():
            m = key & GEN_MASK
            if not m & bit:
                continue
            # i(e_k) acts from the left: sign = (-1)^(number of generators before bit)
            before = (m & (bit - 1)).bit_count()
            val = -c if before & 1 else c
            nk = key - bit
            terms[nk] = terms[nk] + val if nk in terms else val
        out = out + coef * a.like(a._clean(terms))
    return out


# ---------------------------------------------------------------------------
# exponentials and power series of even elements


def split_constant(a: Multivector) -> tuple[object, Multivector]:
    """Return (a0, n): a0 the numeric part, n the nilpotent remainder."""
    zero = to_exact(0) if a.exact else 0j
    c0 = a.terms.get(ONE_KEY, zero)
    rest = {k: c for k, c in a.terms.items() if k != ONE_KEY}
    if a.exact:
        for k in rest:
            if not k & GEN_MASK and key_degree(k) == 0:
                raise ExactnessError("formal pi power in the constant part")
    return c0, a.like(rest)


def power_series(n: Multivector, coeffs: Callable[[int], object]) -> Multivector:
    """Sum_k coeffs(k) n^k for nilpotent n, stopping when n^k vanishes."""
    out = n.const(coeffs(0))
    p = n.const(1)
    k = 0
    while True:
        k += 1
        p = p * n
        if p.is_zero():
            break
        c = coeffs(k)
        if c:
            out = out + p.scale(c)
        if k > 64:
            raise RuntimeError("series failed to terminate")
    return out


def _inv_factorial(k: int, exact: bool):
    if exact:
        return QQ_I(QQ(1, math.factorial(k)), 0)
    return 1.0 / math.factorial(k)


def exp_even(a: Multivector) -> Multivector:
    """exp(a) for even a = a0 + n with n nilpotent."""
    if not a.is_even():
        raise ParityError("exp_even needs an even element")
    c0, n = split_constant(a)
    series = power_series(n, lambda k: _inv_factorial(k, a.exact))
    if a.exact:
        if c0:
            raise ExactnessError("exp of a nonzero number is not rational")
        return series
    return series.scale(cmath.exp(c0))


def sqrt_even(a: Multivector) -> Multivector:
    """Principal square root for even a with positive numeric part."""
    c0, n = split_constant(a)
    if a.exact:
        fx, fy = exact_to_fraction_pair(c0)
        if fy != 0 or fx <= 0:
            raise ExactnessError("square root needs a positive rational constant")
        num, den = fx.numerator, fx.denominator
        rn, rd = math.isqrt(num), math.isqrt(den)
        if rn * rn != num or rd * rd != den:
            raise ExactnessError("constant part is not a rational square")
        root = gaussian(Fraction(rn, rd))
        inv = QQ_I(1, 0) / c0
        u = n.scale(inv)
        coeffs = [gaussian(_binom_half(k)) for k in range(70)]
        return power_series(u, lambda k: coeffs[k]).scale(root)
    root = cmath.sqrt(c0)
    u = n.scale(1 / c0)
    return power_series(u, lambda k: float(_binom_half(k))).scale(root)


def _binom_half(k: int) -> Fraction:
    out = Fraction(1)
    for j in range(k):
        out *= (Fraction(1, 2) - j) / (j + 1)
    return out


def inverse_even(a: Multivector) -> Multivector:
    """1/a for even a with invertible numeric part."""
    c0, n = split_constant(a)
    if a.exact:
        if not c0:
            raise ZeroDivisionError("non-invertible element")
        inv = QQ_I(1, 0) / c0
        minus = QQ_I(-1, 0)
        u = n.scale(inv)
        return power_series(u, lambda k: minus ** k).scale(inv)
    inv = 1 / c0
    u = n.scale(inv)
    return power_series(u, lambda k: (-1.0) ** k).scale(inv)


def log_even(a: Multivector) -> Multivector:
    """log(a) for even a whose numeric part is exactly 1 (exact) or positive (float)."""
    c0, n = split_constant(a)
    if a.exact:
        if c0 != QQ_I(1, 0):
            raise ExactnessError("exact log needs constant part 1")
        return power_series(n, lambda k: QQ_I(QQ((-1) ** (k + 1), k), 0) if k else QQ_I(0, 0))
    u = n.scale(1 / c0)
    return power_series(u, lambda k: ((-1.0) ** (k + 1)) / k if k else 0.0) + cmath.log(c0)


# ---------------------------------------------------------------------------
# matrices over the algebra


class AlgebraMatrix:
    """Matrix with Multivector entries and an optional Z-grading of the basis.

    With a grading the product follows the super sign rule
    (x E_ij)(y E_jk) = (-1)^{|E_ij| |y|} xy E_ik, used for operators on
    Fock spaces with algebra-valued coefficients.  Without a grading the
    product is the plain matrix product of form-valued matrices.
    """

    __slots__ = ("rows", "grading")

    def __init__(self, rows: list[list[Multivector]], grading: Sequence[int] | None = None):
        self.rows = rows
        self.grading = tuple(grading) if grading is not None else None
        if grading is not None and len(rows) != len(self.grading):
            raise ValueError("grading length does not match")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.rows[0]) if self.rows else 0

    def __getitem__(self, ij: tuple[int, int]) -> Multivector:
        return self.rows[ij[0]][ij[1]]

    @property
    def proto(self) -> Multivector:
        return self.rows[0][0]

    @classmethod
    def identity(cls, proto: Multivector, n: int, grading: Sequence[int] | None = None) -> "AlgebraMatrix":
        return cls([[proto.const(1 if i == j else 0) for j in range(n)] for i in range(n)], grading)

    @classmethod
    def zeros(cls, proto: Multivector, n: int, m: int | None = None,
              grading: Sequence[int] | None = None) -> "AlgebraMatrix":
        m = n if m is None else m
        return cls([[proto.zero_like() for _ in range(m)] for _ in range(n)], grading)

    @classmethod
    def from_numbers(cls, proto: Multivector, values, grading: Sequence[int] | None = None) -> "AlgebraMatrix":
        return cls([[proto.const(v) for v in row] for row in values], grading)

    def map(self, f: Callable[[Multivector], Multivector]) -> "AlgebraMatrix":
        return AlgebraMatrix([[f(x) for x in row] for row in self.rows], self.grading)

    def __add__(self, other: "AlgebraMatrix") -> "AlgebraMatrix":
        return AlgebraMatrix([[x + y for x, y in zip(r1, r2)] for r1, r2 in zip(self.rows, other.rows)],
                             self.grading)

    def __sub__(self, other: "AlgebraMatrix") -> "AlgebraMatrix":
        return AlgebraMatrix([[x - y for x, y in zip(r1, r2)] for r1, r2 in zip(self.rows, other.rows)],
                             self.grading)

    def __neg__(self) -> "AlgebraMatrix":
        return self.map(lambda x: -x)

    def scale(self, c) -> "AlgebraMatrix":
        return self.map(lambda x: x.scale(c))

    def left(self, a: Multivector) -> "AlgebraMatrix":
        """Entrywise a ^ M_ij."""
        return self.map(lambda x: a * x)

    def right(self, a: Multivector) -> "AlgebraMatrix":
        """Entrywise M_ij ^ a."""
        return self.map(lambda x: x * a)

    def __matmul__(self, other: "AlgebraMatrix") -> "AlgebraMatrix":
        n, k = self.shape
        k2, m = other.shape
        if k != k2:
            raise ValueError("shape mismatch")
        graded = self.grading is not None and other.grading is not None
        proto = self.proto
        out = []
        for i in range(n):
            row = []
            for j in range(m):
                acc = proto.zero_like()
                for l in range(k):
                    x = self.rows[i][l]
                    y = other.rows[l][j]
                    if x.is_zero() or y.is_zero():
                        continue
                    if graded and (self.grading[i] + self.grading[l]) % 2:
                        y = y.even_part() - y.odd_part()
                    acc = acc + x * y
                row.append(acc)
            out.append(row)
        return AlgebraMatrix(out, self.grading if graded else None)

    def transpose(self) -> "AlgebraMatrix":
        """Plain entrywise transpose (no signs)."""
        n, m = self.shape
        return AlgebraMatrix([[self.rows[i][j] for i in range(n)] for j in range(m)], self.grading)

    def trace(self) -> Multivector:
        acc = self.proto.zero_like()
        for i in range(self.shape[0]):
            acc = acc + self.rows[i][i]
        return acc

    def is_zero(self) -> bool:
        return all(x.is_zero() for row in self.rows for x in row)

    def max_abs(self) -> float:
        return max(x.max_abs() for row in self.rows for x in row)

    def power(self, k: int) -> "AlgebraMatrix":
        out = AlgebraMatrix.identity(self.proto, self.shape[0], self.grading)
        for _ in range(k):
            out = out @ self
        return out

    def numeric_part(self) -> "AlgebraMatrix":
        return self.map(lambda x: x.like({ONE_KEY: x.terms[ONE_KEY]} if ONE_KEY in x.terms else {}))


def supertrace(M: AlgebraMatrix) -> Multivector:
    """Sum_i (-1)^deg(i) M_ii."""
    if M.grading is None:
        raise ValueError("supertrace needs a graded matrix")
    n, m = M.shape
    if n != m:
        raise ValueError("supertrace needs a square matrix")
    acc = M.proto.zero_like()
    for i in range(n):
        x = M.rows[i][i]
        acc = acc - x if M.grading[i] % 2 else acc + x
    return acc


def _perm_sign(p: Sequence[int]) -> int:
    sign = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j = i
        length = 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def det_even(M: AlgebraMatrix) -> Multivector:
    """Leibniz determinant of a matrix with even (commuting) entries."""
    n, m = M.shape
    if n != m:
        raise ValueError("det needs a square matrix")
    for row in M.rows:
        for x in row:
            if not x.is_even():
                raise ParityError("det_even needs even entries")
    acc = M.proto.zero_like()
    for p in permutations(range(n)):
        term = M.proto.const(_perm_sign(p))
        for i in range(n):
            x = M.rows[i][p[i]]
            if x.is_zero():
                term = None
                break
            term = term * x
            if term.is_zero():
                break
        if term is not None and not term.is_zero():
            acc = acc + term
    return acc


def _check_skew(M: AlgebraMatrix) -> None:
    n = M.shape[0]
    for i in range(n):
        for j in range(n):
            r = M.rows[i][j] + M.rows[j][i]
            if M.proto.exact:
                if not r.is_zero():
                    raise ValueError("matrix is not antisymmetric")
            elif r.max_abs() > 1e-12 * max(1.0, M.max_abs()):
                raise ValueError("matrix is not antisymmetric")


def matrix_series(M: AlgebraMatrix, coeffs: Callable[[int], object], tol: float = 1e-18,
                  max_terms: int = 200) -> AlgebraMatrix:
    """Sum_k coeffs(k) M^k; terminates on nilpotency or float convergence."""
    n = M.shape[0]
    out = AlgebraMatrix.identity(M.proto, n, M.grading).scale(coeffs(0))
    p = AlgebraMatrix.identity(M.proto, n, M.grading)
    for k in range(1, max_terms):
        p = p @ M
        if p.is_zero():
            return out
        c = coeffs(k)
        if c:
            term = p.scale(c)
            out = out + term
            if not M.proto.exact and term.max_abs() < tol * max(1.0, out.max_abs()) and k > 4:
                return out
    if M.proto.exact:
        raise RuntimeError("matrix series did not terminate")
    return out


def sinc_matrix(M: AlgebraMatrix) -> AlgebraMatrix:
    """sin(M)/M as the even power series sum_k (-1)^k M^{2k} / (2k+1)!."""
    exact = M.proto.exact
    M2 = M @ M

    def c(k: int):
        v = Fraction((-1) ** k, math.factorial(2 * k + 1))
        return gaussian(v) if exact else float(v)

    return matrix_series(M2, c)


def sqrtdet_sinc(M: AlgebraMatrix) -> Multivector:
    """det(sin M / M)^(1/2) on the branch equal to 1 at M = 0.

    Computed as the square root of the Leibniz determinant of sinc(M); the
    determinant's numeric part is positive for skew numeric parts of moderate
    size, which fixes the branch.
    """
    _check_skew(M)
    return sqrt_even(det_even(sinc_matrix(M)))


def sqrtdet_sinc_log(M: AlgebraMatrix) -> Multivector:
    """Same quantity via exp(1/2 tr log(sin M / M)) (needs nilpotent M in exact mode)."""
    _check_skew(M)
    S = sinc_matrix(M)
    n = S.shape[0]
    X = S - AlgebraMatrix.identity(S.proto, n)
    exact = S.proto.exact

    def c(k: int):
        if k == 0:
            return 0
        v = Fraction((-1) ** (k + 1), k)
        return gaussian(v) if exact else float(v)

    L = matrix_series(X, c)
    return exp_even(L.trace().scale(gaussian(Fraction(1, 2)) if exact else 0.5))


def antisym_to_form(A: AlgebraMatrix, block: str = "psi") -> Multivector:
    """1/2 <psi, A psi> = 1/2 sum_ij psi_i A_ij psi_j for antisymmetric even A."""
    proto = A.proto
    sig = proto.sig
    n = A.shape[0]
    _check_skew(A)
    for row in A.rows:
        for x in row:
            if not x.is_even():
                raise ParityError("entries must be even")
    gen = sig.psi if block == "psi" else sig.psihat
    acc = proto.zero_like()
    for i in range(n):
        for j in range(n):
            if A.rows[i][j].is_zero():
                continue
            acc = acc + proto.gen(gen(i)) * A.rows[i][j] * proto.gen(gen(j))
    return acc.scale(gaussian(Fraction(1, 2)) if proto.exact else 0.5)


def bilinear(u: Sequence[Multivector], A: AlgebraMatrix, v: Sequence[Multivector]) -> Multivector:
    """sum_ij u_i A_ij v_j keeping the written order of factors."""
    acc = A.proto.zero_like()
    for i, ui in enumerate(u):
        if ui.is_zero():
            continue
        for j, vj in enumerate(v):
            a = A.rows[i][j]
            if a.is_zero() or vj.is_zero():
                continue
            acc = acc + ui * a * vj
    return acc


def algebra_expm(X: AlgebraMatrix, squarings: int | None = None) -> AlgebraMatrix:
    """exp(X) for a matrix over the algebra with nilpotent non-numeric part.

    Exact mode requires a zero numeric part, where the Taylor series
    terminates.  In float mode the numeric part is handled by scaling and
    squaring: exp(X) = exp(X / 2^s)^(2^s), with the Taylor series of
    exp(X / 2^s) summed to double precision.
    """
    proto = X.proto
    exact = proto.exact
    if exact:
        if not X.numeric_part().is_zero():
            raise ExactnessError("exact exponential needs a nilpotent matrix")
        return matrix_series(X, lambda k: _inv_factorial(k, True))
    if squarings is None:
        big = X.numeric_part().max_abs()
        squarings = max(0, int(math.ceil(math.log2(big))) + 4) if big > 0 else 0
    Y = X.scale(0.5 ** squarings)
    E = matrix_series(Y, lambda k: _inv_factorial(k, False), tol=1e-19)
    for _ in range(squarings):
        E = E @ E
    return E
