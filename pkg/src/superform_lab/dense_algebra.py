"""Dense float backend for matrices over a truncated Grassmann/jet algebra.

A matrix with Multivector entries is stored as a complex array of shape
(B, n, n), one n x n slice per basis monomial.  Products use a precomputed
table of monomial products, which makes scaling-and-squaring exponentials of
operators with large numeric parts affordable.  Float mode only.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

from .grassmann import (
    DEG_FIELD,
    DEG_SHIFT,
    GEN_MASK,
    ONE_KEY,
    PAIR_OFFSET,
    AlgebraMatrix,
    ModeError,
    Multivector,
    Signature,
    exp_key,
    reorder_sign,
)


def _exponent_vectors(nvars: int, order: int) -> list[tuple[int, ...]]:
    out = []
    for deg in range(order + 1):
        for combo in combinations_with_replacement(range(nvars), deg):
            e = [0] * nvars
            for j in combo:
                e[j] += 1
            out.append(tuple(e))
    return out


def _subsets(bits: int) -> list[int]:
    out = [0]
    b = bits
    while b:
        low = b & -b
        out += [m | low for m in out]
        b ^= low
    return sorted(out, key=lambda m: (m.bit_count(), m))


class AlgebraBasis:
    """Monomials over the generator bits ``gens`` and jet degree <= ``order``."""

    def __init__(self, sig: Signature, gens: int, order: int):
        if sig.params or sig.has_z:
            raise ValueError("dense backend supports base signatures only")
        self.sig, self.gens, self.order = sig, gens, order
        keys = []
        for e in _exponent_vectors(sig.nvars, order):
            ek = exp_key(e)
            for m in _subsets(gens):
                keys.append(ek | m)
        self.keys = keys
        self.index = {k: i for i, k in enumerate(keys)}
        self.parity = np.array([(k & GEN_MASK).bit_count() & 1 for k in keys], dtype=np.int8)
        ia, ib, ir, sg = [], [], [], []
        for a, ka in enumerate(keys):
            ma = ka & GEN_MASK
            for b, kb in enumerate(keys):
                mb = kb & GEN_MASK
                if ma & mb:
                    continue
                k = ka + kb - PAIR_OFFSET
                if (k >> DEG_SHIFT) & DEG_FIELD > order:
                    continue
                ia.append(a)
                ib.append(b)
                ir.append(self.index[k])
                sg.append(reorder_sign(ma, mb))
        self.ia = np.array(ia, dtype=np.int64)
        self.ib = np.array(ib, dtype=np.int64)
        self.ir = np.array(ir, dtype=np.int64)
        self.sign = np.array(sg, dtype=float)
        self.one = self.index[ONE_KEY]

    @property
    def size(self) -> int:
        return len(self.keys)


@lru_cache(maxsize=32)
def algebra_basis(sig: Signature, gens: int, order: int) -> AlgebraBasis:
    return AlgebraBasis(sig, gens, order)


class DenseMatrix:
    """Array form of an AlgebraMatrix; ``grading`` follows the super sign rule."""

    __slots__ = ("basis", "data", "grading")

    def __init__(self, basis: AlgebraBasis, data: np.ndarray, grading: tuple[int, ...] | None):
        self.basis, self.data, self.grading = basis, data, grading

    @classmethod
    def from_matrix(cls, M: AlgebraMatrix, basis: AlgebraBasis | None = None) -> "DenseMatrix":
        proto = M.proto
        if proto.exact:
            raise ModeError("dense backend is float only")
        if basis is None:
            gens = 0
            for row in M.rows:
                for x in row:
                    for k in x.terms:
                        gens |= k & GEN_MASK
            order = min(x.order for row in M.rows for x in row)
            basis = algebra_basis(proto.sig, gens, order)
        n, m = M.shape
        data = np.zeros((basis.size, n, m), dtype=complex)
        for i, row in enumerate(M.rows):
            for j, x in enumerate(row):
                for k, c in x.terms.items():
                    if (k >> DEG_SHIFT) & DEG_FIELD > basis.order:
                        continue
                    try:
                        data[basis.index[k], i, j] = c
                    except KeyError:
                        raise ValueError("entry outside the dense basis") from None
        return cls(basis, data, M.grading)

    def to_matrix(self, proto: Multivector) -> AlgebraMatrix:
        _, n, m = self.data.shape
        keys = self.basis.keys
        rows = []
        for i in range(n):
            row = []
            for j in range(m):
                col = self.data[:, i, j]
                nz = np.nonzero(col)[0]
                row.append(proto.like(proto._clean({keys[b]: complex(col[b]) for b in nz}), self.basis.order))
            rows.append(row)
        return AlgebraMatrix(rows, self.grading)

    @classmethod
    def identity_like(cls, other: "DenseMatrix") -> "DenseMatrix":
        B, n, _ = other.data.shape
        data = np.zeros_like(other.data)
        data[other.basis.one] = np.eye(n)
        return cls(other.basis, data, other.grading)

    def __add__(self, other: "DenseMatrix") -> "DenseMatrix":
        return DenseMatrix(self.basis, self.data + other.data, self.grading)

    def __sub__(self, other: "DenseMatrix") -> "DenseMatrix":
        return DenseMatrix(self.basis, self.data - other.data, self.grading)

    def scale(self, c: complex) -> "DenseMatrix":
        return DenseMatrix(self.basis, self.data * c, self.grading)

    def _signed(self) -> np.ndarray:
        if self.grading is None:
            return self.data
        s = np.array([-1.0 if g % 2 else 1.0 for g in self.grading])
        return self.data * s[None, :, None] * s[None, None, :]

    def __matmul__(self, other: "DenseMatrix") -> "DenseMatrix":
        bs = self.basis
        A, Bm = self.data, other.data
        nzA = np.any(A != 0, axis=(1, 2))
        nzB = np.any(Bm != 0, axis=(1, 2))
        keep = nzA[bs.ia] & nzB[bs.ib]
        ia, ib, ir, sg = bs.ia[keep], bs.ib[keep], bs.ir[keep], bs.sign[keep]
        graded = self.grading is not None and other.grading is not None
        SA = self._signed() if graded else A
        odd = bs.parity[ib].astype(bool)
        out = np.zeros((bs.size, A.shape[1], Bm.shape[2]), dtype=complex)
        for sel, left in ((~odd, A), (odd, SA)):
            if not sel.any():
                continue
            prod = np.matmul(left[ia[sel]], Bm[ib[sel]]) * sg[sel][:, None, None]
            np.add.at(out, ir[sel], prod)
        return DenseMatrix(bs, out, self.grading if graded else None)

    def max_abs(self) -> float:
        return float(np.abs(self.data).max()) if self.data.size else 0.0

    def numeric_norm(self) -> float:
        return float(np.abs(self.data[self.basis.one]).sum(axis=1).max())

    def supertrace(self, proto: Multivector) -> Multivector:
        s = np.array([-1.0 if g % 2 else 1.0 for g in self.grading])
        vals = np.einsum("bii,i->b", self.data, s)
        keys = self.basis.keys
        return proto.like(proto._clean({keys[b]: complex(vals[b]) for b in np.nonzero(vals)[0]}), self.basis.order)


def _nilpotent_series(Y: DenseMatrix) -> DenseMatrix | None:
    """exp(Y) when Y has zero numeric part: the Taylor series terminates."""
    E = DenseMatrix.identity_like(Y)
    term = DenseMatrix.identity_like(Y)
    for k in range(1, 64):
        term = (term @ Y).scale(1.0 / k)
        if not term.data.any():
            return E
        E = E + term
    return None


def dense_expm(X: DenseMatrix) -> DenseMatrix:
    """exp(X).

    A numeric part equal to c * identity is split off as the scalar factor
    e^c, leaving a terminating series.  Otherwise scaling and squaring with a
    Taylor core summed to double precision.
    """
    n = X.data.shape[1]
    num = X.data[X.basis.one]
    c = complex(np.trace(num)) / n if n else 0.0
    if np.abs(num - c * np.eye(n)).max(initial=0.0) <= 1e-15 * max(1.0, abs(c)):
        Y = DenseMatrix(X.basis, X.data.copy(), X.grading)
        Y.data[X.basis.one] = 0.0
        E = _nilpotent_series(Y)
        if E is not None:
            return E.scale(np.exp(c))
    big = X.max_abs() * X.data.shape[1]
    s = max(0, int(math.ceil(math.log2(big))) + 2) if big > 0 else 0
    Y = X.scale(0.5 ** s)
    E = DenseMatrix.identity_like(X)
    term = DenseMatrix.identity_like(X)
    for k in range(1, 60):
        term = (term @ Y).scale(1.0 / k)
        E = E + term
        if term.max_abs() < 1e-18 * max(1.0, E.max_abs()):
            break
    for _ in range(s):
        E = E @ E
    return E
