"""Differential forms with truncated Taylor coefficients on a base germ.

A jet form is a Multivector whose generators include dx_1..dx_m (and ds);
its coefficients are polynomials in the base coordinates truncated at the
element's ``order``.  Differentiating loses one order of validity.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sympy.polys.domains import QQ_I
from sympy.polys.matrices import DomainMatrix

from .grassmann import (
    DEG_SHIFT,
    EXP_SHIFT,
    EXP_WIDTH,
    GEN_MASK,
    ONE_KEY,
    PI_SHIFT,
    AlgebraMatrix,
    Multivector,
    Signature,
    SignatureError,
    exp_even,
    inverse_even,
    key_exps,
    key_pi2,
    sqrt_even,
    to_exact,
)

JetScalar = Multivector
JetForm = Multivector


def base_signature(m: int, extra_s: bool = False, params: int = 0) -> Signature:
    return Signature(m, extra_s, 0, False, params)


def jet_const(sig: Signature, value, order: int, exact: bool = True) -> Multivector:
    return Multivector.scalar(sig, value, order, exact)


def jet_var(sig: Signature, j: int, order: int, exact: bool = True) -> Multivector:
    return Multivector.coordinate(sig, j, order, exact)


def d(a: Multivector) -> Multivector:
    """Exterior derivative sum_j dx_j ^ d/dx_j (ds ^ d/ds for the s slot)."""
    nv = a.sig.nvars
    out: dict[int, object] = {}
    deg_one = 1 << DEG_SHIFT
    for key, c in a.terms.items():
        mask = key & GEN_MASK
        for j in range(nv):
            bit = 1 << j
            if mask & bit:
                continue
            shift = EXP_SHIFT + EXP_WIDTH * j
            e = (key >> shift) & 31
            if not e:
                continue
            nk = key - (1 << shift) - deg_one + bit
            v = c * e
            if (mask & (bit - 1)).bit_count() & 1:
                v = -v
            out[nk] = out[nk] + v if nk in out else v
    return Multivector(a.sig, a._clean(out), a.order - 1, a.exact)


def partial(a: Multivector, j: int) -> Multivector:
    """Coefficientwise derivative in base coordinate j."""
    out: dict[int, object] = {}
    shift = EXP_SHIFT + EXP_WIDTH * j
    for key, c in a.terms.items():
        e = (key >> shift) & 31
        if not e:
            continue
        nk = key - (1 << shift) - (1 << DEG_SHIFT)
        out[nk] = out[nk] + c * e if nk in out else c * e
    return Multivector(a.sig, a._clean(out), a.order - 1, a.exact)


def jet_exp(p: Multivector) -> Multivector:
    return exp_even(p)


def jet_sqrt(p: Multivector) -> Multivector:
    return sqrt_even(p)


def jet_inverse(p: Multivector) -> Multivector:
    return inverse_even(p)


def d_matrix(M: AlgebraMatrix) -> AlgebraMatrix:
    return M.map(d)


# ---------------------------------------------------------------------------
# numeric parts and inverses of jet matrices


def numeric_matrix(M: AlgebraMatrix) -> list[list[object]]:
    zero = to_exact(0) if M.proto.exact else 0j
    return [[x.terms.get(ONE_KEY, zero) for x in row] for row in M.rows]


def numeric_inverse(values: list[list[object]], exact: bool) -> list[list[object]]:
    n = len(values)
    if exact:
        dm = DomainMatrix([list(r) for r in values], (n, n), QQ_I)
        return dm.inv().to_list()
    inv = np.linalg.inv(np.array(values, dtype=complex))
    return [[complex(inv[i, j]) for j in range(n)] for i in range(n)]


def matrix_inverse(M: AlgebraMatrix) -> AlgebraMatrix:
    """Inverse of a jet matrix with invertible numeric part (Neumann series)."""
    proto = M.proto
    n = M.shape[0]
    inv0 = AlgebraMatrix.from_numbers(proto, numeric_inverse(numeric_matrix(M), proto.exact))
    X = M - AlgebraMatrix.from_numbers(proto, numeric_matrix(M))
    T = inv0 @ X
    out = AlgebraMatrix.identity(proto, n)
    p = AlgebraMatrix.identity(proto, n)
    for k in range(1, 200):
        p = (p @ T).scale(-1)
        if p.is_zero():
            break
        out = out + p
    else:
        raise RuntimeError("Neumann series did not terminate")
    return out @ inv0


# ---------------------------------------------------------------------------
# moving elements between signatures


def _split_key(key: int, sig: Signature):
    mask = key & GEN_MASK
    pi2 = key_pi2(key)
    allexp = key_exps(key, sig.nvars + sig.params)
    return mask, pi2, allexp[: sig.nvars], allexp[sig.nvars:]


def _build_key(mask: int, pi2: int, exps: Sequence[int], params: Sequence[int]) -> int:
    key = ONE_KEY + (pi2 << PI_SHIFT) + mask + (sum(exps) << DEG_SHIFT)
    for j, e in enumerate(list(exps) + list(params)):
        key |= e << (EXP_SHIFT + EXP_WIDTH * j)
    return key


def _block_map(src: Signature, dst: Signature):
    """Generator index map from src to dst for blocks present in both."""
    gm: dict[int, int] = {}
    for a in range(min(src.base_dim, dst.base_dim)):
        gm[src.dx(a)] = dst.dx(a)
    if src.extra_s and dst.extra_s:
        gm[src.ds] = dst.ds
    for k in range(min(src.rank, dst.rank)):
        gm[src.psi(k)] = dst.psi(k)
        gm[src.psihat(k)] = dst.psihat(k)
    if src.has_z and dst.has_z:
        gm[src.z] = dst.z
    return gm


def rehome(a: Multivector, dst: Signature, order: int | None = None) -> Multivector:
    """Move ``a`` into a compatible signature (same m, possibly adding ds / params / fiber blocks).

    Generator order is preserved block by block, so no signs arise.  A new s
    coordinate enters with exponent zero.
    """
    src = a.sig
    if dst.base_dim != src.base_dim or dst.rank < src.rank or dst.params < src.params:
        raise SignatureError(f"cannot rehome {src} into {dst}")
    if src.extra_s and not dst.extra_s:
        raise SignatureError("use restrict_s to drop the s coordinate")
    if src.has_z and not dst.has_z:
        raise SignatureError("cannot drop z")
    gm = _block_map(src, dst)
    out: dict[int, object] = {}
    for key, c in a.terms.items():
        mask, pi2, exps, params = _split_key(key, src)
        nm = 0
        for g, h in gm.items():
            if mask >> g & 1:
                nm |= 1 << h
        ex = list(exps)
        if dst.extra_s and not src.extra_s:
            ex.append(0)
        pr = list(params) + [0] * (dst.params - src.params)
        out[_build_key(nm, pi2, ex, pr)] = c
    return Multivector(dst, out, a.order if order is None else order, a.exact)


def restrict_s(a: Multivector, dst: Signature | None = None) -> Multivector:
    """Set sigma = s - s0 to zero and ds to zero."""
    src = a.sig
    if not src.extra_s:
        raise SignatureError("element has no s coordinate")
    if dst is None:
        dst = Signature(src.base_dim, False, src.rank, src.has_z, src.params, src.cap)
    gm = _block_map(src, dst)
    ds_bit = 1 << src.ds
    out: dict[int, object] = {}
    for key, c in a.terms.items():
        mask, pi2, exps, params = _split_key(key, src)
        if mask & ds_bit or exps[src.base_dim]:
            continue
        nm = 0
        for g, h in gm.items():
            if mask >> g & 1:
                nm |= 1 << h
        out[_build_key(nm, pi2, exps[: src.base_dim], params)] = c
    return Multivector(dst, out, a.order, a.exact)


def ds_component(a: Multivector) -> Multivector:
    """B in a = A + ds ^ B, restricted to sigma = 0."""
    src = a.sig
    ds_bit = 1 << src.ds
    below = ds_bit - 1
    moved: dict[int, object] = {}
    for key, c in a.terms.items():
        mask = key & GEN_MASK
        if not mask & ds_bit:
            continue
        v = -c if (mask & below).bit_count() & 1 else c
        moved[key - ds_bit] = v
    return restrict_s(Multivector(src, moved, a.order, a.exact))


def s_variable(sig: Signature, s0, order: int, exact: bool) -> Multivector:
    """The jet s = s0 + sigma in the extended signature."""
    if not sig.extra_s:
        raise SignatureError("signature has no s coordinate")
    return Multivector.coordinate(sig, sig.base_dim, order, exact) + s0


def extend_base(g, mode: str, s0):
    """Germ over B x R+ with metric s*h (``scale_up``) or h/s (``scale_down``)."""
    from .flat_bundle import FlatBundleGerm

    if g.sig.extra_s:
        raise ValueError("germ already has an s coordinate")
    if mode not in ("scale_up", "scale_down"):
        raise ValueError(f"unknown mode {mode!r}")
    if g.exact:
        s0v = to_exact(s0)
        if not s0v.x > 0 or s0v.y != 0:
            raise ValueError("s0 must be positive")
    else:
        if not float(s0) > 0:
            raise ValueError("s0 must be positive")
        s0v = float(s0)
    old = g.sig
    new = Signature(old.base_dim, True, 0, False, old.params)
    order = g.metric.proto.order
    s = s_variable(new, s0v, order, g.exact)
    factor = s if mode == "scale_up" else jet_inverse(s)
    rows = [[rehome(x, new).with_order(order) * factor for x in row] for row in g.metric.rows]
    return FlatBundleGerm(
        metric=AlgebraMatrix(rows),
        field=g.field,
        lattice_scale=g.lattice_scale,
        holonomy=g.holonomy,
        unimodular=False,
        frame=g.frame,
    )


