"""Truncated third-order Taylor arithmetic over the 2n tangent-bundle variables.

Every tensor this package evaluates is assembled from partial derivatives of
scalar functions on the slit tangent bundle.  A :class:`Jet3` stores all
partials of order <= 3 of one scalar at one base point; arithmetic propagates
them exactly through sums, products, quotients and elementary functions, so a
single forward pass through an expression tree yields every derivative the
connection/curvature formulas need.

Conventions:

* coefficients are raw partial derivatives, ``coeffs[pos(alpha)] = (d^alpha f)(p)``,
  not divided-by-factorial Taylor coefficients;
* storage is dense over the graded-lexicographic multi-index list of degree <= 3
  (``binom(nvars+3, 3)`` entries);
* differentiating a jet loses one valid order; the ``order`` attribute tracks
  how deep the stored coefficients are still meaningful.

The Leibniz convolution behind every product is the hot kernel.  It runs in
the compiled extension ``sprayform._jetcore`` when that was built, else in the
numpy fallback ``sprayform._jetcore_py``; selection happens once at import and
is reported by :data:`BACKEND`.  Set ``SPRAYFORM_JETS=pure`` (or ``compiled``)
to force a backend.
"""

from __future__ import annotations

import functools
import itertools
import math
import os

import numpy as np

MAX_ORDER = 3


def _monomials(nvars: int) -> list[tuple[int, ...]]:
    """All exponent tuples with total degree <= MAX_ORDER, graded lex order."""
    out = []
    for deg in range(MAX_ORDER + 1):
        block = set()
        for axes in itertools.combinations_with_replacement(range(nvars), deg):
            alpha = [0] * nvars
            for a in axes:
                alpha[a] += 1
            block.add(tuple(alpha))
        out.extend(sorted(block))
    return out


def _multi_binom(alpha, beta):
    b = 1
    for a, c in zip(alpha, beta):
        b *= math.comb(a, c)
    return b


class JetTables:
    """Precomputed index tables for one variable count.

    ``mul_*`` drive the Leibniz convolution c[a+b] += binom(a+b, a) x[a] y[b];
    ``div_*`` hold the matching triangular system in CSR layout, one segment
    per output monomial, listing the lower-degree products to subtract before
    dividing by the constant part of the divisor.
    """

    def __init__(self, nvars: int):
        self.nvars = nvars
        self.monomials = _monomials(nvars)
        self.nmon = len(self.monomials)
        self.index = {m: i for i, m in enumerate(self.monomials)}
        self.degree = np.array([sum(m) for m in self.monomials], dtype=np.int32)

        ia, ib, io, w = [], [], [], []
        for i, a in enumerate(self.monomials):
            da = sum(a)
            for j, b in enumerate(self.monomials):
                if da + sum(b) > MAX_ORDER:
                    continue
                tot = tuple(x + y for x, y in zip(a, b))
                ia.append(i)
                ib.append(j)
                io.append(self.index[tot])
                w.append(float(_multi_binom(tot, a)))
        self.mul_a = np.array(ia, dtype=np.int32)
        self.mul_b = np.array(ib, dtype=np.int32)
        self.mul_out = np.array(io, dtype=np.int32)
        self.mul_w = np.array(w, dtype=np.float64)

        # Quotient tables: q[k] = (a[k] - sum w * b[bi] * q[qi]) / b[0], in
        # graded order so every qi precedes k.
        heads = [0]
        db, dq, dw = [], [], []
        for k, alpha in enumerate(self.monomials):
            for bi, beta in enumerate(self.monomials):
                if bi == 0 or sum(beta) > sum(alpha):
                    continue
                if any(c > a for a, c in zip(alpha, beta)):
                    continue
                gamma = tuple(a - c for a, c in zip(alpha, beta))
                db.append(bi)
                dq.append(self.index[gamma])
                dw.append(float(_multi_binom(alpha, beta)))
            heads.append(len(db))
        self.div_heads = np.array(heads, dtype=np.int32)
        self.div_b = np.array(db, dtype=np.int32)
        self.div_q = np.array(dq, dtype=np.int32)
        self.div_w = np.array(dw, dtype=np.float64)

        # Derivative shift: diff_src[v][k] = pos(alpha_k + e_v) for deg(alpha_k) <= 2.
        self.nlow = int(np.sum(self.degree <= MAX_ORDER - 1))
        self.diff_src = []
        for v in range(nvars):
            src = np.empty(self.nlow, dtype=np.int32)
            for k in range(self.nlow):
                alpha = list(self.monomials[k])
                alpha[v] += 1
                src[k] = self.index[tuple(alpha)]
            self.diff_src.append(src)


@functools.lru_cache(maxsize=None)
def tables_for(nvars: int) -> JetTables:
    return JetTables(nvars)


def _load_backend():
    choice = os.environ.get("SPRAYFORM_JETS", "auto")
    if choice not in ("auto", "compiled", "pure"):
        raise ValueError(f"SPRAYFORM_JETS must be auto|compiled|pure, got {choice!r}")
    if choice in ("auto", "compiled"):
        try:
            from . import _jetcore

            return _jetcore, "compiled"
        except ImportError:
            if choice == "compiled":
                raise
    from . import _jetcore_py

    return _jetcore_py, "pure"


_KERNEL, BACKEND = _load_backend()


class Jet3:
    """All partial derivatives of order <= 3 of a scalar at one base point."""

    __slots__ = ("nvars", "coeffs", "order")

    def __init__(self, nvars: int, coeffs: np.ndarray, order: int = MAX_ORDER):
        self.nvars = nvars
        self.coeffs = coeffs
        self.order = order

    # -- constructors -------------------------------------------------

    @staticmethod
    def constant(value: float, nvars: int) -> "Jet3":
        c = np.zeros(tables_for(nvars).nmon)
        c[0] = value
        return Jet3(nvars, c)

    @staticmethod
    def variable(index: int, value: float, nvars: int) -> "Jet3":
        """Jet of the coordinate function z_index at a base point."""
        if not 0 <= index < nvars:
            raise IndexError(f"variable index {index} out of range for {nvars} variables")
        t = tables_for(nvars)
        c = np.zeros(t.nmon)
        c[0] = value
        unit = tuple(1 if k == index else 0 for k in range(nvars))
        c[t.index[unit]] = 1.0
        return Jet3(nvars, c)

    # -- ring operations ----------------------------------------------

    def _check(self, other: "Jet3"):
        if self.nvars != other.nvars:
            raise ValueError(f"jet variable counts differ: {self.nvars} vs {other.nvars}")

    def __add__(self, other):
        if isinstance(other, Jet3):
            self._check(other)
            return Jet3(self.nvars, self.coeffs + other.coeffs, min(self.order, other.order))
        c = self.coeffs.copy()
        c[0] += float(other)
        return Jet3(self.nvars, c, self.order)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet3):
            self._check(other)
            return Jet3(self.nvars, self.coeffs - other.coeffs, min(self.order, other.order))
        c = self.coeffs.copy()
        c[0] -= float(other)
        return Jet3(self.nvars, c, self.order)

    def __rsub__(self, other):
        c = -self.coeffs
        c[0] += float(other)
        return Jet3(self.nvars, c, self.order)

    def __neg__(self):
        return Jet3(self.nvars, -self.coeffs, self.order)

    def __mul__(self, other):
        if isinstance(other, Jet3):
            self._check(other)
            t = tables_for(self.nvars)
            return Jet3(self.nvars, _KERNEL.mul(self.coeffs, other.coeffs, t),
                        min(self.order, other.order))
        return Jet3(self.nvars, self.coeffs * float(other), self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet3):
            self._check(other)
            if other.coeffs[0] == 0.0:
                raise ZeroDivisionError("division by a jet with zero value part")
            t = tables_for(self.nvars)
            return Jet3(self.nvars, _KERNEL.div(self.coeffs, other.coeffs, t),
                        min(self.order, other.order))
        return Jet3(self.nvars, self.coeffs / float(other), self.order)

    def __rtruediv__(self, other):
        return Jet3.constant(float(other), self.nvars) / self

    # -- access ---------------------------------------------------------

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def partial(self, alpha) -> float:
        """The mixed partial d^alpha of the represented function at the base point."""
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.nvars:
            raise ValueError(f"multi-index length {len(alpha)} != nvars {self.nvars}")
        if min(alpha, default=0) < 0:
            raise ValueError("negative entry in multi-index")
        total = sum(alpha)
        if total > MAX_ORDER:
            raise ValueError(f"multi-index order {total} exceeds {MAX_ORDER}")
        if total > self.order:
            raise ValueError(
                f"jet only carries valid derivatives to order {self.order}")
        return float(self.coeffs[tables_for(self.nvars).index[alpha]])

    def diff(self, axis: int) -> "Jet3":
        """Partial derivative along one axis; valid order drops by one."""
        t = tables_for(self.nvars)
        c = np.zeros(t.nmon)
        c[: t.nlow] = self.coeffs[t.diff_src[axis]]
        return Jet3(self.nvars, c, self.order - 1)

    def __repr__(self):
        return f"Jet3(nvars={self.nvars}, value={self.value!r}, order={self.order})"


def extract_partial(jet: Jet3, alpha) -> float:
    return jet.partial(alpha)


# Derivative ladders of the supported elementary functions, g(t) up to g'''.
def _ladder(fn: str, t0: float, param):
    if fn == "sqrt":
        if t0 <= 0.0:
            raise ValueError("sqrt of a jet with non-positive value part")
        r = math.sqrt(t0)
        return (r, 0.5 / r, -0.25 / (r * t0), 0.375 / (r * t0 * t0))
    if fn == "exp":
        e = math.exp(t0)
        return (e, e, e, e)
    if fn == "log":
        if t0 <= 0.0:
            raise ValueError("log of a jet with non-positive value part")
        inv = 1.0 / t0
        return (math.log(t0), inv, -inv * inv, 2.0 * inv ** 3)
    if fn == "sin":
        s, c = math.sin(t0), math.cos(t0)
        return (s, c, -s, -c)
    if fn == "cos":
        s, c = math.sin(t0), math.cos(t0)
        return (c, -s, -c, s)
    if fn == "pow":
        r = float(param)
        if t0 <= 0.0:
            raise ValueError("pow of a jet with non-positive value part and non-integer exponent")
        return (
            t0 ** r,
            r * t0 ** (r - 1),
            r * (r - 1) * t0 ** (r - 2),
            r * (r - 1) * (r - 2) * t0 ** (r - 3),
        )
    raise ValueError(f"unknown function {fn!r}")


def apply_unary(fn: str, jet: Jet3, param=None) -> Jet3:
    """Compose a univariate elementary function with a jet (Faa di Bruno, order 3).

    With u = jet - value the truncation is exact:
    g(jet) = g0 + g1 u + g2/2 u^2 + g3/6 u^3, evaluated by Horner steps.
    """
    g0, g1, g2, g3 = _ladder(fn, jet.value, param)
    u = jet - jet.value
    out = u * (g3 / 6.0) + (g2 / 2.0)
    out = u * out + g1
    out = u * out + g0
    # Horner through the nilpotent part never consumes derivative orders.
    out.order = jet.order
    return out
