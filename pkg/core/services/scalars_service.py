"""
scalars_service.py — Exact coefficient arithmetic.

Responsible for:
- Rational scalars (sympy's QQ domain elements) and their text form "p/q"
- Truncated monomial rings R_k = Q[q_1..q_s, u_1..u_r] / (weight > k)
- ArtinSeries, the elements of those rings
- TLaurent, finite Laurent series in s = t^(1/2) with ArtinSeries coefficients

Monomials are plain tuples of exponents (q-part first, then parameters). The
weight of a monomial is the sum of its exponents, so the m-adic order of a
series is the smallest weight among its terms.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction

import sympy
from sympy import QQ

from core.services.errors import (
    IncompatibleDataError,
    TruncationMismatchError,
    WindowOverflowError,
)

logger = logging.getLogger(__name__)

Rational = type(QQ.one)
ZERO = QQ.zero
ONE = QQ.one


# ─────────────────────────────────────────────────────────────────────────────
# Rationals
# ─────────────────────────────────────────────────────────────────────────────

def rational(value) -> Rational:
    """
    Coerce ints, "p/q" strings, Fractions and sympy numbers to a QQ element.

    Raises:
        IncompatibleDataError: for anything that is not an exact rational
    """
    if isinstance(value, Rational):
        return value
    if isinstance(value, bool):
        raise IncompatibleDataError(f"Booleans are not scalars: {value!r}")
    if isinstance(value, int):
        return QQ(value)
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    if isinstance(value, str):
        text = value.strip()
        try:
            if "/" in text:
                num, den = text.split("/", 1)
                return QQ(int(num), int(den))
            return QQ(int(text))
        except (ValueError, ZeroDivisionError) as exc:
            raise IncompatibleDataError(f"Not a rational literal: {value!r}") from exc
    if isinstance(value, sympy.Rational):
        return QQ.from_sympy(value)
    raise IncompatibleDataError(f"Not an exact rational: {value!r}")


def format_rational(value) -> str:
    """Canonical text form: "p/q", or "p" for integers."""
    value = rational(value)
    num, den = int(QQ.numer(value)), int(QQ.denom(value))
    return str(num) if den == 1 else f"{num}/{den}"


# ─────────────────────────────────────────────────────────────────────────────
# Monomials and rings
# ─────────────────────────────────────────────────────────────────────────────

def mono_mul(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def mono_weight(m: tuple) -> int:
    return sum(m)


def mono_sort_key(m: tuple) -> tuple:
    """Weight first, then lexicographic with q_1 before q_2."""
    return (sum(m), tuple(-e for e in m))


@dataclass(frozen=True)
class ArtinRing:
    """
    The truncated ring Q[q_1..q_s][u_1..u_r] / (total weight > k).

    Parameters u_j stand for the formal coordinates of Sym(V^dual). They only
    carry even degrees, so they never enter Koszul signs.
    """

    s: int                              # rank of the monoid N^s
    k: int                              # truncation order
    params: tuple = ()                  # parameter names
    param_degrees: tuple = ()           # even Z-degrees, one per parameter

    def __post_init__(self):
        if self.s < 0 or self.k < 0:
            raise IncompatibleDataError(f"Ring needs s >= 0 and k >= 0, got s={self.s}, k={self.k}")
        degrees = self.param_degrees or tuple(0 for _ in self.params)
        if len(degrees) != len(self.params):
            raise IncompatibleDataError("One degree per parameter is required")
        odd = [name for name, deg in zip(self.params, degrees) if deg % 2]
        if odd:
            raise IncompatibleDataError(f"Parameters must have even degree: {odd}")
        object.__setattr__(self, "param_degrees", tuple(degrees))

    @property
    def nvars(self) -> int:
        return self.s + len(self.params)

    @property
    def zero_mono(self) -> tuple:
        return (0,) * self.nvars

    def gen(self, index: int) -> tuple:
        """Monomial of the index-th variable (q's first, then parameters)."""
        if not 0 <= index < self.nvars:
            raise IncompatibleDataError(f"Variable index {index} out of range for {self.nvars} variables")
        return tuple(1 if j == index else 0 for j in range(self.nvars))

    def param_index(self, name: str) -> int:
        try:
            return self.s + self.params.index(name)
        except ValueError as exc:
            raise IncompatibleDataError(f"Unknown parameter {name!r}") from exc

    def restrict(self, l: int) -> "ArtinRing":
        return ArtinRing(self.s, l, self.params, self.param_degrees)

    def monomials(self, max_weight: int | None = None) -> list[tuple]:
        """All monomials of weight <= max_weight (default k) in canonical order."""
        top = self.k if max_weight is None else max_weight
        out = []
        for w in range(top + 1):
            out.extend(_compositions(w, self.nvars))
        out.sort(key=mono_sort_key)
        return out

    def q_weight(self, m: tuple) -> int:
        return sum(m[: self.s])

    def label(self, m: tuple) -> str:
        names = [f"q{i + 1}" for i in range(self.s)] + list(self.params)
        parts = []
        for name, e in zip(names, m):
            if e == 1:
                parts.append(name)
            elif e > 1:
                parts.append(f"{name}^{e}")
        return "*".join(parts) if parts else "1"


def _compositions(total: int, parts: int) -> list[tuple]:
    if parts == 0:
        return [()] if total == 0 else []
    out = []
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        exps = []
        for c in cut:
            exps.append(c - prev - 1)
            prev = c
        exps.append(total + parts - 1 - prev - 1)
        out.append(tuple(exps))
    return out


# ─────────────────────────────────────────────────────────────────────────────
# ArtinSeries
# ─────────────────────────────────────────────────────────────────────────────

class ArtinSeries:
    """A truncated series: monomial -> rational, weights at most ring.k, no zero terms."""

    __slots__ = ("ring", "terms")

    def __init__(self, ring: ArtinRing, terms: dict | None = None):
        self.ring = ring
        clean = {}
        for mono, c in (terms or {}).items():
            if sum(mono) > ring.k:
                continue
            c = rational(c)
            if c:
                clean[tuple(mono)] = c
        self.terms = clean

    # ── constructors ──────────────────────────────────────────────────────────

    @classmethod
    def zero(cls, ring: ArtinRing) -> "ArtinSeries":
        return cls(ring)

    @classmethod
    def const(cls, ring: ArtinRing, c=1) -> "ArtinSeries":
        return cls(ring, {ring.zero_mono: c})

    @classmethod
    def one(cls, ring: ArtinRing) -> "ArtinSeries":
        return cls.const(ring, 1)

    @classmethod
    def monomial(cls, ring: ArtinRing, mono: tuple, c=1) -> "ArtinSeries":
        return cls(ring, {tuple(mono): c})

    # ── arithmetic ────────────────────────────────────────────────────────────

    def _check(self, other: "ArtinSeries") -> None:
        if other.ring != self.ring:
            raise TruncationMismatchError(
                f"Series over different rings: k={self.ring.k} vs k={other.ring.k}"
            )

    def __add__(self, other):
        if not isinstance(other, ArtinSeries):
            other = ArtinSeries.const(self.ring, other)
        self._check(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, ZERO) + c
        return ArtinSeries(self.ring, out)

    __radd__ = __add__

    def __neg__(self):
        return ArtinSeries(self.ring, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, ArtinSeries):
            other = ArtinSeries.const(self.ring, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, ArtinSeries):
            c = rational(other)
            return ArtinSeries(self.ring, {m: v * c for m, v in self.terms.items()})
        self._check(other)
        k = self.ring.k
        out: dict = {}
        for m1, c1 in self.terms.items():
            w1 = sum(m1)
            for m2, c2 in other.terms.items():
                if w1 + sum(m2) > k:
                    continue
                m = mono_mul(m1, m2)
                out[m] = out.get(m, ZERO) + c1 * c2
        return ArtinSeries(self.ring, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        result = ArtinSeries.one(self.ring)
        for _ in range(n):
            result = result * self
        return result

    def __eq__(self, other):
        if isinstance(other, ArtinSeries):
            return self.ring == other.ring and self.terms == other.terms
        try:
            return self == ArtinSeries.const(self.ring, other)
        except IncompatibleDataError:
            return NotImplemented

    __hash__ = None

    # ── queries ───────────────────────────────────────────────────────────────

    def is_zero(self) -> bool:
        return not self.terms

    def order(self) -> int | None:
        """Smallest term weight; None for the zero series."""
        if not self.terms:
            return None
        return min(sum(m) for m in self.terms)

    def constant(self) -> Rational:
        return self.terms.get(self.ring.zero_mono, ZERO)

    def coefficient(self, mono: tuple) -> Rational:
        return self.terms.get(tuple(mono), ZERO)

    def weight_part(self, w: int) -> "ArtinSeries":
        return ArtinSeries(self.ring, {m: c for m, c in self.terms.items() if sum(m) == w})

    def restrict(self, l: int) -> "ArtinSeries":
        return artin_restrict(self, l)

    def euler(self, nu: int) -> "ArtinSeries":
        """q_nu d/dq_nu applied termwise."""
        return ArtinSeries(self.ring, {m: c * m[nu] for m, c in self.terms.items()})

    def inverse(self) -> "ArtinSeries":
        """Inverse of a unit (nonzero constant term), by the geometric series."""
        c0 = self.constant()
        if not c0:
            raise IncompatibleDataError(f"Series {self.render()} is not a unit")
        inv0 = ONE / c0
        nil = ArtinSeries.one(self.ring) - self * inv0
        out = ArtinSeries.one(self.ring)
        power = ArtinSeries.one(self.ring)
        for _ in range(self.ring.k):
            power = power * nil
            out = out + power
        return out * inv0

    def render(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=mono_sort_key):
            c = self.terms[m]
            label = self.ring.label(m)
            if label == "1":
                parts.append(format_rational(c))
            elif c == 1:
                parts.append(label)
            elif c == -1:
                parts.append(f"-{label}")
            else:
                parts.append(f"{format_rational(c)}*{label}")
        return " + ".join(parts).replace("+ -", "- ")

    def to_json(self) -> dict:
        return {
            ",".join(str(e) for e in m): format_rational(c)
            for m, c in sorted(self.terms.items(), key=lambda item: mono_sort_key(item[0]))
        }

    @classmethod
    def from_json(cls, ring: ArtinRing, data) -> "ArtinSeries":
        """Accepts {"a,b": "p/q"} maps or a bare rational for a constant."""
        if not isinstance(data, dict):
            return cls.const(ring, rational(data))
        terms = {}
        for key, value in data.items():
            exps = tuple(int(x) for x in key.split(",")) if key else ()
            if len(exps) != ring.nvars:
                raise IncompatibleDataError(
                    f"Monomial {key!r} has {len(exps)} exponents, ring has {ring.nvars} variables"
                )
            if any(e < 0 for e in exps):
                raise IncompatibleDataError(f"Negative exponent in monomial {key!r}")
            terms[exps] = rational(value)
        return cls(ring, terms)

    def __repr__(self) -> str:
        return f"ArtinSeries({self.render()}; k={self.ring.k})"


def artin_arith(a: ArtinSeries, b, op: str) -> ArtinSeries:
    """
    Ring operations in R_k.

    Args:
        a: left operand
        b: right operand (a rational when op == "scale")
        op: "add", "mul" or "scale"

    Raises:
        TruncationMismatchError: operands over different rings
    """
    if op == "add":
        return a + b
    if op == "mul":
        if not isinstance(b, ArtinSeries):
            raise IncompatibleDataError("mul expects two series; use scale for rationals")
        return a * b
    if op == "scale":
        return a * rational(b)
    raise IncompatibleDataError(f"Unknown series operation {op!r}")


def artin_restrict(a: ArtinSeries, l: int) -> ArtinSeries:
    """
    The restriction r^{k,l}: drop every term of weight > l.

    Raises:
        TruncationMismatchError: if l > k or l < 0
    """
    if l > a.ring.k or l < 0:
        raise TruncationMismatchError(f"Cannot restrict from order {a.ring.k} to order {l}")
    ring = a.ring.restrict(l)
    return ArtinSeries(ring, {m: c for m, c in a.terms.items() if sum(m) <= l})


# ─────────────────────────────────────────────────────────────────────────────
# TLaurent
# ─────────────────────────────────────────────────────────────────────────────

class TLaurent:
    """
    A finite Laurent series sum_n c_n s^n with s = t^(1/2) and c_n in R_k.

    Powers are kept inside the window [low, high] (in units of s). Arithmetic
    never truncates silently: a result outside the window is an error.
    """

    __slots__ = ("ring", "low", "high", "coeffs")

    def __init__(self, ring: ArtinRing, low: int, high: int, coeffs: dict | None = None):
        if low > high:
            raise IncompatibleDataError(f"Empty window [{low}, {high}]")
        self.ring = ring
        self.low = low
        self.high = high
        clean = {}
        for n, c in (coeffs or {}).items():
            if not isinstance(c, ArtinSeries):
                c = ArtinSeries.const(ring, c)
            if c.ring != ring:
                raise TruncationMismatchError("Coefficient ring differs from the series ring")
            if c.is_zero():
                continue
            if n < low or n > high:
                raise WindowOverflowError(f"s-power {n} outside window [{low}, {high}]")
            clean[n] = c
        self.coeffs = clean

    @classmethod
    def window(cls, ring: ArtinRing, t_neg: int, t_cap: int) -> "TLaurent":
        """The zero series on the t-window [-t_neg, t_cap]."""
        return cls(ring, -2 * t_neg, 2 * t_cap)

    def like(self, coeffs: dict) -> "TLaurent":
        return TLaurent(self.ring, self.low, self.high, coeffs)

    def monomial(self, power: int, c=1) -> "TLaurent":
        return self.like({power: c})

    def _check(self, other: "TLaurent") -> None:
        if other.ring != self.ring:
            raise TruncationMismatchError("Laurent series over different coefficient rings")
        if (other.low, other.high) != (self.low, self.high):
            raise TruncationMismatchError(
                f"Laurent windows differ: [{self.low}, {self.high}] vs [{other.low}, {other.high}]"
            )

    def __add__(self, other: "TLaurent") -> "TLaurent":
        self._check(other)
        out = dict(self.coeffs)
        for n, c in other.coeffs.items():
            out[n] = out[n] + c if n in out else c
        return self.like(out)

    def __neg__(self) -> "TLaurent":
        return self.like({n: -c for n, c in self.coeffs.items()})

    def __sub__(self, other: "TLaurent") -> "TLaurent":
        return self + (-other)

    def __mul__(self, other) -> "TLaurent":
        if isinstance(other, ArtinSeries):
            return self.like({n: c * other for n, c in self.coeffs.items()})
        if not isinstance(other, TLaurent):
            c = rational(other)
            return self.like({n: v * c for n, v in self.coeffs.items()})
        self._check(other)
        out: dict = {}
        for n1, c1 in self.coeffs.items():
            for n2, c2 in other.coeffs.items():
                prod = c1 * c2
                if prod.is_zero():
                    continue
                n = n1 + n2
                if n < self.low or n > self.high:
                    raise WindowOverflowError(
                        f"Product has s-power {n} outside window [{self.low}, {self.high}]"
                    )
                out[n] = out[n] + prod if n in out else prod
        return self.like(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, TLaurent):
            return NotImplemented
        return (
            self.ring == other.ring
            and (self.low, self.high) == (other.low, other.high)
            and self.coeffs == other.coeffs
        )

    __hash__ = None

    def is_zero(self) -> bool:
        return not self.coeffs

    def min_power(self) -> int | None:
        return min(self.coeffs) if self.coeffs else None

    def max_power(self) -> int | None:
        return max(self.coeffs) if self.coeffs else None

    def coefficient(self, power: int) -> ArtinSeries:
        return self.coeffs.get(power, ArtinSeries.zero(self.ring))

    def euler_t(self) -> "TLaurent":
        """t d/dt, which multiplies the s^n coefficient by n/2."""
        return self.like({n: c * QQ(n, 2) for n, c in self.coeffs.items()})

    def at_minus_t(self) -> "TLaurent":
        """
        Substitute t -> -t. Only integral t-powers have a rational image.

        Raises:
            IncompatibleDataError: if an odd s-power is present
        """
        out = {}
        for n, c in self.coeffs.items():
            if n % 2:
                raise IncompatibleDataError(f"t -> -t is not rational on s^{n}")
            out[n] = -c if (n // 2) % 2 else c
        return self.like(out)

    def render(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for n in sorted(self.coeffs):
            c = self.coeffs[n].render()
            parts.append(f"({c})*s^{n}" if n else f"({c})")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"TLaurent({self.render()}; window=[{self.low}, {self.high}])"


def tlaurent_arith(a: TLaurent, b: TLaurent, op: str) -> TLaurent:
    """
    Sum or product of Laurent series in s = t^(1/2).

    Raises:
        TruncationMismatchError: different rings or windows
        WindowOverflowError: result leaves the window
    """
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise IncompatibleDataError(f"Unknown Laurent operation {op!r}")
