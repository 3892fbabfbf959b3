"""
test_scalars_service.py — Tests for exact coefficient arithmetic.

Covers rational coercion, the truncated rings R_k, ArtinSeries arithmetic and
restriction, and the windowed Laurent series in s = t^(1/2).
"""

from __future__ import annotations

from fractions import Fraction

import pytest
from sympy import QQ

from core.services.errors import (
    IncompatibleDataError,
    TruncationMismatchError,
    WindowOverflowError,
)
from core.services.scalars_service import (
    ArtinRing,
    ArtinSeries,
    TLaurent,
    artin_arith,
    artin_restrict,
    format_rational,
    rational,
    tlaurent_arith,
)


def _q(ring: ArtinRing, c=1) -> ArtinSeries:
    return ArtinSeries.monomial(ring, ring.gen(0), c)


class TestRational:
    """Coercion of exact scalars."""

    def test_accepts_int_fraction_and_string(self):
        """Ints, Fractions and "p/q" strings all land in QQ."""
        assert rational(3) == QQ(3)
        assert rational(Fraction(2, 6)) == QQ(1, 3)
        assert rational(" -5/10 ") == QQ(-1, 2)

    def test_rejects_floats_and_bools(self):
        """Inexact or boolean input is refused."""
        with pytest.raises(IncompatibleDataError):
            rational(0.5)
        with pytest.raises(IncompatibleDataError):
            rational(True)

    def test_rejects_bad_literal(self):
        """A malformed literal names itself in the error."""
        with pytest.raises(IncompatibleDataError, match="1/0"):
            rational("1/0")

    def test_format(self):
        """Integers print bare, fractions as p/q."""
        assert format_rational(QQ(4, 2)) == "2"
        assert format_rational(QQ(-3, 4)) == "-3/4"


class TestArtinRing:
    """The truncated monomial rings."""

    def test_monomials_sorted_by_weight(self):
        """Monomials come out weight first, q_1 before q_2."""
        ring = ArtinRing(s=2, k=1)
        assert ring.monomials() == [(0, 0), (1, 0), (0, 1)]

    def test_odd_parameter_rejected(self):
        """Parameters must be even."""
        with pytest.raises(IncompatibleDataError):
            ArtinRing(s=1, k=1, params=("u",), param_degrees=(1,))

    def test_labels(self):
        """Monomials render with q-names then parameter names."""
        ring = ArtinRing(s=1, k=3, params=("u",))
        assert ring.label((2, 1)) == "q1^2*u"
        assert ring.label((0, 0)) == "1"


class TestArtinSeries:
    """Arithmetic in R_k."""

    def test_truncated_product(self):
        """(1 + q)(1 − q) = 1 at k = 1."""
        ring = ArtinRing(s=1, k=1)
        one = ArtinSeries.one(ring)
        assert (one + _q(ring)) * (one - _q(ring)) == one

    def test_product_keeps_square_at_k2(self):
        """(1 + q)(1 − q) = 1 − q² at k = 2."""
        ring = ArtinRing(s=1, k=2)
        one = ArtinSeries.one(ring)
        expected = one - ArtinSeries.monomial(ring, (2,))
        assert (one + _q(ring)) * (one - _q(ring)) == expected

    def test_ring_mismatch(self):
        """Series over different truncations do not mix."""
        a = ArtinSeries.one(ArtinRing(s=1, k=1))
        b = ArtinSeries.one(ArtinRing(s=1, k=2))
        with pytest.raises(TruncationMismatchError):
            a + b

    def test_restriction_is_a_ring_map(self):
        """r^{k,l}(ab) = r(a) r(b)."""
        ring = ArtinRing(s=2, k=3)
        a = ArtinSeries(ring, {(0, 0): 2, (1, 0): 1, (1, 2): 5})
        b = ArtinSeries(ring, {(0, 0): 1, (0, 1): -3, (2, 0): 7})
        for l in range(4):
            assert artin_restrict(a * b, l) == artin_restrict(a, l) * artin_restrict(b, l)

    def test_restriction_composes(self):
        """r^{l,m} ∘ r^{k,l} = r^{k,m}."""
        ring = ArtinRing(s=1, k=3)
        a = ArtinSeries(ring, {(0,): 1, (1,): 2, (2,): 3, (3,): 4})
        assert a.restrict(2).restrict(1) == a.restrict(1)

    def test_restriction_up_is_refused(self):
        """Restricting to a higher order is an error."""
        a = ArtinSeries.one(ArtinRing(s=1, k=1))
        with pytest.raises(TruncationMismatchError):
            artin_restrict(a, 2)

    def test_inverse(self):
        """A unit times its inverse is one."""
        ring = ArtinRing(s=1, k=3)
        a = ArtinSeries(ring, {(0,): 2, (1,): 1, (3,): -1})
        assert a * a.inverse() == ArtinSeries.one(ring)

    def test_non_unit_has_no_inverse(self):
        """q is not invertible."""
        ring = ArtinRing(s=1, k=2)
        with pytest.raises(IncompatibleDataError):
            _q(ring).inverse()

    def test_order_and_weight_part(self):
        """order() is the smallest term weight."""
        ring = ArtinRing(s=2, k=2)
        a = ArtinSeries(ring, {(1, 0): 1, (1, 1): 4})
        assert a.order() == 1
        assert a.weight_part(2) == ArtinSeries(ring, {(1, 1): 4})
        assert ArtinSeries.zero(ring).order() is None

    def test_json_round_trip(self):
        """Series serialize to {"a,b": "p/q"} maps."""
        ring = ArtinRing(s=2, k=2)
        a = ArtinSeries(ring, {(0, 0): QQ(1, 2), (0, 1): -3})
        assert a.to_json() == {"0,0": "1/2", "0,1": "-3"}
        assert ArtinSeries.from_json(ring, a.to_json()) == a

    def test_from_json_checks_arity(self):
        """Monomial keys need one exponent per variable."""
        with pytest.raises(IncompatibleDataError):
            ArtinSeries.from_json(ArtinRing(s=2, k=1), {"1": "1"})

    def test_artin_arith_ops(self):
        """The operation dispatcher covers add, mul and scale."""
        ring = ArtinRing(s=1, k=2)
        q = _q(ring)
        assert artin_arith(q, q, "add") == q * 2
        assert artin_arith(q, q, "mul") == ArtinSeries.monomial(ring, (2,))
        assert artin_arith(q, "1/2", "scale") == _q(ring, QQ(1, 2))
        with pytest.raises(IncompatibleDataError):
            artin_arith(q, q, "div")


class TestTLaurent:
    """Laurent series in s = t^(1/2)."""

    def test_window_units(self):
        """The t-window [−W, T] is [−2W, 2T] in s-units."""
        series = TLaurent.window(ArtinRing(s=1, k=1), t_neg=1, t_cap=2)
        assert (series.low, series.high) == (-2, 4)

    def test_product_in_window(self):
        """s^{-1} · s^{3} = s^{2}."""
        ring = ArtinRing(s=1, k=1)
        base = TLaurent.window(ring, 1, 2)
        assert tlaurent_arith(base.monomial(-1), base.monomial(3), "mul") == base.monomial(2)

    def test_overflow_raises(self):
        """A product leaving the window is an error, never a silent truncation."""
        ring = ArtinRing(s=1, k=1)
        base = TLaurent.window(ring, 1, 1)
        with pytest.raises(WindowOverflowError):
            base.monomial(2) * base.monomial(1)

    def test_construction_outside_window_raises(self):
        """Coefficients outside the window are refused."""
        with pytest.raises(WindowOverflowError):
            TLaurent(ArtinRing(s=1, k=1), -1, 1, {3: 1})

    def test_euler_t(self):
        """t∂_t multiplies s^n by n/2."""
        ring = ArtinRing(s=1, k=1)
        base = TLaurent.window(ring, 1, 1)
        assert base.monomial(1).euler_t() == base.monomial(1, QQ(1, 2))

    def test_minus_t(self):
        """t ↦ −t flips odd t-powers and rejects half-integral ones."""
        ring = ArtinRing(s=1, k=1)
        base = TLaurent.window(ring, 1, 1)
        assert base.monomial(2).at_minus_t() == base.monomial(2, -1)
        assert base.monomial(-2).at_minus_t() == base.monomial(-2, -1)
        with pytest.raises(IncompatibleDataError):
            base.monomial(1).at_minus_t()
