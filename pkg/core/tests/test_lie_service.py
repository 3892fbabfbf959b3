"""
test_lie_service.py — Tests for BCH products, ad-series, gauge actions and the
BV exponential identities.

The Euler model gives a non-abelian Lie algebra on its degree −1 part:
[xi, x*xi] = −x*xi, so nested brackets survive up to the ring order.
"""

from __future__ import annotations

import pytest
from sympy import QQ

from core.dtos import SeriesKind
from core.services.errors import NotNilpotentError
from core.services.graded_service import ModuleElement
from core.services.lie_service import (
    bch,
    bch_many,
    bv_exp_identity_check,
    gauge_act,
    series_apply,
    series_coefficient,
)
from core.services.polynomial_service import euler_model, eta_model, random_element
from core.services.scalars_service import ArtinRing


def _pdb(v):
    return v.pdb()


class TestSeries:
    """exp(ad), (exp(ad) − 1)/ad and T(ad)."""

    def test_coefficients(self):
        """T(x) = −1 + x/2 − x²/6 + …"""
        assert series_coefficient(SeriesKind.T, 0) == QQ(-1)
        assert series_coefficient(SeriesKind.T, 1) == QQ(1, 2)
        assert series_coefficient(SeriesKind.T, 2) == QQ(-1, 6)
        assert series_coefficient(SeriesKind.EXPM1_OVER_AD, 2) == QQ(1, 6)

    def test_t_on_abelian_pair(self, ring_k1, q_series):
        """At k = 1 every bracket of m-elements vanishes, so T(ad_a)(b) = −b."""
        table = euler_model(ring_k1)
        a = table.basis_element("xi").scale(q_series(ring_k1))
        b = table.basis_element("x*xi").scale(q_series(ring_k1))
        assert series_apply(SeriesKind.T, a, b) == -b
        assert series_apply(SeriesKind.EXP_AD, a, b) == b

    def test_expm1_depth_two(self, euler_k2, q_series):
        """(e^{ad_a} − 1)/ad_a (b) = b + ½[a, b] when [a, [a, b]] is truncated."""
        ring = euler_k2.ring
        a = euler_k2.basis_element("xi").scale(q_series(ring))
        b = euler_k2.basis_element("x*xi").scale(q_series(ring))
        expected = b + a.bracket(b).scale(QQ(1, 2))
        assert series_apply(SeriesKind.EXPM1_OVER_AD, a, b) == expected

    def test_non_nilpotent_refused(self, euler_k2):
        """A constant xi does not give a nilpotent ad."""
        with pytest.raises(NotNilpotentError):
            series_apply(SeriesKind.EXP_AD, euler_k2.basis_element("xi"), euler_k2.one())


class TestBch:
    """The truncated BCH product."""

    def test_second_order_term(self, euler_k2, q_series):
        """a⊙b = a + b + ½[a, b] when triple brackets vanish."""
        ring = euler_k2.ring
        a = euler_k2.basis_element("xi").scale(q_series(ring))
        b = euler_k2.basis_element("x*xi").scale(q_series(ring))
        assert bch(a, b) == a + b + a.bracket(b).scale(QQ(1, 2))
        # [q xi, q x*xi] = −q² x*xi
        assert a.bracket(b) == euler_k2.basis_element("x*xi").scale(q_series(ring, 2, -1))

    def test_inverse(self, euler_k2, q_series):
        """a⊙(−a) = 0."""
        a = (euler_k2.basis_element("xi") + euler_k2.basis_element("x*xi")).scale(q_series(euler_k2.ring))
        assert bch(a, -a).is_zero()

    def test_zero_is_identity(self, euler_k2, q_series):
        a = euler_k2.basis_element("xi").scale(q_series(euler_k2.ring))
        assert bch(a, euler_k2.zero()) == a
        assert bch(euler_k2.zero(), a) == a

    def test_associativity(self, rng, ring_k3):
        """(a⊙b)⊙c = a⊙(b⊙c) on a hundred random m-valued triples at k = 3."""
        table = euler_model(ring_k3)
        odd = table.indices_of_bidegree(-1, 0)
        for case in range(100):
            a, b, c = (random_element(rng, table, odd) for _ in range(3))
            assert bch(bch(a, b), c) == bch(a, bch(b, c)), case
            assert bch_many(a, b, c) == bch(bch(a, b), c), case
            assert bch(a, -a).is_zero(), case

    def test_matches_operator_composition(self, ring_k3, q_series):
        """exp(ad_a) exp(ad_b) = exp(ad_{a⊙b}) on every basis vector."""
        from core.services.lie_service import exp_ad

        table = euler_model(ring_k3)
        a = table.basis_element("xi").scale(q_series(ring_k3))
        b = (table.basis_element("x*xi") + table.basis_element("xi")).scale(q_series(ring_k3))
        c = bch(a, b)
        for label in table.labels:
            w = table.basis_element(label)
            assert exp_ad(a, exp_ad(b, w)) == exp_ad(c, w)

    def test_non_nilpotent_refused(self, euler_k2):
        with pytest.raises(NotNilpotentError):
            bch(euler_k2.basis_element("xi"), euler_k2.zero())


class TestGauge:
    """The gauge action exp(ϑ)⋆ξ."""

    def test_zero_gauge(self, eta_k2, q_series):
        """exp(0)⋆ξ = ξ."""
        xi = eta_k2.basis_element("x*xi*eta").scale(q_series(eta_k2.ring))
        assert gauge_act(eta_k2.zero(), xi, _pdb) == xi

    def test_abelian_collapses(self, q_series):
        """At k = 1, exp(ϑ)⋆ξ = ξ − ∂̄ϑ."""
        ring = ArtinRing(s=1, k=1)
        table = eta_model(ring)
        theta = table.basis_element("x*xi").scale(q_series(ring))
        xi = table.basis_element("x*xi*eta").scale(q_series(ring))
        assert gauge_act(theta, xi, _pdb) == xi - theta.pdb()

    def test_composition_law(self, rng, ring_k2):
        """exp(ϑ₁)⋆(exp(ϑ₂)⋆ξ) = exp(ϑ₁⊙ϑ₂)⋆ξ on a hundred random triples."""
        table = eta_model(ring_k2, lam=2, mu=1)
        odd = table.indices_of_bidegree(-1, 0)
        for case in range(100):
            theta1 = random_element(rng, table, odd)
            theta2 = random_element(rng, table, odd)
            xi = random_element(rng, table, table.indices_of_bidegree(-1, 1), nilpotent=False)
            lhs = gauge_act(theta1, gauge_act(theta2, xi, _pdb), _pdb)
            rhs = gauge_act(bch(theta1, theta2), xi, _pdb)
            assert lhs == rhs, case

    def test_inverse_without_differential(self, euler_k2, q_series):
        """With d = 0, exp(−ϑ) undoes exp(ϑ)."""
        theta = (euler_k2.basis_element("xi") + euler_k2.basis_element("x*xi")).scale(q_series(euler_k2.ring))
        xi = euler_k2.basis_element("x") + euler_k2.basis_element("x*xi")
        assert gauge_act(-theta, gauge_act(theta, xi)) == xi

    def test_non_nilpotent_refused(self, eta_k2):
        with pytest.raises(NotNilpotentError):
            gauge_act(eta_k2.basis_element("xi"), eta_k2.one(), _pdb)


class TestBvExponential:
    """exp([Δ, v∧])(1) = exp(Σ δ_v^k(Δv)/(k+1)!) and its contraction form."""

    def test_delta_closed_v(self, euler_k2, q_series):
        """Δv = 0 makes both sides 1."""
        v = euler_k2.basis_element("xi").scale(q_series(euler_k2.ring))
        report = bv_exp_identity_check(v, ModuleElement.volume(euler_k2))
        assert report.passed, report.failures()

    def test_nonabelian_v(self, euler_k2, q_series):
        """v = q(xi + x*xi) exercises δ_v on Δv = qx."""
        v = (euler_k2.basis_element("xi") + euler_k2.basis_element("x*xi")).scale(q_series(euler_k2.ring))
        report = bv_exp_identity_check(v, ModuleElement.volume(euler_k2))
        assert report.passed, report.failures()
        assert report.result("exp_d_v_on_volume").passed

    def test_random_v(self, rng, ring_k3):
        """A hundred random degree −1 elements on a two-coordinate model."""
        from core.services.polynomial_service import build_polynomial_table, with_relative_module

        table = with_relative_module(build_polynomial_table(ring_k3, n_x=2, degree_cap=2, n_xi=1, lam=[[1, 2]]))
        volume = ModuleElement.volume(table)
        for case in range(100):
            v = random_element(rng, table, table.indices_of_bidegree(-1, 0))
            report = bv_exp_identity_check(v, volume)
            assert report.passed, (case, report.failures())

    def test_wrong_degree_reported(self, euler_k2, q_series):
        """A degree 0 element is reported, not silently skipped."""
        v = euler_k2.basis_element("x").scale(q_series(euler_k2.ring))
        report = bv_exp_identity_check(v)
        assert not report.passed
        assert report.result("v_degree_minus_one").witness == "degrees [0]"
