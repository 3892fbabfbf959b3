"""
test_polynomial_service.py — Tests for the polynomial presentation builder.
"""

from __future__ import annotations

import pytest

from core.services.errors import IncompatibleDataError
from core.services.graded_service import Element
from core.services.polynomial_service import (
    build_polynomial_table,
    euler_model,
    eta_model,
    planted_almost_table,
    random_element,
    twist_table,
    with_absolute_module,
)
from core.services.scalars_service import ArtinRing, ArtinSeries


class TestBuilder:
    """Basis layout and structure maps."""

    def test_euler_basis(self, ring_k1):
        """The Euler model has basis {1, x, xi, x*xi} in that order."""
        table = euler_model(ring_k1)
        assert table.labels == ("1", "x", "xi", "x*xi")
        assert table.bidegrees == ((0, 0), (0, 0), (-1, 0), (-1, 0))
        assert table.unit == 0

    def test_delta_is_lambda_euler(self, ring_k2, q_series):
        """Δ(x*xi) = λx."""
        lam = ArtinSeries.const(ring_k2, 2) + q_series(ring_k2)
        table = euler_model(ring_k2, lam=lam)
        assert table.basis_element("x*xi").delta() == table.basis_element("x").scale(lam)
        assert table.basis_element("xi").delta().is_zero()

    def test_pdb_on_eta_model(self, eta_k2):
        """∂̄x = μ x*eta and ∂̄ kills constants."""
        assert eta_k2.basis_element("x").pdb() == eta_k2.basis_element("x*eta")
        assert eta_k2.one().pdb().is_zero()

    def test_two_coordinates(self, ring_k1):
        """Two x's with cap 2 give six monomials per odd sector."""
        table = build_polynomial_table(ring_k1, n_x=2, degree_cap=2, n_xi=1)
        assert len(table.indices_of_bidegree(0, 0)) == 6
        assert "x1*x2*xi" in table.labels
        assert "x1^2" in table.labels

    def test_shape_mismatch(self, ring_k1):
        """λ must be n_xi × n_x."""
        with pytest.raises(IncompatibleDataError):
            build_polynomial_table(ring_k1, n_x=2, n_xi=1, lam=[[1]])

    def test_series_ring_mismatch(self, ring_k1):
        """Coefficients over another ring are refused."""
        other = ArtinSeries.one(ArtinRing(s=1, k=2))
        with pytest.raises(IncompatibleDataError):
            euler_model(ring_k1, lam=other)


class TestTwist:
    """Planted twists and almost dgBV tables."""

    def test_twist_adds_bracket(self, eta_k2, q_series):
        """The twisted ∂̄ is ∂̄ + [𝔡, ·]."""
        d = Element.from_series(eta_k2, {"x*xi*eta": q_series(eta_k2.ring)})
        twisted = twist_table(eta_k2, d)
        x = eta_k2.basis_element("x")
        expected = x.pdb() + d.bracket(x)
        got = twisted.basis_element("x").pdb()
        assert got.coords == expected.coords

    def test_twist_element_must_belong(self, eta_k2, ring_k2):
        with pytest.raises(IncompatibleDataError):
            twist_table(eta_k2, euler_model(ring_k2).one())

    def test_planted_curvature(self):
        """∂̄'² is nonzero at order one and vanishes modulo m."""
        table, twist = planted_almost_table(ArtinRing(s=1, k=1))
        x = table.basis_element("x")
        square = x.pdb().pdb()
        assert not square.is_zero()
        assert square.order() == 1
        assert twist.order() == 1

    def test_planted_needs_q(self):
        with pytest.raises(IncompatibleDataError):
            planted_almost_table(ArtinRing(s=0, k=1, params=("u",)))


class TestModulesAndRandom:
    """Module parts and random helpers."""

    def test_absolute_module_size(self, ring_k1):
        """Λ(dlog q_1) doubles the module."""
        table = with_absolute_module(euler_model(ring_k1))
        assert table.module.dimension == 2 * table.dimension
        assert "dlog_q1" in table.module.base_forms
        assert table.module.labels[table.module.volume] == "w[1]"

    def test_random_element_is_nilpotent(self, rng, eta_k2):
        """Nilpotent random elements have no constant terms."""
        v = random_element(rng, eta_k2, eta_k2.indices_of_bidegree(-1, 0))
        assert v.order() is None or v.order() >= 1
        assert v.degrees() <= {-1}
