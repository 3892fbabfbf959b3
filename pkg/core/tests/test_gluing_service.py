"""
test_gluing_service.py — Tests for patching data, the gluing solver and comparison cocycles.

The twisted instance is solved at order 1 in the fast tests; the full order
runs carry the integration marker.
"""

from __future__ import annotations

import pytest

from core.services.errors import IncompatibleDataError, InstanceError
from core.services.gluing_service import (
    build_patching,
    check_order_compatibility,
    compute_comparison_cocycles,
    compute_ledger,
    solve_gluing,
    solve_homotopy,
    validate_patching,
    verify_gluing,
)
from core.services.graded_service import Element
from core.services.scalars_service import ArtinSeries


@pytest.fixture(scope="module")
def twisted_k1(twisted_instance):
    return twisted_instance.patching.restrict(1)


@pytest.fixture(scope="module")
def twisted_system_k1(twisted_k1):
    return solve_gluing(twisted_k1)


def _chart(patching, label):
    return patching.nerve.v_charts.index(label)


class TestPatchingData:
    """Shape checks, the ledger and the exact relations."""

    def test_undeclared_exponents_default_to_minus_reverse(self, twisted_k1):
        """ε_βα,i = −ε_αβ,i and ε_αα,i = 0."""
        a, b = _chart(twisted_k1, "A"), _chart(twisted_k1, "B")
        u1 = twisted_k1.nerve.u_charts.index("u1")
        assert twisted_k1.epsilon(b, a, u1) == -twisted_k1.epsilon(a, b, u1)
        assert twisted_k1.epsilon(a, a, u1).is_zero()

    def test_exponent_to_itself_rejected(self, twisted_k1):
        """An exponent from a chart to itself is a schema error."""
        x = twisted_k1.table.basis_element("xi")
        with pytest.raises(InstanceError, match="itself"):
            build_patching(twisted_k1.nerve, twisted_k1.table, {(0, 0, 0): x})

    def test_exponent_outside_overlap_rejected(self, twisted_k1):
        """u1 is not inside V_A ∩ V_C."""
        nerve = twisted_k1.nerve
        a, c = _chart(twisted_k1, "A"), _chart(twisted_k1, "C")
        u1 = nerve.u_charts.index("u1")
        with pytest.raises(InstanceError, match="outside"):
            build_patching(nerve, twisted_k1.table, {(a, c, u1): twisted_k1.table.zero()})

    def test_twisted_patching_validates(self, twisted_k1):
        """Every defining relation holds exactly and the ledger is unique."""
        report = validate_patching(twisted_k1)
        assert report.passed, report.failures()
        assert report.result("ledger_unique").passed

    def test_twisted_ledger_is_nonzero(self, twisted_k1):
        """Overlap, cocycle and BV ledgers all carry nonzero entries."""
        ledger = compute_ledger(twisted_k1)
        assert any(not e.is_zero() for e in ledger.overlap.values())
        assert any(not e.is_zero() for e in ledger.cocycle.values())
        assert any(not e.is_zero() for e in ledger.bv.values())

    def test_cocycle_ledger_at_order_one(self, twisted_k1):
        """To first order 𝔬_ABC = ε_CA + ε_BC + ε_AB = 2q·xi on u3."""
        a, b, c = (_chart(twisted_k1, v) for v in "ABC")
        u3 = twisted_k1.nerve.u_charts.index("u3")
        table = twisted_k1.table
        q = ArtinSeries.monomial(table.ring, (1,), 2)
        assert compute_ledger(twisted_k1).cocycle[(a, b, c, u3)] == Element.from_series(table, {"xi": q})

    def test_constant_exponent_not_nilpotent(self, twisted_k1):
        """Exponents must lie in the maximal ideal."""
        nerve, table = twisted_k1.nerve, twisted_k1.table
        p = build_patching(nerve, table, {(0, 1, 0): table.basis_element("xi")})
        report = validate_patching(p)
        assert not report.result("exponents_nilpotent").passed

    def test_wrong_bidegree_rejected(self, twisted_k1, q_series):
        """Exponents live in G^{−1,0}."""
        nerve, table = twisted_k1.nerve, twisted_k1.table
        x = Element.from_series(table, {"x": q_series(table.ring)})
        report = validate_patching(build_patching(nerve, table, {(0, 1, 0): x}))
        assert not report.result("exponents_bidegree").passed


class TestSolveGluing:
    """Compatible gluing morphisms."""

    def test_trivial_patching_gives_identities(self, trivial_instance):
        """Identity patchings are glued by G = 0."""
        system = solve_gluing(trivial_instance.patching)
        assert all(G.is_zero() for G in system.exponents.values())

    def test_twisted_order_one(self, twisted_system_k1):
        """The solve passes its own verification: faces, vertex values and cocycles."""
        report = verify_gluing(twisted_system_k1)
        assert report.passed, report.failures()
        assert any(not G.is_zero() for G in twisted_system_k1.exponents.values())

    def test_antisymmetry(self, twisted_system_k1):
        """G_βα = −G_αβ."""
        assert twisted_system_k1.exponent(1, 0) == -twisted_system_k1.exponent(0, 1)

    def test_trivial_cocycles_vanish(self, trivial_instance):
        """Identity gluing has w = f = 0."""
        cocycles = compute_comparison_cocycles(solve_gluing(trivial_instance.patching))
        assert cocycles.report.passed
        assert all(v.is_zero() for v in cocycles.w.values())
        assert all(v.is_zero() for v in cocycles.f.values())

    def test_twisted_cocycles_closed(self, twisted_system_k1):
        """w and f are twisted-closed and reproduce the operator identities."""
        cocycles = compute_comparison_cocycles(twisted_system_k1)
        assert cocycles.report.passed, cocycles.report.failures()
        assert any(not v.is_zero() for v in cocycles.f.values())

    def test_operator_identities_on_form_probes(self, twisted_system_k1):
        """e^{−ad G}∘∂̄∘e^{ad G} = ∂̄ + [w, ·] on constants and Whitney probes, likewise for Δ and f."""
        report = compute_comparison_cocycles(twisted_system_k1).report
        assert report.result("w_operator_identity").passed
        assert report.result("f_operator_identity").passed

    def test_homotopy_rejects_foreign_endpoints(self, twisted_system_k1, trivial_instance):
        """Endpoints must solve the same patching data."""
        other = solve_gluing(trivial_instance.patching)
        with pytest.raises(IncompatibleDataError):
            solve_homotopy(twisted_system_k1, other)


@pytest.mark.integration
class TestFullOrderGluing:
    """The twisted instance at its full order."""

    def test_order_compatibility(self, twisted_instance):
        """Truncating the top solution reproduces every lower-order solve."""
        system = solve_gluing(twisted_instance.patching.restrict(2))
        report = check_order_compatibility(system)
        assert report.passed, report.failures()

    def test_homotopy_between_contraction_orders(self, twisted_k1, twisted_system_k1):
        """The two contraction orders are joined by a prism family."""
        reverse = solve_gluing(twisted_k1, reverse=True)
        homotopy = solve_homotopy(twisted_system_k1, reverse)
        assert homotopy.prism
        for pair, G in twisted_system_k1.exponents.items():
            assert homotopy.end(0).exponents[pair] == G
        for pair, G in reverse.exponents.items():
            assert homotopy.end(1).exponents[pair] == G
