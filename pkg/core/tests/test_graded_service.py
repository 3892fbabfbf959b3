"""
test_graded_service.py — Tests for tabulated graded algebras.

Covers element arithmetic, the bracket induced by Δ, the axiom suites (BV,
dgLa, dgBV, almost dgBV, de Rham module), cohomology of table operators and
the table JSON schema.
"""

from __future__ import annotations

import pytest
from sympy import QQ

from core.dtos import AxiomKind
from core.services.errors import IncompatibleDataError, TruncationMismatchError
from core.services.graded_service import (
    Element,
    ModuleElement,
    ad_injectivity_rank,
    check_axioms,
    cohomology_basis,
    contract,
    evaluate,
    lie_derivative,
    table_from_json,
    table_to_json,
)
from core.services.polynomial_service import (
    euler_model,
    planted_almost_table,
    random_table,
    with_absolute_module,
)
from core.services.scalars_service import ArtinRing, ArtinSeries


class TestElements:
    """Element arithmetic on the Euler model."""

    def test_bracket_xi_x(self, euler_k2):
        """[xi, x] = −λx."""
        xi = euler_k2.basis_element("xi")
        x = euler_k2.basis_element("x")
        assert xi.bracket(x) == -x

    def test_bracket_scales_with_lambda(self, ring_k2, q_series):
        """With λ = 1 + q the bracket picks up the series."""
        lam = ArtinSeries.one(ring_k2) + q_series(ring_k2)
        table = euler_model(ring_k2, lam=lam)
        xi, x = table.basis_element("xi"), table.basis_element("x")
        assert xi.bracket(x) == x.scale(-lam)

    def test_product_sign(self, euler_k2):
        """xi·x = x·xi and x·x = 0 under the degree cap."""
        xi = euler_k2.basis_element("xi")
        x = euler_k2.basis_element("x")
        assert xi.wedge(x) == euler_k2.basis_element("x*xi")
        assert x.wedge(x).is_zero()

    def test_truncation_by_order(self, euler_k2, q_series, ring_k2):
        """Products of order-2 coefficients vanish at k = 2."""
        a = euler_k2.basis_element("xi").scale(q_series(ring_k2, 2))
        b = euler_k2.basis_element("x").scale(q_series(ring_k2, 1))
        assert a.wedge(b).is_zero()
        assert a.order() == 2

    def test_restrict(self, euler_k2, ring_k2, q_series):
        """restrict(l) drops weights above l and moves to the smaller ring."""
        v = Element.from_series(euler_k2, {"x": ArtinSeries.one(ring_k2) + q_series(ring_k2, 2)})
        low = v.restrict(1)
        assert low.table.ring.k == 1
        assert low.series("x") == ArtinSeries.one(low.table.ring)
        with pytest.raises(TruncationMismatchError):
            v.restrict(3)

    def test_tables_do_not_mix(self, euler_k2, ring_k2):
        """Elements of different tables cannot be added."""
        other = euler_model(ring_k2)
        with pytest.raises(IncompatibleDataError):
            euler_k2.one() + other.one()

    def test_bidegree_part(self, eta_k2):
        """bidegree_part keeps only the requested (p, q)."""
        v = eta_k2.basis_element("x") + eta_k2.basis_element("x*eta")
        assert v.bidegree_part(0, 1) == eta_k2.basis_element("x*eta")


class TestEvaluate:
    """Nested expression evaluation."""

    def test_bracket_expression(self, euler_k2):
        """("bracket", xi, x) evaluates to −x."""
        xi = euler_k2.basis_element("xi")
        x = euler_k2.basis_element("x")
        assert evaluate(("bracket", xi, x)) == -x

    def test_sum_of_mixed_degrees_refused(self, euler_k2):
        """Adding homogeneous elements of different degrees is an error."""
        with pytest.raises(IncompatibleDataError, match="degrees"):
            evaluate(("add", euler_k2.basis_element("xi"), euler_k2.basis_element("x")))

    def test_unknown_node(self, euler_k2):
        """Unknown heads are reported."""
        with pytest.raises(IncompatibleDataError):
            evaluate(("cube", euler_k2.one()))

    def test_contract_and_lie(self, euler_k2):
        """On K = A, x⌟ω = w[x] and 𝓛_xi(w[x]) = [xi, x] − (Δxi)x."""
        vol = ModuleElement.volume(euler_k2)
        x = euler_k2.basis_element("x")
        xi = euler_k2.basis_element("xi")
        wx = contract(x, vol)
        assert wx.render() == "(1)*w[x]"
        expected = contract(xi.bracket(x) - xi.delta().wedge(x), vol)
        assert lie_derivative(xi, wx) == expected
        assert evaluate(("lie", xi, ("contract", x, vol))) == expected


class TestAxioms:
    """The brute-force axiom suites."""

    def test_euler_model_is_dgbv(self, euler_k2):
        """The Euler model passes every dgBV identity."""
        report = check_axioms(euler_k2, AxiomKind.DGBV)
        assert report.passed, report.failures()

    def test_eta_model_is_dgla(self, eta_k2):
        """With ∂̄ ≠ 0 the induced bracket is still a dgLa."""
        assert check_axioms(eta_k2, AxiomKind.DGLA).passed

    def test_random_tables_are_dgbv(self, rng, ring_k1):
        """A hundred seeded random polynomial tables satisfy the BV and dgBV axioms."""
        for case in range(100):
            table = random_table(rng, ring_k1)
            for kind in (AxiomKind.BV, AxiomKind.DGBV):
                report = check_axioms(table, kind)
                assert report.passed, (case, kind, report.failures())

    def test_planted_table_is_only_almost(self):
        """The planted twist fails ∂̄² = 0 exactly but passes it modulo m."""
        table, _ = planted_almost_table(ArtinRing(s=1, k=1))
        strict = check_axioms(table, AxiomKind.DGBV)
        assert not strict.passed
        square = strict.result("pdb_square")
        assert not square.passed
        assert square.witness
        almost = check_axioms(table, AxiomKind.ALMOST_DGBV)
        assert almost.passed, almost.failures()

    def test_broken_product_gives_witness(self, ring_k1):
        """A product with the wrong Koszul sign fails commutativity with a witness."""
        from core.services.graded_service import AlgebraTable

        base = euler_model(ring_k1)
        zero = ring_k1.zero_mono
        x, xi, xxi = base.index("x"), base.index("xi"), base.index("x*xi")
        product = dict(base.product)
        product[(xi, x)] = ((xxi, zero, QQ(-1)),)
        broken = AlgebraTable(
            ring=ring_k1, labels=base.labels, bidegrees=base.bidegrees, unit=base.unit,
            product=product, pdb=base.pdb, delta=base.delta, name="broken",
        )
        report = check_axioms(broken, AxiomKind.BV)
        result = report.result("graded_commutativity")
        assert not result.passed
        assert result.witness.startswith("(x,xi)")

    def test_relative_module(self, euler_k2):
        """K = A is a de Rham module."""
        report = check_axioms(euler_k2, AxiomKind.DE_RHAM_MODULE)
        assert report.passed, report.failures()

    def test_absolute_module(self, ring_k1):
        """Λ(dlog q) ⊗ A is a de Rham module and dlog q commutes with contractions."""
        table = with_absolute_module(euler_model(ring_k1))
        report = check_axioms(table, AxiomKind.DE_RHAM_MODULE)
        assert report.passed, report.failures()
        assert report.result("base_form_commute[dlog_q1]").passed

    def test_missing_tensor(self, euler_k2):
        """Asking for module axioms without a module part is an input error."""
        with pytest.raises(IncompatibleDataError):
            check_axioms(euler_model(euler_k2.ring), AxiomKind.DE_RHAM_MODULE)

    def test_unknown_kind(self, euler_k2):
        with pytest.raises(IncompatibleDataError):
            check_axioms(euler_k2, "lie_bialgebra")


class TestCohomology:
    """Cohomology of table operators."""

    def test_delta_cohomology_at_order_zero(self):
        """Δ(x*xi) = x leaves H^{-1} = <xi> and H^0 = <1>."""
        table = euler_model(ArtinRing(s=1, k=0))
        coh = cohomology_basis(table, op="delta")
        assert coh.ranks() == {-1: 1, 0: 1}
        assert coh.representatives(-1) == [table.basis_element("xi")]

    def test_zero_operator(self):
        """∂̄ = 0 keeps the whole table."""
        table = euler_model(ArtinRing(s=1, k=0))
        assert cohomology_basis(table, op="pdb").ranks() == {-1: 2, 0: 2}

    def test_ranks_by_weight_with_constant_lambda(self, ring_k1):
        """λ = 1: every weight slice carries H^{-1} = <xi> and H^0 = <1>."""
        coh = cohomology_basis(euler_model(ring_k1), op="delta")
        assert coh.ranks_by_weight() == {-1: {0: 1, 1: 1}, 0: {0: 1, 1: 1}}

    def test_ranks_by_weight_with_nilpotent_lambda(self, ring_k1, q_series):
        """λ = q only raises weight, so each slice keeps the whole table."""
        coh = cohomology_basis(euler_model(ring_k1, lam=q_series(ring_k1)), op="delta")
        assert coh.ranks_by_weight() == {-1: {0: 2, 1: 2}, 0: {0: 2, 1: 2}}
        assert coh.ranks() == {-1: 3, 0: 3}

    def test_restricted_degrees_report_no_weights(self, ring_k1):
        assert cohomology_basis(euler_model(ring_k1), op="delta", degrees=[0]).ranks_by_weight() == {}

    def test_ad_injectivity(self, euler_k2):
        """ad_xi is injective on <xi>; ad vanishes on the unit."""
        assert ad_injectivity_rank(euler_k2, [euler_k2.index("xi")]) == (1, 1)
        assert ad_injectivity_rank(euler_k2, [euler_k2.unit]) == (0, 1)


class TestSerialization:
    """The table JSON schema."""

    def test_round_trip_preserves_brackets(self, euler_k2):
        """A serialized table induces the same bracket."""
        restored = table_from_json(euler_k2.ring, table_to_json(euler_k2))
        assert restored.labels == euler_k2.labels
        xi, x = restored.basis_element("xi"), restored.basis_element("x")
        assert xi.bracket(x) == -x

    def test_malformed_document(self, ring_k1):
        with pytest.raises(IncompatibleDataError, match="Malformed"):
            table_from_json(ring_k1, {"basis": [["1", 0, 0]]})

    def test_over_pads_parameters(self, ring_k1):
        """Moving a table to a ring with an extra parameter pads monomials."""
        table = euler_model(ring_k1)
        wider = ArtinRing(s=1, k=1, params=("u",))
        moved = table.over(wider)
        assert moved.ring == wider
        xi, x = moved.basis_element("xi"), moved.basis_element("x")
        assert xi.bracket(x) == -x
        assert table.over(wider) is moved
