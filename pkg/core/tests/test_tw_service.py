"""
test_tw_service.py — Tests for Thom-Whitney complexes over a cover nerve.

Covers validation of families, the componentwise operators and their signs,
the integration map, Whitney probe families, the simplex-by-simplex
∂̄-solver and the comparison of capped scalar complexes with simplicial
cochains.
"""

from __future__ import annotations

import pytest

from core.services.errors import IncompatibleDataError
from core.services.graded_service import ModuleElement, lie_derivative
from core.services.lie_service import bch
from core.services.linalg_service import cohomology_ranks
from core.services.nerve_service import build_nerve
from core.services.sullivan_service import Cell, SullivanForm, face_of_simplex, whitney_form
from core.services.tw_service import (
    TWElement,
    TWSpace,
    check_integration_chain_map,
    chart_space,
    form_probes,
    full_space,
    integration_map,
    quasi_iso_report,
    scalar_tw_complex,
    tw_primitive,
    tw_validate_build,
    whitney_element,
)


def _nerve(simplices, charts=("A",)):
    u_charts = sorted({u for s in simplices for u in s})
    return build_nerve(list(charts), u_charts, {u: [charts[0]] for u in u_charts}, simplices)


@pytest.fixture
def edge_space(euler_k2):
    return full_space(_nerve([["u0", "u1"]]), euler_k2)


@pytest.fixture
def triangle_space(euler_k2):
    return full_space(_nerve([["u0", "u1", "u2"]]), euler_k2)


@pytest.fixture
def circle_space(euler_k2):
    return full_space(_nerve([["u0", "u1"], ["u1", "u2"], ["u0", "u2"]]), euler_k2)


def _key(table, label):
    return (table.index(label), table.ring.zero_mono)


def _from_top(space, top, data):
    """A family determined by its component on the top simplex: {label: {form key: text}}."""
    table = space.table
    cell = space.cell(top)
    forms = {_key(table, label): SullivanForm.from_expressions(cell, text) for label, text in data.items()}
    comps = {}
    for simplex in space.support:
        positions = tuple(top.index(v) for v in simplex)
        comps[simplex] = {key: face_of_simplex(form, positions) for key, form in forms.items()}
    return tw_validate_build(space, comps)


def _on_edge(space, edge, label, form):
    """A family supported on one edge whose form vanishes on its vertices."""
    comps = {s: {} for s in space.support}
    comps[edge] = {_key(space.table, label): form}
    return tw_validate_build(space, comps)


class TestSpacesAndValidation:
    """TWSpace construction and tw_validate_build."""

    def test_holomorphic_table_required(self, eta_k2):
        with pytest.raises(IncompatibleDataError, match="holomorphic"):
            full_space(_nerve([["u0", "u1"]]), eta_k2)

    def test_support_must_be_face_closed(self, euler_k2):
        nerve = _nerve([["u0", "u1"]])
        with pytest.raises(IncompatibleDataError, match="closed under faces"):
            TWSpace(nerve, euler_k2, ((0,), (0, 1)))

    def test_single_chart_is_the_table(self, euler_k2):
        """On one U-chart a family is one table element with constant coefficients."""
        space = full_space(_nerve([["u0"]]), euler_k2)
        v = euler_k2.basis_element("x*xi")
        element = TWElement.constant(space, v)
        assert element.comps == {(0,): {_key(euler_k2, "x*xi"): SullivanForm.const(Cell(0), 1)}}
        assert integration_map(element, 0).value((0,)) == v

    def test_edge_restricts_to_both_vertices(self, edge_space):
        element = _from_top(edge_space, (0, 1), {"x": {"1": "x1"}})
        assert element.component((1,)) == {_key(edge_space.table, "x"): SullivanForm.const(Cell(0), 1)}
        assert element.component((0,)) == {}
        assert element.face_mismatch() is None

    def test_mismatched_faces(self, edge_space):
        """Face 0 of the edge is the vertex u1, which carries 0 here."""
        key = _key(edge_space.table, "x")
        raw = {(0,): {key: SullivanForm.const(Cell(0), 1)}, (1,): {}, (0, 1): {key: SullivanForm.const(Cell(1), 1)}}
        with pytest.raises(IncompatibleDataError, match=r"simplex \(0, 1\), face 0"):
            tw_validate_build(edge_space, raw)

    def test_missing_component(self, edge_space):
        with pytest.raises(IncompatibleDataError, match="No component"):
            tw_validate_build(edge_space, {(0,): {}, (1,): {}})

    def test_wrong_cell(self, edge_space):
        key = _key(edge_space.table, "x")
        raw = {(0,): {key: SullivanForm.const(Cell(1), 1)}, (1,): {}, (0, 1): {}}
        with pytest.raises(IncompatibleDataError, match="expected Δ0"):
            tw_validate_build(edge_space, raw)

    def test_chart_space(self, euler_k2):
        nerve = build_nerve(
            ["A", "B"], ["u0", "u1", "u2"], {"u0": ["A"], "u1": ["A", "B"], "u2": ["B"]},
            [["u0", "u1"], ["u1", "u2"]],
        )
        assert chart_space(nerve, euler_k2, [0, 1]).support == ((1,),)


class TestOperators:
    """Componentwise operators and their Koszul signs."""

    def test_pdb_of_closed_coefficient(self, edge_space):
        """∂̄ of 1⊗v vanishes."""
        element = TWElement.constant(edge_space, edge_space.table.basis_element("x"))
        assert element.pdb().is_zero()

    def test_pdb_is_d(self, edge_space):
        element = _from_top(edge_space, (0, 1), {"x*xi": {"1": "x1**2"}})
        expected = _on_edge(edge_space, (0, 1), "x*xi", SullivanForm.from_expressions(Cell(1), {"dx1": "2*x1"}))
        assert element.pdb() == expected

    def test_delta_sign_on_one_form(self, edge_space):
        """Δ(α⊗v) = −α⊗Δv when |α| = 1."""
        dx1 = SullivanForm.from_expressions(Cell(1), {"dx1": "1"})
        element = _on_edge(edge_space, (0, 1), "x*xi", dx1)
        assert element.delta() == -_on_edge(edge_space, (0, 1), "x", dx1)

    def test_delta_on_zero_form(self, edge_space):
        element = TWElement.constant(edge_space, edge_space.table.basis_element("x*xi"))
        assert element.delta() == TWElement.constant(edge_space, edge_space.table.basis_element("x"))

    @pytest.mark.parametrize("v_label, w_label", [("xi", "x"), ("x", "xi"), ("xi", "x*xi"), ("x*xi", "xi")])
    def test_bracket_sign(self, edge_space, v_label, w_label):
        """[1⊗v, dx1⊗w] = (−1)^{|v|+1} dx1⊗[v, w]."""
        table = edge_space.table
        v, w = table.basis_element(v_label), table.basis_element(w_label)
        dx1 = SullivanForm.from_expressions(Cell(1), {"dx1": "1"})
        left = TWElement.constant(edge_space, v)
        right = _on_edge(edge_space, (0, 1), w_label, dx1)
        expected_coeff = v.bracket(w).scale(-1 if table.degree(table.index(v_label)) % 2 == 0 else 1)
        expected = edge_space.zero()
        for key, c in expected_coeff.coords.items():
            expected = expected + _on_edge(edge_space, (0, 1), table.labels[key[0]], dx1.scale(c))
        assert left.bracket(right) == expected

    def test_wedge_sign(self, edge_space):
        """(1⊗ξ)(dx1⊗x) = −dx1⊗(ξx)."""
        table = edge_space.table
        dx1 = SullivanForm.from_expressions(Cell(1), {"dx1": "1"})
        left = TWElement.constant(edge_space, table.basis_element("xi"))
        right = _on_edge(edge_space, (0, 1), "x", dx1)
        product = table.basis_element("xi").wedge(table.basis_element("x"))
        assert product == table.basis_element("x*xi")
        assert left.wedge(right) == -_on_edge(edge_space, (0, 1), "x*xi", dx1)

    def test_pdb_anticommutes_with_delta(self, triangle_space):
        element = _from_top(triangle_space, (0, 1, 2), {"x*xi": {"1": "x1*x2", "dx1": "x2"}, "xi": {"dx2": "x0"}})
        assert (element.pdb().delta() + element.delta().pdb()).is_zero()
        assert element.delta().delta().is_zero()

    def test_pdb_is_a_derivation(self, triangle_space):
        a = _from_top(triangle_space, (0, 1, 2), {"x": {"1": "x1"}, "xi": {"dx1": "x2"}})
        b = _from_top(triangle_space, (0, 1, 2), {"xi": {"1": "x0*x2"}})
        lhs = a.wedge(b).pdb()
        # a has total degree 0
        even = a.bidegree_part(0, 0) + a.bidegree_part(-1, 1)
        assert even == a
        rhs = a.pdb().wedge(b) + a.wedge(b.pdb())
        assert lhs == rhs

    def test_results_stay_face_compatible(self, triangle_space):
        a = _from_top(triangle_space, (0, 1, 2), {"x*xi": {"1": "x1*x2"}, "xi": {"dx1": "x0"}})
        b = _from_top(triangle_space, (0, 1, 2), {"xi": {"1": "x2"}, "x": {"dx2": "x1"}})
        for result in (a.wedge(b), a.bracket(b), a.delta(), a.pdb()):
            assert result.face_mismatch() is None

    def test_contraction_and_lie_derivative_of_constants(self, edge_space, q_series):
        table = edge_space.table
        v = table.basis_element("xi").scale(q_series(table.ring))
        m = ModuleElement.basis(table, table.index("x"))
        tv = TWElement.constant(edge_space, v)
        tm = TWElement.constant(edge_space, m, module=True)
        assert tv.lie_derivative(tm) == TWElement.constant(edge_space, lie_derivative(v, m), module=True)

    def test_bch_on_constants(self, edge_space, q_series):
        """The exponential calculus applies to Thom-Whitney elements unchanged."""
        table = edge_space.table
        a = table.basis_element("xi").scale(q_series(table.ring))
        b = table.basis_element("x*xi").scale(q_series(table.ring))
        lhs = bch(TWElement.constant(edge_space, a), TWElement.constant(edge_space, b))
        assert lhs == TWElement.constant(edge_space, bch(a, b))

    def test_truncation(self, edge_space, q_series):
        table = edge_space.table
        v = table.basis_element("xi").scale(q_series(table.ring, 2)) + table.basis_element("x")
        element = TWElement.constant(edge_space, v)
        assert element.order() == 0
        assert element.truncate(1) == TWElement.constant(edge_space, table.basis_element("x"))
        assert element.restrict(1).table.ring.k == 1

    def test_different_spaces_refused(self, edge_space, triangle_space):
        a = TWElement.constant(edge_space, edge_space.table.one())
        b = TWElement.constant(triangle_space, triangle_space.table.one())
        with pytest.raises(IncompatibleDataError, match="different spaces"):
            a + b


class TestIntegration:
    """The integration map and its chain-map property."""

    def test_degree_zero_is_evaluation(self, edge_space):
        element = _from_top(edge_space, (0, 1), {"x": {"1": "2*x1 + 1"}})
        cochain = integration_map(element, 0)
        table = edge_space.table
        assert cochain.value((0,)) == table.basis_element("x")
        assert cochain.value((1,)) == table.basis_element("x").scale(3)

    def test_whitney_integrates_to_one(self, edge_space):
        element = _on_edge(edge_space, (0, 1), "xi", whitney_form(1, (0, 1)))
        assert integration_map(element, 1).value((0, 1)) == edge_space.table.basis_element("xi")

    def test_chain_map(self, triangle_space):
        element = _from_top(
            triangle_space, (0, 1, 2),
            {"x": {"1": "x1*x2 + x0", "dx1": "x2**2"}, "x*xi": {"dx1*dx2": "x1", "1": "x2"}},
        )
        assert check_integration_chain_map(element).passed

    def test_module_elements_refused(self, edge_space):
        m = ModuleElement.basis(edge_space.table, 0)
        with pytest.raises(IncompatibleDataError):
            integration_map(TWElement.constant(edge_space, m, module=True), 0)


class TestPrimitive:
    """tw_primitive solves ∂̄x = y."""

    def test_edge(self, edge_space):
        y = _on_edge(edge_space, (0, 1), "x", SullivanForm.from_expressions(Cell(1), {"dx1": "1"}))
        x = tw_primitive(y)
        assert x.pdb() == y
        assert x.face_mismatch() is None

    def test_exact_on_triangle(self, triangle_space):
        f = _from_top(triangle_space, (0, 1, 2), {"x": {"1": "x1*x2"}, "x*xi": {"dx1": "x2", "1": "x0**2"}})
        y = f.pdb()
        x = tw_primitive(y)
        assert x.pdb() == y

    def test_closed_one_form_on_circle_with_zero_class(self, circle_space):
        """Opposite Whitney forms on two edges integrate to a coboundary."""
        w = whitney_form(1, (0, 1))
        y = _on_edge(circle_space, (0, 1), "x", w) - _on_edge(circle_space, (1, 2), "x", w)
        x = tw_primitive(y)
        assert x.pdb() == y

    def test_non_coboundary(self, circle_space):
        """A Whitney form on one edge of a circle represents H¹ ≠ 0."""
        y = _on_edge(circle_space, (0, 1), "x", whitney_form(1, (0, 1)))
        with pytest.raises(IncompatibleDataError, match="not a Čech coboundary"):
            tw_primitive(y)

    def test_not_closed(self, triangle_space):
        y = _from_top(triangle_space, (0, 1, 2), {"x": {"dx2": "x1"}})
        with pytest.raises(IncompatibleDataError, match="closed"):
            tw_primitive(y)

    def test_zero_form_refused(self, edge_space):
        """A nonzero constant function is closed but has no primitive."""
        y = TWElement.constant(edge_space, edge_space.table.basis_element("x"))
        with pytest.raises(IncompatibleDataError, match="form degree 0"):
            tw_primitive(y)


class TestQuasiIsomorphism:
    """Capped scalar complexes against simplicial cochains."""

    @pytest.mark.parametrize(
        "simplices",
        [
            [["u0", "u1"]],
            [["u0", "u1"], ["u1", "u2"], ["u0", "u2"]],
            [["u0", "u1", "u2"]],
        ],
    )
    def test_scalar_ranks(self, simplices):
        report = quasi_iso_report(_nerve(simplices))
        assert report.passed, report.to_dict()

    def test_with_table(self, euler_k2):
        report = quasi_iso_report(_nerve([["u0", "u1"], ["u1", "u2"], ["u0", "u2"]]), euler_k2)
        assert report.passed, report.to_dict()
        names = [r.name for r in report.results]
        assert names == ["scalar", "column_-1", "column_0", "total"]

    def test_capped_complex_dimensions(self):
        """On a point the capped complex is Q in degree 0."""
        scalar = scalar_tw_complex(_nerve([["u0"]]), cap=2)
        assert scalar.complex.dims == {0: 1}

    def test_circle_has_one_class(self):
        scalar = scalar_tw_complex(_nerve([["u0", "u1"], ["u1", "u2"], ["u0", "u2"]]))
        assert cohomology_ranks(scalar.complex) == {0: 1, 1: 1}


class TestWhitneyElements:
    """ω_σ⊗v families and the probes built from them."""

    def test_vertex_form_is_compatible(self, edge_space):
        """ω_{u0} restricts to 1 on u0 and to 0 on u1."""
        v = edge_space.table.basis_element("x")
        element = whitney_element(edge_space, (0,), v)
        assert element.face_mismatch() is None
        assert element.component((0,)) == {_key(edge_space.table, "x"): SullivanForm.const(Cell(0), 1)}
        assert element.component((1,)) == {}

    def test_edge_form_vanishes_on_vertices(self, triangle_space):
        v = triangle_space.table.basis_element("xi")
        element = whitney_element(triangle_space, (0, 1), v)
        assert element.face_mismatch() is None
        assert element.component((0,)) == {}
        assert element.component((0, 1)) != {}
        assert element.component((0, 1, 2)) != {}

    def test_simplex_outside_support(self, edge_space):
        with pytest.raises(IncompatibleDataError, match="outside the support"):
            whitney_element(edge_space, (0, 2), edge_space.table.one())

    def test_probe_counts(self, edge_space, triangle_space):
        """Constants plus one probe per vertex and edge, for each element."""
        basis = [edge_space.table.basis_element(n) for n in range(edge_space.table.dimension)]
        assert len(form_probes(edge_space, basis)) == 4 * (1 + 3)
        assert len(form_probes(triangle_space, basis)) == 4 * (1 + 6)
        assert all(p.face_mismatch() is None for p in form_probes(triangle_space, basis))


def test_vertices_of_nerve_enumerated():
    nerve = _nerve([["u0", "u1", "u2"]])
    assert nerve.simplices_of_dim(0) == [(0,), (1,), (2,)]
