"""
test_nerve_service.py — Tests for cover nerves and Čech cochains.

Covers nerve assembly and validation, index sets, the V-nerve, the simplicial
cochain complex and the point Čech contraction.
"""

from __future__ import annotations

import pytest

from core.services.errors import IncompatibleDataError, InstanceError
from core.services.linalg_service import cohomology_ranks
from core.services.nerve_service import (
    CechCochain,
    build_nerve,
    cech_coboundary,
    point_cech_contract,
    simplex_faces,
    simplicial_complex,
)


def _chain_nerve():
    """u0 ⊂ A, u1 ⊂ A∩B, u2 ⊂ B with edges u0u1 and u1u2."""
    return build_nerve(
        ["A", "B"],
        ["u0", "u1", "u2"],
        {"u0": ["A"], "u1": ["A", "B"], "u2": ["B"]},
        [["u0", "u1"], ["u1", "u2"]],
    )


def _triangle(filled: bool):
    simplices = [["u0", "u1", "u2"]] if filled else [["u0", "u1"], ["u1", "u2"], ["u0", "u2"]]
    return build_nerve(["A"], ["u0", "u1", "u2"], {u: ["A"] for u in ("u0", "u1", "u2")}, simplices)


class TestBuildNerve:
    """Assembly and validation of CoverNerve."""

    def test_faces_are_added(self):
        nerve = _triangle(filled=True)
        assert nerve.u_simplices == ((0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2))
        assert nerve.dimension == 2

    def test_simplex_faces(self):
        assert simplex_faces((0, 1, 2)) == [(0, (1, 2)), (1, (0, 2)), (2, (0, 1))]
        assert simplex_faces((3,)) == []

    def test_index_sets(self):
        nerve = _chain_nerve()
        assert nerve.index_set((1,)) == (0, 1)
        assert nerve.index_set((0, 1)) == (0,)
        assert nerve.index_set((1, 2)) == (1,)

    def test_simplices_in_overlap(self):
        """Only u1 lies in A ∩ B."""
        nerve = _chain_nerve()
        assert nerve.simplices_in([0, 1]) == ((1,),)
        assert nerve.simplices_in([0]) == ((0,), (1,), (0, 1))

    def test_v_simplices(self):
        nerve = _chain_nerve()
        assert nerve.v_simplices == ((0,), (1,), (0, 1))
        assert nerve.v_label((0, 1)) == "[A][B]"
        assert nerve.label((0, 1)) == "[u0][u1]"

    @pytest.mark.parametrize(
        "v_charts, u_charts, containment, simplices, match",
        [
            (["A", "A"], ["u0"], {"u0": ["A"]}, [], "distinct"),
            (["A"], ["u0"], {"u0": ["A"], "u9": ["A"]}, [], "unknown U-chart"),
            (["A"], ["u0"], {}, [], "no containing V-chart"),
            (["A"], ["u0"], {"u0": ["Z"]}, [], "unknown V-chart"),
            (["A"], ["u0"], {"u0": ["A"]}, [["u0", "u7"]], "unknown U-chart"),
            (["A"], ["u0"], {"u0": ["A"]}, [["u0", "u0"]], "repeats a vertex"),
        ],
    )
    def test_invalid_instances(self, v_charts, u_charts, containment, simplices, match):
        with pytest.raises(InstanceError, match=match):
            build_nerve(v_charts, u_charts, containment, simplices)


class TestSimplicialComplex:
    """Rational cochains of the U-nerve."""

    def test_circle(self):
        """The boundary of a triangle has H⁰ = H¹ = Q."""
        complex_, basis = simplicial_complex(_triangle(filled=False))
        assert basis[1] == [(0, 1), (0, 2), (1, 2)]
        assert cohomology_ranks(complex_) == {0: 1, 1: 1}

    def test_filled_triangle(self):
        complex_, _ = simplicial_complex(_triangle(filled=True))
        assert cohomology_ranks(complex_) == {0: 1, 1: 0, 2: 0}

    def test_square_zero(self):
        complex_, _ = simplicial_complex(_triangle(filled=True))
        assert complex_.check_square_zero() is None


class TestCechCochain:
    """Table-valued cochains on the U-nerve."""

    def test_coboundary_of_constant_vanishes(self, euler_k2):
        nerve = _triangle(filled=True)
        x = euler_k2.basis_element("x")
        cochain = CechCochain(euler_k2, 0, {(0,): x, (1,): x, (2,): x})
        assert cochain.coboundary(nerve.u_simplices).is_zero()

    def test_coboundary_signs(self, euler_k2):
        """(δc)_{01} = c_1 − c_0."""
        nerve = _chain_nerve()
        x = euler_k2.basis_element("x")
        cochain = CechCochain(euler_k2, 0, {(1,): x})
        image = cochain.coboundary(nerve.u_simplices)
        assert image.value((0, 1)) == x
        assert image.value((1, 2)) == -x
        assert "(0, 1)" in image.render()


class TestPointContraction:
    """The cone contraction on the full simplex over an index set."""

    def test_two_indices(self, euler_k2):
        """|I| = 2: b_1 = c_01 and δb = c."""
        zero = euler_k2.zero()
        c = {(0, 1): euler_k2.basis_element("x*xi")}
        b = point_cech_contract(c, [0, 1], 1, zero)
        assert b == {(1,): c[(0, 1)]}
        assert cech_coboundary(b, [0, 1], 0, zero) == c

    def test_coboundary_input(self, euler_k2):
        """c = δa for a degree 1 cochain a; the returned b need not be a."""
        zero = euler_k2.zero()
        x, xi = euler_k2.basis_element("x"), euler_k2.basis_element("xi")
        a = {(0, 1): x, (1, 2): xi, (0, 2): x + xi}
        c = cech_coboundary(a, [0, 1, 2], 1, zero)
        b = point_cech_contract(c, [0, 1, 2], 2, zero)
        assert cech_coboundary(b, [0, 1, 2], 1, zero) == c

    def test_degree_one_on_three_indices(self, euler_k2):
        zero = euler_k2.zero()
        x = euler_k2.basis_element("x")
        a = {(0,): x, (2,): x.scale(3)}
        c = cech_coboundary(a, [0, 1, 2], 0, zero)
        b = point_cech_contract(c, [0, 1, 2], 1, zero)
        assert cech_coboundary(b, [0, 1, 2], 0, zero) == c

    def test_other_apex(self, euler_k2):
        zero = euler_k2.zero()
        x = euler_k2.basis_element("x")
        c = cech_coboundary({(0,): x}, [0, 1, 2], 0, zero)
        b = point_cech_contract(c, [0, 1, 2], 1, zero, apex=2)
        assert set(b) <= {(0,), (1,)}
        assert cech_coboundary(b, [0, 1, 2], 0, zero) == c

    def test_not_closed(self, euler_k2):
        """The failing triple is named."""
        c = {(0, 1): euler_k2.basis_element("x")}
        with pytest.raises(IncompatibleDataError, match=r"not closed at \(0, 1, 2\)"):
            point_cech_contract(c, [0, 1, 2], 1, euler_k2.zero())

    def test_degree_zero_refused(self, euler_k2):
        with pytest.raises(IncompatibleDataError, match="degree >= 1"):
            point_cech_contract({}, [0, 1], 0, euler_k2.zero())
