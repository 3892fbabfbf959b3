"""
test_twist_service.py — Tests for the global operators built from a gluing solution.
"""

from __future__ import annotations

import pytest

from core.services.gauss_manin_service import build_de_rham_system
from core.services.gluing_service import compute_comparison_cocycles, solve_gluing
from core.services.mc_service import chart_acyclicity, extract_geometric_gluing
from core.services.twist_service import solve_global_operators, twist_ambiguity


@pytest.fixture(scope="module")
def trivial_solution(trivial_instance):
    system = solve_gluing(trivial_instance.patching)
    cocycles = compute_comparison_cocycles(system)
    return system, cocycles, solve_global_operators(system, cocycles)


@pytest.fixture(scope="module")
def twisted_solution(twisted_instance):
    system = solve_gluing(twisted_instance.patching.restrict(1))
    cocycles = compute_comparison_cocycles(system)
    return system, cocycles, solve_global_operators(system, cocycles)


class TestTrivialOperators:
    """Identity gluing gives the local operators back."""

    def test_twist_is_trivial(self, trivial_solution):
        """𝔡 = 𝔣 = 0 and 𝔩 = 𝔶 = 0."""
        _, _, twist = trivial_solution
        assert twist.is_trivial()
        assert all(v.is_zero() for v in twist.curvature.values())
        assert all(v.is_zero() for v in twist.mixed.values())

    def test_report_passes(self, trivial_solution):
        _, _, twist = trivial_solution
        assert twist.report.passed, twist.report.failures()

    def test_volume_glues(self, trivial_solution):
        """The absolute module gives a volume form per chart."""
        system, _, twist = trivial_solution
        assert set(twist.volumes) == set(range(len(system.nerve.v_charts)))
        assert twist.report.result("volume_glues").passed

    def test_geometric_gluing_is_identity(self, trivial_solution):
        """Gauge elements and holomorphic exponents vanish."""
        _, _, twist = trivial_solution
        gluing = extract_geometric_gluing(twist)
        assert gluing.report.passed
        assert all(x.is_zero() for x in gluing.exponents.values())


class TestTwistedOperators:
    """The twisted instance at order 1."""

    def test_identities_hold(self, twisted_solution):
        """Δ² = 0, ∂̄² = [𝔩, ·] and the gluing relations of 𝔡 and 𝔣."""
        _, _, twist = twisted_solution
        assert twist.report.passed, twist.report.failures()

    def test_twisting_elements_nonzero(self, twisted_solution):
        """Nontrivial patchings force nonzero 𝔡 and 𝔣."""
        _, _, twist = twisted_solution
        assert not twist.is_trivial()
        assert any(not v.is_zero() for v in twist.f.values())

    def test_curvature_vanishes_mod_m(self, twisted_solution):
        """𝔩 ≡ 0 modulo 𝔪."""
        _, _, twist = twisted_solution
        for value in twist.curvature.values():
            assert value.restrict(0).is_zero()

    def test_ambiguity_is_global(self, twisted_solution):
        """Both contraction orders differ by global elements 𝔳₁, 𝔳₂."""
        system, cocycles, twist = twisted_solution
        v1, v2, report = twist_ambiguity(system, cocycles, twist)
        assert report.passed, report.failures()
        assert set(v1) == set(twist.d) and set(v2) == set(twist.f)

    def test_contraction_orders_differ(self, twisted_solution):
        """Reversing the contraction order moves 𝔡 and 𝔣 by nonzero global elements."""
        system, cocycles, twist = twisted_solution
        v1, v2, report = twist_ambiguity(system, cocycles, twist)
        assert report.result("v1_global").passed
        assert report.result("v2_global").passed
        assert any(not v.is_zero() for v in v1.values())
        assert any(not v.is_zero() for v in v2.values())

    def test_charts_are_acyclic(self, twisted_solution):
        """Each V-chart sees a contractible part of the nerve."""
        _, _, twist = twisted_solution
        assert chart_acyclicity(twist).passed


class TestDeRhamSystem:
    """The filtered de Rham system on the glued charts."""

    def test_trivial_gluing(self, trivial_solution):
        _, _, twist = trivial_solution
        system = build_de_rham_system(twist)
        assert system.report.passed, system.report.failures()
        assert system.report.result("total_differential_square_zero").passed
        assert system.levels
