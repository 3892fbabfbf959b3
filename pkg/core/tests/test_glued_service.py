"""
test_glued_service.py — Tests for the glued model of a gluing system and the
Maurer-Cartan problem solved on it.
"""

from __future__ import annotations

import pytest

from core.dtos import TransportKind
from core.services.errors import IncompatibleDataError
from core.services.glued_service import GluedMCProblem, glued_problem, untwisting_frame
from core.services.gluing_service import compute_comparison_cocycles, solve_gluing, solve_homotopy
from core.services.instance_service import ingest_instance
from core.services.layer_service import TVector
from core.services.mc_service import (
    freeness_and_hdr_check,
    mc_residual,
    normalize_and_extract_classical,
    solve_mc,
    transport,
)
from core.services.twist_service import holomorphic_exponents, solve_global_operators


def _twist(system):
    return solve_global_operators(system, compute_comparison_cocycles(system))


@pytest.fixture(scope="module")
def trivial_problem(trivial_instance):
    return glued_problem(_twist(solve_gluing(trivial_instance.patching)))


@pytest.fixture(scope="module")
def twisted_system(twisted_instance):
    return solve_gluing(twisted_instance.patching.restrict(1))


@pytest.fixture(scope="module")
def twisted_problem(twisted_system):
    return glued_problem(_twist(twisted_system))


class TestFrame:
    """The untwisting frame and the operators it produces."""

    def test_trivial_frame_is_zero(self, trivial_problem):
        assert all(t.is_zero() for t in trivial_problem.theta.values())
        assert trivial_problem.curvature.is_zero()
        assert trivial_problem.frame_report.passed

    def test_twisted_exponents_are_untwisted(self, twisted_system):
        """ϑ_β⊙G_{αβ}⊙(−ϑ_α) = 0 on every overlap."""
        theta = untwisting_frame(twisted_system)
        assert any(not t.is_zero() for t in theta.values())
        assert all(G.is_zero() for G in holomorphic_exponents(twisted_system, theta).values())

    def test_twisted_frame_glues(self, twisted_problem):
        report = twisted_problem.frame_report
        assert report.passed, report.failures()
        assert report.result("curvature_structure").passed
        assert report.result("mixed_structure").passed

    def test_chart_view_is_the_chart_curvature(self, twisted_problem):
        """e^{−ad ϑ_α} of the glued curvature gives 𝔩_α back."""
        views = twisted_problem.chart_view(twisted_problem.curvature)
        assert views == twisted_problem.twist.curvature

    def test_cyclic_support_rejected(self, trivial_document):
        """A single chart over a circle of U-charts has H¹ ≠ 0."""
        trivial_document["cover"] = {
            "v_charts": ["A"],
            "u_charts": ["u0", "u1", "u2"],
            "containment": {"u0": ["A"], "u1": ["A"], "u2": ["A"]},
            "simplices": [["u0", "u1"], ["u1", "u2"], ["u0", "u2"]],
        }
        model = ingest_instance(trivial_document)
        with pytest.raises(IncompatibleDataError, match="not acyclic"):
            glued_problem(_twist(solve_gluing(model.patching)))


class TestModel:
    """Probes and the retraction of the glued model."""

    def test_probe_count(self, trivial_problem):
        """Four constants and four Whitney probes per vertex and edge of the chain."""
        assert len(trivial_problem.probes()) == 4 + 4 * 5

    def test_retraction_identities(self, trivial_problem):
        report = trivial_problem.retraction().check(trivial_problem.zero())
        assert report.passed, report.failures()

    def test_supplied_retraction_is_used(self, trivial_instance):
        problem = glued_problem(_twist(solve_gluing(trivial_instance.patching)), retraction=trivial_instance.retraction)
        assert problem.local_retraction() is trivial_instance.retraction
        report = freeness_and_hdr_check(problem)
        assert report.passed, report.failures()
        assert report.result("retraction.table.homotopy_retraction").passed

    def test_negative_window_rejected(self, trivial_instance):
        with pytest.raises(IncompatibleDataError, match="t_neg"):
            glued_problem(_twist(solve_gluing(trivial_instance.patching)), t_neg=-1)


class TestSolve:
    """solve_mc on glued problems."""

    def test_trivial_solution_is_zero(self, trivial_problem):
        assert isinstance(trivial_problem, GluedMCProblem)
        solution = solve_mc(trivial_problem)
        assert solution.phi.is_zero()
        assert solution.report.passed

    def test_constant_direction_is_normalized(self, trivial_instance, trivial_problem, q_series):
        """q·1 read as a constant family is removed as ψ₀."""
        direction = trivial_instance.direction
        one = direction.table.one().scale(q_series(direction.table.ring))
        psi = trivial_problem.lift(direction.zero().at(one))
        classical = normalize_and_extract_classical(solve_mc(trivial_problem, psi))
        assert classical.report.result("psi0_zero").passed
        assert classical.psi1.is_zero()

    def test_direction_on_a_foreign_table(self, trivial_problem, eta_k2, q_series):
        x = eta_k2.one().scale(q_series(eta_k2.ring))
        with pytest.raises(IncompatibleDataError, match="local model"):
            trivial_problem.lift(TVector.window(eta_k2, 1, 2).at(x))


class TestHomotopyTransport:
    """Moving a solution along a prism gluing system."""

    def test_constant_homotopy(self, trivial_instance, trivial_problem):
        system = trivial_problem.twist.system
        homotopy = solve_homotopy(system, solve_gluing(trivial_instance.patching))
        moved = transport(solve_mc(trivial_problem), TransportKind.HOMOTOPY, homotopy)
        assert moved.report.passed, moved.report.failures()
        assert moved.certificate["v"].is_zero()
        assert moved.certificate["u"].is_zero()
        assert moved.phi.is_zero()

    def test_plain_system_rejected(self, trivial_problem):
        with pytest.raises(IncompatibleDataError, match="prism"):
            transport(solve_mc(trivial_problem), TransportKind.HOMOTOPY, trivial_problem.twist.system)

    @pytest.mark.integration
    def test_between_contraction_orders(self, twisted_instance, twisted_system, twisted_problem):
        """Both ends solve their equations and are joined by a gauge."""
        reverse = solve_gluing(twisted_instance.patching.restrict(1), reverse=True)
        homotopy = solve_homotopy(twisted_system, reverse)
        solution = solve_mc(twisted_problem)
        moved = transport(solution, TransportKind.HOMOTOPY, homotopy)
        assert moved.report.result("start_system").passed
        assert moved.report.result("path_residual").passed
        assert moved.report.result("start_matches").passed
        assert moved.report.result("gauge_to_endpoint").passed
        assert mc_residual(moved.problem, moved.phi).is_zero()
        assert moved.certificate["theta"] is not None
        assert mc_residual(moved.problem, moved.certificate["endpoint"].phi).is_zero()
