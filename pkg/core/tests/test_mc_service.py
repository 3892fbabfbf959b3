"""
test_mc_service.py — Tests for the extended Maurer-Cartan solver, normalization,
transport and the connecting gauge between two solutions.
"""

from __future__ import annotations

import pytest

from core.dtos import TransportKind
from core.services.errors import IncompatibleDataError
from core.services.mc_service import (
    build_problem,
    connecting_gauge,
    freeness_and_hdr_check,
    mc_residual,
    normalize_and_extract_classical,
    problem_from_twist,
    solve_mc,
    transport,
)
from core.services.polynomial_service import planted_base


@pytest.fixture
def eta_problem(eta_k2):
    return build_problem(eta_k2)


@pytest.fixture
def planted_problem(ring_k2):
    base, twist = planted_base(ring_k2)
    return problem_from_twist(base, twist)


class TestBuildProblem:
    """Validation of the curvature and the mixed term."""

    def test_curvature_must_have_degree_one(self, eta_k2, q_series):
        x = eta_k2.basis_element("x").scale(q_series(eta_k2.ring))
        with pytest.raises(IncompatibleDataError, match="degree 1"):
            build_problem(eta_k2, curvature=x)

    def test_curvature_must_vanish_mod_m(self, eta_k2):
        with pytest.raises(IncompatibleDataError, match="modulo"):
            build_problem(eta_k2, curvature=eta_k2.basis_element("eta"))

    def test_negative_window_rejected(self, eta_k2):
        with pytest.raises(IncompatibleDataError):
            build_problem(eta_k2, t_neg=-1)

    def test_planted_curvature_is_nonzero(self, planted_problem):
        """The planted model is almost dgBV but not dgBV."""
        assert not planted_problem.curvature.is_zero()
        assert planted_problem.curvature.order() == 1
        assert planted_problem.twist is not None


class TestSolve:
    """Weight-by-weight solution."""

    def test_preconditions_on_eta_model(self, eta_problem):
        report = freeness_and_hdr_check(eta_problem)
        assert report.passed, report.failures()

    def test_dgbv_without_input_gives_zero(self, eta_problem):
        solution = solve_mc(eta_problem)
        assert solution.phi.is_zero()
        assert solution.report.passed
        assert [entry["weight"] for entry in solution.transcript] == [1, 2]

    def test_classical_element_of_zero_solution(self, eta_problem):
        classical = normalize_and_extract_classical(solve_mc(eta_problem))
        assert classical.psi1.is_zero()
        assert classical.report.passed

    def test_planted_problem_solves(self, planted_problem):
        """The residual vanishes although 𝔩 ≠ 0."""
        solution = solve_mc(planted_problem)
        assert mc_residual(planted_problem, solution.phi).is_zero()
        assert solution.report.passed, solution.report.failures()
        assert (solution.phi.min_power() or 0) >= 0

    def test_planted_classical_element(self, planted_problem):
        """∂̄ψ₁ + ½[ψ₁, ψ₁] + 𝔩 = 0 with ψ₀ = 0."""
        classical = normalize_and_extract_classical(solve_mc(planted_problem))
        assert classical.report.result("psi0_zero").passed
        assert classical.report.result("classical_mc").passed

    def test_order_cap_above_ring_rejected(self, eta_problem):
        with pytest.raises(IncompatibleDataError, match="exceeds"):
            solve_mc(eta_problem, k_max=3)

    def test_lower_order_is_truncation(self, planted_problem):
        """An order-1 solve agrees with the truncated order-2 solve."""
        full = solve_mc(planted_problem)
        low = solve_mc(planted_problem, k_max=1)
        assert low.phi == full.at_order(1)


class TestFirstOrderInput:
    """ψ directions and the ψ₀ normalization."""

    def test_unit_direction_is_normalized_away(self, eta_problem, q_series):
        """q·1 is closed; without normalization it stays as ψ₀."""
        one = eta_problem.table.one().scale(q_series(eta_problem.table.ring))
        psi = eta_problem.zero().at(one)
        raw = solve_mc(eta_problem, psi, normalize=False)
        assert raw.components()[0] == one
        classical = normalize_and_extract_classical(raw)
        assert classical.report.result("psi0_zero").passed
        assert classical.solution.normalized

    def test_non_closed_direction_rejected(self, eta_problem, q_series):
        """∂̄(q·x) = q·x*eta ≠ 0."""
        x = eta_problem.table.basis_element("x").scale(q_series(eta_problem.table.ring))
        with pytest.raises(IncompatibleDataError, match="not closed"):
            solve_mc(eta_problem, eta_problem.zero().at(x))

    def test_direction_of_weight_two_rejected(self, eta_problem, q_series):
        one = eta_problem.table.one().scale(q_series(eta_problem.table.ring, e=2))
        with pytest.raises(IncompatibleDataError, match="weight 1"):
            solve_mc(eta_problem, eta_problem.zero().at(one))


class TestTransport:
    """Gauge elements, gauge paths and operator paths."""

    def _theta(self, problem, q_series):
        xi = problem.table.basis_element("xi").scale(q_series(problem.table.ring))
        return problem.zero().at(xi)

    def test_gauge(self, eta_problem, q_series):
        solution = solve_mc(eta_problem)
        moved = transport(solution, TransportKind.GAUGE, self._theta(eta_problem, q_series))
        assert moved.report.passed
        assert mc_residual(eta_problem, moved.phi).is_zero()

    def test_gauge_certificate(self, eta_problem, q_series):
        """The σ-path starts at φ, sums to the gauge image and solves R_σ = 0."""
        solution = solve_mc(eta_problem)
        moved = transport(solution, TransportKind.GAUGE, self._theta(eta_problem, q_series))
        assert moved.report.result("path_residual").passed
        assert moved.report.result("path_end").passed
        assert moved.certificate["path"][0] == solution.phi

    def test_homotopy_needs_a_gluing_system(self, eta_problem):
        """A finite global model has no prism system to move along."""
        with pytest.raises(IncompatibleDataError, match="gluing system"):
            transport(solve_mc(eta_problem), TransportKind.HOMOTOPY, None)

    def test_operator_path(self, eta_problem, q_series):
        """Shifting ∂̄ by [𝔳, ·] moves φ to φ − 𝔳."""
        solution = solve_mc(eta_problem)
        v = eta_problem.table.basis_element("xi*eta").scale(q_series(eta_problem.table.ring))
        moved = transport(solution, TransportKind.OPERATOR_PATH, v)
        assert moved.report.passed
        assert mc_residual(moved.problem, moved.phi).is_zero()

    def test_gauge_must_have_degree_minus_one(self, eta_problem, q_series):
        solution = solve_mc(eta_problem)
        x = eta_problem.table.basis_element("x").scale(q_series(eta_problem.table.ring))
        with pytest.raises(IncompatibleDataError):
            transport(solution, TransportKind.GAUGE, eta_problem.zero().at(x))

    def test_unknown_kind(self, eta_problem):
        with pytest.raises(IncompatibleDataError, match="Unknown transport"):
            transport(solve_mc(eta_problem), "teleport", None)


class TestConnectingGauge:
    """Gauges between two solutions of one problem."""

    def test_recovers_a_gauge_image(self, eta_problem, q_series):
        solution = solve_mc(eta_problem)
        xi = eta_problem.table.basis_element("xi").scale(q_series(eta_problem.table.ring))
        moved = transport(solution, TransportKind.GAUGE, eta_problem.zero().at(xi))
        theta = connecting_gauge(eta_problem, solution.phi, moved.phi)
        assert theta is not None
        assert transport(solution, TransportKind.GAUGE, theta).phi == moved.phi

    def test_nonzero_class_has_no_gauge(self, eta_problem, q_series):
        """q·1 is harmonic, so the unnormalized solution is not gauge equivalent to 0."""
        one = eta_problem.table.one().scale(q_series(eta_problem.table.ring))
        raw = solve_mc(eta_problem, eta_problem.zero().at(one), normalize=False)
        assert connecting_gauge(eta_problem, solve_mc(eta_problem).phi, raw.phi) is None

