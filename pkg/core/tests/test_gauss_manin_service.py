"""
test_gauss_manin_service.py — Tests for matrices over R_k, the Gauss-Manin
connection, weight filtrations and elementary frames.
"""

from __future__ import annotations

import pytest
import sympy
from sympy import QQ

from core.services.errors import IncompatibleDataError, NotNilpotentError
from core.services.gauss_manin_service import (
    SeriesMatrix,
    elementary_frame,
    flat_frame,
    gm_connection,
    index_weight_filtration,
    monodromy_weight_filtration,
    supplied_weight_filtration,
    top_dimension,
)
from core.services.mc_service import build_problem

N = [[QQ(0), QQ(1)], [QQ(0), QQ(0)]]
B = [[QQ(1), QQ(0)], [QQ(0), QQ(0)]]


@pytest.fixture
def eta_bundle(eta_k2):
    return gm_connection(build_problem(eta_k2))


class TestSeriesMatrix:
    """Arithmetic over R_k."""

    def test_inverse(self, ring_k2):
        m = SeriesMatrix.identity(ring_k2, 2) + SeriesMatrix(ring_k2, 2, {(1,): N})
        assert m * m.inverse() == SeriesMatrix.identity(ring_k2, 2)

    def test_products_truncate(self, ring_k1):
        """q·q = 0 in R_1."""
        m = SeriesMatrix(ring_k1, 2, {(1,): B})
        assert (m * m).is_zero()

    def test_euler_scales_by_weight(self, ring_k2):
        m = SeriesMatrix(ring_k2, 2, {(2,): B})
        assert m.euler(0) == m.scale(QQ(2))

    def test_size_mismatch(self, ring_k2):
        with pytest.raises(IncompatibleDataError):
            SeriesMatrix.identity(ring_k2, 2) + SeriesMatrix.identity(ring_k2, 3)


class TestFlatFrame:
    """P with M·P + q∂_qP = P·N."""

    def test_nilpotent_residue(self, ring_k2):
        m = SeriesMatrix(ring_k2, 2, {(0,): N, (1,): B})
        p, _ = flat_frame({0: m}, ring_k2)
        assert p.constant() == [[QQ(1), QQ(0)], [QQ(0), QQ(1)]]
        assert m * p + p.euler(0) == p * SeriesMatrix.constant_matrix(ring_k2, N)

    def test_matches_dense_solve_in_dimension_four(self, rng, ring_k3):
        """
        A Jordan residue of size 4 with random q-corrections.

        At each q^a the frame solves a·P_a + N·P_a − P_a·N = −Σ_{b≥1} M_b·P_{a−b};
        the dense 16×16 solve of the same system must agree entry by entry.
        """
        n = 4
        jordan = [[QQ(1) if j == i + 1 else QQ(0) for j in range(n)] for i in range(n)]
        corrections = {
            (b,): [[QQ(rng.randint(-3, 3), rng.randint(1, 3)) for _ in range(n)] for _ in range(n)]
            for b in range(1, ring_k3.k + 1)
        }
        m = SeriesMatrix(ring_k3, n, {(0,): jordan, **corrections})
        p, rounds = flat_frame({0: m}, ring_k3)
        assert rounds <= 2 * n + 1

        def dense(rows):
            return sympy.Matrix([[QQ.to_sympy(c) for c in row] for row in rows])

        residue = dense(jordan)
        expected = {0: sympy.eye(n)}
        for a in range(1, ring_k3.k + 1):
            rhs = -sum((dense(corrections[(b,)]) * expected[a - b] for b in range(1, a + 1)), sympy.zeros(n))
            columns = []
            for i in range(n):
                for j in range(n):
                    unit = sympy.zeros(n)
                    unit[i, j] = 1
                    image = a * unit + residue * unit - unit * residue
                    columns.append(list(image))
            system = sympy.Matrix(columns).T
            solution = system.LUsolve(sympy.Matrix(list(rhs)))
            expected[a] = sympy.Matrix(n, n, list(solution))
            assert dense(p.part((a,))) == expected[a], a
        assert m * p + p.euler(0) == p * SeriesMatrix.constant_matrix(ring_k3, jordan)

    def test_resonant_residue_is_rejected(self, ring_k2):
        """ad N has the eigenvalue −1 on the off-diagonal entry, so the correction never stops."""
        residue = [[QQ(0), QQ(0)], [QQ(0), QQ(1)]]
        m = SeriesMatrix(ring_k2, 2, {(0,): residue, (1,): N})
        with pytest.raises(NotNilpotentError):
            flat_frame({0: m}, ring_k2)


class TestConnection:
    """The bundle of the one-η model."""

    def test_rank_and_dimension(self, eta_bundle):
        """Classes 1, xi, eta and xi*eta, in PV^{p,q} with −1 ≤ p ≤ 0."""
        assert eta_bundle.dimension == 4
        assert eta_bundle.dim_d == 1
        assert top_dimension(eta_bundle.problem.table) == 1

    def test_checks_pass(self, eta_bundle):
        assert eta_bundle.report.passed, eta_bundle.report.failures()
        assert eta_bundle.report.result("flat").passed

    def test_connection_vanishes_without_q(self, eta_bundle):
        """Nothing depends on q, so ∇ = 0 and every residue is 0."""
        assert all(m.is_zero() for m in eta_bundle.matrices.values())
        assert all(not any(any(row) for row in rows) for rows in eta_bundle.residues.values())

    def test_order_above_ring_rejected(self, eta_k2):
        with pytest.raises(IncompatibleDataError, match="exceeds"):
            gm_connection(build_problem(eta_k2), k=3)


class TestWeightAndFrames:
    """Weight filtrations opposite to F and the frames they give."""

    def test_index_filtration_gives_frame(self, eta_bundle):
        frame = elementary_frame(eta_bundle, index_weight_filtration(eta_bundle))
        assert frame.report.passed
        assert len(frame.sections) == 4
        assert frame.rounds <= 2 * eta_bundle.dimension + 1

    def test_monodromy_filtration_not_opposite_when_n_vanishes(self, eta_bundle):
        """N = 0 puts everything in W_{≤d}, which meets F^{≥2}."""
        weight = monodromy_weight_filtration(eta_bundle)
        with pytest.raises(IncompatibleDataError, match="not opposite"):
            elementary_frame(eta_bundle, weight)

    def test_supplied_vector_length_checked(self, eta_bundle):
        with pytest.raises(IncompatibleDataError, match="length"):
            supplied_weight_filtration(eta_bundle, {0: [[1, 0]]})
