"""
test_vhs_service.py — Tests for H_±, the pairing from a trace and the
miniversality report, on the one-η model.
"""

from __future__ import annotations

import pytest
from sympy import QQ

from core.services.errors import IncompatibleDataError
from core.services.gauss_manin_service import elementary_frame, gm_connection, index_weight_filtration
from core.services.mc_service import build_problem
from core.services.scalars_service import ArtinSeries
from core.services.vhs_service import (
    Section,
    build_vhs,
    grading,
    miniversal_check,
    trace_vector,
    volume_section,
)

TRACE = {"xi*eta": "1"}


@pytest.fixture
def eta_frame(eta_k2):
    bundle = gm_connection(build_problem(eta_k2))
    return elementary_frame(bundle, index_weight_filtration(bundle))


@pytest.fixture
def eta_vhs(eta_frame):
    return build_vhs(eta_frame, TRACE)


class TestSections:
    """Arithmetic on H ⊗ R_k((s))."""

    def test_shift_moves_exponents(self, ring_k1, q_series):
        one = ArtinSeries.const(ring_k1, 1)
        section = Section.at(ring_k1, 1, [one, q_series(ring_k1)])
        assert section.shift(2).exponents() == [3]

    def test_zero_parts_are_dropped(self, ring_k1):
        zero = ArtinSeries.zero(ring_k1)
        assert Section.at(ring_k1, -2, [zero, zero]).is_zero()

    def test_grading_weight(self, ring_k1):
        """∇_{t∂t}(s^e c) = (e/2 + (2 − d)/2) s^e c."""
        section = Section.at(ring_k1, -2, [ArtinSeries.const(ring_k1, 1)])
        assert grading(1, section) == section.scale(QQ(-1, 2))


class TestTrace:
    """The trace lives on PV^{−d,d}."""

    def test_top_bidegree_accepted(self, eta_k2):
        i = eta_k2.labels.index("xi*eta")
        assert trace_vector(eta_k2, TRACE, 1) == {i: QQ(1)}

    def test_off_top_bidegree_rejected(self, eta_k2):
        with pytest.raises(IncompatibleDataError, match="bidegree"):
            trace_vector(eta_k2, {"x": "1"}, 1)

    def test_unknown_label_rejected(self, eta_k2):
        with pytest.raises(IncompatibleDataError, match="unknown"):
            trace_vector(eta_k2, {"zeta": "1"}, 1)


class TestVHS:
    """Containments, isotropy and flatness of the pairing."""

    def test_pairing_nondegenerate(self, eta_vhs):
        assert eta_vhs.report.result("pairing_nondegenerate").passed

    def test_elementary_products_constant(self, eta_vhs):
        assert eta_vhs.report.result("elementary_products_constant").passed

    def test_direct_sum(self, eta_vhs):
        """H_+ ⊕ H_− = H_± at every s-power."""
        assert eta_vhs.report.result("plus_minus_direct_sum").passed

    def test_pairing_containments(self, eta_vhs):
        assert eta_vhs.report.result("plus_pairing_in_power_series").passed
        assert eta_vhs.report.result("minus_pairing_in_t_minus_two").passed

    def test_all_checks(self, eta_vhs):
        assert eta_vhs.report.passed, eta_vhs.report.failures()


class TestMiniversal:
    """The four conditions, each reported on its own."""

    def test_volume_section_conditions(self, eta_vhs):
        """Order compatibility, flatness and the eigen condition hold; KS cannot be onto with one direction."""
        result = miniversal_check(eta_vhs)
        assert result.report.result("order_compatible").passed
        assert result.report.result("flat_modulo_minus").passed
        assert result.report.result("eigen_modulo_minus").passed
        assert result.eigenvalue == QQ(-1, 2)
        assert not result.report.result("kodaira_spencer_bijective").passed

    def test_volume_section_sits_at_inverse_t(self, eta_vhs):
        assert volume_section(eta_vhs).exponents() == [-2]

    def test_zero_candidate_fails_ks(self, eta_vhs):
        zero = Section.zero(eta_vhs.ring, eta_vhs.bundle.dimension)
        result = miniversal_check(eta_vhs, {eta_vhs.ring.k: zero})
        assert result.ks_rank == 0
        assert not result.report.result("kodaira_spencer_bijective").passed
        assert not result.report.result("eigen_modulo_minus").passed

    def test_missing_top_candidate(self, eta_vhs):
        with pytest.raises(IncompatibleDataError, match="top order"):
            miniversal_check(eta_vhs, {0: Section.zero(eta_vhs.ring, 4)})
