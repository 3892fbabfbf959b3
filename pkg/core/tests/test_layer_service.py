"""
test_layer_service.py — Tests for t-series, the l_t scaling, the order-0
retraction, supplied retractions and the degeneracy and freeness checks.
"""

from __future__ import annotations

import pytest

from core.services.errors import IncompatibleDataError, TruncationMismatchError, WindowOverflowError
from core.services.layer_service import (
    TVector,
    build_retraction,
    check_hat_t,
    freeness_report,
    hdr_report,
    lt_scale,
    supplied_retraction,
)
from core.services.polynomial_service import euler_model


class TestTVector:
    """Windows and arithmetic."""

    def test_power_below_window_overflows(self, eta_k2):
        with pytest.raises(WindowOverflowError):
            TVector(eta_k2, -2, 4, {-3: eta_k2.one()})

    def test_power_above_window_is_dropped(self, eta_k2):
        """Truncation modulo s^{high+1}."""
        assert TVector(eta_k2, -2, 4, {5: eta_k2.one()}).is_zero()

    def test_windows_must_match(self, eta_k2):
        a = TVector.window(eta_k2, 1, 2).at(eta_k2.one())
        b = TVector.window(eta_k2, 0, 2).at(eta_k2.one())
        with pytest.raises(TruncationMismatchError):
            a + b

    def test_window_is_in_half_steps(self, eta_k2):
        """[−t_neg, t_cap] in t is [−2t_neg, 2t_cap] in s."""
        zero = TVector.window(eta_k2, 1, 2)
        assert (zero.low, zero.high) == (-2, 4)

    def test_shift_multiplies_by_s(self, eta_k2):
        x = eta_k2.basis_element("x")
        moved = TVector.window(eta_k2, 1, 2).at(x).shift(2)
        assert moved.component(2) == x
        assert moved.component(0).is_zero()

    def test_dbar_t_adds_t_delta(self, eta_k2):
        """(∂̄ + tΔ)v = ∂̄v + t·Δv."""
        v = TVector.window(eta_k2, 1, 2).at(eta_k2.basis_element("x*xi"))
        out = v.dbar_t()
        assert out.component(2) == eta_k2.basis_element("x*xi").delta()
        assert out.component(0) == eta_k2.basis_element("x*xi").pdb()


class TestScaling:
    """l_t and the rescaled operator."""

    def test_unit_moves_to_inverse_t(self, eta_k2):
        """1 has bidegree (0, 0), so l_t(1) = t^{−1}."""
        one = TVector(eta_k2, -4, 4).at(eta_k2.one())
        assert lt_scale(one).component(-2) == eta_k2.one()

    def test_scaling_past_window_overflows(self, eta_k2):
        one = TVector(eta_k2, 0, 4).at(eta_k2.one())
        with pytest.raises(WindowOverflowError):
            lt_scale(one)

    def test_rescaled_operator_identity(self, eta_k2):
        report = check_hat_t(eta_k2, eta_k2.zero(), eta_k2.zero())
        assert report.passed, report.failures()


class TestRetraction:
    """(π, ι, h) at order 0."""

    @pytest.mark.parametrize("t_neg,t_cap", [(0, 1), (1, 2)])
    def test_homotopy_retraction(self, eta_k2, t_neg, t_cap):
        """π∘ι = id and dh + hd = id − ιπ."""
        report = build_retraction(eta_k2, t_neg, t_cap).check()
        assert report.passed, report.failures()

    def test_window_bounds(self, eta_k2):
        r = build_retraction(eta_k2, 1, 2)
        assert (r.low, r.high) == (-2, 4)


class TestSuppliedRetraction:
    """(π, ι, h) given by hand for the Euler model on t⁰, t¹."""

    def _data(self, table):
        i = table.index
        include = {
            0: [{(0, i("1")): 1}, {(2, i("1")): 1}, {(0, i("x")): 1}],
            -1: [{(0, i("xi")): 1}, {(2, i("xi")): 1}, {(2, i("x*xi")): 1}],
        }
        homotopy = {0: {(2, i("x")): {(0, i("x*xi")): 1}}}
        return include, include, homotopy

    def test_accepted(self, ring_k2):
        table = euler_model(ring_k2)
        retraction = supplied_retraction(table, 0, 1, *self._data(table))
        assert retraction.harmonic_rank(0) == 3
        assert retraction.check().passed

    def test_projection_follows_the_data(self, ring_k2):
        """t¹x is exact, so it projects to zero."""
        table = euler_model(ring_k2)
        retraction = supplied_retraction(table, 0, 1, *self._data(table))
        index = retraction.key_index(0)
        assert retraction.project({index[(2, table.index("x"))]: 1}, 0) == [0, 0, 0]

    def test_missing_homotopy_rejected(self, ring_k2):
        table = euler_model(ring_k2)
        include, project, _ = self._data(table)
        with pytest.raises(IncompatibleDataError, match="homotopy_retraction"):
            supplied_retraction(table, 0, 1, include, project, {})

    def test_key_outside_window(self, ring_k2):
        table = euler_model(ring_k2)
        include, project, homotopy = self._data(table)
        include[0][0] = {(4, table.index("1")): 1}
        with pytest.raises(IncompatibleDataError, match="not a degree 0 key"):
            supplied_retraction(table, 0, 1, include, project, homotopy)


class TestDegeneracyAndFreeness:
    """Hodge-to-de-Rham degeneracy and freeness over R_k."""

    def test_eta_model_degenerates(self, eta_k2):
        report = hdr_report(eta_k2, 2, required=(1, 0))
        assert report.passed, report.failures()

    def test_eta_model_is_free(self, eta_k2):
        """∂̂ has no q-dependence, so every class lifts."""
        report = freeness_report(eta_k2, eta_k2.zero(), eta_k2.zero())
        assert report.passed, report.failures()

    def test_rank_drop_at_order_one(self, ring_k2, q_series):
        """Δ = q·(...) kills x*xi only once q is visible."""
        table = euler_model(ring_k2, lam=q_series(ring_k2))
        report = freeness_report(table, table.zero(), table.zero())
        assert report.result("rank_order_0").passed
        assert not report.result("rank_order_1").passed
        assert report.result("free").witness == "first failing order 1"
