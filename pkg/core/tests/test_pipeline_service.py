"""
test_pipeline_service.py — Tests for stage resolution, the stage runner and
the pipeline report.
"""

from __future__ import annotations

import pytest

from core.dtos import CheckReport, ExitCode, Stage
from core.services.errors import (
    CheckFailure,
    InconsistencyError,
    InstanceError,
    StageDependencyError,
    WindowOverflowError,
)
from core.services.pipeline_service import (
    default_stages,
    exit_code_for,
    extract_gluing_step,
    resolve_stages,
    run_pipeline,
    run_step,
)


@pytest.fixture(scope="module")
def trivial_report(trivial_instance):
    return run_pipeline(trivial_instance)


class TestStages:
    """Which stages run, and in what order."""

    def test_all_stages_by_default(self):
        assert resolve_stages() == list(Stage.ORDER)

    def test_requested_stages_are_ordered(self):
        assert resolve_stages(["operators", "gluing"]) == ["gluing", "operators"]

    def test_missing_prerequisite(self):
        with pytest.raises(StageDependencyError, match="requires 'operators'"):
            resolve_stages(["mc"])

    def test_unknown_stage(self):
        with pytest.raises(StageDependencyError, match="Unknown stage"):
            resolve_stages(["gluing", "teleport"])

    def test_vhs_needs_trace(self, trivial_instance, twisted_instance):
        assert Stage.VHS in default_stages(trivial_instance)
        assert Stage.VHS not in default_stages(twisted_instance)


class TestExitCodes:
    """Input problems → 2, failed checks → 1, everything else → 3."""

    def test_mapping(self):
        assert exit_code_for(CheckFailure("x", CheckReport("s"))) == ExitCode.CHECK_FAILURE
        assert exit_code_for(WindowOverflowError("x")) == ExitCode.INPUT_ERROR
        assert exit_code_for(StageDependencyError("x")) == ExitCode.INPUT_ERROR
        assert exit_code_for(InconsistencyError("x")) == ExitCode.INCONSISTENCY
        assert exit_code_for(ZeroDivisionError()) == ExitCode.INCONSISTENCY


class TestTrivialPipeline:
    """Identity patchings: every stage passes."""

    def test_exit_zero(self, trivial_report):
        assert trivial_report.exit_code == ExitCode.PASS
        assert [s.stage for s in trivial_report.stages] == list(Stage.ORDER)
        assert trivial_report.passed, [s.error for s in trivial_report.stages if not s.passed]

    def test_gluing_is_identity(self, trivial_report):
        assert trivial_report.stage("gluing").data["identity"]

    def test_operators_trivial(self, trivial_report):
        data = trivial_report.stage("operators").data
        assert data["trivial"]
        assert not data["curvature_nonzero"]

    def test_global_model_is_dgbv(self, trivial_report):
        assert trivial_report.stage("axioms").data["global_dgbv"]

    def test_mc_solution_is_zero(self, trivial_report):
        data = trivial_report.stage("mc").data
        assert not data["curvature_nonzero"]
        assert data["phi"] == "0"

    def test_vhs_reports_miniversality(self, trivial_report):
        data = trivial_report.stage("vhs").data
        assert "miniversal" in data
        assert data["miniversal_passed"] is False

    def test_order_defaults_to_k(self, trivial_report):
        assert trivial_report.order == 2

    def test_report_is_deterministic(self, trivial_instance, trivial_report):
        again = run_pipeline(trivial_instance)
        assert again.to_json() == trivial_report.to_json()

    def test_text_rendering(self, trivial_report):
        text = trivial_report.to_text()
        assert text.startswith("instance trivial (k=2, order=2): PASS exit 0")
        assert "gluing" in text


class TestFailures:
    """Failures stop dependent stages and set the exit code."""

    def test_rank_drop_fails_freeness(self, rank_drop_instance):
        report = run_pipeline(rank_drop_instance, stages=["gluing", "operators", "mc"])
        assert report.exit_code == ExitCode.CHECK_FAILURE
        assert report.stage("gluing").passed
        assert report.stage("operators").passed
        mc = report.stage("mc")
        assert not mc.passed
        assert "CheckFailure" in mc.error
        free = next(r for r in mc.reports[0]["results"] if r["name"] == "freeness.free")
        assert free["witness"] == "first failing order 1"

    def test_rank_drop_passes_at_order_zero(self, rank_drop_instance):
        """Freeness only fails once q is visible."""
        report = run_pipeline(rank_drop_instance, stages=["gluing", "operators", "mc"], order=0)
        assert report.stage("mc").passed, report.stage("mc").error

    def test_order_outside_ring(self, trivial_instance):
        with pytest.raises(InstanceError, match="outside"):
            run_pipeline(trivial_instance, stages=["gluing"], order=3)

    def test_dependency_error_before_running(self, trivial_instance):
        with pytest.raises(StageDependencyError):
            run_pipeline(trivial_instance, stages=["gm"])


class TestRunStep:
    """Extra steps on a finished pipeline."""

    def test_extract_gluing_after_operators(self, trivial_instance):
        report = run_pipeline(trivial_instance, stages=["gluing", "operators"])
        result = run_step(report, "extract_gluing", extract_gluing_step)
        assert result.passed
        assert report.stages[-1] is result


@pytest.fixture(scope="module")
def twisted_report(twisted_instance):
    return run_pipeline(twisted_instance, stages=["axioms", "gluing", "operators", "mc"], gauges=20)


def _result(stage, name):
    return next(r for report in stage.reports for r in report["results"] if r["name"] == name)


@pytest.mark.integration
class TestTwistedPipeline:
    """Nonzero ledgers through the MC stage."""

    def test_stages_pass(self, twisted_report):
        assert twisted_report.passed, [s.error for s in twisted_report.stages if not s.passed]
        assert not twisted_report.stage("operators").data["trivial"]

    def test_mc_solves_the_glued_operators(self, twisted_report):
        """The MC stage sees the chart curvature 𝔩_α of the operators stage."""
        operators = twisted_report.stage("operators").data
        mc = twisted_report.stage("mc").data
        assert mc["source"] == "gluing"
        assert mc["curvature"] == operators["curvature"]
        assert mc["curvature_nonzero"] == operators["curvature_nonzero"]

    def test_classical_solution_and_gluing(self, twisted_report):
        """ψ₀ = 0, ψ₁ ≠ 0 and the holomorphic gluing is a cocycle, with twenty gauge checks."""
        mc = twisted_report.stage("mc")
        assert _result(mc, "psi0_zero")["passed"]
        assert mc.data["psi1"] != "0"
        assert _result(mc, "gluing_cocycle")["passed"]
        gauges = [r for r in mc.reports if r["subject"] == "transport[gauge]"]
        assert len(gauges) == 20
        assert all(r["passed"] for r in gauges)
