"""
pipeline_service.py — Runs the stages of an instance and assembles the report.

Responsible for:
- resolve_stages(): requested stages in pipeline order, with dependency checks
- run_pipeline(): each stage in turn, exceptions caught per stage and mapped
  onto the exit-code contract
- PipelineReport: JSON and text renderings; byte-identical for identical input
  unless timings are requested

Stage order: axioms, gluing, operators, mc, derham, gm, vhs. The gluing,
operator and de Rham stages work on the local model over the cover. mc solves
on the algebra glued from the operators (or on the global model when the
instance asks for it) and extracts the geometric gluing, which is why it
depends on them. gm and vhs work on the global model.
"""

from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field

from django.conf import settings

from core.dtos import AxiomKind, CheckReport, ExitCode, Stage, StageResult, TransportKind
from core.services.errors import CheckFailure, InstanceError, StageDependencyError
from core.services.gauss_manin_service import (
    build_de_rham_system,
    elementary_frame,
    gm_connection,
    index_weight_filtration,
    monodromy_weight_filtration,
    render_rows,
    supplied_weight_filtration,
)
from core.services.gluing_service import (
    check_order_compatibility,
    compute_comparison_cocycles,
    solve_gluing,
    validate_patching,
    verify_gluing,
)
from core.services.glued_service import GluedMCProblem, glued_problem
from core.services.graded_service import check_axioms
from core.services.instance_service import InstanceModel, canonical_json, psi_json, supplied_levels
from core.services.mc_service import (
    extract_geometric_gluing,
    freeness_and_hdr_check,
    normalize_and_extract_classical,
    solve_mc,
    transport,
)
from core.services.twist_service import solve_global_operators, twist_ambiguity
from core.services.vhs_service import build_vhs, miniversal_check

logger = logging.getLogger(__name__)


def exit_code_for(exc: BaseException) -> int:
    """Input problems → 2, failed checks → 1, everything else → 3."""
    if isinstance(exc, CheckFailure):
        return ExitCode.CHECK_FAILURE
    if isinstance(exc, ValueError):
        return ExitCode.INPUT_ERROR
    return ExitCode.INCONSISTENCY


def resolve_stages(requested=None) -> list[str]:
    """
    Requested stages in pipeline order; all stages when none are given.

    Raises:
        StageDependencyError: an unknown stage, or a stage without its prerequisites
    """
    if not requested:
        return list(Stage.ORDER)
    unknown = sorted(set(requested) - Stage.VALUES)
    if unknown:
        raise StageDependencyError(f"Unknown stage {unknown[0]!r}; expected one of {list(Stage.ORDER)}")
    chosen = set(requested)
    for stage in chosen:
        missing = [dep for dep in Stage.REQUIRES[stage] if dep not in chosen]
        if missing:
            raise StageDependencyError(f"Stage {stage!r} requires {missing[0]!r}")
    return [stage for stage in Stage.ORDER if stage in chosen]


def default_stages(model: InstanceModel) -> list[str]:
    """Every stage the instance carries data for: vhs needs a trace table."""
    return [stage for stage in Stage.ORDER if stage != Stage.VHS or model.has_trace()]


# ─────────────────────────────────────────────────────────────────────────────
# Report
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class PipelineReport:
    instance: str
    k: int
    order: int
    stages: list[StageResult] = field(default_factory=list)
    context: "PipelineContext | None" = field(default=None, repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.stages)

    @property
    def exit_code(self) -> int:
        return max((s.exit_code for s in self.stages), default=ExitCode.PASS)

    def stage(self, name: str) -> StageResult:
        for s in self.stages:
            if s.stage == name:
                return s
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "instance": self.instance,
            "k": self.k,
            "order": self.order,
            "passed": self.passed,
            "exit_code": self.exit_code,
            "stages": [s.to_dict() for s in self.stages],
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def to_text(self) -> str:
        lines = [f"instance {self.instance} (k={self.k}, order={self.order}): "
                 f"{'PASS' if self.passed else 'FAIL'} exit {self.exit_code}"]
        for s in self.stages:
            count = sum(len(r["results"]) for r in s.reports)
            lines.append(f"  {s.stage:<10} {'PASS' if s.passed else 'FAIL'}  {count} checks")
            if s.error:
                lines.append(f"    error: {s.error}")
            for report in s.reports:
                for result in report["results"]:
                    if not result["passed"]:
                        lines.append(f"    ✗ {report['subject']}.{result['name']}: {result.get('witness', '')}")
            for key in sorted(s.data):
                value = s.data[key]
                if isinstance(value, (str, int, bool)) or value is None:
                    lines.append(f"    {key}: {value}")
        return "\n".join(lines) + "\n"


# ─────────────────────────────────────────────────────────────────────────────
# Stages
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class PipelineContext:
    """Stage outputs handed forward."""

    model: InstanceModel
    order: int
    escalation: int
    seed: int
    gauges: int
    psi: object = None
    reverse: bool = False
    outputs: dict = field(default_factory=dict)


def _require_passed(report: CheckReport, what: str) -> None:
    if not report.passed:
        failed = report.failures()[0]
        raise CheckFailure(f"{what}: {failed.name} failed ({failed.witness})", report)


def _axioms(ctx: PipelineContext) -> tuple[list, dict]:
    model = ctx.model
    local_kind = AxiomKind.DGBV if model.local.pdb is not None else AxiomKind.BV
    reports = [check_axioms(model.local, local_kind)]
    if model.local.module is not None:
        reports.append(check_axioms(model.local, AxiomKind.DE_RHAM_MODULE))
    problem = model.problem
    reports.append(check_axioms(problem.table, AxiomKind.ALMOST_DGBV))
    strict = check_axioms(problem.table, AxiomKind.DGBV)
    failure = strict.failures()[0] if not strict.passed else None
    data = {
        "global_dgbv": strict.passed,
        "global_dgbv_witness": None if failure is None else f"{failure.name}: {failure.witness}",
        "curvature": problem.curvature.render(),
        "curvature_nonzero": not problem.curvature.is_zero(),
    }
    return reports, data


def _gluing(ctx: PipelineContext) -> tuple[list, dict]:
    patching = ctx.model.patching
    validation = validate_patching(patching)
    _require_passed(validation, "patching data")
    system = solve_gluing(patching, ctx.reverse, ctx.escalation)
    cocycles = compute_comparison_cocycles(system)
    ctx.outputs["system"] = system
    ctx.outputs["cocycles"] = cocycles
    reports = [validation, verify_gluing(system), check_order_compatibility(system, ctx.reverse, ctx.escalation),
               cocycles.report]
    nerve = system.nerve
    data = {
        "pairs": len(system.exponents),
        "identity": all(G.is_zero() for G in system.exponents.values()),
        "obstruction_contractions": len(system.transcript),
        "exponents": {nerve.v_label(pair): G.render() for pair, G in sorted(system.exponents.items())},
    }
    return reports, data


def _operators(ctx: PipelineContext) -> tuple[list, dict]:
    system, cocycles = ctx.outputs["system"], ctx.outputs["cocycles"]
    twist = solve_global_operators(system, cocycles, ctx.reverse, ctx.escalation)
    ctx.outputs["twist"] = twist
    _, _, ambiguity = twist_ambiguity(system, cocycles, twist, ctx.escalation)
    nerve = system.nerve
    curvature = {nerve.v_charts[a]: v.render() for a, v in sorted(twist.curvature.items()) if not v.is_zero()}
    data = {
        "trivial": twist.is_trivial(),
        "d_nonzero": any(not v.is_zero() for v in twist.d.values()),
        "f_nonzero": any(not v.is_zero() for v in twist.f.values()),
        "curvature_nonzero": bool(curvature),
        "curvature": curvature,
    }
    return [twist.report, ambiguity], data


def _mc_problem(ctx: PipelineContext):
    """The glued problem of the twist, or the global model for mc_source "global_model"."""
    model = ctx.model
    if model.mc_source == "global_model":
        problem = model.problem
    else:
        problem = glued_problem(
            ctx.outputs["twist"], model.t_neg, model.t_cap, ctx.reverse, ctx.escalation,
            retraction=model.retraction,
        )
    if ctx.order < problem.k:
        problem = problem.restrict(ctx.order)
    return problem


def _mc(ctx: PipelineContext) -> tuple[list, dict]:
    problem = _mc_problem(ctx)
    preconditions = freeness_and_hdr_check(problem)
    if not preconditions.passed:
        free = preconditions.result("freeness.free")
        raise CheckFailure(
            f"MC preconditions failed: {preconditions.failures()[0].name}; freeness {free.witness or 'holds'}",
            preconditions,
        )
    psi = ctx.psi if ctx.psi is not None else ctx.model.psi
    solution = solve_mc(problem, problem.lift(psi) if psi is not None else None)
    classical = normalize_and_extract_classical(solution)
    ctx.outputs["solution"] = solution
    reports = [preconditions, solution.report, classical.report]

    rng = random.Random(ctx.seed)
    for _ in range(ctx.gauges):
        moved = transport(solution, TransportKind.GAUGE, problem.random_gauge(rng))
        reports.append(moved.report)

    twist = ctx.outputs["twist"]
    if isinstance(problem, GluedMCProblem):
        nerve = twist.system.nerve
        views = problem.chart_view(problem.curvature)
        curvature = {nerve.v_charts[a]: v.render() for a, v in sorted(views.items()) if not v.is_zero()}
        psi1 = classical.psi1
        if problem.k == twist.system.table.ring.k and psi1.x.form_degree_part(0).is_zero():
            geometric = extract_geometric_gluing(twist, problem.chart_view(psi1), ctx.reverse, ctx.escalation)
        else:
            geometric = extract_geometric_gluing(twist, reverse=ctx.reverse, escalation=ctx.escalation)
    else:
        curvature = problem.curvature.render()
        geometric = extract_geometric_gluing(twist, reverse=ctx.reverse, escalation=ctx.escalation)
    reports.append(geometric.report)
    data = {
        "source": ctx.model.mc_source,
        "curvature_nonzero": not problem.curvature.is_zero(),
        "curvature": curvature,
        "phi": solution.phi.render(),
        "psi1": classical.psi1.render(),
        "transcript": solution.transcript,
        "geometric_pairs": len(geometric.exponents),
    }
    if psi is not None:
        data["psi"] = psi_json(psi)
    return reports, data


def _derham(ctx: PipelineContext) -> tuple[list, dict]:
    system = build_de_rham_system(ctx.outputs["twist"])
    return [system.report], {"filtration_levels": len(system.levels)}


def _gm(ctx: PipelineContext) -> tuple[list, dict]:
    bundle = gm_connection(ctx.model.problem, k=ctx.order)
    ctx.outputs["bundle"] = bundle
    data = {
        "rank": bundle.dimension,
        "d": bundle.dim_d,
        "degrees": list(bundle.degrees),
        "residues": {str(nu + 1): render_rows(rows) for nu, rows in sorted(bundle.residues.items())},
        "connection": {str(nu + 1): m.to_json() for nu, m in sorted(bundle.matrices.items())},
    }
    return [bundle.report], data


def _weight(ctx: PipelineContext, bundle):
    weight = ctx.model.weight
    if weight["kind"] == "monodromy":
        return monodromy_weight_filtration(bundle)
    if weight["kind"] == "supplied":
        return supplied_weight_filtration(bundle, supplied_levels(weight))
    return index_weight_filtration(bundle)


def _vhs(ctx: PipelineContext) -> tuple[list, dict]:
    if not ctx.model.has_trace():
        raise InstanceError("The vhs stage needs a trace table in the instance")
    bundle = ctx.outputs["bundle"]
    frame = elementary_frame(bundle, _weight(ctx, bundle))
    vhs = build_vhs(frame, ctx.model.trace)
    # miniversality is reported, never gating
    miniversal = miniversal_check(vhs)
    data = {
        "weight": frame.weight.source,
        "frame_rounds": frame.rounds,
        "minus_exponents": vhs.minus_exponents,
        "miniversal": miniversal.to_dict(),
        "miniversal_passed": miniversal.report.passed,
    }
    return [frame.report, vhs.report], data


STAGE_RUNNERS = {
    Stage.AXIOMS: _axioms,
    Stage.GLUING: _gluing,
    Stage.OPERATORS: _operators,
    Stage.MC: _mc,
    Stage.DERHAM: _derham,
    Stage.GM: _gm,
    Stage.VHS: _vhs,
}


# ─────────────────────────────────────────────────────────────────────────────
# Entry point
# ─────────────────────────────────────────────────────────────────────────────

def run_pipeline(
    model: InstanceModel,
    stages=None,
    order: int | None = None,
    psi=None,
    reverse: bool = False,
    escalation: int | None = None,
    seed: int | None = None,
    gauges: int = 1,
    timings: bool = False,
) -> PipelineReport:
    """
    Run the requested stages on a validated instance.

    Args:
        model: the ingested instance
        stages: subset of Stage.VALUES; default every stage the instance supports
        order: order cap for mc and gm; default min(k, DEFORMATION_K_MAX)
        psi: first-order MC direction overriding the instance's
        reverse: contract towards the largest chart in the Čech solves
        escalation: extension degree headroom; default DEFORMATION_EXTENSION_ESCALATION
        seed: seed for the random gauge checks; default DEFORMATION_SEED
        gauges: number of random gauge transports checked in the mc stage
        timings: record wall-clock seconds (reports stop being byte-identical)

    Raises:
        StageDependencyError: a stage requested without its prerequisites
        InstanceError: an order outside [0, k]
    """
    chosen = resolve_stages(stages) if stages else default_stages(model)
    order = min(model.k, settings.DEFORMATION_K_MAX) if order is None else order
    if not 0 <= order <= model.k:
        raise InstanceError(f"Order {order} outside [0, {model.k}]")
    ctx = PipelineContext(
        model=model,
        order=order,
        escalation=settings.DEFORMATION_EXTENSION_ESCALATION if escalation is None else escalation,
        seed=settings.DEFORMATION_SEED if seed is None else seed,
        gauges=gauges,
        psi=psi,
        reverse=reverse,
    )
    report = PipelineReport(model.name, model.k, order, context=ctx)
    results: dict = {}
    for stage in chosen:
        blocked = [dep for dep in Stage.REQUIRES[stage] if not results[dep].passed]
        if blocked:
            result = StageResult(stage, False, error=f"skipped: prerequisite {blocked[0]} did not pass",
                                 exit_code=results[blocked[0]].exit_code)
            logger.warning(f"Stage {stage} skipped: {blocked[0]} did not pass")
        else:
            result = _run_stage(ctx, stage, timings)
        results[stage] = result
        report.stages.append(result)
    logger.info(f"Pipeline on {model.name!r}: stages {chosen}, exit {report.exit_code}")
    return report


def _run_stage(ctx: PipelineContext, stage: str, timings: bool, runner=None) -> StageResult:
    logger.info(f"Stage {stage} on {ctx.model.name!r}")
    runner = runner or STAGE_RUNNERS[stage]
    start = time.perf_counter()
    try:
        reports, data = runner(ctx)
    except Exception as exc:
        logger.exception(f"Stage {stage} failed on {ctx.model.name!r}")
        reports = [exc.report.to_dict()] if isinstance(exc, CheckFailure) and exc.report is not None else []
        return StageResult(
            stage=stage,
            passed=False,
            reports=reports,
            error=f"{type(exc).__name__}: {exc}",
            exit_code=exit_code_for(exc),
            seconds=time.perf_counter() - start if timings else None,
        )
    passed = all(r.passed for r in reports)
    return StageResult(
        stage=stage,
        passed=passed,
        reports=[r.to_dict() for r in reports],
        data=data,
        exit_code=ExitCode.PASS if passed else ExitCode.CHECK_FAILURE,
        seconds=time.perf_counter() - start if timings else None,
    )


def run_step(report: PipelineReport, name: str, runner, timings: bool = False) -> StageResult:
    """Run one more step on the context of a finished pipeline and append its result."""
    if not report.passed:
        failed = next(s for s in report.stages if not s.passed)
        result = StageResult(name, False, error=f"skipped: prerequisite {failed.stage} did not pass",
                             exit_code=failed.exit_code)
    else:
        result = _run_stage(report.context, name, timings, runner)
    report.stages.append(result)
    return result


def extract_gluing_step(ctx: PipelineContext) -> tuple[list, dict]:
    """Classical gauge per chart and the holomorphic gluing it induces."""
    geometric = extract_geometric_gluing(ctx.outputs["twist"], reverse=ctx.reverse, escalation=ctx.escalation)
    nerve = ctx.outputs["system"].nerve
    data = {
        "exponents": {nerve.v_label(pair): x.render() for pair, x in sorted(geometric.exponents.items())},
        "psi": {nerve.v_charts[a]: x.render() for a, x in sorted(geometric.psi.items())},
    }
    return [geometric.report], data
