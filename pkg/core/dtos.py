"""
dtos.py — Plain Python dataclasses and string enums shared by the services.

These are lightweight data transfer objects for check reports and pipeline
results. They carry no mathematics of their own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


# ── Enums (stored as strings in reports and instance documents) ───────────────

class AxiomKind:
    BV = "bv"
    DGLA = "dgla"
    DGBV = "dgbv"
    ALMOST_DGBV = "almost_dgbv"
    DE_RHAM_MODULE = "de_rham_module"
    VALUES = {BV, DGLA, DGBV, ALMOST_DGBV, DE_RHAM_MODULE}


class SeriesKind:
    """Operator series evaluated on ad_a."""
    T = "T"                              # (e^{-x} - 1) / x
    EXPM1_OVER_AD = "expm1_over_ad"      # (e^{x} - 1) / x
    EXP_AD = "exp_ad"                    # e^{x}
    VALUES = {T, EXPM1_OVER_AD, EXP_AD}


class Stage:
    AXIOMS = "axioms"
    GLUING = "gluing"
    OPERATORS = "operators"
    MC = "mc"
    DERHAM = "derham"
    GM = "gm"
    VHS = "vhs"
    VALUES = {AXIOMS, GLUING, OPERATORS, MC, DERHAM, GM, VHS}
    ORDER = (AXIOMS, GLUING, OPERATORS, MC, DERHAM, GM, VHS)
    # stage -> stages that must run first
    REQUIRES = {
        AXIOMS: (),
        GLUING: (),
        OPERATORS: (GLUING,),
        MC: (OPERATORS,),
        DERHAM: (OPERATORS,),
        GM: (DERHAM,),
        VHS: (GM,),
    }


class FixtureKind:
    TRIVIAL = "trivial"
    TWISTED = "twisted"
    RANK_DROP = "rank-drop"
    VALUES = {TRIVIAL, TWISTED, RANK_DROP}


class TransportKind:
    GAUGE = "gauge"
    HOMOTOPY = "homotopy"
    OPERATOR_PATH = "operator_path"
    VALUES = {GAUGE, HOMOTOPY, OPERATOR_PATH}


class ExitCode:
    PASS = 0
    CHECK_FAILURE = 1
    INPUT_ERROR = 2
    INCONSISTENCY = 3
    VALUES = {PASS, CHECK_FAILURE, INPUT_ERROR, INCONSISTENCY}


# ── Report dataclasses ─────────────────────────────────────────────────────────

@dataclass
class CheckResult:
    name: str
    passed: bool
    witness: Optional[str] = None        # rendered counterexample on failure
    detail: str = ""

    def to_dict(self) -> dict:
        out = {"name": self.name, "passed": self.passed}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class CheckReport:
    """An ordered list of named checks about one subject."""

    subject: str
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def add(self, name: str, passed: bool, witness: Optional[str] = None, detail: str = "") -> CheckResult:
        result = CheckResult(name=name, passed=bool(passed), witness=None if passed else witness, detail=detail)
        self.results.append(result)
        return result

    def extend(self, other: "CheckReport", prefix: str = "") -> None:
        for r in other.results:
            self.results.append(CheckResult(prefix + r.name, r.passed, r.witness, r.detail))

    def result(self, name: str) -> CheckResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if not r.passed]

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "passed": self.passed,
            "results": [r.to_dict() for r in self.results],
        }


@dataclass
class StageResult:
    stage: str
    passed: bool
    reports: list[dict] = field(default_factory=list)
    data: dict = field(default_factory=dict)
    error: Optional[str] = None
    exit_code: int = ExitCode.PASS
    seconds: Optional[float] = None

    def to_dict(self) -> dict:
        out = {
            "stage": self.stage,
            "passed": self.passed,
            "exit_code": self.exit_code,
            "reports": self.reports,
            "data": self.data,
            "error": self.error,
        }
        if self.seconds is not None:
            out["seconds"] = round(self.seconds, 3)
        return out
