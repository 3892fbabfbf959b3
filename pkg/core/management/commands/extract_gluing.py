"""
extract_gluing.py — Classical solution and holomorphic gluing morphisms.

Usage:
    python manage.py extract_gluing --instance core/fixtures/twisted.json
"""

from core.dtos import Stage
from core.management.commands._pipeline import PipelineCommand
from core.services.pipeline_service import extract_gluing_step, run_step


class Command(PipelineCommand):
    help = "Build the global operators, gauge them away chart by chart and report the induced gluing."
    stages = (Stage.GLUING, Stage.OPERATORS)

    def after(self, report, options) -> None:
        run_step(report, "extract_gluing", extract_gluing_step, options["timings"])
