"""
_pipeline.py — Shared base for the commands that run pipeline stages.

The leading underscore keeps Django from listing this module as a command.
"""

from __future__ import annotations

from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from core.dtos import ExitCode
from core.services.instance_service import InstanceModel, load_instance
from core.services.pipeline_service import PipelineReport, run_pipeline


class PipelineCommand(BaseCommand):
    """Load --instance, run `stages`, write the report, exit with the contract code."""

    stages: tuple = ()

    def add_arguments(self, parser) -> None:
        parser.add_argument("--instance", required=True, help="Path to an instance JSON document")
        parser.add_argument("--order", type=int, default=None, help="Order cap for the mc and gm stages")
        parser.add_argument("--seed", type=int, default=None, help="Seed for the random gauge checks")
        parser.add_argument("--escalation", type=int, default=None, help="Extension degree headroom")
        parser.add_argument("--reverse", action="store_true", help="Contract towards the largest chart")
        parser.add_argument("--format", choices=["json", "text"], default="text", dest="fmt")
        parser.add_argument("--output", default=None, help="Write the report here instead of stdout")
        parser.add_argument("--timings", action="store_true", help="Record seconds per stage")

    def run_options(self, model: InstanceModel, options: dict) -> dict:
        """Extra keyword arguments for run_pipeline."""
        return {}

    def after(self, report: PipelineReport, options: dict) -> None:
        """Hook for steps that run on the finished pipeline."""

    def handle(self, *args, **options) -> None:
        try:
            model = load_instance(options["instance"])
            report = run_pipeline(
                model,
                stages=list(self.stages) or None,
                order=options["order"],
                reverse=options["reverse"],
                escalation=options["escalation"],
                seed=options["seed"],
                timings=options["timings"],
                **self.run_options(model, options),
            )
        except ValueError as exc:
            raise CommandError(str(exc), returncode=ExitCode.INPUT_ERROR) from exc
        self.after(report, options)
        self.emit(report, options)

    def emit(self, report: PipelineReport, options: dict) -> None:
        text = report.to_json() if options["fmt"] == "json" else report.to_text()
        if options["output"]:
            Path(options["output"]).write_text(text, encoding="utf-8")
            self.stdout.write(f"Report written to {options['output']}")
        else:
            self.stdout.write(text, ending="")
        if report.exit_code != ExitCode.PASS:
            failed = next(s for s in report.stages if not s.passed)
            raise CommandError(
                f"Stage {failed.stage} did not pass (exit {report.exit_code})",
                returncode=report.exit_code,
            )
        self.stdout.write(self.style.SUCCESS("All stages passed."))
