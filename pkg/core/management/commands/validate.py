"""
validate.py — Load an instance document and check it without solving anything.

Checks the schema, every cross-reference and the patching relations.

Usage:
    python manage.py validate --instance core/fixtures/trivial.json [--canonical out.json]
"""

from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from core.dtos import ExitCode
from core.services.gluing_service import validate_patching
from core.services.instance_service import load_instance, serialize_instance


class Command(BaseCommand):
    help = "Validate an instance document and its patching data; optionally write its canonical form."

    def add_arguments(self, parser) -> None:
        parser.add_argument("--instance", required=True, help="Path to an instance JSON document")
        parser.add_argument("--canonical", default=None, help="Write the canonical JSON here")

    def handle(self, *args, **options) -> None:
        try:
            model = load_instance(options["instance"])
        except ValueError as exc:
            raise CommandError(str(exc), returncode=ExitCode.INPUT_ERROR) from exc
        self.stdout.write(
            f"Instance {model.name!r}: k={model.k}, {len(model.nerve.v_charts)} V-charts, "
            f"{len(model.nerve.u_charts)} U-charts, local {model.local.name!r} "
            f"({model.local.dimension} basis elements), global {model.problem.table.name!r}, "
            f"Maurer-Cartan on {model.mc_source}"
        )
        report = validate_patching(model.patching)
        for result in report.results:
            mark = "✓" if result.passed else "✗"
            self.stdout.write(f"  {mark}  {result.name}" + (f": {result.witness}" if result.witness else ""))
        if options["canonical"]:
            Path(options["canonical"]).write_text(serialize_instance(model), encoding="utf-8")
            self.stdout.write(f"Canonical document written to {options['canonical']}")
        if not report.passed:
            raise CommandError("Patching data fails its relations", returncode=ExitCode.CHECK_FAILURE)
        self.stdout.write(self.style.SUCCESS("Instance is valid."))
