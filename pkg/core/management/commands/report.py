"""
report.py — Run every stage an instance supports and emit the full report.

Usage:
    python manage.py report --instance core/fixtures/trivial.json --format json
    python manage.py report --instance core/fixtures/twisted.json --stages gluing,operators,mc
"""

from core.management.commands._pipeline import PipelineCommand


class Command(PipelineCommand):
    help = "Run the pipeline (all supported stages by default) and write a JSON or text report."

    def add_arguments(self, parser) -> None:
        super().add_arguments(parser)
        parser.add_argument("--stages", default="", help="Comma-separated stage list")

    def handle(self, *args, **options) -> None:
        self.stages = tuple(s.strip() for s in options["stages"].split(",") if s.strip())
        super().handle(*args, **options)
