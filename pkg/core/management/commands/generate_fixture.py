"""
generate_fixture.py — Write a generated instance document.

Usage:
    python manage.py generate_fixture twisted --k 3 --output core/fixtures/twisted.json
    python manage.py generate_fixture trivial --charts 3
"""

from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from core.dtos import ExitCode, FixtureKind
from core.services.fixture_service import generate_fixture
from core.services.instance_service import canonical_json


class Command(BaseCommand):
    help = "Generate a trivial, twisted or rank-drop instance document."

    def add_arguments(self, parser) -> None:
        parser.add_argument("kind", choices=sorted(FixtureKind.VALUES))
        parser.add_argument("--k", type=int, default=None, help="Order cap")
        parser.add_argument("--charts", type=int, default=None, help="V-charts (trivial family only)")
        parser.add_argument("--output", default=None, help="Write the document here instead of stdout")

    def handle(self, *args, **options) -> None:
        try:
            document = generate_fixture(options["kind"], k=options["k"], charts=options["charts"])
        except ValueError as exc:
            raise CommandError(str(exc), returncode=ExitCode.INPUT_ERROR) from exc
        text = canonical_json(document)
        if options["output"]:
            Path(options["output"]).write_text(text, encoding="utf-8")
            self.stdout.write(self.style.SUCCESS(f"Wrote {options['kind']} fixture to {options['output']}"))
        else:
            self.stdout.write(text, ending="")
