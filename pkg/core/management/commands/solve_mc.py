"""
solve_mc.py — Solve the extended Maurer-Cartan equation order by order.

Usage:
    python manage.py solve_mc --instance core/fixtures/twisted.json --order 3 [--input psi.json]

The --input file holds a first-order direction {"<s-power>": {label: series}}
on the global model.
"""

from pathlib import Path

from core.dtos import Stage
from core.management.commands._pipeline import PipelineCommand
from core.services.errors import InstanceError
from core.services.instance_service import parse_json, read_psi


class Command(PipelineCommand):
    help = "Solve the MC equation on the glued model (or the global model), extract ψ₁ and the geometric gluing."
    stages = (Stage.GLUING, Stage.OPERATORS, Stage.MC)

    def add_arguments(self, parser) -> None:
        super().add_arguments(parser)
        parser.add_argument("--input", default=None, dest="psi", help="First-order direction ψ as JSON")
        parser.add_argument("--gauges", type=int, default=1, help="Random gauge transports to check")

    def run_options(self, model, options) -> dict:
        out = {"gauges": options["gauges"]}
        if options["psi"]:
            path = Path(options["psi"])
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise InstanceError(f"{path}: cannot read ψ ({exc.strerror})") from exc
            out["psi"] = read_psi(model.direction, parse_json(text, str(path)), str(path))
        return out
