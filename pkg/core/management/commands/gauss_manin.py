"""
gauss_manin.py — The de Rham system and the Gauss-Manin connection.

Usage:
    python manage.py gauss_manin --instance core/fixtures/trivial.json [--order K]
"""

from core.dtos import Stage
from core.management.commands._pipeline import PipelineCommand


class Command(PipelineCommand):
    help = "Build the de Rham system on the cover and the Gauss-Manin connection of the global model."
    stages = (Stage.GLUING, Stage.OPERATORS, Stage.DERHAM, Stage.GM)
