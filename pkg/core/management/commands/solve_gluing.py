"""
solve_gluing.py — Solve for compatible gluing morphisms and the comparison cocycles.

Usage:
    python manage.py solve_gluing --instance core/fixtures/twisted.json [--reverse]
"""

from core.dtos import Stage
from core.management.commands._pipeline import PipelineCommand


class Command(PipelineCommand):
    help = "Validate the patching data, solve the gluing morphisms and compute the w/f cocycles."
    stages = (Stage.GLUING,)
