"""
build_operators.py — Assemble the global ∂̄ and Δ from the gluing solution.

Usage:
    python manage.py build_operators --instance core/fixtures/twisted.json
"""

from core.dtos import Stage
from core.management.commands._pipeline import PipelineCommand


class Command(PipelineCommand):
    help = "Solve the gluing, then the twisting elements 𝔡 and 𝔣, and check the almost dgBV identities."
    stages = (Stage.GLUING, Stage.OPERATORS)
