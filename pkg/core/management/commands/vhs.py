"""
vhs.py — Elementary frame, semi-infinite VHS checks and the miniversal section.

Usage:
    python manage.py vhs --instance core/fixtures/trivial.json
"""

from core.dtos import Stage
from core.management.commands._pipeline import PipelineCommand


class Command(PipelineCommand):
    help = "Run through the Gauss-Manin stage, then build the elementary frame, H_± and the pairing checks."
    stages = (Stage.GLUING, Stage.OPERATORS, Stage.DERHAM, Stage.GM, Stage.VHS)
