"""
check_axioms.py — Check the algebra identities of the local and global models.

Usage:
    python manage.py check_axioms --instance core/fixtures/twisted.json
"""

from core.dtos import Stage
from core.management.commands._pipeline import PipelineCommand


class Command(PipelineCommand):
    help = "Check dgBV and de Rham module identities of the local model and almost dgBV of the global model."
    stages = (Stage.AXIOMS,)
