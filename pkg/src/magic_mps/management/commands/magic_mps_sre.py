from __future__ import annotations

from magic_mps.management.base import MeasureCommand


class Command(MeasureCommand):
    help = "Stabilizer Renyi entropies M_n from replica Pauli vectors."
    command_name = "sre"
