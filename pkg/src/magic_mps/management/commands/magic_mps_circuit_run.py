from __future__ import annotations

from magic_mps.management.base import MeasureCommand


class Command(MeasureCommand):
    help = "Evolve a circuit and report bond growth; optionally save the state."
    command_name = "circuit-run"
