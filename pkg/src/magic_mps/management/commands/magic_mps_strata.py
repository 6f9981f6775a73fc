from __future__ import annotations

from magic_mps.management.base import MeasureCommand


class Command(MeasureCommand):
    help = "Magnitude strata of the Pauli spectrum."
    command_name = "strata"
