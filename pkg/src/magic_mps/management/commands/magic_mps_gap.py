from __future__ import annotations

from magic_mps.management.base import MeasureCommand


class Command(MeasureCommand):
    help = "Magic gap: one minus the largest non-stabilizer Pauli expectation."
    command_name = "gap"
