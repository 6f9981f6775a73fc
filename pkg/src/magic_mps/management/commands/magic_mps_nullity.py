from __future__ import annotations

from magic_mps.management.base import MeasureCommand


class Command(MeasureCommand):
    help = "Stabilizer nullity by normalized Pauli-vector squaring."
    command_name = "nullity"
