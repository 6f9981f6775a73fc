from __future__ import annotations

from magic_mps.management.base import MeasureCommand


class Command(MeasureCommand):
    help = "Cross-check MPS measures against brute-force references."
    command_name = "oracle-check"
