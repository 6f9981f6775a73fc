from __future__ import annotations

from magic_mps.management.base import MeasureCommand


class Command(MeasureCommand):
    help = "Additive Bell magic of a state."
    command_name = "bell"
