from __future__ import annotations

from magic_mps.management.base import MeasureCommand


class Command(MeasureCommand):
    help = "Sampled estimate of M_1 from perfect Pauli-vector sampling."
    command_name = "sample-m1"
