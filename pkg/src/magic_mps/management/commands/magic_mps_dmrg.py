from __future__ import annotations

from magic_mps.management.base import MeasureCommand


class Command(MeasureCommand):
    help = "Two-site DMRG ground energies of spin chains."
    command_name = "dmrg"
