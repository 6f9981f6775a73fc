from __future__ import annotations

from django.dispatch import Signal

measure_computed = Signal()
nullity_iteration = Signal()
sweep_point_completed = Signal()
run_failed = Signal()
