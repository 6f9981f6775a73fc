from __future__ import annotations

from collections.abc import Callable
from typing import Any

from django.utils.module_loading import import_string

from magic_mps.circuits import (
    CircuitSpec,
    random_clifford_circuit,
    scrambling_circuit,
    t_doped_circuit,
    t_doped_random_circuit,
)
from magic_mps.conf import get_settings

CircuitFactory = Callable[..., CircuitSpec]


def default_circuit_registry() -> dict[str, CircuitFactory]:
    return {
        "random-clifford": random_clifford_circuit,
        "t-doped": t_doped_circuit,
        "t-doped-random": t_doped_random_circuit,
        "scrambling": scrambling_circuit,
    }


def get_circuit_registry() -> dict[str, CircuitFactory]:
    registry_path = get_settings().circuit_registry
    registry_factory = import_string(registry_path)
    registry = registry_factory()
    if not isinstance(registry, dict):
        raise ValueError("Circuit registry must return a dict of circuit factories")
    return registry


def build_circuit(family: str, **params: Any) -> CircuitSpec:
    registry = get_circuit_registry()
    if family not in registry:
        raise KeyError(f"Unknown circuit family: {family}")
    return registry[family](**params)
