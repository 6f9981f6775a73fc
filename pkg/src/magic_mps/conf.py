from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any, Literal

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured
from django.utils.module_loading import import_string

from magic_mps.tensors import TruncationPolicy

VALID_COMPRESSIONS = {"svd", "density_matrix"}
VALID_OUTPUT_FORMATS = {"jsonl", "csv"}
JOBS_ENV_VAR = "MAGIC_MPS_JOBS"

PolicyKind = Literal["dmrg", "pauli", "replica", "nullity"]


@dataclass(frozen=True)
class MagicMpsSettings:
    dmrg_chi: int
    dmrg_sweeps: int
    dmrg_tolerance: float
    sre_truncation: float
    pauli_chi: int | None
    replica_chi: int
    nullity_chi: int
    nullity_truncation: float
    nullity_epsilon: float
    nullity_max_iterations: int
    nullity_compression: str
    bell_compression: str
    truncation_abort: float | None
    samples: int
    seed: int
    jobs: int | None
    output_format: str
    circuit_registry: str


def _get_setting(name: str, default: Any) -> Any:
    if hasattr(settings, name):
        return getattr(settings, name)
    return default


def get_settings() -> MagicMpsSettings:
    return MagicMpsSettings(
        dmrg_chi=_get_setting("MAGIC_MPS_DMRG_CHI", 40),
        dmrg_sweeps=_get_setting("MAGIC_MPS_DMRG_SWEEPS", 20),
        dmrg_tolerance=_get_setting("MAGIC_MPS_DMRG_TOLERANCE", 1e-10),
        sre_truncation=_get_setting("MAGIC_MPS_SRE_TRUNCATION", 1e-9),
        pauli_chi=_get_setting("MAGIC_MPS_PAULI_CHI", None),
        replica_chi=_get_setting("MAGIC_MPS_REPLICA_CHI", 256),
        nullity_chi=_get_setting("MAGIC_MPS_NULLITY_CHI", 256),
        nullity_truncation=_get_setting("MAGIC_MPS_NULLITY_TRUNCATION", 1e-6),
        nullity_epsilon=_get_setting("MAGIC_MPS_NULLITY_EPSILON", 1e-5),
        nullity_max_iterations=_get_setting("MAGIC_MPS_NULLITY_MAX_ITERATIONS", 30),
        nullity_compression=_get_setting(
            "MAGIC_MPS_NULLITY_COMPRESSION",
            "density_matrix",
        ),
        bell_compression=_get_setting("MAGIC_MPS_BELL_COMPRESSION", "svd"),
        truncation_abort=_get_setting("MAGIC_MPS_TRUNCATION_ABORT", None),
        samples=_get_setting("MAGIC_MPS_SAMPLES", 100_000),
        seed=_get_setting("MAGIC_MPS_SEED", 0),
        jobs=_get_setting("MAGIC_MPS_JOBS", None),
        output_format=_get_setting("MAGIC_MPS_OUTPUT_FORMAT", "jsonl"),
        circuit_registry=_get_setting(
            "MAGIC_MPS_CIRCUIT_REGISTRY",
            "magic_mps.registry.default_circuit_registry",
        ),
    )


def get_jobs_limit() -> int:
    configured = get_settings().jobs
    if configured is None:
        env_value = os.environ.get(JOBS_ENV_VAR)
        if env_value:
            try:
                configured = int(env_value)
            except ValueError as exc:
                raise ImproperlyConfigured(
                    f"{JOBS_ENV_VAR} must be an integer, got {env_value!r}"
                ) from exc
    if configured is None:
        cpu_count = os.cpu_count() or 1
        return max(1, cpu_count)
    if configured < 1:
        raise ImproperlyConfigured("MAGIC_MPS_JOBS must be >= 1")
    return configured


def get_truncation_policy(kind: PolicyKind) -> TruncationPolicy:
    config = get_settings()
    if kind == "dmrg":
        return TruncationPolicy(config.dmrg_chi, config.sre_truncation)
    if kind == "pauli":
        if config.pauli_chi is None:
            return TruncationPolicy.exact()
        return TruncationPolicy(config.pauli_chi, config.sre_truncation)
    if kind == "replica":
        return TruncationPolicy(config.replica_chi, config.sre_truncation)
    if kind == "nullity":
        return TruncationPolicy(config.nullity_chi, config.nullity_truncation)
    raise ImproperlyConfigured(f"Unknown truncation policy kind: {kind}")


def _require_positive(name: str, value: Any) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ImproperlyConfigured(f"{name} must be an integer >= 1")


def _require_non_negative(name: str, value: Any) -> None:
    if not isinstance(value, (int, float)) or value < 0:
        raise ImproperlyConfigured(f"{name} must be a number >= 0")


def validate_settings() -> None:
    config = get_settings()
    for name, value in (
        ("MAGIC_MPS_DMRG_CHI", config.dmrg_chi),
        ("MAGIC_MPS_DMRG_SWEEPS", config.dmrg_sweeps),
        ("MAGIC_MPS_REPLICA_CHI", config.replica_chi),
        ("MAGIC_MPS_NULLITY_CHI", config.nullity_chi),
        ("MAGIC_MPS_NULLITY_MAX_ITERATIONS", config.nullity_max_iterations),
        ("MAGIC_MPS_SAMPLES", config.samples),
    ):
        _require_positive(name, value)
    if config.pauli_chi is not None:
        _require_positive("MAGIC_MPS_PAULI_CHI", config.pauli_chi)

    for name, value in (
        ("MAGIC_MPS_DMRG_TOLERANCE", config.dmrg_tolerance),
        ("MAGIC_MPS_SRE_TRUNCATION", config.sre_truncation),
        ("MAGIC_MPS_NULLITY_TRUNCATION", config.nullity_truncation),
        ("MAGIC_MPS_NULLITY_EPSILON", config.nullity_epsilon),
    ):
        _require_non_negative(name, value)
    if config.truncation_abort is not None:
        _require_non_negative("MAGIC_MPS_TRUNCATION_ABORT", config.truncation_abort)

    for name, value in (
        ("MAGIC_MPS_NULLITY_COMPRESSION", config.nullity_compression),
        ("MAGIC_MPS_BELL_COMPRESSION", config.bell_compression),
    ):
        if value not in VALID_COMPRESSIONS:
            raise ImproperlyConfigured(
                f"{name} must be 'svd' or 'density_matrix', got {value!r}"
            )
    if config.output_format not in VALID_OUTPUT_FORMATS:
        raise ImproperlyConfigured(
            "MAGIC_MPS_OUTPUT_FORMAT must be 'jsonl' or 'csv'"
        )
    if not isinstance(config.seed, int) or config.seed < 0:
        raise ImproperlyConfigured("MAGIC_MPS_SEED must be an integer >= 0")

    get_jobs_limit()
    try:
        import_string(config.circuit_registry)
    except ImportError as exc:
        raise ImproperlyConfigured(
            f"MAGIC_MPS_CIRCUIT_REGISTRY cannot be imported: {config.circuit_registry}"
        ) from exc
