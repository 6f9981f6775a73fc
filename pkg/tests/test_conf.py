from __future__ import annotations

import pytest
from django.core.exceptions import ImproperlyConfigured
from django.test import override_settings

from magic_mps.conf import (
    get_jobs_limit,
    get_settings,
    get_truncation_policy,
    validate_settings,
)


def test_get_settings_defaults() -> None:
    settings = get_settings()
    assert settings.dmrg_chi == 40
    assert settings.nullity_compression == "density_matrix"
    assert settings.bell_compression == "svd"
    assert settings.output_format == "jsonl"
    assert settings.seed == 7
    assert settings.circuit_registry.endswith("get_circuit_registry")


def test_get_jobs_limit_from_settings() -> None:
    assert get_jobs_limit() == 2


def test_get_jobs_limit_from_cpu(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("MAGIC_MPS_JOBS", raising=False)
    with override_settings(MAGIC_MPS_JOBS=None):
        assert get_jobs_limit() >= 1


def test_get_jobs_limit_from_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("MAGIC_MPS_JOBS", "3")
    with override_settings(MAGIC_MPS_JOBS=None):
        assert get_jobs_limit() == 3


def test_get_jobs_limit_invalid(monkeypatch: pytest.MonkeyPatch) -> None:
    with override_settings(MAGIC_MPS_JOBS=0):
        with pytest.raises(ImproperlyConfigured):
            get_jobs_limit()
    monkeypatch.setenv("MAGIC_MPS_JOBS", "many")
    with override_settings(MAGIC_MPS_JOBS=None):
        with pytest.raises(ImproperlyConfigured):
            get_jobs_limit()


def test_truncation_policies_follow_settings() -> None:
    with override_settings(MAGIC_MPS_REPLICA_CHI=32, MAGIC_MPS_SRE_TRUNCATION=1e-7):
        replica = get_truncation_policy("replica")
    assert replica.max_rank == 32
    assert replica.error_threshold == 1e-7
    assert get_truncation_policy("pauli").error_threshold == 0.0
    assert get_truncation_policy("nullity").error_threshold == 1e-6
    with override_settings(MAGIC_MPS_PAULI_CHI=64):
        assert get_truncation_policy("pauli").max_rank == 64


def test_validate_settings_accepts_defaults() -> None:
    validate_settings()


@pytest.mark.parametrize(
    "overrides",
    [
        {"MAGIC_MPS_DMRG_CHI": 0},
        {"MAGIC_MPS_REPLICA_CHI": True},
        {"MAGIC_MPS_PAULI_CHI": -4},
        {"MAGIC_MPS_NULLITY_EPSILON": -1e-5},
        {"MAGIC_MPS_TRUNCATION_ABORT": "loose"},
        {"MAGIC_MPS_NULLITY_COMPRESSION": "qr"},
        {"MAGIC_MPS_OUTPUT_FORMAT": "xml"},
        {"MAGIC_MPS_SEED": -1},
        {"MAGIC_MPS_CIRCUIT_REGISTRY": "tests.support.missing_registry"},
    ],
)
def test_validate_settings_rejects_invalid_values(overrides: dict[str, object]) -> None:
    with override_settings(**overrides):
        with pytest.raises(ImproperlyConfigured):
            validate_settings()
