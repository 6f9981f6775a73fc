from __future__ import annotations

import json
import logging
import os
import sys
from collections.abc import Sequence
from typing import Any

import django
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured
from django.core.management import load_command_class

from magic_mps.exceptions import EXIT_CONFIG_ERROR

SUBCOMMANDS = {
    "sre": "magic_mps_sre",
    "bell": "magic_mps_bell",
    "nullity": "magic_mps_nullity",
    "gap": "magic_mps_gap",
    "strata": "magic_mps_strata",
    "sample-m1": "magic_mps_sample_m1",
    "dmrg": "magic_mps_dmrg",
    "circuit-run": "magic_mps_circuit_run",
    "oracle-check": "magic_mps_oracle_check",
    "schema": "magic_mps_schema",
}

_RESERVED = set(vars(logging.makeLogRecord({})))


class StructuredFormatter(logging.Formatter):
    """Appends ``extra=`` fields as sorted key=value pairs."""

    def format(self, record: logging.LogRecord) -> str:
        message = super().format(record)
        fields = {
            key: value
            for key, value in vars(record).items()
            if key not in _RESERVED and key not in ("message", "asctime")
        }
        if not fields:
            return message
        pairs = " ".join(f"{key}={fields[key]!r}" for key in sorted(fields))
        return f"{message} {pairs}"


def build_logging(level: str = "WARNING") -> dict[str, Any]:
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "structured": {
                "()": StructuredFormatter,
                "format": "%(asctime)s %(levelname)s %(name)s %(message)s",
            }
        },
        "handlers": {
            "stderr": {
                "class": "logging.StreamHandler",
                "stream": "ext://sys.stderr",
                "formatter": "structured",
            }
        },
        "loggers": {
            "magic_mps": {
                "handlers": ["stderr"],
                "level": level,
                "propagate": False,
            }
        },
    }


def setup_django() -> None:
    if not os.environ.get("DJANGO_SETTINGS_MODULE") and not settings.configured:
        settings.configure(
            INSTALLED_APPS=["magic_mps"],
            LOGGING=build_logging(),
            USE_TZ=True,
            TIME_ZONE="UTC",
        )
    django.setup()


def _usage() -> str:
    names = ", ".join(SUBCOMMANDS)
    return f"usage: magic-mps <command> [options]\ncommands: {names}\n"


def _config_error(message: str) -> int:
    payload = {
        "error": "ConfigurationError",
        "message": message,
        "exit_code": EXIT_CONFIG_ERROR,
    }
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return EXIT_CONFIG_ERROR


def main(argv: Sequence[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    if not args or args[0] in ("-h", "--help"):
        sys.stdout.write(_usage())
        return 0
    name, rest = args[0], args[1:]
    if name not in SUBCOMMANDS:
        sys.stderr.write(_usage())
        return _config_error(f"Unknown command: {name}")
    try:
        setup_django()
    except ImproperlyConfigured as exc:
        return _config_error(str(exc))
    command = load_command_class("magic_mps", SUBCOMMANDS[name])
    # exits with the CommandError return code on failure
    command.run_from_argv(["magic-mps", name, *rest])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
