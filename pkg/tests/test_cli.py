from __future__ import annotations

import json
import logging

import pytest

from magic_mps.cli import SUBCOMMANDS, StructuredFormatter, build_logging, main


def test_help_lists_commands(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["--help"]) == 0
    assert main([]) == 0

    out = capsys.readouterr().out
    assert "usage: magic-mps" in out
    for name in SUBCOMMANDS:
        assert name in out


def test_unknown_command_is_a_configuration_error(
    capsys: pytest.CaptureFixture[str],
) -> None:
    assert main(["teleport"]) == 2

    payload = json.loads(capsys.readouterr().err.splitlines()[-1])
    assert payload == {
        "error": "ConfigurationError",
        "exit_code": 2,
        "message": "Unknown command: teleport",
    }


def test_subcommand_runs_through_django(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["sre", "--t-doped", "N=2,NT=0", "--no-timing"]) == 0

    record = json.loads(capsys.readouterr().out)
    assert record["value"] == pytest.approx(0.0, abs=1e-12)
    assert record["source"] == "t-doped:N=2,NT=0"


def test_failing_subcommand_exits_with_its_code(
    capsys: pytest.CaptureFixture[str],
) -> None:
    with pytest.raises(SystemExit) as excinfo:
        main(["bell", "--t-doped", "N=2,NT=1", "--model", "xxz"])

    assert excinfo.value.code == 2
    first_line = capsys.readouterr().err.splitlines()[0]
    assert json.loads(first_line)["error"] == "ConfigurationError"


def test_structured_formatter_appends_extra_fields() -> None:
    formatter = StructuredFormatter("%(levelname)s %(message)s")
    record = logging.makeLogRecord(
        {"msg": "Computed", "levelname": "INFO", "nu": 2.0, "qubits": 4}
    )

    assert formatter.format(record) == "INFO Computed nu=2.0 qubits=4"


def test_build_logging_routes_package_logger() -> None:
    config = build_logging("DEBUG")

    assert config["loggers"]["magic_mps"]["level"] == "DEBUG"
    assert config["handlers"]["stderr"]["formatter"] == "structured"
