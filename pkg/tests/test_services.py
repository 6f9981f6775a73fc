from __future__ import annotations

import io
import json
import math
from pathlib import Path
from typing import Any

import pytest

from magic_mps.exceptions import (
    ConfigurationError,
    ConvergenceError,
    NumericalAbort,
)
from magic_mps.mps import random_mps
from magic_mps.oracle import ising_free_fermion_energy
from magic_mps.pauli_mps import replica_sre
from magic_mps.services import (
    RunConfig,
    build_run_config,
    parallel_map,
    parse_config_file,
    parse_t_doped,
    resolve_policies,
    run,
)
from magic_mps.signals import measure_computed, run_failed
from magic_mps.storage import load_mps, save_mps
from magic_mps.tensors import TruncationPolicy

T_STATE_M2 = math.log2(4.0 / 3.0)


def run_lines(command: str, **options: Any) -> list[dict[str, Any]]:
    stream = io.StringIO()
    run(build_run_config(command, options), stream)
    return [json.loads(line) for line in stream.getvalue().splitlines()]


def test_parse_t_doped() -> None:
    assert parse_t_doped("N=8,NT=4") == (8, 4)
    assert parse_t_doped("nt=0, n=3") == (3, 0)
    for text in ("N=8", "N=2,NT=3", "8,4"):
        with pytest.raises(ValueError):
            parse_t_doped(text)


def test_parse_config_file_formats(tmp_path: Path) -> None:
    lines = tmp_path / "run.cfg"
    lines.write_text("# sweep\nt-doped = N=4,NT=1\nrenyi = 2,3\n")
    payload = tmp_path / "run.json"
    payload.write_text(json.dumps({"t-doped": "N=4,NT=1", "max-iter": 12}))

    assert parse_config_file(lines) == {"t_doped": "N=4,NT=1", "renyi": "2,3"}
    assert parse_config_file(payload) == {"t_doped": "N=4,NT=1", "max_iter": 12}


def test_parse_config_file_errors(tmp_path: Path) -> None:
    broken = tmp_path / "broken.cfg"
    broken.write_text("t-doped N=4\n")
    listed = tmp_path / "listed.json"
    listed.write_text("[1, 2]")

    with pytest.raises(ConfigurationError):
        parse_config_file(broken)
    with pytest.raises(ConfigurationError):
        parse_config_file(listed)
    with pytest.raises(ConfigurationError):
        parse_config_file(tmp_path / "missing.cfg")


def test_build_run_config_prefers_explicit_options(tmp_path: Path) -> None:
    config_file = tmp_path / "run.cfg"
    config_file.write_text("t_doped = N=4,NT=1\nrenyi = 2,3\nchi = 8\n")

    config = build_run_config("sre", {"chi": 16, "seed": None}, config_file)

    assert config.t_doped == "N=4,NT=1"
    assert config.renyi == [2, 3]
    assert config.chi == 16
    assert config.source == "t-doped:N=4,NT=1"


@pytest.mark.parametrize(
    ("command", "options"),
    [
        ("sre", {}),
        ("sre", {"t_doped": "N=4,NT=1", "model": "ising"}),
        ("sre", {"t_doped": "N=4,NT=9"}),
        ("sre", {"t_doped": "N=4,NT=1", "renyi": "0"}),
        ("dmrg", {"t_doped": "N=4,NT=1"}),
        ("sre", {"model": "ising", "qubits": 4}),
        ("sre", {"circuit": "t-doped"}),
        ("sre", {"t_doped": "N=4,NT=1", "derivatives": 1}),
        ("circuit-run", {"t_doped": "N=4,NT=1"}),
        ("sre", {"t_doped": "N=4,NT=1", "unknown": 1}),
    ],
)
def test_build_run_config_rejects_invalid_runs(
    command: str, options: dict[str, Any]
) -> None:
    with pytest.raises(ConfigurationError) as excinfo:
        build_run_config(command, options)

    assert excinfo.value.exit_code == 2
    assert excinfo.value.details["problems"]


def test_resolve_policies_applies_overrides() -> None:
    config = build_run_config(
        "nullity",
        {"t_doped": "N=4,NT=1", "chi": 12, "trunc": 1e-8, "chi_n": 6, "method": "svd"},
    )

    policies = resolve_policies(config)

    assert policies.replica == TruncationPolicy(12, 1e-8)
    assert policies.state == TruncationPolicy(12, 1e-8)
    assert policies.nullity.max_rank == 6
    assert policies.dmrg.max_chi == 12
    assert policies.nullity_method == "svd"
    assert policies.bell_method == "svd"
    assert policies.epsilon == 1e-5


def test_parallel_map_keeps_input_order() -> None:
    def square(value: int) -> int:
        return value * value

    assert parallel_map(square, range(8), jobs=3) == [v * v for v in range(8)]
    assert parallel_map(square, [5], jobs=3) == [25]
    assert parallel_map(square, [], jobs=3) == []


def test_parallel_map_propagates_failures() -> None:
    def fail(value: int) -> int:
        raise RuntimeError(f"item {value}")

    with pytest.raises(RuntimeError):
        parallel_map(fail, range(3), jobs=2)


def test_sre_of_t_doped_state() -> None:
    lines = run_lines("sre", t_doped="N=4,NT=2", renyi="2,3")

    assert [line["n"] for line in lines] == [2.0, 3.0]
    assert lines[0]["value"] == pytest.approx(2 * T_STATE_M2, abs=1e-9)
    assert lines[1]["value"] < lines[0]["value"]
    assert lines[0]["qubits"] == 4
    assert lines[0]["seed"] == 7
    assert lines[0]["provenance"]["config"]["t_doped"] == "N=4,NT=2"
    assert "numpy" in lines[0]["provenance"]["versions"]


def test_seed_ensemble_adds_mean_record() -> None:
    lines = run_lines("sre", circuit="t-doped", qubits=4, n_t=1, depth=3, seeds=3)

    assert [line["seed"] for line in lines[:3]] == [7, 8, 9]
    summary = lines[-1]
    assert summary["measure"] == "sre-mean"
    assert summary["extra"]["count"] == 3
    assert summary["extra"]["seeds"] == [7, 8, 9]
    assert summary["value"] == pytest.approx(T_STATE_M2, abs=1e-7)
    assert summary["extra"]["std"] == pytest.approx(0.0, abs=1e-7)


def test_output_without_timing_is_reproducible() -> None:
    options = {
        "circuit": "t-doped-random",
        "qubits": 4,
        "steps": 3,
        "seeds": 2,
        "include_timing": False,
    }
    first = io.StringIO()
    second = io.StringIO()

    run(build_run_config("bell", options), first)
    run(build_run_config("bell", options), second)

    assert first.getvalue() == second.getvalue()
    assert "wall_time" not in first.getvalue()


def test_measure_signal_receives_every_record() -> None:
    received: list[Any] = []

    def receiver(sender: Any, **kwargs: Any) -> None:
        received.append(kwargs["record"])

    measure_computed.connect(receiver, weak=False)
    try:
        summary = run(
            build_run_config("sre", {"t_doped": "N=3,NT=1", "renyi": "2,3"}),
            io.StringIO(),
        )
    finally:
        measure_computed.disconnect(receiver)

    assert summary.records == 2
    assert [record.n for record in received] == [2, 3]


def test_nullity_reports_stabilizers() -> None:
    (line,) = run_lines("nullity", t_doped="N=4,NT=2")

    assert line["extra"]["nu_rounded"] == 2
    assert line["extra"]["converged"]
    assert len(line["extra"]["stabilizers"]) == 2
    assert line["trace"][0]["k"] == 1
    assert line["extra"]["replica_limit"][0][0] == 2


def test_unconverged_nullity_fails_with_partial_record() -> None:
    failures: list[Any] = []

    def receiver(sender: Any, **kwargs: Any) -> None:
        failures.append(kwargs["exception"])

    run_failed.connect(receiver, weak=False)
    try:
        with pytest.raises(ConvergenceError) as excinfo:
            run(
                build_run_config("nullity", {"t_doped": "N=4,NT=2", "max_iter": 1}),
                io.StringIO(),
            )
    finally:
        run_failed.disconnect(receiver)

    assert excinfo.value.exit_code == 4
    assert excinfo.value.partial.measure == "nullity"
    assert failures == [excinfo.value]


def test_gap_and_strata_of_t_doped_state() -> None:
    (gap,) = run_lines("gap", t_doped="N=2,NT=1")
    (strata,) = run_lines("strata", t_doped="N=2,NT=1")

    assert gap["value"] == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-6)
    assert not gap["extra"]["stabilizer_state"]
    assert strata["value"] == 2.0
    assert strata["extra"]["magnitudes"][1] == pytest.approx(1 / math.sqrt(2), abs=1e-6)


def test_sample_m1_uses_configured_samples() -> None:
    (line,) = run_lines("sample-m1", t_doped="N=3,NT=1", samples=4000)

    assert line["extra"]["n_samples"] == 4000
    assert line["value"] == pytest.approx(0.5, abs=0.1)


def test_dmrg_energy_records() -> None:
    (line,) = run_lines("dmrg", model="ising", qubits=6, parameter=1.0, chi=8)

    expected = ising_free_fermion_energy(6, 1.0)
    assert line["measure"] == "energy"
    assert line["value"] == pytest.approx(expected, abs=1e-6)
    assert line["extra"]["free_fermion_energy"] == pytest.approx(expected)
    assert line["extra"]["parameter"] == 1.0


def test_sre_sweep_writes_csv_rows_with_derivatives() -> None:
    stream = io.StringIO()
    config = build_run_config(
        "sre",
        {
            "model": "ising",
            "qubits": 4,
            "grid": "0.5:1.0:0.25",
            "derivatives": 1,
            "chi": 4,
            "output_format": "csv",
        },
    )

    summary = run(config, stream)

    lines = stream.getvalue().splitlines()
    assert summary.records == 3
    assert lines[0] == "parameter,m_n,truncation_error,chi_used,energy,dm_n"
    assert [line.split(",")[0] for line in lines[1:]] == ["0.5", "0.75", "1.0"]


def test_sre_sweep_jsonl_records() -> None:
    lines = run_lines("sre", model="xxz", qubits=4, grid="0.0,0.5", chi=4)

    assert [line["measure"] for line in lines] == ["sre-sweep", "sre-sweep"]
    assert [line["extra"]["parameter"] for line in lines] == [0.0, 0.5]


def test_saved_states_can_be_measured(tmp_path: Path) -> None:
    psi = random_mps(4, 3, rng_seed=9)
    target = save_mps(psi, tmp_path / "state.mps")

    (line,) = run_lines("sre", mps=str(target))

    expected = replica_sre(psi, 2, TruncationPolicy.exact()).value
    assert line["value"] == pytest.approx(expected, abs=1e-7)
    assert line["extra"]["label"] == "state.mps"


def test_circuit_run_saves_state(tmp_path: Path) -> None:
    target = tmp_path / "bell.mps"

    (line,) = run_lines(
        "circuit-run", circuit="bell-pair", qubits=2, save_state=str(target)
    )

    assert line["extra"]["family"] == "bell-pair"
    assert line["extra"]["max_bond"] == 2
    assert load_mps(target).bond_dims == (2,)


def test_circuit_files_are_loaded(tmp_path: Path) -> None:
    circuit = tmp_path / "magic.txt"
    circuit.write_text("N=2\nH 0\nT 0\n")

    (line,) = run_lines("sre", circuit=str(circuit))

    assert line["value"] == pytest.approx(T_STATE_M2, abs=1e-9)
    assert line["source"] == f"circuit:{circuit}"


def test_oracle_check_passes_on_fixtures() -> None:
    lines = run_lines("oracle-check")

    assert [line["extra"]["label"] for line in lines] == ["t-product", "ghz", "random"]
    assert all(line["extra"]["passed"] for line in lines)
    assert lines[0]["extra"]["nullity_exact"] == 3


def test_unknown_circuit_family_is_a_configuration_error() -> None:
    config = build_run_config("sre", {"circuit": "missing", "qubits": 4})

    with pytest.raises(ConfigurationError):
        run(config, io.StringIO())


def test_run_config_rejects_extra_fields() -> None:
    with pytest.raises(ValueError):
        RunConfig.model_validate({"command": "sre", "t_doped": "N=2,NT=1", "x": 1})


@pytest.mark.parametrize(
    ("command", "options", "field"),
    [
        ("sre", {"t_doped": "N=4,NT=1", "renyi": "1"}, "renyi"),
        ("sre", {"model": "ising", "qubits": 4, "grid": "1.0,0.5"}, "grid"),
        (
            "dmrg",
            {"model": "ising", "qubits": 4, "grid": "0.5,1.0", "derivatives": 2},
            "derivatives",
        ),
    ],
)
def test_invalid_inputs_fail_before_any_computation(
    command: str, options: dict[str, Any], field: str
) -> None:
    stream = io.StringIO()

    with pytest.raises(ConfigurationError) as excinfo:
        run(build_run_config(command, options), stream)

    assert excinfo.value.exit_code == 2
    assert field in [problem["field"] for problem in excinfo.value.details["problems"]]
    assert stream.getvalue() == ""


def test_numerical_value_errors_abort_the_run(monkeypatch: pytest.MonkeyPatch) -> None:
    failures: list[Any] = []

    def collapse(*args: Any, **kwargs: Any) -> Any:
        raise ValueError("cannot normalize a zero vector")

    def receiver(sender: Any, **kwargs: Any) -> None:
        failures.append(kwargs["exception"])

    monkeypatch.setattr("magic_mps.services.replica_sre", collapse)
    run_failed.connect(receiver, weak=False)
    try:
        with pytest.raises(NumericalAbort) as excinfo:
            run(build_run_config("sre", {"t_doped": "N=4,NT=1"}), io.StringIO())
    finally:
        run_failed.disconnect(receiver)

    assert excinfo.value.exit_code == 3
    assert excinfo.value.details["cause"] == "ValueError"
    assert "zero vector" in str(excinfo.value)
    assert len(failures) == 1
