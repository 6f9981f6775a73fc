from __future__ import annotations

import io
import json
import math
import threading

import numpy as np
import pytest

from magic_mps.records import (
    MeasureRecord,
    RecordWriter,
    dumps,
    package_versions,
    record_schema,
)


def make_record(**overrides: object) -> MeasureRecord:
    values: dict[str, object] = {
        "measure": "sre",
        "value": 0.415,
        "n": 2,
        "qubits": 4,
        "source": "t-doped:N=4,NT=1",
        "seed": 3,
        "wall_time": 0.25,
        "created_at": "2026-01-01T00:00:00+00:00",
        "extra": {"density": 0.1, "stabilizers": ["+ZZ"]},
    }
    values.update(overrides)
    return MeasureRecord.model_validate(values)


def test_dumps_handles_numerical_values() -> None:
    payload = json.loads(
        dumps(
            {
                "array": np.arange(3),
                "scalar": np.float64(0.5),
                "phase": 1j,
                "missing": math.nan,
                "pair": (1, 2),
            }
        )
    )

    assert payload == {
        "array": [0, 1, 2],
        "scalar": 0.5,
        "phase": {"re": 0.0, "im": 1.0},
        "missing": None,
        "pair": [1, 2],
    }


def test_jsonl_writer_drops_timing_fields() -> None:
    stream = io.StringIO()
    writer = RecordWriter(stream, include_timing=False)

    writer.write(make_record())

    line = json.loads(stream.getvalue())
    assert "wall_time" not in line
    assert "created_at" not in line
    assert line["extra"]["stabilizers"] == ["+ZZ"]
    assert writer.count == 1


def test_csv_writer_keeps_scalar_extras_only() -> None:
    stream = io.StringIO()
    writer = RecordWriter(stream, output_format="csv")

    writer.write(make_record())
    writer.write(make_record(value=0.83, seed=4))

    lines = stream.getvalue().splitlines()
    assert lines[0] == "measure,value,n,qubits,source,seed,density"
    assert lines[2].startswith("sre,0.83,2.0,4,")
    assert len(lines) == 3


def test_writer_serializes_concurrent_rows() -> None:
    stream = io.StringIO()
    writer = RecordWriter(stream)

    def emit(index: int) -> None:
        for _ in range(20):
            writer.write({"measure": "sre", "worker": index})

    threads = [threading.Thread(target=emit, args=(index,)) for index in range(4)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()

    lines = stream.getvalue().splitlines()
    assert len(lines) == 80
    assert all(json.loads(line)["measure"] == "sre" for line in lines)


def test_writer_rejects_unknown_format() -> None:
    with pytest.raises(ValueError):
        RecordWriter(io.StringIO(), output_format="xml")


def test_schema_and_versions() -> None:
    schema = record_schema()

    assert "measure" in schema["required"]
    assert "provenance" in schema["properties"]
    assert {"magic_mps", "numpy", "scipy", "django"} <= set(package_versions())
