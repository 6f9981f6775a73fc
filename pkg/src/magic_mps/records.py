from __future__ import annotations

import csv
import dataclasses
import json
import math
import threading
from collections.abc import Mapping
from importlib import metadata
from typing import Any, TextIO

import django
import numpy as np
import scipy
from pydantic import BaseModel, Field

TIMING_FIELDS = ("wall_time", "created_at")
SWEEP_COLUMNS = ("parameter", "m_n", "truncation_error", "chi_used", "energy")


class Provenance(BaseModel):
    config: dict[str, Any] = Field(default_factory=dict)
    versions: dict[str, str] = Field(default_factory=dict)


class MeasureRecord(BaseModel):
    measure: str
    value: float | None = None
    n: float | None = None
    qubits: int
    source: str = ""
    truncation_policy: dict[str, Any] = Field(default_factory=dict)
    trace: list[dict[str, Any]] = Field(default_factory=list)
    seed: int | None = None
    wall_time: float | None = None
    created_at: str | None = None
    extra: dict[str, Any] = Field(default_factory=dict)
    provenance: Provenance = Field(default_factory=Provenance)

    def csv_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "measure": self.measure,
            "value": self.value,
            "n": self.n,
            "qubits": self.qubits,
            "source": self.source,
            "seed": self.seed,
        }
        for key, item in sorted(self.extra.items()):
            if isinstance(item, (str, int, float, bool)) or item is None:
                row[key] = item
        return row


def record_schema() -> dict[str, Any]:
    return MeasureRecord.model_json_schema()


def package_versions() -> dict[str, str]:
    try:
        own = metadata.version("magic-mps")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {
        "magic_mps": own,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "django": django.get_version(),
    }


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return _to_jsonable(value.model_dump())
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            field.name: _to_jsonable(getattr(value, field.name))
            for field in dataclasses.fields(value)
        }
    if isinstance(value, dict):
        return {str(key): _to_jsonable(item) for key, item in value.items()}
    if isinstance(value, np.ndarray):
        return _to_jsonable(value.tolist())
    if isinstance(value, (list, tuple, set)):
        return [_to_jsonable(item) for item in value]
    if isinstance(value, np.generic):
        return _to_jsonable(value.item())
    if isinstance(value, complex):
        return {"re": _to_jsonable(value.real), "im": _to_jsonable(value.imag)}
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, (str, int, bool)) or value is None:
        return value
    return str(value)


def dumps(value: Any) -> str:
    return json.dumps(_to_jsonable(value), sort_keys=True, ensure_ascii=True)


class RecordWriter:
    """Serializes rows from any thread onto one stream."""

    def __init__(
        self,
        stream: TextIO,
        output_format: str = "jsonl",
        include_timing: bool = True,
    ) -> None:
        if output_format not in ("jsonl", "csv"):
            raise ValueError(f"Unknown output format: {output_format}")
        self.stream = stream
        self.output_format = output_format
        self.include_timing = include_timing
        self.count = 0
        self._lock = threading.Lock()
        self._csv: csv.DictWriter[str] | None = None

    def write(self, row: MeasureRecord | Mapping[str, Any]) -> None:
        with self._lock:
            if self.output_format == "jsonl":
                self._write_json(row)
            else:
                self._write_csv(row)
            self.count += 1

    def _write_json(self, row: MeasureRecord | Mapping[str, Any]) -> None:
        payload = _to_jsonable(row)
        if not self.include_timing:
            for name in TIMING_FIELDS:
                payload.pop(name, None)
        # one write per line; Django's OutputWrapper appends its own ending
        self.stream.write(dumps(payload) + "\n")

    def _write_csv(self, row: MeasureRecord | Mapping[str, Any]) -> None:
        values = row.csv_row() if isinstance(row, MeasureRecord) else dict(row)
        values = _to_jsonable(values)
        if self._csv is None:
            self._csv = csv.DictWriter(
                self.stream,
                fieldnames=list(values),
                extrasaction="ignore",
                lineterminator="\n",
            )
            self._csv.writeheader()
        self._csv.writerow(values)
