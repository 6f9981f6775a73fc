from __future__ import annotations

import json
import logging
import math
import time
from collections import defaultdict
from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Literal, TextIO, TypeVar, cast, get_args

import numpy as np
from django.utils import timezone
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from magic_mps.circuits import (
    LOCAL_STATES,
    CircuitSpec,
    build_t_doped_state,
    load_circuit,
    run_circuit,
)
from magic_mps.conf import get_jobs_limit, get_settings, get_truncation_policy
from magic_mps.exceptions import (
    ConfigurationError,
    ConvergenceError,
    MagicMpsError,
    NumericalAbort,
)
from magic_mps.ground_states import (
    DmrgConfig,
    SpinChainModel,
    SweepPoint,
    dmrg_ground_state,
    finite_difference,
    parse_grid,
    sre_sweep,
)
from magic_mps.mps import (
    CompressionMethod,
    MatrixProductState,
    ghz_state,
    product_state,
    random_mps,
)
from magic_mps.nullity import (
    NullityRecord,
    extract_stabilizer_group,
    learn_spectrum_strata,
    magic_gap,
    nullity,
    replica_limit_sequence,
)
from magic_mps.oracle import (
    MAX_BELL_QUBITS,
    MAX_SPECTRUM_QUBITS,
    DenseState,
    exact_bell_magic,
    exact_nullity,
    exact_pauli_spectrum,
    exact_sre,
    ising_free_fermion_energy,
)
from magic_mps.pauli_mps import bell_magic, build_pauli_vector, replica_sre, sampled_m1
from magic_mps.records import (
    MeasureRecord,
    Provenance,
    RecordWriter,
    dumps,
    package_versions,
)
from magic_mps.registry import build_circuit, get_circuit_registry
from magic_mps.signals import (
    measure_computed,
    nullity_iteration,
    run_failed,
    sweep_point_completed,
)
from magic_mps.storage import load_mps, save_mps
from magic_mps.tensors import TruncationPolicy

logger = logging.getLogger(__name__)

Command = Literal[
    "sre",
    "bell",
    "nullity",
    "gap",
    "strata",
    "sample-m1",
    "dmrg",
    "circuit-run",
    "oracle-check",
]
COMMANDS: tuple[str, ...] = get_args(Command)
ORACLE_TOLERANCE = 1e-6
ORACLE_FIXTURE_QUBITS = 4

T = TypeVar("T")
R = TypeVar("R")


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Command
    circuit: str | None = None
    t_doped: str | None = None
    model: Literal["ising", "xxz"] | None = None
    mps: str | None = None

    qubits: int | None = Field(default=None, ge=1)
    n_t: int | None = Field(default=None, ge=0)
    depth: int | None = Field(default=None, ge=0)
    steps: int | None = Field(default=None, ge=0)
    n_ccz: int | None = Field(default=None, ge=0)
    parameter: float | None = None
    grid: str | None = None
    derivatives: int = Field(default=0, ge=0, le=2)

    renyi: list[int] = Field(default_factory=lambda: [2])
    chi: int | None = Field(default=None, ge=1)
    chi_p: int | None = Field(default=None, ge=1)
    chi_n: int | None = Field(default=None, ge=1)
    trunc: float | None = Field(default=None, ge=0.0)
    method: Literal["svd", "density_matrix"] | None = None
    epsilon: float | None = Field(default=None, gt=0.0)
    max_iter: int | None = Field(default=None, ge=1)
    max_strata: int = Field(default=8, ge=1)
    samples: int | None = Field(default=None, ge=1)
    seed: int | None = Field(default=None, ge=0)
    seeds: int = Field(default=1, ge=1)

    output: str | None = None
    output_format: Literal["jsonl", "csv"] | None = None
    include_timing: bool = True
    save_state: str | None = None
    jobs: int | None = Field(default=None, ge=1)

    @field_validator("renyi", mode="before")
    @classmethod
    def _split_renyi(cls, value: Any) -> Any:
        if isinstance(value, (int, float)):
            return [value]
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @field_validator("renyi")
    @classmethod
    def _check_renyi(cls, value: list[int]) -> list[int]:
        if not value or any(index < 1 for index in value):
            raise ValueError("Renyi indices must be >= 1")
        return value

    @field_validator("t_doped")
    @classmethod
    def _check_t_doped(cls, value: str | None) -> str | None:
        if value is not None:
            parse_t_doped(value)
        return value

    @field_validator("grid")
    @classmethod
    def _check_grid(cls, value: str | None) -> str | None:
        if value is not None and not parse_grid(value):
            raise ValueError("grid is empty")
        return value

    @model_validator(mode="after")
    def _check_source(self) -> RunConfig:
        sources = [
            name
            for name in ("circuit", "t_doped", "model", "mps")
            if getattr(self, name) is not None
        ]
        if len(sources) > 1:
            raise ValueError(f"exactly one state source allowed, got {sources}")
        if not sources and self.command != "oracle-check":
            raise ValueError("a state source is required")
        if self.command == "dmrg" and self.model is None:
            raise ValueError("dmrg needs a model")
        if self.model is not None:
            if self.qubits is None:
                raise ValueError("model sources need qubits")
            if self.grid is None and self.parameter is None:
                raise ValueError("model sources need a parameter or a grid")
        if self.circuit is not None and not _is_circuit_file(self.circuit):
            if self.qubits is None:
                raise ValueError("circuit families need qubits")
        if self.derivatives and self.grid is None:
            raise ValueError("derivatives need a parameter grid")
        if self.command == "circuit-run" and self.circuit is None:
            raise ValueError("circuit-run needs a circuit")
        return self

    @property
    def source(self) -> str:
        if self.circuit is not None:
            return f"circuit:{self.circuit}"
        if self.t_doped is not None:
            return f"t-doped:{self.t_doped}"
        if self.model is not None:
            return f"model:{self.model}"
        if self.mps is not None:
            return f"mps:{self.mps}"
        return "fixtures"


@dataclass(frozen=True)
class Policies:
    state: TruncationPolicy
    pauli: TruncationPolicy
    replica: TruncationPolicy
    nullity: TruncationPolicy
    dmrg: DmrgConfig
    nullity_method: CompressionMethod
    bell_method: CompressionMethod
    epsilon: float
    max_iter: int
    samples: int
    abort_threshold: float | None

    def describe(self) -> dict[str, Any]:
        return {
            "state": self.state.describe(),
            "pauli": self.pauli.describe(),
            "replica": self.replica.describe(),
            "nullity": self.nullity.describe(),
            "dmrg": {
                "max_chi": self.dmrg.max_chi,
                "sweeps": self.dmrg.sweeps,
                "truncation": self.dmrg.truncation,
            },
        }


@dataclass(frozen=True, eq=False)
class PreparedState:
    label: str
    state: MatrixProductState
    circuit: CircuitSpec | None = None
    parameter: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class WorkItem:
    index: int
    seed: int
    parameter: float | None = None


@dataclass(frozen=True)
class RunSummary:
    command: str
    records: int
    wall_time: float


def parse_t_doped(text: str) -> tuple[int, int]:
    """'N=8,NT=4' -> (8, 4)."""
    values: dict[str, int] = {}
    for part in text.split(","):
        key, sep, raw = part.partition("=")
        if not sep:
            raise ValueError(f"Invalid t-doped value: {text!r}")
        values[key.strip().upper()] = int(raw)
    if set(values) != {"N", "NT"}:
        raise ValueError(f"t-doped value needs N and NT, got {text!r}")
    if not 0 <= values["NT"] <= values["N"]:
        raise ValueError(f"NT must lie between 0 and N in {text!r}")
    return values["N"], values["NT"]


def _is_circuit_file(value: str) -> bool:
    return Path(value).suffix in (".json", ".txt", ".circ") or Path(value).is_file()


def parse_config_file(path: str | Path) -> dict[str, Any]:
    """JSON object, or key=value lines with '#' comments."""
    source = Path(path)
    try:
        text = source.read_text()
    except OSError as exc:
        raise ConfigurationError(f"Cannot read config file {source}: {exc}") from exc
    if source.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(
                f"Invalid JSON config: {exc}", path=str(source)
            ) from exc
        if not isinstance(payload, dict):
            raise ConfigurationError("JSON config must be an object", path=str(source))
        return {str(key).replace("-", "_"): value for key, value in payload.items()}
    values: dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigurationError(
                f"line {number} is not key=value", path=str(source), line=number
            )
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def build_run_config(
    command: str,
    options: Mapping[str, Any],
    config_file: str | Path | None = None,
) -> RunConfig:
    values: dict[str, Any] = {}
    if config_file:
        values.update(parse_config_file(config_file))
    values.update({key: value for key, value in options.items() if value is not None})
    values["command"] = command
    try:
        return RunConfig.model_validate(values)
    except ValidationError as exc:
        problems = [
            {"field": ".".join(str(part) for part in error["loc"]), "msg": error["msg"]}
            for error in exc.errors(include_url=False)
        ]
        raise ConfigurationError(
            "Invalid run configuration", problems=problems
        ) from exc


def resolve_policies(config: RunConfig) -> Policies:
    conf = get_settings()
    trunc = config.trunc
    replica = get_truncation_policy("replica")
    nullity_policy = get_truncation_policy("nullity")
    pauli = get_truncation_policy("pauli")
    if config.chi is not None or trunc is not None:
        replica = TruncationPolicy(
            config.chi or replica.max_rank,
            replica.error_threshold if trunc is None else trunc,
        )
    if config.chi_n is not None:
        nullity_policy = TruncationPolicy(config.chi_n, nullity_policy.error_threshold)
    if config.chi_p is not None:
        pauli = TruncationPolicy(config.chi_p, pauli.error_threshold)
    dmrg = DmrgConfig(
        max_chi=config.chi or conf.dmrg_chi,
        sweeps=conf.dmrg_sweeps,
        tolerance=conf.dmrg_tolerance,
        truncation=conf.sre_truncation if trunc is None else trunc,
    )
    if config.chi is not None:
        state = TruncationPolicy(config.chi, 0.0 if trunc is None else trunc)
    else:
        state = TruncationPolicy(error_threshold=0.0 if trunc is None else trunc)
    return Policies(
        state=state,
        pauli=pauli,
        replica=replica,
        nullity=nullity_policy,
        dmrg=dmrg,
        nullity_method=cast(
            CompressionMethod, config.method or conf.nullity_compression
        ),
        bell_method=cast(CompressionMethod, config.method or conf.bell_compression),
        epsilon=config.epsilon or conf.nullity_epsilon,
        max_iter=config.max_iter or conf.nullity_max_iterations,
        samples=config.samples or conf.samples,
        abort_threshold=conf.truncation_abort,
    )


def check_run_inputs(config: RunConfig) -> Policies:
    """Resolve and check run inputs before any computation starts."""
    problems: list[dict[str, str]] = []

    def problem(field_name: str, message: object) -> None:
        problems.append({"field": field_name, "msg": str(message)})

    try:
        policies = resolve_policies(config)
    except ValueError as exc:
        problem("policy", exc)
    if config.command == "sre" and any(index < 2 for index in config.renyi):
        problem("renyi", "sre needs Renyi indices >= 2; use sample-m1 for n = 1")
    if config.circuit is not None:
        if _is_circuit_file(config.circuit):
            try:
                load_circuit(config.circuit)
            except ValueError as exc:
                problem("circuit", exc)
        elif config.circuit not in get_circuit_registry():
            problem("circuit", f"Unknown circuit family: {config.circuit}")
    if config.mps is not None and not Path(config.mps).is_file():
        problem("mps", f"No MPS file at {config.mps}")
    if config.model is not None and config.qubits is not None:
        grid = [config.parameter or 0.0]
        if config.grid is not None:
            try:
                grid = parse_grid(config.grid)
            except ValueError as exc:
                problem("grid", exc)
        if any(later < earlier for earlier, later in zip(grid, grid[1:])):
            problem("grid", "parameter grid must be sorted")
        for order in range(1, config.derivatives + 1):
            try:
                finite_difference(grid, np.zeros(len(grid)), order)
            except ValueError as exc:
                problem("derivatives", exc)
        try:
            SpinChainModel(config.model, config.qubits, grid[0] if grid else 0.0)
        except ValueError as exc:
            problem("model", exc)
    if problems:
        raise ConfigurationError("Invalid run configuration", problems=problems)
    return policies


def parallel_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    jobs: int | None = None,
) -> list[R]:
    """Ordered map over a thread pool capped at ``jobs`` workers."""
    work = list(items)
    limit = jobs or get_jobs_limit()
    if limit == 1 or len(work) <= 1:
        return [fn(item) for item in work]

    def guarded(item: T) -> R:
        try:
            return fn(item)
        except Exception:
            logger.exception("Work item failed", extra={"item": repr(item)})
            raise

    with ThreadPoolExecutor(max_workers=min(limit, len(work))) as executor:
        return list(executor.map(guarded, work))


def _oracle_fixtures(seed: int) -> list[PreparedState]:
    n = ORACLE_FIXTURE_QUBITS
    return [
        PreparedState("t-product", product_state([LOCAL_STATES["t"]] * 3)),
        PreparedState("ghz", ghz_state(n)),
        PreparedState("random", random_mps(n, 4, seed)),
    ]


def _circuit_for(config: RunConfig, seed: int) -> CircuitSpec:
    assert config.circuit is not None
    if _is_circuit_file(config.circuit):
        return load_circuit(config.circuit)
    params: dict[str, Any] = {"n": config.qubits, "seed": seed}
    for name in ("depth", "n_t", "steps", "n_ccz"):
        value = getattr(config, name)
        if value is not None:
            params[name] = value
    if config.circuit == "random-clifford" and config.n_t:
        params["initial"] = "t-doped"
    try:
        return build_circuit(config.circuit, **params)
    except KeyError as exc:
        raise ConfigurationError(str(exc.args[0]), family=config.circuit) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(
            f"Cannot build circuit {config.circuit}: {exc}", family=config.circuit
        ) from exc


def prepare_states(
    config: RunConfig, policies: Policies, item: WorkItem
) -> list[PreparedState]:
    if config.circuit is not None:
        circuit = _circuit_for(config, item.seed)
        state = run_circuit(circuit, policies.state)
        return [
            PreparedState(
                circuit.family,
                state,
                circuit=circuit,
                extra={"layout": circuit.params.get("layout", "explicit")},
            )
        ]
    if config.t_doped is not None:
        n, n_t = parse_t_doped(config.t_doped)
        return [PreparedState("t-doped", build_t_doped_state(n, n_t))]
    if config.mps is not None:
        return [PreparedState(Path(config.mps).name, load_mps(config.mps))]
    if config.model is not None:
        assert config.qubits is not None and item.parameter is not None
        model = SpinChainModel(config.model, config.qubits, item.parameter)
        ground = dmrg_ground_state(model, policies.dmrg)
        if not ground.converged:
            logger.warning(
                "Using unconverged DMRG state",
                extra={"model": model.kind, "parameter": item.parameter},
            )
        return [
            PreparedState(
                config.model,
                ground.state,
                parameter=item.parameter,
                extra={"energy": ground.energy, "dmrg_converged": ground.converged},
            )
        ]
    return _oracle_fixtures(item.seed)


@dataclass
class MeasureContext:
    config: RunConfig
    policies: Policies
    item: WorkItem
    prepared: PreparedState
    provenance: Provenance

    def record(
        self,
        measure: str,
        value: float | None,
        started: float,
        *,
        n: float | None = None,
        trace: Sequence[Any] = (),
        extra: Mapping[str, Any] | None = None,
    ) -> MeasureRecord:
        payload = dict(self.prepared.extra)
        payload["label"] = self.prepared.label
        if self.prepared.parameter is not None:
            payload["parameter"] = self.prepared.parameter
        payload.update(extra or {})
        return MeasureRecord(
            measure=measure,
            value=value,
            n=n,
            qubits=self.prepared.state.n,
            source=self.config.source,
            truncation_policy=self.policies.describe(),
            trace=[_trace_entry(entry) for entry in trace],
            seed=self.item.seed,
            wall_time=time.perf_counter() - started,
            created_at=timezone.now().isoformat(),
            extra=payload,
            provenance=self.provenance,
        )


def _trace_entry(entry: Any) -> dict[str, Any]:
    if isinstance(entry, Mapping):
        return dict(entry)
    if hasattr(entry, "__dataclass_fields__"):
        return {name: getattr(entry, name) for name in entry.__dataclass_fields__}
    return {"value": entry}


def _measure_sre(context: MeasureContext) -> list[MeasureRecord]:
    records = []
    for index in context.config.renyi:
        started = time.perf_counter()
        result = replica_sre(
            context.prepared.state,
            index,
            context.policies.replica,
            context.policies.pauli,
            abort_threshold=context.policies.abort_threshold,
        )
        records.append(
            context.record(
                "sre",
                result.value,
                started,
                n=index,
                trace=[
                    {"step": step, "truncation_error": error}
                    for step, error in enumerate(result.step_errors, start=1)
                ],
                extra={
                    "density": result.density,
                    "log2_norm_squared": result.log2_norm_squared,
                    "max_bond": result.max_bond,
                },
            )
        )
    return records


def _measure_bell(context: MeasureContext) -> list[MeasureRecord]:
    started = time.perf_counter()
    result = bell_magic(
        context.prepared.state,
        context.policies.replica,
        method=context.policies.bell_method,
        pauli_policy=context.policies.pauli,
    )
    return [
        context.record(
            "bell",
            result.additive,
            started,
            extra={
                "bell_magic": result.value,
                "contraction": result.contraction,
                "truncation_error": result.truncation_error,
                "max_bond": result.max_bond,
            },
        )
    ]


def _measure_nullity(context: MeasureContext) -> list[MeasureRecord]:
    started = time.perf_counter()
    policies = context.policies

    def on_iteration(record: NullityRecord) -> None:
        nullity_iteration.send(sender=RunConfig, record=record, k=record.k)

    result = nullity(
        context.prepared.state,
        policies.nullity,
        policies.epsilon,
        policies.max_iter,
        method=policies.nullity_method,
        pauli_policy=policies.pauli,
        on_iteration=on_iteration,
    )
    record = context.record(
        "nullity",
        result.nu,
        started,
        trace=result.trace.records,
        extra={
            "nu_rounded": result.nu_rounded,
            "rounding_gap": result.rounding_gap,
            "converged": result.converged,
            "iterations": result.trace.iterations,
            "replica_limit": replica_limit_sequence(result.trace),
        },
    )
    if not result.converged:
        raise ConvergenceError(
            "nullity iteration did not converge",
            partial=record,
            iterations=result.trace.iterations,
            estimates=result.trace.estimates,
        )
    group = extract_stabilizer_group(
        result.fixed_point, result.pauli, result.nu, context.item.seed
    )
    record.extra["stabilizers"] = group.labels
    return [record]


def _measure_gap(context: MeasureContext) -> list[MeasureRecord]:
    started = time.perf_counter()
    policies = context.policies
    gap = magic_gap(
        context.prepared.state,
        policies.nullity,
        policies.epsilon,
        policies.max_iter,
        method=policies.nullity_method,
        rng_seed=context.item.seed,
    )
    return [
        context.record(
            "gap",
            gap.value,
            started,
            extra={
                "stabilizer_state": gap.stabilizer_state,
                "representative": (
                    None if gap.representative is None else str(gap.representative)
                ),
                "nullity": gap.nullity.nu,
                "residual_weight": gap.residual_weight,
            },
        )
    ]


def _measure_strata(context: MeasureContext) -> list[MeasureRecord]:
    started = time.perf_counter()
    policies = context.policies
    strata = learn_spectrum_strata(
        context.prepared.state,
        policies.nullity,
        policies.epsilon,
        context.config.max_strata,
        policies.max_iter,
        method=policies.nullity_method,
        rng_seed=context.item.seed,
    )
    levels = [
        {
            "level": stratum.level,
            "magnitude": stratum.magnitude,
            "support_size": stratum.support_size,
            "representatives": [str(pauli) for pauli in stratum.representatives],
        }
        for stratum in strata
    ]
    return [
        context.record(
            "strata",
            float(len(strata)),
            started,
            trace=levels,
            extra={"magnitudes": [stratum.magnitude for stratum in strata]},
        )
    ]


def _measure_sample_m1(context: MeasureContext) -> list[MeasureRecord]:
    started = time.perf_counter()
    p = build_pauli_vector(context.prepared.state, context.policies.pauli)
    estimate = sampled_m1(p, context.policies.samples, context.item.seed)
    return [
        context.record(
            "sample-m1",
            estimate.mean,
            started,
            n=1,
            extra={
                "standard_error": estimate.standard_error,
                "n_samples": estimate.n_samples,
            },
        )
    ]


def _measure_energy(context: MeasureContext) -> list[MeasureRecord]:
    started = time.perf_counter()
    extra: dict[str, Any] = {"max_bond": context.prepared.state.max_bond}
    config = context.config
    parameter = context.prepared.parameter
    if config.model == "ising" and config.qubits and parameter is not None:
        extra["free_fermion_energy"] = ising_free_fermion_energy(
            config.qubits, parameter
        )
    energy = context.prepared.extra.get("energy")
    return [context.record("energy", energy, started, extra=extra)]


def _measure_circuit_run(context: MeasureContext) -> list[MeasureRecord]:
    started = time.perf_counter()
    circuit = context.prepared.circuit
    state = context.prepared.state
    assert circuit is not None
    extra: dict[str, Any] = {
        "family": circuit.family,
        "gates": len(circuit.gates),
        "depth": circuit.depth,
        "t_count": circuit.count("T") + circuit.n_t,
        "max_bond": state.max_bond,
        "truncation_error": state.truncation_error,
    }
    target = context.config.save_state
    if target:
        path = Path(target)
        if context.config.seeds > 1:
            path = path.with_name(f"{path.stem}-{context.item.seed}{path.suffix}")
        save_mps(state, path, description=dumps(circuit.describe()))
        extra["saved_to"] = str(path)
    return [context.record("circuit-run", None, started, extra=extra)]


def _measure_oracle(context: MeasureContext) -> list[MeasureRecord]:
    started = time.perf_counter()
    state = context.prepared.state
    if state.n > MAX_SPECTRUM_QUBITS:
        raise ConfigurationError(
            f"oracle-check supports at most {MAX_SPECTRUM_QUBITS} qubits", n=state.n
        )
    spectrum = exact_pauli_spectrum(DenseState.from_mps(state))
    exact_policy = TruncationPolicy.exact()
    deviations: dict[str, float] = {}
    extra: dict[str, Any] = {"purity": spectrum.purity}
    for index in context.config.renyi:
        expected = exact_sre(spectrum, index)
        computed = replica_sre(state, index, exact_policy).value
        deviations[f"sre_{index}"] = abs(expected - computed)
        extra[f"sre_{index}_exact"] = expected
        extra[f"sre_{index}_mps"] = computed
    if state.n <= MAX_BELL_QUBITS:
        _, expected_bell = exact_bell_magic(spectrum)
        computed_bell = bell_magic(state, exact_policy).additive
        deviations["bell"] = abs(expected_bell - computed_bell)
        extra["bell_exact"] = expected_bell
        extra["bell_mps"] = computed_bell
    nu_exact, generators = exact_nullity(spectrum)
    nu_mps = nullity(state, exact_policy, method="svd").nu_rounded
    extra["nullity_exact"] = nu_exact
    extra["nullity_mps"] = nu_mps
    extra["stabilizers"] = [str(generator) for generator in generators]
    worst = max(deviations.values())
    extra["passed"] = worst <= ORACLE_TOLERANCE and nu_exact == nu_mps
    return [context.record("oracle-check", worst, started, extra=extra)]


MEASURES: dict[str, Callable[[MeasureContext], list[MeasureRecord]]] = {
    "sre": _measure_sre,
    "bell": _measure_bell,
    "nullity": _measure_nullity,
    "gap": _measure_gap,
    "strata": _measure_strata,
    "sample-m1": _measure_sample_m1,
    "dmrg": _measure_energy,
    "circuit-run": _measure_circuit_run,
    "oracle-check": _measure_oracle,
}


def _work_items(config: RunConfig, base_seed: int) -> list[WorkItem]:
    if config.model is not None:
        grid = (
            parse_grid(config.grid)
            if config.grid is not None
            else [float(config.parameter or 0.0)]
        )
        return [
            WorkItem(index=index, seed=base_seed + index, parameter=value)
            for index, value in enumerate(grid)
        ]
    return [
        WorkItem(index=index, seed=base_seed + index) for index in range(config.seeds)
    ]


def measure_item(
    config: RunConfig,
    policies: Policies,
    provenance: Provenance,
    item: WorkItem,
) -> list[MeasureRecord]:
    measure = MEASURES[config.command]
    records: list[MeasureRecord] = []
    for prepared in prepare_states(config, policies, item):
        context = MeasureContext(config, policies, item, prepared, provenance)
        records.extend(measure(context))
    return records


def ensemble_records(
    records: Sequence[MeasureRecord], provenance: Provenance
) -> list[MeasureRecord]:
    """One '<measure>-mean' record per (measure, n) across seeds."""
    groups: dict[tuple[str, float | None], list[MeasureRecord]] = defaultdict(list)
    for record in records:
        if record.value is not None:
            groups[(record.measure, record.n)].append(record)
    summaries = []
    for (measure, index), members in groups.items():
        values = np.array([member.value for member in members], dtype=np.float64)
        spread = float(values.std(ddof=1)) if values.size > 1 else 0.0
        summaries.append(
            MeasureRecord(
                measure=f"{measure}-mean",
                value=float(values.mean()),
                n=index,
                qubits=members[0].qubits,
                source=members[0].source,
                truncation_policy=members[0].truncation_policy,
                seed=members[0].seed,
                extra={
                    "count": int(values.size),
                    "std": spread,
                    "standard_error": spread / math.sqrt(values.size),
                    "seeds": [member.seed for member in members],
                },
                provenance=provenance,
            )
        )
    return summaries


def _sweep_rows(
    config: RunConfig, points: Sequence[SweepPoint]
) -> list[dict[str, Any]]:
    rows = [
        {
            "parameter": point.parameter,
            "m_n": point.m_n,
            "truncation_error": point.truncation_error,
            "chi_used": point.chi_used,
            "energy": point.energy,
        }
        for point in points
    ]
    parameters = [point.parameter for point in points]
    values = [point.m_n for point in points]
    for order, column in ((1, "dm_n"), (2, "d2m_n")):
        if config.derivatives < order:
            continue
        table = finite_difference(parameters, values, order)
        for row, derivative in zip(rows, table.derivative):
            row[column] = float(derivative)
    return rows


def run_sre_sweep(
    config: RunConfig,
    policies: Policies,
    writer: RecordWriter,
    provenance: Provenance,
    jobs: int,
) -> None:
    assert config.model is not None and config.qubits is not None
    grid = parse_grid(config.grid or "")
    for renyi_n in config.renyi:
        started = time.perf_counter()
        points = sre_sweep(
            config.model,
            config.qubits,
            grid,
            renyi_n=renyi_n,
            dmrg_config=policies.dmrg,
            policy=policies.replica,
            pauli_policy=policies.pauli,
            map_fn=partial(parallel_map, jobs=jobs),
        )
        for point in points:
            sweep_point_completed.send(sender=RunConfig, point=point)
        for row in _sweep_rows(config, points):
            if writer.output_format == "csv":
                writer.write(row)
                continue
            record = MeasureRecord(
                measure="sre-sweep",
                value=row["m_n"],
                n=renyi_n,
                qubits=config.qubits,
                source=config.source,
                truncation_policy=policies.describe(),
                seed=None,
                wall_time=time.perf_counter() - started,
                created_at=timezone.now().isoformat(),
                extra=row,
                provenance=provenance,
            )
            writer.write(record)
            measure_computed.send(sender=RunConfig, record=record)


def run(config: RunConfig, stream: TextIO) -> RunSummary:
    started = time.perf_counter()
    conf = get_settings()
    jobs = config.jobs or get_jobs_limit()
    writer = RecordWriter(
        stream,
        config.output_format or conf.output_format,
        include_timing=config.include_timing,
    )
    provenance = Provenance(
        config=config.model_dump(mode="json", exclude_none=True),
        versions=package_versions(),
    )
    logger.info(
        "Starting run",
        extra={"command": config.command, "source": config.source, "jobs": jobs},
    )
    try:
        policies = check_run_inputs(config)
        if config.command == "sre" and config.model is not None and config.grid:
            run_sre_sweep(config, policies, writer, provenance, jobs)
        else:
            base_seed = conf.seed if config.seed is None else config.seed
            items = _work_items(config, base_seed)
            worker = partial(measure_item, config, policies, provenance)
            batches = parallel_map(worker, items, jobs=jobs)
            emitted = [record for batch in batches for record in batch]
            if config.seeds > 1:
                emitted.extend(ensemble_records(emitted, provenance))
            for record in emitted:
                writer.write(record)
                measure_computed.send(sender=RunConfig, record=record)
            _check_oracle(config, emitted)
    except MagicMpsError as exc:
        run_failed.send(sender=RunConfig, config=config, exception=exc)
        raise
    except ValueError as exc:
        run_failed.send(sender=RunConfig, config=config, exception=exc)
        raise NumericalAbort(str(exc), cause=type(exc).__name__) from exc
    return RunSummary(
        command=config.command,
        records=writer.count,
        wall_time=time.perf_counter() - started,
    )


def _check_oracle(config: RunConfig, records: Sequence[MeasureRecord]) -> None:
    if config.command != "oracle-check":
        return
    failures = [
        record.extra.get("label", "")
        for record in records
        if not record.extra.get("passed", True)
    ]
    if failures:
        raise NumericalAbort("oracle mismatch", failures=failures)
