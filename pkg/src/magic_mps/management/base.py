from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

from django.core.management.base import BaseCommand, CommandError

from magic_mps.exceptions import ConvergenceError, MagicMpsError
from magic_mps.records import MeasureRecord, dumps
from magic_mps.services import RunConfig, build_run_config, run

VERBOSITY_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO}


def _partial_payload(partial: Any) -> Any:
    if isinstance(partial, MeasureRecord):
        return partial
    if isinstance(partial, list):
        return [
            {
                "level": getattr(item, "level", index),
                "magnitude": getattr(item, "magnitude", None),
                "support_size": getattr(item, "support_size", None),
            }
            for index, item in enumerate(partial)
        ]
    return None


class MeasureCommand(BaseCommand):
    """Shared flags; subclasses set ``command_name``."""

    command_name = ""

    def add_arguments(self, parser: Any) -> None:
        parser.add_argument("--config", help="key=value or JSON run config file.")

        source = parser.add_argument_group("state source")
        source.add_argument("--circuit", help="Circuit family or circuit file.")
        source.add_argument("--t-doped", dest="t_doped", help="e.g. N=8,NT=4")
        source.add_argument("--model", choices=["ising", "xxz"])
        source.add_argument("--mps", help="Serialized MPS container.")

        family = parser.add_argument_group("family parameters")
        family.add_argument("--N", dest="qubits", type=int)
        family.add_argument("--NT", dest="n_t", type=int)
        family.add_argument("--depth", type=int)
        family.add_argument("--steps", type=int)
        family.add_argument("--n-ccz", dest="n_ccz", type=int)
        family.add_argument(
            "--parameter", "--h", "--delta", dest="parameter", type=float
        )
        family.add_argument(
            "--grid",
            "--h-grid",
            "--delta-grid",
            dest="grid",
            help="start:stop:step or a comma list.",
        )
        family.add_argument("--derivatives", type=int, choices=[0, 1, 2])

        numerics = parser.add_argument_group("numerics")
        numerics.add_argument("--n", dest="renyi", help="Renyi index, or a list.")
        numerics.add_argument("--chi", type=int)
        numerics.add_argument("--chi-p", dest="chi_p", type=int)
        numerics.add_argument("--chi-n", dest="chi_n", type=int)
        numerics.add_argument("--trunc", type=float)
        numerics.add_argument("--method", choices=["svd", "density_matrix"])
        numerics.add_argument("--epsilon", type=float)
        numerics.add_argument("--max-iter", dest="max_iter", type=int)
        numerics.add_argument("--max-strata", dest="max_strata", type=int)
        numerics.add_argument("--samples", type=int)
        numerics.add_argument("--seed", type=int)
        numerics.add_argument("--seeds", type=int, help="Seed-ensemble size.")
        numerics.add_argument("--jobs", type=int)

        output = parser.add_argument_group("output")
        output.add_argument("--output", help="Write records here instead of stdout.")
        output.add_argument(
            "--csv",
            dest="output_format",
            action="store_const",
            const="csv",
        )
        output.add_argument(
            "--format", dest="output_format", choices=["jsonl", "csv"]
        )
        output.add_argument(
            "--no-timing",
            dest="include_timing",
            action="store_false",
            default=None,
            help="Drop wall_time and created_at for byte-stable output.",
        )
        output.add_argument("--save-state", dest="save_state")

    def handle(self, *args: Any, **options: Any) -> None:
        logging.getLogger("magic_mps").setLevel(
            VERBOSITY_LEVELS.get(options["verbosity"], logging.DEBUG)
        )
        fields = {
            name: options.get(name)
            for name in RunConfig.model_fields
            if name != "command"
        }
        try:
            config = build_run_config(self.command_name, fields, options.get("config"))
            self._run(config)
        except MagicMpsError as exc:
            payload = exc.to_payload()
            if isinstance(exc, ConvergenceError):
                payload["partial"] = _partial_payload(exc.partial)
            self.stderr.write(dumps(payload))
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

    def _run(self, config: RunConfig) -> None:
        if not config.output:
            run(config, self.stdout)
            return
        target = Path(config.output)
        with target.open("w", newline="") as handle:
            summary = run(config, handle)
        self.stdout.write(f"Wrote {summary.records} records to {target}.")
