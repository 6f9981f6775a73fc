from __future__ import annotations

import json
from typing import Any

from django.core.management.base import BaseCommand

from magic_mps.records import record_schema


class Command(BaseCommand):
    help = "Print the JSON schema of emitted measure records."

    def handle(self, *args: Any, **options: Any) -> None:
        self.stdout.write(json.dumps(record_schema(), indent=2, sort_keys=True))
