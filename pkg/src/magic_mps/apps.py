from __future__ import annotations

from django.apps import AppConfig


class MagicMpsConfig(AppConfig):
    name = "magic_mps"
    verbose_name = "Magic MPS"

    def ready(self) -> None:
        from .conf import validate_settings

        validate_settings()
