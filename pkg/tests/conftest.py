from __future__ import annotations

import pytest

from magic_mps.tensors import TruncationPolicy


@pytest.fixture()
def exact() -> TruncationPolicy:
    return TruncationPolicy.exact()
