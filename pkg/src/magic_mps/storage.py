"""MPS container files.

Layout, all integers little-endian uint32:

    b"MAGICMPS" | version | N | physical_dims[N] | shapes[N][3] | data

``data`` is every site tensor in row-major order as little-endian complex128
(real, imaginary float64 pairs). Canonical-form metadata and the log scale live
in a JSON sidecar next to the container (``<path>.json``).
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from magic_mps.exceptions import ConfigurationError
from magic_mps.mps import MatrixProductState

MAGIC = b"MAGICMPS"
FORMAT_VERSION = 1
_UINT = np.dtype("<u4")
_COMPLEX = np.dtype("<c16")


class MpsMetadata(BaseModel):
    format_version: int = FORMAT_VERSION
    n: int = Field(ge=1)
    ortho_center: int | None = None
    log2_scale: float = 0.0
    truncation_error: float = Field(default=0.0, ge=0.0)
    description: str = ""


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def save_mps(
    psi: MatrixProductState,
    path: str | Path,
    description: str = "",
) -> Path:
    target = Path(path)
    header = [FORMAT_VERSION, psi.n, *psi.physical_dims]
    for site in psi.sites:
        header.extend(site.shape)
    chunks = [MAGIC, np.asarray(header, dtype=_UINT).tobytes()]
    for site in psi.sites:
        chunks.append(np.ascontiguousarray(site, dtype=_COMPLEX).tobytes())
    target.write_bytes(b"".join(chunks))
    metadata = MpsMetadata(
        n=psi.n,
        ortho_center=psi.ortho_center,
        log2_scale=psi.log2_scale,
        truncation_error=psi.truncation_error,
        description=description,
    )
    sidecar_path(target).write_text(metadata.model_dump_json(indent=2) + "\n")
    return target


def load_mps(path: str | Path) -> MatrixProductState:
    source = Path(path)
    try:
        payload = source.read_bytes()
    except OSError as exc:
        raise ConfigurationError(f"Cannot read MPS file {source}: {exc}") from exc
    if payload[: len(MAGIC)] != MAGIC:
        raise ConfigurationError(f"{source} is not an MPS container", path=str(source))
    offset = len(MAGIC)
    version, n = _read_uints(payload, offset, 2)
    offset += 2 * _UINT.itemsize
    if version != FORMAT_VERSION:
        raise ConfigurationError(
            f"Unsupported MPS container version {version}", path=str(source)
        )
    dims = _read_uints(payload, offset, n)
    offset += n * _UINT.itemsize
    flat_shapes = _read_uints(payload, offset, 3 * n)
    offset += 3 * n * _UINT.itemsize
    sites = []
    for index in range(n):
        shape = tuple(flat_shapes[3 * index : 3 * index + 3])
        if shape[1] != dims[index]:
            raise ConfigurationError(
                f"site {index} shape {shape} disagrees with physical dim {dims[index]}"
            )
        count = math.prod(shape)
        end = offset + count * _COMPLEX.itemsize
        if end > len(payload):
            raise ConfigurationError(f"{source} is truncated", path=str(source))
        data = np.frombuffer(payload, dtype=_COMPLEX, count=count, offset=offset)
        sites.append(data.astype(np.complex128).reshape(shape))
        offset = end
    if offset != len(payload):
        raise ConfigurationError(f"{source} has trailing bytes", path=str(source))

    metadata = _read_metadata(source, n)
    return MatrixProductState(
        tuple(sites),
        ortho_center=metadata.ortho_center,
        log2_scale=metadata.log2_scale,
        truncation_error=metadata.truncation_error,
    )


def _read_uints(payload: bytes, offset: int, count: int) -> list[int]:
    end = offset + count * _UINT.itemsize
    if end > len(payload):
        raise ConfigurationError("MPS container header is truncated")
    return [int(value) for value in np.frombuffer(payload, _UINT, count, offset)]


def _read_metadata(source: Path, n: int) -> MpsMetadata:
    sidecar = sidecar_path(source)
    if not sidecar.exists():
        return MpsMetadata(n=n)
    metadata = MpsMetadata.model_validate_json(sidecar.read_text())
    if metadata.n != n:
        raise ConfigurationError(
            f"sidecar describes {metadata.n} sites, container holds {n}",
            path=str(sidecar),
        )
    return metadata
