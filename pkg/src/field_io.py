"""
Flat binary container for fields: magic, JSON header, then interleaved
real/imaginary doubles in row-major (x1, x2, y1, y2) order.
"""

import json
import struct
from pathlib import Path
from typing import Dict, Any, Union

import numpy as np

from grids import grid_from_dict
from field_core import WaveguideField, Representation

MAGIC = b"WGLB"
CONTAINER_VERSION = 1


def write_field(path: Union[str, Path], f: WaveguideField, metadata: Dict[str, Any] = None) -> Path:
    """
    Persist a field.

    Args:
        path: Target file
        f: Field to write (stored in its current representation)
        metadata: Optional extra header entries

    Returns:
        Path written
    """
    path = Path(path)
    header = {
        "version": CONTAINER_VERSION,
        "grid": f.spec.to_dict(),
        "repr": f.repr.value,
        "endianness": "little",
        "shape": list(f.data.shape),
        "dtype": "complex128",
    }
    if metadata:
        header["metadata"] = metadata
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(f.data, dtype="<c16").tobytes(order="C")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)
    return path


def read_header(path: Union[str, Path]) -> Dict[str, Any]:
    """Read only the JSON header of a container."""
    with open(path, "rb") as fh:
        return _read_header(fh, path)


def _read_header(fh, path) -> Dict[str, Any]:
    if fh.read(4) != MAGIC:
        raise ValueError(f"{path} is not a field container")
    (length,) = struct.unpack("<I", fh.read(4))
    header = json.loads(fh.read(length).decode("utf-8"))
    if header.get("version") != CONTAINER_VERSION:
        raise ValueError(f"Unsupported container version {header.get('version')} in {path}")
    return header


def read_field(path: Union[str, Path]) -> WaveguideField:
    """
    Load a field written by write_field.

    Raises:
        ValueError: On a bad magic, version or truncated payload
    """
    with open(path, "rb") as fh:
        header = _read_header(fh, path)
        raw = fh.read()
    dtype = "<c16" if header.get("endianness", "little") == "little" else ">c16"
    shape = tuple(header["shape"])
    expected = int(np.prod(shape)) * 16
    if len(raw) != expected:
        raise ValueError(f"{path}: payload has {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype=dtype).reshape(shape).astype(np.complex128)
    return WaveguideField(grid_from_dict(header["grid"]), data, Representation(header["repr"]))
