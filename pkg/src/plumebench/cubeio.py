"""Cube container IO.

The container is a single JSON header line followed by a raw little-endian
row-major payload:

    {"magic": "PLBC1", "height": H, "width": W, "band_count": B,
     "wavelengths": [...], "dtype": "f32", "byte_order": "little"}\\n<payload>

Spectral cubes use dtype "f32" and carry their wavelength grid. Masks use
dtype "u8" (values 0/1) and label maps dtype "i32"; both are single-plane
and carry an empty wavelengths array. Data is stored 32-bit on disk and
widened to 64-bit in memory.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, HeaderParseError, TruncatedPayloadError
from .types import PixelMask, RadianceCube, SpectralGrid

MAGIC = "PLBC1"

_DTYPES = {"f32": "<f4", "u8": "u1", "i32": "<i4"}


def _write(path, header: dict, payload: bytes):
    line = json.dumps(header, separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(line.encode("ascii") + b"\n")
        fh.write(payload)


def _read(path):
    path = Path(path)
    with open(path, "rb") as fh:
        line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(line.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderParseError(f"{path}: header is not a valid JSON line") from exc
    if not isinstance(header, dict) or header.get("magic") != MAGIC:
        raise HeaderParseError(f"{path}: missing or wrong magic (expected {MAGIC!r})")
    for key in ("height", "width", "band_count", "wavelengths", "dtype", "byte_order"):
        if key not in header:
            raise HeaderParseError(f"{path}: header missing field {key!r}")
    if header["byte_order"] != "little":
        raise HeaderParseError(f"{path}: unsupported byte order {header['byte_order']!r}")
    if header["dtype"] not in _DTYPES:
        raise HeaderParseError(f"{path}: unsupported dtype {header['dtype']!r}")
    h, w, b = header["height"], header["width"], header["band_count"]
    if not all(isinstance(v, int) and v > 0 for v in (h, w, b)):
        raise DimensionMismatchError(f"{path}: non-positive dimensions in header")
    dtype = np.dtype(_DTYPES[header["dtype"]])
    expected = h * w * b * dtype.itemsize
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(payload)} bytes, header declares {expected}"
        )
    if len(payload) > expected:
        raise DimensionMismatchError(
            f"{path}: payload has {len(payload)} bytes, header declares {expected}"
        )
    data = np.frombuffer(payload, dtype=dtype).reshape(h, w, b)
    return header, data


def write_cube(cube: RadianceCube, path):
    header = {
        "magic": MAGIC,
        "height": cube.height,
        "width": cube.width,
        "band_count": cube.band_count,
        "wavelengths": [float(x) for x in cube.grid.wavelengths],
        "dtype": "f32",
        "byte_order": "little",
    }
    _write(path, header, np.ascontiguousarray(cube.data, dtype="<f4").tobytes())


def read_cube(path) -> RadianceCube:
    header, data = _read(path)
    if header["dtype"] != "f32":
        raise HeaderParseError(f"{path}: expected a spectral cube (dtype f32)")
    wl = header["wavelengths"]
    if len(wl) != header["band_count"]:
        raise DimensionMismatchError(
            f"{path}: {len(wl)} wavelengths for band_count {header['band_count']}"
        )
    return RadianceCube(SpectralGrid(np.asarray(wl)), data.astype(np.float64))


def write_mask(mask: PixelMask, path):
    header = {
        "magic": MAGIC,
        "height": mask.height,
        "width": mask.width,
        "band_count": 1,
        "wavelengths": [],
        "dtype": "u8",
        "byte_order": "little",
    }
    _write(path, header, mask.bits.astype("u1").tobytes())


def read_mask(path) -> PixelMask:
    header, data = _read(path)
    if header["dtype"] != "u8":
        raise HeaderParseError(f"{path}: expected a mask (dtype u8)")
    return PixelMask(data[:, :, 0] != 0)


def write_labels(labels: np.ndarray, path):
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError("label map must be 2-D")
    header = {
        "magic": MAGIC,
        "height": int(labels.shape[0]),
        "width": int(labels.shape[1]),
        "band_count": 1,
        "wavelengths": [],
        "dtype": "i32",
        "byte_order": "little",
    }
    _write(path, header, np.ascontiguousarray(labels, dtype="<i4").tobytes())


def read_labels(path) -> np.ndarray:
    header, data = _read(path)
    if header["dtype"] != "i32":
        raise HeaderParseError(f"{path}: expected a label map (dtype i32)")
    return data[:, :, 0].astype(np.int64)
