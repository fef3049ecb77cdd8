"""File formats for sampled fields and grayscale images.

Two zero-dependency containers are used throughout:

* a binary complex-field raster (magic ``CFLD``): little-endian header
  with the grid size, pitch and center, followed by interleaved
  real/imag float64 samples in row-major order;
* binary PGM (P5) for 8-bit or 16-bit grayscale images.  16-bit sample
  values are big-endian, as the format requires.

Both writers are deterministic: identical inputs produce byte-identical
files.
"""

from __future__ import annotations

import re
import struct
from pathlib import Path

import numpy as np

from .modes import ComplexField

_RASTER_MAGIC = b"CFLD"
_HEADER = struct.Struct("<4sIddd")  # magic, n, pitch, cx, cy


def write_field_raster(field: ComplexField, path: str | Path) -> None:
    """Write a ComplexField to the binary raster format."""
    payload = np.empty((field.n, field.n, 2), dtype="<f8")
    payload[..., 0] = field.samples.real
    payload[..., 1] = field.samples.imag
    header = _HEADER.pack(_RASTER_MAGIC, field.n, field.pitch, *field.center)
    Path(path).write_bytes(header + payload.tobytes())


def read_field_raster(path: str | Path) -> ComplexField:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated field raster")
    magic, n, pitch, cx, cy = _HEADER.unpack_from(raw)
    if magic != _RASTER_MAGIC:
        raise ValueError(f"{path}: not a field raster (magic {magic!r})")
    expected = _HEADER.size + 16 * n * n
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    payload = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, n, 2)
    samples = payload[..., 0] + 1j * payload[..., 1]
    return ComplexField(samples, pitch, (cx, cy))


def write_pgm(image: np.ndarray, path: str | Path, comment: str | None = None) -> None:
    """Write a 2-D uint8 or uint16 array as binary PGM (P5)."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"PGM image must be 2-D, got shape {image.shape}")
    if image.dtype == np.uint8:
        maxval, data = 255, image.tobytes()
    elif image.dtype == np.uint16:
        maxval, data = 65535, image.astype(">u2").tobytes()
    else:
        raise ValueError(f"PGM image must be uint8 or uint16, got {image.dtype}")
    lines = [b"P5"]
    if comment:
        for part in comment.splitlines():
            lines.append(b"# " + part.encode("ascii"))
    lines.append(f"{image.shape[1]} {image.shape[0]}".encode("ascii"))
    lines.append(f"{maxval}".encode("ascii"))
    Path(path).write_bytes(b"\n".join(lines) + b"\n" + data)


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary PGM (P5) image, returning uint8 or uint16."""
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM file")
    # Header tokens may be separated by arbitrary whitespace and comments.
    pos, tokens = 2, []
    while len(tokens) < 3:
        match = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)").match(raw, pos)
        if match is None:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(match.group(1))
        pos = match.end()
    width, height, maxval = (int(t) for t in tokens)
    pos += 1  # single whitespace byte after maxval
    if maxval == 255:
        dtype, itemsize = np.uint8, 1
    elif maxval == 65535:
        dtype, itemsize = ">u2", 2
    else:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    data = np.frombuffer(raw, dtype=dtype, offset=pos, count=width * height)
    if data.size != width * height:
        raise ValueError(f"{path}: truncated PGM payload")
    return data.reshape(height, width).astype(np.uint16 if itemsize == 2 else np.uint8)


def field_to_pgm(field: ComplexField, path: str | Path, comment: str | None = None) -> None:
    """Write the normalized intensity of a field as an 8-bit PGM image."""
    intensity = field.intensity()
    peak = intensity.max()
    if peak <= 0.0:
        quantized = np.zeros(intensity.shape, dtype=np.uint8)
    else:
        quantized = np.clip(np.rint(intensity / peak * 255.0), 0, 255).astype(np.uint8)
    write_pgm(quantized, path, comment=comment)
