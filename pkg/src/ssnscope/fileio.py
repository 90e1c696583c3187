"""Serialization: 16-bit portable graymap images and plain-text CSV.

Images use binary PGM (``P5``, maxval 65535, big-endian, row-major), the
portable graymap everyone's viewer opens.  Values are mapped linearly from
``[scale_min, scale_max]`` to ``[0, 65535]`` and clipped; the scale and the
run provenance (config hash, seed) travel in ``#`` comment lines inside the
PGM header, so a written map round-trips exactly to within the 16-bit
quantisation.

CSV files are UTF-8 with a header row; the first line is a ``#`` manifest
comment carrying the scenario name, resolved-config hash and seed.  Floats
are written with ``repr`` round-trip precision.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ParameterError
from .imaging import ImageStack, TransmittanceMap

__all__ = [
    "write_pgm16",
    "read_pgm16",
    "write_map_pgm",
    "read_map_pgm",
    "write_csv",
    "read_csv_rows",
    "write_map_csv",
    "read_map_csv",
    "write_stack_csv",
    "write_stack_pgms",
]

_MAXVAL = 65535


def write_pgm16(path: Union[str, Path], values: np.ndarray,
                scale: Tuple[float, float] = (0.0, 1.0),
                comments: Optional[Dict[str, str]] = None) -> None:
    """Write a 2-D float array as a 16-bit binary PGM."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ParameterError("PGM images are 2-D")
    lo, hi = scale
    if not hi > lo:
        raise ParameterError("scale_max must exceed scale_min")
    quantised = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    data = (np.round(quantised * _MAXVAL)).astype(">u2")
    header = io.BytesIO()
    header.write(b"P5\n")
    header.write(f"# scale_min={lo!r} scale_max={hi!r}\n".encode())
    for key, val in (comments or {}).items():
        header.write(f"# {key}={val}\n".encode())
    header.write(f"{values.shape[1]} {values.shape[0]}\n{_MAXVAL}\n".encode())
    Path(path).write_bytes(header.getvalue() + data.tobytes())


def read_pgm16(path: Union[str, Path]) -> Tuple[np.ndarray, Dict[str, str]]:
    """Read a 16-bit binary PGM written by :func:`write_pgm16`.

    Returns the de-quantised float array and the header comment fields.
    """
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise ParameterError(f"{path} is not a binary PGM")
    comments: Dict[str, str] = {}
    tokens = []
    pos = 2
    while len(tokens) < 3:
        if raw[pos:pos + 1].isspace():
            pos += 1
            continue
        if raw[pos:pos + 1] == b"#":
            end = raw.index(b"\n", pos)
            for part in raw[pos + 1:end].decode().split():
                if "=" in part:
                    key, _, val = part.partition("=")
                    comments[key] = val
            pos = end + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end].decode())
        pos = end
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = int(tokens[0]), int(tokens[1]), int(tokens[2])
    if maxval != _MAXVAL:
        raise ParameterError(f"expected 16-bit PGM, found maxval {maxval}")
    data = np.frombuffer(raw[pos:pos + 2 * width * height], dtype=">u2")
    values = data.reshape(height, width).astype(float) / _MAXVAL
    lo = float(comments.get("scale_min", 0.0))
    hi = float(comments.get("scale_max", 1.0))
    return values * (hi - lo) + lo, comments


def write_map_pgm(path, tmap: TransmittanceMap,
                  comments: Optional[Dict[str, str]] = None) -> None:
    extra = {"pitch_um": repr(tmap.pitch_um)}
    extra.update(comments or {})
    write_pgm16(path, tmap.grid, scale=(0.0, 1.0), comments=extra)


def read_map_pgm(path) -> TransmittanceMap:
    values, comments = read_pgm16(path)
    if "pitch_um" not in comments:
        raise ParameterError(f"{path} has no pitch_um header field")
    return TransmittanceMap(np.clip(values, 0.0, 1.0),
                            float(comments["pitch_um"]))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence],
              manifest_line: Optional[str] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if manifest_line:
            fh.write(f"# {manifest_line}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])


def read_csv_rows(path) -> Tuple[Sequence[str], list]:
    """Header and raw string rows of a CSV, skipping ``#`` comment lines."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, list(reader)


def _format(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_map_csv(path, tmap: TransmittanceMap,
                  manifest_line: Optional[str] = None) -> None:
    rows = ((r, c, tmap.grid[r, c])
            for r in range(tmap.grid.shape[0])
            for c in range(tmap.grid.shape[1]))
    write_csv(path, ["row", "col", "value"], rows, manifest_line)


def read_map_csv(path, pitch_um: float) -> TransmittanceMap:
    _, rows = read_csv_rows(path)
    if not rows:
        raise ParameterError(f"{path} holds no map cells")
    r_max = max(int(r[0]) for r in rows)
    c_max = max(int(r[1]) for r in rows)
    grid = np.zeros((r_max + 1, c_max + 1))
    for r, c, v in rows:
        grid[int(r), int(c)] = float(v)
    return TransmittanceMap(grid, pitch_um)


def write_stack_pgms(directory, stack: ImageStack, prefix: str = "rep",
                     comments: Optional[Dict[str, str]] = None) -> list:
    """Serialise a stack as one 16-bit PGM per repetition
    (``<prefix>000.pgm`` ...); returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for rep in range(stack.images.shape[0]):
        extra = {"rep": str(rep)}
        extra.update(comments or {})
        path = directory / f"{prefix}{rep:03d}.pgm"
        write_pgm16(path, stack.images[rep], scale=(0.0, 1.0), comments=extra)
        paths.append(path)
    return paths


def write_stack_csv(path, stack: ImageStack,
                    manifest_line: Optional[str] = None) -> None:
    """Per-acquisition records of a scan stack:
    (rep, row, col, estimate, input_photons, exposed, failed)."""
    reps, height, width = stack.images.shape
    rows = ((rep, r, c, stack.images[rep, r, c],
             stack.per_pixel_input_photons[rep, r, c],
             stack.photons_exposed[rep, r, c],
             int(stack.failed[rep, r, c]))
            for rep in range(reps) for r in range(height) for c in range(width))
    write_csv(path, ["rep", "row", "col", "estimate", "input_photons",
                     "exposed", "failed"], rows, manifest_line)
