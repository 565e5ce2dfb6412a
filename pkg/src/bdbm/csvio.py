"""Comma-separated tables with ``#`` metadata lines, and the FNV-1a file digest."""

from __future__ import annotations

import io

import numpy as np

from .net import atomic_write

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def file_digest(path) -> str:
    with open(path, "rb") as fh:
        return f"{fnv1a64(fh.read()):016x}"


def read_table(path):
    """Return ``(header, rows)``; the header is ``None`` when the first data line is numeric."""
    header = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                if header is None and not rows:
                    header = cells
                    continue
                raise ValueError(f"{path}: non-numeric row {line!r}") from None
    if rows and len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: ragged rows")
    width = len(rows[0]) if rows else (len(header) if header else 0)
    return header, np.array(rows, dtype=np.float64).reshape(len(rows), width)


def format_table(header, rows, meta=None) -> str:
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}={value}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def write_table(path, header, rows, meta=None):
    atomic_write(path, format_table(header, rows, meta))


def dim_header(d: int) -> list[str]:
    return [f"dim{i}" for i in range(d)]
