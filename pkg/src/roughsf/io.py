"""Plain-text CSV formats for sampled paths and grid rough paths.

Floats are written with 17 significant digits so files round-trip exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from roughsf.roughpath import GridRoughPath


class FormatError(ValueError):
    """Raised when an input file does not follow the expected layout."""


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_path_csv(path, times, values) -> None:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{k + 1}" for k in range(values.shape[1])])
        for t, row in zip(times, values):
            w.writerow([fmt(t)] + [fmt(v) for v in row])


def _rows(path):
    """Non-empty CSV rows with their 1-based line numbers."""
    with open(path, newline="") as fh:
        return [(k, r) for k, r in enumerate(csv.reader(fh), 1) if r]


def _floats(path, numbered) -> np.ndarray:
    out = []
    for lineno, row in numbered:
        try:
            out.append([float(v) for v in row])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric entry in {','.join(row)!r}") from None
        if out and len(out[-1]) != len(out[0]):
            raise FormatError(f"{path}:{lineno}: expected {len(out[0])} fields, got {len(out[-1])}")
    return np.array(out, dtype=float)


def read_path_csv(path):
    """Return ``(times, values)`` from a ``t,x1,...,xd`` file."""
    numbered = _rows(path)
    rows = [r for _, r in numbered]
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[0] != "t" or header[1:] != [f"x{k + 1}" for k in range(len(header) - 1)]:
        raise FormatError(f"{path}: header must be t,x1,...,xd")
    if len(header) < 2:
        raise FormatError(f"{path}: no path coordinates")
    if len(rows) < 3:
        raise FormatError(f"{path}: need ≥ 2 samples")
    data = _floats(path, numbered[1:])
    if data.shape[1] != len(header):
        raise FormatError(f"{path}:{numbered[1][0]}: expected {len(header)} fields")
    if np.any(np.diff(data[:, 0]) <= 0):
        k = int(np.nonzero(np.diff(data[:, 0]) <= 0)[0][0]) + 2
        raise FormatError(f"{path}:{numbered[k][0]}: times must be strictly increasing")
    return data[:, 0], data[:, 1:]


def write_rough_path_csv(path, rp: GridRoughPath) -> None:
    """One line ``d,N,T`` followed by one line per step.

    Step lines hold ``t_{k-1}, t_k`` and then the level-1, level-2 and level-3
    increments flattened in row-major index order.
    """
    d = rp.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([d, rp.n_steps, fmt(rp.horizon)])
        flat = np.concatenate(
            [rp.s1, rp.s2.reshape(rp.n_steps, -1), rp.s3.reshape(rp.n_steps, -1)], axis=1
        )
        for k in range(rp.n_steps):
            w.writerow([fmt(rp.times[k]), fmt(rp.times[k + 1])] + [fmt(v) for v in flat[k]])


def read_rough_path_csv(path) -> GridRoughPath:
    numbered = _rows(path)
    if not numbered:
        raise FormatError(f"{path}: empty file")
    if [h.strip() for h in numbered[0][1]] == ["d", "N", "T"]:
        numbered = numbered[1:]
    if not numbered:
        raise FormatError(f"{path}: missing d,N,T line")
    lineno, first = numbered[0]
    try:
        d, n = int(first[0]), int(first[1])
        horizon = float(first[2])
    except (ValueError, IndexError):
        raise FormatError(f"{path}:{lineno}: first line must be d,N,T") from None
    width = 2 + d + d * d + d**3
    if len(numbered) - 1 != n or n < 1:
        raise FormatError(f"{path}: expected {n} step rows, got {len(numbered) - 1}")
    body = _floats(path, numbered[1:])
    if body.shape[1] != width:
        raise FormatError(f"{path}:{numbered[1][0]}: expected rows of width {width}, got {body.shape[1]}")
    times = np.concatenate([body[:, 0], body[-1:, 1]])
    if np.any(body[1:, 0] != body[:-1, 1]):
        raise FormatError(f"{path}: step intervals are not contiguous")
    if not np.isclose(times[-1] - times[0], horizon, rtol=1e-12, atol=1e-15):
        raise FormatError(f"{path}: horizon {horizon} does not match the grid")
    s1 = body[:, 2 : 2 + d]
    s2 = body[:, 2 + d : 2 + d + d * d].reshape(n, d, d)
    s3 = body[:, 2 + d + d * d :].reshape(n, d, d, d)
    try:
        return GridRoughPath(times, s1, s2, s3)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
