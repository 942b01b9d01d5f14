"""Field snapshots, 1D CSV slices and PPM heatmaps.

Snapshot layout: one ASCII header line

    nx ny lx ly time name ascii|binary

followed by the nx*ny values in row-major order (index i*ny + j, i along x),
either one ``repr`` float per line or raw little-endian float64.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .grid import Grid, ScalarField


class SnapshotError(ValueError):
    pass


def write_snapshot(path, field: ScalarField, time: float = 0.0, binary: bool = True) -> Path:
    path = Path(path)
    g = field.grid
    name = field.name or "field"
    if any(c.isspace() for c in name):
        raise SnapshotError("field name must not contain whitespace")
    mode = "binary" if binary else "ascii"
    header = f"{g.nx} {g.ny} {g.lx!r} {g.ly!r} {float(time)!r} {name} {mode}\n"
    vals = np.ascontiguousarray(field.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(vals.tobytes(order="C"))
        else:
            fh.write("".join(f"{float(v)!r}\n" for v in vals.ravel()).encode("ascii"))
    return path


def read_snapshot(path):
    """Return (ScalarField, time)."""
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        body = fh.read()
    if len(header) != 7:
        raise SnapshotError(f"{path}: malformed header")
    try:
        nx, ny = int(header[0]), int(header[1])
        lx, ly, t = float(header[2]), float(header[3]), float(header[4])
    except ValueError as exc:
        raise SnapshotError(f"{path}: malformed header ({exc})") from exc
    name, mode = header[5], header[6]
    grid = Grid(nx, ny, lx, ly)
    if mode == "binary":
        if len(body) != 8 * nx * ny:
            raise SnapshotError(f"{path}: expected {8 * nx * ny} bytes, got {len(body)}")
        vals = np.frombuffer(body, dtype="<f8").astype(np.float64)
    elif mode == "ascii":
        vals = np.array([float(s) for s in body.split()], dtype=np.float64)
        if vals.size != nx * ny:
            raise SnapshotError(f"{path}: expected {nx * ny} values, got {vals.size}")
    else:
        raise SnapshotError(f"{path}: unknown mode {mode!r}")
    return ScalarField(grid, vals.reshape(nx, ny), name), t


def write_slice_csv(path, field: ScalarField, axis: str = "x", index: int | None = None) -> Path:
    """Values along a grid line: axis='x' fixes j (default middle), 'y' fixes i."""
    g = field.grid
    x, y = g.cell_centers()
    if axis == "x":
        j = g.ny // 2 if index is None else index
        coords, vals = x[:, j], field.values[:, j]
    elif axis == "y":
        i = g.nx // 2 if index is None else index
        coords, vals = y[i, :], field.values[i, :]
    else:
        raise ValueError("axis must be 'x' or 'y'")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([axis, field.name or "value"])
        for c, v in zip(coords, vals):
            wr.writerow([repr(float(c)), repr(float(v))])
    return path


def heatmap_bytes(values: np.ndarray, lo: float = -1.0, hi: float = 1.0) -> bytes:
    """Binary PPM (P6), gray ramp, width nx, height ny, top row at max y.

    A value v maps to floor((v - lo) / (hi - lo) * 255 + 0.5) clipped to
    [0, 255], so v = 0 on [-1, 1] gives 128.
    """
    vals = np.asarray(values, dtype=float)
    nx, ny = vals.shape
    level = np.floor((np.clip(vals, lo, hi) - lo) / (hi - lo) * 255.0 + 0.5)
    level = np.clip(level, 0, 255).astype(np.uint8)
    img = level.T[::-1, :]  # rows are y from top, columns are x
    rgb = np.repeat(img[:, :, None], 3, axis=2)
    return f"P6\n{nx} {ny}\n255\n".encode("ascii") + rgb.tobytes()


def write_heatmap(path, field: ScalarField, lo: float = -1.0, hi: float = 1.0) -> Path:
    path = Path(path)
    path.write_bytes(heatmap_bytes(field.values, lo, hi))
    return path


def read_ppm(path):
    """Minimal P6 reader returning (width, height, uint8 array of shape (h, w, 3))."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise SnapshotError("not a P6 pixmap")
    w, h = map(int, parts[1].split())
    pix = np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
    return w, h, pix


def emit_snapshot(state, directory, formats=("binary", "ppm"), tag: str | None = None):
    """Write phi, sigma and p of a state; returns the list of written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tag = f"{state.step_index:06d}" if tag is None else tag
    written = []
    for fld in (state.phi, state.sigma, state.p):
        name = fld.name or "field"
        if "binary" in formats:
            written.append(write_snapshot(directory / f"{name}_{tag}.snap", fld, state.t, True))
        if "ascii" in formats:
            written.append(write_snapshot(directory / f"{name}_{tag}.txt", fld, state.t, False))
    if "ppm" in formats:
        written.append(write_heatmap(directory / f"phi_{tag}.ppm", state.phi))
    if "csv" in formats:
        written.append(write_slice_csv(directory / f"phi_{tag}_slice.csv", state.phi))
    return written
