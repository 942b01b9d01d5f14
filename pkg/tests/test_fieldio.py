import numpy as np
import pytest

from nschemo.fieldio import (
    SnapshotError,
    emit_snapshot,
    heatmap_bytes,
    read_ppm,
    read_snapshot,
    write_heatmap,
    write_slice_csv,
    write_snapshot,
)
from nschemo.grid import Grid, ScalarField
from nschemo.stepper import PhysParams, make_state


def rand_field(g, seed=0, name="phi"):
    return ScalarField(g, np.random.default_rng(seed).standard_normal(g.shape) * 1e3, name)


@pytest.mark.parametrize("binary", [True, False])
def test_round_trip_bit_exact(tmp_path, binary):
    g = Grid(7, 5, 1.3, 0.1)
    f = rand_field(g)
    p = write_snapshot(tmp_path / "f.snap", f, 0.125, binary)
    back, t = read_snapshot(p)
    assert t == 0.125 and back.name == "phi"
    assert back.grid.lx == 1.3 and back.grid.ly == 0.1
    assert back.values.tobytes() == f.values.tobytes()


def test_header_layout(tmp_path):
    g = Grid(4, 6)
    p = write_snapshot(tmp_path / "f.snap", ScalarField.zeros(g, "sigma"), 2.0)
    first = p.read_bytes().split(b"\n", 1)[0].decode()
    assert first == "4 6 1.0 1.0 2.0 sigma binary"
    assert len(p.read_bytes()) == len(first) + 1 + 8 * 24


def test_row_major_order(tmp_path):
    g = Grid(4, 4)
    vals = np.arange(16.0).reshape(4, 4)
    p = write_snapshot(tmp_path / "f.txt", ScalarField(g, vals, "a"), binary=False)
    lines = p.read_text().splitlines()[1:]
    assert [float(s) for s in lines[:5]] == [0.0, 1.0, 2.0, 3.0, 4.0]


def test_corrupt_snapshots(tmp_path):
    p = tmp_path / "bad.snap"
    p.write_bytes(b"4 4 1.0 1.0 0.0 phi binary\n" + b"\0" * 10)
    with pytest.raises(SnapshotError):
        read_snapshot(p)
    p.write_bytes(b"4 4 1.0\n")
    with pytest.raises(SnapshotError):
        read_snapshot(p)
    with pytest.raises(SnapshotError):
        write_snapshot(tmp_path / "x", ScalarField.zeros(Grid(4, 4), "two words"))


def test_zero_field_is_mid_gray_and_sized(tmp_path):
    g = Grid(12, 8)
    path = write_heatmap(tmp_path / "z.ppm", ScalarField.zeros(g))
    w, h, pix = read_ppm(path)
    assert (w, h) == (12, 8)
    assert np.all(pix == 128)


def test_heatmap_extremes_and_orientation():
    vals = np.zeros((4, 4))
    vals[0, 3] = 1.0  # x = 0, y = top
    vals[3, 0] = -1.0  # x = right, y = bottom
    data = heatmap_bytes(vals)
    assert data.startswith(b"P6\n4 4\n255\n")
    pix = np.frombuffer(data[len(b"P6\n4 4\n255\n"):], dtype=np.uint8).reshape(4, 4, 3)
    assert pix[0, 0, 0] == 255 and pix[3, 3, 0] == 0
    assert heatmap_bytes(vals) == data


def test_slice_csv(tmp_path):
    g = Grid(4, 4)
    f = ScalarField(g, np.arange(16.0).reshape(4, 4), "phi")
    rows = write_slice_csv(tmp_path / "s.csv", f, "y", 1).read_text().splitlines()
    assert rows[0] == "y,phi" and rows[1] == "0.125,4.0"
    with pytest.raises(ValueError):
        write_slice_csv(tmp_path / "s.csv", f, "z")


def test_emit_snapshot_files(tmp_path):
    g = Grid(8, 8)
    st = make_state(g, 0.1, 0.2, params=PhysParams())
    written = emit_snapshot(st, tmp_path / "snap", ("binary", "ascii", "ppm", "csv"))
    names = sorted(p.name for p in written)
    assert names == sorted(
        [
            "phi_000000.snap", "sigma_000000.snap", "p_000000.snap",
            "phi_000000.txt", "sigma_000000.txt", "p_000000.txt",
            "phi_000000.ppm", "phi_000000_slice.csv",
        ]
    )
    back, _ = read_snapshot(tmp_path / "snap" / "sigma_000000.snap")
    assert np.all(back.values == 0.2)
