import numpy as np
import pytest

from seagle.grid import Grid, InvalidInputError
from seagle.gridio import read_grid, write_grid


@pytest.mark.parametrize("shape", [(4, 6), (3, 4, 5)])
@pytest.mark.parametrize("complex_", [False, True])
def test_roundtrip(tmp_path, rng, shape, complex_):
    grid = Grid(shape, 2e-3, tuple(-0.01 * (d + 1) for d in range(len(shape))))
    values = rng.standard_normal(shape)
    if complex_:
        values = values + 1j * rng.standard_normal(shape)
    side = write_grid(tmp_path / "field", values, grid, note="x")
    back, g, meta = read_grid(side)
    assert np.array_equal(back, values) and g == grid
    assert meta["note"] == "x" and meta["domain"] == "grid"
    assert back.dtype == (np.complex128 if complex_ else np.float64)


def test_payload_is_little_endian_row_major(tmp_path):
    grid = Grid((2, 3), 1.0)
    values = np.arange(6.0).reshape(2, 3)
    write_grid(tmp_path / "a", values, grid)
    raw = (tmp_path / "a.bin").read_bytes()
    assert np.array_equal(np.frombuffer(raw, "<f8"), values.ravel())


def test_complex_is_interleaved(tmp_path):
    write_grid(tmp_path / "c", np.array([1 + 2j, 3 - 4j]))
    raw = np.frombuffer((tmp_path / "c.bin").read_bytes(), "<f8")
    np.testing.assert_array_equal(raw, [1, 2, 3, -4])
    back, grid, meta = read_grid(tmp_path / "c")
    assert grid is None and meta["domain"] == "sensor"


def test_rejects_mismatches(tmp_path):
    grid = Grid((2, 3), 1.0)
    with pytest.raises(InvalidInputError):
        write_grid(tmp_path / "a", np.zeros((3, 2)), grid)
    with pytest.raises(InvalidInputError):
        write_grid(tmp_path / "a", np.zeros((3, 2)))
    write_grid(tmp_path / "a", np.zeros((2, 3)), grid)
    (tmp_path / "a.bin").write_bytes(b"\0" * 8)
    with pytest.raises(InvalidInputError):
        read_grid(tmp_path / "a")
