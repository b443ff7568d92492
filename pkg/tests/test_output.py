import numpy as np
import pytest

from confine_fp.output import HEATMAP_SIZE, heatmap, read_pgm, write_pgm
from confine_fp.potential import ConfinementModel, Shear
from confine_fp.solver import solve_fokker_planck


@pytest.fixture(scope="module")
def fene2():
    return solve_fokker_planck(ConfinementModel.fene(2.0), 32)


def test_heatmap_shape_and_range(fene2):
    img = heatmap(fene2)
    assert img.shape == (HEATMAP_SIZE, HEATMAP_SIZE) and img.dtype == np.uint8
    assert img.max() == 255
    assert img[0, 0] == img[-1, -1] == 0  # corners are outside the disk


def test_heatmap_radially_symmetric(fene2):
    img = heatmap(fene2).astype(int)
    # reflections of the grid are exact symmetries of a radial field
    assert np.max(np.abs(img - img[::-1, :])) <= 1
    assert np.max(np.abs(img - img[:, ::-1])) <= 1
    assert np.max(np.abs(img - img.T)) <= 1


def test_heatmap_orientation():
    sol = solve_fokker_planck(ConfinementModel.fene(5.0, Shear(1.0, 0.5)), 16)
    img = heatmap(sol, 64).astype(float)
    # positive Q1Q2: quadrants I (top right) and III (bottom left) carry more mass
    top_right, bottom_left = img[:32, 32:].sum(), img[32:, :32].sum()
    top_left, bottom_right = img[:32, :32].sum(), img[32:, 32:].sum()
    assert top_right + bottom_left > top_left + bottom_right


def test_pgm_roundtrip(tmp_path, fene2):
    img = heatmap(fene2)
    write_pgm(tmp_path / "h.pgm", img)
    raw = (tmp_path / "h.pgm").read_bytes()
    assert raw.startswith(b"P5\n256 256\n255\n")
    assert len(raw) == len(b"P5\n256 256\n255\n") + 256 * 256
    assert np.array_equal(read_pgm(tmp_path / "h.pgm"), img)


def test_read_pgm_rejects_other_formats(tmp_path):
    (tmp_path / "x.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(ValueError):
        read_pgm(tmp_path / "x.pgm")
