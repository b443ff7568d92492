"""Grayscale heatmaps of solutions (binary PGM)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

HEATMAP_SIZE = 256


def heatmap(sol, size: int = HEATMAP_SIZE) -> np.ndarray:
    """``phi`` on a ``size x size`` pixel grid over the bounding square, as uint8.

    Row 0 is the top (largest ``Q2``).  Pixels whose centre lies outside
    the disk are 0; the scale is linear from 0 to ``max phi``.
    """
    L = sol.mesh.radius
    t = -L + (np.arange(size) + 0.5) * (2.0 * L / size)
    X, Y = np.meshgrid(t, t[::-1])
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    vals = sol.mesh.interpolate(sol.phi, pts, fill=0.0).reshape(size, size)
    vals = np.where(np.hypot(X, Y) < L, np.maximum(vals, 0.0), 0.0)
    top = float(vals.max())
    if top <= 0:
        return np.zeros((size, size), dtype=np.uint8)
    return np.rint(vals * (255.0 / top)).astype(np.uint8)


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    img = np.asarray(image, dtype=np.uint8)
    h, w = img.shape
    with Path(path).open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h, _ = int(parts[1]), int(parts[2]), int(parts[3])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)
