"""Monte Carlo oracle: FENE dumbbells under homogeneous shear.

Each path integrates

    dQ = (gdot (Q2, 0) - E(Q) / (2 De)) dt + sqrt(1 / De) dW,
    E(Q) = Q / (1 - |Q|^2 / l^2),

by Euler-Maruyama.  The noise amplitude gives the generator
``(1/(2De)) (Lap - div(F .))`` with ``F = kappa + grad V``, whose
stationary density is the one the finite-element solver computes; in
particular it is exactly ``M`` when ``gdot = 0``.

Random numbers come from Philox4x32-10 with counter
``(draw_lo, draw_hi, path_lo, path_hi)`` and key ``(seed_lo, seed_hi)``, so
every path owns an independent stream and results do not depend on how
paths are split across workers.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba as nb
import numpy as np

from .errors import InvalidArgument, PathAbort
from .potential import ConfinementModel

# --------------------------------------------------------------------------
# Philox4x32-10

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_S32 = np.uint64(32)


@nb.njit(inline="always", cache=True)
def _philox(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = _M0 * np.uint64(c0)
        p1 = _M1 * np.uint64(c2)
        hi0 = np.uint32(p0 >> _S32)
        lo0 = np.uint32(p0 & np.uint64(0xFFFFFFFF))
        hi1 = np.uint32(p1 >> _S32)
        lo1 = np.uint32(p1 & np.uint64(0xFFFFFFFF))
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = np.uint32(k0 + _W0)
        k1 = np.uint32(k1 + _W1)
    return c0, c1, c2, c3


@nb.njit(cache=True)
def philox4x32(counter, key):
    """Philox4x32-10 block for a ``uint32[4]`` counter and ``uint32[2]`` key."""
    r = _philox(counter[0], counter[1], counter[2], counter[3], key[0], key[1])
    out = np.empty(4, dtype=np.uint32)
    out[0], out[1], out[2], out[3] = r
    return out


@nb.njit(inline="always", cache=True)
def _refill(buf, draw, path, k0, k1):
    r = _philox(
        np.uint32(draw & np.uint64(0xFFFFFFFF)),
        np.uint32(draw >> _S32),
        np.uint32(path & np.uint64(0xFFFFFFFF)),
        np.uint32(path >> _S32),
        k0,
        k1,
    )
    buf[0], buf[1], buf[2], buf[3] = r


@nb.njit(inline="always", cache=True)
def _sym_uniform(x):
    # uint32 -> open interval (-1, 1)
    return (np.float64(x) + 0.5) * 4.656612873077393e-10 - 1.0


# --------------------------------------------------------------------------
# kernel

_SAMPLE_SUMS = 5  # Q1, Q2, Q1Q1, Q2Q2, Q1Q2


@nb.njit(cache=True, nogil=True, fastmath=True, error_model="numpy")
def _simulate_paths(
    p0, p1, ell, de, gdot, dt, burn, n_samples, thin, k0, k1, nbins,
    counts, sums, stats, abort,
):
    buf = np.empty(4, dtype=np.uint32)
    rmax2 = (ell * (1.0 - 1e-9)) ** 2
    inv_l2 = 1.0 / (ell * ell)
    spring = 1.0 / (2.0 * de)
    scale = nbins / (2.0 * ell)
    h_floor = dt * 2.0 ** -20
    total = burn + n_samples * thin
    for p in range(p0, p1):
        path = np.uint64(p)
        draw = np.uint64(0)
        pos = 4
        # uniform start in the disk of radius ell/2
        while True:
            if pos >= 4:
                _refill(buf, draw, path, k0, k1)
                draw += np.uint64(1)
                pos = 0
            x = _sym_uniform(buf[pos])
            y = _sym_uniform(buf[pos + 1])
            pos += 2
            if x * x + y * y < 1.0:
                break
        q1 = 0.5 * ell * x
        q2 = 0.5 * ell * y
        for step in range(1, total + 1):
            remaining = dt
            h = dt
            while remaining > 0.0:
                den = 1.0 - (q1 * q1 + q2 * q2) * inv_l2
                a1 = gdot * q2 - spring * q1 / den
                a2 = -spring * q2 / den
                sig = math.sqrt(h / de)
                accepted = False
                for _ in range(100):
                    # Marsaglia polar pair
                    while True:
                        if pos >= 4:
                            _refill(buf, draw, path, k0, k1)
                            draw += np.uint64(1)
                            pos = 0
                        u = _sym_uniform(buf[pos])
                        v = _sym_uniform(buf[pos + 1])
                        pos += 2
                        s = u * u + v * v
                        if s < 1.0 and s > 0.0:
                            break
                    f = math.sqrt(-2.0 * math.log(s) / s)
                    n1 = q1 + a1 * h + sig * u * f
                    n2 = q2 + a2 * h + sig * v * f
                    if n1 * n1 + n2 * n2 < rmax2:
                        accepted = True
                        break
                    stats[0] += 1
                if accepted:
                    q1 = n1
                    q2 = n2
                    remaining -= h
                else:
                    h *= 0.5
                    stats[1] += 1
                    if h < h_floor:
                        abort[0] = p
                        abort[1] = step
                        return 1
            if step > burn and (step - burn) % thin == 0:
                ix = int((q1 + ell) * scale)
                iy = int((q2 + ell) * scale)
                if ix >= nbins:
                    ix = nbins - 1
                if iy >= nbins:
                    iy = nbins - 1
                counts[iy, ix] += 1
                sums[0] += q1
                sums[1] += q2
                sums[2] += q1 * q1
                sums[3] += q2 * q2
                sums[4] += q1 * q2
    return 0


# --------------------------------------------------------------------------
# public API

CHUNK_PATHS = 1 << 15
MIN_COMPARISON_PATHS = 10_000


@dataclass(frozen=True)
class SdeConfig:
    deborah: float = 10.0
    shear_rate: float = 0.2
    length: float = 5.0
    dt: float | None = None  # defaults to the stability limit 1e-3 * 2 De
    n_paths: int = 100_000
    burn_in_steps: int = 2500
    sample_steps: int = 1000
    thinning: int = 250
    seed: int = 42
    bins: int = 64

    def __post_init__(self):
        if not (self.deborah > 0 and math.isfinite(self.deborah)):
            raise InvalidArgument(f"De must be positive, got {self.deborah}")
        if not math.isfinite(self.shear_rate):
            raise InvalidArgument("shear rate must be finite")
        if not self.length > 0:
            raise InvalidArgument(f"length must be positive, got {self.length}")
        if self.dt is not None and not (0 < self.dt <= self.max_dt):
            raise InvalidArgument(f"dt must lie in (0, {self.max_dt:g}], got {self.dt}")
        for name in ("n_paths", "thinning", "bins"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgument(f"{name} must be at least 1")
        if self.burn_in_steps < 0 or self.sample_steps < self.thinning:
            raise InvalidArgument("need burn_in_steps >= 0 and sample_steps >= thinning")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidArgument("seed must be a 64-bit unsigned integer")

    @property
    def max_dt(self) -> float:
        return 1e-3 * 2.0 * self.deborah

    @property
    def step(self) -> float:
        return self.max_dt if self.dt is None else float(self.dt)

    @property
    def samples_per_path(self) -> int:
        return self.sample_steps // self.thinning


@dataclass(eq=False)
class Histogram2D:
    """Uniform ``bins x bins`` histogram on ``[-length, length]^2``.

    ``density`` is zero on cells whose centre lies outside the disk and
    integrates to one over the grid.  ``moments`` are raw sample moments
    (or the source field's moments for derived histograms).
    """

    length: float
    counts: np.ndarray
    density: np.ndarray
    n_samples: int
    moments: dict[str, float]
    moment_stderr: dict[str, float] = field(default_factory=dict)
    rejections: int = 0
    shrinks: int = 0
    config: SdeConfig | None = None

    @property
    def bins(self) -> int:
        return self.density.shape[0]

    @property
    def cell_width(self) -> float:
        return 2.0 * self.length / self.bins

    @property
    def cell_area(self) -> float:
        return self.cell_width**2

    def centers(self) -> np.ndarray:
        return cell_centers(self.length, self.bins)

    def write_csv(self, path: str | Path) -> None:
        c = self.centers()
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ix", "iy", "x", "y", "count", "density"])
            for iy in range(self.bins):
                for ix in range(self.bins):
                    w.writerow([ix, iy, repr(float(c[iy, ix, 0])), repr(float(c[iy, ix, 1])), int(self.counts[iy, ix]), repr(float(self.density[iy, ix]))])


def cell_centers(length: float, bins: int) -> np.ndarray:
    """``(bins, bins, 2)`` cell centres, indexed ``[iy, ix]``."""
    t = -length + (np.arange(bins) + 0.5) * (2.0 * length / bins)
    X, Y = np.meshgrid(t, t)
    return np.stack([X, Y], axis=-1)


def _disk_mask(length: float, bins: int) -> np.ndarray:
    c = cell_centers(length, bins)
    return np.hypot(c[..., 0], c[..., 1]) < length


def _normalize_on_grid(values: np.ndarray, length: float) -> np.ndarray:
    bins = values.shape[0]
    d = np.where(_disk_mask(length, bins), values, 0.0).astype(float)
    total = float(d.sum()) * (2.0 * length / bins) ** 2
    if total <= 0:
        raise InvalidArgument("histogram has no mass inside the disk")
    return d / total


def _seed_key(seed: int) -> tuple[np.uint32, np.uint32]:
    seed = int(seed)
    return np.uint32(seed & 0xFFFFFFFF), np.uint32(seed >> 32)


def simulate(config: SdeConfig, jobs: int = 1) -> Histogram2D:
    """Run all paths and return the stationary histogram.

    Paths are processed in fixed chunks of ``CHUNK_PATHS``; chunk results
    are merged in chunk order, so ``jobs`` never changes the output bits.
    """
    k0, k1 = _seed_key(config.seed)
    nb_ = int(config.bins)
    chunks = [(a, min(a + CHUNK_PATHS, config.n_paths)) for a in range(0, config.n_paths, CHUNK_PATHS)]

    def run(chunk):
        counts = np.zeros((nb_, nb_), dtype=np.int64)
        sums = np.zeros(_SAMPLE_SUMS)
        stats = np.zeros(2, dtype=np.int64)
        abort = np.full(2, -1, dtype=np.int64)
        code = _simulate_paths(
            chunk[0], chunk[1], float(config.length), float(config.deborah), float(config.shear_rate),
            float(config.step), int(config.burn_in_steps), int(config.samples_per_path), int(config.thinning),
            k0, k1, nb_, counts, sums, stats, abort,
        )
        return code, counts, sums, stats, abort

    if jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]

    counts = np.zeros((nb_, nb_), dtype=np.int64)
    sums = np.zeros(_SAMPLE_SUMS)
    rej = shrinks = 0
    for code, c, s, st, ab in results:
        if code != 0:
            raise PathAbort(
                f"path {ab[0]} stuck at the boundary at step {ab[1]} even at the smallest step",
                path=int(ab[0]),
                step=int(ab[1]),
            )
        counts += c
        sums += s
        rej += int(st[0])
        shrinks += int(st[1])

    n = config.n_paths * config.samples_per_path
    mean = sums / n
    moments = {"Q1": mean[0], "Q2": mean[1], "Q1Q1": mean[2], "Q2Q2": mean[3], "Q1Q2": mean[4]}
    moments = {k: float(v) for k, v in moments.items()}
    # standard errors of the first moments, treating per-path samples as independent
    se = {
        "Q1": math.sqrt(max(moments["Q1Q1"] - moments["Q1"] ** 2, 0.0) / n),
        "Q2": math.sqrt(max(moments["Q2Q2"] - moments["Q2"] ** 2, 0.0) / n),
    }
    return Histogram2D(
        length=float(config.length),
        counts=counts,
        density=_normalize_on_grid(counts.astype(float), config.length),
        n_samples=int(n),
        moments=moments,
        moment_stderr=se,
        rejections=rej,
        shrinks=shrinks,
        config=config,
    )


def maxwellian_histogram(length: float, bins: int = 64, points: int = 8) -> Histogram2D:
    """FENE Maxwellian averaged over each cell by tensor Gauss-Legendre quadrature."""
    model = ConfinementModel.fene(length)
    x, w = np.polynomial.legendre.leggauss(points)
    hw = length / bins
    c = cell_centers(length, bins)
    X = c[..., 0][..., None, None] + hw * x[None, None, :, None]
    Y = c[..., 1][..., None, None] + hw * x[None, None, None, :]
    pts = np.stack(np.broadcast_arrays(X, Y), axis=-1)
    vals = model.maxwellian(pts.reshape(-1, 2)).reshape(pts.shape[:-1])
    avg = np.einsum("yxab,a,b->yx", vals, w, w) / 4.0
    dens = _normalize_on_grid(avg, length)
    mom = _grid_moments(dens, length)
    return Histogram2D(float(length), np.zeros_like(dens, dtype=np.int64), dens, 0, mom)


def _grid_moments(density: np.ndarray, length: float) -> dict[str, float]:
    c = cell_centers(length, density.shape[0])
    a = (2.0 * length / density.shape[0]) ** 2
    x, y = c[..., 0], c[..., 1]
    return {
        "Q1": float(np.sum(density * x) * a),
        "Q2": float(np.sum(density * y) * a),
        "Q1Q1": float(np.sum(density * x * x) * a),
        "Q2Q2": float(np.sum(density * y * y) * a),
        "Q1Q2": float(np.sum(density * x * y) * a),
    }


def histogram_from_solution(sol, bins: int = 64) -> Histogram2D:
    """Finite-element ``phi`` at cell centres (P1 interpolation), renormalized."""
    L = sol.mesh.radius
    c = cell_centers(L, bins)
    vals = sol.mesh.interpolate(sol.phi, c.reshape(-1, 2), fill=0.0).reshape(bins, bins)
    dens = _normalize_on_grid(vals, L)
    mom = {k: sol.moments[k] / sol.mass for k in ("Q1", "Q2", "Q1Q1", "Q2Q2", "Q1Q2")}
    return Histogram2D(float(L), np.zeros((bins, bins), dtype=np.int64), dens, 0, mom)


MOMENT_KEYS = ("Q1Q1", "Q2Q2", "Q1Q2")


def compare(hist: Histogram2D, sol) -> dict:
    """L1 distance between the histogram and the solution on the same grid, plus moment gaps."""
    L = sol.mesh.radius
    if abs(hist.length - L) > 1e-12 * L:
        raise InvalidArgument(f"histogram spans [-{hist.length}, {hist.length}] but the mesh radius is {L}")
    if abs(sol.mass - 1.0) > 1e-6:
        raise InvalidArgument(f"solution mass is {sol.mass}, expected 1")
    total = float(hist.density.sum()) * hist.cell_area
    if abs(total - 1.0) > 1e-9:
        raise InvalidArgument(f"histogram integrates to {total}, expected 1")
    ref = histogram_from_solution(sol, hist.bins)
    l1 = float(np.sum(np.abs(ref.density - hist.density)) * hist.cell_area)
    gaps = {}
    for k in MOMENT_KEYS:
        a, b = hist.moments[k], ref.moments[k]
        gaps[k] = {"histogram": a, "pde": b, "abs": abs(a - b), "rel": abs(a - b) / abs(b) if b != 0 else math.inf}
    return {"l1_distance": l1, "moment_gaps": gaps}


def l1_to_maxwellian(hist: Histogram2D) -> float:
    ref = maxwellian_histogram(hist.length, hist.bins)
    return float(np.sum(np.abs(ref.density - hist.density)) * hist.cell_area)


def report_json(report: dict) -> str:
    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, float) and not math.isfinite(x):
            return "inf" if x > 0 else "nan"
        return x

    return json.dumps(clean(report), sort_keys=True, indent=2) + "\n"


def config_dict(config: SdeConfig) -> dict:
    d = asdict(config)
    d["dt"] = config.step
    return d
