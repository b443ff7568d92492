"""Weighted norms and discrete audits of the Hardy, Poincaré and kernel properties.

All integrals use the assembly quadrature, so the numbers here are the
exact quadratic forms of the assembled matrices (``h1M0_seminorm**2 ==
u @ K @ u`` up to round-off).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import InvalidArgument, RejectedModel, SpectralFailure
from .fem import AssembledSystem
from .geometry import DEFAULT_RULE, QuadratureRule, TriMesh, distance_field, quadrature_points
from .potential import ConfinementModel, check_hypotheses


@dataclass(frozen=True)
class NormReport:
    l2M: float
    h1M0_seminorm: float
    hardy_functional: float
    mean: float

    def to_dict(self) -> dict:
        return asdict(self)


def weighted_norms(mesh: TriMesh, model: ConfinementModel, u: np.ndarray, rule: QuadratureRule = DEFAULT_RULE) -> NormReport:
    """Norms of the P1 field with nodal values ``u`` (``u = phi / M``).

    ``hardy_functional`` is ``int M u^2 / delta^2`` with the exact distance
    to the boundary circle.  ``model`` is used as given; normalize it on
    ``mesh`` first if ``int M = 1`` matters.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices,):
        raise InvalidArgument(f"nodal field has shape {u.shape}, expected ({mesh.n_vertices},)")
    if not np.all(np.isfinite(u)):
        raise InvalidArgument("nodal field contains non-finite values")
    pts, w = quadrature_points(mesh, rule)
    flat = pts.reshape(-1, 2)
    Mw = model.maxwellian(flat).reshape(w.shape) * w
    uq = u[mesh.triangles] @ rule.points.T
    gu = np.einsum("ti,tid->td", u[mesh.triangles], mesh.basis_gradients)
    delta = distance_field(mesh.radius, pts)

    l2 = float(np.sum(np.sum(Mw * uq * uq, axis=1)))
    h1 = float(np.sum(Mw.sum(axis=1) * np.sum(gu * gu, axis=1)))
    hardy = float(np.sum(np.sum(Mw * uq * uq / (delta * delta), axis=1)))
    mean = float(np.sum(np.sum(Mw * uq, axis=1)))
    return NormReport(math.sqrt(max(l2, 0.0)), math.sqrt(max(h1, 0.0)), hardy, mean)


# --------------------------------------------------------------------------
# test-field families

Field = Callable[[np.ndarray], np.ndarray]


def smooth_bumps(radius: float, count: int, seed: int = 42) -> list[tuple[str, Field]]:
    """Seeded fields ``(1 + a x/R + b y/R) * exp(-|x - c|^2 / (2 s^2))``."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        rc = 0.6 * radius * math.sqrt(rng.uniform())
        th = rng.uniform(0.0, 2.0 * math.pi)
        c = np.array([rc * math.cos(th), rc * math.sin(th)])
        s = radius * rng.uniform(0.15, 0.4)
        a, b = rng.uniform(-1.0, 1.0, size=2)

        def f(q, c=c, s=s, a=a, b=b):
            q = np.asarray(q, dtype=float)
            d2 = np.sum((q - c) ** 2, axis=-1)
            return (1.0 + a * q[..., 0] / radius + b * q[..., 1] / radius) * np.exp(-d2 / (2 * s * s))

        out.append((f"bump{k}", f))
    return out


def default_family(radius: float, n_bumps: int = 4, seed: int = 42) -> list[tuple[str, Field]]:
    R = radius
    fam: list[tuple[str, Field]] = [
        ("one", lambda q: np.ones(q.shape[:-1])),
        ("Q1", lambda q: q[..., 0] / R),
        ("Q2", lambda q: q[..., 1] / R),
        ("Q1Q2", lambda q: q[..., 0] * q[..., 1] / R**2),
        ("Q1^2-Q2^2", lambda q: (q[..., 0] ** 2 - q[..., 1] ** 2) / R**2),
    ]
    return fam + smooth_bumps(radius, n_bumps, seed)


def _nodal(mesh: TriMesh, member) -> np.ndarray:
    if callable(member):
        return np.asarray(member(mesh.vertices), dtype=float)
    return np.asarray(member, dtype=float)


@dataclass
class HardyAudit:
    worst_ratio: float
    worst_member: str
    ratios: dict[str, float]
    skipped: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"worst_ratio": self.worst_ratio, "worst_member": self.worst_member, "ratios": dict(self.ratios), "skipped": list(self.skipped)}


def hardy_audit(
    mesh: TriMesh,
    model: ConfinementModel,
    family: Sequence | None = None,
    rule: QuadratureRule = DEFAULT_RULE,
    require_h1: bool = True,
) -> HardyAudit:
    """Largest ``hardy / (l2M^2 + seminorm^2)`` over a family of fields.

    ``family`` holds nodal arrays, callables on points, or ``(name, field)``
    pairs; it defaults to :func:`default_family`.  Zero-norm members are
    skipped with a warning.
    """
    if require_h1 and model.is_radial:
        rep = check_hypotheses(model)
        if not rep.h1_pass:
            raise RejectedModel("Hardy audit needs a model satisfying H1", failed=("H1",))
    if family is None:
        family = default_family(mesh.radius)
    ratios: dict[str, float] = {}
    skipped: list[str] = []
    for k, member in enumerate(family):
        name, fld = member if isinstance(member, tuple) else (f"field{k}", member)
        rep = weighted_norms(mesh, model, _nodal(mesh, fld), rule)
        denom = rep.l2M**2 + rep.h1M0_seminorm**2
        if denom <= 0.0:
            warnings.warn(f"family member {name!r} has zero norm; skipped", RuntimeWarning, stacklevel=2)
            skipped.append(name)
            continue
        ratios[name] = rep.hardy_functional / denom
    if not ratios:
        raise InvalidArgument("every family member has zero norm")
    worst = max(ratios, key=ratios.get)
    return HardyAudit(ratios[worst], worst, ratios, skipped)


# --------------------------------------------------------------------------
# Poincaré audit


@dataclass
class PoincareAudit:
    gamma: float
    n_fields: int
    min_poincare_ratio: float  # min over fields of ((1/gamma) |u|^2 + mean^2) / l2M^2
    max_equivalence_ratio: float  # max over mean-zero fields of l2M / (sqrt(1/gamma) |u|)
    poincare_pass: bool
    equivalence_pass: bool

    @property
    def passed(self) -> bool:
        return self.poincare_pass and self.equivalence_pass

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


POINCARE_SLACK = 0.05


def random_smooth_fields(mesh: TriMesh, n_fields: int, seed: int = 42) -> np.ndarray:
    """``(n_fields, n_vertices)`` nodal values of seeded polynomial-times-bump fields."""
    rng = np.random.default_rng(seed)
    R = mesh.radius
    x, y = mesh.vertices[:, 0] / R, mesh.vertices[:, 1] / R
    out = np.empty((n_fields, mesh.n_vertices))
    for k in range(n_fields):
        c = rng.uniform(-0.5, 0.5, size=2)
        s = rng.uniform(0.2, 0.8)
        coef = rng.normal(size=6)
        poly = coef[0] + coef[1] * x + coef[2] * y + coef[3] * x * y + coef[4] * x * x + coef[5] * y * y
        out[k] = poly * np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2) / (2 * s * s))
    return out


def poincare_audit(
    mesh: TriMesh,
    model: ConfinementModel,
    gamma: float,
    n_fields: int = 200,
    seed: int = 42,
    rule: QuadratureRule = DEFAULT_RULE,
) -> PoincareAudit:
    """Check the weighted Poincaré inequality and the mean-zero norm equivalence.

    ``model`` must be normalized on ``mesh`` so that ``int M = 1``.
    """
    if not gamma > 0:
        raise InvalidArgument(f"gamma must be positive, got {gamma}")
    fields = random_smooth_fields(mesh, n_fields, seed)
    mass = weighted_norms(mesh, model, np.ones(mesh.n_vertices), rule).mean
    pmin = math.inf
    emax = 0.0
    for u in fields:
        r = weighted_norms(mesh, model, u, rule)
        if r.l2M > 0:
            pmin = min(pmin, (r.h1M0_seminorm**2 / gamma + r.mean**2) / r.l2M**2)
        z = weighted_norms(mesh, model, u - r.mean / mass, rule)
        if z.h1M0_seminorm > 0:
            emax = max(emax, z.l2M / (math.sqrt(1.0 / gamma) * z.h1M0_seminorm))
    return PoincareAudit(
        gamma=float(gamma),
        n_fields=n_fields,
        min_poincare_ratio=pmin,
        max_equivalence_ratio=emax,
        poincare_pass=pmin >= 1.0 - POINCARE_SLACK,
        equivalence_pass=emax <= math.sqrt(1.0 + POINCARE_SLACK),
    )


# --------------------------------------------------------------------------
# kernel and spectral gap

KERNEL_TOL = 1e-8
SPREAD_TOL = 1e-6
RESIDUAL_TOL = 1e-8
GAP_SLACK = 0.05


@dataclass
class SpectralReport:
    lambda1: float
    lambda2: float
    v1_spread: float
    gamma_estimate: float
    residual1: float
    residual2: float
    iterations: int
    kernel_pass: bool
    gap_pass: bool
    residual_pass: bool

    @property
    def passed(self) -> bool:
        return self.kernel_pass and self.gap_pass and self.residual_pass

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _rel_residual(K, B, v, lam) -> float:
    Bv = B @ v
    return float(np.linalg.norm(K @ v - lam * Bv) / np.linalg.norm(Bv))


def kernel_and_gap(
    sys: AssembledSystem,
    gamma_estimate: float,
    shift: float | None = None,
    block: int = 6,
    max_iter: int = 300,
    seed: int = 42,
) -> SpectralReport:
    """Two smallest eigenpairs of ``K x = lam B x`` for a drift-free system.

    ``v1`` comes from inverse iteration with the negative shift
    ``-shift`` (so ``K + shift B`` is positive definite even though ``K`` is
    singular).  ``lam2`` comes from block inverse iteration on the
    B-orthogonal complement of ``v1`` with a Rayleigh-Ritz step each
    sweep, which handles the two-fold degenerate first excited level of
    radial models.  Both start from seeded random vectors.
    """
    if sys.D.nnz and np.max(np.abs(sys.D.data)) > 0:
        raise InvalidArgument("kernel_and_gap needs a drift-free (self-adjoint) system")
    K = sys.K.tocsr()
    B = sys.B.tocsr()
    n = K.shape[0]
    if shift is None:
        shift = 1e-2 * max(gamma_estimate, 1e-3)

    # symmetric Jacobi scaling; the pencil is invariant under it
    d = K.diagonal() + shift * B.diagonal()
    if np.any(d <= 0):
        raise SpectralFailure("pencil has weightless degrees of freedom")
    s = 1.0 / np.sqrt(d)
    S = sp.diags(s)
    Ks, Bs = (S @ K @ S).tocsr(), (S @ B @ S).tocsr()
    lu = splu((Ks + shift * Bs).tocsc())

    rng = np.random.default_rng(seed)
    history: list[float] = []

    def bnormalize(x):
        return x / math.sqrt(float(x @ (Bs @ x)))

    # ground state
    x = bnormalize(rng.standard_normal(n))
    lam1 = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        x = bnormalize(lu.solve(Bs @ x))
        lam1 = float(x @ (Ks @ x))
        res = _rel_residual(Ks, Bs, x, lam1)
        history.append(res)
        if res <= RESIDUAL_TOL * 1e-2:
            break
    else:
        raise SpectralFailure("ground-state inverse iteration did not converge", history)

    def deflate(X):
        return X - np.outer(x, x @ (Bs @ X))

    # first excited level by deflated block iteration
    X = deflate(rng.standard_normal((n, block)))
    lam2 = math.inf
    hist2: list[float] = []
    it2 = 0
    for it2 in range(1, max_iter + 1):
        Y = deflate(lu.solve(Bs @ X))
        # Rayleigh-Ritz in the block
        Ka, Ba = Y.T @ (Ks @ Y), Y.T @ (Bs @ Y)
        Ka, Ba = 0.5 * (Ka + Ka.T), 0.5 * (Ba + Ba.T)
        w, V = scipy.linalg.eigh(Ka, Ba)
        X = Y @ V
        lam2 = float(w[0])
        res = _rel_residual(Ks, Bs, X[:, 0], lam2)
        hist2.append(res)
        if res <= RESIDUAL_TOL * 1e-2:
            break
        X = X / np.sqrt(np.einsum("ij,ij->j", X, Bs @ X))
    else:
        raise SpectralFailure("deflated block iteration did not converge", history + hist2)

    v1 = s * x
    v2 = s * X[:, 0]
    mean_abs = float(np.mean(np.abs(v1)))
    spread = float((v1.max() - v1.min()) / mean_abs)
    r1 = _rel_residual(K, B, v1, lam1)
    r2 = _rel_residual(K, B, v2, lam2)
    return SpectralReport(
        lambda1=lam1,
        lambda2=lam2,
        v1_spread=spread,
        gamma_estimate=float(gamma_estimate),
        residual1=r1,
        residual2=r2,
        iterations=it + it2,
        kernel_pass=abs(lam1) <= KERNEL_TOL and spread <= SPREAD_TOL,
        gap_pass=lam2 >= gamma_estimate * (1.0 - GAP_SLACK),
        residual_pass=r1 <= RESIDUAL_TOL and r2 <= RESIDUAL_TOL,
    )
