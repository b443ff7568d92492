"""Fokker-Planck solves, manufactured solutions and refinement studies."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgument, RejectedModel
from .fem import AssembledSystem, DualLoad, Load, assemble, solve_constrained
from .geometry import DEFAULT_RULE, QuadratureRule, TriMesh, build_disk_mesh, quadrature_points, triangle_rule
from .potential import ConfinementModel, HypothesisReport, check_hypotheses

PECLET_LIMIT = 2.0
ERROR_RULE = triangle_rule(5)


@dataclass(eq=False)
class Solution:
    """Discrete solution: nodal ``u = phi/M``, nodal ``phi`` and diagnostics."""

    mesh: TriMesh
    model: ConfinementModel
    u: np.ndarray
    phi: np.ndarray
    lam: float
    residual_norm: float
    constraint_defect: float
    rho: float
    method: str
    moments: dict[str, float]
    peclet_max: float
    forced: bool = False
    eps_pen: float | None = None
    hypotheses: HypothesisReport | None = field(default=None, repr=False)
    system: AssembledSystem | None = field(default=None, repr=False)

    @property
    def mass(self) -> float:
        return self.moments["mass"]

    def summary(self) -> dict:
        return {
            "rho": self.rho,
            "lambda": self.lam,
            "residual": self.residual_norm,
            "defect": self.constraint_defect,
            "moments": dict(self.moments),
            "peclet_max": self.peclet_max,
            "method": self.method,
            "eps_pen": self.eps_pen,
            "forced": self.forced,
            "n_rings": self.mesh.n_rings,
            "n_dof": int(self.u.shape[0]),
        }

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "u", "phi"])
            for (x, y), u, p in zip(self.mesh.vertices, self.u, self.phi):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(u)), repr(float(p))])

    def write_summary(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), sort_keys=True, indent=2) + "\n")


def nodal_maxwellian(mesh: TriMesh, model: ConfinementModel) -> np.ndarray:
    M = model.maxwellian(mesh.vertices)
    if model.potential.vanishes_on_boundary:
        M = np.where(mesh.boundary_mask, 0.0, M)
    return M


def compute_moments(mesh: TriMesh, model: ConfinementModel, u: np.ndarray, rule: QuadratureRule = DEFAULT_RULE) -> dict[str, float]:
    """Mass, mean and second moments of ``phi = M u_h`` with ``rule``."""
    pts, w = quadrature_points(mesh, rule)
    uq = u[mesh.triangles] @ rule.points.T
    phiw = model.maxwellian(pts.reshape(-1, 2)).reshape(uq.shape) * uq * w
    x, y = pts[..., 0], pts[..., 1]

    def tot(a):
        return float(np.sum(np.sum(a, axis=1)))

    return {
        "mass": tot(phiw),
        "Q1": tot(phiw * x),
        "Q2": tot(phiw * y),
        "Q1Q1": tot(phiw * x * x),
        "Q2Q2": tot(phiw * y * y),
        "Q1Q2": tot(phiw * x * y),
    }


def solve_fokker_planck(
    model: ConfinementModel,
    n_rings: int,
    rho: float = 1.0,
    load: Load = None,
    method: str = "lagrange",
    eps_pen: float = 1e-8,
    rule: QuadratureRule = DEFAULT_RULE,
    force: bool = False,
    mesh: TriMesh | None = None,
) -> Solution:
    """Build the mesh, normalize ``M`` on it, assemble and solve.

    The hypotheses are audited first; a failing model is rejected unless
    ``force`` is set (the override is recorded on the solution).
    """
    report = None
    if model.is_radial:
        report = check_hypotheses(model)
        if not report.passed and not force:
            raise RejectedModel(
                f"model fails hypothesis {', '.join(report.failed)}; pass force=True to solve anyway",
                failed=report.failed,
            )
    if mesh is None:
        mesh = build_disk_mesh(model.radius, n_rings)
    elif abs(mesh.radius - model.radius) > 1e-12 * model.radius:
        raise InvalidArgument("mesh radius does not match the model domain")
    model = model.normalized(mesh, rule)
    sys = assemble(mesh, model, rule, load)
    res = solve_constrained(sys, rho, method=method, eps_pen=eps_pen)
    pe = model.peclet(mesh)
    if pe > PECLET_LIMIT:
        warnings.warn(f"mesh Peclet number {pe:.2f} exceeds {PECLET_LIMIT}", RuntimeWarning, stacklevel=2)
    phi = nodal_maxwellian(mesh, model) * res.u
    return Solution(
        mesh=mesh,
        model=model,
        u=res.u,
        phi=phi,
        lam=res.lam,
        residual_norm=res.residual,
        constraint_defect=res.constraint_defect,
        rho=float(rho),
        method=method,
        moments=compute_moments(mesh, model, res.u, rule),
        peclet_max=pe,
        forced=bool(force and report is not None and not report.passed),
        eps_pen=res.eps_pen,
        hypotheses=report,
        system=sys,
    )


# --------------------------------------------------------------------------
# manufactured solutions

Field = Callable[[np.ndarray], np.ndarray]


def weighted_error(
    mesh: TriMesh,
    model: ConfinementModel,
    u: np.ndarray,
    u_star: Field,
    grad_u_star: Field,
    rule: QuadratureRule = ERROR_RULE,
) -> tuple[float, float]:
    """``L2_M`` and ``H1_M`` seminorm errors of the P1 field ``u`` against ``u_star``."""
    pts, w = quadrature_points(mesh, rule)
    flat = pts.reshape(-1, 2)
    Mw = model.maxwellian(flat).reshape(w.shape) * w
    uq = u[mesh.triangles] @ rule.points.T
    gu = np.einsum("ti,tid->td", u[mesh.triangles], mesh.basis_gradients)
    e0 = uq - np.asarray(u_star(flat)).reshape(uq.shape)
    e1 = gu[:, None, :] - np.asarray(grad_u_star(flat)).reshape(uq.shape + (2,))
    l2 = math.sqrt(max(float(np.sum(Mw * e0 * e0)), 0.0))
    h1 = math.sqrt(max(float(np.sum(Mw * np.sum(e1 * e1, axis=-1))), 0.0))
    return l2, h1


def manufactured_load(mesh: TriMesh, model: ConfinementModel, u_star: Field, grad_u_star: Field, rule: QuadratureRule = DEFAULT_RULE) -> tuple[np.ndarray, float]:
    """Weak load ``b_i = int M grad u*.grad phi_i - int M u* kappa.grad phi_i`` and ``rho = int M u*``."""
    pts, w = quadrature_points(mesh, rule)
    flat = pts.reshape(-1, 2)
    Mw = model.maxwellian(flat).reshape(w.shape) * w
    us = np.asarray(u_star(flat), dtype=float).reshape(w.shape)
    flux = np.asarray(grad_u_star(flat), dtype=float).reshape(w.shape + (2,))
    flux = flux - us[..., None] * model.kappa(flat).reshape(w.shape + (2,))
    bloc = np.einsum("tq,tqd,tid->ti", Mw, flux, mesh.basis_gradients)
    b = np.zeros(mesh.n_vertices)
    np.add.at(b, mesh.triangles.ravel(), bloc.ravel())
    rho = float(np.sum(Mw * us))
    return b, rho


def manufactured_solution_test(
    model: ConfinementModel,
    n_rings: int,
    u_star: Field,
    grad_u_star: Field,
    rule: QuadratureRule = DEFAULT_RULE,
) -> dict[str, float]:
    mesh = build_disk_mesh(model.radius, n_rings)
    model = model.normalized(mesh, rule)
    b, rho = manufactured_load(mesh, model, u_star, grad_u_star, rule)
    sys = assemble(mesh, model, rule, DualLoad(b))
    res = solve_constrained(sys, rho)
    l2, h1 = weighted_error(mesh, model, res.u, u_star, grad_u_star)
    return {
        "error_L2M": l2,
        "error_H1M": h1,
        "h": mesh.h,
        "n_rings": n_rings,
        "lambda": res.lam,
        "residual": res.residual,
        "u": res.u,
    }


ROUNDOFF_ERROR = 1e-10


@dataclass
class ConvergenceRow:
    n_rings: int
    h: float
    error_L2M: float
    error_H1M: float
    observed_order: float | None = None
    observed_order_H1M: float | None = None


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]

    @property
    def final_order(self) -> float | None:
        return self.rows[-1].observed_order

    def orders(self) -> list[float | None]:
        return [r.observed_order for r in self.rows[1:]]

    def format(self) -> str:
        lines = [f"{'rings':>6} {'h':>10} {'err_L2M':>12} {'err_H1M':>12} {'order':>7}"]
        for r in self.rows:
            o = "n/a" if r.observed_order is None else f"{r.observed_order:.3f}"
            lines.append(f"{r.n_rings:>6d} {r.h:>10.4g} {r.error_L2M:>12.4e} {r.error_H1M:>12.4e} {o:>7}")
        return "\n".join(lines)


def _order(e_coarse: float, e_fine: float, h_coarse: float, h_fine: float) -> float | None:
    # errors at round-off carry no rate information
    if e_coarse <= ROUNDOFF_ERROR or e_fine <= ROUNDOFF_ERROR:
        return None
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


def convergence_study(
    model: ConfinementModel,
    u_star: Field,
    grad_u_star: Field,
    rings_list: Sequence[int],
    rule: QuadratureRule = DEFAULT_RULE,
) -> ConvergenceTable:
    rings = [int(k) for k in rings_list]
    if len(rings) < 3 or any(b <= a for a, b in zip(rings, rings[1:])):
        raise InvalidArgument("rings_list must be strictly increasing with at least 3 levels")
    rows = []
    for k in rings:
        r = manufactured_solution_test(model, k, u_star, grad_u_star, rule)
        rows.append(ConvergenceRow(k, r["h"], r["error_L2M"], r["error_H1M"]))
    for prev, cur in zip(rows, rows[1:]):
        cur.observed_order = _order(prev.error_L2M, cur.error_L2M, prev.h, cur.h)
        cur.observed_order_H1M = _order(prev.error_H1M, cur.error_H1M, prev.h, cur.h)
    return ConvergenceTable(rows)
