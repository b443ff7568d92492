"""P1 assembly of the weighted forms and the mean-constrained solve.

The unknown is ``u = phi / M``.  Testing ``-div(M grad u) + div(M u kappa) = f``
against hat functions gives, with no boundary term because ``M`` vanishes on
the boundary circle,

    K_ij = int M grad(phi_j) . grad(phi_i)
    D_ij = int M phi_j kappa . grad(phi_i)
    B_ij = int M phi_j phi_i
    m_i  = int M phi_i

and the discrete problem ``(K - D) u + lam m = b``, ``m . u = rho``.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Literal, Union

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import DimensionMismatch, InvalidArgument, SolverFailure
from .geometry import DEFAULT_RULE, QuadratureRule, TriMesh, evaluate_at_quadrature, quadrature_points
from .potential import ConfinementModel


@dataclass(frozen=True)
class DualLoad:
    """Right-hand side given directly as a vector of nodal functionals."""

    vector: np.ndarray


Load = Union[None, np.ndarray, Callable[[np.ndarray], np.ndarray], DualLoad]


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    K: sp.csr_matrix
    D: sp.csr_matrix
    B: sp.csr_matrix
    m: np.ndarray
    b: np.ndarray
    mesh: TriMesh
    model: ConfinementModel
    rule: QuadratureRule

    @property
    def n_dof(self) -> int:
        return self.m.shape[0]

    def with_load(self, b: np.ndarray) -> "AssembledSystem":
        b = np.asarray(b, dtype=float)
        if b.shape != self.m.shape:
            raise DimensionMismatch(f"load has shape {b.shape}, expected {self.m.shape}")
        return AssembledSystem(self.K, self.D, self.B, self.m, b, self.mesh, self.model, self.rule)


def _to_csr(rows, cols, vals, n) -> sp.csr_matrix:
    A = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def assemble(
    mesh: TriMesh,
    model: ConfinementModel,
    rule: QuadratureRule = DEFAULT_RULE,
    load: Load = None,
) -> AssembledSystem:
    """Assemble K, D, B, m and the load b.

    ``load`` is ``None`` (zero), a nodal density (array of vertex values,
    interpolated linearly), a density callable on points, or a
    :class:`DualLoad`.  Densities are paired as ``b_i = int f M phi_i``.
    """
    n = mesh.n_vertices
    tri = mesh.triangles
    pts, w = quadrature_points(mesh, rule)
    Mq = evaluate_at_quadrature(model.maxwellian, pts, what="Maxwellian")
    Mw = Mq * w  # (T, q)
    lam = rule.points  # (q, 3)
    G = mesh.basis_gradients  # (T, 3, 2)

    Kloc = Mw.sum(axis=1)[:, None, None] * np.einsum("tid,tjd->tij", G, G)
    Bloc = np.einsum("tq,qi,qj->tij", Mw, lam, lam)
    mloc = Mw @ lam  # (T, 3)

    rows = np.repeat(tri[:, :, None], 3, axis=2)
    cols = np.repeat(tri[:, None, :], 3, axis=1)
    K = _to_csr(rows, cols, Kloc, n)
    B = _to_csr(rows, cols, Bloc, n)
    m = np.zeros(n)
    np.add.at(m, tri.ravel(), mloc.ravel())

    if model.drift.is_zero:
        D = sp.csr_matrix((n, n))
    else:
        kap = evaluate_at_quadrature(model.kappa, pts, what="drift")  # (T, q, 2)
        kg = np.einsum("tqd,tid->tqi", kap, G)  # kappa . grad phi_i
        Dloc = np.einsum("tq,tqi,qj->tij", Mw, kg, lam)
        D = _to_csr(rows, cols, Dloc, n)

    b = _load_vector(mesh, load, pts, Mw, lam, n)
    return AssembledSystem(K, D, B, m, b, mesh, model, rule)


def _load_vector(mesh, load, pts, Mw, lam, n) -> np.ndarray:
    if load is None:
        return np.zeros(n)
    if isinstance(load, DualLoad):
        b = np.asarray(load.vector, dtype=float)
        if b.shape != (n,):
            raise DimensionMismatch(f"dual load has shape {b.shape}, expected ({n},)")
        return b.copy()
    if callable(load):
        fq = evaluate_at_quadrature(load, pts, what="load density")
    else:
        f = np.asarray(load, dtype=float)
        if f.shape != (n,):
            raise DimensionMismatch(f"nodal density has shape {f.shape}, expected ({n},)")
        fq = f[mesh.triangles] @ lam.T  # (T, q)
    bloc = (fq * Mw) @ lam
    b = np.zeros(n)
    np.add.at(b, mesh.triangles.ravel(), bloc.ravel())
    return b


def matvec(A: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"cannot multiply {A.shape} matrix by vector of shape {x.shape}")
    return np.asarray(A @ x)


@dataclass(frozen=True)
class ConstrainedSolve:
    """Raw output of :func:`solve_constrained`.

    For penalization ``lam`` is the implied multiplier ``(m.u - rho)/eps``,
    so the residual below is meaningful for both methods.
    """

    u: np.ndarray
    lam: float
    residual: float
    constraint_defect: float
    method: str
    eps_pen: float | None
    defect_flagged: bool = False


DEFECT_TOL = 1e-8


def solve_constrained(
    sys: AssembledSystem,
    rho: float,
    method: Literal["lagrange", "penalization"] = "lagrange",
    eps_pen: float = 1e-8,
) -> ConstrainedSolve:
    """Solve ``(K - D) u = b`` subject to ``m . u = rho``.

    Both methods factor one bordered sparse matrix::

        [[K - D, m], [m^T, -eps]] [u; mu] = [b; rho]

    with ``eps = 0`` for the Lagrange multiplier.  Eliminating ``mu``
    for ``eps > 0`` gives exactly the penalized system
    ``(K - D + m m^T / eps) u = b + rho m / eps`` without ever forming the
    dense rank-one term.
    """
    if not np.isfinite(rho):
        raise InvalidArgument(f"rho must be finite, got {rho}")
    if method == "lagrange":
        corner = None
        eps = None
    elif method == "penalization":
        if not 0 < eps_pen <= 1e-2:
            raise InvalidArgument(f"eps_pen must lie in (0, 1e-2], got {eps_pen}")
        eps = float(eps_pen)
        corner = sp.csr_matrix(np.array([[-eps]]))
    else:
        raise InvalidArgument(f"unknown method {method!r}")

    A = (sys.K - sys.D).tocsr()
    m = sys.m
    Asolve, bsolve = _tie_weightless_dofs(A, sys.b, sys.mesh, sys.K.diagonal())
    S = sp.bmat([[Asolve, sp.csr_matrix(m[:, None])], [sp.csr_matrix(m[None, :]), corner]], format="csc")
    rhs = np.concatenate([bsolve, [rho]])
    # The weight spans hundreds of decades near the boundary for stiff
    # potentials; symmetric Jacobi scaling keeps near-boundary u accurate.
    P = sp.diags(_equilibration(Asolve, m, eps))
    try:
        lu = splu((P @ S @ P).tocsc())
    except RuntimeError as exc:
        match = re.search(r"(\d+)", str(exc))
        raise SolverFailure(f"sparse factorization failed: {exc}", pivot=int(match.group(1)) if match else None) from exc
    x = P @ lu.solve(P @ rhs)
    if not np.all(np.isfinite(x)):
        raise SolverFailure("factorization produced non-finite values")
    u, lam = x[:-1], float(x[-1])
    residual = float(np.linalg.norm(A @ u + lam * m - sys.b))
    defect = float(abs(m @ u - rho))
    flagged = False
    if method == "penalization" and defect > DEFECT_TOL * max(1.0, abs(rho)):
        flagged = True
        warnings.warn(f"penalized mean constraint off by {defect:.3e}", RuntimeWarning, stacklevel=2)
    return ConstrainedSolve(u, lam, residual, defect, method, eps, flagged)


def _equilibration(A: sp.csr_matrix, m: np.ndarray, eps: float | None) -> np.ndarray:
    d = np.abs(A.diagonal())
    s = np.ones_like(d)
    pos = d > 0
    s[pos] = 1.0 / np.sqrt(d[pos])
    sm = np.linalg.norm(s * m)
    s_lam = 1.0 / sm if sm > 0 else 1.0
    if eps:
        s_lam = min(s_lam, 1.0 / np.sqrt(eps))
    return np.concatenate([s, [s_lam]])


# rows this far below the largest are assembled from (sub)denormal weights
WEIGHTLESS_REL = 1e-200


def _tie_weightless_dofs(A: sp.csr_matrix, b: np.ndarray, mesh: TriMesh, kdiag: np.ndarray):
    """Replace rows whose weight underflowed by ``u_i = mean(neighbours)``.

    Such dofs do not enter any weighted integral, so their value is free;
    the harmonic tie picks the constant extension of the interior field.
    """
    dead = np.flatnonzero(kdiag <= WEIGHTLESS_REL * kdiag.max())
    if dead.size == 0:
        return A, b
    tri = mesh.triangles
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    adj = sp.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=A.shape).tocsr()
    adj.data[:] = 1.0
    L = (sp.diags(np.asarray(adj.sum(axis=1)).ravel()) - adj).tocsr()
    keep = np.ones(A.shape[0], dtype=bool)
    keep[dead] = False
    A = (sp.diags(keep.astype(float)) @ A + sp.diags((~keep).astype(float)) @ L).tocsr()
    b = np.where(keep, b, 0.0)
    return A, b


def write_matrix_market(path: str | Path, A: sp.spmatrix, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, field="real", symmetry="general")


def write_vector_csv(path: str | Path, v: np.ndarray) -> None:
    np.savetxt(str(path), np.asarray(v, dtype=float).reshape(-1, 1), fmt="%.17g", delimiter=",")


def export_system(sys: AssembledSystem, directory: str | Path) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_market(out / "K.mtx", sys.K)
    write_matrix_market(out / "D.mtx", sys.D)
    write_matrix_market(out / "B.mtx", sys.B)
    write_vector_csv(out / "m.csv", sys.m)
    write_vector_csv(out / "b.csv", sys.b)
