"""Confinement potentials, Maxwellians, bounded drifts and the admissibility audit.

A model couples a radial potential ``V`` (``-inf`` on the boundary circle
for the FENE and power-law kinds) with a bounded drift ``kappa``.  The total
field is ``F = kappa + grad V`` and the Maxwellian is ``M = exp(V) / Z``.

Radial kinds expose their profile as functions of ``r = |Q|``:
``V(r)``, ``V'(r)``, ``V''(r)`` and ``V'(r)/r``.  Everything else (2D
gradients, Hessians, the hypothesis audit) is derived from the profile.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy import integrate as spi

from .errors import DomainError, InvalidArgument, Unsupported
from .geometry import DEFAULT_RULE, QuadratureRule, TriMesh, integrate

# --------------------------------------------------------------------------
# potential kinds


@dataclass(frozen=True)
class FENE:
    """FENE spring potential ``V = (l^2/2) ln(1 - |Q|^2/l^2)`` on ``B(0, l)``."""

    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise InvalidArgument(f"FENE length must be positive, got {self.length}")

    @property
    def radius(self) -> float:
        return float(self.length)

    @property
    def vanishes_on_boundary(self) -> bool:
        return True

    def profile(self, r):
        l2 = self.length**2
        return 0.5 * l2 * np.log1p(-(r * r) / l2)

    def d1(self, r):
        return -r / (1.0 - r * r / self.length**2)

    def d2(self, r):
        s = r * r / self.length**2
        return -(1.0 + s) / (1.0 - s) ** 2

    def d1_over_r(self, r):
        return -1.0 / (1.0 - r * r / self.length**2)

    def grad(self, q):
        # same expression as the spring force, so grad V + E(Q) == 0 bit for bit
        return -q / (1.0 - np.sum(q * q, axis=-1) / self.length**2)[..., None]

    def exp_profile(self, r):
        """``exp(V)``, exactly zero on and beyond the boundary."""
        base = np.clip(1.0 - (r * r) / self.length**2, 0.0, None)
        return base ** (0.5 * self.length**2)


@dataclass(frozen=True)
class PowerLaw:
    """``M`` proportional to ``dist(Q, boundary)^alpha`` on the unit disk.

    ``V = alpha ln(1 - |Q|)``; the profile has a conical tip at the origin
    (``grad V`` jumps there) but is smooth everywhere else.
    """

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidArgument(f"power-law exponent must be positive, got {self.alpha}")

    @property
    def radius(self) -> float:
        return 1.0

    @property
    def vanishes_on_boundary(self) -> bool:
        return True

    def profile(self, r):
        return self.alpha * np.log1p(-r)

    def d1(self, r):
        return -self.alpha / (1.0 - r)

    def d2(self, r):
        return -self.alpha / (1.0 - r) ** 2

    def d1_over_r(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(r > 0, -self.alpha / ((1.0 - r) * np.where(r > 0, r, 1.0)), -np.inf)

    def exp_profile(self, r):
        return np.clip(1.0 - r, 0.0, None) ** self.alpha


@dataclass(frozen=True)
class Quadratic:
    """``V = -curvature |Q|^2 / 2`` on ``B(0, radius)``; smooth up to the boundary."""

    curvature: float = 1.0
    disk_radius: float = 1.0

    def __post_init__(self):
        if self.curvature < 0:
            raise InvalidArgument(f"curvature must be non-negative, got {self.curvature}")
        if not self.disk_radius > 0:
            raise InvalidArgument(f"radius must be positive, got {self.disk_radius}")

    @property
    def radius(self) -> float:
        return float(self.disk_radius)

    @property
    def vanishes_on_boundary(self) -> bool:
        return False

    def profile(self, r):
        return -0.5 * self.curvature * r * r

    def d1(self, r):
        return -self.curvature * r

    def d2(self, r):
        return -self.curvature + 0.0 * r

    def d1_over_r(self, r):
        return -self.curvature + 0.0 * r

    def exp_profile(self, r):
        return np.exp(-0.5 * self.curvature * r * r)


PotentialKind = Union[FENE, PowerLaw, Quadratic]

# --------------------------------------------------------------------------
# drift kinds


@dataclass(frozen=True)
class NoDrift:
    def __call__(self, q: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(q, dtype=float))

    @property
    def is_zero(self) -> bool:
        return True


@dataclass(frozen=True)
class Shear:
    """Simple shear ``u = (shear_rate * x2, 0)``: ``kappa = 2 De shear_rate (Q2, 0)``."""

    deborah: float
    shear_rate: float

    def __call__(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        out = np.zeros_like(q)
        out[..., 0] = 2.0 * self.deborah * self.shear_rate * q[..., 1]
        return out

    @property
    def is_zero(self) -> bool:
        return self.deborah * self.shear_rate == 0


@dataclass(frozen=True)
class CoRotational:
    """Antisymmetric part of the shear gradient: ``kappa = De shear_rate (Q2, -Q1)``."""

    deborah: float
    shear_rate: float

    def __call__(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        c = self.deborah * self.shear_rate
        out = np.empty_like(q)
        out[..., 0] = c * q[..., 1]
        out[..., 1] = -c * q[..., 0]
        return out

    @property
    def is_zero(self) -> bool:
        return self.deborah * self.shear_rate == 0


DriftKind = Union[NoDrift, Shear, CoRotational]

# --------------------------------------------------------------------------


def radial_normalization(potential) -> float:
    """``Z = 2 pi int_0^R exp(V(r)) r dr`` by adaptive quadrature."""
    val, _ = spi.quad(
        lambda r: float(potential.exp_profile(r)) * r, 0.0, potential.radius, limit=200, epsabs=0, epsrel=1e-13
    )
    return 2.0 * math.pi * val


@dataclass(frozen=True)
class ModelEval:
    V: float
    grad_V: np.ndarray
    hess_V: np.ndarray
    kappa: np.ndarray
    M: float


@dataclass(frozen=True)
class ConfinementModel:
    """Immutable pairing of a potential, a drift and a normalization constant.

    ``Z`` defaults to the continuous value on the exact disk.  Use
    :func:`normalize` / :meth:`normalized` to switch to the value seen by a
    given mesh and quadrature rule, which is what makes ``sum(m) == 1``
    hold to round-off in the discrete problem.
    """

    potential: PotentialKind
    drift: DriftKind = field(default_factory=NoDrift)
    Z: float | None = None

    def __post_init__(self):
        if self.Z is None:
            object.__setattr__(self, "Z", radial_normalization(self.potential))
        if not (self.Z > 0 and np.isfinite(self.Z)):
            raise InvalidArgument(f"normalization constant must be positive and finite, got {self.Z}")

    # convenience constructors
    @classmethod
    def fene(cls, length: float, drift: DriftKind | None = None) -> "ConfinementModel":
        return cls(FENE(length), drift or NoDrift())

    @classmethod
    def power_law(cls, alpha: float) -> "ConfinementModel":
        return cls(PowerLaw(alpha))

    @classmethod
    def quadratic(cls, curvature: float = 1.0, radius: float = 1.0, drift: DriftKind | None = None):
        return cls(Quadratic(curvature, radius), drift or NoDrift())

    @property
    def radius(self) -> float:
        return self.potential.radius

    @property
    def is_radial(self) -> bool:
        return all(hasattr(self.potential, a) for a in ("profile", "d1", "d2", "d1_over_r"))

    def with_drift(self, drift: DriftKind) -> "ConfinementModel":
        return replace(self, drift=drift)

    def with_Z(self, Z: float) -> "ConfinementModel":
        return replace(self, Z=float(Z))

    def normalized(self, mesh: TriMesh, rule: QuadratureRule = DEFAULT_RULE) -> "ConfinementModel":
        return self.with_Z(normalize(self, mesh, rule))

    # vectorised evaluators -------------------------------------------------
    def exp_V(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return self.potential.exp_profile(np.hypot(q[..., 0], q[..., 1]))

    def maxwellian(self, q: np.ndarray) -> np.ndarray:
        """``M(q)``; zero on and beyond the boundary for vanishing kinds."""
        return self.exp_V(q) / self.Z

    def kappa(self, q: np.ndarray) -> np.ndarray:
        return self.drift(q)

    def potential_value(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return self.potential.profile(np.hypot(q[..., 0], q[..., 1]))

    def grad_V(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if hasattr(self.potential, "grad"):
            return self.potential.grad(q)
        r = np.hypot(q[..., 0], q[..., 1])
        return q * np.asarray(self.potential.d1_over_r(r))[..., None]

    def hess_V(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        r = np.hypot(q[..., 0], q[..., 1])
        d2 = np.asarray(self.potential.d2(r), dtype=float)
        dr = np.asarray(self.potential.d1_over_r(r), dtype=float)
        safe = np.where(r > 0, r, 1.0)
        e = q / safe[..., None]
        e = np.where((r > 0)[..., None], e, np.array([1.0, 0.0]))
        eet = e[..., :, None] * e[..., None, :]
        eye = np.eye(2)
        with np.errstate(invalid="ignore"):
            return d2[..., None, None] * eet + dr[..., None, None] * (eye - eet)

    def peclet(self, mesh: TriMesh) -> float:
        """max over triangles of |kappa| h_T / 2 (|kappa| taken at the vertices)."""
        if self.drift.is_zero:
            return 0.0
        k = np.linalg.norm(self.kappa(mesh.vertices), axis=1)
        kt = k[mesh.triangles].max(axis=1)
        return float(np.max(kt * mesh.edge_lengths) / 2.0)


def _check_inside(model: ConfinementModel, q: np.ndarray) -> None:
    r = float(np.hypot(q[0], q[1]))
    R = model.radius
    if model.potential.vanishes_on_boundary:
        if r >= R:
            raise DomainError(f"|Q| = {r} is not strictly inside B(0, {R})")
    elif r > R:
        raise DomainError(f"|Q| = {r} lies outside B(0, {R})")


def eval_model(model: ConfinementModel, Q) -> ModelEval:
    q = np.asarray(Q, dtype=float).reshape(2)
    _check_inside(model, q)
    return ModelEval(
        V=float(model.potential_value(q)),
        grad_V=model.grad_V(q),
        hess_V=model.hess_V(q),
        kappa=model.kappa(q),
        M=float(model.maxwellian(q)),
    )


def spring_force(q: np.ndarray, length: float) -> np.ndarray:
    """FENE spring force ``E(Q) = Q / (1 - |Q|^2 / l^2)``."""
    q = np.asarray(q, dtype=float)
    r2 = np.sum(q * q, axis=-1)
    if np.any(r2 >= length * length):
        raise DomainError("spring force evaluated on or beyond the maximal extension")
    return q / (1.0 - r2 / length**2)[..., None]


def normalize(model: ConfinementModel, mesh: TriMesh, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """``Z = integral of exp(V)`` over the mesh with ``rule``."""
    return integrate(mesh, rule, model.exp_V)


# --------------------------------------------------------------------------
# hypothesis audit

EXPONENT_TOL = 1e-6
A_TOL = 1e-9
DEFAULT_WINDOW = 1e-2


@dataclass
class HypothesisReport:
    """Empirical constants for the three admissibility hypotheses.

    Constants are best values on a finite grid (plus the analytic tail
    extrapolation described in :func:`check_hypotheses`); they are
    estimates, not proofs.
    """

    h1_pass: bool
    h2_pass: bool
    h3_pass: bool
    a: float
    limit_of_radial_derivative_at_boundary: float
    b: float
    b_statement_form: float
    c: float
    gamma: float
    p_bound: float
    boundary_exponent: float
    h1_lines: tuple[bool, bool, bool] = (False, False, False)
    samples: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return self.h1_pass and self.h2_pass and self.h3_pass

    @property
    def failed(self) -> tuple[str, ...]:
        out = []
        if not self.h1_pass:
            out.append("H1")
        if not self.h2_pass:
            out.append("H2")
        if not self.h3_pass:
            out.append("H3")
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "h1": {
                "pass": self.h1_pass,
                "a": _jsonable(self.a),
                "b": _jsonable(self.b),
                "deriv_limit": _jsonable(self.limit_of_radial_derivative_at_boundary),
            },
            "h2": {"pass": self.h2_pass, "c": _jsonable(self.c)},
            "h3": {"pass": self.h3_pass, "gamma": _jsonable(self.gamma)},
            "p_bound": _jsonable(self.p_bound),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _jsonable(x: float):
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def check_hypotheses(
    model: ConfinementModel,
    n_samples: int = 200,
    boundary_window: float = DEFAULT_WINDOW,
) -> HypothesisReport:
    """Audit the admissibility hypotheses for a radial model.

    Boundary quantities are sampled on a log-spaced grid of distances
    ``d`` in ``[1e-8 R, boundary_window R]``; derivatives are taken in the
    inward normal direction, so ``dV/dd = -V'(r)``.  Limits at the boundary
    are classified from the local exponent ``e = d dV/dd`` at the innermost
    sample: ``M ~ d^e``.  In particular the radial derivative of ``M``
    tends to zero iff ``e > 1`` and the product
    ``M'(d) * int_d^eps 1/M`` tends to ``e / (e - 1)`` for ``e > 1`` and
    diverges for ``0 < e <= 1``.
    """
    if not model.is_radial:
        raise Unsupported("hypothesis audit is only implemented for radial potentials")
    if not 0 < boundary_window <= 0.5:
        raise InvalidArgument(f"boundary_window must lie in (0, 0.5], got {boundary_window}")
    if n_samples < 2:
        raise InvalidArgument("need at least two samples")
    pot = model.potential
    R = pot.radius
    d = np.geomspace(1e-8 * R, boundary_window * R, n_samples)
    r = R - d
    Vd = -np.asarray(pot.d1(r), dtype=float)  # dV/dd
    Vdd = np.asarray(pot.d2(r), dtype=float)  # d2V/dd2

    # H1, line 1
    line1 = d * d * (Vd * Vd + 2.0 * Vdd)
    a = max(0.0, float(np.max(-line1)))
    line1_ok = a < 1.0 - A_TOL

    # local exponent of M at the boundary
    e0 = float(d[0] * Vd[0])
    vanishing = e0 >= EXPONENT_TOL

    # H1, line 2: limit of dM/dd at the boundary
    logZ = math.log(model.Z)
    Md = Vd * np.exp(np.asarray(pot.profile(r), dtype=float) - logZ)
    if Vd[0] == 0.0:
        deriv_limit = 0.0
    else:
        slope = float(d[0] * Vdd[0] / Vd[0] + d[0] * Vd[0])  # d ln|M'| / d ln d
        if slope > EXPONENT_TOL:
            deriv_limit = 0.0
        elif slope >= -EXPONENT_TOL:
            deriv_limit = float(abs(Md[0]))
        else:
            deriv_limit = math.inf
    line2_ok = deriv_limit == 0.0

    # H1, line 3 in the local form sup_d M'(d) int_d^eps dt / M(t)
    eps = boundary_window * R
    prod = np.array([_local_product(pot, R, di, eps) for di in d])
    grid_sup = float(np.max(prod))
    if not vanishing:
        b = grid_sup
    elif e0 <= 1.0 + EXPONENT_TOL:
        b = math.inf
    else:
        b = max(grid_sup, e0 / (e0 - 1.0))
    line3_ok = math.isfinite(b)

    # statement form M'(d) * int_Omega 1/M (finite only if 1/M is integrable)
    # (for a vanishing M either 1/M is not integrable or M' blows up)
    if vanishing:
        b_statement = math.inf
    else:
        inv_int, _ = spi.quad(lambda s: math.exp(-float(pot.profile(s))) * s, 0.0, R, limit=200)
        exp_v = np.exp(np.asarray(pot.profile(r), dtype=float))
        b_statement = float(np.max(np.abs(Vd) * exp_v)) * 2.0 * math.pi * inv_int

    h1_pass = line1_ok and line2_ok and line3_ok

    # H2: d |grad V| bounded
    ratio = d * np.abs(Vd)
    sup_ratio = float(np.max(ratio))
    ratio_slope = 1.0 + float(d[0] * Vdd[0] / Vd[0]) if Vd[0] != 0 else 1.0
    if ratio_slope < -EXPONENT_TOL:
        c = 0.0
    elif sup_ratio == 0.0:
        c = math.inf
    else:
        c = 1.0 / sup_ratio
    h2_pass = c > 0

    # H3: largest Hessian eigenvalue of V over the whole disk
    rr = np.unique(np.concatenate([np.linspace(0.0, R, 2001)[:-1], R - np.geomspace(1e-8 * R, 0.5 * R, 400)]))
    d2 = np.asarray(pot.d2(rr), dtype=float)
    tang = np.asarray(pot.d1_over_r(rr), dtype=float)
    sup_eig = float(np.max(np.maximum(d2, tang)))
    gamma = -sup_eig
    h3_pass = gamma > 0

    p_bound = 2.0 + 4.0 * c
    return HypothesisReport(
        h1_pass=h1_pass,
        h2_pass=h2_pass,
        h3_pass=h3_pass,
        a=a,
        limit_of_radial_derivative_at_boundary=deriv_limit,
        b=b,
        b_statement_form=b_statement,
        c=c,
        gamma=gamma,
        p_bound=p_bound,
        boundary_exponent=e0,
        h1_lines=(line1_ok, line2_ok, line3_ok),
        samples={"distance": d, "line1": line1, "local_product": prod, "h2_ratio": ratio},
    )


def _local_product(pot, R: float, d: float, eps: float) -> float:
    """``M'(d) int_d^eps dt/M(t)`` with the substitution ``t = d e^s``.

    Written as ``d V'(d) int_0^log(eps/d) exp(V(d) - V(d e^s) + s) ds`` so the
    integrand stays O(1) however fast ``M`` vanishes.
    """
    if d >= eps:
        return 0.0
    Vd = -float(pot.d1(R - d))
    V0 = float(pot.profile(R - d))

    def f(s):
        t = d * math.exp(s)
        return math.exp(V0 - float(pot.profile(R - t)) + s)

    val, _ = spi.quad(f, 0.0, math.log(eps / d), limit=200)
    return d * Vd * val
