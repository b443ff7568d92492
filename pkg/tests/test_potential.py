import json
import math

import numpy as np
import pytest

from confine_fp.errors import DomainError, InvalidArgument
from confine_fp.potential import (
    CoRotational,
    ConfinementModel,
    NoDrift,
    Shear,
    check_hypotheses,
    eval_model,
    spring_force,
)


def fene_Z(l):
    return math.pi * l * l / (l * l / 2 + 1)


def test_fene_origin_values():
    for l in (1.5, 2.0, 5.0):
        ev = eval_model(ConfinementModel.fene(l), (0.0, 0.0))
        assert ev.V == 0.0
        assert np.array_equal(ev.grad_V, [0.0, 0.0])


def test_fene_half_extension_force():
    l = 3.0
    q = np.array([l / 2, l / 2])  # |Q|^2 = l^2 / 2
    assert np.allclose(ConfinementModel.fene(l).grad_V(q), -2 * q, rtol=1e-15)


def test_fene_maxwellian_at_origin():
    m = ConfinementModel.fene(2.0)
    assert math.isclose(m.maxwellian(np.zeros(2)), 3 / (4 * math.pi), rel_tol=1e-10)


@pytest.mark.parametrize("l", [2.0, 5.0, 10.0])
def test_normalization_closed_form(l):
    assert math.isclose(ConfinementModel.fene(l).Z, fene_Z(l), rel_tol=1e-10)
    assert abs(ConfinementModel.fene(l).Z / fene_Z(l) - 1) < 5e-3


def test_fene5_normalization_value():
    assert abs(ConfinementModel.fene(5.0).Z - 5.8178) / 5.8178 < 5e-3


@pytest.mark.parametrize("model", [ConfinementModel.fene(5.0), ConfinementModel.power_law(2.0)])
def test_potential_diverges_at_boundary(model):
    R = model.radius
    q = np.array([R * (1 - 1e-6), 0.0])
    assert model.potential_value(q) <= -10


@pytest.mark.parametrize("model", [ConfinementModel.fene(5.0), ConfinementModel.power_law(1.5), ConfinementModel.quadratic(2.0, 1.5)])
def test_gradient_matches_finite_differences(model):
    rng = np.random.default_rng(0)
    R = model.radius
    r = 0.9 * R * np.sqrt(rng.uniform(0.01, 1, 100))
    th = rng.uniform(0, 2 * np.pi, 100)
    q = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    h = 1e-6 * R
    fd = np.stack(
        [
            (model.potential_value(q + [h, 0]) - model.potential_value(q - [h, 0])) / (2 * h),
            (model.potential_value(q + [0, h]) - model.potential_value(q - [0, h])) / (2 * h),
        ],
        axis=1,
    )
    g = model.grad_V(q)
    assert np.max(np.abs(fd - g) / np.maximum(np.abs(g), 1e-3)) <= 1e-6


def test_hessian_matches_finite_differences():
    model = ConfinementModel.fene(4.0)
    q = np.array([1.3, -0.7])
    h = 1e-5
    H = model.hess_V(q)
    fd = np.stack([(model.grad_V(q + e * h) - model.grad_V(q - e * h)) / (2 * h) for e in np.eye(2)], axis=1)
    assert np.allclose(H, fd, rtol=1e-7, atol=1e-8)


def test_fene_identity_with_spring_force():
    rng = np.random.default_rng(1)
    q = rng.uniform(-3, 3, size=(50, 2))
    q = q[np.hypot(q[:, 0], q[:, 1]) < 5]
    model = ConfinementModel.fene(5.0)
    assert np.array_equal(model.grad_V(q) + spring_force(q, 5.0), np.zeros_like(q))


def test_domain_errors():
    m = ConfinementModel.fene(2.0)
    with pytest.raises(DomainError):
        eval_model(m, (2.0, 0.0))
    with pytest.raises(DomainError):
        eval_model(m, (3.0, 0.0))
    with pytest.raises(DomainError):
        spring_force(np.array([2.0, 0.0]), 2.0)
    # smooth kind is defined up to the boundary
    assert eval_model(ConfinementModel.quadratic(1.0), (1.0, 0.0)).M > 0


def test_invalid_parameters():
    with pytest.raises(InvalidArgument):
        ConfinementModel.fene(0.0)
    with pytest.raises(InvalidArgument):
        ConfinementModel.power_law(-1.0)
    with pytest.raises(InvalidArgument):
        ConfinementModel.quadratic(-1.0)
    with pytest.raises(InvalidArgument):
        ConfinementModel.fene(2.0).with_Z(0.0)


def test_drifts():
    q = np.array([[1.0, 2.0], [-0.5, 0.25]])
    assert np.array_equal(NoDrift()(q), np.zeros_like(q))
    assert np.allclose(Shear(10, 0.2)(q), [[2 * 10 * 0.2 * 2.0, 0], [2 * 10 * 0.2 * 0.25, 0]])
    assert np.allclose(CoRotational(10, 1)(q), [[20.0, -10.0], [2.5, 5.0]])
    assert Shear(10, 0).is_zero and not Shear(10, 0.1).is_zero


def test_corotational_drift_is_tangential():
    # kappa . grad M = 0 for radial M, so div(M kappa) = M div(kappa) = 0
    rng = np.random.default_rng(2)
    q = rng.uniform(-1, 1, size=(40, 2))
    assert np.allclose(np.sum(CoRotational(3, 0.7)(q) * q, axis=1), 0.0, atol=1e-14)


def test_peclet_number():
    from confine_fp.geometry import build_disk_mesh

    mesh = build_disk_mesh(5.0, 10)
    assert ConfinementModel.fene(5.0).peclet(mesh) == 0.0
    pe = ConfinementModel.fene(5.0, Shear(1.0, 0.1)).peclet(mesh)
    # |kappa| <= 2 De gdot * 5 on the disk, longest edge about h
    assert 0 < pe <= 2 * 0.1 * 5 * mesh.edge_lengths.max() / 2 + 1e-12


# --------------------------------------------------------------------------
# hypothesis audit


@pytest.mark.parametrize(
    "alpha,expected",
    [(0.25, False), (0.5, False), (1.0, False), (1.01, True), (1.5, True), (2.0, True), (4.0, True)],
)
def test_power_law_verdicts(alpha, expected):
    assert check_hypotheses(ConfinementModel.power_law(alpha)).passed is expected


@pytest.mark.parametrize("l,expected", [(1.0, False), (1.4, False), (1.5, True), (2.0, True), (5.0, True), (10.0, True)])
def test_fene_verdicts(l, expected):
    assert check_hypotheses(ConfinementModel.fene(l)).passed is expected


def test_power_law_constants_match_exact_values():
    # M ~ d^alpha: a = max(0, 2 alpha - alpha^2), b -> alpha / (alpha - 1), c = 1 / alpha
    rep = check_hypotheses(ConfinementModel.power_law(2.0))
    assert rep.a <= 1e-6
    assert math.isclose(rep.b, 2.0, rel_tol=1e-3)
    assert math.isclose(rep.c, 0.5, rel_tol=1e-6)
    assert math.isclose(rep.p_bound, 2 + 4 * rep.c)
    rep = check_hypotheses(ConfinementModel.power_law(1.5))
    assert math.isclose(rep.a, 0.75, rel_tol=1e-3)


def test_fene_gamma_is_one():
    rep = check_hypotheses(ConfinementModel.fene(5.0))
    assert math.isclose(rep.gamma, 1.0, rel_tol=1e-9)
    assert rep.h3_pass


def test_quadratic_fails_boundary_hypothesis():
    rep = check_hypotheses(ConfinementModel.quadratic(1.0))
    assert not rep.h1_pass and rep.h3_pass
    assert "H1" in rep.failed


def test_report_json_schema():
    d = json.loads(check_hypotheses(ConfinementModel.fene(1.0)).to_json())
    assert set(d) == {"h1", "h2", "h3", "p_bound"}
    assert set(d["h1"]) == {"pass", "a", "b", "deriv_limit"}
    assert set(d["h2"]) == {"pass", "c"} and set(d["h3"]) == {"pass", "gamma"}
    assert d["h1"]["pass"] is False
    assert d["h1"]["b"] == "inf"


def test_audit_argument_checks():
    with pytest.raises(InvalidArgument):
        check_hypotheses(ConfinementModel.fene(5.0), boundary_window=0.0)
    with pytest.raises(InvalidArgument):
        check_hypotheses(ConfinementModel.fene(5.0), n_samples=1)


def test_audit_is_fast():
    import time

    t = time.perf_counter()
    for a in (0.25, 0.5, 1.0, 1.01, 1.5, 2.0, 4.0):
        check_hypotheses(ConfinementModel.power_law(a))
    for l in (1.0, 1.4, 1.5, 2.0, 5.0, 10.0):
        check_hypotheses(ConfinementModel.fene(l))
    assert time.perf_counter() - t < 5.0
