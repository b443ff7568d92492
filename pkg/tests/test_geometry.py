import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confine_fp.errors import EvaluationError, InvalidArgument
from confine_fp.geometry import (
    build_disk_mesh,
    distance_field,
    distance_to_boundary,
    evaluate_at_quadrature,
    integrate,
    quadrature_points,
    read_mesh_csv,
    triangle_rule,
    write_mesh_csv,
)


@pytest.mark.parametrize("n", [1, 2, 5, 12])
def test_mesh_counts_and_orientation(n):
    mesh = build_disk_mesh(2.0, n)
    assert mesh.n_vertices == 1 + 3 * n * (n + 1)
    assert mesh.n_triangles == 6 * n * n
    assert np.all(mesh.signed_areas > 0)
    assert mesh.boundary_mask.sum() == 6 * n
    r = np.hypot(*mesh.vertices.T)
    assert np.allclose(r[mesh.boundary_mask], 2.0, rtol=0, atol=1e-14)
    assert np.all(r[~mesh.boundary_mask] < 2.0)


def test_mesh_area_matches_inscribed_polygon():
    # oracle: regular polygon with 6n vertices on the circle
    n, R = 10, 3.0
    mesh = build_disk_mesh(R, n)
    k = 6 * n
    assert math.isclose(mesh.areas.sum(), 0.5 * k * R * R * math.sin(2 * math.pi / k), rel_tol=1e-13)


def test_mesh_is_conforming():
    mesh = build_disk_mesh(1.0, 7)
    edges = {}
    for t in mesh.triangles:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (min(a, b), max(a, b))
            edges[key] = edges.get(key, 0) + 1
    boundary = [e for e, c in edges.items() if c == 1]
    assert all(c in (1, 2) for c in edges.values())
    assert len(boundary) == 6 * 7
    assert all(mesh.boundary_mask[a] and mesh.boundary_mask[b] for a, b in boundary)


def test_boundary_normals_are_outward_unit():
    mesh = build_disk_mesh(4.0, 5)
    nrm = mesh.boundary_normals
    assert np.allclose(np.linalg.norm(nrm, axis=1), 1.0)
    assert np.allclose(nrm * 4.0, mesh.vertices[mesh.boundary_mask])


def test_mesh_sextant_symmetry():
    mesh = build_disk_mesh(1.0, 6)
    c, s = math.cos(math.pi / 3), math.sin(math.pi / 3)
    rot = np.array([[c, -s], [s, c]])
    for i in range(mesh.n_vertices):
        j = mesh.rotate_vertex(i, 1)
        assert np.allclose(rot @ mesh.vertices[i], mesh.vertices[j], atol=1e-12)


def test_h_column_by_construction():
    assert [build_disk_mesh(5.0, n).h for n in (12, 24, 48)] == [5.0 / 12, 5.0 / 24, 5.0 / 48]


@pytest.mark.parametrize("radius,n", [(0.0, 3), (-1.0, 3), (math.inf, 3), (1.0, 0), (1.0, 2.5)])
def test_mesh_rejects_bad_arguments(radius, n):
    with pytest.raises(InvalidArgument):
        build_disk_mesh(radius, n)


def test_distance_to_boundary():
    mesh = build_disk_mesh(2.0, 3)
    assert distance_to_boundary(mesh, (0.0, 0.0)) == 2.0
    assert distance_to_boundary(mesh, (2.0, 0.0)) == 0.0
    assert math.isclose(distance_to_boundary(mesh, (0.6, 0.8)), 1.0)
    with pytest.raises(InvalidArgument):
        distance_to_boundary(mesh, (2.0, 0.1))
    assert np.allclose(distance_field(2.0, np.array([[0.0, 0.0], [1.0, 0.0]])), [2.0, 1.0])


def _monomial_exact(a: int, b: int) -> float:
    # integral of x^a y^b over the unit right triangle
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("order", [1, 2, 4, 5])
def test_quadrature_exact_up_to_order(order):
    rule = triangle_rule(order)
    assert math.isclose(rule.weights.sum(), 1.0, rel_tol=1e-14)
    assert np.all(rule.points > 0)  # strictly interior
    x, y = rule.points[:, 1], rule.points[:, 2]
    for a in range(order + 1):
        for b in range(order + 1 - a):
            approx = 0.5 * np.sum(rule.weights * x**a * y**b)
            assert math.isclose(approx, _monomial_exact(a, b), rel_tol=1e-12), (a, b)


def test_triangle_rule_selection_and_errors():
    assert triangle_rule(3).order == 4
    with pytest.raises(InvalidArgument):
        triangle_rule(0)
    with pytest.raises(InvalidArgument):
        triangle_rule(9)


def test_integrate_fene_weight_closed_form():
    # int (1 - r^2/l^2)^k over B(0, l) = pi l^2 / (k + 1), k = l^2 / 2
    l = 2.0
    mesh = build_disk_mesh(l, 32)
    val = integrate(mesh, triangle_rule(2), lambda q: np.clip(1 - (q[:, 0] ** 2 + q[:, 1] ** 2) / l**2, 0, None) ** (l * l / 2))
    assert abs(val / (4 * math.pi / 3) - 1) <= 5e-3


def test_integrate_is_reproducible():
    mesh = build_disk_mesh(1.0, 10)
    f = lambda q: np.exp(q[:, 0]) * np.cos(q[:, 1])  # noqa: E731
    assert integrate(mesh, triangle_rule(4), f) == integrate(mesh, triangle_rule(4), f)


def test_evaluation_error_names_triangle():
    mesh = build_disk_mesh(1.0, 3)
    pts, _ = quadrature_points(mesh)

    def bad(q):
        out = np.ones(len(q))
        out[7 * 3] = np.nan  # first point of triangle 7 (3-point rule)
        return out

    with pytest.raises(EvaluationError) as exc:
        evaluate_at_quadrature(bad, pts)
    assert exc.value.triangle == 7


def test_mesh_csv_roundtrip(tmp_path):
    mesh = build_disk_mesh(1.5, 4)
    write_mesh_csv(mesh, tmp_path / "m.csv")
    back = read_mesh_csv(tmp_path / "m.csv")
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.array_equal(back.boundary_mask, mesh.boundary_mask)
    assert back.n_rings == 4 and back.radius == 1.5


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3),
    r=st.floats(0, 0.95), th=st.floats(0, 2 * math.pi),
)
def test_p1_interpolation_reproduces_affine_fields(a, b, c, r, th):
    mesh = _MESH
    vals = a + b * mesh.vertices[:, 0] + c * mesh.vertices[:, 1]
    p = np.array([[r * math.cos(th), r * math.sin(th)]])
    got = mesh.interpolate(vals, p)[0]
    assert math.isclose(got, a + b * p[0, 0] + c * p[0, 1], rel_tol=1e-9, abs_tol=1e-9)


_MESH = build_disk_mesh(1.0, 6)


def test_interpolate_outside_uses_fill():
    mesh = build_disk_mesh(1.0, 4)
    assert mesh.interpolate(np.ones(mesh.n_vertices), np.array([[2.0, 0.0]]), fill=-5.0)[0] == -5.0
    with pytest.raises(InvalidArgument):
        mesh.interpolate(np.ones(3), np.zeros((1, 2)))
