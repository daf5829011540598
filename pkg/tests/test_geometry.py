import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from npcorner.exceptions import ConfigError
from npcorner.geometry import (CAPACITY_RADIUS, MESH_COLUMNS, build_mesh, builtin_disk,
                               builtin_droplet, builtin_square, curve_from_config, junction_angle,
                               load_curve, mesh_table)

PI = math.pi


def test_droplet_points_and_corner():
    spec = builtin_droplet()
    arc = spec.pieces[0]
    assert arc.point(0.5) == pytest.approx(spec.scale, abs=1e-15)
    assert abs(arc.point(0.0)) < 1e-15 and abs(arc.point(1.0)) < 1e-15
    assert spec.corners == ((0, 2 * PI / 7),)
    # tangent gap from one-sided finite differences, independent of the analytic derivatives
    h = 1e-7
    t_out = (arc.point(h) - arc.point(0.0)) / h
    t_in = (arc.point(1.0) - arc.point(1.0 - h)) / h
    gap = float(np.angle(-t_in / t_out)) % (2 * PI)
    assert gap == pytest.approx(2 * PI / 7, abs=1e-6)
    assert junction_angle(arc, arc) == pytest.approx(2 * PI / 7, abs=1e-8)


def test_square_measurements():
    spec = builtin_square(2.0)
    side = 2.0 * spec.scale
    assert spec.length() == pytest.approx(4 * side, rel=1e-12)
    assert spec.signed_area() == pytest.approx(side ** 2, rel=1e-12)
    assert all(a == pytest.approx(PI / 2) for _, a in spec.corners)


def test_disk_measurements():
    spec = builtin_disk(3.0)
    r = 3.0 * spec.scale
    assert spec.corners == ()
    assert spec.length() == pytest.approx(2 * PI * r, rel=1e-10)
    mesh = build_mesh(spec, 8, 0, 16)
    np.testing.assert_allclose(mesh.curvature, 1 / r, rtol=1e-12)


def test_capacity_safeguard():
    for spec in (builtin_droplet(), builtin_square(), builtin_disk(5.0)):
        assert spec.max_radius() <= CAPACITY_RADIUS * (1 + 1e-9)


def test_disk_node_count_and_uniform_panels():
    mesh = build_mesh(builtin_disk(), 8, 0, 8)
    assert mesh.n == 64
    widths = [p.u_b - p.u_a for p in mesh.panels]
    assert np.ptp(widths) < 1e-15


def test_disk_area_by_quadrature():
    spec = builtin_disk()
    mesh = build_mesh(spec, 8, 0, 16)
    r = spec.scale
    p, t = mesh.points, mesh.tangent
    # \oint x dy with dy = t_y dsigma
    area = np.sum(p.real * t.imag * mesh.dsigma)
    assert area == pytest.approx(PI * r * r, rel=1e-10)


@pytest.mark.parametrize("levels", [4, 10])
def test_droplet_grading_ratio(levels):
    mesh = build_mesh(builtin_droplet(), 8, levels, 16)
    widths = np.array([p.u_b - p.u_a for p in mesh.panels])
    assert widths.min() / widths.max() == pytest.approx(2.0 ** -levels, rel=1e-12)


@pytest.mark.parametrize("name", ["droplet", "square", "disk"])
def test_mesh_length_and_green_identity(name):
    spec = load_curve(name)
    mesh = build_mesh(spec)
    assert np.all(mesh.weight > 0)
    assert mesh.length() == pytest.approx(spec.length(), rel=1e-10)
    flux = np.sum((np.conj(mesh.normal) * mesh.points).real * mesh.dsigma)
    assert flux == pytest.approx(2 * spec.signed_area(), rel=1e-8)


@pytest.mark.parametrize("name", ["square", "disk"])
def test_normals_point_outward(name):
    spec = load_curve(name)
    mesh = build_mesh(spec)
    c = spec.centroid()
    assert np.all((np.conj(mesh.normal) * (mesh.points - c)).real > 0)


def test_no_node_on_corner():
    mesh = build_mesh(builtin_square(), 8, 12, 16)
    for cp in mesh.spec.corner_points:
        assert np.min(np.abs(mesh.points - cp)) > 0
    assert np.all(mesh.s_corner > 0)


def test_length_converges_with_order():
    spec = builtin_droplet()
    exact = spec.length()
    errs = [abs(build_mesh(spec, 4, 6, k).length() - exact) for k in (4, 8)]
    assert errs[1] < errs[0] / 10


def test_corner_distance_matches_arclength():
    spec = builtin_droplet()
    mesh = build_mesh(spec, 8, 6, 16)
    arc = spec.pieces[0]
    for i in range(0, mesh.n, 37):
        t = mesh.param[i]
        a = quad(lambda v: abs(arc.derivatives(v)[0]), 0.0, t, epsabs=1e-15, limit=200)[0]
        b = spec.length() - a
        assert mesh.s_corner[i] == pytest.approx(min(a, b), rel=1e-10, abs=1e-15)


def test_corner_distance_monotone_on_each_side():
    mesh = build_mesh(builtin_square(), 8, 8, 16)
    for corner in range(4):
        for side in (-1, 1):
            idx = mesh.corner_nodes(corner, side)
            t = mesh.param[idx]
            order = np.argsort(t)
            s = mesh.s_corner[idx][order]
            d = np.diff(s)
            assert np.all(d > 0) or np.all(d < 0)


def test_mesh_table_columns():
    mesh = build_mesh(builtin_disk(), 4, 0, 8)
    tab = mesh_table(mesh)
    assert tab.shape == (mesh.n, len(MESH_COLUMNS))
    assert MESH_COLUMNS == ("panel", "x", "y", "nx", "ny", "kappa", "weight", "jac", "s_corner")


def test_build_mesh_rejects_bad_parameters():
    spec = builtin_disk()
    for kw in ({"panels_per_piece": 1}, {"gauss_order": 3}, {"gauss_order": 33},
               {"grading_levels": -1}):
        with pytest.raises(ConfigError):
            build_mesh(spec, **kw)


def test_user_curve_from_expressions(tmp_path):
    cfg = {"pieces": [{"x_expr": "0.2*cos(2*pi*t)", "y_expr": "0.1*sin(2*pi*t)"}], "scale": 1.0}
    path = tmp_path / "ellipse.json"
    path.write_text(json.dumps(cfg))
    spec = load_curve(str(path))
    assert spec.corners == ()
    assert spec.signed_area() == pytest.approx(PI * 0.02, rel=1e-10)


def test_user_polyline_detects_corners():
    cfg = {"pieces": [{"polyline": [[0, 0], [1, 0], [0, 1], [0, 0]]}]}
    spec = curve_from_config(cfg)
    angles = sorted(a for _, a in spec.corners)
    assert angles == pytest.approx([PI / 4, PI / 4, PI / 2])


def test_user_curve_rejects_unknown_keys_and_open_curves():
    with pytest.raises(ConfigError):
        curve_from_config({"pieces": [{"polyline": [[0, 0], [1, 0], [0, 1], [0, 0]]}], "colour": 1})
    with pytest.raises(ConfigError):
        curve_from_config({"pieces": [{"polyline": [[0, 0], [1, 0], [0, 1]]}]})


def test_clockwise_curve_rejected():
    with pytest.raises(ConfigError):
        curve_from_config({"pieces": [{"polyline": [[0, 0], [0, 1], [1, 0], [0, 0]]}]})
