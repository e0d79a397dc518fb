import math

import numpy as np
import pytest

from deltasurf.errors import ConjugatePoint, InjectivityViolation
from deltasurf.geometry import (
    build_geometry,
    build_layer,
    ellipticity_report,
    gaussian_bump,
    general_graph,
    hyperboloid,
    meridian_length,
    paraboloid,
    plane,
    planarity_report,
    solve_jacobi,
)

from oracles import bump_curvatures


@pytest.fixture(scope="module")
def bump_grid():
    return build_geometry(gaussian_bump(), 10.0, 0.1)


def test_bump_radial_curvatures_match_profile_formulas():
    r = np.linspace(0.0, 4.0, 81)
    kr, kt = gaussian_bump().radial_curvatures(r)
    okr, okt = bump_curvatures(r)
    np.testing.assert_allclose(kr, okr, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(kt, okt, rtol=1e-13, atol=1e-15)


def test_bump_grid_curvatures_agree_with_radial_formulas(bump_grid):
    g = bump_grid
    r = np.hypot(g.s1, g.s2)
    kr, kt = bump_curvatures(r)
    np.testing.assert_allclose(g.K, kr * kt, atol=1e-12)
    np.testing.assert_allclose(g.M, 0.5 * (kr + kt), atol=1e-12)


def test_bump_apex_values(bump_grid):
    # upward normal: f'' = -1 at the apex, both principal curvatures -1
    g = bump_grid
    i = np.argmin(np.hypot(g.s1, g.s2))
    assert g.K.ravel()[i] == pytest.approx(1.0, abs=1e-14)
    assert g.M.ravel()[i] == pytest.approx(-1.0, abs=1e-14)
    assert g.rho == pytest.approx(1.0, abs=1e-12)


def test_paraboloid_apex_curvature():
    g = build_geometry(paraboloid(2.0), 20.0, 0.5)
    i = np.argmin(np.hypot(g.s1, g.s2))
    assert g.K.ravel()[i] == pytest.approx(0.25)
    assert g.M.ravel()[i] == pytest.approx(0.5)


def test_hyperboloid_has_positive_gauss_curvature():
    g = build_geometry(hyperboloid(1.0), 10.0, 0.25)
    assert g.K.min() > 0


def test_plane_is_flat():
    g = build_geometry(plane(), 10.0, 0.5)
    assert np.all(g.K == 0) and np.all(g.M == 0)
    assert math.isinf(g.rho)


def test_general_graph_finite_differences_match_analytic():
    f = lambda s1, s2: np.exp(-(s1**2 + s2**2) / 2)
    gg = build_geometry(general_graph(f), 10.0, 0.2)
    gb = build_geometry(gaussian_bump(), 10.0, 0.2)
    np.testing.assert_allclose(gg.K, gb.K, atol=1e-7)
    np.testing.assert_allclose(gg.M, gb.M, atol=1e-7)


def test_truncation_guard():
    with pytest.raises(ValueError):
        build_geometry(gaussian_bump(), 5.0, 0.1)
    build_geometry(gaussian_bump(), 5.0, 0.1, scale_guard=None)


def test_ellipticity_of_bump(bump_grid):
    # metric eigenvalues are 1 and 1 + |grad f|^2; max of r^2 exp(-r^2) is 1/e
    rep = ellipticity_report(bump_grid)
    assert rep.c_minus == pytest.approx(1.0, abs=1e-14)
    assert rep.c_plus == pytest.approx(1.0 + math.exp(-1.0), abs=2e-3)


def test_bump_total_gauss_curvature_vanishes(bump_grid):
    # the bump is asymptotically flat with a horizontal tangent plane at infinity
    assert abs(ellipticity_report(bump_grid).total_gauss) < 1e-3


def test_planarity_far_from_bump(bump_grid):
    rep = planarity_report(bump_grid)
    assert rep["sup_K"] < 1e-10 and rep["sup_normal_tilt"] < 1e-10


def test_plane_layer_is_trivial():
    g = build_geometry(plane(), 10.0, 0.5)
    lay = build_layer(g, 0.5)
    assert np.all(lay.xi == 1.0)
    assert np.all(lay.V1 == 0.0) and np.all(lay.V2 == 0.0)
    assert lay.C_plus == lay.C_minus == 1.0


def test_layer_bounds_hold_on_bump(bump_grid):
    lay = build_layer(bump_grid, 0.3)
    assert all(lay.bound_checks().values())
    assert lay.C_plus == pytest.approx(1.69)
    assert lay.C_minus == pytest.approx(0.49)


def test_layer_rejects_large_width(bump_grid):
    with pytest.raises(InjectivityViolation):
        build_layer(bump_grid, 1.0)


def test_jacobi_plane_and_sphere():
    prof = solve_jacobi(plane(), 5.0, 0.01)
    np.testing.assert_allclose(prof.rho, prof.R, atol=1e-14)
    sph = solve_jacobi(None, 3.0, 1e-3, gauss_curvature=lambda R: 1.0)
    np.testing.assert_allclose(sph.rho, np.sin(sph.R), atol=1e-12)
    with pytest.raises(ConjugatePoint):
        solve_jacobi(None, 3.3, 1e-3, gauss_curvature=lambda R: 1.0)


def test_meridian_length_of_paraboloid():
    r = 3.0
    exact = 0.5 * (r * math.sqrt(1 + r * r) + math.asinh(r))
    assert meridian_length(paraboloid(1.0), r) == pytest.approx(exact, rel=1e-13)


def test_geometry_csv_header(tmp_path, bump_grid):
    from deltasurf.io import read_csv

    bump_grid.to_csv(tmp_path / "g.csv")
    table, cols = read_csv(tmp_path / "g.csv")
    assert table == "geometry"
    assert list(cols) == ["s1", "s2", "g11", "g12", "g22", "k1", "k2", "K", "M"]


def test_jacobi_negative_curvature_grows_faster_than_flat():
    # K(R) = -(1 + R^2)^(-3/2) is integrable against R dR, so rho / R tends to a constant above 1
    from scipy.integrate import solve_ivp

    K = lambda R: -((1 + R * R) ** -1.5)  # noqa: E731
    prof = solve_jacobi(None, 40.0, 1e-2, gauss_curvature=K)
    ref = solve_ivp(lambda t, y: [y[1], -K(t) * y[0]], (0, 40.0), [0.0, 1.0], rtol=1e-12, atol=1e-14, dense_output=True)
    np.testing.assert_allclose(prof.rho[1:], ref.sol(prof.R[1:])[0], rtol=1e-8)
    # rho' increases towards its limit, and the limit is reached to a few percent
    slope = prof.rho_dot
    assert np.all(np.diff(slope) >= 0)
    assert prof.rho[-1] / prof.R[-1] > 1.0
    assert slope[-1] - slope[2000] < 0.05 * (slope[-1] - 1.0)
