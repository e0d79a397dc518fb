import math

import numpy as np
import pytest

from deltasurf.geometry import build_geometry, build_layer, gaussian_bump, plane
from deltasurf.surface_operator import (
    assemble_S,
    assemble_U,
    cluster_eigenvalues,
    radial_reduce_solve,
    solve_eigen,
    variational_bound,
    zero_energy_certificate,
)

from oracles import box_eigenvalue, disc_eigenvalue


def flat(L, ds):
    return build_geometry(plane(), L, ds, scale_guard=None)


def test_dirichlet_square_second_order():
    L = 2.0
    errs = []
    for ds in (0.2, 0.1):
        w = solve_eigen(assemble_S(flat(L, ds)), 3).eigenvalues
        errs.append(abs(w[0] - box_eigenvalue(L)))
        assert w[1] == pytest.approx(w[2], rel=1e-8)
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] < 1e-3 * box_eigenvalue(L)


def test_neumann_square_has_constant_mode():
    w = solve_eigen(assemble_S(flat(2.0, 0.1), boundary="neumann"), 2).eigenvalues
    assert abs(w[0]) < 1e-10
    assert w[1] == pytest.approx(box_eigenvalue(2.0, 1, 0), rel=2e-3)


def test_stiffness_is_symmetric_psd_on_bump():
    g = build_geometry(gaussian_bump(), 2.0, 0.25, scale_guard=None)
    op = assemble_S(g, with_potential=False)
    A = op.stiffness.toarray()
    np.testing.assert_allclose(A, A.T, atol=1e-14)
    assert np.linalg.eigvalsh(A).min() > -1e-12
    assert np.all(op.mass > 0)


def test_unknown_boundary():
    with pytest.raises(ValueError):
        assemble_S(flat(1.0, 0.25), boundary="robin")


def test_radial_oracle_on_flat_disc():
    rad = radial_reduce_solve(plane(), 2, 3.0, 0.01, per_sector=2)
    assert list(rad.m[:5]) == [0, 1, 1, 2, 2]
    for val, (m, n) in zip(rad.eigenvalues[[0, 1, 3]], [(0, 1), (1, 1), (2, 1)]):
        assert val == pytest.approx(disc_eigenvalue(3.0, m, n), rel=1e-7)


def test_radial_oracle_neumann_disc():
    # first zero of J1' is 1.8411837813406593
    rad = radial_reduce_solve(plane(), 1, 3.0, 0.01, per_sector=2, boundary="neumann")
    assert abs(rad.eigenvalues[0]) < 1e-9
    assert rad.eigenvalues[1] == pytest.approx((1.8411837813406593 / 3.0) ** 2, rel=1e-7)


def test_U_on_plane_is_S_plus_zero_shift():
    g = flat(2.0, 0.2)
    S = solve_eigen(assemble_S(g), 1).eigenvalues[0]
    U = solve_eigen(assemble_U(g, 0.5, +1), 1).eigenvalues[0]
    assert U == pytest.approx(S, rel=1e-12)


def test_U_ordering_on_bump():
    g = build_geometry(gaussian_bump(), 6.0, 0.1, scale_guard=None)
    d = 0.1
    lay = build_layer(g, d)
    mu = solve_eigen(assemble_S(g), 1).eigenvalues[0]
    lo = solve_eigen(assemble_U(g, d, -1, layer=lay), 1).eigenvalues[0]
    hi = solve_eigen(assemble_U(g, d, +1, layer=lay), 1).eigenvalues[0]
    assert lo < mu < hi


def test_U_rejects_mismatched_base():
    g = flat(1.0, 0.25)
    with pytest.raises(ValueError):
        assemble_U(g, 0.1, -1, base=assemble_S(g, boundary="dirichlet"))
    with pytest.raises(ValueError):
        assemble_U(g, 0.1, 2)


def test_cluster_eigenvalues():
    assert cluster_eigenvalues([1.0, 1.0 + 1e-9, 2.0, 3.0, 3.0]) == [[0, 1], [2], [3, 4]]


def test_zero_energy_certificate():
    z = zero_energy_certificate(gaussian_bump())
    assert z.certifies_negative and z.b < 0
    assert z.potential_integral < 0
    assert not zero_energy_certificate(plane()).certifies_negative


def test_variational_plane_not_certified():
    g = flat(8.0, 0.1)
    res = variational_bound(g, 50.0, 0.1, 1.0)
    assert res.form_value > 0
    assert not res.certified
    with pytest.raises(ValueError):
        variational_bound(g, 50.0, 0.1, 1.0, form="other")


def test_spectrum_csv(tmp_path):
    from deltasurf.io import read_csv

    res = solve_eigen(assemble_S(flat(1.0, 0.25)), 2)
    res.to_csv(tmp_path / "s.csv")
    table, cols = read_csv(tmp_path / "s.csv")
    assert table == "spectrum" and cols["j"] == ["1", "2"]
