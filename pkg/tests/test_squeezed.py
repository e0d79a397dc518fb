import math

import numpy as np
import pytest

from deltasurf.errors import DeltaSurfError, InjectivityViolation
from deltasurf.geometry import gaussian_bump, plane
from deltasurf.squeezed import (
    SqueezeProblem,
    solve_squeezed,
    square_profile,
    square_well_eigenvalue,
    triangle_profile,
    triangle_well_eigenvalue,
    well_eigenvalue,
)

from oracles import disc_eigenvalue, fd_well_extrapolated

ALPHA, D = 10.0, 0.1


def square_potential(x):
    # half weight on nodes sitting exactly on the jump keeps the scheme second order
    ind = np.where(np.isclose(np.abs(x), D, rtol=0, atol=1e-12), 0.5, (np.abs(x) < D).astype(float))
    return -ALPHA / (2 * D) * ind


def triangle_potential(x):
    return -ALPHA / D * np.clip(1 - np.abs(x) / D, 0.0, None)


@pytest.mark.parametrize("profile", [square_profile, triangle_profile])
def test_profiles_integrate_to_alpha(profile):
    p = profile(3.5)
    assert p.alpha == pytest.approx(3.5)
    t = np.linspace(-1, 1, 200001)
    w = p.W(t)
    integral = float(np.sum(0.5 * (w[1:] + w[:-1]) * np.diff(t)))
    assert integral == pytest.approx(3.5, rel=1e-4)


@pytest.mark.parametrize("d_box", [0.8, 3.0])
def test_square_well_against_finite_differences(d_box):
    ref = fd_well_extrapolated(square_potential, d_box, D / 200)
    closed = square_well_eigenvalue(ALPHA, D, d_box if d_box < 3 else math.inf)
    # the open line and a wall at 3 differ by far less than the tolerance
    assert closed == pytest.approx(ref, rel=1e-8)


def test_triangle_well_against_finite_differences():
    ref = fd_well_extrapolated(triangle_potential, 3.0, D / 400)
    assert triangle_well_eigenvalue(ALPHA, D) == pytest.approx(ref, rel=1e-8)


def test_well_dispatch():
    assert well_eigenvalue(square_profile(ALPHA), D) == square_well_eigenvalue(ALPHA, D)
    from deltasurf.squeezed import Profile

    with pytest.raises(DeltaSurfError):
        well_eigenvalue(Profile("other", lambda t: t, lambda t: t), D)


def test_wells_approach_delta_limit():
    # both converge to -alpha^2/4 as d -> 0
    for f in (square_well_eigenvalue, triangle_well_eigenvalue):
        gaps = [abs(f(ALPHA, d) + ALPHA**2 / 4) for d in (0.02, 0.01, 0.005)]
        assert gaps[0] > gaps[1] > gaps[2]


def test_squeezed_plane_separates():
    prob = SqueezeProblem(square_profile(ALPHA), D, r_max=3.0, dR=0.05, d_box=0.8)
    res = solve_squeezed(plane(), prob)
    exact = square_well_eigenvalue(ALPHA, D, 0.8) + disc_eigenvalue(3.0)
    assert res.eigenvalues[0] == pytest.approx(exact, abs=1e-4)
    assert res.residuals[0] < 0.05


def test_squeezed_rejects_wide_layer():
    prob = SqueezeProblem(square_profile(ALPHA), 1.2, r_max=3.0)
    with pytest.raises(InjectivityViolation):
        solve_squeezed(gaussian_bump(), prob)
