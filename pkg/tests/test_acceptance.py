"""End-to-end acceptance criteria.

Each test records one pass/fail line through the ``acceptance`` fixture; the
summary is printed at the end of the pytest run.  Tolerances are the ones
the criteria state; nothing is relaxed to make a test pass.
"""

import math

import numpy as np
import pytest

from deltasurf.birman_schwinger import find_eigenvalues, find_eigenvalues_radial
from deltasurf.bracketing import asymptotic_residuals, geometric_sweep, sandwich
from deltasurf.geometry import (
    build_geometry,
    build_layer,
    gaussian_bump,
    general_graph,
    hyperboloid,
    paraboloid,
    plane,
)
from deltasurf.squeezed import SqueezeProblem, solve_squeezed, square_profile, triangle_profile, well_eigenvalue
from deltasurf.surface_operator import (
    assemble_S,
    assemble_U,
    radial_reduce_solve,
    solve_eigen,
    variational_bound,
    zero_energy_certificate,
)
from deltasurf.transverse import (
    TransverseProblem,
    fd_richardson,
    fit_CN,
    kappa_minus,
    kappa_plus,
    threshold_gap,
)

from oracles import box_eigenvalue

pytestmark = pytest.mark.acceptance

BUMP = gaussian_bump(1.0, 1.0)
DISC = 6.0  # support radius of the truncated interaction on the bump


def _window(alpha, width=5.0):
    return math.sqrt(alpha * alpha / 4 - width)


def _elliptic_bump():
    def f(x, y):
        return 0.5 * np.exp(-(x * x) / 2 - y * y)

    def grad(x, y):
        e = f(x, y)
        return -x * e, -2 * y * e

    def hess(x, y):
        e = f(x, y)
        return (x * x - 1) * e, 2 * x * y * e, (4 * y * y - 2) * e

    return general_graph(f, grad, hess, 1.0, "elliptic")


def test_criterion_1_curvature_identity(acceptance):
    surfaces = {
        "plane": plane(),
        "gaussian": BUMP,
        "paraboloid": paraboloid(1.0),
        "hyperboloid": hyperboloid(1.0),
        "graph": _elliptic_bump(),
    }
    worst = 0.0
    for model in surfaces.values():
        g = build_geometry(model, 12.0 * model.length_scale, 0.05 * model.length_scale)
        lhs = g.K - g.M**2
        rhs = -0.25 * (g.k1 - g.k2) ** 2
        scale = np.maximum(np.abs(g.K) + g.M**2, np.finfo(float).tiny)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / scale)))
    ok = worst <= 1e-12
    acceptance(1, ok, f"max relative defect {worst:.2e} over {len(surfaces)} surfaces (tol 1e-12)")
    assert ok


def test_criterion_2_plane_sanity(acceptance):
    g = build_geometry(plane(), 4.0, 0.1, scale_guard=None)
    lay = build_layer(g, 0.5)
    fields_ok = bool(np.all(lay.xi == 1.0) and np.all(lay.V1 == 0.0) and np.all(lay.V2 == 0.0))
    below, crossings = [], []
    for a in (10.0, 50.0):
        # default search interval starts at alpha/2 (1 + 2%)
        if find_eigenvalues(g, a)[0].present or find_eigenvalues_radial(plane(), a, DISC)[0].present:
            below.append(a)
        for res in (find_eigenvalues(g, a, kappa_min=a / 4)[0], find_eigenvalues_radial(plane(), a, DISC, kappa_min=a / 4)[0]):
            crossings.append(abs(res.kappa - a / 2) / (a / 2) if res.present else math.inf)
    ok = fields_ok and not below and max(crossings) <= 0.02
    acceptance(
        2, ok,
        f"fields trivial {fields_ok}; eigenvalues below -1.02 alpha^2/4 at {below or 'none'}; "
        f"max |kappa - alpha/2| / (alpha/2) = {max(crossings):.2e} (tol 2e-2)",
    )
    assert ok


def test_criterion_3_transverse_windows(acceptance):
    alphas = (20.0, 40.0, 80.0, 160.0, 320.0)
    ds = (0.4, 0.5, 0.6, 0.8, 1.0)
    pts = [(a, d, 2.0 * (1.0 + d)) for a in alphas for d in ds if a * d >= 8]
    windows_ok = True
    fd_err = 0.0
    for a, d, D in pts:
        pp = TransverseProblem(a, d)
        pm = TransverseProblem(a, d, D, "robin_minus")
        # gaps far below an ulp of alpha^2 are only visible in the cancellation-free form
        scale = a * a * math.exp(-a * d / 2)
        windows_ok &= 0 < threshold_gap(pp) < 2 * scale
        windows_ok &= threshold_gap(pm) > 0
        for p, closed in ((pp, kappa_plus(pp)), (pm, kappa_minus(pm))):
            fd_err = max(fd_err, abs(fd_richardson(p)[0] - closed) / abs(closed))
    C_N = fit_CN(pts)
    gap_ok = all(
        threshold_gap(TransverseProblem(a, d, D, "robin_minus")) <= C_N * a * a * math.exp(-a * d / 2) for a, d, D in pts
    )
    ok = windows_ok and gap_ok and fd_err <= 1e-8 and math.isfinite(C_N)
    acceptance(
        3, ok,
        f"{len(pts)} points; windows {windows_ok}; fitted C_N = {C_N:.4g}; "
        f"max closed-form vs FD relative error {fd_err:.2e} (tol 1e-8)",
    )
    assert ok


def test_criterion_4_comparison_operator(acceptance):
    # mu_1 is exponentially small; the eigenfunction spreads over hundreds of
    # length scales, so both solvers use graded meshes out to radius 3000
    cert = zero_energy_certificate(BUMP)
    rad = radial_reduce_solve(BUMP, 0, 3000.0, 0.01, per_sector=1, stretch=2.0)
    vals = {}
    for ds in (0.1, 0.07):
        g = build_geometry(BUMP, 3000.0, ds, stretch=2.0)
        vals[ds] = solve_eigen(assemble_S(g), 1).eigenvalues[0]
    q = (0.1 / 0.07) ** 2
    mu2d = (q * vals[0.07] - vals[0.1]) / (q - 1)
    mu_rad = rad.eigenvalues[0]
    rel = abs(mu2d - mu_rad) / abs(mu_rad)
    L = 5.0
    box = solve_eigen(assemble_S(build_geometry(plane(), L, 0.05, scale_guard=None)), 1).eigenvalues[0]
    box_err = abs(box - box_eigenvalue(L)) / box_eigenvalue(L)
    ok = mu2d < 0 and mu_rad < 0 and cert.certifies_negative and rel <= 1e-3 and box_err <= 5e-3
    acceptance(
        4, ok,
        f"mu_1 2D = {mu2d:.6e}, radial = {mu_rad:.6e} (rel {rel:.2e}, tol 1e-3); zero-energy node at R = "
        f"{cert.first_zero:.4g}; box error {box_err:.2e} (tol 5e-3)",
    )
    assert ok


def test_criterion_5_layer_slope(acceptance):
    g = build_geometry(BUMP, 6.0, 0.05, scale_guard=None)
    mu = solve_eigen(assemble_S(g), 1).eigenvalues[0]
    slopes = {+1: [], -1: []}
    for d in (g.rho / 20, g.rho / 40):
        lay = build_layer(g, d)
        for s in (+1, -1):
            # the same Dirichlet domain for both signs isolates the d dependence
            m = solve_eigen(assemble_U(g, d, s, layer=lay, boundary="dirichlet"), 1).eigenvalues[0]
            slopes[s].append((m - mu) / d)
    drift = {s: abs(v[1] - v[0]) / abs(v[1]) for s, v in slopes.items()}
    ok = max(drift.values()) <= 0.10
    acceptance(
        5, ok,
        f"slopes + {slopes[1][0]:.4g} -> {slopes[1][1]:.4g} ({drift[1]:.1%}), "
        f"- {slopes[-1][0]:.4g} -> {slopes[-1][1]:.4g} ({drift[-1]:.1%}), tol 10%",
    )
    assert ok


def _disc_report(alphas):
    g = build_geometry(BUMP, DISC, 0.05, scale_guard=None)
    rep = sandwich(g, alphas, disc_radius=DISC)
    for a in alphas:
        e = find_eigenvalues_radial(BUMP, a, DISC, kappa_min=_window(a), estimate_error=True)[0]
        rep.attach_direct(a, [e.eigenvalue], e.error)
    return rep


def test_criterion_6_sandwich_inclusion(acceptance):
    rep = _disc_report([40.0, 60.0, 100.0])
    inside = rep.inclusion()
    parts = [
        f"alpha {r.alpha:g}: {r.lower + r.alpha**2 / 4:.4g} <= {r.direct + r.alpha**2 / 4:.6g} <= {r.upper + r.alpha**2 / 4:.4g}"
        for r in rep.rows
    ]
    ok = len(inside) == 3 and all(inside.values())
    acceptance(6, ok, "shifted by alpha^2/4: " + "; ".join(parts))
    assert ok


def test_criterion_7_asymptotics(acceptance):
    alphas = geometric_sweep(25.0, 200.0, 8)
    fit = asymptotic_residuals(_disc_report(alphas))[1]
    slope_ok = abs(fit.width_slope + 1.0) <= 0.15
    ok = fit.bounded and slope_ok
    acceptance(
        7, ok,
        f"scaled residual {fit.scaled[0]:.4g} -> {fit.scaled[-1]:.4g} (bounded {fit.bounded}); "
        f"width slope {fit.width_slope:.3f} (target -1 +- 0.15)",
    )
    assert ok


def test_criterion_8_squeezed_convergence(acceptance):
    alpha = 60.0
    ref = find_eigenvalues_radial(BUMP, alpha, DISC, kappa_min=_window(alpha), estimate_error=True)[0]
    ds = (0.00625, 0.003125, 0.0015625)
    limits, details, ok = {}, [], True
    for make in (square_profile, triangle_profile):
        prof = make(alpha)
        gaps, last = [], None
        for d in ds:
            res = solve_squeezed(BUMP, SqueezeProblem(prof, d, 7.0, support_radius=DISC))
            lam, err = float(res.eigenvalues[0]), float(res.residuals[0])
            gaps.append(abs(lam - ref.eigenvalue))
            last = (lam, err, d)
        rates = [math.log2(g0 / g1) for g0, g1 in zip(gaps, gaps[1:])]
        mono = all(g1 < g0 for g0, g1 in zip(gaps, gaps[1:]))
        ok &= mono and min(rates) >= 0.8
        # the exact flat well removes the leading d dependence; what remains
        # tends to the curved contribution lambda + alpha^2/4
        lam, err, d = last
        limits[prof.name] = (lam - well_eigenvalue(prof, d), err)
        details.append(f"{prof.name} rates {', '.join(f'{r:.3f}' for r in rates)}")
    (cs, es), (ct, et) = limits["square"], limits["triangle"]
    same = abs(cs - ct) <= es + et + ref.error
    ok &= same
    acceptance(
        8, ok,
        "; ".join(details) + f" (min 0.8); limits {cs:.5f} vs {ct:.5f}, "
        f"|diff| {abs(cs - ct):.2e} <= {es + et + ref.error:.2e}: {same}",
    )
    assert ok


def test_criterion_9_variational_certificate(acceptance):
    alpha = 50.0
    sigmas = (0.003, 0.01, 0.03, 0.1, 0.3)
    r0s = (0.25, 0.5, 1.0, 2.0)
    best = {}
    for name, model in (("bump", BUMP), ("plane", plane())):
        g = build_geometry(model, 8.0, 0.05, scale_guard=None)
        for form in ("separated", "layer"):
            vals = [variational_bound(g, alpha, s, r, form=form) for s in sigmas for r in r0s]
            best[name, form] = min(v.form_value / v.norm_sq for v in vals)
    ok = best["bump", "separated"] < 0 and best["plane", "separated"] >= 0
    acceptance(
        9, ok,
        f"separated form: bump {best['bump', 'separated']:+.4g}, plane {best['plane', 'separated']:+.4g}; "
        f"layer-averaged form: bump {best['bump', 'layer']:+.3e}, plane {best['plane', 'layer']:+.3e}",
    )
    assert ok
