"""Squeezed potentials ``V_d(x) = -(1/d) W(u/d)`` in the layer around a radial surface.

The m = 0 sector of ``-Delta + V_d`` is discretized in layer coordinates
(R, u), R the geodesic radius and u the normal distance.  The volume element
is ``rho xi dR du dtheta`` with ``xi = (1 - u k_R)(1 - u k_theta)``, and the
metric is diagonal, so the energy of an m = 0 function is

    int [ psi_R^2 / (1 - u k_R)^2 + psi_u^2 + V_d psi^2 ] rho xi dR du.

Vertex-centred finite volumes on a tensor lattice turn this into a symmetric
generalized eigenproblem; Dirichlet data close the box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from .errors import DeltaSurfError, InjectivityViolation
from .geometry import SurfaceModel
from .surface_operator import SpectralResult, SymmetricOperator, _RadialData, solve_eigen

__all__ = [
    "Profile",
    "square_profile",
    "triangle_profile",
    "SqueezeProblem",
    "solve_squeezed",
    "square_well_eigenvalue",
    "triangle_well_eigenvalue",
    "well_eigenvalue",
    "SqueezeRecord",
    "squeeze_sweep",
]


@dataclass(frozen=True)
class Profile:
    """Bounded profile W on (-1, 1) with its antiderivative (for exact cell averages)."""

    name: str
    W: Callable[[np.ndarray], np.ndarray]
    primitive: Callable[[np.ndarray], np.ndarray]

    @property
    def alpha(self) -> float:
        return float(self.primitive(np.array(1.0)) - self.primitive(np.array(-1.0)))


def square_profile(alpha: float) -> Profile:
    """``W = alpha / 2`` on (-1, 1)."""
    w0 = alpha / 2.0

    def W(t):
        t = np.asarray(t, dtype=float)
        return np.where(np.abs(t) < 1.0, w0, 0.0)

    def F(t):
        return w0 * np.clip(np.asarray(t, dtype=float), -1.0, 1.0)

    return Profile("square", W, F)


def triangle_profile(alpha: float) -> Profile:
    """``W = alpha (1 - |t|)`` on (-1, 1)."""

    def W(t):
        t = np.asarray(t, dtype=float)
        return alpha * np.clip(1.0 - np.abs(t), 0.0, None)

    def F(t):
        t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
        return alpha * (t - np.sign(t) * t * t / 2.0)

    return Profile("triangle", W, F)


@dataclass(frozen=True)
class SqueezeProblem:
    """A profile, a half-width d and the discretization of the (R, u) box.

    ``support_radius`` limits the potential to graph radius ``<= support_radius``
    (None means everywhere); ``r_max`` is the geodesic radius of the Dirichlet
    wall.  ``d_box`` defaults to ``0.9 rho``, or ``d + 40 / alpha`` for a flat
    surface; the bound state decays like ``exp(-alpha |u| / 2)``, so the
    wall then costs ``O(e^-20)``.
    """

    profile: Profile
    d: float
    r_max: float
    dR: float = 0.02
    n_well: int = 32
    d_box: float | None = None
    support_radius: float | None = None
    grade: float = 1.15

    @property
    def alpha(self) -> float:
        return self.profile.alpha

    def box(self, rho: float) -> float:
        if self.d_box is not None:
            return self.d_box
        return 0.9 * rho if math.isfinite(rho) else self.d + 40.0 / self.alpha


def _u_nodes(d: float, d_box: float, n_well: int, grade: float, refine: int = 1) -> np.ndarray:
    """Nodes of a smooth map u(eta) sampled with step 1/refine.

    ``u = d eta / n_well`` on the well, continued C^1 by
    ``u = d + c (exp(b (eta - n_well)) - 1)`` up to ``d_box``.  The rate b is
    fitted so that the box edge falls on an integer eta with growth close to
    ``grade`` per step.  Refinement samples the same map, so Richardson
    extrapolation sees a consistent second-order family.
    """
    h = d / n_well
    if d_box <= d:
        half = np.linspace(0.0, d, n_well * refine + 1)
    else:
        b0 = math.log(grade)
        m = max(1, int(math.ceil(math.log1p((d_box - d) * b0 / h) / b0)))
        f = lambda b: d + h / b * math.expm1(b * m) - d_box  # noqa: E731
        b = b0 if f(1e-12) >= 0 else brentq(f, 1e-12, b0)
        eta = np.arange(1, m * refine + 1) / refine
        outer = d + h / b * np.expm1(b * eta)
        outer[-1] = d_box
        half = np.concatenate([np.linspace(0.0, d, n_well * refine + 1), outer])
    return np.concatenate([-half[::-1], half[1:]])


def _dual(x: np.ndarray):
    """Dual-cell bounds of each node (boundary cells are half cells)."""
    mid = 0.5 * (x[1:] + x[:-1])
    lo = np.concatenate([[x[0]], mid])
    hi = np.concatenate([mid, [x[-1]]])
    return lo, hi


def _assemble(model: SurfaceModel, prob: SqueezeProblem, rho_inj: float, refine: int, with_potential=True):
    d_box = prob.box(rho_inj)
    if d_box >= rho_inj:
        raise InjectivityViolation(f"d_box = {d_box} is not below the injectivity scale {rho_inj}")
    if prob.d > d_box:
        raise ValueError("potential support must fit inside the box")
    data = _RadialData(model, prob.r_max, None, 2e-3)
    nR = max(2, int(round(prob.r_max / prob.dR))) * refine
    R = np.linspace(0.0, prob.r_max, nR + 1)
    u = _u_nodes(prob.d, d_box, prob.n_well, prob.grade, refine)
    Rh = 0.5 * (R[1:] + R[:-1])
    uh = 0.5 * (u[1:] + u[:-1])
    Rlo, Rhi = _dual(R)
    ulo, uhi = _dual(u)
    lenR = Rhi - Rlo
    lenu = uhi - ulo

    def curv(Rv):
        kr, kt = model.radial_curvatures(data.r_graph(Rv))
        return kr, kt

    # R-edges at (Rh_i, u_k)
    kr_h, kt_h = curv(Rh)
    rho_h = data.rho(Rh)
    Uk = u[None, :]
    xi_Rh = (1 - Uk * kr_h[:, None]) * (1 - Uk * kt_h[:, None])
    cR = rho_h[:, None] * xi_Rh / (1 - Uk * kr_h[:, None]) ** 2 * lenu[None, :] / np.diff(R)[:, None]
    # u-edges at (R_i, uh_k)
    kr_n, kt_n = curv(R)
    rho_n = data.rho(R)
    rho_n[0] = 0.0
    # the origin row uses the dual-cell average of rho instead of rho(0) = 0
    rho_cell = rho_n.copy()
    rho_cell[0] = data.rho(0.25 * (R[1] - R[0]))
    rho_cell[1:] = rho_n[1:]
    Uh = uh[None, :]
    xi_uh = (1 - Uh * kr_n[:, None]) * (1 - Uh * kt_n[:, None])
    cU = rho_cell[:, None] * xi_uh * lenR[:, None] / np.diff(u)[None, :]
    xi_n = (1 - Uk * kr_n[:, None]) * (1 - Uk * kt_n[:, None])
    if np.any(xi_n <= 0) or np.any(xi_Rh <= 0) or np.any(xi_uh <= 0):
        raise InjectivityViolation("xi <= 0 inside the box")
    mass = rho_cell[:, None] * xi_n * lenR[:, None] * lenu[None, :]
    nr, nu = R.size, u.size
    idx = np.arange(nr * nu).reshape(nr, nu)
    rows, cols, vals = [], [], []
    diag = np.zeros((nr, nu))

    def add_edges(a, b, c):
        rows.extend([a, b])
        cols.extend([b, a])
        vals.extend([-c, -c])
        np.add.at(diag, np.unravel_index(a, diag.shape), c)
        np.add.at(diag, np.unravel_index(b, diag.shape), c)

    add_edges(idx[:-1, :].ravel(), idx[1:, :].ravel(), cR.ravel())
    add_edges(idx[:, :-1].ravel(), idx[:, 1:].ravel(), cU.ravel())
    # potential: exact dual-cell average of V_d in u, support cut in graph radius
    Vcell = np.zeros(nu)
    if with_potential:
        F = prob.profile.primitive
        Vcell = -(F(uhi / prob.d) - F(ulo / prob.d)) / lenu
    pot = mass * Vcell[None, :]
    if prob.support_radius is not None:
        pot[data.r_graph(R) > prob.support_radius, :] = 0.0
    A = sp.coo_matrix(
        (np.concatenate(vals + [diag.ravel()]), (np.concatenate(rows + [idx.ravel()]), np.concatenate(cols + [idx.ravel()]))),
        shape=(nr * nu, nr * nu),
    ).tocsr()
    keep = np.ones((nr, nu), dtype=bool)
    keep[-1, :] = False  # wall at r_max
    keep[:, 0] = keep[:, -1] = False  # walls at +-d_box
    k = np.flatnonzero(keep.ravel())
    return SymmetricOperator(
        stiffness=A[k][:, k].tocsr(),
        potential=pot.ravel()[k],
        mass=mass.ravel()[k],
        interior=k,
        meta={"d": prob.d, "d_box": d_box, "nR": nr, "nu": nu, "r_max": prob.r_max},
    )


def solve_squeezed(
    model: SurfaceModel,
    prob: SqueezeProblem,
    j_max: int = 1,
    rho_inj: float | None = None,
    richardson: bool = True,
    seed: int = 0,
) -> SpectralResult:
    """Lowest eigenvalues of the m = 0 sector of ``-Delta + V_d``.

    ``rho_inj`` is the injectivity scale of the surface (defaults to the
    inverse of the largest principal curvature along the meridian).  With
    ``richardson`` the lattice is refined once by a factor 2 in both
    directions and the second-order extrapolation is returned; the
    ``residuals`` field then holds the extrapolation correction as an error
    estimate.
    """
    if not model.is_radial:
        raise DeltaSurfError("solve_squeezed needs a radially symmetric surface")
    if rho_inj is None:
        rho_inj = _meridian_rho(model, prob.r_max)
    if prob.d >= rho_inj:
        raise InjectivityViolation(f"d = {prob.d} is not below {rho_inj}")
    op = _assemble(model, prob, rho_inj, 1)
    coarse = solve_eigen(op, j_max, seed=seed)
    if not richardson:
        return coarse
    fine_op = _assemble(model, prob, rho_inj, 2)
    fine = solve_eigen(fine_op, j_max, seed=seed)
    ext = (4 * fine.eigenvalues - coarse.eigenvalues) / 3
    return SpectralResult(
        eigenvalues=ext,
        residuals=np.abs(ext - fine.eigenvalues),
        converged=fine.converged & coarse.converged,
        count=j_max,
        meta=dict(fine.meta, alpha=prob.alpha, profile=prob.profile.name, richardson=True),
    )


def _meridian_rho(model: SurfaceModel, r_max: float) -> float:
    r = np.linspace(0.0, r_max, 20001)
    kr, kt = model.radial_curvatures(r)
    k = float(np.max(np.maximum(np.abs(kr), np.abs(kt))))
    return math.inf if k == 0 else 1.0 / k


def square_well_eigenvalue(alpha: float, d: float, d_box: float = math.inf) -> float:
    """Ground state of ``-psi'' - alpha/(2d) 1_{|u|<d} psi`` with Dirichlet walls at +-d_box.

    Inside ``cos(q u)``, outside ``sinh(k (d_box - |u|))`` (``exp(-k|u|)`` for
    an open line); matching gives ``q tan(q d) = k coth(k (d_box - d))``.
    """
    V0 = alpha / (2.0 * d)

    def g(qd):
        q = qd / d
        k2 = V0 - q * q
        if k2 <= 0:
            return np.inf
        k = math.sqrt(k2)
        rhs = k if math.isinf(d_box) else k / math.tanh(k * (d_box - d))
        return q * math.tan(qd) - rhs

    top = min(math.pi / 2, math.sqrt(V0) * d) * (1 - 1e-15)
    qd = brentq(g, 1e-14, top, xtol=1e-16, rtol=1e-15)
    return -(V0 - (qd / d) ** 2)


def triangle_well_eigenvalue(alpha: float, d: float) -> float:
    """Ground state of ``-psi'' - (alpha/d)(1 - |u|/d)_+ psi`` on the line.

    On (0, d) the equation is ``psi'' = (alpha/d^2)(u - u0) psi`` with
    ``u0 = d + E d^2 / alpha``, solved by Airy functions of
    ``z = beta (u - u0)``, ``beta = (alpha/d^2)^(1/3)``.  The even solution
    has ``psi'(0) = 0`` and is matched to ``exp(-k (u - d))``, ``k^2 = -E``.
    The lowest root is located by scanning ``E`` in ``(-alpha/d, 0)``.
    """
    from scipy.special import airy

    beta = (alpha / d**2) ** (1.0 / 3.0)

    def f(E):
        u0 = d + E * d * d / alpha
        _, aip0, _, bip0 = airy(-beta * u0)
        ai1, aip1, bi1, bip1 = airy(beta * (d - u0))
        A, B = bip0, -aip0
        val = A * ai1 + B * bi1
        der = beta * (A * aip1 + B * bip1)
        k = math.sqrt(-E)
        # normalise by the scale of the pair to stay O(1)
        return (der + k * val) / (abs(der) + k * abs(val))

    Es = np.linspace(-alpha / d, 0.0, 4001)[1:-1]
    vals = np.array([f(E) for E in Es])
    idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if idx.size == 0:
        raise DeltaSurfError("no bound state found for the triangle well")
    i = idx[0]
    return brentq(f, Es[i], Es[i + 1], xtol=1e-300, rtol=1e-15)


def well_eigenvalue(profile: Profile, d: float) -> float:
    """Ground state of the flat one-dimensional well ``-(1/d) W(u/d)`` for the built-in profiles."""
    if profile.name == "square":
        return square_well_eigenvalue(profile.alpha, d)
    if profile.name == "triangle":
        return triangle_well_eigenvalue(profile.alpha, d)
    raise DeltaSurfError(f"no closed-form well for profile {profile.name!r}")


@dataclass(frozen=True)
class SqueezeRecord:
    d: float
    alpha: float
    profile: str
    eigenvalue: float
    error: float
    reference: float | None

    @property
    def gap(self) -> float | None:
        return None if self.reference is None else abs(self.eigenvalue - self.reference)


def squeeze_sweep(
    model: SurfaceModel,
    profiles,
    ds,
    r_max: float,
    reference: float | None = None,
    **kw,
) -> list[SqueezeRecord]:
    out = []
    for prof in profiles:
        for d in ds:
            res = solve_squeezed(model, SqueezeProblem(prof, d, r_max, **kw))
            out.append(SqueezeRecord(d, prof.alpha, prof.name, float(res.eigenvalues[0]), float(res.residuals[0]), reference))
    return out


def sweep_to_csv(records, path) -> None:
    from .io import write_csv

    write_csv(
        path,
        "squeeze",
        {
            "d": [r.d for r in records],
            "alpha": [r.alpha for r in records],
            "profile": [r.profile for r in records],
            "lambda1": [r.eigenvalue for r in records],
            "reference": [r.reference for r in records],
            "gap": [r.gap for r in records],
        },
    )
