"""The comparison operator S = -Delta_Gamma + K - M^2 and its layer variants.

Discretization
--------------
The stiffness matrix comes from the energy ``int a^{mu nu} d_mu u d_nu u ds``
with ``a = sqrt(g) g^{-1}`` evaluated at cell centres.  On each lattice cell
the gradient is taken at the four corners from the two adjacent edge
differences and the four corner energies are averaged.  Every corner term is
a positive semidefinite quadratic form, so the assembled matrix is symmetric
PSD by construction; for ``a = I`` it reduces to the five-point Laplacian,
and the checkerboard mode is not in its kernel.  The mass is ``sqrt(g)``
times the dual-cell area (lumped), and the potential is
``(K - M^2) * mass``.  Boundary nodes carry Dirichlet data and are removed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import quad
from scipy.linalg import eigh_tridiagonal
from scipy.special import k0, k1

from .errors import DeltaSurfError, NoConvergence
from .geometry import (
    GeometryGrid,
    LayerFields,
    SurfaceModel,
    build_layer,
    layer_constant,
    solve_jacobi,
)

__all__ = [
    "SymmetricOperator",
    "SpectralResult",
    "assemble_S",
    "assemble_U",
    "solve_eigen",
    "RadialSpectrum",
    "radial_reduce_solve",
    "ZeroEnergyCertificate",
    "zero_energy_certificate",
    "VariationalResult",
    "variational_bound",
    "cluster_eigenvalues",
]


@dataclass
class SymmetricOperator:
    """Generalised problem ``(stiffness + diag(potential) + shift*diag(mass)) x = lam diag(mass) x``.

    Vectors live on the interior nodes listed in ``interior`` (flat indices
    into the geometry lattice).
    """

    stiffness: sp.csr_matrix
    potential: np.ndarray
    mass: np.ndarray
    shift: float = 0.0
    interior: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.mass.size

    def matrix(self) -> sp.csr_matrix:
        return (self.stiffness + sp.diags(self.potential + self.shift * self.mass)).tocsr()

    def with_shift(self, c: float) -> "SymmetricOperator":
        """Same operator plus ``c`` times the identity (in the mass inner product)."""
        return SymmetricOperator(
            self.stiffness, self.potential, self.mass, self.shift + c, self.interior, dict(self.meta)
        )

    def min_potential(self) -> float:
        return float(np.min(self.potential / self.mass)) + self.shift


def _cell_stiffness(a11, a12, a22, hx, hy, shape):
    """Assemble the corner-averaged energy stiffness on the full lattice."""
    nx, ny = shape
    HX = hx[:, None] * np.ones((1, ny - 1))
    HY = np.ones((nx - 1, 1)) * hy[None, :]
    cx = a11 * HY / (2.0 * HX)
    cy = a22 * HX / (2.0 * HY)
    cxy = a12 / 4.0
    # local order: 00, 10, 01, 11
    b = np.array([-1.0, 1.0, 0.0, 0.0])
    t = np.array([0.0, 0.0, -1.0, 1.0])
    l_ = np.array([-1.0, 0.0, 1.0, 0.0])
    r = np.array([0.0, -1.0, 0.0, 1.0])
    sx = np.array([-1.0, 1.0, -1.0, 1.0])
    sy = np.array([-1.0, -1.0, 1.0, 1.0])
    Ex = np.outer(b, b) + np.outer(t, t)
    Ey = np.outer(l_, l_) + np.outer(r, r)
    Exy = np.outer(sx, sy) + np.outer(sy, sx)
    i = np.arange(nx - 1)[:, None]
    j = np.arange(ny - 1)[None, :]
    n00 = (i * ny + j).ravel()
    nodes = [n00, n00 + ny, n00 + 1, n00 + ny + 1]
    cx, cy, cxy = cx.ravel(), cy.ravel(), cxy.ravel()
    rows, cols, vals = [], [], []
    for p in range(4):
        for q in range(4):
            v = cx * Ex[p, q] + cy * Ey[p, q] + cxy * Exy[p, q]
            rows.append(nodes[p])
            cols.append(nodes[q])
            vals.append(v)
    N = nx * ny
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    ).tocsr()
    A.sum_duplicates()
    return A


def _interior(shape):
    nx, ny = shape
    mask = np.zeros(shape, dtype=bool)
    mask[1:-1, 1:-1] = True
    return np.flatnonzero(mask.ravel())


def assemble_S(geom: GeometryGrid, with_potential: bool = True, boundary: str = "dirichlet") -> SymmetricOperator:
    """Discretize S on the truncation square.

    ``boundary="dirichlet"`` removes the edge nodes; ``"neumann"`` keeps
    them, which is the natural boundary condition of the energy form.
    """
    if boundary not in ("dirichlet", "neumann"):
        raise ValueError(f"unknown boundary {boundary!r}")
    a11, a12, a22, hx, hy = geom.cell_coefficients()
    A = _cell_stiffness(a11, a12, a22, hx, hy, geom.shape)
    idx = _interior(geom.shape) if boundary == "dirichlet" else np.arange(geom.shape[0] * geom.shape[1])
    A = A[idx][:, idx].tocsr()
    mass = (geom.sqrtg * geom.dual_areas()).ravel()[idx]
    pot = geom.potential.ravel()[idx] * mass if with_potential else np.zeros_like(mass)
    return SymmetricOperator(
        stiffness=A,
        potential=pot,
        mass=mass,
        interior=idx,
        meta={"L": geom.L, "ds": geom.ds, "uniform": geom.uniform, "n": int(idx.size), "boundary": boundary},
    )


def assemble_U(
    geom: GeometryGrid,
    d: float,
    sign: int,
    layer: LayerFields | None = None,
    Nu: int = 9,
    base: SymmetricOperator | None = None,
    boundary: str | None = None,
) -> SymmetricOperator:
    """Estimating operator ``-C_pm Delta_Gamma + C_pm^{-2} (K - M^2) + v^pm d``.

    The constant shift is read as the product ``v^pm * d`` of the extracted
    bound on V1 and the half-width.  On a truncated domain the upper operator
    takes Dirichlet and the lower one Neumann data, so that both remain
    bounds for the interaction supported on the truncated surface; this is
    the default for ``boundary=None``.  ``base`` may pass a precomputed
    :func:`assemble_S` result with the matching boundary condition.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if boundary is None:
        boundary = "dirichlet" if sign > 0 else "neumann"
    if base is not None and base.meta.get("boundary", "dirichlet") != boundary:
        raise ValueError("base operator has a different boundary condition")
    S = base if base is not None else assemble_S(geom, boundary=boundary)
    if d == 0.0:
        return SymmetricOperator(S.stiffness, S.potential, S.mass, S.shift, S.interior, dict(S.meta))
    if layer is None or layer.d != d:
        layer = build_layer(geom, d, Nu)
    C = layer_constant(d, geom.rho, sign)
    v = layer.v_plus if sign > 0 else layer.v_minus
    meta = dict(S.meta, d=d, sign=sign, C=C, v=v)
    return SymmetricOperator(
        stiffness=(C * S.stiffness).tocsr(),
        potential=S.potential / C**2,
        mass=S.mass,
        shift=S.shift + v * d,
        interior=S.interior,
        meta=meta,
    )


# ---------------------------------------------------------------------------
# Eigensolver
# ---------------------------------------------------------------------------


def cluster_eigenvalues(values, rtol: float = 1e-6) -> list[list[int]]:
    """Group sorted eigenvalues whose relative gap is below ``rtol``."""
    values = np.asarray(values)
    groups: list[list[int]] = []
    for i, v in enumerate(values):
        if groups:
            w = values[groups[-1][-1]]
            if abs(v - w) <= rtol * max(abs(v), abs(w), np.finfo(float).tiny):
                groups[-1].append(i)
                continue
        groups.append([i])
    return groups


@dataclass
class SpectralResult:
    """Lowest eigenvalues with residuals and grid metadata."""

    eigenvalues: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray
    count: int
    meta: dict = field(default_factory=dict)
    vectors: np.ndarray | None = field(default=None, repr=False)
    cluster_rtol: float = 1e-6

    @property
    def clusters(self) -> list[list[int]]:
        return cluster_eigenvalues(self.eigenvalues, self.cluster_rtol)

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))

    def to_csv(self, path) -> None:
        from .io import write_csv

        n = len(self.eigenvalues)
        write_csv(
            path,
            "spectrum",
            {
                "j": list(range(1, n + 1)),
                "mu": list(self.eigenvalues),
                "residual": list(self.residuals),
                "converged": [int(c) for c in self.converged],
                "L": [self.meta.get("L")] * n,
                "ds": [self.meta.get("ds")] * n,
            },
        )


def solve_eigen(
    op: SymmetricOperator,
    count: int = 1,
    seed: int = 0,
    tol: float = 1e-8,
    maxiter: int | None = None,
    sigma: float | None = None,
    return_vectors: bool = False,
    cluster_rtol: float = 1e-6,
    ncv: int | None = None,
    reshift: bool = True,
) -> SpectralResult:
    """Lowest ``count`` eigenvalues by shift-invert Lanczos.

    The problem is symmetrized with the diagonal mass, ``B^{-1/2} A B^{-1/2}``.
    The first shift sits below the smallest nodal potential, which bounds the
    spectrum from below because the stiffness is PSD.  With ``reshift`` a
    second pass factors again just below the Ritz minimum, which matters when
    the lowest eigenvalues are tiny compared with the potential depth.
    Pairs whose residual ``|A v - lam B v| / |B v|`` exceeds
    ``tol * max(1, |lam|)`` are flagged as unconverged; ARPACK failure raises
    ``NoConvergence``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    A = op.matrix()
    s = 1.0 / np.sqrt(op.mass)
    C = sp.diags(s) @ A @ sp.diags(s)
    C = ((C + C.T) * 0.5).tocsc()
    n = C.shape[0]
    k = min(count, n - 2)
    if ncv is None:
        ncv = min(n - 1, max(2 * k + 1, k + 24))
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    eye = sp.identity(n, format="csc")

    def run(shift, start):
        lu = spla.splu(C - shift * eye)
        OPinv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
        try:
            w, V = spla.eigsh(C, k=k, sigma=shift, which="LM", OPinv=OPinv, v0=start, ncv=ncv, maxiter=maxiter, tol=0)
        except spla.ArpackNoConvergence as exc:
            raise NoConvergence(str(exc)) from exc
        order = np.argsort(w)
        return w[order], V[:, order]

    if sigma is None:
        scale = max(1.0, abs(op.min_potential()))
        sigma = op.min_potential() - 1e-2 * scale
        w, V = run(sigma, v0)
        if reshift:
            spread = max(w[-1] - w[0], abs(w[0]), 1e-12)
            sigma = w[0] - 1e-2 * spread
            w, V = run(sigma, V[:, 0])
    else:
        w, V = run(sigma, v0)
    # unweighted eigenvectors x = B^{-1/2} y; residual in the generalised form
    X = V * s[:, None]
    BX = X * op.mass[:, None]
    R = A @ X - BX * w[None, :]
    res = np.linalg.norm(R, axis=0) / np.linalg.norm(BX, axis=0)
    return SpectralResult(
        eigenvalues=w,
        residuals=res,
        converged=res <= tol * np.maximum(1.0, np.abs(w)),
        count=count,
        meta=dict(op.meta, sigma=float(sigma)),
        vectors=X if return_vectors else None,
        cluster_rtol=cluster_rtol,
    )


# ---------------------------------------------------------------------------
# Radial oracle
# ---------------------------------------------------------------------------


@dataclass
class RadialSpectrum(SpectralResult):
    """Eigenvalues merged over angular momenta; ``m`` gives the sector of each value."""

    m: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


class _RadialData:
    """Jacobi profile on the curved core, extended linearly beyond it.

    Values between RK4 samples use cubic Hermite interpolation with the exact
    derivatives, so the oracle is not limited by the Jacobi step.
    """

    def __init__(self, model: SurfaceModel, r_max: float, r_core: float | None, step: float):
        from scipy.interpolate import CubicHermiteSpline

        if r_core is None:
            r_core = 20.0 * model.length_scale
        self.model = model
        self.r_core = min(r_max, r_core)
        prof = solve_jacobi(model, self.r_core, step)
        _, fp, _ = model.radial_profile(prof.r_graph)
        dr_graph = 1.0 / np.sqrt(1.0 + fp * fp)
        self._rho = CubicHermiteSpline(prof.R, prof.rho, prof.rho_dot)
        self._r = CubicHermiteSpline(prof.R, prof.r_graph, dr_graph)
        self._end = (prof.R[-1], prof.rho[-1], prof.rho_dot[-1], prof.r_graph[-1], dr_graph[-1])

    def rho(self, R):
        R = np.asarray(R, dtype=float)
        Re, rho_e, drho_e, _, _ = self._end
        inside = R <= Re
        return np.where(inside, self._rho(np.minimum(R, Re)), rho_e + drho_e * (R - Re))

    def r_graph(self, R):
        R = np.asarray(R, dtype=float)
        Re, _, _, r_e, dr_e = self._end
        return np.where(R <= Re, self._r(np.minimum(R, Re)), r_e + dr_e * (R - Re))

    def potential(self, R):
        kr, kt = self.model.radial_curvatures(self.r_graph(R))
        return -0.25 * (kr - kt) ** 2


def _radial_nodes(r_max: float, h: float, stretch: float | None) -> np.ndarray:
    if stretch is None:
        n = max(2, int(round(r_max / h)))
        return np.linspace(0.0, r_max, n + 1)
    eta_max = stretch * math.asinh(r_max / stretch)
    n = max(2, int(math.ceil(eta_max / h)))
    R = stretch * np.sinh(np.linspace(0.0, eta_max, n + 1) / stretch)
    R[-1] = r_max
    return R


def _radial_matrices(R, data: _RadialData, m: int, with_potential: bool, boundary: str = "dirichlet", potential_scale: float = 1.0):
    """Vertex-centred finite volumes; node ``len(R) - 1`` is the outer end.

    A Dirichlet end drops the last node; a Neumann end keeps it with its
    half-cell mass.
    """
    dR = np.diff(R)
    Rh = 0.5 * (R[1:] + R[:-1])
    flux = data.rho(Rh) / dR
    rho_n = data.rho(R)
    mass = np.empty_like(R)
    mass[1:-1] = rho_n[1:-1] * 0.5 * (R[2:] - R[:-2])
    mass[-1] = rho_n[-1] * 0.5 * dR[-1]
    mass[0] = 0.5 * dR[0] * data.rho(0.25 * dR[0])  # integral of rho over [0, R_1/2]
    diag = np.zeros_like(R)
    diag[:-1] += flux
    diag[1:] += flux
    off = -flux
    if with_potential:
        diag += potential_scale * data.potential(R) * mass
    if m:
        diag[1:] += m * m * mass[1:] / rho_n[1:] ** 2
    N = R.size - 1 if boundary == "dirichlet" else R.size
    start = 0 if m == 0 else 1
    return diag[start:N], off[start : N - 1], mass[start:N]


def radial_reduce_solve(
    model: SurfaceModel,
    m_max: int,
    r_max: float,
    dr: float,
    per_sector: int = 3,
    with_potential: bool = True,
    richardson: bool = True,
    stretch: float | None = None,
    r_core: float | None = None,
    jacobi_step: float = 2e-3,
    boundary: str = "dirichlet",
    potential_scale: float = 1.0,
) -> RadialSpectrum:
    """Independent radial solver in geodesic polar coordinates.

    Each angular momentum m contributes ``-rho^{-1}(rho u')' + m^2 rho^{-2} u
    + (K - M^2) u`` on (0, r_max) with Dirichlet data at r_max.  A vertex
    centred finite volume scheme on the geodesic radius is second order; with
    ``richardson`` the values from ``dr`` and ``dr/2`` are extrapolated.
    ``stretch`` grades the radial nodes as ``R = l sinh(eta / l)`` so that
    very large discs stay cheap.  Beyond ``r_core`` (default 20 length
    scales) the surface is flat to rounding accuracy and rho is continued
    linearly.  Sectors with m >= 1 enter twice (cosine and sine).
    ``boundary`` selects Dirichlet or Neumann data at r_max and
    ``potential_scale`` multiplies ``K - M^2``.
    """
    if boundary not in ("dirichlet", "neumann"):
        raise ValueError(f"unknown boundary {boundary!r}")
    if not model.is_radial:
        raise DeltaSurfError("radial_reduce_solve needs a radially symmetric surface")
    data = _RadialData(model, r_max, r_core, jacobi_step)

    def sector_values(step):
        R = _radial_nodes(r_max, step, stretch)
        out = {}
        for m in range(m_max + 1):
            D, E, B = _radial_matrices(R, data, m, with_potential, boundary, potential_scale)
            s = 1.0 / np.sqrt(B)
            k = min(per_sector, D.size) - 1
            w = eigh_tridiagonal(D * s * s, E * s[:-1] * s[1:], eigvals_only=True, select="i", select_range=(0, k))
            out[m] = w
        return out

    fine = sector_values(dr / 2.0 if richardson else dr)
    err = {}
    if richardson:
        coarse = sector_values(dr)
        for m in fine:
            ext = (4 * fine[m] - coarse[m]) / 3
            err[m] = np.abs(ext - fine[m])
            fine[m] = ext
    vals, ms, errs = [], [], []
    for m, w in fine.items():
        for i, x in enumerate(w):
            for _ in range(1 if m == 0 else 2):
                vals.append(x)
                ms.append(m)
                errs.append(err[m][i] if err else np.nan)
    order = np.argsort(vals, kind="stable")
    vals = np.asarray(vals)[order]
    return RadialSpectrum(
        eigenvalues=vals,
        residuals=np.asarray(errs)[order],
        converged=np.ones(vals.size, dtype=bool),
        count=vals.size,
        meta={"r_max": r_max, "dr": dr, "m_max": m_max, "richardson": richardson, "stretch": stretch, "boundary": boundary},
        m=np.asarray(ms)[order],
    )


@dataclass(frozen=True)
class ZeroEnergyCertificate:
    """Zero-energy m = 0 solution of S on a radial surface.

    A zero at geodesic radius ``first_zero`` means, by Sturm comparison, that
    the Dirichlet problem on any disc of larger radius has a negative
    eigenvalue, and hence so does S on the whole surface.  ``a + b log R`` is
    the flat-region fit of the solution at ``r_max``.
    """

    first_zero: float | None
    a: float
    b: float
    potential_integral: float

    @property
    def certifies_negative(self) -> bool:
        return self.first_zero is not None

    @property
    def predicted_zero(self) -> float | None:
        """Zero of the logarithmic tail, ``exp(-a / b)`` when b < 0."""
        return math.exp(-self.a / self.b) if self.b < 0 else None


def zero_energy_certificate(model: SurfaceModel, r_max: float = 1000.0, dr: float = 1e-3, r_core: float | None = None) -> ZeroEnergyCertificate:
    """Integrate ``(rho u')' = rho (K - M^2) u`` from u(0) = 1, u'(0) = 0.

    The curved core (geodesic radius below ``r_core``, default 20 length
    scales) is integrated with RK4 on the Jacobi profile.  Beyond it the
    surface is treated as flat to rounding accuracy, so ``u = a + b log R``
    exactly and the first zero, if any, is ``exp(-a / b)``.
    """
    if r_core is None:
        r_core = 20.0 * model.length_scale
    prof = solve_jacobi(model, r_core, dr / 2.0)
    kr, kt = model.radial_curvatures(prof.r_graph)
    V = -0.25 * (kr - kt) ** 2
    rho = prof.rho
    R = prof.R
    n = (R.size - 1) // 2
    h = R[2] - R[0]
    # state (u, p = rho u'); RK4 with stage values at full/half nodes
    u, p = 1.0, 0.0
    us = [u]
    first = None
    for i in range(n):
        i0, i1, i2 = 2 * i, 2 * i + 1, 2 * i + 2

        def f(j, u_, p_):
            if rho[j] == 0.0:
                return 0.0, 0.0
            return p_ / rho[j], rho[j] * V[j] * u_

        k1 = f(i0, u, p)
        if i == 0:
            # regular start: u' = R V(0) u / 2 near the origin
            k1 = (0.0, 0.0)
        k2 = f(i1, u + h / 2 * k1[0], p + h / 2 * k1[1])
        k3 = f(i1, u + h / 2 * k2[0], p + h / 2 * k2[1])
        k4 = f(i2, u + h * k3[0], p + h * k3[1])
        un = u + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        p = p + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if first is None and un <= 0.0 < u:
            first = float(R[i0] + h * u / (u - un))
        u = un
        us.append(u)
    # flat tail: rho u' = p const, with rho ~ rho_end + (R - R_end)
    rho_end, Rend = rho[-1], R[-1]
    b = p  # u = u_end + p * log(rho / rho_end) on the flat tail (rho' = 1)
    a = u - b * math.log(rho_end)
    if first is None and b < 0:
        z = math.exp(-a / b)
        first = z if z <= r_max else None
    w = 2 * math.pi * rho * V
    integral = float(np.trapezoid(w, R)) if hasattr(np, "trapezoid") else float(np.trapz(w, R))
    return ZeroEnergyCertificate(first_zero=first, a=float(a), b=float(b), potential_integral=integral)


# ---------------------------------------------------------------------------
# Variational certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VariationalResult:
    """Value of the trial form, all terms per unit norm.

    ``bound`` is the resulting upper estimate of the bottom of the spectrum;
    ``certified`` is True when it lies below ``-alpha^2 / 4``.
    """

    alpha: float
    sigma: float
    r0: float
    d: float
    grad_sq: float
    norm_sq: float
    potential: float
    beta: float
    theta1: float
    theta2: float
    form: str

    @property
    def form_value(self) -> float:
        """``theta1 |grad phi|^2 + beta |phi|^2 + theta2 ((K - M^2) phi, phi)``."""
        return self.theta1 * self.grad_sq + self.beta * self.norm_sq + self.theta2 * self.potential

    @property
    def bound(self) -> float:
        return -(self.alpha**2) / 4.0 + self.form_value / self.norm_sq

    @property
    def certified(self) -> bool:
        return self.form_value < 0.0


def _phi_sigma(r, sigma, r0):
    r = np.asarray(r, dtype=float)
    out = np.ones_like(r)
    m = r > r0
    out[m] = k0(sigma * r[m]) / k0(sigma * r0)
    return out


def _dphi_sigma(r, sigma, r0):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    m = r > r0
    out[m] = -sigma * k1(sigma * r[m]) / k0(sigma * r0)
    return out


def _outside_square_angle(r, L):
    if r <= L:
        return 0.0
    if r >= L * math.sqrt(2.0):
        return 2 * math.pi
    return 2 * math.pi - 8.0 * math.acos(L / r)


def _flat_tail(fun, L):
    """``int_{R^2 minus [-L, L]^2} fun(|s|) ds`` for a radial integrand."""
    a = quad(lambda r: fun(r) * r * _outside_square_angle(r, L), L, L * math.sqrt(2.0), limit=200)[0]
    b = quad(lambda r: fun(r) * r * 2 * math.pi, L * math.sqrt(2.0), np.inf, limit=400)[0]
    return a + b


def variational_bound(
    geom: GeometryGrid,
    alpha: float,
    sigma: float,
    r0: float,
    d: float | None = None,
    form: str = "separated",
    n_gauss: int = 24,
) -> VariationalResult:
    """Trial-form value for ``h(s, u) = phi_sigma(|s|) chi(u)``.

    ``phi_sigma(r) = min{1, K0(sigma r) / K0(sigma r0)}`` and ``chi`` is the
    normalized ground state of the Dirichlet transverse operator at
    ``d = d(alpha)`` (default ``6 log(alpha) / alpha``).

    ``form="separated"`` uses the separated estimate
    ``C_+ |grad phi|^2 + beta |phi|^2 + C_+^{-2} ((K - M^2) phi, phi)`` with
    ``beta = v^+ d + kappa^+ + alpha^2 / 4``.
    ``form="layer"`` instead averages the exact layer fields over ``chi^2``:
    ``int Ghat^{mu nu} d phi d phi + (kappa^+ + alpha^2/4) |phi|^2 + int Vhat phi^2``
    with ``Ghat = <G^{-1}>_chi`` and ``Vhat = <V1 + V2>_chi``.

    The grid supplies the curved part of every integral; outside the
    truncation square the surface is treated as flat and the radial tail is
    integrated by adaptive quadrature.
    """
    from .transverse import TransverseProblem, kappa_plus

    if d is None:
        d = 6.0 * math.log(alpha) / alpha
    kp = kappa_plus(TransverseProblem(alpha, d, 0.0, "dirichlet_plus"))
    r = np.hypot(geom.s1, geom.s2)
    w = geom.dual_areas()
    sg = geom.sqrtg
    phi = _phi_sigma(r, sigma, r0)
    dphi = _dphi_sigma(r, sigma, r0)
    with np.errstate(invalid="ignore", divide="ignore"):
        e1 = np.where(r > 0, geom.s1 / r, 0.0)
        e2 = np.where(r > 0, geom.s2 / r, 0.0)
    p1, p2 = dphi * e1, dphi * e2
    norm_sq = float(np.sum(phi**2 * sg * w))
    tail_norm = _flat_tail(lambda x: float(_phi_sigma(np.array([x]), sigma, r0)[0]) ** 2, geom.L)
    tail_grad = _flat_tail(lambda x: float(_dphi_sigma(np.array([x]), sigma, r0)[0]) ** 2, geom.L)
    norm_sq += tail_norm
    pot = float(np.sum(geom.potential * phi**2 * sg * w))
    if form == "separated":
        from .geometry import build_layer

        layer = build_layer(geom, d, 9)
        i11, i12, i22 = geom.g22 / geom.detg, -geom.g12 / geom.detg, geom.g11 / geom.detg
        grad_sq = float(np.sum((i11 * p1 * p1 + 2 * i12 * p1 * p2 + i22 * p2 * p2) * sg * w)) + tail_grad
        Cp = layer_constant(d, geom.rho, +1)
        return VariationalResult(
            alpha, sigma, r0, d, grad_sq, norm_sq, pot,
            beta=layer.v_plus * d + kp + alpha**2 / 4.0,
            theta1=Cp, theta2=Cp**-2, form=form,
        )
    if form != "layer":
        raise ValueError(f"unknown form {form!r}")
    Ghat, Vhat = _chi_averaged_fields(geom, alpha, d, kp, n_gauss)
    grad_sq = float(np.sum((Ghat[0] * p1 * p1 + 2 * Ghat[1] * p1 * p2 + Ghat[2] * p2 * p2) * sg * w)) + tail_grad
    vterm = float(np.sum(Vhat * phi**2 * sg * w))
    return VariationalResult(
        alpha, sigma, r0, d, grad_sq, norm_sq, vterm,
        beta=kp + alpha**2 / 4.0, theta1=1.0, theta2=1.0, form=form,
    )


def _chi_averaged_fields(geom: GeometryGrid, alpha: float, d: float, kp: float, n_gauss: int):
    """``<G^{mu nu}>`` and ``<V1 + V2>`` weighted by the transverse ground state squared."""
    from .geometry import _layer_metric

    kappa = math.sqrt(-kp)
    x, wx = np.polynomial.legendre.leggauss(n_gauss)
    # the two half-intervals are integrated separately because chi has a kink at 0
    us = np.concatenate([-(x + 1) * d / 2, (x + 1) * d / 2])
    ws = np.concatenate([wx, wx]) * d / 2
    chi2 = np.sinh(kappa * (d - np.abs(us))) ** 2
    chi2 /= np.sum(chi2 * ws)
    G = [np.zeros(geom.shape) for _ in range(3)]
    V = np.zeros(geom.shape)
    sg = geom.sqrtg
    for u, wq in zip(us, ws * chi2):
        xi = 1.0 - 2.0 * geom.M * u + geom.K * u * u
        J = 0.5 * np.log(xi)
        G11, G12, G22 = _layer_metric(geom, float(u))
        detG = G11 * G22 - G12 * G12
        i11, i12, i22 = G22 / detG, -G12 / detG, G11 / detG
        J1, J2 = np.gradient(J, geom.x, geom.y, edge_order=2)
        F1 = sg * (i11 * J1 + i12 * J2)
        F2 = sg * (i12 * J1 + i22 * J2)
        div = np.gradient(F1, geom.x, axis=0, edge_order=2) + np.gradient(F2, geom.y, axis=1, edge_order=2)
        V1 = div / sg + J1 * (i11 * J1 + i12 * J2) + J2 * (i12 * J1 + i22 * J2)
        V += wq * (V1 + geom.potential / xi**2)
        G[0] += wq * i11
        G[1] += wq * i12
        G[2] += wq * i22
    return G, V
