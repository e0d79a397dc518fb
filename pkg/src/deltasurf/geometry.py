"""Surface models, sampled geometry, layer fields and geodesic polar profiles.

All surfaces are graphs ``gamma(s) = (s1, s2, f(s))`` over the parameter plane,
oriented by the upward normal ``n = g^{-1/2} (-f1, -f2, 1)``.  With this
orientation the second fundamental form is ``b = Hess f / sqrt(g)`` and the
paraboloid ``f = |s|^2 / 2`` has ``k1 = k2 = +1`` at its apex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ConjugatePoint, DegenerateMetric, DeltaSurfError, InjectivityViolation

__all__ = [
    "GraphPartials",
    "SurfaceModel",
    "plane",
    "gaussian_bump",
    "paraboloid",
    "hyperboloid",
    "general_graph",
    "GeometryGrid",
    "build_geometry",
    "EllipticityReport",
    "ellipticity_report",
    "planarity_report",
    "LayerFields",
    "build_layer",
    "GeodesicPolarProfile",
    "solve_jacobi",
    "meridian_length",
    "shape_operator",
]


@dataclass
class GraphPartials:
    """Partial derivatives of the height function up to third order."""

    f: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f11: np.ndarray
    f12: np.ndarray
    f22: np.ndarray
    f111: np.ndarray | None = None
    f112: np.ndarray | None = None
    f122: np.ndarray | None = None
    f222: np.ndarray | None = None


# ---------------------------------------------------------------------------
# Radial profiles.  Each returns (F, A, B, C) with A = F'/r, B = A'/r, C = B'/r,
# which stay finite at r = 0 and give Cartesian partials without 0/0.
# ---------------------------------------------------------------------------


def _gaussian_profile(h: float, w: float):
    def prof(r):
        e = np.exp(-(r * r) / (2.0 * w * w))
        return h * e, -h / w**2 * e, h / w**4 * e, -h / w**6 * e

    return prof


def _paraboloid_profile(a: float):
    def prof(r):
        z = np.zeros_like(r)
        return r * r / (2.0 * a), z + 1.0 / a, z, z

    return prof


def _hyperboloid_profile(a: float):
    def prof(r):
        q = a * a + r * r
        return np.sqrt(q) - a, q**-0.5, -(q**-1.5), 3.0 * q**-2.5

    return prof


def _plane_profile():
    def prof(r):
        z = np.zeros_like(r)
        return z, z, z, z

    return prof


@dataclass(frozen=True)
class SurfaceModel:
    """A graph surface with analytic (or verified numerical) partials.

    Use the factory functions :func:`plane`, :func:`gaussian_bump`,
    :func:`paraboloid`, :func:`hyperboloid` and :func:`general_graph` rather
    than instantiating directly.
    """

    family: str
    params: Mapping[str, float]
    name: str
    length_scale: float
    _profile: Callable | None = field(default=None, repr=False, compare=False)
    _height: Callable | None = field(default=None, repr=False, compare=False)
    _gradient: Callable | None = field(default=None, repr=False, compare=False)
    _hessian: Callable | None = field(default=None, repr=False, compare=False)
    fd_step: float = 1e-3

    @property
    def is_radial(self) -> bool:
        return self._profile is not None

    def partials(self, s1, s2) -> GraphPartials:
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        if self._profile is not None:
            return _radial_partials(self._profile, s1, s2)
        return _general_partials(self, s1, s2)

    def height(self, s1, s2) -> np.ndarray:
        if self._profile is not None:
            s1 = np.asarray(s1, dtype=float)
            s2 = np.asarray(s2, dtype=float)
            return self._profile(np.hypot(s1, s2))[0]
        return np.asarray(self._height(np.asarray(s1, float), np.asarray(s2, float)), float) + 0.0 * s1

    def position(self, s1, s2) -> np.ndarray:
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        s1, s2 = np.broadcast_arrays(s1, s2)
        return np.stack([s1, s2, self.height(s1, s2)], axis=-1)

    # -- radial data used by the Jacobi solver and the radial oracle --------

    def radial_profile(self, r):
        """Return ``(F, F', F'')`` of the radial height profile."""
        if self._profile is None:
            raise DeltaSurfError(f"surface {self.name!r} is not radially symmetric")
        r = np.asarray(r, dtype=float)
        F, A, B, _ = self._profile(r)
        return F, r * A, A + r * r * B

    def radial_curvatures(self, r):
        """Meridian and parallel principal curvatures ``(k_r, k_theta)`` at graph radius r."""
        r = np.asarray(r, dtype=float)
        F, A, B, _ = self._profile(r)
        fp = r * A
        fpp = A + r * r * B
        q = 1.0 + fp * fp
        return fpp / q**1.5, A / np.sqrt(q)


def _radial_partials(profile, s1, s2) -> GraphPartials:
    r = np.hypot(s1, s2)
    F, A, B, C = profile(r)
    f1, f2 = A * s1, A * s2
    f11 = A + B * s1 * s1
    f12 = B * s1 * s2
    f22 = A + B * s2 * s2
    f111 = 3 * B * s1 + C * s1**3
    f112 = B * s2 + C * s1 * s1 * s2
    f122 = B * s1 + C * s1 * s2 * s2
    f222 = 3 * B * s2 + C * s2**3
    return GraphPartials(F, f1, f2, f11, f12, f22, f111, f112, f122, f222)


def _fd_grad_hess(f, s1, s2, h):
    """4th-order central differences for gradient and Hessian."""

    def d1(fun, x, y, axis):
        e = (h, 0.0) if axis == 0 else (0.0, h)
        p = lambda k: fun(x + k * e[0], y + k * e[1])  # noqa: E731
        return (-p(2) + 8 * p(1) - 8 * p(-1) + p(-2)) / (12 * h)

    f0 = f(s1, s2)
    f1 = d1(f, s1, s2, 0)
    f2 = d1(f, s1, s2, 1)
    c = lambda a, b: f(s1 + a * h, s2 + b * h)  # noqa: E731
    f11 = (-c(2, 0) + 16 * c(1, 0) - 30 * f0 + 16 * c(-1, 0) - c(-2, 0)) / (12 * h * h)
    f22 = (-c(0, 2) + 16 * c(0, 1) - 30 * f0 + 16 * c(0, -1) - c(0, -2)) / (12 * h * h)
    gx = lambda x, y: d1(f, x, y, 0)  # noqa: E731
    f12 = d1(gx, s1, s2, 1)
    return f0, f1, f2, f11, f12, f22


def _general_partials(model: SurfaceModel, s1, s2) -> GraphPartials:
    f = model._height
    h = model.fd_step
    f0 = np.asarray(f(s1, s2), float) + 0.0 * s1
    if model._gradient is not None:
        f1, f2 = (np.asarray(v, float) + 0.0 * s1 for v in model._gradient(s1, s2))
    else:
        f1 = f2 = None
    if model._hessian is not None:
        f11, f12, f22 = (np.asarray(v, float) + 0.0 * s1 for v in model._hessian(s1, s2))
    else:
        f11 = None
    if f1 is None or f11 is None:
        # Richardson verification: the h and h/2 estimates must agree.
        a = _fd_grad_hess(f, s1, s2, h)
        b = _fd_grad_hess(f, s1, s2, h / 2)
        scale = 1.0 + np.max(np.abs(np.stack(b[1:])))
        err = max(float(np.max(np.abs(x - y))) for x, y in zip(a[1:], b[1:]))
        if err > 1e-6 * scale:
            raise DeltaSurfError(
                f"finite-difference partials of {model.name!r} not converged (discrepancy {err:.2e})"
            )
        est = [(16 * y - x) / 15 for x, y in zip(a, b)]
        if f1 is None:
            f1, f2 = est[1], est[2]
        if f11 is None:
            f11, f12, f22 = est[3], est[4], est[5]
    return GraphPartials(f0, f1, f2, f11, f12, f22)


def plane() -> SurfaceModel:
    return SurfaceModel("plane", {}, "plane", 1.0, _profile=_plane_profile())


def gaussian_bump(h: float = 1.0, w: float = 1.0) -> SurfaceModel:
    """Radial bump ``f(r) = h exp(-r^2 / (2 w^2))``."""
    return SurfaceModel(
        "radial-graph", {"h": h, "w": w}, "gaussian", float(w), _profile=_gaussian_profile(h, w)
    )


def paraboloid(a: float = 1.0) -> SurfaceModel:
    """Radial graph ``f(r) = r^2 / (2 a)``; curvature 1/a at the apex."""
    return SurfaceModel("radial-graph", {"a": a}, "paraboloid", float(a), _profile=_paraboloid_profile(a))


def hyperboloid(a: float = 1.0) -> SurfaceModel:
    """Upper sheet of a hyperboloid of revolution, ``f(r) = sqrt(a^2 + r^2) - a``."""
    return SurfaceModel("radial-graph", {"a": a}, "hyperboloid", float(a), _profile=_hyperboloid_profile(a))


def general_graph(
    f: Callable,
    gradient: Callable | None = None,
    hessian: Callable | None = None,
    length_scale: float = 1.0,
    name: str = "graph",
    fd_step: float = 1e-3,
) -> SurfaceModel:
    """Arbitrary graph surface.

    ``gradient(s1, s2) -> (f1, f2)`` and ``hessian(s1, s2) -> (f11, f12, f22)``
    are optional; missing derivatives fall back to 4th-order central
    differences, verified by comparing steps ``fd_step`` and ``fd_step / 2``.
    """
    return SurfaceModel(
        "general-graph",
        {},
        name,
        float(length_scale),
        _height=f,
        _gradient=gradient,
        _hessian=hessian,
        fd_step=fd_step,
    )


# ---------------------------------------------------------------------------
# Pointwise geometry
# ---------------------------------------------------------------------------


def shape_operator(p: GraphPartials):
    """Metric, normal and Weingarten tensor from graph partials.

    Returns ``(g11, g12, g22, det_g, normal, h)`` where ``h[..., mu, nu]`` is
    the mixed tensor h_mu^nu = b_{mu sigma} g^{sigma nu}.
    """
    f1, f2 = p.f1, p.f2
    g11 = 1.0 + f1 * f1
    g12 = f1 * f2
    g22 = 1.0 + f2 * f2
    detg = g11 * g22 - g12 * g12
    if np.any(~(detg > 0)):
        raise DegenerateMetric("metric determinant is not positive")
    sg = np.sqrt(detg)
    normal = np.stack([-f1 / sg, -f2 / sg, np.ones_like(sg) / sg], axis=-1)
    b11, b12, b22 = p.f11 / sg, p.f12 / sg, p.f22 / sg
    i11, i12, i22 = g22 / detg, -g12 / detg, g11 / detg
    h = np.empty(sg.shape + (2, 2))
    h[..., 0, 0] = b11 * i11 + b12 * i12
    h[..., 0, 1] = b11 * i12 + b12 * i22
    h[..., 1, 0] = b12 * i11 + b22 * i12
    h[..., 1, 1] = b12 * i12 + b22 * i22
    return g11, g12, g22, detg, normal, h


def _principal(h):
    K = h[..., 0, 0] * h[..., 1, 1] - h[..., 0, 1] * h[..., 1, 0]
    M = 0.5 * (h[..., 0, 0] + h[..., 1, 1])
    disc = np.sqrt(np.maximum(M * M - K, 0.0))
    return M + disc, M - disc, K, M


@dataclass
class GeometryGrid:
    """Geometric fields sampled on a tensor lattice in the parameter plane.

    Arrays are indexed ``[i, j]`` with ``s1 = x[i]``, ``s2 = y[j]``.
    """

    model: SurfaceModel
    x: np.ndarray
    y: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    detg: np.ndarray
    normal: np.ndarray
    weingarten: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    K: np.ndarray
    M: np.ndarray
    ds: float
    uniform: bool

    @property
    def L(self) -> float:
        return float(self.x[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.s1.shape

    @property
    def sqrtg(self) -> np.ndarray:
        return np.sqrt(self.detg)

    @property
    def sup_k1(self) -> float:
        return float(np.max(np.abs(self.k1)))

    @property
    def sup_k2(self) -> float:
        return float(np.max(np.abs(self.k2)))

    @property
    def sup_K(self) -> float:
        return float(np.max(np.abs(self.K)))

    @property
    def sup_M(self) -> float:
        return float(np.max(np.abs(self.M)))

    @property
    def rho(self) -> float:
        """Injectivity scale (max{|k1|_inf, |k2|_inf})^{-1}; ``inf`` for a plane."""
        k = max(self.sup_k1, self.sup_k2)
        return math.inf if k == 0.0 else 1.0 / k

    @property
    def potential(self) -> np.ndarray:
        """Curvature potential K - M^2 of the comparison operator."""
        return self.K - self.M**2

    def dual_areas(self) -> np.ndarray:
        """Parameter-plane area of each node's dual cell (trapezoid weights)."""
        return np.outer(_trapezoid_weights(self.x), _trapezoid_weights(self.y))

    def cell_coefficients(self):
        """Return ``(a11, a12, a22, hx, hy)`` at cell centres, a = sqrt(g) g^{mu nu}."""
        xc = 0.5 * (self.x[1:] + self.x[:-1])
        yc = 0.5 * (self.y[1:] + self.y[:-1])
        c1, c2 = np.meshgrid(xc, yc, indexing="ij")
        p = self.model.partials(c1, c2)
        g11, g12, g22 = 1.0 + p.f1**2, p.f1 * p.f2, 1.0 + p.f2**2
        detg = g11 * g22 - g12 * g12
        sg = np.sqrt(detg)
        return sg * g22 / detg, -sg * g12 / detg, sg * g11 / detg, np.diff(self.x), np.diff(self.y)

    def metric_eigenvalues(self):
        tr = self.g11 + self.g22
        disc = np.sqrt(np.maximum((self.g11 - self.g22) ** 2 + 4 * self.g12**2, 0.0))
        return 0.5 * (tr - disc), 0.5 * (tr + disc)

    def to_csv(self, path) -> None:
        from .io import write_csv

        cols = {
            "s1": self.s1.ravel(),
            "s2": self.s2.ravel(),
            "g11": self.g11.ravel(),
            "g12": self.g12.ravel(),
            "g22": self.g22.ravel(),
            "k1": self.k1.ravel(),
            "k2": self.k2.ravel(),
            "K": self.K.ravel(),
            "M": self.M.ravel(),
        }
        write_csv(path, "geometry", cols)


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


def _axis(L: float, ds: float, stretch: float | None) -> np.ndarray:
    if stretch is None:
        n = max(1, int(round(L / ds)))
        return np.linspace(-L, L, 2 * n + 1)
    # x = l sinh(xi / l): spacing ds near the origin, growing like |x| ds / l.
    xi_max = stretch * math.asinh(L / stretch)
    n = max(1, int(math.ceil(xi_max / ds)))
    xi = np.linspace(-xi_max, xi_max, 2 * n + 1)
    x = stretch * np.sinh(xi / stretch)
    x[0], x[-1], x[n] = -L, L, 0.0
    return x


def build_geometry(
    model: SurfaceModel,
    L: float,
    ds: float,
    stretch: float | None = None,
    scale_guard: float | None = 10.0,
) -> GeometryGrid:
    """Sample all geometric fields of ``model`` on [-L, L]^2.

    ``stretch`` switches to the graded lattice ``x = l sinh(xi / l)`` with
    uniform ``xi`` spacing ``ds``; it keeps resolution ``ds`` in the curved
    core while reaching very large ``L``.  ``scale_guard`` enforces
    ``L >= scale_guard * model.length_scale`` (pass ``None`` to skip).
    """
    if not ds > 0:
        raise ValueError("ds must be positive")
    if scale_guard is not None and L < scale_guard * model.length_scale:
        raise ValueError(
            f"L = {L} is below {scale_guard} x the model length scale {model.length_scale}"
        )
    x = _axis(L, ds, stretch)
    s1, s2 = np.meshgrid(x, x, indexing="ij")
    p = model.partials(s1, s2)
    g11, g12, g22, detg, normal, h = shape_operator(p)
    nn = np.linalg.norm(normal, axis=-1)
    if np.max(np.abs(nn - 1.0)) > 1e-12:
        raise DeltaSurfError("normal field is not unit length")
    k1, k2, K, M = _principal(h)
    return GeometryGrid(
        model=model,
        x=x,
        y=x.copy(),
        s1=s1,
        s2=s2,
        g11=g11,
        g12=g12,
        g22=g22,
        detg=detg,
        normal=normal,
        weingarten=h,
        k1=k1,
        k2=k2,
        K=K,
        M=M,
        ds=float(x[1] - x[0]) if stretch is None else float(ds),
        uniform=stretch is None,
    )


@dataclass(frozen=True)
class EllipticityReport:
    c_minus: float
    c_plus: float
    total_gauss: float
    total_mean_sq: float
    abs_gauss: float

    @property
    def total_mean(self) -> float:
        return math.sqrt(self.total_mean_sq)

    @property
    def small_total_curvature(self) -> bool:
        """``||K||_{L^1(dGamma)} < 2 pi``, a sufficient condition for uniform ellipticity."""
        return self.abs_gauss < 2 * math.pi


def ellipticity_report(geom: GeometryGrid) -> EllipticityReport:
    lo, hi = geom.metric_eigenvalues()
    w = geom.dual_areas() * geom.sqrtg
    return EllipticityReport(
        c_minus=float(lo.min()),
        c_plus=float(hi.max()),
        total_gauss=float(np.sum(geom.K * w)),
        total_mean_sq=float(np.sum(geom.M**2 * w)),
        abs_gauss=float(np.sum(np.abs(geom.K) * w)),
    )


def planarity_report(geom: GeometryGrid, inner: float = 0.8) -> dict[str, float]:
    """Sup of |K|, |M| and |n - e3| on the annulus inner*L <= r <= L."""
    r = np.hypot(geom.s1, geom.s2)
    ring = (r >= inner * geom.L) & (r <= geom.L)
    dn = geom.normal.copy()
    dn[..., 2] -= 1.0
    return {
        "sup_K": float(np.max(np.abs(geom.K[ring]))),
        "sup_M": float(np.max(np.abs(geom.M[ring]))),
        "sup_normal_tilt": float(np.max(np.linalg.norm(dn[ring], axis=-1))),
    }


# ---------------------------------------------------------------------------
# Layer neighbourhood
# ---------------------------------------------------------------------------


@dataclass
class LayerFields:
    """Fields of the layer map (s, u) -> gamma(s) + u n(s), |u| <= d.

    Arrays carry the transverse index first: ``xi[k, i, j]`` at ``u[k]``.
    """

    geom: GeometryGrid
    d: float
    u: np.ndarray
    xi: np.ndarray
    J: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    zeta: np.ndarray

    @property
    def rho(self) -> float:
        return self.geom.rho

    @property
    def C_plus(self) -> float:
        return layer_constant(self.d, self.rho, +1)

    @property
    def C_minus(self) -> float:
        return layer_constant(self.d, self.rho, -1)

    @property
    def v_plus(self) -> float:
        return float(self.V1.max() / self.d) if self.d > 0 else 0.0

    @property
    def v_minus(self) -> float:
        return float(self.V1.min() / self.d) if self.d > 0 else 0.0

    @property
    def D_d(self) -> float:
        """Boundary coefficient 2(|M|_inf + |K|_inf d) of the Neumann transverse form."""
        return 2.0 * (self.geom.sup_M + self.geom.sup_K * self.d)

    def metric(self, k: int):
        """Layer metric components (G11, G12, G22) on the slice ``u[k]``."""
        return _layer_metric(self.geom, float(self.u[k]))

    def bound_checks(self) -> dict[str, bool]:
        """Nodewise checks of C_- <= xi <= C_+ and C_- g <= G <= C_+ g."""
        tol = 1e-12
        cm, cp = self.C_minus, self.C_plus
        ok_xi = bool(self.xi.min() >= cm - tol and self.xi.max() <= cp + tol)
        ok_G = True
        ok_det = True
        g = self.geom
        for k in range(len(self.u)):
            G11, G12, G22 = self.metric(k)
            lo, hi = _pencil_eigs(G11, G12, G22, g.g11, g.g12, g.g22)
            ok_G &= bool(lo.min() >= cm - tol and hi.max() <= cp + tol)
            detG = G11 * G22 - G12 * G12
            ok_det &= bool(np.allclose(detG, g.detg * self.xi[k] ** 2, rtol=1e-10, atol=0))
        return {"xi_bounds": ok_xi, "metric_bounds": ok_G, "volume_element": ok_det}


def layer_constant(d: float, rho: float, sign: int) -> float:
    """C_pm(d) = (1 pm d / rho)^2."""
    t = 0.0 if math.isinf(rho) else d / rho
    return (1.0 + sign * t) ** 2


def _layer_metric(geom: GeometryGrid, u: float):
    h = geom.weingarten
    # P = I - u h (mixed tensor), G = P P g
    p00 = 1.0 - u * h[..., 0, 0]
    p01 = -u * h[..., 0, 1]
    p10 = -u * h[..., 1, 0]
    p11 = 1.0 - u * h[..., 1, 1]
    q00 = p00 * p00 + p01 * p10
    q01 = p00 * p01 + p01 * p11
    q10 = p10 * p00 + p11 * p10
    q11 = p10 * p01 + p11 * p11
    G11 = q00 * geom.g11 + q01 * geom.g12
    G12 = q00 * geom.g12 + q01 * geom.g22
    G21 = q10 * geom.g11 + q11 * geom.g12
    G22 = q10 * geom.g12 + q11 * geom.g22
    return G11, 0.5 * (G12 + G21), G22


def _pencil_eigs(a11, a12, a22, b11, b12, b22):
    """Generalised eigenvalues of the 2x2 pencil (A, B), B positive definite."""
    detb = b11 * b22 - b12 * b12
    # det(A - t B) = detb t^2 - (a11 b22 + a22 b11 - 2 a12 b12) t + det A
    p = (a11 * b22 + a22 * b11 - 2 * a12 * b12) / detb
    q = (a11 * a22 - a12 * a12) / detb
    disc = np.sqrt(np.maximum(p * p / 4 - q, 0.0))
    return p / 2 - disc, p / 2 + disc


def build_layer(geom: GeometryGrid, d: float, Nu: int = 9) -> LayerFields:
    """Tabulate xi, J, V1, V2 and zeta on ``Nu`` equispaced slices of [-d, d]."""
    if Nu < 8:
        raise ValueError("need at least 8 transverse samples")
    if d < 0:
        raise ValueError("d must be non-negative")
    if d >= geom.rho:
        raise InjectivityViolation(f"d = {d} is not below the injectivity scale {geom.rho}")
    u = np.linspace(-d, d, Nu)
    shape = (Nu,) + geom.shape
    xi = np.empty(shape)
    J = np.empty(shape)
    V1 = np.empty(shape)
    V2 = np.empty(shape)
    zeta = np.empty(shape)
    sg = geom.sqrtg
    pot = geom.potential
    for k, uk in enumerate(u):
        xk = 1.0 - 2.0 * geom.M * uk + geom.K * uk * uk
        if np.any(xk <= 0):
            raise InjectivityViolation(f"xi <= 0 at u = {uk}")
        xi[k] = xk
        J[k] = 0.5 * np.log(xk)
        V2[k] = pot / xk**2
        zeta[k] = (geom.M - geom.K * uk) / xk
        if d == 0.0:
            V1[k] = 0.0
            continue
        G11, G12, G22 = _layer_metric(geom, float(uk))
        detG = G11 * G22 - G12 * G12
        i11, i12, i22 = G22 / detG, -G12 / detG, G11 / detG
        J1, J2 = np.gradient(J[k], geom.x, geom.y, edge_order=2)
        F1 = sg * (i11 * J1 + i12 * J2)
        F2 = sg * (i12 * J1 + i22 * J2)
        div = np.gradient(F1, geom.x, axis=0, edge_order=2) + np.gradient(F2, geom.y, axis=1, edge_order=2)
        V1[k] = div / sg + J1 * (i11 * J1 + i12 * J2) + J2 * (i12 * J1 + i22 * J2)
    return LayerFields(geom=geom, d=float(d), u=u, xi=xi, J=J, V1=V1, V2=V2, zeta=zeta)


# ---------------------------------------------------------------------------
# Geodesic polar coordinates
# ---------------------------------------------------------------------------


@dataclass
class GeodesicPolarProfile:
    """Jacobi field rho(R) along a meridian, R the geodesic radius.

    ``r_graph`` is the graph radius |s| reached at each R (``None`` when the
    profile was integrated from a prescribed curvature function).
    """

    R: np.ndarray
    rho: np.ndarray
    rho_dot: np.ndarray
    r_graph: np.ndarray | None
    truncation_error: float

    def metric(self):
        """Diagonal g.p.c. metric entries (1, rho^2)."""
        return np.ones_like(self.rho), self.rho**2


def _rk4(fun, y0, h, n):
    ys = np.empty((n + 1, len(y0)))
    ys[0] = y0
    y = np.asarray(y0, float)
    for i in range(n):
        t = i * h
        k1 = fun(t, y)
        k2 = fun(t + h / 2, y + h / 2 * k1)
        k3 = fun(t + h / 2, y + h / 2 * k2)
        k4 = fun(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[i + 1] = y
    return ys


def solve_jacobi(
    model: SurfaceModel | None,
    r_max: float,
    dr: float,
    gauss_curvature: Callable[[float], float] | None = None,
) -> GeodesicPolarProfile:
    """Integrate rho'' + K rho = 0, rho(0) = 0, rho'(0) = 1 by classical RK4.

    For a radial graph the graph radius is carried along (dr/dR = (1 + F'^2)^{-1/2})
    so that K is evaluated at the right point of the meridian.  Passing
    ``gauss_curvature`` integrates against a prescribed K(R) instead.
    The truncation error is the Richardson estimate from a step-doubled run.
    """
    n = int(round(r_max / dr))
    if n < 2:
        raise ValueError("r_max / dr too small")
    h = r_max / n

    if gauss_curvature is not None:

        def fun(t, y):
            return np.array([y[1], -gauss_curvature(t) * y[0]])

        y0 = [0.0, 1.0]
    else:
        if model is None or not model.is_radial:
            raise DeltaSurfError("solve_jacobi needs a radially symmetric surface")

        def fun(t, y):
            r = max(y[0], 0.0)
            _, fp, _ = model.radial_profile(np.array(r))
            kr, kt = model.radial_curvatures(np.array(r))
            return np.array([1.0 / math.sqrt(1.0 + float(fp) ** 2), y[2], -float(kr * kt) * y[1]])

        y0 = [0.0, 0.0, 1.0]

    ys = _rk4(fun, y0, h, n)
    if n % 2 == 0:
        coarse = _rk4(fun, y0, 2 * h, n // 2)
        err = float(np.max(np.abs(coarse[:, -2] - ys[::2, -2]))) / 15.0
    else:
        err = float("nan")
    R = np.linspace(0.0, r_max, n + 1)
    rho, rho_dot = ys[:, -2], ys[:, -1]
    bad = np.nonzero(rho[1:] <= 0.0)[0]
    if bad.size:
        raise ConjugatePoint(f"Jacobi field vanishes at R = {R[bad[0] + 1]:.6g}")
    r_graph = ys[:, 0] if gauss_curvature is None else None
    return GeodesicPolarProfile(R=R, rho=rho, rho_dot=rho_dot, r_graph=r_graph, truncation_error=err)


def meridian_length(model: SurfaceModel, r: float, n: int = 64) -> float:
    """Geodesic distance from the pole to graph radius ``r`` along a meridian.

    Composite Gauss-Legendre on unit panels; the integrand ``sqrt(1 + F'^2)``
    is smooth, so the result is accurate to rounding for moderate ``r``.
    """
    if r <= 0:
        return 0.0
    x, w = np.polynomial.legendre.leggauss(n)
    k = max(1, int(math.ceil(r)))
    edges = np.linspace(0.0, r, k + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        t = (a + b) / 2 + (b - a) / 2 * x
        _, fp, _ = model.radial_profile(t)
        total += (b - a) / 2 * float(np.sum(w * np.sqrt(1.0 + fp * fp)))
    return float(total)
