"""Direct eigenvalues of the delta interaction from the Birman-Schwinger principle.

``-kappa^2`` is an eigenvalue of the singular Schroedinger operator iff 1 is
an eigenvalue of ``alpha R(kappa)`` with

    (R(kappa) phi)(s) = int G(|gamma(s) - gamma(s')|) phi(s') dGamma(s'),
    G(rho) = exp(-kappa rho) / (4 pi rho).

Two discretizations are provided.

``nystrom``
    Point evaluation of the kernel at lattice nodes with a flat-cell
    correction on the diagonal.  Simple, but the kernel varies on the scale
    ``1 / kappa`` and point evaluation needs ``kappa * ds << 1``.
``product`` (default)
    Collocation at lattice nodes with local polar product integration.
    Around each target the integral is taken in polar coordinates of the
    parameter plane, radially by composite Gauss-Legendre panels in
    ``t = kappa * r`` and by the trapezoid rule in angle.  The density at the
    sample points is the tensor cubic Lagrange interpolant of its node
    values, so the sampling stencil is the same for every target and the
    interpolation collapses into a fixed sparse matrix.  The result is
    symmetrized in the discrete ``L^2(dGamma)`` inner product.

In both cases the density vanishes outside the sampled patch: the computed
spectrum belongs to the interaction supported on the truncated surface.

For radially symmetric graphs :func:`assemble_bs_radial` separates the
angular momentum m and collocates ``phi(r) cos(m theta)`` on graded
Gauss-Legendre panels in the graph radius.  The panels shrink to ``1/kappa``
at the rim of the disc, where the density has a boundary layer of that
width, which a uniform lattice cannot follow at large coupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .errors import DeltaSurfError
from .geometry import GeometryGrid

__all__ = [
    "BSMatrix",
    "nystrom_matrix",
    "assemble_bs",
    "bs_top",
    "BSEigenvalue",
    "find_eigenvalues",
    "flat_cell_self_term",
    "RadialBSMatrix",
    "radial_panels",
    "assemble_bs_radial",
    "find_eigenvalues_radial",
]

_PANELS = (0.0, 0.25, 0.75, 1.75, 3.5, 6.5, 11.0, 17.0, 25.0)


@dataclass
class BSMatrix:
    """Symmetric discretization of ``alpha R(kappa)`` on a surface patch."""

    alpha: float
    kappa: float
    matrix: sp.csr_matrix | np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.weights.size

    def top(self, count: int = 1, v0: np.ndarray | None = None):
        """Largest ``count`` eigenvalues (descending) and eigenvectors."""
        A = self.matrix
        n = A.shape[0]
        if not sp.issparse(A) or n <= 400:
            Ad = A.toarray() if sp.issparse(A) else A
            w, V = np.linalg.eigh(Ad)
            return w[::-1][:count], V[:, ::-1][:, :count]
        if v0 is None:
            v0 = np.random.default_rng(0).standard_normal(n)
        w, V = spla.eigsh(A, k=count, which="LA", v0=v0, ncv=max(2 * count + 1, count + 20), tol=1e-13)
        order = np.argsort(w)[::-1]
        return w[order], V[:, order]


def flat_cell_self_term(side: float, kappa: float) -> float:
    """``int_cell G dA`` over a flat square of side ``side`` centred on the pole.

    The exponential is expanded to first order, ``exp(-kappa rho) ~ 1 - kappa rho``;
    ``int 1/rho dA = 4 side log(1 + sqrt 2)`` over the square.
    """
    return (4.0 * side * math.log1p(math.sqrt(2.0)) - kappa * side * side) / (4.0 * math.pi)


def nystrom_matrix(points: np.ndarray, weights: np.ndarray, alpha: float, kappa: float, self_terms=None) -> BSMatrix:
    """Dense point-evaluation matrix ``alpha sqrt(w_i w_j) G(|x_i - x_j|)``.

    ``self_terms[i]`` is the diagonal integral of G over node i's cell
    (already including the surface area factor); omitted means zero.
    """
    x = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    diff = x[:, None, :] - x[None, :, :]
    rho = np.linalg.norm(diff, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.exp(-kappa * rho) / (4.0 * math.pi * rho)
    np.fill_diagonal(G, 0.0)
    A = alpha * np.sqrt(w[:, None] * w[None, :]) * G
    if self_terms is not None:
        A[np.diag_indices_from(A)] = alpha * np.asarray(self_terms, dtype=float)
    return BSMatrix(alpha, kappa, A, w, {"method": "nystrom", "n": x.shape[0]})


def _lagrange4(f):
    """Cubic Lagrange weights on nodes (-1, 0, 1, 2) at fractional position f in [0, 1)."""
    return np.stack(
        [
            -f * (f - 1) * (f - 2) / 6,
            (f + 1) * (f - 1) * (f - 2) / 2,
            -(f + 1) * f * (f - 2) / 2,
            (f + 1) * f * (f - 1) / 6,
        ],
        axis=-1,
    )


def _polar_rule(kappa: float, n_gl: int, n_ang: int, tmax: float):
    """Offsets (Q, 2) and area weights (Q,) of the local polar rule, t-panels scaled by 1/kappa."""
    x, wx = np.polynomial.legendre.leggauss(n_gl)
    edges = [p for p in _PANELS if p < tmax] + [tmax]
    r, wr = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        r.append((a + b) / 2 + (b - a) / 2 * x)
        wr.append((b - a) / 2 * wx)
    r = np.concatenate(r) / kappa
    wr = np.concatenate(wr) / kappa
    th = (np.arange(n_ang) + 0.5) * 2 * math.pi / n_ang
    R, TH = np.meshgrid(r, th, indexing="ij")
    W = (wr * r)[:, None] * np.full(n_ang, 2 * math.pi / n_ang)[None, :]
    off = np.stack([R * np.cos(TH), R * np.sin(TH)], axis=-1).reshape(-1, 2)
    return off, W.ravel()


def _interp_matrix(off: np.ndarray, h: float):
    """Sparse map from node values on the stencil box to sample values."""
    q = off / h
    base = np.floor(q).astype(int)
    frac = q - base
    wx = _lagrange4(frac[:, 0])
    wy = _lagrange4(frac[:, 1])
    mr = int(np.max(np.abs(base))) + 3
    width = 2 * mr + 1
    rows, cols, vals = [], [], []
    Q = off.shape[0]
    for a in range(4):
        for b in range(4):
            mx = base[:, 0] + a - 1
            my = base[:, 1] + b - 1
            rows.append(np.arange(Q))
            cols.append((mx + mr) * width + (my + mr))
            vals.append(wx[:, a] * wy[:, b])
    P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(Q, width * width))
    used = np.unique(P.indices)
    P = P[:, used].tocsr()
    mx, my = np.divmod(used, width)
    return P, mx - mr, my - mr


def _sqrt_metric(model, s1, s2):
    p = model.partials(s1, s2)
    return np.sqrt(1.0 + p.f1 * p.f1 + p.f2 * p.f2), p.f


def assemble_bs(
    geom: GeometryGrid,
    alpha: float,
    kappa: float,
    method: str = "product",
    n_gl: int = 8,
    n_ang: int = 32,
    tmax: float = 25.0,
    chunk: int = 1024,
    support_radius: float | None = None,
) -> BSMatrix:
    """Discretize ``alpha R(kappa)`` on the lattice of ``geom`` (must be uniform).

    ``support_radius`` restricts the interaction to the nodes with
    ``|s| <= support_radius``; the density is zero elsewhere.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if not geom.uniform:
        raise DeltaSurfError("the Birman-Schwinger solver needs a uniform lattice")
    h = float(geom.x[1] - geom.x[0])
    nx, ny = geom.shape
    sg = geom.sqrtg
    area = geom.dual_areas()
    W = (sg * area).ravel()
    if method == "nystrom":
        pts = geom.model.position(geom.s1, geom.s2).reshape(-1, 3)
        selfs = (sg.ravel() * flat_cell_self_term(h, kappa)) * (area.ravel() / h**2)
        out = nystrom_matrix(pts, W, alpha, kappa, selfs)
        out.meta.update(L=geom.L, ds=h)
        return out
    if method != "product":
        raise ValueError(f"unknown method {method!r}")

    off, wq = _polar_rule(kappa, n_gl, n_ang, tmax)
    P, mx, my = _interp_matrix(off, h)
    model = geom.model
    s1 = geom.s1.ravel()
    s2 = geom.s2.ravel()
    f0 = geom.model.height(s1, s2)
    I, J = np.divmod(np.arange(nx * ny), ny)
    rows, cols, vals = [], [], []
    for c0 in range(0, nx * ny, chunk):
        sl = slice(c0, min(c0 + chunk, nx * ny))
        if support_radius is not None and np.min(np.hypot(s1[sl], s2[sl])) > support_radius:
            continue
        a1 = s1[sl, None] + off[None, :, 0]
        a2 = s2[sl, None] + off[None, :, 1]
        sgq, fq = _sqrt_metric(model, a1, a2)
        dist = np.sqrt(off[None, :, 0] ** 2 + off[None, :, 1] ** 2 + (fq - f0[sl, None]) ** 2)
        kv = alpha * np.exp(-kappa * dist) / (4.0 * math.pi * dist) * sgq * wq[None, :]
        Kl = np.asarray((P.T @ kv.T).T)  # (chunk, n_off)
        ti, tj = I[sl, None] + mx[None, :], J[sl, None] + my[None, :]
        ok = (ti >= 0) & (ti < nx) & (tj >= 0) & (tj < ny)
        r = np.broadcast_to(np.arange(sl.start, sl.stop)[:, None], ok.shape)[ok]
        rows.append(r)
        cols.append((ti * ny + tj)[ok])
        vals.append(Kl[ok])
    K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nx * ny, nx * ny))
    if support_radius is not None:
        keep = np.flatnonzero(np.hypot(s1, s2) <= support_radius)
        K = K[keep][:, keep]
        W = W[keep]
    sw = np.sqrt(W)
    S = sp.diags(sw) @ K @ sp.diags(1.0 / sw)
    S = ((S + S.T) * 0.5).tocsr()
    return BSMatrix(
        alpha,
        kappa,
        S,
        W,
        {
            "method": "product",
            "L": geom.L,
            "ds": h,
            "n": int(W.size),
            "samples": off.shape[0],
            "tmax": tmax,
            "support_radius": support_radius,
        },
    )


def bs_top(geom: GeometryGrid, alpha: float, kappa: float, count: int = 1, v0=None, **kw):
    """Largest ``count`` Birman-Schwinger eigenvalues at ``kappa`` with eigenvectors."""
    return assemble_bs(geom, alpha, kappa, **kw).top(count, v0)


@dataclass(frozen=True)
class BSEigenvalue:
    """One branch of the direct solver; ``kappa`` is None when no crossing was found."""

    j: int
    kappa: float | None
    nu_residual: float
    evaluations: int
    error: float = float("nan")

    @property
    def eigenvalue(self) -> float | None:
        return None if self.kappa is None else -self.kappa**2

    @property
    def present(self) -> bool:
        return self.kappa is not None


def find_eigenvalues(
    geom: GeometryGrid,
    alpha: float,
    j_max: int = 1,
    kappa_min: float | None = None,
    kappa_max: float | None = None,
    xtol: float = 1e-10,
    **kw,
) -> list[BSEigenvalue]:
    """Solve ``nu_j(kappa) = 1`` for each branch j <= j_max.

    The search interval defaults to ``(alpha/2 (1 + 2%), 2 alpha]``, i.e.
    eigenvalues safely below ``-alpha^2 / 4``.  On a truncated patch the
    eigenvalues of a curved surface lie slightly above ``-alpha^2 / 4`` and a
    smaller ``kappa_min`` must be passed to find them.  Each branch is the
    j-th largest eigenvalue after sorting; the search uses Brent's method,
    which is bisection safeguarded by secant and inverse quadratic steps.
    """
    if kappa_min is None:
        kappa_min = alpha / 2 * 1.02
    if kappa_max is None:
        kappa_max = 2.0 * alpha
    cache: dict[float, np.ndarray] = {}
    state = {"v0": None}

    def nus(k):
        if k not in cache:
            w, V = bs_top(geom, alpha, k, j_max, v0=state["v0"], **kw)
            state["v0"] = V[:, 0]
            cache[k] = w
        return cache[k]

    lo_vals = nus(kappa_min)
    hi_vals = nus(kappa_max)
    out = []
    for j in range(j_max):
        if not (lo_vals[j] > 1.0 > hi_vals[j]):
            out.append(BSEigenvalue(j + 1, None, float("nan"), len(cache)))
            continue
        n0 = len(cache)
        # 1/nu is close to linear in kappa (exactly 2 kappa / alpha for a plane)
        k = brentq(lambda x: 1.0 / nus(x)[j] - 1.0, kappa_min, kappa_max, xtol=xtol, rtol=4 * np.finfo(float).eps)
        out.append(BSEigenvalue(j + 1, float(k), float(nus(k)[j] - 1.0), len(cache) - n0))
    return out


# ---------------------------------------------------------------------------
# Axisymmetric collocation
# ---------------------------------------------------------------------------


def radial_panels(R: float, kappa: float, panel: float = 0.25) -> np.ndarray:
    """Panel edges on [0, R]: uniform of size ``panel``, graded geometrically to ``0.25/kappa`` at R."""
    grade = [0.0]
    w = 0.25 / kappa
    while grade[-1] + w < panel and grade[-1] + w < R / 2:
        grade.append(grade[-1] + w)
        w *= 2.0
    inner = R - grade[-1]
    n = max(1, int(math.ceil(inner / panel)))
    edges = np.concatenate([np.linspace(0.0, inner, n + 1), R - np.asarray(grade[-2::-1])])
    return edges


def _lagrange_rows(x: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Values of the Lagrange basis on ``nodes`` at points ``x``, shape (len(x), len(nodes))."""
    out = np.ones((x.size, nodes.size))
    for k in range(nodes.size):
        for j in range(nodes.size):
            if j != k:
                out[:, k] *= (x - nodes[j]) / (nodes[k] - nodes[j])
    return out


@dataclass
class RadialBSMatrix:
    """Collocation matrix of ``alpha R(kappa)`` restricted to one angular momentum."""

    alpha: float
    kappa: float
    m: int
    matrix: np.ndarray
    nodes: np.ndarray
    meta: dict = field(default_factory=dict)

    def top(self, count: int = 1) -> np.ndarray:
        """Largest ``count`` real parts of the eigenvalues, descending."""
        w = np.linalg.eigvals(self.matrix).real
        return np.sort(w)[::-1][:count]


def assemble_bs_radial(
    model,
    alpha: float,
    kappa: float,
    R: float,
    m: int = 0,
    n_gl: int = 8,
    n_ang: int = 128,
    tmax: float = 25.0,
    panel: float = 0.25,
    order: int = 8,
) -> RadialBSMatrix:
    """Collocation of ``alpha R(kappa)`` on the disc ``|s| <= R`` of a radial graph.

    Around the target ``(r_i, 0)`` each ray of the polar rule is cut where it
    leaves the disc, so the angular integrand stays smooth and the trapezoid
    rule in angle converges fast.  The radial panels of the rule are scaled
    to the cut length.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if not model.is_radial:
        raise DeltaSurfError("the axisymmetric solver needs a radially symmetric surface")
    edges = radial_panels(R, kappa, panel)
    xg, _ = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1], edges[1:]
    nodes = ((a + b)[:, None] / 2 + (b - a)[:, None] / 2 * xg[None, :]).ravel()
    N = nodes.size
    tx, tw = np.polynomial.legendre.leggauss(n_gl)
    pe = [p for p in _PANELS if p < tmax] + [tmax]
    tt = np.concatenate([(p + q) / 2 + (q - p) / 2 * tx for p, q in zip(pe[:-1], pe[1:])])
    tw = np.concatenate([(q - p) / 2 * tw for p, q in zip(pe[:-1], pe[1:])])
    psi = (np.arange(n_ang) + 0.5) * 2 * math.pi / n_ang
    c, s = np.cos(psi), np.sin(psi)
    F0, _, _ = model.radial_profile(nodes)
    A = np.zeros((N, N))
    for i, r0 in enumerate(nodes):
        rho_max = -r0 * c + np.sqrt(np.maximum(R * R - r0 * r0 * s * s, 0.0))
        scale = np.minimum(1.0, kappa * rho_max / tmax)  # (n_ang,)
        rho = scale[:, None] * tt[None, :] / kappa
        w = (scale[:, None] * tw[None, :] / kappa) * rho * (2 * math.pi / n_ang)
        x1 = r0 + rho * c[:, None]
        x2 = rho * s[:, None]
        rq = np.minimum(np.hypot(x1, x2), R)
        F, Fp, _ = model.radial_profile(rq)
        dist = np.sqrt(rho * rho + (F - F0[i]) ** 2)
        kv = alpha * np.exp(-kappa * dist) / (4.0 * math.pi * dist) * np.sqrt(1.0 + Fp * Fp) * w
        if m:
            kv = kv * np.cos(m * np.arctan2(x2, x1))
        rq, kv = rq.ravel(), kv.ravel()
        pidx = np.clip(np.searchsorted(edges, rq, side="right") - 1, 0, edges.size - 2)
        for pnl in np.unique(pidx):
            sel = pidx == pnl
            nd = nodes[pnl * order : (pnl + 1) * order]
            A[i, pnl * order : (pnl + 1) * order] += kv[sel] @ _lagrange_rows(rq[sel], nd)
    return RadialBSMatrix(alpha, kappa, m, A, nodes, {"R": R, "panels": edges.size - 1, "n_ang": n_ang, "order": order})


def find_eigenvalues_radial(
    model,
    alpha: float,
    R: float,
    j_max: int = 1,
    m_max: int = 0,
    kappa_min: float | None = None,
    kappa_max: float | None = None,
    xtol: float = 1e-11,
    estimate_error: bool = False,
    **kw,
) -> list[BSEigenvalue]:
    """Eigenvalues of the interaction supported on the disc, merged over ``m <= m_max``.

    Each sector is searched for up to ``j_max`` crossings on
    ``[kappa_min, kappa_max]``; sectors with m >= 1 count twice.  The
    default interval is the one of :func:`find_eigenvalues`.  With
    ``estimate_error`` the solve is repeated with twice the angles and half
    the panel size and the change is stored in ``error``.
    """
    if kappa_min is None:
        kappa_min = alpha / 2 * 1.02
    if kappa_max is None:
        kappa_max = 2.0 * alpha
    found = []
    for m in range(m_max + 1):
        cache: dict[float, np.ndarray] = {}

        def nus(k, m=m, cache=cache):
            if k not in cache:
                cache[k] = assemble_bs_radial(model, alpha, k, R, m, **kw).top(j_max)
            return cache[k]

        lo, hi = nus(kappa_min), nus(kappa_max)
        for j in range(min(j_max, lo.size)):
            if not (lo[j] > 1.0 > hi[j]):
                continue
            n0 = len(cache)
            k = brentq(lambda x: 1.0 / nus(x)[j] - 1.0, kappa_min, kappa_max, xtol=xtol, rtol=4 * np.finfo(float).eps)
            for _ in range(1 if m == 0 else 2):
                found.append((k, float(nus(k)[j] - 1.0), len(cache) - n0))
    found.sort(key=lambda t: -t[0])
    out = [BSEigenvalue(j + 1, k, res, ev) for j, (k, res, ev) in enumerate(found[:j_max])]
    out += [BSEigenvalue(j + 1, None, float("nan"), 0) for j in range(len(out), j_max)]
    if estimate_error:
        fine_kw = dict(kw)
        fine_kw["n_ang"] = 2 * kw.get("n_ang", 128)
        fine_kw["panel"] = kw.get("panel", 0.25) / 2
        fine = find_eigenvalues_radial(model, alpha, R, j_max, m_max, kappa_min, kappa_max, xtol, False, **fine_kw)
        out = [
            BSEigenvalue(e.j, e.kappa, e.nu_residual, e.evaluations, abs(e.eigenvalue - f.eigenvalue))
            if e.present and f.present
            else e
            for e, f in zip(out, fine)
        ]
    return out
