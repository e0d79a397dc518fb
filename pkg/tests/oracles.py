"""Independent reference computations used by the tests.

Nothing here calls into the package's solvers; each oracle uses a
different formula or discretization than the code it checks.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import jn_zeros


def bump_curvatures(r, h=1.0, w=1.0):
    """Meridian and parallel curvatures of ``h exp(-r^2 / 2 w^2)`` from the profile formulas.

    ``k_r = F'' / (1 + F'^2)^{3/2}`` and ``k_theta = F' / (r (1 + F'^2)^{1/2})``
    with the upward normal.
    """
    r = np.asarray(r, dtype=float)
    F = h * np.exp(-(r**2) / (2 * w * w))
    Fp = -r / (w * w) * F
    Fpp = (r * r / w**4 - 1 / (w * w)) * F
    q = 1.0 + Fp * Fp
    kr = Fpp / q**1.5
    with np.errstate(invalid="ignore", divide="ignore"):
        kt = np.where(r > 0, Fp / (r * np.sqrt(q)), -h / (w * w))
    return kr, kt


def box_eigenvalue(L: float, n1: int = 1, n2: int = 1) -> float:
    """Dirichlet Laplacian on the square (-L, L)^2."""
    return (math.pi / (2 * L)) ** 2 * (n1 * n1 + n2 * n2)


def disc_eigenvalue(R: float, m: int = 0, n: int = 1) -> float:
    """Dirichlet Laplacian on the disc of radius R, mode (m, n)."""
    return float(jn_zeros(m, n)[-1] / R) ** 2


def fd_well(potential, half: float, h: float) -> float:
    """Lowest eigenvalue of ``-psi'' + V psi`` on (-half, half) with Dirichlet ends, three-point scheme."""
    n = int(round(2 * half / h))
    x = np.linspace(-half, half, n + 1)[1:-1]
    hh = 2 * half / n
    w = eigh_tridiagonal(2 / hh**2 + potential(x), -np.ones(x.size - 1) / hh**2, eigvals_only=True, select="i", select_range=(0, 0))
    return float(w[0])


def fd_well_extrapolated(potential, half: float, h: float) -> float:
    """Second-order Richardson of :func:`fd_well` over h and h/2."""
    a = fd_well(potential, half, h)
    b = fd_well(potential, half, h / 2)
    return (4 * b - a) / 3


def delta_line_dirichlet(alpha: float, d: float) -> float:
    """``-psi'' - alpha delta psi`` on (-d, d), Dirichlet: bisection on ``2 k coth(k d) = alpha``."""
    lo, hi = 1e-12, alpha
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 2 * mid / math.tanh(mid * d) - alpha < 0:
            lo = mid
        else:
            hi = mid
    k = 0.5 * (lo + hi)
    return -k * k


def delta_line_robin(alpha: float, d: float, D: float) -> float:
    """Lowest eigenvalue of the Robin transverse problem by bisection on the shooting residual.

    The even branch shoots ``psi = cosh(k u) - alpha / (2 k) sinh(k u)`` from the
    delta to u = d and requires ``psi'(d) = D psi(d)``; the odd branch uses
    ``sinh(k u)``.  The largest root k of either branch gives ``-k^2``.
    """

    def even(k):
        psi = math.cosh(k * d) - alpha / (2 * k) * math.sinh(k * d)
        dpsi = k * math.sinh(k * d) - alpha / 2 * math.cosh(k * d)
        return (dpsi - D * psi) / math.cosh(k * d)

    def odd(k):
        return (k * math.cosh(k * d) - D * math.sinh(k * d)) / math.cosh(k * d)

    def largest_root(f, hi):
        ks = np.linspace(1e-9, hi, 20001)
        vals = [f(k) for k in ks]
        best = None
        for i in range(len(ks) - 1):
            if vals[i] == 0 or vals[i] * vals[i + 1] < 0:
                lo, up = ks[i], ks[i + 1]
                for _ in range(200):
                    mid = 0.5 * (lo + up)
                    if f(lo) * f(mid) <= 0:
                        up = mid
                    else:
                        lo = mid
                best = 0.5 * (lo + up)
        return best

    top = 2 * (alpha + D) + 1
    roots = [r for r in (largest_root(even, top), largest_root(odd, top)) if r is not None]
    k = max(roots)
    return -k * k


def square_cell_green_integral(side: float, kappa: float) -> float:
    """``int exp(-kappa r) / (4 pi r) dA`` over a centred square, exact in polar form.

    Eight congruent triangles, each ``int_0^{pi/4} (1 - exp(-kappa a / cos t)) / kappa dt``
    with ``a = side / 2``.
    """
    from scipy.integrate import quad

    a = side / 2
    val = quad(lambda t: -math.expm1(-kappa * a / math.cos(t)) / kappa, 0.0, math.pi / 4, epsabs=1e-15, epsrel=1e-13)[0]
    return 8.0 * val / (4.0 * math.pi)
