"""One-dimensional transverse operators of the layer bracketing.

Both operators act on (-d, d) with a delta interaction of strength alpha at
u = 0, i.e. the jump condition ``psi'(0+) - psi'(0-) = -alpha psi(0)``.

``dirichlet_plus``
    Dirichlet walls ``psi(+-d) = 0``.  The even ground state is
    ``sinh(kappa (d - |u|))`` and the jump condition gives
    ``2 kappa coth(kappa d) = alpha``.
``robin_minus``
    Stationary points of the form
    ``int |psi'|^2 - alpha |psi(0)|^2 - D (|psi(d)|^2 + |psi(-d)|^2)``.
    Integrating by parts against a test function leaves the boundary term
    ``[psi' phi]_{-d}^{d} - D (psi(d) phi(d) + psi(-d) phi(-d))``, so the
    natural boundary condition is ``psi'(+-d) = +-D psi(+-d)``.  Matching
    ``cosh(kappa u) + c sinh(kappa |u|)`` gives ``c = -alpha / (2 kappa)`` and
    ``2 kappa (kappa t - D) = alpha (kappa - D t)`` with ``t = tanh(kappa d)``.
    Odd states ``sinh(kappa u)`` do not feel the delta and satisfy
    ``kappa = D tanh(kappa d)``, which has a root iff ``D d > 1``.

The eigenvalue returned is ``-kappa^2`` for the lowest state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .errors import NoBoundState, ValidityViolation

__all__ = [
    "TransverseProblem",
    "kappa_plus",
    "kappa_minus",
    "transverse_form_bound",
    "threshold_gap",
    "fd_eigenvalue",
    "fd_richardson",
    "fit_CN",
    "validate_threshold",
    "TransverseRecord",
    "transverse_sweep",
    "sweep_to_csv",
]

_RTOL = 1e-13


@dataclass(frozen=True)
class TransverseProblem:
    alpha: float
    d: float
    D: float = 0.0
    variant: str = "dirichlet_plus"

    def __post_init__(self):
        if not (self.alpha > 0 and self.d > 0 and self.D >= 0):
            raise ValueError("need alpha > 0, d > 0, D >= 0")
        if self.variant not in ("dirichlet_plus", "robin_minus"):
            raise ValueError(f"unknown variant {self.variant!r}")


def _coth(x):
    return 1.0 / math.tanh(x)


def _root(fun, lo, hi):
    return brentq(fun, lo, hi, xtol=1e-300, rtol=_RTOL, maxiter=500)


def kappa_plus(p: TransverseProblem) -> float:
    """Negative eigenvalue of the Dirichlet transverse operator."""
    a, d = p.alpha, p.d
    if a * d <= 2.0:
        raise NoBoundState(f"alpha d = {a * d:.6g} <= 2: no Dirichlet bound state")

    def F(k):
        return 2.0 * k * _coth(k * d) - a

    lo = max(1e-300, a / 2 - 1.0)
    while F(lo) >= 0:
        lo /= 2.0
    hi = a / 2 + p.D + 1.0
    while F(hi) <= 0:
        hi *= 2.0
    k = _root(F, lo, hi)
    return -k * k


def _even_robin(a, d, D):
    def F(k):
        t = math.tanh(k * d)
        return 2.0 * k * (k * t - D) - a * (k - D * t)

    # F(alpha/2) = -alpha (1 - t)(alpha/2 + D) < 0 and F ~ 2 k^2 for large k;
    # the ground state is the largest root.
    lo = a / 2
    hi = a / 2 + D + 1.0
    while F(hi) <= 0:
        hi *= 2.0
    grid = np.linspace(lo, hi, 2001)
    vals = np.array([F(k) for k in grid])
    sign = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    i = sign[-1]
    if vals[i + 1] == 0.0:
        return float(grid[i + 1])
    return _root(F, grid[i], grid[i + 1])


def _odd_robin(d, D):
    if D * d <= 1.0:
        return None

    def F(k):
        return k - D * math.tanh(k * d)

    return _root(F, 1e-9 / d, D + 1.0)


def kappa_minus(p: TransverseProblem) -> float:
    """Lowest eigenvalue of the Robin transverse operator (even and odd modes)."""
    a, d, D = p.alpha, p.d, p.D
    k_even = _even_robin(a, d, D)
    k_odd = _odd_robin(d, D)
    k = k_even if k_odd is None else max(k_even, k_odd)
    return -k * k


def _one_minus_tanh(x: float) -> float:
    e = math.exp(-2.0 * x)
    return 2.0 * e / (1.0 + e)


def threshold_gap(p: TransverseProblem) -> float:
    """Distance of the transverse eigenvalue from ``-alpha^2/4``, free of cancellation.

    Returns ``kappa_plus + alpha^2/4`` for ``dirichlet_plus`` and
    ``-alpha^2/4 - kappa_minus`` for ``robin_minus``; both are positive.
    Subtracting the eigenvalue from ``alpha^2/4`` loses all digits once the
    gap drops below an ulp of ``alpha^2``, so the gap is rewritten through
    ``1 - tanh(kappa d)``.  Dirichlet: ``kappa = (alpha/2) tanh(kappa d)``.
    Robin, even mode: ``(2 kappa - alpha)(kappa - D) = (1 - t)(2 kappa^2 + alpha D)``.
    """
    a, d, D = p.alpha, p.d, p.D
    if p.variant == "dirichlet_plus":
        k = math.sqrt(-kappa_plus(p))
        return 0.5 * a * _one_minus_tanh(k * d) * (0.5 * a + k)
    k_even = _even_robin(a, d, D)
    k_odd = _odd_robin(d, D)
    if k_odd is not None and k_odd > k_even:
        return k_odd * k_odd - a * a / 4.0
    k = k_even
    if abs(k - D) < 0.1 * k:
        return k * k - a * a / 4.0
    q = _one_minus_tanh(k * d) * (2.0 * k * k + a * D) / (2.0 * (k - D))
    return q * (k + 0.5 * a)


def transverse_form_bound(alpha: float, d: float, C_N: float = 2.0) -> float:
    """Essential-spectrum threshold ``-alpha^2/4 - C_N alpha^2 exp(-alpha d / 2)``."""
    return -(alpha**2) / 4.0 - C_N * alpha**2 * math.exp(-alpha * d / 2.0)


def fit_CN(points) -> float:
    """Smallest C_N with ``-alpha^2/4 - kappa_minus <= C_N alpha^2 exp(-alpha d/2)``.

    ``points`` is an iterable of (alpha, d, D).
    """
    c = 0.0
    for a, d, D in points:
        gap = threshold_gap(TransverseProblem(a, d, D, "robin_minus"))
        c = max(c, gap / (a**2 * math.exp(-a * d / 2.0)))
    return c


def validate_threshold(points, C_N: float = 2.0) -> None:
    """Raise ValidityViolation if ``transverse_form_bound > kappa_minus`` at any (alpha, d, D)."""
    for a, d, D in points:
        km = kappa_minus(TransverseProblem(a, d, D, "robin_minus"))
        eps = transverse_form_bound(a, d, C_N)
        if eps > km:
            raise ValidityViolation(
                f"threshold {eps:.12g} above kappa_minus {km:.12g} at alpha={a}, d={d}, D={D}"
            )


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------


def fd_eigenvalue(p: TransverseProblem, n_half: int) -> float:
    """Lowest eigenvalue of the three-point discretization with 2*n_half cells.

    The delta sits on the centre node and contributes ``-alpha / h`` to the
    diagonal.  Robin ends use half-cell lumped mass and a ``-D`` boundary
    term, which is the second-order ghost-point scheme.
    """
    h = p.d / n_half
    n = 2 * n_half + 1
    diag = np.full(n, 2.0 / h)
    off = np.full(n - 1, -1.0 / h)
    mass = np.full(n, h)
    diag[n_half] -= p.alpha
    if p.variant == "dirichlet_plus":
        diag, off, mass = diag[1:-1], off[1:-1], mass[1:-1]
    else:
        diag[0] = diag[-1] = 1.0 / h - p.D
        mass[0] = mass[-1] = h / 2
    s = 1.0 / np.sqrt(mass)
    w = eigh_tridiagonal(diag * s * s, off * s[:-1] * s[1:], eigvals_only=True, select="i", select_range=(0, 0))
    return float(w[0])


def fd_richardson(p: TransverseProblem, n_half: int | None = None, levels: int = 4) -> tuple[float, float]:
    """Romberg extrapolation of :func:`fd_eigenvalue` over grid halvings.

    The three-point scheme has an error expansion in even powers of h, so
    ``levels`` halvings starting from ``n_half`` cells per side remove the
    terms up to ``h^(2 levels - 2)``.  Very fine grids are avoided on purpose:
    at ~1e5 nodes the tridiagonal eigenvalue already carries ~1e-8 relative
    rounding error.  Returns ``(value, error_estimate)`` where the estimate is
    the change from the last-but-one extrapolation column.
    """
    if n_half is None:
        n_half = max(128, int(math.ceil(2.5 * p.alpha * p.d)))
    col = [fd_eigenvalue(p, n_half * 2**i) for i in range(levels)]
    prev_best = col[-1]
    for j in range(1, levels):
        f = 4.0**j
        col = [(f * col[i + 1] - col[i]) / (f - 1) for i in range(len(col) - 1)]
        if j < levels - 1:
            prev_best = col[-1]
    return col[-1], abs(col[-1] - prev_best)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransverseRecord:
    alpha: float
    d: float
    D: float
    kappa_minus: float
    kappa_plus: float
    threshold: float
    plus_window: float
    minus_window: float
    """``plus_window = kappa_plus + alpha^2/4`` and ``minus_window = -alpha^2/4 - kappa_minus``,
    both from :func:`threshold_gap`."""

    @property
    def scale(self) -> float:
        return self.alpha**2 * math.exp(-self.alpha * self.d / 2)


def transverse_sweep(alphas, ds, D, C_N: float = 2.0) -> list[TransverseRecord]:
    """Evaluate both transverse eigenvalues on the tensor grid alphas x ds.

    ``D`` is a constant or a callable ``D(d)``.  Points without a Dirichlet
    bound state are skipped.
    """
    out = []
    for a in alphas:
        for d in ds:
            Dd = D(d) if callable(D) else float(D)
            try:
                kp = kappa_plus(TransverseProblem(a, d, Dd, "dirichlet_plus"))
            except NoBoundState:
                continue
            pm = TransverseProblem(a, d, Dd, "robin_minus")
            out.append(
                TransverseRecord(
                    a, d, Dd, kappa_minus(pm), kp, transverse_form_bound(a, d, C_N),
                    threshold_gap(TransverseProblem(a, d, Dd, "dirichlet_plus")), threshold_gap(pm),
                )
            )
    return out


def sweep_to_csv(records, path) -> None:
    from .io import write_csv

    write_csv(
        path,
        "transverse",
        {
            "alpha": [r.alpha for r in records],
            "d": [r.d for r in records],
            "D_d": [r.D for r in records],
            "kappa_minus": [r.kappa_minus for r in records],
            "kappa_plus": [r.kappa_plus for r in records],
            "epsilon": [r.threshold for r in records],
            "plus_window": [r.plus_window for r in records],
            "minus_window": [r.minus_window for r in records],
        },
    )
