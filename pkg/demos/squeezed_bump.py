"""Squeezed square well on the bump versus the direct eigenvalue at alpha = 60 (about a minute)."""

import math

from deltasurf import find_eigenvalues_radial, gaussian_bump
from deltasurf.squeezed import SqueezeProblem, solve_squeezed, square_profile, well_eigenvalue


def main():
    a, R = 60.0, 6.0
    model = gaussian_bump()
    ref = find_eigenvalues_radial(model, a, R, kappa_min=math.sqrt(a * a / 4 - 5))[0].eigenvalue
    print(f"direct: lambda + alpha^2/4 = {ref + a * a / 4:.8f}")
    prof = square_profile(a)
    for d in (0.0125, 0.00625):
        res = solve_squeezed(model, SqueezeProblem(prof, d, 7.0, support_radius=R))
        lam = res.eigenvalues[0]
        print(
            f"d = {d:g}: lambda_1 = {lam:.4f}, gap {abs(lam - ref):.4f}, "
            f"minus flat well {lam - well_eigenvalue(prof, d):.5f} (+- {res.residuals[0]:.2f})"
        )


if __name__ == "__main__":
    main()
