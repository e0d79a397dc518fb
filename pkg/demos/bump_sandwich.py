"""Two-sided bounds and the direct eigenvalue for the Gaussian bump at a few couplings."""

import math

from deltasurf import build_geometry, find_eigenvalues_radial, gaussian_bump, sandwich

R = 6.0


def main():
    model = gaussian_bump()
    geom = build_geometry(model, R, 0.1, scale_guard=None)
    alphas = [40.0, 60.0, 100.0]
    rep = sandwich(geom, alphas, disc_radius=R)
    for a in alphas:
        e = find_eigenvalues_radial(model, a, R, kappa_min=math.sqrt(a * a / 4 - 5))[0]
        rep.attach_direct(a, [e.eigenvalue])
    print(f"reference mu_1 on the disc: {rep.rows[0].mu:.8f}")
    for r in rep.rows:
        s = r.alpha**2 / 4
        print(
            f"alpha {r.alpha:5g}: lower {r.lower + s:9.4f}  direct {r.direct + s:.8f}  "
            f"upper {r.upper + s:9.4f}  inside {r.contains_direct()}"
        )


if __name__ == "__main__":
    main()
