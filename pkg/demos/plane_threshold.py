"""On a flat disc the direct solver finds no eigenvalue below -alpha^2/4; nu = 1 sits at kappa = alpha/2."""

from deltasurf import find_eigenvalues_radial, plane


def main():
    for a in (10.0, 50.0):
        strict = find_eigenvalues_radial(plane(), a, 6.0)[0]
        loose = find_eigenvalues_radial(plane(), a, 6.0, kappa_min=a / 4)[0]
        print(
            f"alpha {a:g}: below -1.02 alpha^2/4: {strict.present}; crossing kappa = {loose.kappa:.6f} "
            f"(alpha/2 = {a / 2:g}, relative offset {abs(loose.kappa - a / 2) / (a / 2):.2e})"
        )


if __name__ == "__main__":
    main()
