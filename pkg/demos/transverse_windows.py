"""Transverse eigenvalues on both sides of -alpha^2/4 and their finite-difference check."""

import math

from deltasurf.transverse import TransverseProblem, fd_richardson, kappa_minus, kappa_plus


def main():
    print(f"{'alpha':>6} {'d':>5} {'kappa+ + a^2/4':>16} {'kappa- + a^2/4':>16} {'FD rel. err':>12}")
    for a in (20.0, 80.0, 320.0):
        for d in (0.4, 1.0):
            D = 2 * (1 + d)
            pp, pm = TransverseProblem(a, d), TransverseProblem(a, d, D, "robin_minus")
            kp, km = kappa_plus(pp), kappa_minus(pm)
            fd = fd_richardson(pm)[0]
            print(f"{a:6g} {d:5g} {kp + a * a / 4:16.6e} {km + a * a / 4:16.6e} {abs(fd - km) / abs(km):12.2e}")
    print("window scale alpha^2 exp(-alpha d / 2) at alpha = 20, d = 0.4:", 400 * math.exp(-4.0))


if __name__ == "__main__":
    main()
