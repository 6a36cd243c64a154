"""One-point densities of annihilating systems started from a density class.

Constant profiles give 2 lam (1 - lam) / sqrt(pi t), largest at lam = 1/2.
A profile that is almost 1 on the left and almost 0 on the right does
better at the origin: the interface of the step profile is a single
motion, whose density at 0 is 1/sqrt(2 pi t) > 1/(2 sqrt(pi t)).  The
last part estimates the 1/2 case by simulation through two routes.
"""

import math
from fractions import Fraction

from abmlab import (
    DensityProfile,
    DensityQuery,
    RngStream,
    constant_profile,
    density1_quadrature,
    density_maximal_mc,
    density_mc,
    homogeneous_density,
)

if __name__ == "__main__":
    print("lam     quadrature   closed form")
    for lam in (0.1, 0.25, 0.5):
        print(f"{lam:<7} {density1_quadrature(constant_profile(lam), 1.0, 0.0):.6f}     {homogeneous_density(lam, 1.0):.6f}")

    print("\nprofile eps + (1 - 2 eps) 1(x < 0) at the origin")
    for eps in (0.2, 0.1, 0.05, 0.0):
        u = DensityProfile((0.0,), (1 - eps, eps))
        print(f"eps = {eps:<5} {density1_quadrature(u, 1.0, 0.0):.6f}")
    print(f"constant 1/2  {1 / (2 * math.sqrt(math.pi)):.6f}")

    half = constant_profile(Fraction(1, 2))
    stream = RngStream(3, 0)
    fwd = density_mc(DensityQuery(half, 1.0, (0.0,)), stream.spawn("fwd"), 4000)
    sep = density_maximal_mc((0.0,), 1.0, (0.4, 0.2, 0.1), stream.spawn("sep"), 4000)
    print("\nsimulated density of [1/2] at the origin, t = 1")
    for name, res in (("forward particles", fwd), ("dual separation", sep)):
        per = ", ".join(f"{e.mean:.4f}" for e in res.per_eps)
        print(f"{name:<18} per eps ({per}) -> {res.mean:.4f} +- {res.std_error:.4f}")
