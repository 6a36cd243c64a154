"""Keeping every other particle halves the density.

Thin the annihilating system from the class 1/2 by a fair choice between
the odd- and even-ranked particles.  The one-point density is
1/(4 sqrt(pi t)); the formula route samples the conditioned pair law
directly and carries no epsilon bias.
"""

import math
from fractions import Fraction

from abmlab import DensityQuery, RngStream, constant_profile, thinned_density_formula, thinned_density_mc

if __name__ == "__main__":
    half = constant_profile(Fraction(1, 2))
    stream = RngStream(11, 0)
    target = 1 / (4 * math.sqrt(math.pi))
    mc = thinned_density_mc(DensityQuery(half, 1.0, (0.0,)), stream.spawn("mc"), 4000)
    formula = thinned_density_formula(half, 1.0, (0.0,), stream=stream.spawn("formula"), replicas=20000)
    print(f"target         {target:.5f}")
    print(f"thinned runs   {mc.mean:.5f} +- {mc.std_error:.5f}")
    print(f"pair formula   {formula.mean:.5f} +- {formula.std_error:.5f}")
