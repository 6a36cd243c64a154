"""Dense initial configurations and the profile classes they approach.

Alternating colours between the points of Z/n pair against a test
function like the constant 1/2.  Doubling each point at distance 1/(4n)
gives 1/4 (or 3/4; the class does not distinguish them), and doubling at
distance n**-2 gives 0.  The gaps below are exact rational numbers.
"""

from fractions import Fraction

from abmlab import hat_function, vague_limit_check

PHI = hat_function(0, 1)

if __name__ == "__main__":
    ns = [2, 4, 8, 16, 32, 64]
    print("n     " + "  ".join(f"{n:>8}" for n in ns))
    for kind, lim in (("lattice", Fraction(1, 2)), ("quarter", Fraction(1, 4)), ("paired", 0)):
        rep = vague_limit_check(kind, PHI, lim, ns)
        print(f"{kind:<7} " + "  ".join(f"{str(g):>8}" for g in rep.gaps))
