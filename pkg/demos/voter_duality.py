"""Forward and backward views of the same question.

Start the continuum voter model from the constant profile 1/2 and ask
whether the colours at 0 and 1 agree at time 1.  Forward: run the
annihilating interfaces from a fine alternating lattice and count them in
[0, 1].  Backward: run two coalescing motions from 0 and 1 and give each
surviving cluster an independent fair mark.  Both give
c + (1 - c)/2 with c the meeting probability.
"""

from fractions import Fraction

from abmlab import (
    DualityQuery,
    RngStream,
    closed_form_match,
    constant_profile,
    lhs_parity,
    rhs_match,
    verdict,
)

HALF = constant_profile(Fraction(1, 2))

if __name__ == "__main__":
    stream = RngStream(7, 0)
    forward = lhs_parity(DualityQuery(HALF, 1.0, (0.0, 1.0), "PARITY"), stream.spawn("fwd"), 3000)
    backward = rhs_match(DualityQuery(HALF, 1.0, (0.0, 1.0), "MATCH"), stream.spawn("bwd"), 3000)
    print(f"closed form        {closed_form_match(0.5, 1.0, 1.0):.4f}")
    print(f"even interfaces    {forward.mean:.4f} +- {forward.std_error:.4f}  (mesh {forward.extra['mesh']:.4g})")
    print(f"matching marks     {backward.mean:.4f} +- {backward.std_error:.4f}")
    v = verdict(forward, backward)
    print(f"z = {v.z:+.2f}, {'consistent' if v.passed else 'inconsistent'} at alpha = {v.alpha}")
