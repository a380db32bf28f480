"""Tour of the norm balls and their linear minimization oracles.

For each norm kind we draw a random input, ask the oracle for the minimizer of
<s, x> over the radius-rho ball, and verify the two defining facts numerically:
the output sits on the ball boundary, and it pairs with the input as
<s, lmo(s)> = -rho * dual_norm(s).
"""

import numpy as np

from lmopt import NormKind, NormSpec, dual_norm, lmo, op_norm, rng_gaussian, sharp_op

rho = 1.5
print(f"{'kind':14s} {'norm(lmo)':>10s} {'radius':>7s} {'pairing':>11s} {'-rho*dual':>11s}")
for kind in NormKind:
    if kind in (NormKind.EUCLIDEAN_VEC, NormKind.MAX_VEC, NormKind.RMS_VEC):
        spec = NormSpec.vector(kind, 6, radius=rho)
        s = rng_gaussian(6, 1, seed=len(kind.value))[:, 0]
    else:
        spec = NormSpec(kind, rho, d_out=5, d_in=3)
        s = rng_gaussian(5, 3, seed=len(kind.value))
    out = lmo(s, spec)
    print(
        f"{kind.value:14s} {op_norm(out, spec):10.6f} {rho:7.3f}"
        f" {float(np.vdot(s, out)):11.6f} {-rho * dual_norm(s, spec):11.6f}"
    )

# Scale invariance: the oracle only reads the direction of its input.
spec = NormSpec(NormKind.SPECTRAL, 1.0, 4, 4)
s = rng_gaussian(4, 4, seed=7)
drift = max(float(np.max(np.abs(lmo(a * s, spec) - lmo(s, spec)))) for a in (0.5, 2, 10))
print(f"\nmax |lmo(a*s) - lmo(s)| over a in {{0.5, 2, 10}}: {drift:.2e}")

# The sharp operator, by contrast, scales linearly and squares the dual norm.
v = np.array([2.0, -1.0])
vspec = NormSpec.vector(NormKind.MAX_VEC, 2)
print(f"sharp([2, -1]) on the max-norm ball = {sharp_op(v, vspec)}  "
      f"(<s, sharp(s)> = {float(v @ sharp_op(v, vspec)):.1f} = dual^2 = {dual_norm(v, vspec)**2:.1f})")
