"""The update-rule family and the exact identities connecting its members.

Three rearrangements of the same averaged-direction method produce bit-near-identical
trajectories: the momentum-accumulator form (scale invariance of the lmo), the
weight-decay form (a constrained run on an inflated ball in disguise), and the
two-buffer form that stores only one gradient-shaped buffer. The constrained method
caps the composite parameter norm at 1 while the unconstrained one grows it by at
most the stepsize sum.
"""

import numpy as np

from lmopt import (
    Algo,
    LayerNorms,
    ModelNormSpec,
    NormKind,
    NormSpec,
    OptimizerState,
    composite_norm,
    derive_seed,
    muon_step,
    rng_gaussian,
    scg_step,
    scion_light_update,
    uscg_step,
    uscg_wd_step,
)

spec = ModelNormSpec(layers=(
    LayerNorms(NormSpec(NormKind.SPECTRAL, 1.0, 8, 6)),
    LayerNorms(NormSpec(NormKind.SIGN, 0.5, 4, 4)),
))


def fresh(seed, scale=1.0):
    return [scale * rng_gaussian(8, 6, derive_seed(seed, 0)),
            scale * rng_gaussian(4, 4, derive_seed(seed, 1))]


steps, gamma, beta = 100, 0.02, 0.9
stream = [fresh(1000 + k) for k in range(steps)]

# 1) momentum accumulator == averaged direction with alpha = 1 - beta
xa, xb = fresh(1), fresh(1)
sa, sb = OptimizerState.init(xa), OptimizerState.init(xb, algo=Algo.MUON_PLAIN)
for g in stream:
    xa = uscg_step(xa, sa, g, gamma, 1.0 - beta, spec)
    xb = muon_step(xb, sb, g, gamma, beta, False, spec)
gap = max(float(np.max(np.abs(a - b))) for a, b in zip(xa, xb))
print(f"accumulator vs averaged-direction, {steps} steps: max gap {gap:.2e}")

# 2) weight decay mu == constrained method on radius/mu with stepsize gamma*mu
mu = 0.5
inflated = ModelNormSpec(layers=tuple(
    LayerNorms(NormSpec(ln.weight.kind, ln.weight.radius / mu,
                        ln.weight.d_out, ln.weight.d_in))
    for ln in spec.layers
))
xa, xb = fresh(2, scale=0.05), fresh(2, scale=0.05)
sa = OptimizerState.init(xa, algo=Algo.USCG_WD, wd_mu=mu)
sb = OptimizerState.init(xb, algo=Algo.SCG)
for g in stream:
    xa = uscg_wd_step(xa, sa, g, gamma, 0.15, mu, spec)
    xb = scg_step(xb, sb, g, gamma * mu, 0.15, inflated)
gap = max(float(np.max(np.abs(a - b))) for a, b in zip(xa, xb))
print(f"weight-decay vs inflated-ball constrained run:  max gap {gap:.2e}")

# 3) two-buffer form: accumulate, step, decay; one auxiliary buffer total
xa, xb = fresh(3), fresh(3)
sa = OptimizerState.init(xa)
gbuf = [np.zeros_like(p) for p in xb]
for g in stream:
    xa = uscg_step(xa, sa, g, gamma, 0.1, spec)
    for bi, gi in zip(gbuf, g):
        bi += gi
    xb, gbuf = scion_light_update(xb, gbuf, gamma, 0.1, spec)
gap = max(float(np.max(np.abs(a - b))) for a, b in zip(xa, xb))
print(f"two-buffer vs averaged-direction form:          max gap {gap:.2e}")

# 4) norm control: the constrained method never leaves the unit composite ball
from lmopt import model_lmo

x_con = model_lmo(fresh(4), spec)   # boundary start
x_unc = [p.copy() for p in x_con]
s_con = OptimizerState.init(x_con, algo=Algo.SCG)
s_unc = OptimizerState.init(x_unc)
gamma_sum = 0.0
for g in stream:
    x_con = scg_step(x_con, s_con, g, 0.05, 0.3, spec)
    x_unc = uscg_step(x_unc, s_unc, g, 0.05, 0.3, spec)
    gamma_sum += 0.05
print(f"\nafter {steps} steps: constrained composite norm = "
      f"{composite_norm(x_con, spec):.4f} (stays <= 1)")
print(f"unconstrained composite norm = {composite_norm(x_unc, spec):.4f} "
      f"(<= 1 + sum of gammas = {1 + gamma_sum:.1f})")
