"""Coordinate check: after one update, per-coordinate preactivation changes should
not depend on the network width.

The operator-norm geometry makes each layer's update carry the right dimension
scaling automatically, so the RMS of the preactivation change sits near the stepsize
gamma at every layer and every width. That is the property that lets a stepsize
tuned on a narrow model be reused on a wide one.
"""

from lmopt.experiments import coordinate_check, coordinate_check_ratios

gamma = 0.01
widths = [32, 128, 512]
rows = coordinate_check(widths, depth=3, gamma=gamma, seed=0, samples=8)

print(f"stepsize gamma = {gamma}")
print(f"{'width':>6s} {'layer':>5s} {'rms d(preact)':>14s} {'x gamma':>8s}")
for r in rows:
    print(f"{r.width:6d} {r.layer:5d} {r.rms_dpreact:14.6f} {r.rms_dpreact / gamma:8.3f}")

print("\nmax/min ratio across widths per layer (1 = perfectly invariant):")
for layer, ratio in sorted(coordinate_check_ratios(rows).items()):
    print(f"  layer {layer}: {ratio:.4f}")
