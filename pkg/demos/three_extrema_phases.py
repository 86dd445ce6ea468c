"""
A multi-branched spectrum with a first-order transition
=======================================================

The Hölder exponent of ``ThreeExtremaModel`` has two minima and one
maximum.  The spectrum then splits into four branches; two of them are
stable and intersect, and the overhangs beyond the intersection are
metastable.
"""
import numpy as np

from mbmf.scaling import make_q_grid
from mbmf.spectrum import classify_phases, exponents, segment_branches
from mbmf.synthetic import ThreeExtremaModel

model = ThreeExtremaModel()
print("dalpha/dq roots:", np.round(np.sort(model.dalpha.roots().real), 4))

q = make_q_grid(-4, 4, 0.01)
ex = exponents(q=q, h=model.h(q))
branches = segment_branches(ex)
phases = classify_phases(ex, branches)

for tp in branches.turning_points:
    print(f"{tp.kind:8s} q={tp.q_extr:+.4f} alpha_s={tp.alpha_s:.5f} alpha''={tp.alpha_ddot:+.4f}")
for k, b in enumerate(branches):
    lo, hi = b.alpha_range
    print(f"branch {k}: q {b.q_interval[0]:+.2f}..{b.q_interval[1]:+.2f} alpha {lo:.4f}..{hi:.4f} "
          f"{b.stability}{' (main)' if b.is_main else ''}")

for x in phases.first_order_crossings:
    print(f"crossing of branches {x.branches}: alpha={x.alpha:.10f} f={x.f:.10f}, "
          f"slopes q={x.q_pair[0]:+.4f} and {x.q_pair[1]:+.4f}")
for seg in phases.metastable_segments:
    print(f"metastable: branch {seg['branch']} q {seg['q_lo']:+.3f}..{seg['q_hi']:+.3f}")
print("joins smooth:", branches.smooth, np.round(branches.join_mismatch, 4))
