"""One active run on a monotone class, traced update by update.

The learner works through the unlabeled stream in doubling blocks.  At the
end of each block it tightens the version space and we print how much of
the input space is still in disagreement, which is where labels are spent.

    python demos/monotone_active.py [seed]
"""

import sys

from surrogate_al import MonotoneGridClass, ThresholdParams, make_loss, make_monotone
from surrogate_al import run_algorithm1, run_erm_passive

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
problem = make_monotone()
fclass = MonotoneGridClass(32)
loss = make_loss("quadratic")
params = ThresholdParams("strong_convexity", scale=0.05)

h, rec = run_algorithm1(problem, fclass, loss, 2 ** 15, 2 ** 12, params, seed)
print(f"{'m':>6} {'labels':>6} {'budget':>9} {'dis mass':>8}")
for r in rec.updates:
    print(f"{r.m:6d} {r.q:6d} {r.budget:9.4f} {r.dis_mass:8.3f}")
print(f"active:  {rec.labels_used} labels, {rec.unlabeled_used} unlabeled, "
      f"excess error {rec.final_excess_error:.4f}")

_, prec = run_erm_passive(problem, fclass, loss, rec.labels_used, seed)
print(f"passive: {prec.labels_used} labels, excess error {prec.final_excess_error:.4f}")
