"""Active versus passive label cost on the two-point problem.

The problem puts mass 1 - 2*eps0 on a point where the target and its rival
agree and 2*eps0 on a point where they differ.  Passive ERM must wait for
draws from the second point, so its label count grows like 1/eps.  The
active learner only asks for labels there and stops needing new ones once
its version space has settled.

    python demos/two_point_separation.py [trials]
"""

import sys

from surrogate_al.bench import sweep, sweep_to_csv, two_point_preset
from surrogate_al.config import ExperimentConfig

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 20
cfg = ExperimentConfig().with_values({**two_point_preset(), "experiment.mode": "both",
                                      "experiment.trials": trials})
cells = sweep(cfg)
print(sweep_to_csv(cells), end="")

by = {(c.method, c.eps): c.budget_found for c in cells}
eps = cfg["sweep.eps"]
for method in ("passive", "active"):
    lo, hi = by[(method, eps[0])], by[(method, eps[-1])]
    if lo and hi:
        print(f"{method}: {lo} -> {hi} labels, ratio {hi / lo:.1f}")
