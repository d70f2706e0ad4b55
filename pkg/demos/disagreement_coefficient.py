"""Disagreement coefficients of a few class/problem pairs.

theta measures how fast the region where near-optimal functions disagree
shrinks with their distance to the target.  Threshold-like classes have
small theta, which is what lets the active learner spend few labels.

    python demos/disagreement_coefficient.py
"""

import numpy as np

from surrogate_al import LinearBallClass, MonotoneGridClass, make_loss, make_monotone
from surrogate_al import make_threshold_tsybakov, make_two_point
from surrogate_al.synth import estimate_disagreement_coefficient, two_point_class

quad = make_loss("quadratic")
two = make_two_point()
cases = [
    ("two-point", two, two_point_class(two, quad), 0.01),
    ("monotone grid, eta(x)=x", make_monotone(), MonotoneGridClass(32), 0.01),
    ("monotone grid, tsybakov a=.5", make_threshold_tsybakov(0.4, 0.5), MonotoneGridClass(64),
     0.005),
    ("affine 1-d, tsybakov a=1", make_threshold_tsybakov(0.5, 1.0),
     LinearBallClass(1, affine=True), 0.05),
]
for name, problem, fclass, r0 in cases:
    theta, se = estimate_disagreement_coefficient(problem, fclass, quad, r0, return_se=True,
                                                  rng=np.random.default_rng(0))
    note = f" (+/- {se:.2f})" if se else ""
    print(f"{name:30s} r0={r0:<6} theta={theta:.3f}{note}")
