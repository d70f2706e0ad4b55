"""Active learning with surrogate losses.

Modules
-------
losses
    Margin losses, conditional risks and calibration transforms.
classes
    Function classes, ERM and version spaces.
complexity
    Rademacher-type estimates and update thresholds.
learners
    The disagreement-based active learner and passive ERM.
synth
    Synthetic problems and disagreement coefficients.
oracle
    Brute-force references.
bench
    Configured campaigns, budget sweeps and CSV output.
"""

__version__ = "0.1.0"

from .losses import (LossKind, SurrogateLoss, capital_psi, capital_psi_inverse, make_loss, psi,
                     psi_tilde)
from .classes import (FiniteClass, LinearBallClass, MonotoneGridClass, RiskConstraint,
                      VersionSpace, constrained_min_risk, dis_contains, erm)
from .complexity import LabeledBatch, ThresholdParams
from .learners import TrialRecord, run_algorithm1, run_erm_passive
from .synth import Problem, make_monotone, make_threshold_tsybakov, make_two_point

__all__ = [
    "LossKind", "SurrogateLoss", "make_loss", "psi", "psi_tilde", "capital_psi",
    "capital_psi_inverse", "FiniteClass", "MonotoneGridClass", "LinearBallClass",
    "RiskConstraint", "VersionSpace", "erm", "constrained_min_risk", "dis_contains",
    "LabeledBatch", "ThresholdParams", "TrialRecord", "run_algorithm1", "run_erm_passive",
    "Problem", "make_two_point", "make_threshold_tsybakov", "make_monotone",
]
