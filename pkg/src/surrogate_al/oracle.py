"""Brute-force references for small discrete scenarios.

Everything here is exact enumeration with hard size caps; nothing falls
back to sampling.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._batch import LabeledBatch
from .classes import FiniteClass, GridFunction, RiskConstraint, VersionSpace, as_batch, sign
from .losses import LossKind, SurrogateLoss, eval_loss

__all__ = [
    "MAX_OUTCOMES",
    "EnumerationTooLarge",
    "DiscreteScenario",
    "exact_phi",
    "exact_gamma_transform",
    "brute_erm",
    "brute_members",
    "brute_dis",
    "UNBOUNDED",
    "random_monotone_instance",
    "random_finite_version_space",
]

MAX_OUTCOMES = 10 ** 6
MAX_MONOTONE_SAMPLES = 8
UNBOUNDED = math.inf


class EnumerationTooLarge(ValueError):
    """The requested enumeration exceeds the configured cap."""


@dataclass(frozen=True, eq=False)
class DiscreteScenario:
    """A finite class on a discrete problem, with a loss and a sample size."""

    fclass: object
    problem: object
    loss: SurrogateLoss
    m: int = 1

    def __post_init__(self):
        if self.fclass.kind != "finite" or not self.problem.discrete:
            raise ValueError("a scenario needs a finite class and a discrete problem")


def _outcome_table(scenario):
    """Probabilities and per-member losses of every single labeled draw."""
    p, e = scenario.problem.masses, scenario.problem.eta_values
    probs = np.concatenate([p * e, p * (1.0 - e)])
    tab = scenario.fclass.table
    losses = np.hstack([eval_loss(scenario.loss, tab), eval_loss(scenario.loss, -tab)])
    return probs, np.asarray(losses, dtype=float)


def exact_phi(scenario: DiscreteScenario, m: int | None = None) -> float:
    """Expected sup over pairs of the gap between true and empirical risk differences.

    The expectation runs over all ``(2 * atoms) ** m`` ordered samples.
    """
    m = scenario.m if m is None else int(m)
    probs, losses = _outcome_table(scenario)
    n_out = len(probs)
    if n_out ** m > MAX_OUTCOMES:
        raise EnumerationTooLarge(f"{n_out}^{m} outcomes exceeds {MAX_OUTCOMES}")
    true_risk = losses @ probs
    if len(true_risk) == 1:
        return 0.0
    grids = np.indices((n_out,) * m).reshape(m, -1)
    weight = np.prod(probs[grids], axis=0)
    emp = losses[:, grids].mean(axis=1)
    gap = true_risk[:, None] - emp
    return float(weight @ (gap.max(axis=0) - gap.min(axis=0)))


def exact_gamma_transform(scenario: DiscreteScenario, loss: SurrogateLoss | None, eps: float) -> float:
    """Largest surrogate excess that still forces excess error at most ``eps``, on the class.

    Returns the smallest excess surrogate risk among members whose excess
    error exceeds ``eps``, or ``UNBOUNDED`` when there is none.
    """
    loss = scenario.loss if loss is None else loss
    prob = scenario.problem
    best = UNBOUNDED
    for h in scenario.fclass.members:
        if prob.excess_error(h) > eps:
            best = min(best, prob.excess_surrogate(h, loss))
    return best


def brute_members(vspace) -> list:
    """Feasible members by direct evaluation of every constraint, one function at a time."""
    cls = vspace.function_class
    out = []
    for h in cls.members:
        ok = True
        for con in vspace.constraints:
            b = con.batch
            risk = 0.0
            for x, y in zip(b.xs, b.ys):
                risk += float(eval_loss(vspace.loss, float(h(int(x))) * y))
            if len(b) and risk / len(b) > con.budget + 1e-9:
                ok = False
                break
        if ok:
            out.append(h)
    return out


def brute_dis(vspace, x) -> bool:
    """Disagreement at ``x`` by enumeration of the feasible members."""
    signs = {float(sign(h(int(x)))) for h in brute_members(vspace)}
    return len(signs) == 2


def _monotone_brute(fclass, batch):
    cells = fclass.cell_of(batch.xs)
    occ = np.unique(cells)
    n = np.array([np.sum(cells == c) for c in occ], dtype=float)
    d = np.array([np.sum(batch.ys[cells == c]) for c in occ])
    k = len(occ)
    best, best_val = None, np.inf
    # every split of the occupied cells into contiguous blocks
    for cuts in itertools.product((False, True), repeat=k - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [k]
        vals = np.empty(k)
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            vals[lo:hi] = np.clip(d[lo:hi].sum() / n[lo:hi].sum(), -fclass.f_bar, fclass.f_bar)
        if np.any(np.diff(vals) < 0):
            continue
        risk = float(n @ vals ** 2 - 2.0 * d @ vals)
        if risk < best_val - 1e-15:
            best, best_val = vals, risk
    h = np.empty(fclass.cells)
    pos = np.searchsorted(occ, np.arange(fclass.cells), side="right") - 1
    h[:] = best[np.maximum(pos, 0)]
    return GridFunction(h)


def brute_erm(fclass, loss: SurrogateLoss, samples):
    """Exact empirical risk minimiser by enumeration.

    Finite classes scan every member.  The monotone class with the
    quadratic loss and at most 8 samples scans every split of the occupied
    cells into constant blocks.
    """
    batch = as_batch(samples)
    if len(batch) == 0:
        raise ValueError("brute_erm needs at least one sample")
    if fclass.kind == "finite":
        risks = [float(np.mean(eval_loss(loss, h(batch.xs) * batch.ys))) for h in fclass.members]
        return fclass.members[int(np.argmin(risks))]
    if fclass.kind == "monotone_grid":
        if loss.kind is not LossKind.QUADRATIC:
            raise ValueError("the monotone reference only covers the quadratic loss")
        if len(batch) > MAX_MONOTONE_SAMPLES:
            raise EnumerationTooLarge(f"at most {MAX_MONOTONE_SAMPLES} samples")
        return _monotone_brute(fclass, batch)
    raise ValueError(f"no reference ERM for {fclass.kind}")


# --------------------------------------------------------------------------
# random instances shared by the tests and the ``oracle`` subcommand


def random_monotone_instance(rng: np.random.Generator, max_samples: int = MAX_MONOTONE_SAMPLES):
    """Between 1 and ``max_samples`` labeled points on ``[0, 1]``."""
    q = int(rng.integers(1, max_samples + 1))
    xs = np.sort(rng.random(q))
    ys = np.where(rng.random(q) < 0.5, 1.0, -1.0)
    return LabeledBatch(np.arange(1, q + 1), xs, ys)


def random_finite_version_space(rng: np.random.Generator, loss: SurrogateLoss,
                                max_members: int = 8, max_atoms: int = 6, max_constraints: int = 3):
    """A random finite class with random (possibly empty) constraints.

    Budgets are drawn between the smallest and largest member risk of each
    batch so that constraints actually cut.
    """
    k = int(rng.integers(1, max_members + 1))
    n_atoms = int(rng.integers(1, max_atoms + 1))
    table = rng.choice([-1.0, -0.5, 0.0, 0.5, 1.0], size=(k, n_atoms))
    vs = VersionSpace(FiniteClass(table), loss)
    for _ in range(int(rng.integers(0, max_constraints + 1))):
        q = int(rng.integers(0, 6))
        batch = LabeledBatch(np.arange(q), rng.integers(0, n_atoms, q),
                             np.where(rng.random(q) < 0.5, 1.0, -1.0))
        risks = vs.function_class.risks(loss, batch)
        budget = float(rng.uniform(risks.min(), risks.max())) if q else float(rng.random())
        vs = vs.append(RiskConstraint(batch, budget))
    return vs, n_atoms
