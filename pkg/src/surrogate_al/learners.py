"""The disagreement-based active learner and the passive ERM baseline."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._batch import LabeledBatch
from .classes import (InfeasibleVersionSpace, RiskConstraint, VersionSpace, constrained_min_risk,
                      dis_mask, erm)
from .complexity import (RecursionState, ThresholdParams, t_hat_rademacher, t_hat_recursive_vc,
                         t_hat_strong_convexity)

__all__ = [
    "UpdateRecord",
    "TrialRecord",
    "run_algorithm1",
    "run_erm_passive",
    "excess_error",
    "excess_surrogate",
    "trial_streams",
    "find_f_star_member",
]

PROBE_POINTS = 10_000
LINEAR_PROBE_POINTS = 256


@dataclass(frozen=True)
class UpdateRecord:
    """One version-space update.

    ``dis_mass`` is the probability mass of the disagreement region of
    the version space after the update.
    """

    m: int
    q: int
    t_hat: float
    min_risk: float
    budget: float
    dis_mass: float


@dataclass(frozen=True)
class TrialRecord:
    method: str
    labels_used: int
    unlabeled_used: int
    updates: tuple
    final_excess_error: float
    final_excess_surrogate: float
    f_star_retained: bool | None
    seed: object
    failed: bool = False
    message: str = ""
    wall_time: float = field(default=0.0, compare=False)


def excess_error(h, problem) -> float:
    """``er(h) - er(f*)``."""
    return problem.excess_error(h)


def excess_surrogate(h, problem, loss) -> float:
    """``R(h) - R(f*)`` for ``loss``."""
    return problem.excess_surrogate(h, loss)


def trial_streams(seed):
    """Data generator, Rademacher key and probe generator derived from ``seed``.

    ``seed`` may be an int, a sequence of ints or a ``SeedSequence``.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    data, rad, probe = ss.spawn(3)
    key = int(rad.generate_state(1, np.uint64)[0])
    return np.random.default_rng(data), key, np.random.default_rng(probe)


def _seed_repr(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed.entropy
    return seed


def find_f_star_member(fclass, problem, loss):
    """Index of the member with the smallest excess surrogate risk (finite classes)."""
    risks = [problem.excess_surrogate(h, loss) for h in fclass.members]
    return int(np.argmin(risks))


def _dis_mass(vspace, loss, problem, probes):
    if problem.discrete:
        atoms = np.arange(len(problem.masses))
        return float(problem.masses @ dis_mask(vspace, loss, atoms))
    return float(np.mean(dis_mask(vspace, loss, probes)))


def _threshold(vspace, batch, m, loss, params, state, vc):
    if params.variant == "rademacher":
        return t_hat_rademacher(vspace, batch, m, loss, params), state
    if params.variant == "recursive_vc":
        return t_hat_recursive_vc(state, len(batch), m, loss, params, vc_dim=vc)
    return t_hat_strong_convexity(len(batch), m, loss, params, vc_dim=vc), state


def run_algorithm1(problem, fclass, loss, u: int, n: int, params: ThresholdParams, seed,
                   diagnostics: bool = True, probe_points: int | None = None):
    """Run the active learner on a fresh stream.

    The stream is read in blocks that end at the next power of two, since
    the version space (and hence the disagreement region) only changes
    there.  A block is cut short at the point where the label budget runs
    out, so the result is identical to a point-by-point transcription.

    Parameters
    ----------
    problem : Problem
    fclass : function class
    loss : SurrogateLoss
    u, n : int
        Unlabeled and label budgets.
    params : ThresholdParams
    seed : int, sequence of int or SeedSequence
    diagnostics : bool
        Record the disagreement mass after each update.
    probe_points : int, optional
        Probe sample size for continuous problems.

    Returns
    -------
    h_hat : callable
    record : TrialRecord
    """
    if u < 0 or n < 0:
        raise ValueError("budgets must be nonnegative")
    if params.variant == "rademacher" and fclass.kind != "finite":
        raise ValueError("the rademacher threshold needs a finite class")
    start = time.perf_counter()
    rng, rad_key, probe_rng = trial_streams(seed)
    probes = None
    if diagnostics and not problem.discrete:
        if probe_points is None:
            probe_points = LINEAR_PROBE_POINTS if fclass.kind == "linear_ball" else PROBE_POINTS
        probes = problem.sample_x(probe_rng.random(probe_points))
    vc = params.vc(fclass)
    f_star_idx = find_f_star_member(fclass, problem, loss) if fclass.kind == "finite" else None
    retained = True if f_star_idx is not None else None

    V = VersionSpace(fclass, loss)
    q_idx, q_x, q_y = [], [], []
    m, t = 1, 0
    state = RecursionState()
    updates = []
    last_witness = None
    failed, message = False, ""
    try:
        while m < u and t < n:
            end = min(1 << m.bit_length(), u)
            xs, ys = problem.sample(rng, end - m)
            hits = np.nonzero(dis_mask(V, loss, xs))[0]
            if t + len(hits) >= n:
                hits = hits[: n - t]
                end = m + 1 + int(hits[-1])
            idx = m + 1 + hits
            q_idx.append(idx)
            q_x.append(xs[hits])
            q_y.append(ys[hits])
            t += len(hits)
            m = end
            if m & (m - 1) == 0:
                Q = _batch(q_idx, q_x, q_y, rad_key)
                t_hat, state = _threshold(V, Q, m, loss, params, state, vc)
                value, last_witness = constrained_min_risk(V, loss, Q)
                V = V.append(RiskConstraint(Q, value + t_hat))
                mass = _dis_mass(V, loss, problem, probes) if diagnostics else float("nan")
                updates.append(UpdateRecord(m, len(Q), float(t_hat), float(value),
                                            float(value + t_hat), mass))
                if retained:
                    h = fclass.members[f_star_idx]
                    retained = bool(np.mean(loss(h(Q.xs) * Q.ys)) <= value + t_hat + 1e-9) \
                        if len(Q) else True
                q_idx, q_x, q_y = [], [], []
        Q = _batch(q_idx, q_x, q_y, rad_key)
        if len(Q) or last_witness is None:
            _, h_hat = constrained_min_risk(V, loss, Q)
        else:
            h_hat = last_witness
    except InfeasibleVersionSpace as exc:
        failed, message = True, f"infeasible version space: {exc}"
        h_hat = last_witness if last_witness is not None else constrained_min_risk(
            VersionSpace(fclass, loss), loss, LabeledBatch.empty())[1]
        retained = False if retained is not None else None

    record = TrialRecord(
        method="active",
        labels_used=int(t),
        unlabeled_used=int(m - 1),
        updates=tuple(updates),
        final_excess_error=problem.excess_error(h_hat),
        final_excess_surrogate=problem.excess_surrogate(h_hat, loss),
        f_star_retained=retained,
        seed=_seed_repr(seed),
        failed=failed,
        message=message,
        wall_time=time.perf_counter() - start,
    )
    return h_hat, record


def _batch(q_idx, q_x, q_y, key):
    if not q_idx:
        return LabeledBatch.empty(key)
    return LabeledBatch(np.concatenate(q_idx), np.concatenate(q_x), np.concatenate(q_y), key)


def run_erm_passive(problem, fclass, loss, m: int, seed):
    """Empirical risk minimisation on ``m`` labeled samples."""
    if m < 1:
        raise ValueError("m must be at least 1")
    start = time.perf_counter()
    rng, key, _ = trial_streams(seed)
    xs, ys = problem.sample(rng, m)
    h_hat = erm(fclass, loss, LabeledBatch(np.arange(1, m + 1), xs, ys, key))
    record = TrialRecord(
        method="passive",
        labels_used=int(m),
        unlabeled_used=int(m),
        updates=(),
        final_excess_error=problem.excess_error(h_hat),
        final_excess_surrogate=problem.excess_surrogate(h_hat, loss),
        f_star_retained=None,
        seed=_seed_repr(seed),
        wall_time=time.perf_counter() - start,
    )
    return h_hat, record
