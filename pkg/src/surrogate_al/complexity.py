"""Data-dependent complexity estimates and update thresholds.

``phi_hat``, ``d_hat`` and ``u_hat`` are the Rademacher-type quantities
computed over an explicit list of functions.  The three threshold rules
used by the active learner are

``rademacher``
    ``u_hat`` over the current members of a finite version space.
``recursive_vc``
    a closed-form bound for VC-type classes that feeds each epoch's
    threshold into the next one through a localisation radius.
``strong_convexity``
    a closed-form bound that only needs the sample size.

Every constant is multiplied by ``ThresholdParams.scale``; the theoretical
constants are far too large for small experiments.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._batch import LabeledBatch, rademacher_bits
from .classes import version_space_members
from .losses import SurrogateLoss, eval_loss, lemma3_params

__all__ = [
    "LabeledBatch",
    "rademacher_bits",
    "ThresholdParams",
    "RecursionState",
    "Log",
    "phi_hat",
    "d_hat",
    "u_hat",
    "s_hat_default",
    "t_hat_rademacher",
    "t_hat_recursive_vc",
    "t_hat_strong_convexity",
    "VARIANTS",
]

VARIANTS = ("rademacher", "recursive_vc", "strong_convexity")


def Log(x: float) -> float:
    """``max(ln x, 1)``, with ``Log(x) = 1`` for ``x <= 0``."""
    return max(math.log(x), 1.0) if x > 0 else 1.0


@dataclass(frozen=True)
class ThresholdParams:
    """Settings of the update threshold.

    Parameters
    ----------
    variant : {"rademacher", "recursive_vc", "strong_convexity"}
    c0 : float
        Constant of the closed-form rules.
    scale : float
        Multiplies ``c0`` and the 12/34/752 constants of ``u_hat``.
        Zero is accepted with a warning (the threshold is then always 0).
    vc_dim : int, optional
        Overrides the class default.
    delta : float
        Confidence parameter in ``(0, 1/4)``.
    b, beta : float, optional
        Noise-condition constants; derived from the loss when omitted.
    """

    variant: str = "rademacher"
    c0: float = 1.0
    scale: float = 1.0
    vc_dim: int | None = None
    delta: float = 0.1
    b: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown threshold variant {self.variant!r}")
        if not 0 < self.delta < 0.25:
            raise ValueError("delta must lie in (0, 1/4)")
        if not self.c0 > 0:
            raise ValueError("c0 must be positive")
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")
        if self.scale == 0:
            warnings.warn("threshold scale is 0: every update keeps only empirical minimisers",
                          stacklevel=3)

    def noise_constants(self, loss: SurrogateLoss) -> tuple[float, float]:
        b, beta = lemma3_params(loss)
        return (self.b if self.b is not None else b,
                self.beta if self.beta is not None else beta)

    def vc(self, fclass=None) -> int:
        if self.vc_dim is not None:
            return int(self.vc_dim)
        return int(getattr(fclass, "vc_dim", 1))


def _loss_matrix(members, batch: LabeledBatch, loss) -> np.ndarray:
    if len(batch) == 0:
        return np.zeros((len(members), 0))
    return np.array([np.asarray(eval_loss(loss, np.asarray(h(batch.xs)) * batch.ys), dtype=float)
                     for h in members]).reshape(len(members), len(batch))


def phi_hat(members, batch: LabeledBatch, loss: SurrogateLoss) -> float:
    """``max_h A(h) - min_g A(g)`` with ``A(h)`` the Rademacher-weighted mean loss."""
    if len(batch) == 0 or len(members) == 0:
        return 0.0
    a = _loss_matrix(members, batch, loss) @ batch.xi / len(batch)
    return float(a.max() - a.min())


def d_hat(members, batch: LabeledBatch, loss: SurrogateLoss) -> float:
    """Largest root-mean-square loss difference over pairs of members."""
    if len(batch) == 0 or len(members) < 2:
        return 0.0
    lm = _loss_matrix(members, batch, loss)
    best = 0.0
    for j in range(len(lm) - 1):
        diff = lm[j + 1:] - lm[j]
        best = max(best, float(np.max(np.mean(diff * diff, axis=1))))
    return math.sqrt(best)


def u_hat(members, batch: LabeledBatch, loss: SurrogateLoss, s: float, scale: float = 1.0) -> float:
    """``scale * (12 phi + 34 D sqrt(s/q) + 752 l_bar s / q)``; ``scale * 752 l_bar s`` if empty."""
    if s < 1:
        raise ValueError("s must be at least 1")
    lb = loss.loss_bound
    q = len(batch)
    if q == 0:
        return scale * 752.0 * lb * s
    return scale * (12.0 * phi_hat(members, batch, loss)
                    + 34.0 * d_hat(members, batch, loss) * math.sqrt(s / q)
                    + 752.0 * lb * s / q)


def s_hat_default(m: int, delta: float) -> float:
    """``Log(12 log2(2m)^2 / delta)``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return Log(12.0 * math.log2(2 * m) ** 2 / delta)


def t_hat_rademacher(vspace, batch: LabeledBatch, m: int, loss: SurrogateLoss,
                     params: ThresholdParams) -> float:
    """``u_hat`` over the feasible members of a finite version space."""
    if vspace.function_class.kind != "finite":
        from .classes import UnsupportedClassError

        raise UnsupportedClassError("the rademacher threshold needs a finite class")
    members = version_space_members(vspace)
    return u_hat(members, batch, loss, s_hat_default(m, params.delta), params.scale)


@dataclass(frozen=True)
class RecursionState:
    """Previous epoch of the recursive rule: ``m``, query count and ``min(T, l_bar)``.

    The initial state has ``m = 1``.
    """

    m: int = 1
    q: int = 0
    t_capped: float = 0.0

    def gamma(self, m: int, loss_bound: float) -> float:
        if m == 2:
            return loss_bound
        return 8.0 * max(self.q, 1) / m * self.t_capped


def t_hat_recursive_vc(state: RecursionState, q_m: int, m: int, loss: SurrogateLoss,
                       params: ThresholdParams, vc_dim: int | None = None):
    """Recursive closed-form threshold for VC-type classes.

    Returns
    -------
    value : float
    new_state : RecursionState
        State to pass at the next power of two.
    """
    if m < 2 or m & (m - 1):
        raise ValueError("m must be a power of two >= 2")
    if state.m * 2 != m:
        raise ValueError(f"recursion state is at m={state.m}, cannot step to m={m}")
    lb = loss.loss_bound
    b, beta = params.noise_constants(loss)
    vc = vc_dim if vc_dim is not None else params.vc()
    s = s_hat_default(m, params.delta)
    gamma = state.gamma(m, lb)
    gb = gamma ** beta
    qv = max(q_m, 1)
    denom = m * b * gb
    lg = Log(lb * (q_m + s) / denom) if denom > 0 else 1.0
    inner = vc * lg + s
    value = params.c0 * params.scale * (m / 2.0) / qv * (
        math.sqrt(gb * (b / m) * inner) + (lb / m) * inner)
    return value, RecursionState(m, int(q_m), min(value, lb))


def t_hat_strong_convexity(q: int, m: int, loss: SurrogateLoss, params: ThresholdParams,
                           vc_dim: int | None = None) -> float:
    """Closed-form threshold under strong convexity, capped at ``l_bar``."""
    if q < 0 or m < 2:
        raise ValueError("need q >= 0 and m >= 2")
    lb = loss.loss_bound
    b, beta = params.noise_constants(loss)
    vc = vc_dim if vc_dim is not None else params.vc()
    s = s_hat_default(m, params.delta)
    qv = max(q, 1)
    first = (b / qv * (vc * Log((lb * lb / b) * (q / (b * vc)) ** (beta / (2.0 - beta))) + s)) \
        ** (1.0 / (2.0 - beta))
    second = lb / qv * (vc * Log((lb * lb / b) * (q / (lb * vc)) ** beta) + s)
    return min(lb, params.c0 * params.scale * max(first, second))
