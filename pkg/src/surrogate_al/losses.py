"""Surrogate losses, conditional risks and calibration transforms.

Five margin losses are supported.  For each one we can evaluate the
pointwise (conditional) risk, minimise it with and without a sign
constraint, and build the calibration function ``psi`` as the lower
convex envelope of ``psi_tilde``.  ``capital_psi`` and its inverse turn
an excess-error target into an excess-surrogate-risk target under a
low-noise condition with parameters ``(a, alpha)``.

All minimisations run over the clamped interval ``[-f_bar, f_bar]``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LossKind",
    "SurrogateLoss",
    "CalibrationTable",
    "CalibrationError",
    "make_loss",
    "eval_loss",
    "conditional_risk",
    "pointwise_minimizer",
    "constrained_minimizer",
    "psi_tilde",
    "psi",
    "calibration_table",
    "lemma3_params",
    "capital_psi",
    "capital_psi_inverse",
]

COARSE_GRID = 1025
Z_TOL = 1e-10
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class CalibrationError(ValueError):
    """Raised when a psi envelope fails validation against its grid."""


class LossKind(str, enum.Enum):
    EXPONENTIAL = "exponential"
    HINGE = "hinge"
    QUADRATIC = "quadratic"
    TRUNCATED_QUADRATIC = "truncated_quadratic"
    ZERO_ONE = "zero_one"


_CLOSED_FORM_PSI = {
    LossKind.EXPONENTIAL: lambda x: 1.0 - np.sqrt(np.clip(1.0 - np.square(x), 0.0, None)),
    LossKind.HINGE: np.abs,
    LossKind.QUADRATIC: np.square,
    LossKind.TRUNCATED_QUADRATIC: np.square,
    LossKind.ZERO_ONE: np.abs,
}


@dataclass(frozen=True)
class SurrogateLoss:
    """A margin loss together with its strong-convexity constants.

    ``lipschitz_L``, ``convexity_c``, ``convexity_r`` and ``metric_bound``
    are the constants of the modulus-of-convexity condition relative to a
    pseudometric on ``[-f_bar, f_bar]`` bounded by ``metric_bound``.
    Use :func:`make_loss` to get the standard values for each kind.
    """

    kind: LossKind
    f_bar: float
    lipschitz_L: float
    convexity_c: float
    convexity_r: float
    metric_bound: float

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if not self.f_bar > 0:
            raise ValueError("f_bar must be positive")
        for name in ("lipschitz_L", "convexity_c", "convexity_r", "metric_bound"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def __call__(self, z):
        return eval_loss(self, z)

    @property
    def loss_bound(self) -> float:
        """``1 v sup |loss|`` over margins in ``[-f_bar, f_bar]``."""
        ends = eval_loss(self, np.array([-self.f_bar, self.f_bar]))
        return float(max(1.0, ends.max()))

    @property
    def closed_form_psi(self):
        return _CLOSED_FORM_PSI[self.kind]

    @property
    def is_convex(self) -> bool:
        return self.kind is not LossKind.ZERO_ONE


def make_loss(kind, f_bar: float = 1.0, metric_bound: float | None = None) -> SurrogateLoss:
    """Build a loss with its standard strong-convexity constants.

    ``metric_bound`` overrides the default bound of the pseudometric
    (``2 f_bar`` for ``|x - y|``; ``min(f_bar, 1) + f_bar`` for the
    truncated quadratic's ``|min(a, 1) - min(b, 1)|``).
    """
    kind = LossKind(kind)
    B = float(f_bar)
    if kind is LossKind.EXPONENTIAL:
        L, c, r, d = math.exp(B), math.exp(-B) / 8.0, 2.0, 2.0 * B
    elif kind is LossKind.HINGE:
        L, c, r, d = 1.0, 1.0, math.inf, 2.0 * B
    elif kind is LossKind.QUADRATIC:
        L, c, r, d = 2.0 * (B + 1.0), 0.25, 2.0, 2.0 * B
    elif kind is LossKind.TRUNCATED_QUADRATIC:
        L, c, r, d = 2.0 * (B + 1.0), 0.25, 2.0, min(B, 1.0) + B
    else:
        L, c, r, d = 1.0, 1.0, math.inf, 1.0
    if metric_bound is not None:
        d = float(metric_bound)
    return SurrogateLoss(kind, B, L, c, r, d)


def eval_loss(loss: SurrogateLoss, z):
    """Loss of margin ``z``; accepts arrays and +/- infinity."""
    z = np.asarray(z, dtype=float)
    kind = loss.kind
    with np.errstate(over="ignore"):
        if kind is LossKind.EXPONENTIAL:
            out = np.exp(-z)
        elif kind is LossKind.HINGE:
            out = np.maximum(1.0 - z, 0.0)
        elif kind is LossKind.QUADRATIC:
            out = np.square(1.0 - z)
        elif kind is LossKind.TRUNCATED_QUADRATIC:
            out = np.square(np.maximum(1.0 - z, 0.0))
        else:
            out = np.where(z <= 0, 1.0, 0.0)
    return out if out.ndim else float(out)


def conditional_risk(loss: SurrogateLoss, eta0, z):
    """``eta0 * loss(z) + (1 - eta0) * loss(-z)``, with ``0 * inf = 0``."""
    eta0 = np.asarray(eta0, dtype=float)
    z = np.asarray(z, dtype=float)
    pos = np.asarray(eval_loss(loss, z))
    neg = np.asarray(eval_loss(loss, -z))
    with np.errstate(invalid="ignore"):
        out = np.where(eta0 > 0, eta0 * pos, 0.0) + np.where(eta0 < 1, (1.0 - eta0) * neg, 0.0)
    return out if out.ndim else float(out)


def _minimize_conditional(loss, eta, lo, hi):
    """Minimise the conditional risk of each ``eta`` over ``[lo, hi]``.

    Coarse grid search (ties go to the smallest ``|z|``) followed by a
    golden-section refinement inside the bracketing grid cell.  The
    refined point replaces the grid point only if it is strictly better,
    which keeps exact ties (e.g. the hinge at ``eta = 1/2``) at the grid
    choice.
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    lo = np.broadcast_to(np.asarray(lo, dtype=float), eta.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), eta.shape)
    t = np.linspace(0.0, 1.0, COARSE_GRID)
    grid = lo[:, None] + (hi - lo)[:, None] * t[None, :]
    risk = conditional_risk(loss, eta[:, None], grid)
    best = risk.min(axis=1, keepdims=True)
    ties = risk <= best + 1e-13 * (1.0 + np.abs(best))
    score = np.where(ties, np.abs(grid), np.inf)
    k = np.argmin(score, axis=1)
    rows = np.arange(len(eta))
    z = grid[rows, k]
    val = risk[rows, k]
    if loss.kind is LossKind.ZERO_ONE:
        return z, val

    a = grid[rows, np.maximum(k - 1, 0)]
    b = grid[rows, np.minimum(k + 1, COARSE_GRID - 1)]
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = conditional_risk(loss, eta, c)
    fd = conditional_risk(loss, eta, d)
    width = float(np.max(b - a)) if len(eta) else 0.0
    n_iter = 0 if width <= Z_TOL else int(math.ceil(math.log(Z_TOL / width) / math.log(_GOLDEN)))
    for _ in range(n_iter):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        d_new = np.where(left, c, a + _GOLDEN * (b - a))
        c_new = np.where(left, b - _GOLDEN * (b - a), d)
        fc_old = fc
        fc = np.where(left, conditional_risk(loss, eta, c_new), fd)
        fd = np.where(left, fc_old, conditional_risk(loss, eta, d_new))
        c, d = c_new, d_new
    z_ref = 0.5 * (a + b)
    f_ref = conditional_risk(loss, eta, z_ref)
    better = f_ref < val
    return np.where(better, z_ref, z), np.where(better, f_ref, val)


def _scalarize(arr, like):
    return float(arr[0]) if np.ndim(like) == 0 else arr


def pointwise_minimizer(loss: SurrogateLoss, eta0):
    """Return ``(z_star, l_star)``: minimiser and minimum of the conditional risk.

    Works elementwise on arrays of ``eta0``.
    """
    eta = np.atleast_1d(np.asarray(eta0, dtype=float))
    if np.any((eta < 0) | (eta > 1)):
        raise ValueError("eta0 must lie in [0, 1]")
    out_z = np.empty_like(eta)
    out_l = np.empty_like(eta)
    # chunked so the coarse grid stays small in memory
    for start in range(0, len(eta), 256):
        sl = slice(start, start + 256)
        out_z[sl], out_l[sl] = _minimize_conditional(loss, eta[sl], -loss.f_bar, loss.f_bar)
    return _scalarize(out_z, eta0), _scalarize(out_l, eta0)


def constrained_minimizer(loss: SurrogateLoss, eta0):
    """Minimum conditional risk over margins whose sign disagrees with ``2 eta0 - 1``."""
    eta = np.atleast_1d(np.asarray(eta0, dtype=float))
    if np.any((eta < 0) | (eta > 1)):
        raise ValueError("eta0 must lie in [0, 1]")
    B = loss.f_bar
    lo = np.where(eta < 0.5, 0.0, -B)
    hi = np.where(eta > 0.5, 0.0, B)
    out = np.empty_like(eta)
    for start in range(0, len(eta), 256):
        sl = slice(start, start + 256)
        out[sl] = _minimize_conditional(loss, eta[sl], lo[sl], hi[sl])[1]
    return _scalarize(out, eta0)


def psi_tilde(loss: SurrogateLoss, zeta):
    """Calibration gap at conditional probability ``(1 + zeta) / 2``."""
    zeta = np.asarray(zeta, dtype=float)
    if np.any(np.abs(zeta) > 1):
        raise ValueError("zeta must lie in [-1, 1]")
    eta = (1.0 + zeta) / 2.0
    gap = np.asarray(constrained_minimizer(loss, eta)) - np.asarray(pointwise_minimizer(loss, eta)[1])
    gap = np.maximum(gap, 0.0)
    return gap if gap.ndim else float(gap)


def _lower_hull(x, y):
    """Indices of the lower convex hull of points sorted by ``x`` (monotone chain)."""
    hull = []
    for i in range(len(x)):
        while len(hull) >= 2:
            j, k = hull[-2], hull[-1]
            cross = (x[k] - x[j]) * (y[i] - y[j]) - (y[k] - y[j]) * (x[i] - x[j])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull)


@dataclass(frozen=True)
class CalibrationTable:
    """``psi_tilde`` on a grid of ``[0, 1]`` and its lower convex envelope."""

    x: np.ndarray
    psi_tilde: np.ndarray
    psi: np.ndarray
    vertices: np.ndarray
    resolution: int
    closed_form_valid: bool

    def envelope(self, x):
        """Piecewise-linear interpolation of the envelope at ``x``."""
        xv = self.x[self.vertices]
        out = np.interp(np.asarray(x, dtype=float), xv, self.psi[self.vertices])
        return out if np.ndim(out) else float(out)


CLOSED_FORM_TOL = 1e-4
ENVELOPE_TOL = 1e-9


@functools.lru_cache(maxsize=64)
def calibration_table(loss: SurrogateLoss, resolution: int = 1024) -> CalibrationTable:
    """Compute ``psi_tilde`` on ``resolution + 1`` points and its convex envelope."""
    x = np.linspace(0.0, 1.0, resolution + 1)
    pt = np.asarray(psi_tilde(loss, x), dtype=float)
    pt[0] = 0.0
    vert = _lower_hull(x, pt)
    env = np.interp(x, x[vert], pt[vert])
    if np.any(env > pt + ENVELOPE_TOL):
        raise CalibrationError(f"envelope exceeds psi_tilde for {loss.kind.value}")
    if np.any(np.diff(env) < -ENVELOPE_TOL):
        raise CalibrationError(f"envelope is not nondecreasing for {loss.kind.value}")
    closed = loss.closed_form_psi(x)
    valid = bool(np.max(np.abs(closed - env)) <= CLOSED_FORM_TOL)
    for arr in (x, pt, env, vert):
        arr.setflags(write=False)
    return CalibrationTable(x, pt, env, vert, resolution, valid)


def psi(loss: SurrogateLoss, x):
    """Calibration function: largest convex minorant of ``psi_tilde`` on ``[0, 1]``.

    The closed form is returned when the computed envelope agrees with it
    on the table grid; otherwise the envelope itself is interpolated.
    """
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("x must lie in [0, 1]")
    table = calibration_table(loss)
    if table.closed_form_valid:
        out = np.asarray(loss.closed_form_psi(x), dtype=float)
        return out if out.ndim else float(out)
    return table.envelope(x)


def lemma3_params(loss: SurrogateLoss) -> tuple[float, float]:
    """``(b, beta)`` of the surrogate noise condition implied by strong convexity."""
    r = loss.convexity_r
    beta = min(1.0, 2.0 / r)
    base = 2.0 * loss.convexity_c * loss.metric_bound ** min(r - 2.0, 0.0)
    b = base ** (-beta) * loss.lipschitz_L ** 2
    return float(b), float(beta)


def capital_psi(loss: SurrogateLoss, eps, a: float = 1.0, alpha: float = 1.0):
    """``a eps^alpha psi(eps^(1 - alpha) / (2a))``."""
    if a < 1 or not 0 <= alpha <= 1:
        raise ValueError("need a >= 1 and alpha in [0, 1]")
    eps = np.asarray(eps, dtype=float)
    out = a * eps ** alpha * np.asarray(psi(loss, eps ** (1.0 - alpha) / (2.0 * a)))
    return out if out.ndim else float(out)


def capital_psi_inverse(loss: SurrogateLoss, gamma: float, a: float = 1.0, alpha: float = 1.0) -> float:
    """Smallest ``eps`` in ``(0, 1]`` with ``capital_psi(eps) >= gamma``, capped at 1."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if gamma > capital_psi(loss, 1.0, a, alpha):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if capital_psi(loss, mid, a, alpha) >= gamma:
            hi = mid
        else:
            lo = mid
    return hi
