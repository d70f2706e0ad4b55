"""Synthetic classification problems with known regression function.

A :class:`Problem` is either discrete (atoms ``0..n-1`` with masses) or
continuous with a uniform marginal on ``[0, 1]``.  Continuous integrals
use a fixed midpoint rule with ``2**14`` nodes, which is exact for the
step functions of the monotone class whenever the cell count divides the
node count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .classes import FiniteClass, GridFunction, TabularFunction, sign
from .losses import SurrogateLoss, conditional_risk, pointwise_minimizer

__all__ = [
    "Problem",
    "PointwiseFunction",
    "make_two_point",
    "make_discrete",
    "make_threshold_tsybakov",
    "make_monotone",
    "two_point_class",
    "threshold_grid_class",
    "estimate_disagreement_coefficient",
    "disagreement_curve",
    "fit_condition2",
]

QUAD_NODES = 2 ** 14
_L_STAR = {}
_BUILTIN_CONTINUOUS = ("threshold_tsybakov", "monotone_linear", "monotone_custom")


@dataclass(frozen=True, eq=False)
class PointwiseFunction:
    """``x -> z*(eta(x))`` for a continuous problem."""

    problem: "Problem"
    loss: SurrogateLoss

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        z, _ = pointwise_minimizer(self.loss, np.atleast_1d(self.problem.eta(x)))
        return z.reshape(x.shape) if x.ndim else float(z[0])


@dataclass(frozen=True, eq=False)
class Problem:
    """A distribution over ``X x {-1, +1}``.

    Parameters
    ----------
    name : str
    masses : array, optional
        Atom masses of a discrete marginal.  ``None`` means uniform on ``[0, 1]``.
    eta_values : array, optional
        ``P(Y = 1 | X = atom)`` for discrete problems.
    eta_fn : callable, optional
        ``P(Y = 1 | X = x)`` for continuous problems.
    tsybakov_a, tsybakov_alpha : float
        Low-noise constants ``dist(g, f*) <= a (er(g) - er(f*))^alpha``.
    """

    name: str
    masses: np.ndarray | None = None
    eta_values: np.ndarray | None = None
    eta_fn: Callable | None = None
    tsybakov_a: float = 1.0
    tsybakov_alpha: float = 0.0
    params: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.masses is not None:
            m = np.asarray(self.masses, dtype=float)
            e = np.asarray(self.eta_values, dtype=float)
            if m.shape != e.shape or m.ndim != 1:
                raise ValueError("masses and eta_values must be 1-d of equal length")
            if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-12:
                raise ValueError("atom masses must be nonnegative and sum to 1")
            if np.any((e < 0) | (e > 1)):
                raise ValueError("eta must lie in [0, 1]")
            m.setflags(write=False)
            e.setflags(write=False)
            object.__setattr__(self, "masses", m)
            object.__setattr__(self, "eta_values", e)
        elif self.eta_fn is None:
            raise ValueError("a continuous problem needs eta_fn")

    @property
    def discrete(self) -> bool:
        return self.masses is not None

    def eta(self, x):
        if self.discrete:
            return self.eta_values[np.asarray(x, dtype=np.int64)]
        return self.eta_fn(np.asarray(x, dtype=float))

    def support(self):
        """Nodes and weights of the exact (discrete) or midpoint (continuous) rule."""
        if self.discrete:
            return np.arange(len(self.masses)), self.masses
        if "nodes" not in self._cache:
            nodes = (np.arange(QUAD_NODES) + 0.5) / QUAD_NODES
            self._cache["nodes"] = (nodes, np.full(QUAD_NODES, 1.0 / QUAD_NODES))
        return self._cache["nodes"]

    def _eta_support(self):
        if "eta_nodes" not in self._cache:
            self._cache["eta_nodes"] = np.asarray(self.eta(self.support()[0]), dtype=float)
        return self._cache["eta_nodes"]

    # ---- sampling

    def sample_x(self, u):
        """Map uniforms ``u`` to points of the marginal."""
        u = np.asarray(u, dtype=float)
        if self.discrete:
            cdf = np.cumsum(self.masses)
            return np.minimum(np.searchsorted(cdf, u, side="right"), len(self.masses) - 1)
        return u

    def sample(self, rng: np.random.Generator, size: int):
        """Draw ``size`` labeled pairs.

        Two uniforms are consumed per pair, so successive calls read the
        generator as one stream regardless of how it is chunked.
        """
        u = rng.random((size, 2))
        xs = self.sample_x(u[:, 0])
        ys = np.where(u[:, 1] < self.eta(xs), 1.0, -1.0)
        return xs, ys

    # ---- optimal function and risks

    @property
    def bayes_error(self) -> float:
        _, w = self.support()
        e = self._eta_support()
        return float(w @ np.minimum(e, 1.0 - e))

    def f_star(self, loss: SurrogateLoss):
        """Pointwise minimiser of the conditional risk composed with ``eta``."""
        if self.discrete:
            key = ("f_star", loss)
            if key not in self._cache:
                z, _ = pointwise_minimizer(loss, self.eta_values)
                self._cache[key] = TabularFunction(np.asarray(z, dtype=float))
            return self._cache[key]
        return PointwiseFunction(self, loss)

    def _l_star(self, loss):
        key = ("l_star", loss)
        if key not in self._cache:
            # continuous problems are rebuilt per trial, so share the value across instances
            shared = None
            if self.name in _BUILTIN_CONTINUOUS:
                shared = (self.name, repr(sorted(self.params.items())), loss)
            if shared is not None and shared in _L_STAR:
                self._cache[key] = _L_STAR[shared]
            else:
                _, ls = pointwise_minimizer(loss, self._eta_support())
                self._cache[key] = float(self.support()[1] @ np.asarray(ls))
                if shared is not None:
                    _L_STAR[shared] = self._cache[key]
        return self._cache[key]

    def error_rate(self, h) -> float:
        nodes, w = self.support()
        e = self._eta_support()
        pos = sign(h(nodes)) > 0
        return float(w @ np.where(pos, 1.0 - e, e))

    def excess_error(self, h) -> float:
        """``er(h) - er(f*)``, exact on atoms or by the midpoint rule."""
        nodes, w = self.support()
        e = self._eta_support()
        wrong = sign(h(nodes)) != sign(2.0 * e - 1.0)
        return float(w @ (np.abs(2.0 * e - 1.0) * wrong))

    def surrogate_risk(self, h, loss: SurrogateLoss) -> float:
        nodes, w = self.support()
        return float(w @ np.asarray(conditional_risk(loss, self._eta_support(), h(nodes))))

    def excess_surrogate(self, h, loss: SurrogateLoss) -> float:
        return self.surrogate_risk(h, loss) - self._l_star(loss)

    def distance(self, h, g) -> float:
        """``P(sign h != sign g)``."""
        nodes, w = self.support()
        return float(w @ (sign(h(nodes)) != sign(g(nodes))))


# --------------------------------------------------------------------------
# constructors


def _bounded_noise_constants(eta_values, masses=None):
    gap = np.abs(2.0 * np.asarray(eta_values) - 1.0)
    if masses is not None:
        gap = gap[np.asarray(masses) > 0]
    g = float(gap.min()) if len(gap) else 1.0
    if g <= 0:
        return 1.0, 0.0
    return max(1.0, 1.0 / g), 1.0


def make_two_point(z: float = 0.25, eps0: float = 0.1, eta_x0: float = 0.75) -> Problem:
    """Two atoms: ``x1`` with mass ``eps0 / (2 z)`` and ``eta = 1/2 + z``, and ``x0``.

    Atom 0 is ``x0`` and atom 1 is ``x1``.
    """
    if not 0 < z < 0.5:
        raise ValueError("z must lie in (0, 1/2)")
    if not 0 < eps0 < z:
        raise ValueError("eps0 must lie in (0, z)")
    if not 4 / 6 - 1e-12 <= eta_x0 <= 5 / 6 + 1e-12:
        raise ValueError("eta_x0 must lie in [4/6, 5/6]")
    p1 = eps0 / (2.0 * z)
    eta = np.array([eta_x0, 0.5 + z])
    a, alpha = _bounded_noise_constants(eta)
    return Problem("two_point", np.array([1.0 - p1, p1]), eta, tsybakov_a=a, tsybakov_alpha=alpha,
                   params={"z": z, "eps0": eps0, "eta_x0": eta_x0})


def make_discrete(masses, eta_values, name: str = "discrete") -> Problem:
    """Arbitrary discrete problem; bounded-noise constants when ``eta`` avoids 1/2."""
    masses = np.asarray(masses, dtype=float)
    a, alpha = _bounded_noise_constants(eta_values, masses)
    return Problem(name, masses, np.asarray(eta_values, dtype=float), tsybakov_a=a,
                   tsybakov_alpha=alpha)


def fit_condition2(gap_fn, t: float, alpha: float, n_endpoints: int = 101):
    """Smallest ``a >= 1`` with ``dist <= a * excess^alpha`` over interval flips.

    The candidate classifiers flip the sign of ``f*`` on ``[u, v]`` for
    ``u < v`` on an endpoint grid of ``[0, 1]`` (with ``t`` added).  Under
    the uniform marginal, ``dist = v - u`` and ``excess`` is the integral
    of ``|2 eta - 1|`` over the interval.
    """
    fine = (np.arange(QUAD_NODES) + 0.5) / QUAD_NODES
    cum = np.concatenate([[0.0], np.cumsum(gap_fn(fine)) / QUAD_NODES])
    ends = np.unique(np.concatenate([np.linspace(0.0, 1.0, n_endpoints), [t]]))
    at = np.interp(ends, np.arange(QUAD_NODES + 1) / QUAD_NODES, cum)
    u, v = np.triu_indices(len(ends), 1)
    dist = ends[v] - ends[u]
    excess = at[v] - at[u]
    with np.errstate(divide="ignore"):
        ratio = np.where(excess > 0, dist / excess ** alpha, np.inf)
    return max(1.0, float(ratio.max()))


def make_threshold_tsybakov(t: float = 0.5, alpha: float = 1.0, z: float = 0.3) -> Problem:
    """Uniform marginal with a single crossing of ``eta = 1/2`` at ``t``.

    ``alpha = 1`` gives bounded noise ``1/2 + z sign(x - t)``.  Smaller
    ``alpha`` uses ``1/2 + sign(x - t) min(1, |2(x - t)|)^((1 - alpha)/alpha) / 2``.
    The constant ``a`` is fitted over interval-flip classifiers.
    """
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if not 0 < z <= 0.5:
        raise ValueError("z must lie in (0, 1/2]")
    if alpha == 1:
        def eta(x):
            return 0.5 + z * sign(np.asarray(x, dtype=float) - t)
        a = max(1.0, 1.0 / (2.0 * z))
    else:
        kappa = (1.0 - alpha) / alpha

        def eta(x):
            d = np.asarray(x, dtype=float) - t
            return 0.5 + 0.5 * sign(d) * np.minimum(1.0, np.abs(2.0 * d)) ** kappa

        a = fit_condition2(lambda x: np.abs(2.0 * eta(x) - 1.0), t, alpha)
    return Problem("threshold_tsybakov", eta_fn=eta, tsybakov_a=a, tsybakov_alpha=alpha,
                   params={"t": t, "alpha": alpha, "z": z})


def make_monotone(eta_kind: str = "linear", grid=None) -> Problem:
    """Uniform marginal with nondecreasing ``eta``.

    ``eta_kind="linear"`` is ``eta(x) = x``.  ``eta_kind="custom"`` takes a
    nondecreasing ``grid`` of values read as a step function on equal cells.
    """
    if eta_kind == "linear":
        def eta(x):
            return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        a = fit_condition2(lambda x: np.abs(2.0 * x - 1.0), 0.5, 0.5)
        return Problem("monotone_linear", eta_fn=eta, tsybakov_a=a, tsybakov_alpha=0.5,
                       params={"eta_kind": "linear"})
    if eta_kind != "custom":
        raise ValueError(f"unknown eta_kind {eta_kind!r}")
    g = np.asarray(grid, dtype=float).reshape(-1)
    if len(g) == 0 or np.any(np.diff(g) < 0):
        raise ValueError("custom eta grid must be nonempty and nondecreasing")
    if np.any((g < 0) | (g > 1)):
        raise ValueError("eta must lie in [0, 1]")
    g.setflags(write=False)
    eta = GridFunction(g)
    a, alpha = _bounded_noise_constants(g)
    return Problem("monotone_custom", eta_fn=eta, tsybakov_a=a, tsybakov_alpha=alpha,
                   params={"eta_kind": "custom", "grid": g.tolist()})


def two_point_class(problem: Problem, loss: SurrogateLoss, order: str = "g_first") -> FiniteClass:
    """``{f*, g}`` on a two-point problem, where ``g`` is ``f*`` negated at ``x1``.

    ``order="g_first"`` lists ``g`` before ``f*`` so that ties on the
    empirical risk never favour the optimum.
    """
    fs = np.asarray(problem.f_star(loss).values, dtype=float)
    g = fs.copy()
    g[1] = -g[1]
    if order == "g_first":
        return FiniteClass([g, fs], names=["g", "f_star"])
    return FiniteClass([fs, g], names=["f_star", "g"])


def threshold_grid_class(n_atoms: int = 100, f_bar: float = 1.0) -> FiniteClass:
    """Thresholds ``h_k(i) = +f_bar if i >= k else -f_bar`` for ``k = 0..n_atoms``."""
    k = np.arange(n_atoms + 1)[:, None]
    i = np.arange(n_atoms)[None, :]
    return FiniteClass(np.where(i >= k, f_bar, -f_bar))


# --------------------------------------------------------------------------
# disagreement coefficient


_RADIUS_TOL = 1e-12


def _ratio_rows(dists, dis_fn, r0):
    """Rows ``(r, mass, ratio)`` at the right limit of ``r0`` and each radius above it."""
    radii = np.unique(dists[dists > r0 + _RADIUS_TOL])
    rows = [(r0, dis_fn(r0), None)]
    rows += [(float(r), dis_fn(float(r)), None) for r in radii]
    return [(r, m, m / r) for r, m, _ in rows]


def disagreement_curve(problem: Problem, fclass, loss: SurrogateLoss, r0: float,
                       rng: np.random.Generator | None = None, n_members: int = 4000,
                       n_points: int = 4000):
    """Ball masses ``P(DIS(B(f*, r)))`` at the radii where the ball changes.

    Returns a list of ``(r, dis_mass, ratio, running_sup)`` rows.  The first
    row is the right limit at ``r0``; the sup of ``ratio`` (and 1) is the
    disagreement coefficient.
    """
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    if fclass.kind == "finite":
        rows = _finite_rows(problem, fclass, loss, r0)
    elif fclass.kind == "monotone_grid":
        rows = _monotone_rows(problem, fclass, r0)
    else:
        rows = _linear_rows(problem, fclass, loss, r0, rng, n_members, n_points)
    out, best = [], 1.0
    for r, m, ratio in rows:
        best = max(best, ratio)
        out.append((float(r), float(m), float(ratio), float(best)))
    return out


def estimate_disagreement_coefficient(problem: Problem, fclass, loss: SurrogateLoss, r0: float,
                                      return_se: bool = False, **kwargs):
    """``sup_{r > r0} P(DIS(B(f*, r))) / r`` joined with 1.

    Exact for finite classes and for the monotone class under the uniform
    marginal; Monte Carlo for linear classes.  With ``return_se`` the
    result is ``(theta, se)`` where ``se`` is the binomial standard error
    of the ratio at the maximising radius (0 for the exact cases).
    """
    rows = disagreement_curve(problem, fclass, loss, r0, **kwargs)
    theta = rows[-1][3]
    if not return_se:
        return theta
    se = 0.0
    if fclass.kind == "linear_ball" and theta > 1.0:
        n = kwargs.get("n_points", 4000)
        r, mass = next((r, m) for r, m, ratio, _ in rows if ratio == theta)
        se = float(np.sqrt(mass * (1.0 - mass) / n) / r)
    return theta, se


def _finite_rows(problem, fclass, loss, r0):
    if not problem.discrete or fclass.n_atoms != len(problem.masses):
        raise ValueError("finite classes need a discrete problem on the same atoms")
    target = sign(problem.f_star(loss).values)
    s = sign(fclass.table)
    errs = (s != target) @ problem.masses
    center = s[int(np.argmin(errs))]
    dists = (s != center) @ problem.masses

    def mass(r):
        ball = s[dists <= r + _RADIUS_TOL]
        dis = ball.max(axis=0) != ball.min(axis=0)
        return float(problem.masses @ dis)

    return _ratio_rows(dists, mass, r0)


def _monotone_rows(problem, fclass, r0):
    if problem.discrete:
        raise ValueError("the monotone class needs the uniform marginal")
    # sign change of f*: first node where eta >= 1/2
    nodes, _ = problem.support()
    e = problem._eta_support()
    pos = np.nonzero(e >= 0.5)[0]
    if len(pos) == 0:
        t_star = 1.0
    else:
        t_star = float(nodes[pos[0]] - 0.5 / len(nodes))
    taus = np.arange(fclass.cells + 1) / fclass.cells
    dists = np.abs(taus - t_star)

    def mass(r):
        ball = taus[dists <= r + _RADIUS_TOL]
        return float(ball.max() - ball.min()) if len(ball) else 0.0

    return _ratio_rows(dists, mass, r0)


def _linear_rows(problem, fclass, loss, r0, rng, n_members, n_points):
    rng = np.random.default_rng(0) if rng is None else rng
    d = fclass.n_features
    w = rng.standard_normal((n_members, d))
    w *= (fclass.radius * rng.random(n_members) ** (1.0 / d) / np.linalg.norm(w, axis=1))[:, None]
    xs = problem.sample_x(rng.random(n_points))
    s = sign(fclass.features(xs) @ w.T)
    center = sign(problem.f_star(loss)(xs))
    dists = np.mean(s != center[:, None], axis=0)
    # balls are prefixes of the members sorted by distance
    order = np.argsort(dists, kind="stable")
    s, sorted_d = s[:, order], dists[order]
    prefix = np.mean(np.maximum.accumulate(s, axis=1) != np.minimum.accumulate(s, axis=1), axis=0)

    def mass(r):
        k = int(np.searchsorted(sorted_d, r + _RADIUS_TOL, side="right"))
        return float(prefix[k - 1]) if k else 0.0

    return _ratio_rows(dists, mass, r0)
