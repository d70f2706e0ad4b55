"""Function classes, empirical risk minimisation and version spaces.

Three classes are provided:

``FiniteClass``
    An explicit table of functions over a discrete domain ``{0, ..., n-1}``.
    Everything is exact enumeration.
``MonotoneGridClass``
    Nondecreasing step functions on ``[0, 1]`` with ``G`` equal cells and
    values in ``[-f_bar, f_bar]``.  Quadratic-type losses are handled by
    isotonic regression (no constraints) or a second-order cone program
    solved with Clarabel; other convex losses go through cvxpy.
``LinearBallClass``
    ``x -> <w, phi(x)>`` with ``||w||_2 <= radius``, solved through cvxpy.

A :class:`VersionSpace` is the class plus a tuple of empirical-risk
constraints ``R(h; Q_i) <= budget_i``.  It is immutable; ``append``
returns a new value.  Solver results are memoised on the instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._batch import LabeledBatch
from .losses import LossKind, SurrogateLoss, eval_loss

__all__ = [
    "FEAS_TOL",
    "DIS_TOL",
    "InfeasibleVersionSpace",
    "UnsupportedClassError",
    "TabularFunction",
    "GridFunction",
    "LinearFunction",
    "FiniteClass",
    "MonotoneGridClass",
    "LinearBallClass",
    "RiskConstraint",
    "VersionSpace",
    "sign",
    "as_batch",
    "empirical_risk",
    "isotonic_regression",
    "erm",
    "constrained_min_risk",
    "dis_contains",
    "dis_mask",
    "feasible",
    "version_space_members",
]

FEAS_TOL = 1e-9
DIS_TOL = 1e-7


class InfeasibleVersionSpace(RuntimeError):
    """No function satisfies every risk constraint."""


class UnsupportedClassError(TypeError):
    """Operation not available for this class kind."""


def sign(v):
    """Sign with the convention ``sign(0) = +1``."""
    v = np.asarray(v, dtype=float)
    out = np.where(v >= 0, 1.0, -1.0)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# functions


@dataclass(frozen=True, eq=False)
class TabularFunction:
    """Function on atoms ``0..n-1`` given by its value table."""

    values: np.ndarray
    index: int | None = None

    def __call__(self, x):
        return self.values[np.asarray(x, dtype=np.int64)]


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Step function on ``[0, 1]`` with ``len(values)`` equal cells."""

    values: np.ndarray

    def __call__(self, x):
        return self.values[_cell_of(x, len(self.values))]


@dataclass(frozen=True, eq=False)
class LinearFunction:
    """``x -> <w, phi(x)>`` where ``phi`` optionally appends a constant 1."""

    w: np.ndarray
    affine: bool = False

    def __call__(self, x):
        return _features(x, self.affine, len(self.w) - int(self.affine)) @ self.w


def _cell_of(x, cells):
    x = np.asarray(x, dtype=float)
    return np.clip(np.floor(x * cells), 0, cells - 1).astype(np.int64)


def _features(x, affine, dim):
    x = np.asarray(x, dtype=float)
    x = x.reshape(-1, 1) if dim == 1 else np.atleast_2d(x)
    if affine:
        x = np.hstack([x, np.ones((len(x), 1))])
    return x


# --------------------------------------------------------------------------
# classes


class FiniteClass:
    """Explicit finite class over a discrete domain.

    Parameters
    ----------
    table : array, shape (k, n_atoms)
        ``table[j, i]`` is the value of function ``j`` at atom ``i``.
    vc_dim : int, optional
        Defaults to ``max(1, ceil(log2 k))``.
    """

    kind = "finite"

    def __init__(self, table, vc_dim: int | None = None, names=None):
        table = np.array(table, dtype=float)
        if table.ndim != 2 or table.shape[0] == 0:
            raise ValueError("table must be a nonempty 2-d array")
        table.setflags(write=False)
        self.table = table
        self.f_bar = float(max(np.abs(table).max(), 1e-12))
        k = table.shape[0]
        self.vc_dim = int(vc_dim) if vc_dim is not None else max(1, math.ceil(math.log2(k)))
        self.names = list(names) if names is not None else [f"h{j}" for j in range(k)]
        self.members = [TabularFunction(table[j], j) for j in range(k)]

    def __len__(self):
        return self.table.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.table.shape[1]

    def risks(self, loss: SurrogateLoss, batch: LabeledBatch) -> np.ndarray:
        """Empirical risk of every member on ``batch``."""
        if len(batch) == 0:
            return np.zeros(len(self))
        margins = self.table[:, np.asarray(batch.xs, dtype=np.int64)] * batch.ys
        return np.asarray(eval_loss(loss, margins)).mean(axis=1)

    def losses(self, loss, batch) -> np.ndarray:
        """Per-sample losses, shape ``(k, q)``."""
        margins = self.table[:, np.asarray(batch.xs, dtype=np.int64)] * batch.ys
        return np.asarray(eval_loss(loss, margins)).reshape(len(self), len(batch))


class MonotoneGridClass:
    """Nondecreasing step functions on ``[0, 1]`` with values in ``[-f_bar, f_bar]``."""

    kind = "monotone_grid"

    def __init__(self, cells: int = 32, f_bar: float = 1.0, vc_dim: int = 1):
        if cells < 1:
            raise ValueError("cells must be positive")
        self.cells = int(cells)
        self.f_bar = float(f_bar)
        self.vc_dim = int(vc_dim)

    def cell_of(self, x):
        return _cell_of(x, self.cells)

    def cell_stats(self, batch: LabeledBatch):
        """Per-cell sample counts and label sums."""
        c = self.cell_of(batch.xs)
        n = np.bincount(c, minlength=self.cells).astype(float)
        d = np.bincount(c, weights=batch.ys, minlength=self.cells)
        return n, d


class LinearBallClass:
    """Linear functions ``<w, phi(x)>`` with ``||w||_2 <= radius``.

    ``phi(x)`` is ``x`` itself, with a trailing 1 when ``affine`` is set.
    ``f_bar`` is ``radius * feature_bound``; the default feature bound
    assumes points in the unit cube.
    """

    kind = "linear_ball"

    def __init__(self, dim: int, radius: float = 1.0, affine: bool = False,
                 feature_bound: float | None = None, vc_dim: int | None = None):
        self.dim = int(dim)
        self.radius = float(radius)
        self.affine = bool(affine)
        self.n_features = self.dim + int(self.affine)
        if feature_bound is None:
            feature_bound = math.sqrt(self.n_features)
        self.f_bar = self.radius * float(feature_bound)
        self.vc_dim = int(vc_dim) if vc_dim is not None else self.dim + 1

    def features(self, x):
        return _features(x, self.affine, self.dim)


# --------------------------------------------------------------------------
# risk helpers


def as_batch(samples) -> LabeledBatch:
    if isinstance(samples, LabeledBatch):
        return samples
    return LabeledBatch.from_pairs(samples)


def empirical_risk(h, loss: SurrogateLoss, batch: LabeledBatch) -> float:
    """Mean loss of ``h`` on ``batch``; zero on an empty batch."""
    if len(batch) == 0:
        return 0.0
    return float(np.mean(eval_loss(loss, h(batch.xs) * batch.ys)))


def _quadratic_like(fclass, loss) -> bool:
    # on |h| <= 1 the truncated quadratic coincides with (y - h)^2
    if loss.kind is LossKind.QUADRATIC:
        return True
    return loss.kind is LossKind.TRUNCATED_QUADRATIC and fclass.f_bar <= 1.0


def _grid_risk(n, d, h, q):
    return float((n @ (h * h) - 2.0 * d @ h + n.sum()) / q) if q else 0.0


def isotonic_regression(y, w=None) -> np.ndarray:
    """Weighted least-squares nondecreasing fit by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    vals, wts, cnts = [], [], []
    for yi, wi in zip(y, w):
        vals.append(yi)
        wts.append(wi)
        cnts.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            v2, w2, c2 = vals.pop(), wts.pop(), cnts.pop()
            tw = wts[-1] + w2
            vals[-1] = (vals[-1] * wts[-1] + v2 * w2) / tw
            wts[-1] = tw
            cnts[-1] += c2
    return np.repeat(vals, cnts)


def _monotone_pav(fclass: MonotoneGridClass, n, d) -> np.ndarray:
    occ = np.nonzero(n > 0)[0]
    h = np.zeros(fclass.cells)
    if len(occ) == 0:
        return h
    fit = np.clip(isotonic_regression(d[occ] / n[occ], n[occ]), -fclass.f_bar, fclass.f_bar)
    # empty cells copy the nearest occupied cell to their left (or the first one)
    pos = np.searchsorted(occ, np.arange(fclass.cells), side="right") - 1
    return fit[np.maximum(pos, 0)]


# --------------------------------------------------------------------------
# version spaces


@dataclass(frozen=True)
class RiskConstraint:
    """``R(h; batch) <= budget``."""

    batch: LabeledBatch
    budget: float


@dataclass(frozen=True, eq=False)
class VersionSpace:
    """A function class cut down by empirical-risk constraints.

    ``loss`` is the loss in which the constraint budgets are expressed.
    """

    function_class: object
    loss: SurrogateLoss
    constraints: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False)

    def append(self, constraint: RiskConstraint) -> "VersionSpace":
        return VersionSpace(self.function_class, self.loss, self.constraints + (constraint,))

    def __len__(self):
        return len(self.constraints)

    @property
    def active_constraints(self):
        # constraints on empty batches read 0 <= budget and never bind
        return tuple(c for c in self.constraints if len(c.batch))


def _finite_feasible(vs: VersionSpace) -> np.ndarray:
    key = "finite_mask"
    if key not in vs._cache:
        cls = vs.function_class
        mask = np.ones(len(cls), dtype=bool)
        for con in vs.active_constraints:
            mask &= cls.risks(vs.loss, con.batch) <= con.budget + FEAS_TOL
        mask.setflags(write=False)
        vs._cache[key] = mask
    return vs._cache[key]


# ---- monotone grid, quadratic-type losses: direct conic programs


def _conic_program(vs: VersionSpace):
    if "conic" in vs._cache:
        return vs._cache["conic"]
    import clarabel

    cls = vs.function_class
    G, B = cls.cells, cls.f_bar
    rows = [sp.csr_matrix(([-1.0], ([0], [0])), shape=(1, G)),
            sp.csr_matrix(([1.0], ([0], [G - 1])), shape=(1, G))]
    bs = [np.array([B, B])]
    if G > 1:
        rows.append(sp.eye(G - 1, G, 0) - sp.eye(G - 1, G, 1))
        bs.append(np.zeros(G - 1))
    cones = [clarabel.NonnegativeConeT(G + 1)]
    for con in vs.active_constraints:
        n, d = cls.cell_stats(con.batch)
        q = len(con.batch)
        occ = np.nonzero(n > 0)[0]
        rho2 = q * con.budget - n.sum() + np.sum(d[occ] ** 2 / n[occ])
        if rho2 < -FEAS_TOL * q:
            raise InfeasibleVersionSpace("risk budget below the unconstrained minimum")
        s = np.sqrt(n[occ])
        k = len(occ)
        rows.append(sp.csr_matrix((-s, (np.arange(1, k + 1), occ)), shape=(k + 1, G)))
        bs.append(np.concatenate([[math.sqrt(max(rho2, 0.0))], -s * d[occ] / n[occ]]))
        cones.append(clarabel.SecondOrderConeT(k + 1))
    prog = (sp.vstack(rows).tocsc(), np.concatenate(bs), cones)
    vs._cache["conic"] = prog
    return prog


def _clarabel_solve(prog, P, qv):
    import clarabel

    A, b, cones = prog
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    sol = clarabel.DefaultSolver(P, qv, A, b, cones, settings).solve()
    status = str(sol.status)
    if status.endswith("Solved"):
        return np.asarray(sol.x)
    if "Infeasible" in status:
        raise InfeasibleVersionSpace(f"conic solver status {status}")
    raise RuntimeError(f"conic solver failed with status {status}")


def _project_grid(x, B):
    return np.clip(np.maximum.accumulate(x), -B, B)


# ---- generic convex programs through cvxpy


def _cvx_loss(loss, margins):
    import cvxpy as cp

    if loss.kind is LossKind.QUADRATIC:
        return cp.square(1 - margins)
    if loss.kind is LossKind.TRUNCATED_QUADRATIC:
        return cp.square(cp.pos(1 - margins))
    if loss.kind is LossKind.HINGE:
        return cp.pos(1 - margins)
    if loss.kind is LossKind.EXPONENTIAL:
        return cp.exp(-margins)
    raise UnsupportedClassError("the 0-1 loss needs a finite class")


def _design(cls, batch):
    """Matrix ``F`` with ``h(xs) = F @ params``."""
    if cls.kind == "monotone_grid":
        c = cls.cell_of(batch.xs)
        return sp.csr_matrix((np.ones(len(c)), (np.arange(len(c)), c)), shape=(len(c), cls.cells))
    return cls.features(batch.xs)


def _cvx_solve(vs: VersionSpace, objective_fn, loss=None):
    import cvxpy as cp

    cls = vs.function_class
    n_par = cls.cells if cls.kind == "monotone_grid" else cls.n_features
    v = cp.Variable(n_par)
    cons = []
    if cls.kind == "monotone_grid":
        cons += [v >= -cls.f_bar, v <= cls.f_bar]
        if n_par > 1:
            cons.append(cp.diff(v) >= 0)
    else:
        cons.append(cp.norm(v, 2) <= cls.radius)
    for con in vs.active_constraints:
        m = cp.multiply(con.batch.ys, _design(cls, con.batch) @ v)
        cons.append(cp.sum(_cvx_loss(vs.loss, m)) / len(con.batch) <= con.budget)
    prob = cp.Problem(cp.Minimize(objective_fn(v)), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.SolverError:
        prob.solve(solver=cp.SCS, eps=1e-9)
    if prob.status in ("infeasible", "infeasible_inaccurate"):
        raise InfeasibleVersionSpace(f"solver status {prob.status}")
    if v.value is None:
        raise RuntimeError(f"solver failed with status {prob.status}")
    x = np.asarray(v.value, dtype=float)
    if cls.kind == "monotone_grid":
        return _project_grid(x, cls.f_bar)
    nrm = np.linalg.norm(x)
    return x * (cls.radius / nrm) if nrm > cls.radius else x


def _wrap(cls, params):
    if cls.kind == "monotone_grid":
        return GridFunction(params)
    return LinearFunction(params, cls.affine)


def _cvx_objective(cls, loss, batch):
    import cvxpy as cp

    if len(batch) == 0:
        return lambda v: cp.sum_squares(v)
    F = _design(cls, batch)
    return lambda v: cp.sum(_cvx_loss(loss, cp.multiply(batch.ys, F @ v))) / len(batch)


# --------------------------------------------------------------------------
# operations


def erm(fclass, loss: SurrogateLoss, samples):
    """Empirical risk minimiser over the whole class.

    Finite classes return the first minimiser in listing order.  The
    monotone class with a quadratic-type loss uses isotonic regression
    clipped to ``[-f_bar, f_bar]``.  Everything else is a convex program.
    """
    batch = as_batch(samples)
    if len(batch) == 0:
        raise ValueError("erm needs at least one sample")
    if fclass.kind == "finite":
        return fclass.members[int(np.argmin(fclass.risks(loss, batch)))]
    if fclass.kind == "monotone_grid" and _quadratic_like(fclass, loss):
        return GridFunction(_monotone_pav(fclass, *fclass.cell_stats(batch)))
    vs = VersionSpace(fclass, loss)
    return _wrap(fclass, _cvx_solve(vs, _cvx_objective(fclass, loss, batch)))


def feasible(vspace: VersionSpace) -> bool:
    """Whether some function satisfies every constraint."""
    cls = vspace.function_class
    if cls.kind == "finite":
        return bool(_finite_feasible(vspace).any())
    try:
        constrained_min_risk(vspace, vspace.loss, LabeledBatch.empty())
    except InfeasibleVersionSpace:
        return False
    return True


def version_space_members(vspace: VersionSpace) -> list:
    """Feasible members of a finite class; empty when infeasible."""
    cls = vspace.function_class
    if cls.kind != "finite":
        raise UnsupportedClassError("members can only be enumerated for finite classes")
    return [cls.members[j] for j in np.nonzero(_finite_feasible(vspace))[0]]


def constrained_min_risk(vspace: VersionSpace, loss: SurrogateLoss | None, objective: LabeledBatch):
    """Minimise the empirical risk on ``objective`` over the version space.

    Returns
    -------
    value : float
        Empirical risk of the witness (0 for an empty objective).
    witness : callable
        A feasible minimiser.  For an empty objective this is a canonical
        member: the first feasible one for finite classes, the minimum
        norm feasible one otherwise.

    Raises
    ------
    InfeasibleVersionSpace
    """
    loss = vspace.loss if loss is None else loss
    objective = as_batch(objective)
    cls = vspace.function_class
    q = len(objective)
    if cls.kind == "finite":
        mask = _finite_feasible(vspace)
        if not mask.any():
            raise InfeasibleVersionSpace("no member satisfies every constraint")
        if q == 0:
            return 0.0, cls.members[int(np.argmax(mask))]
        risks = np.where(mask, cls.risks(loss, objective), np.inf)
        j = int(np.argmin(risks))
        return float(risks[j]), cls.members[j]

    fast = (cls.kind == "monotone_grid" and _quadratic_like(cls, loss)
            and _quadratic_like(cls, vspace.loss))
    if fast:
        n, d = cls.cell_stats(objective)
        if not vspace.active_constraints:
            h = _monotone_pav(cls, n, d)
        else:
            prog = _conic_program(vspace)
            if q == 0:
                P, qv = sp.identity(cls.cells, format="csc"), np.zeros(cls.cells)
            else:
                P, qv = sp.diags(2.0 * n / q, format="csc"), -2.0 * d / q
            h = _project_grid(_clarabel_solve(prog, P, qv), cls.f_bar)
        return _grid_risk(n, d, h, q), GridFunction(h)

    if q == 0 and not vspace.active_constraints:
        n_par = cls.cells if cls.kind == "monotone_grid" else cls.n_features
        h = _wrap(cls, np.zeros(n_par))
        return 0.0, h
    params = _cvx_solve(vspace, _cvx_objective(cls, loss, objective))
    h = _wrap(cls, params)
    return empirical_risk(h, loss, objective), h


def _extreme(vspace: VersionSpace, x_or_cell, direction: float) -> float:
    """``direction * min over V of direction * h(x)``; for grids ``x_or_cell`` is a cell."""
    cls = vspace.function_class
    key = ("extreme", x_or_cell if cls.kind == "monotone_grid" else None, direction)
    if key[1] is not None and key in vspace._cache:
        return vspace._cache[key]
    if cls.kind == "monotone_grid":
        c = int(x_or_cell)
        if not vspace.active_constraints:
            val = -direction * cls.f_bar
        elif _quadratic_like(cls, vspace.loss):
            qv = np.zeros(cls.cells)
            qv[c] = direction
            x = _clarabel_solve(_conic_program(vspace), sp.csc_matrix((cls.cells, cls.cells)), qv)
            val = float(x[c])
        else:
            val = float(_cvx_solve(vspace, lambda v: direction * v[c])[c])
        vspace._cache[key] = val
        return val
    phi = cls.features(np.asarray(x_or_cell))[0]
    if not vspace.active_constraints:
        return -direction * cls.radius * float(np.linalg.norm(phi))
    return float(_cvx_solve(vspace, lambda v: direction * (phi @ v)) @ phi)


def dis_contains(vspace: VersionSpace, loss: SurrogateLoss | None, x) -> bool:
    """Whether two feasible functions disagree in sign at ``x``.

    Finite classes enumerate; other classes solve two programs, one for
    each sign.  The test is slightly generous (``DIS_TOL``) so that solver
    round-off never removes a point from the region.
    """
    cls = vspace.function_class
    if cls.kind == "finite":
        return _finite_sign_feasible(vspace, x, True) and _finite_sign_feasible(vspace, x, False)
    key = cls.cell_of(x).item() if cls.kind == "monotone_grid" else x
    hi = _extreme(vspace, key, -1.0)
    lo = _extreme(vspace, key, 1.0)
    return bool(hi >= -DIS_TOL and lo < DIS_TOL)


def _finite_sign_feasible(vspace: VersionSpace, x, positive: bool) -> bool:
    """Feasibility of ``{h in V : sign h(x) = +1}`` (or ``-1``) via the worst constraint slack."""
    cls = vspace.function_class
    rows = (cls.table[:, int(x)] >= 0) == positive
    if not rows.any():
        return False
    worst = np.full(int(rows.sum()), -np.inf)
    for con in vspace.active_constraints:
        worst = np.maximum(worst, cls.risks(vspace.loss, con.batch)[rows] - con.budget)
    return bool(worst.min() <= FEAS_TOL)


def _monotone_dis_interval(vspace: VersionSpace):
    """Cells ``[lo, hi]`` of the disagreement region; both extremes are monotone in the cell."""
    if "dis_interval" in vspace._cache:
        return vspace._cache["dis_interval"]
    G = vspace.function_class.cells

    def first_true(pred):
        lo, hi = 0, G
        while lo < hi:
            mid = (lo + hi) // 2
            if pred(mid):
                hi = mid
            else:
                lo = mid + 1
        return lo

    c_lo = first_true(lambda c: _extreme(vspace, c, -1.0) >= -DIS_TOL)
    c_hi = first_true(lambda c: _extreme(vspace, c, 1.0) >= DIS_TOL) - 1
    vspace._cache["dis_interval"] = (c_lo, c_hi)
    return c_lo, c_hi


def dis_mask(vspace: VersionSpace, loss: SurrogateLoss | None, xs) -> np.ndarray:
    """Vectorised :func:`dis_contains`."""
    cls = vspace.function_class
    if cls.kind == "finite":
        mask = _finite_feasible(vspace)
        if not mask.any():
            raise InfeasibleVersionSpace("no member satisfies every constraint")
        sub = cls.table[mask] >= 0
        atom_dis = sub.any(axis=0) & ~sub.all(axis=0)
        return atom_dis[np.asarray(xs, dtype=np.int64)]
    if cls.kind == "monotone_grid":
        lo, hi = _monotone_dis_interval(vspace)
        c = cls.cell_of(xs)
        return (c >= lo) & (c <= hi)
    xs = np.asarray(xs)
    return np.array([dis_contains(vspace, loss, x) for x in xs], dtype=bool)
