import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import LinearConstraint, NonlinearConstraint, isotonic_regression as sp_iso, \
    minimize

from surrogate_al.classes import (FiniteClass, GridFunction, InfeasibleVersionSpace,
                                  LinearBallClass, MonotoneGridClass, RiskConstraint,
                                  UnsupportedClassError, VersionSpace, constrained_min_risk,
                                  dis_contains, dis_mask, empirical_risk, erm, feasible,
                                  isotonic_regression, sign, version_space_members)
from surrogate_al.complexity import LabeledBatch
from surrogate_al.losses import make_loss
from surrogate_al.oracle import brute_dis, brute_erm, brute_members, random_finite_version_space

QUAD = make_loss("quadratic")


def batch_of(xs, ys, start=1):
    xs = np.asarray(xs)
    return LabeledBatch(np.arange(start, start + len(xs)), xs, np.asarray(ys, dtype=float))


def random_batch(rng, q, start=1):
    return batch_of(np.sort(rng.random(q)), np.where(rng.random(q) < 0.5, 1.0, -1.0), start)


# ---- basics


def test_sign_convention():
    assert sign(0.0) == 1.0
    assert sign(-0.0) == 1.0
    np.testing.assert_array_equal(sign([-2.0, 0.0, 3.0]), [-1.0, 1.0, 1.0])


def test_finite_class_risks():
    cls = FiniteClass([[1.0, -1.0], [0.5, 0.5]])
    b = batch_of([0, 1, 1], [1, 1, -1])
    np.testing.assert_allclose(cls.risks(QUAD, b), [4 / 3, 0.25 * 1 / 3 + 0.25 / 3 + 2.25 / 3])
    assert cls.vc_dim == 1
    assert FiniteClass(np.zeros((5, 2))).vc_dim == 3


def test_finite_table_is_read_only():
    cls = FiniteClass([[1.0, 2.0]])
    with pytest.raises(ValueError):
        cls.table[0, 0] = 3.0


def test_empirical_risk_empty_batch():
    assert empirical_risk(GridFunction(np.zeros(4)), QUAD, LabeledBatch.empty()) == 0.0


def test_erm_needs_samples():
    with pytest.raises(ValueError):
        erm(MonotoneGridClass(4), QUAD, LabeledBatch.empty())


# ---- isotonic regression


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0.1, 10)), min_size=1, max_size=30))
def test_isotonic_matches_scipy(pairs):
    y = np.array([p[0] for p in pairs])
    w = np.array([p[1] for p in pairs])
    ours = isotonic_regression(y, w)
    ref = sp_iso(y, weights=w).x
    np.testing.assert_allclose(ours, ref, atol=1e-9)
    assert np.all(np.diff(ours) >= -1e-12)


def test_monotone_erm_example():
    # two points in the same cell with opposite labels pool to zero
    cls = MonotoneGridClass(4)
    h = erm(cls, QUAD, batch_of([0.1, 0.2, 0.9], [1, -1, 1]))
    np.testing.assert_allclose(h.values, [0, 0, 0, 1])


def test_monotone_erm_against_brute():
    rng = np.random.default_rng(3)
    cls = MonotoneGridClass(16)
    for _ in range(50):
        b = random_batch(rng, int(rng.integers(1, 9)))
        np.testing.assert_allclose(erm(cls, QUAD, b).values, brute_erm(cls, QUAD, b).values,
                                   atol=1e-9)


def test_monotone_erm_clips_to_f_bar():
    cls = MonotoneGridClass(4, f_bar=0.5)
    h = erm(cls, QUAD, batch_of([0.1, 0.9], [-1, 1]))
    np.testing.assert_allclose(h.values, [-0.5, -0.5, -0.5, 0.5])


def test_hinge_erm_on_grid_matches_scipy():
    rng = np.random.default_rng(11)
    cls = MonotoneGridClass(6)
    hinge = make_loss("hinge")
    b = random_batch(rng, 12)
    h = erm(cls, hinge, b)
    risk = empirical_risk(h, hinge, b)
    assert np.all(np.diff(h.values) >= -1e-9)
    # the hinge ERM is a linear program; compare objective values
    F = np.zeros((len(b), 6))
    F[np.arange(len(b)), cls.cell_of(b.xs)] = 1.0
    cons = [LinearConstraint(np.eye(5, 6, 1) - np.eye(5, 6), 0, np.inf)]
    res = minimize(lambda v: np.mean(np.maximum(0, 1 - b.ys * (F @ v))), np.zeros(6),
                   bounds=[(-1, 1)] * 6, constraints=cons, method="COBYLA",
                   options={"maxiter": 20000})
    assert risk <= res.fun + 1e-6


# ---- version spaces


def test_version_space_is_persistent():
    vs = VersionSpace(FiniteClass([[1.0], [-1.0]]), QUAD)
    vs2 = vs.append(RiskConstraint(batch_of([0], [1]), 1.0))
    assert len(vs) == 0 and len(vs2) == 1


def test_empty_batch_constraint_never_binds():
    vs = VersionSpace(FiniteClass([[1.0], [-1.0]]), QUAD).append(
        RiskConstraint(LabeledBatch.empty(), 0.0))
    assert len(version_space_members(vs)) == 2


def test_infeasible_finite_version_space():
    vs = VersionSpace(FiniteClass([[1.0], [-1.0]]), QUAD).append(
        RiskConstraint(batch_of([0], [1]), -1.0))
    assert not feasible(vs)
    assert version_space_members(vs) == []
    with pytest.raises(InfeasibleVersionSpace):
        constrained_min_risk(vs, QUAD, batch_of([0], [1]))
    with pytest.raises(InfeasibleVersionSpace):
        dis_mask(vs, QUAD, [0])


def test_constrained_min_risk_finite():
    cls = FiniteClass([[1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]])
    vs = VersionSpace(cls, QUAD).append(RiskConstraint(batch_of([0], [1]), 0.5))
    value, h = constrained_min_risk(vs, QUAD, batch_of([1], [-1]))
    assert value == 0.0 and h.index == 1
    value, h = constrained_min_risk(vs, QUAD, LabeledBatch.empty())
    assert value == 0.0 and h.index == 0


def test_members_only_for_finite():
    with pytest.raises(UnsupportedClassError):
        version_space_members(VersionSpace(MonotoneGridClass(4), QUAD))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_finite_dis_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    vs, n_atoms = random_finite_version_space(rng, QUAD)
    expected = [brute_dis(vs, x) for x in range(n_atoms)]
    if brute_members(vs):
        np.testing.assert_array_equal(dis_mask(vs, QUAD, np.arange(n_atoms)), expected)
    assert [dis_contains(vs, QUAD, x) for x in range(n_atoms)] == expected


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_constraints_only_shrink(seed):
    rng = np.random.default_rng(seed)
    vs, n_atoms = random_finite_version_space(rng, QUAD, max_constraints=1)
    extra = RiskConstraint(batch_of(rng.integers(0, n_atoms, 3), [1, -1, 1], start=100),
                           float(rng.random() * 4))
    before = {h.index for h in version_space_members(vs)}
    after = {h.index for h in version_space_members(vs.append(extra))}
    assert after <= before


# ---- monotone class: constrained programs against an independent formulation


def _scipy_constrained(cls, constraints, objective):
    """SLSQP on the same program; slow but independent of the conic model."""
    G = cls.cells
    cons = [LinearConstraint(np.eye(G - 1, G, 1) - np.eye(G - 1, G), 0, np.inf)]
    for b, budget in constraints:
        c = cls.cell_of(b.xs)
        cons.append(NonlinearConstraint(
            lambda v, c=c, y=b.ys: np.mean((1 - y * v[c]) ** 2), -np.inf, budget))
    best = None
    for x0 in (np.zeros(G), np.linspace(-0.5, 0.5, G)):
        res = minimize(objective, x0, bounds=[(-cls.f_bar, cls.f_bar)] * G, constraints=cons,
                       method="SLSQP", options={"ftol": 1e-12, "maxiter": 500})
        if res.success and (best is None or res.fun < best.fun):
            best = res
    return best


def test_monotone_constrained_min_risk_matches_scipy():
    rng = np.random.default_rng(5)
    cls = MonotoneGridClass(6)
    for _ in range(5):
        b1 = random_batch(rng, 10)
        h0 = erm(cls, QUAD, b1)
        budget = empirical_risk(h0, QUAD, b1) + 0.1
        vs = VersionSpace(cls, QUAD).append(RiskConstraint(b1, budget))
        obj = random_batch(rng, 8, start=20)
        value, h = constrained_min_risk(vs, QUAD, obj)
        c = cls.cell_of(obj.xs)
        ref = _scipy_constrained(cls, [(b1, budget)], lambda v: np.mean((1 - obj.ys * v[c]) ** 2))
        assert value == pytest.approx(ref.fun, abs=1e-6)
        assert empirical_risk(h, QUAD, b1) <= budget + 1e-7
        assert np.all(np.diff(h.values) >= 0)


def test_monotone_extremes_match_scipy():
    rng = np.random.default_rng(8)
    cls = MonotoneGridClass(6)
    b1 = random_batch(rng, 12)
    budget = empirical_risk(erm(cls, QUAD, b1), QUAD, b1) + 0.05
    vs = VersionSpace(cls, QUAD).append(RiskConstraint(b1, budget))
    for cell in range(6):
        x = (cell + 0.5) / 6
        lo = _scipy_constrained(cls, [(b1, budget)], lambda v: v[cell]).fun
        hi = -_scipy_constrained(cls, [(b1, budget)], lambda v: -v[cell]).fun
        assert dis_contains(vs, QUAD, x) == (hi >= -1e-7 and lo < 1e-7)


def test_monotone_dis_mask_matches_pointwise():
    rng = np.random.default_rng(9)
    cls = MonotoneGridClass(16)
    b1 = random_batch(rng, 40)
    budget = empirical_risk(erm(cls, QUAD, b1), QUAD, b1) + 0.02
    vs = VersionSpace(cls, QUAD).append(RiskConstraint(b1, budget))
    xs = (np.arange(16) + 0.5) / 16
    mask = dis_mask(vs, QUAD, xs)
    fresh = VersionSpace(cls, QUAD, vs.constraints)
    assert list(mask) == [dis_contains(fresh, QUAD, x) for x in xs]
    # the region is an interval of cells
    idx = np.nonzero(mask)[0]
    assert len(idx) == 0 or np.all(np.diff(idx) == 1)


def test_unconstrained_monotone_dis_is_everything():
    vs = VersionSpace(MonotoneGridClass(8), QUAD)
    assert dis_mask(vs, QUAD, np.linspace(0, 1, 9)).all()


def test_monotone_budget_below_minimum_is_infeasible():
    cls = MonotoneGridClass(4)
    b1 = batch_of([0.1, 0.15], [1, -1])
    vs = VersionSpace(cls, QUAD).append(RiskConstraint(b1, 0.5))
    assert not feasible(vs)


def test_empty_objective_gives_canonical_member():
    cls = MonotoneGridClass(4)
    b1 = batch_of([0.1, 0.9], [-1, 1])
    vs = VersionSpace(cls, QUAD).append(RiskConstraint(b1, 0.5))
    value, h = constrained_min_risk(vs, QUAD, LabeledBatch.empty())
    assert value == 0.0
    assert empirical_risk(h, QUAD, b1) <= 0.5 + 1e-7
    # minimum norm: h = (-a, 0, 0, a) with (1 - a)^2 = 1/2
    a = 1 - np.sqrt(0.5)
    np.testing.assert_allclose(h.values, [-a, 0, 0, a], atol=1e-4)


# ---- linear class


def test_linear_features():
    cls = LinearBallClass(2, affine=True)
    np.testing.assert_array_equal(cls.features([0.5, 0.25]), [[0.5, 0.25, 1.0]])
    assert cls.vc_dim == 3 and cls.f_bar == pytest.approx(np.sqrt(3))


def test_linear_erm_quadratic_matches_scipy():
    rng = np.random.default_rng(2)
    cls = LinearBallClass(1, radius=1.0, affine=True)
    b = random_batch(rng, 20)
    h = erm(cls, QUAD, b)
    F = cls.features(b.xs)
    res = minimize(lambda w: np.mean((1 - b.ys * (F @ w)) ** 2), np.zeros(2), method="SLSQP",
                   constraints=[NonlinearConstraint(lambda w: w @ w, -np.inf, 1.0)],
                   options={"ftol": 1e-14})
    assert empirical_risk(h, QUAD, b) == pytest.approx(res.fun, abs=1e-6)
    assert np.linalg.norm(h.w) <= 1 + 1e-9


def test_linear_dis_unconstrained():
    vs = VersionSpace(LinearBallClass(1, affine=True), QUAD)
    assert dis_contains(vs, QUAD, 0.3)


def test_linear_dis_shrinks_with_constraints():
    cls = LinearBallClass(1, radius=1.0, affine=True)
    xs = np.linspace(0, 1, 40)
    b = batch_of(xs, np.where(xs >= 0.5, 1.0, -1.0))
    budget = empirical_risk(erm(cls, QUAD, b), QUAD, b) + 0.01
    vs = VersionSpace(cls, QUAD).append(RiskConstraint(b, budget))
    mask = dis_mask(vs, QUAD, np.array([0.0, 0.5, 1.0]))
    assert not mask[0] and not mask[2]
    assert mask[1]


def test_zero_one_loss_needs_finite_class():
    vs = VersionSpace(MonotoneGridClass(4), make_loss("zero_one")).append(
        RiskConstraint(batch_of([0.5], [1]), 0.5))
    with pytest.raises(UnsupportedClassError):
        constrained_min_risk(vs, None, batch_of([0.2], [1], start=5))
