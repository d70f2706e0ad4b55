import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surrogate_al.losses import (CalibrationError, LossKind, calibration_table, capital_psi,
                                 capital_psi_inverse, conditional_risk, constrained_minimizer,
                                 eval_loss, lemma3_params, make_loss, pointwise_minimizer, psi,
                                 psi_tilde)

CALIBRATED = ["exponential", "hinge", "quadratic", "truncated_quadratic"]
ALL = CALIBRATED + ["zero_one"]


def brute_minimum(loss, eta, lo, hi, n=200001):
    """Dense grid minimum, independent of the coarse-grid + golden-section search."""
    z = np.linspace(lo, hi, n)
    r = eta * np.asarray(eval_loss(loss, z)) + (1 - eta) * np.asarray(eval_loss(loss, -z))
    return float(r.min())


# ---- eval_loss / conditional_risk


def test_eval_loss_examples():
    assert eval_loss(make_loss("exponential"), 0.0) == 1.0
    assert eval_loss(make_loss("hinge"), 2.0) == 0.0
    assert eval_loss(make_loss("quadratic"), -1.0) == 4.0


def test_eval_loss_infinities():
    assert eval_loss(make_loss("quadratic"), -math.inf) == math.inf
    assert eval_loss(make_loss("exponential"), math.inf) == 0.0
    assert eval_loss(make_loss("zero_one"), 0.0) == 1.0
    assert eval_loss(make_loss("zero_one"), 1e-12) == 0.0


def test_conditional_risk_examples():
    q = make_loss("quadratic")
    assert conditional_risk(q, 1.0, 1.0) == 0.0
    assert conditional_risk(q, 0.75, 0.5) == pytest.approx(0.75, abs=1e-15)
    assert conditional_risk(make_loss("hinge"), 0.5, 0.0) == 1.0


def test_conditional_risk_no_nan_at_infinity():
    q = make_loss("exponential")
    assert conditional_risk(q, 1.0, math.inf) == 0.0


# ---- minimisers


def test_pointwise_minimizer_quadratic():
    z, l = pointwise_minimizer(make_loss("quadratic"), 0.75)
    assert z == pytest.approx(0.5, abs=1e-9)
    assert l == pytest.approx(0.75, abs=1e-12)


@pytest.mark.parametrize("kind", CALIBRATED)
def test_pointwise_minimizer_half(kind):
    loss = make_loss(kind)
    z, l = pointwise_minimizer(loss, 0.5)
    assert z == pytest.approx(0.0, abs=1e-9)
    assert l == pytest.approx(eval_loss(loss, 0.0), abs=1e-12)


def test_zero_one_minimizers():
    z, l = pointwise_minimizer(make_loss("zero_one"), 0.3)
    assert z < 0
    assert l == pytest.approx(0.3)
    assert constrained_minimizer(make_loss("zero_one"), 0.3) == pytest.approx(0.7)


def test_constrained_minimizer_examples():
    assert constrained_minimizer(make_loss("quadratic"), 0.75) == pytest.approx(1.0, abs=1e-12)
    for kind in ALL:
        loss = make_loss(kind)
        assert constrained_minimizer(loss, 0.5) == pytest.approx(pointwise_minimizer(loss, 0.5)[1])


@pytest.mark.parametrize("kind", CALIBRATED)
@pytest.mark.parametrize("eta", [0.0, 0.1, 0.37, 0.62, 0.9, 1.0])
def test_minimum_matches_dense_grid(kind, eta):
    loss = make_loss(kind, 2.0)
    _, l = pointwise_minimizer(loss, eta)
    assert l == pytest.approx(brute_minimum(loss, eta, -2.0, 2.0), abs=1e-8)
    lo, hi = (0.0, 2.0) if eta < 0.5 else (-2.0, 0.0)
    assert constrained_minimizer(loss, eta) == pytest.approx(brute_minimum(loss, eta, lo, hi), abs=1e-8)


def test_quadratic_closed_form_minimiser():
    eta = np.linspace(0, 1, 41)
    z, l = pointwise_minimizer(make_loss("quadratic"), eta)
    np.testing.assert_allclose(z, 2 * eta - 1, atol=1e-9)
    np.testing.assert_allclose(l, 4 * eta * (1 - eta), atol=1e-12)


@pytest.mark.parametrize("kind", CALIBRATED)
def test_sign_of_minimiser(kind):
    eta = np.array([e for e in np.linspace(0.01, 0.99, 99) if abs(e - 0.5) > 1e-12])
    z, _ = pointwise_minimizer(make_loss(kind), eta)
    assert np.all(np.sign(z) == np.sign(eta - 0.5))


def test_minimiser_clamped_to_f_bar():
    z, l = pointwise_minimizer(make_loss("exponential", 1.0), 1.0)
    assert z == pytest.approx(1.0)
    assert l == pytest.approx(math.exp(-1.0))


def test_rejects_bad_eta():
    with pytest.raises(ValueError):
        pointwise_minimizer(make_loss("quadratic"), 1.5)


# ---- psi


def test_psi_tilde_examples():
    assert psi_tilde(make_loss("quadratic"), 0.5) == pytest.approx(0.25, abs=1e-12)
    assert psi_tilde(make_loss("exponential"), 0.6) == pytest.approx(0.2, abs=1e-9)
    for kind in CALIBRATED:
        assert psi_tilde(make_loss(kind), 0.0) == pytest.approx(0.0, abs=1e-15)


def test_psi_examples():
    assert psi(make_loss("hinge"), 0.3) == pytest.approx(0.3, abs=1e-12)
    assert psi(make_loss("truncated_quadratic"), 0.5) == pytest.approx(0.25, abs=1e-12)
    for kind in ALL:
        assert psi(make_loss(kind), 0.0) == 0.0


@pytest.mark.parametrize("kind,f_bar", [("exponential", 20.0), ("hinge", 1.0),
                                        ("quadratic", 1.0), ("truncated_quadratic", 1.0)])
def test_envelope_matches_closed_form(kind, f_bar):
    loss = make_loss(kind, f_bar)
    table = calibration_table(loss)
    x = np.linspace(0, 1, 101)
    assert np.max(np.abs(table.envelope(x) - loss.closed_form_psi(x))) <= 1e-4
    assert table.closed_form_valid


def test_exponential_clamp_breaks_closed_form():
    # with f_bar = 1 the clamped minimiser changes psi_tilde near 1, so the
    # envelope is used instead of the closed form
    loss = make_loss("exponential", 1.0)
    assert not calibration_table(loss).closed_form_valid
    assert psi(loss, 1.0) == pytest.approx(calibration_table(loss).envelope(1.0))


@pytest.mark.parametrize("kind", ALL)
def test_envelope_properties(kind):
    table = calibration_table(make_loss(kind))
    assert np.all(table.psi <= table.psi_tilde + 1e-9)
    assert np.all(np.diff(table.psi) >= -1e-9)
    assert np.all(np.diff(table.psi, 2) >= -1e-9)
    assert table.psi[0] == 0.0


def test_calibration_table_is_immutable():
    table = calibration_table(make_loss("quadratic"))
    with pytest.raises(ValueError):
        table.psi[3] = 1.0


def test_calibration_error_type():
    assert issubclass(CalibrationError, ValueError)


# ---- constants


def test_constants_examples():
    q = make_loss("quadratic", 3.0)
    assert (q.lipschitz_L, q.convexity_c, q.convexity_r) == (8.0, 0.25, 2.0)
    e = make_loss("exponential", 2.0)
    assert e.lipschitz_L == pytest.approx(math.exp(2))
    assert e.convexity_c == pytest.approx(math.exp(-2) / 8)
    assert make_loss("hinge").convexity_r == math.inf


@pytest.mark.parametrize("kind", ALL)
@pytest.mark.parametrize("f_bar", [0.5, 1.0, 3.0])
def test_loss_bound(kind, f_bar):
    loss = make_loss(kind, f_bar)
    assert loss.loss_bound >= 1
    assert loss.loss_bound >= eval_loss(loss, -f_bar)
    assert loss.loss_bound >= eval_loss(loss, f_bar)


def test_curvature_constants_examples():
    assert lemma3_params(make_loss("quadratic", 1.0)) == pytest.approx((32.0, 1.0))
    assert lemma3_params(make_loss("hinge")) == (1.0, 0.0)
    b, beta = lemma3_params(make_loss("exponential", 1.0))
    assert b == pytest.approx(4 * math.e ** 3, rel=1e-12)
    assert beta == 1.0


def test_metric_bound_override():
    assert make_loss("quadratic", 1.0, metric_bound=0.5).metric_bound == 0.5
    assert make_loss("truncated_quadratic", 2.0).metric_bound == 3.0


# ---- capital psi


def test_capital_psi_examples():
    assert capital_psi(make_loss("zero_one"), 0.2, 1, 1) == pytest.approx(0.1)
    assert capital_psi(make_loss("quadratic"), 0.2, 1, 1) == pytest.approx(0.05)
    assert capital_psi(make_loss("hinge"), 0.04, 2, 0.5) == pytest.approx(0.02)


def test_capital_psi_inverse_examples():
    z = make_loss("zero_one")
    assert capital_psi_inverse(z, 0.1) == pytest.approx(0.2, abs=1e-12)
    assert capital_psi_inverse(z, 0.9) == 1.0
    assert capital_psi_inverse(make_loss("quadratic"), 0.05) == pytest.approx(0.2, abs=1e-12)


def test_capital_psi_validates():
    with pytest.raises(ValueError):
        capital_psi(make_loss("quadratic"), 0.1, a=0.5)
    with pytest.raises(ValueError):
        capital_psi_inverse(make_loss("quadratic"), 0.0)


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(ALL), a=st.floats(1, 5), alpha=st.floats(0, 1),
       gamma=st.floats(1e-4, 0.5))
def test_capital_psi_inverse_roundtrip(kind, a, alpha, gamma):
    loss = make_loss(kind)
    eps = capital_psi_inverse(loss, gamma, a, alpha)
    assert 0 < eps <= 1
    if eps < 1:
        assert capital_psi(loss, eps, a, alpha) >= gamma * (1 - 1e-9)
        assert capital_psi(loss, eps * (1 - 1e-6), a, alpha) <= gamma * (1 + 1e-9)


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(CALIBRATED), z=st.floats(-1, 1), eta=st.floats(0, 1))
def test_minimum_is_a_lower_bound(kind, z, eta):
    loss = make_loss(kind)
    assert pointwise_minimizer(loss, eta)[1] <= conditional_risk(loss, eta, z) + 1e-12


def test_loss_kind_strings():
    assert LossKind("hinge") is LossKind.HINGE
    with pytest.raises(ValueError):
        make_loss("logistic")
