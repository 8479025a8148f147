import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gnevolt.costs import CostModel, LogCoshCost, QuadraticCost, QuarticCost, cost_from_dict
from gnevolt.errors import DomainError
from gnevolt.game import VarLimits

COSTS = [QuadraticCost(0.3), QuarticCost(0.1, 2.0), LogCoshCost(0.5, 0.05)]


@pytest.mark.parametrize("cost", COSTS, ids=lambda c: c.name)
def test_derivatives_match_finite_differences(cost):
    q = np.linspace(-0.7, 0.7, 29)
    h = 1e-6
    fd1 = (cost.value(q + h) - cost.value(q - h)) / (2 * h)
    np.testing.assert_allclose(cost.derivative(q), fd1, atol=1e-7)
    fd2 = (cost.derivative(q + h) - cost.derivative(q - h)) / (2 * h)
    np.testing.assert_allclose(cost.second_derivative(q), fd2, rtol=1e-5, atol=1e-4)


@pytest.mark.parametrize("cost", COSTS, ids=lambda c: c.name)
def test_roundtrip_dict(cost):
    assert cost_from_dict(cost.to_dict()) == cost


def test_logcosh_no_overflow():
    assert np.isfinite(LogCoshCost(1.0, 1e-4).value(5.0))
    assert LogCoshCost(1.0, 1e-4).value(5.0) == pytest.approx(5.0 - 1e-4 * np.log(2), rel=1e-12)


@pytest.mark.parametrize("entry", [{"type": "quadratic", "c": -1},
                                  {"type": "quartic", "c": 1, "d": -1},
                                  {"type": "logcosh", "a": 1, "s": 0},
                                  {"type": "cubic", "c": 1}])
def test_invalid_costs(entry):
    with pytest.raises(DomainError):
        cost_from_dict(entry)


def test_quadratic_fast_path_matches_generic():
    c = np.array([1e-4, 0.5, 2.0])
    cm = CostModel.quadratic(1.0, np.ones(3), c)
    assert cm.is_quadratic
    q = np.array([0.1, -0.4, 0.7])
    np.testing.assert_allclose(cm.gradient(q), c * q)
    np.testing.assert_allclose(cm.cost_values(q), 0.5 * c * q**2)
    np.testing.assert_array_equal(cm.hessian_diag(q), c)


def test_mixed_model_not_quadratic():
    cm = CostModel(1.0, np.ones(2), (QuadraticCost(1.0), QuarticCost(0.0, 1.0)))
    assert not cm.is_quadratic
    with pytest.raises(DomainError):
        cm.coefficients
    np.testing.assert_allclose(cm.gradient([0.5, 0.5]), [0.5, 0.125])


def test_convexity_spot_check():
    lim = VarLimits.uniform(3, -0.8, 0.8)
    cm = CostModel(1.0, np.ones(3), tuple(COSTS))
    assert cm.check_convex(lim)

    class Concave(QuadraticCost):
        def derivative(self, q):
            return -np.asarray(q)
    bad = CostModel(1.0, np.ones(1), (Concave(0.0),))
    assert not bad.check_convex(VarLimits.uniform(1, -1, 1))


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))
def test_quartic_derivative_monotone(c, d, a, b):
    cost = QuarticCost(c, d)
    lo, hi = min(a, b), max(a, b)
    assert cost.derivative(hi) >= cost.derivative(lo) - 1e-12


def test_negative_gamma_rejected():
    with pytest.raises(DomainError):
        CostModel.quadratic(-1.0, np.ones(2), 0.0)
