import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup_lab.activation import ActivationKind, DomainError
from blowup_lab.network import ParamVector
from blowup_lab.risk_gradient import Indicator, gradient, risk_value
from blowup_lab.verification import (
    FLOORS,
    CriticalPoint,
    affine_critical_point,
    affine_fit_minimum,
    affine_fit_minimum_dfo,
    affine_moments,
    affine_objective,
    certified_floor,
    critical_risk_floor,
    drop_neuron,
    find_critical_points,
    intmin_bound,
    neuron_drop_residuals,
    pinned_endpoint_minimum,
    standard_lemma_checks,
    subcase_floor,
    zero_mean_affine_solution,
)

RELU = ActivationKind(1)


@pytest.mark.parametrize(
    "domain, constraint, pin, expected",
    [
        ((0, 1), "none", None, (1.5, -0.25, 1 / 16)),
        ((0.25, 0.75), "none", None, (3.0, -1.0, 1 / 32)),
        ((0.375, 0.75), "pin-left-zero", 0.375, (32 / 9, -4 / 3, 1 / 36)),
        ((0.25, 0.625), "pin-right-one", 0.625, (32 / 9, -11 / 9, 1 / 36)),
    ],
)
def test_affine_minima(domain, constraint, pin, expected):
    fit = affine_fit_minimum(domain, constraint=constraint, pin=pin)
    assert (fit.alpha, fit.beta, fit.value) == pytest.approx(expected, abs=1e-12)
    dfo = affine_fit_minimum_dfo(domain, constraint=constraint, pin=pin)
    assert dfo.value == pytest.approx(expected[2], abs=1e-6)


def test_pinned_free_endpoints():
    p, fit = pinned_endpoint_minimum("left")
    assert p == pytest.approx(0.375, abs=1e-7) and fit.value == pytest.approx(1 / 36, abs=1e-12)
    p, fit = pinned_endpoint_minimum("right")
    assert p == pytest.approx(0.625, abs=1e-7) and fit.value == pytest.approx(1 / 36, abs=1e-12)


def test_pin_at_threshold_is_flagged():
    assert affine_fit_minimum((0.25, 0.75), constraint="pin-left-zero", pin=0.5).singular


def test_zero_moment_examples():
    assert zero_mean_affine_solution(0, 1) == pytest.approx((1.5, -0.25), abs=1e-15)
    assert zero_mean_affine_solution(0.25, 0.75) == pytest.approx((3.0, -1.0), abs=1e-14)
    with pytest.raises(DomainError):
        zero_mean_affine_solution(0.6, 0.9)


def test_intmin_examples():
    assert intmin_bound(1, 0, 1) == pytest.approx(1 / 12)
    assert intmin_bound(0, 0.2, 0.9) == 0
    assert intmin_bound(2, 0, 0.5) == pytest.approx(1 / 24)


def test_lemma_checks_all_pass():
    checks = standard_lemma_checks()
    assert len(checks) == 12 and all(c.passed for c in checks)
    unit = next(c for c in checks if c.lemma == "affine_min_unit").to_json()
    assert unit["claimed"][2] == 0.0625 and unit["pass"] is True


def test_certified_floors():
    assert certified_floor(1) == pytest.approx(1 / 36, abs=1e-12)
    assert certified_floor(2) == pytest.approx(1 / 864, abs=1e-12)
    assert FLOORS[2] <= certified_floor(2) + 1e-15
    assert subcase_floor(2) == 1 / 3456


def test_affine_critical_point():
    th = affine_critical_point()
    assert np.linalg.norm(gradient(th, RELU, Indicator(), (0, 1))) <= 1e-12
    assert risk_value(th, RELU, Indicator(), (0, 1)) == pytest.approx(1 / 16, abs=1e-15)


def test_critical_search_h1():
    res = find_critical_points(1, 40, seed=1)
    assert res.points
    for p in res.points:
        assert p.grad_norm <= 1e-8
        assert p.risk >= 1 / 36 - 1e-6
    m, floor, ok = critical_risk_floor(res.points, 1)
    assert ok and floor == 1 / 36


def test_critical_floor_needs_points():
    with pytest.raises(DomainError):
        critical_risk_floor([], 1)


def test_mutated_floor_is_caught():
    res = find_critical_points(2, 10, seed=0)
    _, floor, _ = critical_risk_floor(res.points, 2, {2: 1 / 400})
    assert floor > certified_floor(2)


def test_neuron_drop_consistency():
    # a point with an inactive neuron: removing it leaves a critical point of the smaller net
    th = ParamVector.from_parts([1.5, -1.0], [1.0, -2.0], [1.0, 0.7], -1.25)
    g = gradient(th, RELU, Indicator(), (0, 1))
    assert np.linalg.norm(g) <= 1e-12
    res = neuron_drop_residuals(CriticalPoint(th, 0.0, 1 / 16, 0, 0))
    assert [i for i, _ in res] == [1]
    assert res[0][1] <= 1e-12
    assert drop_neuron(th, 1).h == 1


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0, 0.49), b=st.floats(0.51, 1))
def test_zero_moment_property(a, b):
    al, be = zero_mean_affine_solution(a, b)
    m0, m1 = affine_moments(al, be, a, b)
    scale = 1 + abs(al) + abs(be)
    assert abs(m0) <= 1e-12 * scale and abs(m1) <= 1e-12 * scale


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0, 0.45), b=st.floats(0.55, 1), da=st.floats(-2, 2), db=st.floats(-2, 2))
def test_unconstrained_minimum_is_minimal(a, b, da, db):
    fit = affine_fit_minimum((a, b))
    assert affine_objective(fit.alpha + da, fit.beta + db, (a, b)) >= fit.value - 1e-14
    assert fit.value >= 0
