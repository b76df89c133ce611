import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup_lab.activation import DomainError
from blowup_lab.constructions import (
    FAMILY_NAMES,
    Family,
    all_families,
    envelope_gap,
    family_risk,
    sequence_risk_bound,
    sequence_theta,
    verify_sequence,
)
from blowup_lab.network import ParamVector
from blowup_lab.risk_gradient import Indicator, risk_exact
from blowup_lab.activation import ActivationKind


def test_relu_theta_example():
    th = sequence_theta(Family("relu_indicator"), 1, (0, 1), 2)
    assert np.allclose(th.values, [2, 2, -0.5, -1.5, 1, -1, 0])


def test_softplus_exact_theta_example():
    th = sequence_theta(Family("softplus_identity_exact"), 1, (0, 1), 2)
    assert np.allclose(th.values, [1, -1, 0, 0, 1, -1, 0])


def test_repu_theta_example():
    th = sequence_theta(Family("repu_power", 2), 10, (0, 1), 2)
    assert np.allclose(th.values, [1, 1, 0.1 - 0.5, -0.5, 5, -5, 0])


def test_bound_examples():
    f = Family("relu_indicator")
    assert sequence_risk_bound(f, 1) == 1 / 8
    assert sequence_risk_bound(f, 1000) == pytest.approx(1 / 2006)
    assert sequence_risk_bound(Family("softplus_square"), 7) is None


def test_relu_n1_risk_is_one_over_24():
    # the residual on [0, 1] is a trapezoid: 0 up to 1/4, a ramp to 1/2, a ramp back to 3/4
    th = sequence_theta(Family("relu_indicator"), 1, (0, 1), 2)
    assert risk_exact(th, ActivationKind(1), Indicator(), (0, 1)).value == pytest.approx(1 / 24, abs=1e-15)


def test_relu_closed_form_risk():
    f = Family("relu_indicator")
    for n in (1, 3, 10, 1000):
        assert family_risk(f, sequence_theta(f, n), (0, 1)) == pytest.approx(1 / (6 * (n + 3)), rel=1e-12)


def test_relu_report_rows():
    rep = verify_sequence(Family("relu_indicator"), [1, 10, 100, 1000], (0, 1))
    risks = [r["risk"] for r in rep.rows]
    assert risks[0] == pytest.approx(1 / 24, abs=1e-12)
    assert all(x > y for x, y in zip(risks, risks[1:]))
    assert all(r["risk"] <= r["bound"] for r in rep.rows)


def test_negative_leak_does_not_reach_zero():
    # with gamma < 0 both ramps shrink by 1 + gamma, so the sequence stalls away from 0
    rep = verify_sequence(Family("relu_indicator", -0.5), [1, 10, 100, 1000, 10000], (0, 1))
    assert not rep.passed
    assert rep.rows[-1]["risk"] > 0.2


def test_exact_fit_is_zero():
    rep = verify_sequence(Family("softplus_identity_exact"))
    assert rep.passed and rep.rows[0]["risk"] <= 1e-18


def test_logistic_identity_rate():
    # the pointwise error is O(n^-2), so the L2 error sqrt(risk) drops by 1e-2 per decade
    f = Family("logistic_identity")
    ns = [10, 100, 1000, 10000]
    l2 = [math.sqrt(family_risk(f, sequence_theta(f, n), (0, 1))) for n in ns]
    for x, y in zip(l2, l2[1:]):
        assert 1e-2 / 5 <= y / x <= 1e-2 * 5


@pytest.mark.parametrize("name", FAMILY_NAMES)
@pytest.mark.parametrize("domain", [(0.0, 1.0), (-1.0, 2.0), (0.5, 3.0)])
def test_every_family_passes(name, domain):
    rep = verify_sequence(Family(name), domain=domain)
    assert rep.passed, rep.messages


def test_softplus_relu_envelope():
    lo, hi = envelope_gap(Family("softplus_relu_target"), 10)
    assert 0 <= lo and hi <= 1 / 10


def test_family_validation():
    with pytest.raises(DomainError):
        Family("nope")
    with pytest.raises(DomainError):
        Family("relu_indicator", 0.5)
    with pytest.raises(DomainError):
        Family("isru_square", 3.0)
    with pytest.raises(DomainError):
        Family("repu_power", 1)
    with pytest.raises(DomainError):
        sequence_theta(Family("tanh_square"), 10, (0, 1), 1)
    assert Family.parse("leaky_relu_indicator:0.25") == Family("leaky_relu_indicator", 0.25)


def test_extra_neurons_are_zero():
    th = sequence_theta(Family("tanh_square"), 10, (0, 1), 4)
    base = sequence_theta(Family("tanh_square"), 10, (0, 1), 2)
    assert th.h == 4
    assert np.array_equal(th.w[:2], base.w) and np.all(th.v[2:] == 0)
    assert family_risk(Family("tanh_square"), th, (0, 1)) == pytest.approx(family_risk(Family("tanh_square"), base, (0, 1)), rel=1e-9)


def test_report_serializes():
    j = verify_sequence(Family("relu_indicator")).to_json()
    assert set(j["rows"][0]) == {"family", "n", "risk", "bound", "pass"}


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 10**6), lo=st.floats(-3, 3), width=st.floats(0.1, 5))
def test_relu_bound_holds_everywhere(n, lo, width):
    dom = (lo, lo + width)
    f = Family("relu_indicator")
    r = family_risk(f, sequence_theta(f, n, dom), dom)
    assert r <= sequence_risk_bound(f, n, dom) * (1 + 1e-12)


@settings(max_examples=15, deadline=None)
@given(gamma=st.floats(0.05, 3).filter(lambda g: abs(g - 1) > 0.05), n=st.integers(1, 10**4))
def test_leaky_bound_holds(gamma, n):
    f = Family("leaky_relu_indicator", gamma)
    r = family_risk(f, sequence_theta(f, n), (0, 1))
    assert r <= sequence_risk_bound(f, n) * (1 + 1e-9)
