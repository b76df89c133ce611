import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup_lab.activation import ActivationKind, DomainError
from blowup_lab.network import ParamVector
from blowup_lab.risk_gradient import (
    Identity,
    Indicator,
    Polynomial,
    ShiftedReluPower,
    Square,
    affine_lower_bound,
    can_integrate_exactly,
    gradient,
    gradient_exact,
    gradient_fd,
    parse_target,
    risk,
    risk_exact,
    risk_quadrature,
)

RELU = ActivationKind(1)
UNIT = (0.0, 1.0)



def test_exact_examples():
    assert risk_exact(ParamVector.zeros(2), RELU, Indicator(), UNIT).value == 0.5
    th = ParamVector.from_parts([2, 2], [-0.5, -1.5], [1, -1], 0)
    assert risk_exact(th, RELU, Indicator(), UNIT).value == pytest.approx(1 / 24, abs=1e-15)
    aff = ParamVector.from_parts([1.5], [1.0], [1.0], -1.25)
    assert risk_exact(aff, RELU, Indicator(), UNIT).value == pytest.approx(1 / 16, abs=1e-15)


def test_quadrature_examples():
    sp = ParamVector.from_parts([1, -1], [0, 0], [1, -1], 0)
    assert risk_quadrature(sp, ActivationKind(0), Identity(), (-1, 1), tol=1e-10).value == pytest.approx(0, abs=1e-10)
    # theta = 0 for logistic gives N = 0 since v = 0
    assert risk_quadrature(ParamVector.zeros(1), ActivationKind(-1), Square(), UNIT, tol=1e-12).value == pytest.approx(0.2, abs=1e-12)


def test_gradient_at_zero():
    assert np.array_equal(gradient(ParamVector.zeros(1), RELU, Indicator(), UNIT), [0, 0, 0, -1.0])
    fd = gradient_fd(ParamVector.zeros(1), RELU, Indicator(), UNIT, "left", 1e-6)
    assert np.allclose(fd, [0, 0, 0, -1.0], atol=1e-8)


def test_dispatch():
    assert can_integrate_exactly(RELU, Indicator())
    assert can_integrate_exactly(ActivationKind(3), Square())
    assert not can_integrate_exactly(ActivationKind(-2), Square())
    rep = risk(ParamVector.zeros(1), ActivationKind(-2), Square(), UNIT)
    assert rep.method == "quadrature"
    with pytest.raises(DomainError):
        risk_exact(ParamVector.zeros(1), ActivationKind(-2), Square(), UNIT)


def test_target_parsing():
    assert parse_target("indicator") == Indicator()
    assert parse_target("square")(np.array(3.0), UNIT) == 9.0
    assert parse_target("identity")(np.array(3.0), UNIT) == 3.0
    assert isinstance(parse_target("relu_power:2"), ShiftedReluPower)
    with pytest.raises(DomainError):
        parse_target("cosine")


def test_affine_lower_bound():
    assert affine_lower_bound(1, 0, 1) == pytest.approx(1 / 12)
    assert affine_lower_bound(0, -3, 7) == 0
    assert affine_lower_bound(2, 0, 0.5) == pytest.approx(1 / 24)


@pytest.mark.parametrize("text", ["softsign", "arctan", "isru:1", "elu", "tanh", "logistic", "softplus"])
def test_smooth_gradient_vs_central_fd(text):
    kind = ActivationKind.parse(text)
    rng = np.random.default_rng(11)
    for _ in range(3):
        th = ParamVector(2, rng.normal(size=7))
        g = gradient(th, kind, Square(), UNIT, tol=1e-11, split_at_kinks=True)
        fd = gradient_fd(th, kind, Square(), UNIT, "central", 1e-5)
        assert np.max(np.abs(g - fd)) <= 1e-5 * np.max(np.abs(g))


def test_polynomial_target_on_other_domain():
    th = ParamVector.from_parts([1.0, -0.5], [0.2, 0.1], [0.7, 1.2], -0.3)
    tgt = Polynomial([0.5, -1.0, 0.25])
    e = risk_exact(th, ActivationKind(2), tgt, (-1.5, 2.0)).value
    q = risk_quadrature(th, ActivationKind(2), tgt, (-1.5, 2.0), tol=1e-12, split_at_kinks=True).value
    assert e == pytest.approx(q, abs=1e-9)


vals7 = st.lists(st.floats(-3, 3), min_size=7, max_size=7)


@settings(max_examples=40, deadline=None)
@given(vals=vals7, k=st.sampled_from([1, 2, 3]), gamma=st.sampled_from([0.0, 0.3, -0.4]))
def test_exact_matches_quadrature(vals, k, gamma):
    kind = ActivationKind(k, gamma)
    th = ParamVector(2, vals)
    tgt = Indicator() if k == 1 else Square()
    e = risk_exact(th, kind, tgt, UNIT).value
    q = risk_quadrature(th, kind, tgt, UNIT, tol=1e-10, split_at_kinks=True, rel_tol=1e-12).value
    assert e == pytest.approx(q, abs=1e-9, rel=1e-10)
    assert e >= 0


@settings(max_examples=25, deadline=None)
@given(vals=vals7)
def test_exact_gradient_matches_quadrature_gradient(vals):
    th = ParamVector(2, vals)
    ge = gradient_exact(th, ActivationKind(2), Square(), UNIT)
    gq = gradient(th, ActivationKind(2), Square(), UNIT, method="quadrature", tol=1e-10, split_at_kinks=True)
    assert np.allclose(ge, gq, atol=1e-8)


def test_relu_gradient_vs_left_fd():
    rng = np.random.default_rng(3)
    used = 0
    while used < 5:
        th = ParamVector(2, rng.normal(size=7))
        q = -th.b / th.w
        if np.min(np.abs(np.concatenate([q - 0.5, q, q - 1, [q[0] - q[1]]]))) < 1e-3:
            continue
        used += 1
        g = gradient_exact(th, RELU, Indicator(), UNIT)
        fd = gradient_fd(th, RELU, Indicator(), UNIT, "left", 1e-6)
        assert np.max(np.abs(g - fd)) <= 1e-5 * max(np.max(np.abs(g)), 1e-12)
