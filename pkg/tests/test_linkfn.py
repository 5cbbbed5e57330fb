import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rggeom.errors import ConfigError, DomainError
from rggeom.linkfn import LinkFunction, bisect_inverse, certify_constants, eval_link, inverse

EXP = LinkFunction.exp_decay(0.9, 1.0)
AFF = LinkFunction.affine(0.95, 0.2)


def test_eval_examples():
    assert eval_link(EXP, 0.0) == 0.9
    assert eval_link(EXP, 1.0) == pytest.approx(0.9 / math.e)
    assert eval_link(AFF, 2.0) == pytest.approx(0.55)
    assert EXP(np.array([0.0, 1.0])).shape == (2,)


def test_eval_rejects_negative():
    with pytest.raises(DomainError):
        eval_link(EXP, -1e-9)
    with pytest.raises(DomainError):
        eval_link(AFF, np.array([0.1, -0.1]))


def test_inverse_examples():
    assert inverse(EXP, 0.9 / math.e) == pytest.approx(1.0, abs=1e-12)
    assert inverse(EXP, 0.95) == 0.0
    assert inverse(AFF, 0.55) == pytest.approx(2.0, abs=1e-12)
    assert inverse(EXP, 0.0) == 2 * EXP.D
    assert inverse(EXP, eval_link(EXP, 4.5)) == 2 * EXP.D


def test_certify_examples():
    assert certify_constants(EXP, 2.0) == pytest.approx((0.9, 0.9 * math.exp(-4)))
    assert certify_constants(AFF, 2.0) == (0.2, 0.2)
    f = LinkFunction.exp_decay(1.0, 0.5, D=1.0)
    assert certify_constants(f, 1.0) == pytest.approx((0.5, 0.5 * math.exp(-1)))
    assert EXP.L_p == 0.9 and 0 < EXP.ell_p <= EXP.L_p


def test_invalid_links():
    with pytest.raises(ConfigError):
        LinkFunction("logistic", 1.0, 1.0, 2.0)
    with pytest.raises(ConfigError):
        LinkFunction.exp_decay(1.5, 1.0)
    with pytest.raises(ConfigError):
        LinkFunction.affine(0.5, 0.5)


links = st.one_of(
    st.builds(LinkFunction.exp_decay, st.floats(0.05, 1.0), st.floats(0.05, 3.0), st.floats(0.5, 3.0)),
    st.builds(lambda a, frac, D: LinkFunction.affine(a, frac * a / (2 * D), D),
              st.floats(0.05, 1.0), st.floats(0.05, 0.99), st.floats(0.5, 3.0)),
)


@settings(max_examples=300, deadline=None)
@given(f=links, u=st.floats(0.0, 1.0))
def test_inverse_of_eval_is_identity(f, u):
    t = u * 2 * f.D
    assert inverse(f, eval_link(f, t)) == pytest.approx(t, abs=1e-10)


@settings(max_examples=300, deadline=None)
@given(f=links, u=st.floats(0.0, 1.0), v=st.floats(0.0, 1.0))
def test_slope_bounds(f, u, v):
    s, t = sorted((u * 2 * f.D, v * 2 * f.D))
    drop = eval_link(f, s) - eval_link(f, t)
    assert f.ell_p * (t - s) - 1e-12 <= drop <= f.L_p * (t - s) + 1e-12


@settings(max_examples=200, deadline=None)
@given(f=links, y=st.floats(-0.1, 1.1))
def test_bisection_agrees_with_closed_form(f, y):
    assert bisect_inverse(f, y) == pytest.approx(inverse(f, y), abs=1e-11)


@settings(max_examples=100, deadline=None)
@given(f=links, y=st.floats(0.0, 1.0))
def test_inverse_stays_in_domain(f, y):
    assert 0.0 <= inverse(f, y) <= 2 * f.D
