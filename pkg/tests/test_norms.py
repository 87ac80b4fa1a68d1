import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zygcomm.errors import DomainError, PositivityError
from zygcomm.fields import Symbol, constant_symbol, holder_x3, linear_x1, linear_x3
from zygcomm.geometry import ZygmundRectangle
from zygcomm.norms import (
    apz_constant,
    best_constant_ratio,
    bmo_norm,
    chain_bound,
    chain_constant,
    check_equivalence,
    holder_x3_seminorm,
    o_alpha_dilation_pair,
    osc,
)

UNIT = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))


def test_osc_oracles():
    r = ZygmundRectangle.from_bounds([(0, 0.5), (2, 4), (0, 1)])
    assert osc(constant_symbol(4.0), r).osc == 0.0
    rep = osc(linear_x3(), r, 8, alpha=0.5)
    assert rep.osc == pytest.approx(0.25, abs=1e-15)
    assert rep.o_alpha == pytest.approx(0.25)
    assert rep.refinement_delta <= 1e-14


def test_bmo_linear_x3():
    est = bmo_norm(linear_x3(), UNIT, (0, 3), alpha=0.5, res=4)
    assert est.value == pytest.approx(0.25, rel=0.02)
    # the same value on every shape of rectangle
    assert est.minimum == pytest.approx(0.25, rel=0.02)
    assert bmo_norm(constant_symbol(), UNIT, (0, 2), 0.5, 4).value == 0.0


def test_bmo_monotone_in_family():
    b = holder_x3(0.3)
    small = bmo_norm(b, UNIT, (1, 2), 0.1, 4)
    large = bmo_norm(b, UNIT, (0, 3), 0.1, 4)
    assert large.value >= small.value
    assert large.family_size > small.family_size


def test_bmo_jitter_only_adds():
    b = holder_x3(0.5)
    base = bmo_norm(b, UNIT, (0, 2), 0.0, 4)
    jit = bmo_norm(b, UNIT, (0, 2), 0.0, 4, jitter=50, seed=3)
    assert jit.value >= base.value and jit.family_size == base.family_size + 50


def test_holder_seminorm():
    rep = holder_x3_seminorm(linear_x3(), 0.5)
    assert 0.99 <= rep.value <= 1.0 + 1e-12
    assert holder_x3_seminorm(constant_symbol(), 0.5).value == 0.0
    x1 = holder_x3_seminorm(linear_x1(), 0.5)
    assert x1.infinite
    with pytest.raises(DomainError):
        holder_x3_seminorm(linear_x3(), 0.0)


def test_equivalence_statuses():
    assert check_equivalence(constant_symbol(), 0.5, UNIT, (0, 2), 2000, res=4).status == "both zero: consistent"
    rep = check_equivalence(holder_x3(0.5), 0.25, UNIT, (0, 3), 5000, res=4)
    assert rep.status == "comparable" and 1 / 16 <= rep.ratio <= 16
    x1 = check_equivalence(linear_x1(), 0.5, UNIT, (0, 2), 2000, res=4)
    assert x1.flagged and "Hölder side infinite" in x1.status


def test_chain_constant_values():
    a = 0.25
    assert chain_constant(a) == pytest.approx(32 * 2 / (1 - 0.5))
    with pytest.raises(DomainError):
        chain_constant(0.0)


@given(
    st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3),
    st.floats(0.05, 0.3), st.floats(0.05, 0.3), st.floats(0.0, 1.0),
)
def test_chain_on_holder_symbol(x1, x2, x3, d1, d2, frac):
    alpha = 0.25
    b = holder_x3(2 * alpha)
    x = np.array([x1, x2, x3 + 2.0])
    y = x + np.array([d1, d2, frac * d1 * d2])
    t = chain_bound(b, x, y, alpha, res=4, k_max=12, norm_estimate=1.0)
    assert t.difference <= t.telescoped + 1e-12
    if t.difference > 0:
        assert t.measured_constant <= 8.0
    assert t.difference <= t.bound


def test_chain_degenerate_pair():
    x = np.array([0.5, 0.5, 0.5])
    t = chain_bound(linear_x3(), x, x, 0.5, k_max=5)
    assert t.difference == 0.0 and np.isfinite(t.osc_sum)


def test_chain_geometric_decay():
    b = linear_x3()
    x, y = np.array([0.0, 0.0, 0.0]), np.array([0.5, 0.25, 0.1])
    t = chain_bound(b, x, y, 0.5, k_max=8, res=4)
    vols = [r.volume for r in t.rectangles[1]]
    ratios = [v / w for v, w in zip(vols, vols[1:])]
    np.testing.assert_allclose(ratios, 16.0)
    osc_i = [p for p, _ in t.per_level[1:]]
    # osc of x3 on a rectangle is l(I^3)/4, so each level is 4 times smaller
    np.testing.assert_allclose(np.array(osc_i[:-1]) / np.array(osc_i[1:]), 4.0, rtol=1e-9)


def test_apz():
    one = apz_constant(constant_symbol(1.0), 2.0, UNIT, (0, 2), 4)
    assert one.value == pytest.approx(1.0) and one.minimum == pytest.approx(1.0)
    w = Symbol("w", lambda x: np.abs(x[..., 2]) ** 0.1 + 0.0)
    est = apz_constant(w, 2.0, UNIT, (0, 2), 8)
    assert est.minimum >= 1.0 - 1e-12
    fine = apz_constant(w, 2.0, UNIT, (0, 2), 16)
    assert abs(fine.value - est.value) <= 0.05 * fine.value
    with pytest.raises(PositivityError):
        apz_constant(linear_x3(), 2.0, [(0, 1), (0, 1), (-1, 1)], (0, 1), 4)


@given(st.floats(0.1, 10), st.floats(0.1, 10))
def test_o_alpha_dilation_law(s, t):
    r = ZygmundRectangle.from_bounds([(0, 1), (0, 1), (1, 2)])
    left, right = o_alpha_dilation_pair(holder_x3(0.5), r, s, t, 0.25, 4)
    assert left == pytest.approx(right, rel=1e-9)


def test_best_constant_ratio_at_most_two():
    r = ZygmundRectangle.from_bounds(UNIT)
    for b in (linear_x3(), holder_x3(0.2), linear_x1()):
        assert best_constant_ratio(b, r, np.linspace(-1, 2, 31)) <= 2.0
