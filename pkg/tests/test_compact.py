import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zygcomm.awf import calibrate_amplitude
from zygcomm.compact import (
    compactness_dossier,
    pairwise_disjoint,
    rj_chain,
    select_disjoint,
    shrinking_probe,
)
from zygcomm.errors import DomainError, SelectionFailure
from zygcomm.fields import constant_symbol, holder_x3, linear_x1, linear_x3
from zygcomm.geometry import Interval, ZygmundRectangle, reflect

UNIT = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))


def _rects_on_axis3(intervals):
    # axis 3 carries the product of the other two sides
    out = []
    for lo, hi in intervals:
        i3 = Interval(lo, hi)
        out.append(ZygmundRectangle(Interval(0, 1), Interval(0, i3.length), i3))
    return out


def _brute_disjoint(ivs):
    return all(a.hi <= b.lo or b.hi <= a.lo for i, a in enumerate(ivs) for b in ivs[i + 1:])


def _family(res, rects, nw, A):
    if res.which == "base":
        return [rects[i].i3 for i in res.indices]
    return [reflect(rects[i], nw, A).reflected.i3 for i in res.indices]


def test_escape_sequence(nw):
    rects = _rects_on_axis3([(i, i + 1) for i in range(1, 101)])
    res = select_disjoint(rects, nw, 256.0, 3)
    assert res.which == "base" and res.branch == "escape"
    assert res.indices == tuple(range(100))


def test_nested_at_zero_uses_reflection(nw):
    rects = _rects_on_axis3([(0.0, 1.0 / i) for i in range(1, 101)])
    res = select_disjoint(rects, nw, 256.0, 3)
    assert res.which == "reflected" and len(res.indices) >= 10
    fam = _family(res, rects, nw, 256.0)
    assert res.disjoint and _brute_disjoint(fam)
    assert list(res.indices) == sorted(set(res.indices))


def test_cubic_sequence_base(nw):
    rects = _rects_on_axis3([(1.0 / i, 1.0 / i + 1.0 / i**3) for i in range(1, 101)])
    res = select_disjoint(rects, nw, 256.0, 3)
    assert res.which == "base" and len(res.indices) >= 10
    assert _brute_disjoint(_family(res, rects, nw, 256.0))


def test_selection_needs_shrinking(nw):
    rects = _rects_on_axis3([(0.0, 1.0)] * 20)
    with pytest.raises(SelectionFailure):
        select_disjoint(rects, nw, 256.0, 3)


@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(1e-3, 2)), min_size=3, max_size=40))
def test_selection_always_disjoint(raw):
    raw = sorted(raw, key=lambda t: -t[1])
    raw[-1] = (raw[-1][0], min(raw[-1][1], raw[0][1] / 4))
    firsts = [Interval(a, a + l) for a, l in raw]
    rects = [ZygmundRectangle(iv, Interval(0, 1), Interval(0, iv.length)) for iv in firsts]
    try:
        res = select_disjoint(rects, None, None, 1)
    except SelectionFailure:
        return
    ivs = [rects[i].i1 for i in res.indices]
    assert res.disjoint == _brute_disjoint(ivs) and res.disjoint
    assert all(a < b for a, b in zip(res.indices, res.indices[1:]))


def test_pairwise_disjoint_touching():
    assert pairwise_disjoint([Interval(0, 1), Interval(1, 2)])
    assert not pairwise_disjoint([Interval(0, 1), Interval(0.5, 2)])


def test_probe_constant():
    rep = shrinking_probe(constant_symbol(3.0), 0.5, 1, [1, 0.5, 0.25], UNIT)
    assert rep.o_alpha_values == (0.0, 0.0, 0.0) and rep.inf_witness == 0.0


@pytest.mark.parametrize("axis", [1, 2, 3])
def test_probe_linear_x3(axis):
    rep = shrinking_probe(linear_x3(), 0.5, axis, [1, 0.5, 0.25, 0.125], UNIT, free_max=3)
    np.testing.assert_allclose(rep.o_alpha_values, 0.25, rtol=1e-12)
    assert rep.inf_witness == pytest.approx(0.25)
    assert all(w.intervals[axis - 1].length == s for w, s in zip(rep.witnesses, rep.scales))


def test_probe_diagonal_case_decays():
    scales = [1, 0.5, 0.25, 0.125, 0.0625]
    rep = shrinking_probe(linear_x3(), 0.0, 3, scales, UNIT)
    np.testing.assert_allclose(rep.o_alpha_values, np.array(scales) / 4, rtol=1e-12)


def test_probe_subfamily_smaller():
    b = holder_x3(0.3)
    full = shrinking_probe(b, 0.1, 1, [0.5, 0.25], UNIT, free_max=4)
    sub = shrinking_probe(b, 0.1, 1, [0.5, 0.25], UNIT, free_max=2)
    assert all(s <= f for s, f in zip(sub.o_alpha_values, full.o_alpha_values))


def test_probe_rejects_bad_ladder():
    with pytest.raises(DomainError):
        shrinking_probe(linear_x3(), 0.5, 1, [0.25, 0.5], UNIT)
    with pytest.raises(DomainError):
        shrinking_probe(linear_x3(), 0.5, 1, [0.3], UNIT)


def test_rj_chain_constant():
    r = ZygmundRectangle.from_bounds([(0, 1), (0, 1), (0, 1)])
    rep = rj_chain(constant_symbol(), r, 4)
    assert rep.osc_values == (0.0,) * 5 and not rep.monotone_failures and all(rep.closing_holds)


def test_rj_chain_holder():
    r = ZygmundRectangle.from_bounds([(0, 1), (0, 1), (0.5, 1.5)])
    rep = rj_chain(holder_x3(0.5), r, 5)
    assert rep.monotone_checked and not rep.monotone_failures and all(rep.closing_holds)


def test_rj_chain_x1_records_without_raising():
    r = ZygmundRectangle.from_bounds([(0, 1), (0, 1), (0, 1)])
    rep = rj_chain(linear_x1(), r, 4)
    assert not rep.monotone_checked
    np.testing.assert_allclose(rep.osc_values, [0.25 * 2.0**-j for j in range(5)])
    assert not all(rep.closing_holds)


@pytest.fixture(scope="module")
def cal(nw):
    return calibrate_amplitude(nw, ZygmundRectangle.from_bounds(UNIT), 6)


def test_dossier_linear_x3(nw, cal):
    d = compactness_dossier(linear_x3(), 0.5, nw, cal, UNIT, depths=(0, 3), cert_res=6)
    assert d.conclusion == "compactness obstruction witnessed"
    assert all(a.obstruction for a in d.axes)
    for a in d.axes:
        assert a.probe.inf_witness == pytest.approx(0.25) and a.certificates_valid


def test_dossier_constant(nw, cal):
    d = compactness_dossier(constant_symbol(), 0.5, nw, cal, UNIT, depths=(0, 2), cert_res=6)
    assert d.conclusion == "no obstruction found"


def test_dossier_holder(nw, cal):
    d = compactness_dossier(holder_x3(0.25), 0.125, nw, cal, UNIT, depths=(0, 3), cert_res=6)
    assert d.obstruction


def test_dossier_short_ladder_records_note(nw, cal):
    d = compactness_dossier(linear_x3(), 0.5, nw, cal, UNIT, depths=(0, 1), cert_res=6)
    assert not d.obstruction
    assert all(a.note.startswith("selection skipped") for a in d.axes)
