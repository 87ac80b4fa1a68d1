import numpy as np
import pytest

from zygcomm.awf import (
    awf_once,
    awf_twice,
    bmo_lower_via_off,
    calibrate_amplitude,
    oscillation_lower_bound,
    reflected_grid,
)
from zygcomm.errors import CalibrationFailure, DivisionHazard, DomainError
from zygcomm.fields import GridFunction, constant_symbol, extremal_testfunction, linear_x3, sign_x3
from zygcomm.geometry import ZygmundDilation, ZygmundRectangle, dilate_rectangle
from zygcomm.kernels import get_kernel

UNIT = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
RES = 6


@pytest.fixture(scope="module")
def cal():
    nw = get_kernel("nagel-wainger")
    return calibrate_amplitude(nw, ZygmundRectangle.from_bounds(UNIT), RES)


def test_calibration_nagel_wainger(cal):
    assert cal.amplitude <= 2.0 ** 20
    assert float(cal) == cal.amplitude
    assert 2 * cal.kappa_1 * cal.kappa_2 <= 0.5
    assert 1.0 <= cal.constant <= 2.0
    assert cal.bracket_low >= 0.5
    assert cal.ladder[-1].accepted and not any(s.accepted for s in cal.ladder[:-1])


def test_calibration_zero_kernel_fails(cube):
    with pytest.raises(CalibrationFailure):
        calibrate_amplitude(get_kernel("zero-stub"), cube, 4)


def test_calibration_dilation_invariant(nw, cube, cal):
    r = dilate_rectangle(cube, ZygmundDilation(0.25, 8.0))
    other = calibrate_amplitude(nw, r, RES)
    assert other.amplitude == cal.amplitude
    assert other.constant == pytest.approx(cal.constant, rel=1e-9)


def test_awf_zero_input(nw, cube, cal):
    f = GridFunction.constant(cube, RES, 0.0)
    d = awf_twice(nw, cube, f, cal.amplitude)
    assert d.h_R.sup_norm() == 0 and d.e.sup_norm() == 0 and d.h_Rtilde.sup_norm() == 0


def test_awf_requires_mean_zero(nw, cube, cal):
    with pytest.raises(DomainError):
        awf_once(nw, cube, GridFunction.constant(cube, RES), cal.amplitude)


def test_awf_once_properties(nw, cube, cal):
    f = extremal_testfunction(linear_x3(), cube, RES)
    avg = float(np.mean(np.abs(f.samples)))
    d = awf_once(nw, cube, f, cal.amplitude, cal.bracket_low)
    assert d.error_mean <= 1e-8 * avg * cube.volume
    assert d.residual_sup <= 1e-8 * f.sup_norm()
    assert d.e.box == d.base.reflected
    big = awf_once(nw, cube, f, 16 * cal.amplitude)
    assert big.eta < d.eta


def test_awf_twice_properties(nw, cube, cal):
    f = extremal_testfunction(sign_x3(at=0.5), cube, RES)
    avg = float(np.mean(np.abs(f.samples)))
    A = cal.amplitude
    d = awf_twice(nw, cube, f, A, cal.bracket_low)
    assert d.e.box == cube
    assert d.error_mean <= 1e-8 * avg * cube.volume
    assert d.h_ratio <= 8.0
    assert d.residual_sup <= 1e-8 * f.sup_norm()
    # two steps shrink the error by kappa_1 kappa_2
    assert d.eta <= cal.kappa_1 * cal.kappa_2 * 1.0000001
    assert awf_twice(nw, cube, f, 16 * A).eta < d.eta


def test_division_guard(nw, cube, cal):
    f = extremal_testfunction(linear_x3(), cube, RES)
    with pytest.raises(DivisionHazard):
        awf_once(nw, cube, f, cal.amplitude, lower_bracket=10.0)


def test_reflected_grid_cached(nw, cube):
    assert reflected_grid(nw, cube, 256.0, 4) is reflected_grid(nw, cube, 256, (4, 4, 4))


def test_certificates(nw, cube, cal):
    c0 = oscillation_lower_bound(constant_symbol(2.0), nw, cube, cal)
    assert c0.osc_value == 0.0 and c0.valid
    c1 = oscillation_lower_bound(linear_x3(), nw, cube, cal)
    assert c1.osc_value == pytest.approx(0.25, abs=1e-12)
    assert c1.valid and c1.identity_residual <= 1e-10
    c2 = oscillation_lower_bound(sign_x3(at=0.5), nw, cube, cal)
    assert c2.osc_value == pytest.approx(1.0, abs=1e-12)
    assert c2.valid
    js = c2.to_json()
    assert js["valid"] and js["rectangle"] == cube.to_json()


def test_bmo_lower_via_off_constant_alpha(nw, cal):
    rects = [ZygmundRectangle.from_bounds(UNIT), ZygmundRectangle.from_bounds([(0, 0.5), (0, 0.5), (0, 0.25)]),
             ZygmundRectangle.from_bounds([(0, 0.25), (0, 1), (0.5, 0.75)])]
    out = bmo_lower_via_off(linear_x3(), nw, 2.0, float("inf"), rects, cal)
    assert all(c.valid for c in out.certificates)
    # p = 2, q = infinity gives alpha = 1/2 and the value 1/4 on every rectangle
    assert out.value == pytest.approx(0.25, rel=1e-9)
    same = bmo_lower_via_off(linear_x3(), nw, 2.0, 2.0, rects, cal)
    assert same.value == pytest.approx(0.25)
    with pytest.raises(DomainError):
        bmo_lower_via_off(linear_x3(), nw, 3.0, 2.0, rects, cal)
