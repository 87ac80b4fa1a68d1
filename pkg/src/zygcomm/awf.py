"""Approximate weak factorisation on a rectangle and its reflected copy.

For a mean-zero ``f`` on ``R`` the one-step factorisation is

    h_R = f / T*1_~R   on R,        e_~R = 1_~R T h_R,

so that ``f = h_R T*1_~R - 1_~R T h_R + e_~R``.  Repeating the step on
``e_~R`` with the roles of ``R``, ``~R`` and ``T``, ``T*`` exchanged moves the
error back onto ``R``.  Everything is evaluated on matched midpoint grids of
``R`` and ``~R``, where the reconstruction holds node by node and
``int e = int f`` follows from exchanging two finite sums.

Error control.  Write ``kappa_1 = max | |R| K(x, y) / T*1_~R(y) - 1 |`` and
``kappa_2 = max | |R| K(x, y) / T1_R(x) - 1 |`` over node pairs.  Since ``f`` has
mean zero, ``|e_~R| <= kappa_1 <|f|>_R`` and ``|e_R| <= kappa_1 kappa_2 <|f|>_R``.
For the extremal test function ``<|f|>_R <= 2``, which turns the pairing
identity into

    osc(b, R) <= (|pairing_1| + |pairing_2|) / (1 - 2 kappa_1 kappa_2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from . import _accel
from .errors import CalibrationFailure, DivisionHazard, DomainError, WitnessFailure
from .fields import GridFunction, Symbol, as_resolution, extremal_testfunction, grid_nodes, inner, linear_x3
from .geometry import ReflectedPair, ZygmundRectangle, reflect
from .kernels import Kernel
from .operators import commutator_pairing

DEFAULT_LADDER = tuple(2.0 ** e for e in range(4, 33, 4))
MEAN_TOL = 1e-8
H_FACTOR = 8.0
KAPPA_PRODUCT_MAX = 0.25


@dataclass(frozen=True, eq=False)
class ReflectedGrid:
    """Node sets of ``R`` and ``~R`` with the two cached kernel integrals.

    ``t_star`` is ``T*1_~R`` at the nodes of ``R`` and ``t_one`` is ``T1_R`` at
    the nodes of ``~R``.  ``scale`` is ``|R| |K(c_~R, c_R)|``.
    """

    pair: ReflectedPair
    resolution: tuple[int, int, int]
    nodes_r: np.ndarray
    nodes_rt: np.ndarray
    cell_volume: float
    t_star: np.ndarray
    t_one: np.ndarray

    @property
    def scale(self) -> float:
        return self.pair.base.volume * abs(self.pair.kernel_at_centers)

    def brackets(self) -> tuple[float, float]:
        """Smallest and largest of ``|T*1_~R|`` and ``|T1_R|`` in units of ``scale``."""
        both = np.concatenate([np.abs(self.t_star), np.abs(self.t_one)]) / self.scale
        return float(both.min()), float(both.max())


@lru_cache(maxsize=32)
def _reflected_grid(k: Kernel, r: ZygmundRectangle, A: float, res: tuple, witness_scale: float) -> ReflectedGrid:
    pair = reflect(r, k, A, witness_scale)
    xr = grid_nodes(r, res)
    xrt = grid_nodes(pair.reflected, res)
    vol = r.volume / (res[0] * res[1] * res[2])
    ones = np.full(xr.shape[0], vol)
    t_star = _accel.apply(k, xr, xrt, ones, transpose=True)
    t_one = _accel.apply(k, xrt, xr, ones)
    for a in (xr, xrt, t_star, t_one):
        a.setflags(write=False)
    return ReflectedGrid(pair, res, xr, xrt, vol, t_star, t_one)


def reflected_grid(k: Kernel, r: ZygmundRectangle, A: float, res, witness_scale: float = 0.5) -> ReflectedGrid:
    return _reflected_grid(k, r, float(A), as_resolution(res), float(witness_scale))


@dataclass(frozen=True, eq=False)
class AwfDecomposition:
    base: ReflectedPair
    h_R: GridFunction
    h_Rtilde: GridFunction | None
    e: GridFunction
    amplitude: float
    residual_sup: float
    error_mean: float
    f: GridFunction = field(repr=False)

    @property
    def eta(self) -> float:
        """``||e||_inf / <|f|>_R`` (0 when ``f`` vanishes)."""
        avg = float(np.mean(np.abs(self.f.samples)))
        return float(self.e.sup_norm() / avg) if avg > 0 else 0.0

    @property
    def h_ratio(self) -> float:
        """``||h_R||_inf / (A ||f||_inf)``."""
        s = self.f.sup_norm()
        return float(self.h_R.sup_norm() / (self.amplitude * s)) if s > 0 else 0.0


def _guard(values, scale, lower_bracket, what):
    floor = 0.5 * lower_bracket * scale
    bad = np.abs(values) < floor
    if np.any(bad):
        raise DivisionHazard(f"{what}: node value {float(np.min(np.abs(values))):.3e} below guard {floor:.3e}")


def _check_input(f: GridFunction, r: ZygmundRectangle, res):
    if f.box != r:
        raise DomainError("f must be sampled on the rectangle itself")
    if f.resolution != res:
        raise DomainError(f"f has resolution {f.resolution}, expected {res}")
    s = f.sup_norm()
    if abs(float(np.sum(f.samples))) * f.cell_volume > 1e-10 * max(s, 1e-300) * r.volume and s > 0:
        raise DomainError("f must have mean zero")


def awf_once(
    k: Kernel, r: ZygmundRectangle, f: GridFunction, A: float, lower_bracket: float = 0.5, witness_scale: float = 0.5
) -> AwfDecomposition:
    """One factorisation step; the error ``e`` lives on ``~R``.

    ``lower_bracket`` is the calibrated lower bound of ``|T*1_~R|`` in units of
    ``|R| |K(c_~R, c_R)|``; node values below half of it raise
    :class:`DivisionHazard`.
    """
    g = reflected_grid(k, r, A, f.resolution, witness_scale)
    _check_input(f, r, g.resolution)
    _guard(g.t_star, g.scale, lower_bracket, "T*1 on R")
    fv = f.flat
    h = fv / g.t_star
    th = _accel.apply(k, g.nodes_rt, g.nodes_r, h * g.cell_volume)
    e_rt = th
    # on R the T-term vanishes; on ~R the first term vanishes
    res_r = np.max(np.abs(h * g.t_star - fv)) if fv.size else 0.0
    res_rt = np.max(np.abs(-th + e_rt))
    reflected = g.pair.reflected
    return AwfDecomposition(
        base=g.pair,
        h_R=f.with_samples(h),
        h_Rtilde=None,
        e=GridFunction(reflected, g.resolution, e_rt),
        amplitude=float(A),
        residual_sup=float(max(res_r, res_rt)),
        error_mean=abs(float(np.sum(e_rt)) * g.cell_volume),
        f=f,
    )


def awf_twice(
    k: Kernel, r: ZygmundRectangle, f: GridFunction, A: float, lower_bracket: float = 0.5, witness_scale: float = 0.5
) -> AwfDecomposition:
    """Two factorisation steps; the error ``e`` lives on ``R``.

    ``residual_sup`` is the largest node deviation of
    ``[h_R T*1_~R - 1_~R T h_R] + [h_~R T1_R - 1_R T* h_~R] + e_R`` from ``f``
    over both grids.
    """
    g = reflected_grid(k, r, A, f.resolution, witness_scale)
    _check_input(f, r, g.resolution)
    _guard(g.t_star, g.scale, lower_bracket, "T*1 on R")
    _guard(g.t_one, g.scale, lower_bracket, "T1 on ~R")
    fv = f.flat
    vol = g.cell_volume
    h = fv / g.t_star
    e_rt = _accel.apply(k, g.nodes_rt, g.nodes_r, h * vol)
    ht = e_rt / g.t_one
    e_r = _accel.apply(k, g.nodes_r, g.nodes_rt, ht * vol, transpose=True)
    recon_r = h * g.t_star - e_r + e_r
    recon_rt = -e_rt + ht * g.t_one
    residual = max(float(np.max(np.abs(recon_r - fv))), float(np.max(np.abs(recon_rt))))
    reflected = g.pair.reflected
    return AwfDecomposition(
        base=g.pair,
        h_R=f.with_samples(h),
        h_Rtilde=GridFunction(reflected, g.resolution, ht),
        e=f.with_samples(e_r),
        amplitude=float(A),
        residual_sup=residual,
        error_mean=abs(float(np.sum(e_r)) * vol),
        f=f,
    )


# -- calibration ------------------------------------------------------------------


class LadderStep(NamedTuple):
    amplitude: float
    bracket_low: float
    bracket_high: float
    kappa_1: float
    kappa_2: float
    h_ratio: float
    mean_ratio: float
    accepted: bool
    reason: str


@dataclass(frozen=True)
class AmplitudeCalibration:
    """Outcome of :func:`calibrate_amplitude`.

    ``constant`` is the certificate constant ``1 / (1 - 2 kappa_1 kappa_2)``.
    """

    amplitude: float
    constant: float
    kappa_1: float
    kappa_2: float
    bracket_low: float
    bracket_high: float
    rectangle: ZygmundRectangle
    resolution: tuple[int, int, int]
    kernel: str
    ladder: tuple[LadderStep, ...]

    def __float__(self):
        return self.amplitude


def kappas(k: Kernel, g: ReflectedGrid) -> tuple[float, float]:
    vol_r = g.pair.base.volume
    k1, _, _ = _accel.ratio_deviation(k, g.nodes_rt, g.nodes_r, g.t_star, vol_r)
    k2, _, _ = _accel.ratio_deviation(k, g.nodes_r, g.nodes_rt, g.t_one, vol_r, transpose=True)
    return k1, k2


def calibrate_amplitude(
    k: Kernel, r: ZygmundRectangle, res=8, ladder: Sequence[float] = DEFAULT_LADDER, witness_scale: float = 0.5
) -> AmplitudeCalibration:
    """Smallest ladder amplitude passing every calibration test.

    A rung is accepted when (i) ``|T1_R|`` on ``~R`` and ``|T*1_~R|`` on ``R``
    stay above half of ``|R| |K(c_~R, c_R)|``, (ii) a probe run of
    :func:`awf_once` keeps ``||h_R|| <= 8 A ||f||`` and
    ``|int e| <= 1e-8 <|f|>_R |R|``, and (iii) ``2 kappa_1 kappa_2 <= 1/2``.
    """
    res = as_resolution(res)
    steps = []
    probe = extremal_testfunction(linear_x3(), r, res)
    avg = float(np.mean(np.abs(probe.samples)))
    for A in ladder:
        A = float(A)
        try:
            g = reflected_grid(k, r, A, res, witness_scale)
        except WitnessFailure as exc:
            steps.append(LadderStep(A, 0.0, 0.0, np.inf, np.inf, np.inf, np.inf, False, f"witness: {exc}"))
            continue
        lo, hi = g.brackets()
        if not lo >= 0.5:
            steps.append(LadderStep(A, lo, hi, np.inf, np.inf, np.inf, np.inf, False, "bracket below 1/2"))
            continue
        dec = awf_once(k, r, probe, A, lower_bracket=lo, witness_scale=witness_scale)
        mean_ratio = dec.error_mean / (avg * r.volume)
        k1, k2 = kappas(k, g)
        reasons = []
        if dec.h_ratio > H_FACTOR:
            reasons.append("h_R too large")
        if mean_ratio > MEAN_TOL:
            reasons.append("error mean too large")
        if 2.0 * k1 * k2 > 0.5:
            reasons.append("2 kappa_1 kappa_2 above 1/2")
        ok = not reasons
        steps.append(LadderStep(A, lo, hi, k1, k2, dec.h_ratio, mean_ratio, ok, "; ".join(reasons) or "accepted"))
        if ok:
            return AmplitudeCalibration(
                amplitude=A,
                constant=1.0 / (1.0 - 2.0 * k1 * k2),
                kappa_1=k1,
                kappa_2=k2,
                bracket_low=lo,
                bracket_high=hi,
                rectangle=r,
                resolution=res,
                kernel=k.name,
                ladder=tuple(steps),
            )
    last = steps[-1].reason if steps else "empty ladder"
    raise CalibrationFailure(f"kernel {k.name!r}: no amplitude up to {max(ladder):g} qualifies (last: {last})")


# -- certificates ---------------------------------------------------------------


@dataclass(frozen=True)
class OscillationCertificate:
    rectangle: ZygmundRectangle
    osc_value: float
    pairing_1: float
    pairing_2: float
    amplitude: float
    bound: float
    constant: float
    identity_residual: float
    resolution: tuple[int, int, int]

    @property
    def valid(self) -> bool:
        return self.osc_value <= self.bound

    def to_json(self) -> dict:
        return {
            "rectangle": self.rectangle.to_json(),
            "osc_value": self.osc_value,
            "pairing_1": self.pairing_1,
            "pairing_2": self.pairing_2,
            "amplitude": self.amplitude,
            "bound": self.bound,
            "constant": self.constant,
            "identity_residual": self.identity_residual,
            "resolution": list(self.resolution),
            "valid": self.valid,
        }


def oscillation_lower_bound(
    b: Symbol, k: Kernel, r: ZygmundRectangle, calibration: AmplitudeCalibration, res=None
) -> OscillationCertificate:
    """Certify ``osc(b, R) <= C (|pairing_1| + |pairing_2|)``.

    ``pairing_1 = <[b, T] h_R, |R|^-1 1_~R>`` and
    ``pairing_2 = <[b, T] 1_R, |R|^-1 h_~R>`` come from :func:`awf_twice`
    applied to the extremal test function of ``b``; ``C`` is the calibrated
    constant.  ``identity_residual`` measures how far the grid values of
    ``<b, f>`` and ``-|R| pairing_1 + |R| pairing_2 + <b, e_R>`` disagree.
    """
    res = as_resolution(res if res is not None else calibration.resolution)
    A = calibration.amplitude
    bg = b.sample(r, res)
    f = extremal_testfunction(bg, r)
    vol = r.volume
    osc_value = float(inner(bg, f)) / vol
    if f.sup_norm() == 0.0:
        return OscillationCertificate(r, 0.0, 0.0, 0.0, A, 0.0, calibration.constant, 0.0, res)
    dec = awf_twice(k, r, f, A, lower_bracket=calibration.bracket_low)
    reflected = dec.base.reflected
    psi1 = GridFunction.constant(reflected, res, 1.0 / vol)
    p1 = commutator_pairing(b, k, dec.h_R, psi1)
    p2 = commutator_pairing(b, k, GridFunction.constant(r, res), dec.h_Rtilde * (1.0 / vol))
    lhs = inner(bg, f)
    rhs = -vol * p1 + vol * p2 + inner(bg, dec.e)
    bound = calibration.constant * (abs(p1) + abs(p2))
    return OscillationCertificate(
        rectangle=r,
        osc_value=osc_value,
        pairing_1=p1,
        pairing_2=p2,
        amplitude=A,
        bound=bound,
        constant=calibration.constant,
        identity_residual=abs(lhs - rhs) / vol,
        resolution=res,
    )


class CertifiedBound(NamedTuple):
    value: float
    witness: ZygmundRectangle | None
    certificates: list


def bmo_lower_via_off(
    b: Symbol, k: Kernel, p: float, q: float, rectangles: Sequence[ZygmundRectangle], calibration: AmplitudeCalibration, res=None
) -> CertifiedBound:
    """``max osc(b, R) / |R|^(1/p - 1/q)`` over certified rectangles."""
    if not (1 < p <= q):
        raise DomainError(f"need 1 < p <= q, got p={p}, q={q}")
    alpha = 1.0 / p - 1.0 / q
    best, witness, certs = 0.0, None, []
    for r in rectangles:
        c = oscillation_lower_bound(b, k, r, calibration, res)
        certs.append(c)
        if not c.valid:
            continue
        v = c.osc_value / r.volume ** alpha
        if v > best:
            best, witness = v, r
    return CertifiedBound(best, witness, certs)
