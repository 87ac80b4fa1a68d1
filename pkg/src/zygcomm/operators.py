"""Kernel quadrature on separated supports: T, T*, commutator pairings,
off-diagonal constants, partial kernels, domination and Riesz majorants.

Nothing here regularises the kernel.  Every evaluation point must be
separated from the support it integrates over in all three coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import _accel
from .errors import AdmissibilityError, DegenerateError, DomainError, SeparationError
from .fields import GridFunction, Symbol, as_resolution, extremal_testfunction, midpoints
from .geometry import Box, Interval, ZygmundRectangle
from .kernels import Kernel, d_theta


@dataclass(frozen=True)
class SeparatedPair:
    source: Box
    target: Box
    min_gaps: tuple[float, float, float]


def separated_pair(source: Box, target: Box) -> SeparatedPair:
    gaps = source.gaps(target)
    if min(gaps) <= 0.0:
        raise SeparationError(f"boxes {source.label()} and {target.label()} overlap in some coordinate: gaps {gaps}")
    return SeparatedPair(source, target, gaps)


def check_points_separated(points, box: Box) -> None:
    """Raise unless every point lies outside ``box`` in each coordinate."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    inside = (p >= box.lo) & (p <= box.hi)
    bad = np.any(inside, axis=1)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SeparationError(f"point {p[i]} is not coordinate-wise separated from {box.label()}")


def _as_points(targets) -> np.ndarray:
    return np.atleast_2d(np.asarray(targets, dtype=float))


def apply_T(k: Kernel, f: GridFunction, targets) -> np.ndarray:
    """``Tf(x) = int K(x, y) f(y) dy`` at each target by midpoint quadrature."""
    x = _as_points(targets)
    check_points_separated(x, f.box)
    return _accel.apply(k, x, f.nodes, f.flat * f.cell_volume)


def apply_T_star(k: Kernel, f: GridFunction, targets) -> np.ndarray:
    """``T*f(x) = int K(y, x) f(y) dy``."""
    x = _as_points(targets)
    check_points_separated(x, f.box)
    return _accel.apply(k, x, f.nodes, f.flat * f.cell_volume, transpose=True)


def _symbol_values(b, nodes):
    return np.asarray(b.evaluate(nodes) if isinstance(b, Symbol) else b(nodes), dtype=float)


def commutator_pairing(b: Symbol, k: Kernel, phi: GridFunction, psi: GridFunction) -> float:
    """``iint (b(x) - b(y)) K(x, y) phi(y) psi(x) dy dx`` with ``y`` in supp phi."""
    separated_pair(phi.box, psi.box)
    X, Y = psi.nodes, phi.nodes
    rows = _accel.commutator_rows(
        k, X, Y, _symbol_values(b, X), _symbol_values(b, Y), phi.flat * phi.cell_volume
    )
    return float(np.dot(rows, psi.flat) * psi.cell_volume)


def commutator_at(b: Symbol, k: Kernel, f: GridFunction, points) -> np.ndarray:
    """``[b, T] f`` at separated points, summed term by term."""
    z = _as_points(points)
    check_points_separated(z, f.box)
    Y = f.nodes
    return _accel.commutator_rows(k, z, Y, _symbol_values(b, z), _symbol_values(b, Y), f.flat * f.cell_volume)


def domination_majorant(b: Symbol, k: Kernel, f: GridFunction, z) -> np.ndarray | float:
    """``int |b(z) - b(y)| |K(z, y)| |f(y)| dy`` at one point or an array of points."""
    pts = _as_points(z)
    check_points_separated(pts, f.box)
    Y = f.nodes
    out = _accel.commutator_rows(
        k, pts, Y, _symbol_values(b, pts), _symbol_values(b, Y), f.flat * f.cell_volume, absolute=True
    )
    return out if np.ndim(z) > 1 else float(out[0])


class DominationCheck(NamedTuple):
    holds: bool
    commutator: np.ndarray
    majorant: np.ndarray
    max_excess: float


def check_domination(b: Symbol, k: Kernel, f: GridFunction, points) -> DominationCheck:
    """``|[b, T] f(z)| <= majorant(z)`` with both sides from the same quadrature sum."""
    pts = _as_points(points)
    com = commutator_at(b, k, f, pts)
    maj = domination_majorant(b, k, f, pts)
    excess = np.abs(com) - maj
    return DominationCheck(bool(np.all(excess <= 0.0)), com, maj, float(np.max(excess)))


# -- off-diagonal constants ---------------------------------------------------

ADMISSIBLE_GAP = (1.0, 3.0)


@dataclass(frozen=True)
class OffDiagonalEstimate:
    u: float
    t: float
    value: float
    witness: tuple | None
    pairs: int


def check_admissible(p1: ZygmundRectangle, p2: ZygmundRectangle, gap_range=ADMISSIBLE_GAP) -> None:
    """Equal side lengths and ``dist(J^i, L^i) / l(J^i)`` inside ``gap_range``."""
    for name, p in (("P1", p1), ("P2", p2)):
        if not isinstance(p, ZygmundRectangle):
            raise AdmissibilityError(f"{name} is not a Zygmund rectangle")
    l1, l2 = p1.lengths, p2.lengths
    if np.any(np.abs(l1 - l2) > 1e-12 * l1):
        raise AdmissibilityError(f"side lengths differ: {l1} vs {l2}")
    lo, hi = gap_range
    for i, (a, b) in enumerate(zip(p1.intervals, p2.intervals)):
        r = a.dist(b) / a.length
        if not (lo * (1 - 1e-12) <= r <= hi * (1 + 1e-12)):
            raise AdmissibilityError(f"axis {i + 1}: gap ratio {r:.6g} outside [{lo}, {hi}]")


def admissible_partner(p1: ZygmundRectangle, gaps=(1.0, 1.0, 1.0), signs=(1, 1, 1)) -> ZygmundRectangle:
    """Translate of ``p1`` whose projections sit ``gaps[i] * l_i`` away."""
    l = p1.lengths
    shift = np.array(signs, dtype=float) * (1.0 + np.asarray(gaps, dtype=float)) * l
    return ZygmundRectangle.from_center(p1.center + shift, l[0], l[1], l[2])


def default_testfunctions(b: Symbol, p1: Box, p2: Box, res) -> list[tuple[str, GridFunction, str, GridFunction]]:
    """Indicators and mean-free sign functions of ``b`` on each side."""
    one1 = GridFunction.constant(p1, res)
    one2 = GridFunction.constant(p2, res)
    s1 = extremal_testfunction(b, p1, res)
    s2 = extremal_testfunction(b, p2, res)
    out = [("1_P1", one1, "1_P2", one2), ("osc_P1", s1, "1_P2", one2), ("1_P1", one1, "osc_P2", s2), ("osc_P1", s1, "osc_P2", s2)]
    return [t for t in out if t[1].sup_norm() > 0 and t[3].sup_norm() > 0]


def off_constant_estimate(
    b: Symbol,
    k: Kernel,
    u: float,
    t: float,
    pairs: Sequence[tuple[ZygmundRectangle, ZygmundRectangle]],
    testfns: Sequence | None = None,
    res=8,
) -> OffDiagonalEstimate:
    """Lower estimate of the off-diagonal constant from finitely many pairs.

    Test functions are normalised by their sup norms, so any bounded input is
    admissible.  ``testfns[i]`` lists ``(name1, f1, name2, f2)`` tuples for
    pair ``i``; the default set comes from :func:`default_testfunctions`.
    """
    if not (u > 1 and t > 1):
        raise DomainError("u and t must exceed 1")
    expo = 1.0 + 1.0 / u - 1.0 / t
    best, witness = 0.0, None
    for i, (p1, p2) in enumerate(pairs):
        check_admissible(p1, p2)
        fns = testfns[i] if testfns is not None else default_testfunctions(b, p1, p2, res)
        for n1, f1, n2, f2 in fns:
            val = abs(commutator_pairing(b, k, f1, f2)) / (f1.sup_norm() * f2.sup_norm())
            val /= p1.volume ** expo
            if val > best:
                best, witness = val, (p1, p2, n1, n2)
    return OffDiagonalEstimate(float(u), float(t), best, witness, len(pairs))


def pairing_row(k: Kernel, b: Symbol, u, t, p1: Box, p2: Box, value, res) -> dict:
    res = as_resolution(res)
    return {
        "kernel": k.name,
        "symbol": b.label(),
        "u": u,
        "t": t,
        "P1": p1.label(),
        "P2": p2.label(),
        "value": value,
        "resolution": "x".join(map(str, res)),
    }


# -- partial kernel -----------------------------------------------------------


class PartialKernelValue(NamedTuple):
    value: float
    bound: float
    band_width: float


def partial_kernel_I1(k: Kernel, i1: Interval, x23, y23, n: int = 128) -> PartialKernelValue:
    """``iint_{I1 x I1} K((x1, x23), (y1, y23)) dx1 dy1`` on an ``n x n`` grid.

    Diagonal cells ``x1``, ``y1`` in the same grid cell are dropped; the band
    width (one cell) is returned with the value and the size bound
    ``|I1| / (|x2 - y2| |x3 - y3|) * D_theta(|I1|, |x2 - y2|, |x3 - y3|)``.
    """
    x23 = np.asarray(x23, dtype=float)
    y23 = np.asarray(y23, dtype=float)
    t2, t3 = abs(x23[0] - y23[0]), abs(x23[1] - y23[1])
    if t2 == 0.0 or t3 == 0.0:
        raise DegenerateError("partial kernel needs x2 != y2 and x3 != y3")
    s = midpoints(i1.lo, i1.hi, n)
    h = i1.length / n
    X = np.column_stack([s, np.full(n, x23[0]), np.full(n, x23[1])])
    Y = np.column_stack([s, np.full(n, y23[0]), np.full(n, y23[1])])
    K = k.evaluate(X[:, None, :], Y[None, :, :])
    np.fill_diagonal(K, 0.0)
    value = float(np.sum(K) * h * h)
    L = i1.length
    bound = L / (t2 * t3) * d_theta(L, t2, t3, k.theta)
    return PartialKernelValue(value, float(bound), h)


# -- Riesz potentials -----------------------------------------------------------


@dataclass(frozen=True)
class Sampled1D:
    """Midpoint samples of a function on ``[lo, hi]``."""

    lo: float
    hi: float
    values: np.ndarray

    @classmethod
    def from_function(cls, func: Callable, lo: float, hi: float, n: int) -> "Sampled1D":
        return cls(lo, hi, np.asarray(func(midpoints(lo, hi, n)), dtype=float))

    @property
    def nodes(self) -> np.ndarray:
        return midpoints(self.lo, self.hi, len(self.values))

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / len(self.values)


class RieszValue(NamedTuple):
    value: float
    exclusion_width: float


def _riesz_weights(alpha, lo, hi, n, x):
    """Quadrature weights ``h |x - y_j|^(alpha - 1)``; the cell holding ``x`` gets 0."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    y = midpoints(lo, hi, n)
    h = (hi - lo) / n
    d = np.abs(x - y)
    w = np.zeros(n)
    excluded = 0.0
    if lo <= x <= hi:
        j = min(int((x - lo) / h), n - 1)
        keep = np.ones(n, dtype=bool)
        keep[j] = False
        # x on a cell face touches two cells
        if j > 0 and x == lo + j * h:
            keep[j - 1] = False
        keep &= d > 0
        excluded = float(np.sum(~keep)) * h
    else:
        keep = np.ones(n, dtype=bool)
    w[keep] = h * d[keep] ** (alpha - 1.0)
    return w, excluded


def riesz_potential_1d(alpha: float, f: Sampled1D, x: float) -> RieszValue:
    """``int |x - y|^(alpha - 1) f(y) dy`` by the midpoint rule."""
    w, excluded = _riesz_weights(alpha, f.lo, f.hi, len(f.values), float(x))
    return RieszValue(float(np.dot(w, f.values)), excluded)


def riesz_majorant_3d(alpha: float, f: GridFunction, x) -> float:
    """``I_alpha^1 I_alpha^2 I_alpha^3 |f|`` at ``x`` as one tensor contraction."""
    x = np.asarray(x, dtype=float)
    ws = [
        _riesz_weights(alpha, iv.lo, iv.hi, n, float(xi))[0]
        for iv, n, xi in zip(f.box.intervals, f.resolution, x)
    ]
    return float(np.einsum("i,j,k,ijk->", ws[0], ws[1], ws[2], np.abs(f.samples)))


class MajorantChainCheck(NamedTuple):
    holds: bool
    constant: float
    ratios: np.ndarray
    norm_estimate: float


def check_majorant_chain(
    b: Symbol, k: Kernel, f: GridFunction, points, alpha: float, norm_estimate: float, c_max: float = 16.0
) -> MajorantChainCheck:
    """Measure ``C`` in ``majorant(z) <= C * norm * I_alpha^3 |f|(z)``.

    ``norm_estimate`` is the bmo_Z^alpha estimate of ``b``; the check holds
    when the required ``C`` is at most ``c_max``.
    """
    if alpha > k.theta:
        raise DomainError(f"the chain needs alpha <= theta, got alpha={alpha}, theta={k.theta}")
    pts = _as_points(points)
    lhs = np.atleast_1d(domination_majorant(b, k, f, pts))
    rhs = np.array([riesz_majorant_3d(alpha, f, z) for z in pts]) * norm_estimate
    ratios = np.zeros_like(lhs)
    pos = rhs > 0
    ratios[pos] = lhs[pos] / rhs[pos]
    ratios[~pos & (lhs > 0)] = np.inf
    c = float(np.max(ratios)) if len(ratios) else 0.0
    return MajorantChainCheck(bool(c <= c_max), c, ratios, float(norm_estimate))


def elementary_inequality_ratio(t1, t2, t3, alpha, theta):
    """Ratio of the two sides of the pointwise size inequality used for the chain.

    For ``t3 <= t1 t2`` the left side is
    ``t3^(2 alpha) / (t1^(1+theta) t2^(1+theta) t3^(1-theta))``; otherwise the
    roles of ``t1 t2`` and ``t3`` swap.  The right side is
    ``(t1 t2 t3)^(alpha - 1)``.  Values at most 1 mean the inequality holds.
    """
    t1, t2, t3 = (np.asarray(v, dtype=float) for v in (t1, t2, t3))
    p = t1 * t2
    low = t3 <= p
    lhs = np.where(
        low,
        t3 ** (2 * alpha) / (p ** (1 + theta) * t3 ** (1 - theta)),
        t3 ** (2 * alpha) / (p ** (1 - theta) * t3 ** (1 + theta)),
    )
    return lhs / (p * t3) ** (alpha - 1.0)
