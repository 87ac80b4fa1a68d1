"""Compactness probes: disjoint subsequences, shrinking-rectangle oscillation
searches and the rescaling chain that forces constancy.

The selection routine adapts the infinite-sequence argument to a finite list.
It first tries the escape branch (intervals running off to infinity), then
locates an accumulation point by nested dyadic bisection and runs a greedy
separation around it, switching to the reflected rectangles when too few
base intervals avoid the accumulation point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .awf import AmplitudeCalibration, OscillationCertificate, oscillation_lower_bound
from .errors import DomainError, SelectionFailure
from .fields import Symbol, as_resolution, mean_abs_deviation
from .geometry import Interval, ZygmundRectangle, dyadic_group, rectangle_from_corner, reflect
from .kernels import Kernel
from .norms import _offsets, _row_osc

DEFAULT_THRESHOLD = 1e-3
DEFAULT_SEPARATION = 0.9


@dataclass(frozen=True)
class SelectionResult:
    indices: tuple[int, ...]
    which: str
    axis: int
    branch: str
    accumulation_point: float | None
    disjoint: bool


def _check_axis(axis):
    if axis not in (1, 2, 3):
        raise DomainError(f"axis must be 1, 2 or 3, got {axis}")


def pairwise_disjoint(intervals: Sequence[Interval]) -> bool:
    """Exact half-open disjointness check over all pairs."""
    srt = sorted(intervals, key=lambda iv: (iv.lo, iv.hi))
    return all(a.hi <= b.lo for a, b in zip(srt, srt[1:]))


def _escape(intervals) -> list[int]:
    chosen, M = [], None
    for i, iv in enumerate(intervals):
        if M is None or iv.lo >= M or iv.hi <= -M:
            chosen.append(i)
            M = max(abs(iv.lo), abs(iv.hi)) if M is None else max(M, abs(iv.lo), abs(iv.hi))
    return chosen


def _closed_hits(intervals, lo, hi) -> int:
    return sum(1 for iv in intervals if iv.lo <= hi and iv.hi >= lo)


def _accumulation_point(intervals, min_count: int, max_depth: int) -> float:
    reach = max(max(abs(iv.lo), abs(iv.hi)) for iv in intervals)
    m = int(np.ceil(np.log2(reach))) if reach > 0 else 0
    lo, hi = -(2.0 ** m), 2.0 ** m
    for _ in range(max_depth):
        mid = 0.5 * (lo + hi)
        left = _closed_hits(intervals, lo, mid)
        right = _closed_hits(intervals, mid, hi)
        nxt = (mid, hi) if right >= left else (lo, mid)
        if max(left, right) < min_count:
            break
        lo, hi = nxt
    return 0.5 * (lo + hi)


def _greedy(intervals, x: float, factor: float) -> list[int]:
    chosen: list[int] = []
    gap = np.inf
    for i, iv in enumerate(intervals):
        if iv.lo <= x <= iv.hi:
            continue
        if iv.dist_point(x) + iv.length < factor * gap:
            chosen.append(i)
            gap = min(gap, iv.dist_point(x))
    return chosen


def select_disjoint(
    rects: Sequence[ZygmundRectangle],
    k: Kernel | None,
    A: float | None,
    axis: int,
    min_count: int = 10,
    separation_factor: float = DEFAULT_SEPARATION,
    max_depth: int = 60,
) -> SelectionResult:
    """Pick a subsequence whose axis-``axis`` intervals (base or reflected) are disjoint.

    A candidate joins the greedy selection when its distance to the
    accumulation point plus its length is below ``separation_factor`` times
    the distance from that point to everything chosen so far; any factor
    ``<= 1`` guarantees disjointness.  ``k`` and ``A`` define the reflected
    rectangles and may be ``None`` when no reflection is wanted.
    """
    _check_axis(axis)
    if not 0.0 < separation_factor <= 1.0:
        raise DomainError("separation_factor must lie in (0, 1]")
    if not rects:
        return SelectionResult((), "base", axis, "empty", None, True)
    ivs = [r.intervals[axis - 1] for r in rects]
    want = min(min_count, len(ivs))
    esc = _escape(ivs)
    if len(esc) >= want:
        return SelectionResult(tuple(esc), "base", axis, "escape", None, pairwise_disjoint([ivs[i] for i in esc]))
    if not ivs[-1].length < 0.5 * ivs[0].length:
        raise SelectionFailure(
            f"axis {axis} lengths do not shrink: last {ivs[-1].length:g} vs first {ivs[0].length:g}"
        )
    x = _accumulation_point(ivs, want, max_depth)
    base = _greedy(ivs, x, separation_factor)
    best = ("base", base, ivs)
    if len(base) < want and k is not None and A is not None:
        tivs = [reflect(r, k, A).reflected.intervals[axis - 1] for r in rects]
        refl = _greedy(tivs, x, separation_factor)
        if len(refl) > len(base):
            best = ("reflected", refl, tivs)
    which, idx, family = best
    return SelectionResult(tuple(idx), which, axis, "accumulation", x, pairwise_disjoint([family[i] for i in idx]))


# -- shrinking probes -------------------------------------------------------------


@dataclass(frozen=True)
class ProbeReport:
    axis: int
    scales: tuple[float, ...]
    o_alpha_values: tuple[float, ...]
    inf_witness: float
    witnesses: tuple[ZygmundRectangle | None, ...] = field(default=())
    searched: tuple[int, ...] = field(default=())


def _scale_pairs(axis: int, exponent: int, free_max: int):
    if axis == 1:
        return [(exponent, k) for k in range(0, free_max + 1)]
    if axis == 2:
        return [(j, exponent) for j in range(0, free_max + 1)]
    return [(j, exponent - j) for j in range(0, exponent + 1) if exponent - j <= free_max and j <= free_max]


def shrinking_probe(
    b: Symbol,
    alpha: float,
    axis: int,
    scale_ladder: Sequence[float],
    domain,
    res=4,
    free_max: int = 4,
    per_scale_cap: int = 4096,
) -> ProbeReport:
    """Largest ``O_alpha`` among dyadic rectangles with ``l(I^axis)`` on the ladder.

    Scales must be powers of two.  The lengths along the other axes range
    over ``2^0 .. 2^-free_max``.  Each scale is searched over at most
    ``per_scale_cap`` rectangles, subsampled evenly in enumeration order.
    """
    _check_axis(axis)
    scales = [float(s) for s in scale_ladder]
    if any(a <= b_ for a, b_ in zip(scales, scales[1:])):
        raise DomainError("scale ladder must be strictly decreasing")
    res = as_resolution(res)
    values, witnesses, searched = [], [], []
    for s in scales:
        e = -np.log2(s)
        if abs(e - round(e)) > 1e-9:
            raise DomainError(f"scale {s} is not a power of two")
        e = int(round(e))
        groups = [g for g in (dyadic_group(domain, j, k) for j, k in _scale_pairs(axis, e, free_max)) if g is not None]
        total = sum(lows.shape[0] for _, lows in groups)
        keep_every = max(1, int(np.ceil(total / per_scale_cap)))
        best, best_rect, seen, pos = 0.0, None, 0, 0
        for lengths, lows in groups:
            idx = np.arange(lows.shape[0])
            sel = idx[(idx + pos) % keep_every == 0]
            pos += lows.shape[0]
            if sel.size == 0:
                continue
            chunk = lows[sel]
            pts = chunk[:, None, :] + _offsets(lengths, res)[None, :, :]
            stat = _row_osc(np.asarray(b.evaluate(pts), dtype=float)) / float(np.prod(lengths)) ** alpha
            i = int(np.argmax(stat))
            if best_rect is None or stat[i] > best:
                best, best_rect = float(max(stat[i], 0.0)), rectangle_from_corner(chunk[i], lengths)
            seen += sel.size
        values.append(best)
        witnesses.append(best_rect)
        searched.append(seen)
    inf_w = min(values) if values else 0.0
    return ProbeReport(axis, tuple(scales), tuple(values), inf_w, tuple(witnesses), tuple(searched))


# -- rescaling chain ----------------------------------------------------------------


@dataclass(frozen=True)
class RjChainReport:
    rectangles: tuple[ZygmundRectangle, ...]
    osc_values: tuple[float, ...]
    monotone_checked: bool
    monotone_failures: tuple[tuple[int, float], ...]
    closing_holds: tuple[bool, ...]


def rj_chain(b: Symbol, r: ZygmundRectangle, j_max: int, res=8, constants: Sequence[float] | None = None, tol: float = 1e-12) -> RjChainReport:
    """Oscillations along ``R_j = 2^-j I^1 x 2^j I^2 x I^3`` (concentric rescaling).

    For symbols flagged as independent of ``x1`` and ``x2`` the report also
    records, for each sampled constant ``c``, whether
    ``<|b - c|>_{R_j} <= <|b - c|>_{R_{j+1}}``.  Failures are listed, never
    raised.  ``closing_holds[j]`` records
    ``osc(b, R) <= 2 osc(b, R_j)``.
    """
    if j_max < 1:
        raise DomainError("j_max must be at least 1")
    res = as_resolution(res)
    rects = []
    for j in range(j_max + 1):
        rj = ZygmundRectangle(r.i1.scaled(2.0 ** -j), r.i2.scaled(2.0 ** j), r.i3)
        if b.domain is not None and not b.domain.contains_box(rj):
            raise DomainError(f"R_{j} = {rj.label()} leaves the symbol domain")
        rects.append(rj)
    samples = [b.sample(rj, res).samples for rj in rects]
    oscs = tuple(mean_abs_deviation(b, rj, res) for rj in rects)
    failures = []
    if b.x12_independent:
        if constants is None:
            lo = min(float(s.min()) for s in samples)
            hi = max(float(s.max()) for s in samples)
            constants = np.linspace(lo, hi, 9)
        for j in range(j_max):
            for c in constants:
                left = float(np.mean(np.abs(samples[j] - c)))
                right = float(np.mean(np.abs(samples[j + 1] - c)))
                if left > right + tol * max(1.0, abs(right)):
                    failures.append((j, float(c)))
    closing = tuple(oscs[0] <= 2.0 * o + tol for o in oscs)
    return RjChainReport(tuple(rects), oscs, bool(b.x12_independent), tuple(failures), closing)


# -- dossier ------------------------------------------------------------------------


@dataclass(frozen=True)
class AxisEvidence:
    probe: ProbeReport
    certificates: tuple[OscillationCertificate, ...]
    selection: SelectionResult | None
    obstruction: bool
    note: str = ""

    @property
    def certificates_valid(self) -> bool:
        return all(c.valid for c in self.certificates)


@dataclass(frozen=True)
class CompactnessDossier:
    symbol: str
    alpha: float
    threshold: float
    axes: tuple[AxisEvidence, ...]

    @property
    def obstruction(self) -> bool:
        return any(a.obstruction for a in self.axes)

    @property
    def conclusion(self) -> str:
        return "compactness obstruction witnessed" if self.obstruction else "no obstruction found"


def default_ladder(axis: int, depths) -> list[float]:
    lo, hi = depths
    return [2.0 ** -d for d in range(lo, hi + 1)]


def compactness_dossier(
    b: Symbol,
    alpha: float,
    k: Kernel,
    calibration: AmplitudeCalibration,
    domain,
    depths=(0, 4),
    threshold: float = DEFAULT_THRESHOLD,
    res=4,
    cert_res=None,
) -> CompactnessDossier:
    """Combine probes, certificates and disjoint selection on every axis.

    An axis witnesses an obstruction when its probe infimum reaches
    ``threshold``, every witnessing rectangle carries a valid certificate,
    and at least two of them form a disjoint (base or reflected) family.
    """
    axes = []
    for axis in (1, 2, 3):
        probe = shrinking_probe(b, alpha, axis, default_ladder(axis, depths), domain, res, free_max=depths[1])
        rects = [w for w in probe.witnesses if w is not None]
        certs = tuple(oscillation_lower_bound(b, k, r, calibration, cert_res) for r in rects)
        selection, note = None, ""
        if len(rects) >= 2:
            try:
                selection = select_disjoint(rects, k, calibration.amplitude, axis, min_count=len(rects))
            except SelectionFailure as exc:
                note = f"selection skipped: {exc}"
        obstruction = (
            probe.inf_witness >= threshold
            and all(c.valid for c in certs)
            and selection is not None
            and selection.disjoint
            and len(selection.indices) >= 2
        )
        axes.append(AxisEvidence(probe, certs, selection, obstruction, note))
    return CompactnessDossier(b.label(), float(alpha), float(threshold), tuple(axes))
