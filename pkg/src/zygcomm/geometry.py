"""Intervals, boxes, Zygmund rectangles and dilations, reflected rectangles.

A Zygmund rectangle is an axis-parallel box ``I1 x I2 x I3`` whose third side
length is the product of the first two.  Boxes are stored as closed intervals
but every containment and disjointness test uses half-open ``[lo, hi)``
semantics so that dyadic neighbours sharing a face count as disjoint.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, WitnessFailure

DEFAULT_ZYGMUND_TOL = 1e-12


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError(f"interval endpoints must be finite: {self.lo}, {self.hi}")
        if not self.hi > self.lo:
            raise DomainError(f"interval needs hi > lo, got [{self.lo}, {self.hi}]")

    @classmethod
    def centered(cls, center: float, length: float) -> "Interval":
        half = 0.5 * length
        return cls(center - half, center + half)

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x < self.hi

    def contains_interval(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def disjoint(self, other: "Interval") -> bool:
        return self.hi <= other.lo or other.hi <= self.lo

    def dist(self, other: "Interval") -> float:
        """Euclidean gap between the closed intervals (0 when they touch)."""
        return max(0.0, other.lo - self.hi, self.lo - other.hi)

    def dist_point(self, x: float) -> float:
        return max(0.0, self.lo - x, x - self.hi)

    def scaled(self, c: float) -> "Interval":
        """Concentric interval with length multiplied by ``c``."""
        return Interval.centered(self.center, c * self.length)

    def dilate(self, s: float) -> "Interval":
        """Image under ``x -> s x`` for ``s > 0``."""
        return Interval(s * self.lo, s * self.hi)

    def to_list(self) -> list[float]:
        return [float(self.lo), float(self.hi)]


def _as_interval(obj) -> Interval:
    if isinstance(obj, Interval):
        return obj
    lo, hi = obj
    return Interval(float(lo), float(hi))


@dataclass(frozen=True)
class Box:
    """Axis-parallel box in R^3 with no constraint on the side lengths."""

    i1: Interval
    i2: Interval
    i3: Interval

    @classmethod
    def from_bounds(cls, bounds: Sequence) -> "Box":
        a, b, c = (_as_interval(x) for x in bounds)
        return cls(a, b, c)

    @property
    def intervals(self) -> tuple[Interval, Interval, Interval]:
        return (self.i1, self.i2, self.i3)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([iv.length for iv in self.intervals])

    @property
    def center(self) -> np.ndarray:
        return np.array([iv.center for iv in self.intervals])

    @property
    def lo(self) -> np.ndarray:
        return np.array([iv.lo for iv in self.intervals])

    @property
    def hi(self) -> np.ndarray:
        return np.array([iv.hi for iv in self.intervals])

    @property
    def volume(self) -> float:
        return self.i1.length * self.i2.length * self.i3.length

    def contains_point(self, x) -> bool:
        return all(iv.contains(float(c)) for iv, c in zip(self.intervals, x))

    def contains_box(self, other: "Box") -> bool:
        return all(a.contains_interval(b) for a, b in zip(self.intervals, other.intervals))

    def disjoint(self, other: "Box") -> bool:
        return any(a.disjoint(b) for a, b in zip(self.intervals, other.intervals))

    def gaps(self, other: "Box") -> tuple[float, float, float]:
        """Per-coordinate distances between the projections."""
        return tuple(a.dist(b) for a, b in zip(self.intervals, other.intervals))

    def to_json(self) -> dict:
        return {"i1": self.i1.to_list(), "i2": self.i2.to_list(), "i3": self.i3.to_list()}

    def label(self) -> str:
        return "x".join(f"[{iv.lo:.6g},{iv.hi:.6g}]" for iv in self.intervals)


def is_zygmund(i1: Interval, i2: Interval, i3: Interval, tol: float = DEFAULT_ZYGMUND_TOL) -> bool:
    return abs(i3.length - i1.length * i2.length) <= tol * i3.length


def _rounding_tol(center, lengths) -> float:
    # endpoints far from the origin lose relative precision in the lengths
    drift = max(abs(float(c)) / float(l) for c, l in zip(center, lengths))
    return max(DEFAULT_ZYGMUND_TOL, 8.0 * np.finfo(float).eps * (1.0 + drift))


@dataclass(frozen=True)
class ZygmundRectangle(Box):
    zygmund_tol: float = field(default=DEFAULT_ZYGMUND_TOL, compare=False)

    def __post_init__(self):
        if not is_zygmund(self.i1, self.i2, self.i3, self.zygmund_tol):
            raise DomainError(
                f"not a Zygmund rectangle: lengths {self.i1.length}, {self.i2.length}, {self.i3.length}"
            )

    @classmethod
    def from_bounds(cls, bounds: Sequence, tol: float = DEFAULT_ZYGMUND_TOL) -> "ZygmundRectangle":
        a, b, c = (_as_interval(x) for x in bounds)
        return cls(a, b, c, tol)

    @classmethod
    def from_center(cls, center, l1: float, l2: float, l3: float | None = None) -> "ZygmundRectangle":
        if l3 is None:
            l3 = l1 * l2
        c = [float(v) for v in center]
        tol = _rounding_tol(c, (l1, l2, l3))
        return cls(
            Interval.centered(c[0], l1), Interval.centered(c[1], l2), Interval.centered(c[2], l3), tol
        )

    @classmethod
    def from_json(cls, obj: dict) -> "ZygmundRectangle":
        return cls.from_bounds([obj["i1"], obj["i2"], obj["i3"]])


@dataclass(frozen=True)
class ZygmundDilation:
    s: float
    t: float

    def __post_init__(self):
        if not (self.s > 0 and self.t > 0):
            raise DomainError(f"dilation parameters must be positive, got s={self.s}, t={self.t}")

    def compose(self, other: "ZygmundDilation") -> "ZygmundDilation":
        return ZygmundDilation(self.s * other.s, self.t * other.t)

    @property
    def factors(self) -> np.ndarray:
        return np.array([self.s, self.t, self.s * self.t])


def dilate_point(x, d: ZygmundDilation) -> np.ndarray:
    """``(x1, x2, x3) -> (s x1, t x2, s t x3)``; works on ``(..., 3)`` arrays."""
    return np.asarray(x, dtype=float) * d.factors


def dilate_rectangle(r: ZygmundRectangle, d: ZygmundDilation) -> ZygmundRectangle:
    tol = max(r.zygmund_tol, _rounding_tol(r.center, r.lengths))
    return ZygmundRectangle(r.i1.dilate(d.s), r.i2.dilate(d.t), r.i3.dilate(d.s * d.t), tol)


def _dyadic_positions(iv: Interval, length: float) -> range:
    # integer m with [m*length, (m+1)*length] inside iv
    first = math.ceil(iv.lo / length - 1e-12)
    last = math.floor(iv.hi / length + 1e-12) - 1
    return range(first, last + 1)


def _domain_intervals(domain) -> tuple | None:
    if isinstance(domain, Box):
        return domain.intervals
    pairs = [(p.lo, p.hi) if isinstance(p, Interval) else tuple(map(float, p)) for p in domain]
    if len(pairs) != 3:
        raise DomainError("domain needs three (lo, hi) pairs")
    if any(not hi > lo for lo, hi in pairs):
        return None
    return tuple(Interval(lo, hi) for lo, hi in pairs)


def iter_zygmund(domain, min_depth: int, max_depth: int) -> Iterable[ZygmundRectangle]:
    """Lazy version of :func:`enumerate_zygmund` (same order)."""
    if min_depth > max_depth:
        raise DomainError("min_depth must not exceed max_depth")
    ivs = _domain_intervals(domain)
    if ivs is None:
        return
    for j in range(min_depth, max_depth + 1):
        for k in range(min_depth, max_depth + 1):
            l1, l2, l3 = 2.0 ** -j, 2.0 ** -k, 2.0 ** -(j + k)
            p1 = _dyadic_positions(ivs[0], l1)
            p2 = _dyadic_positions(ivs[1], l2)
            p3 = _dyadic_positions(ivs[2], l3)
            for m1, m2, m3 in itertools.product(p1, p2, p3):
                yield ZygmundRectangle(
                    Interval(m1 * l1, (m1 + 1) * l1),
                    Interval(m2 * l2, (m2 + 1) * l2),
                    Interval(m3 * l3, (m3 + 1) * l3),
                )


def enumerate_zygmund(domain, min_depth: int, max_depth: int) -> list[ZygmundRectangle]:
    """All dyadic Zygmund rectangles of side lengths ``(2^-j, 2^-k, 2^-(j+k))``.

    ``j`` and ``k`` both range over ``[min_depth, max_depth]``; rectangles sit
    on the dyadic grid of their own scale and lie inside ``domain``.  The order
    is ``j``, then ``k``, then the grid positions lexicographically.
    """
    return list(iter_zygmund(domain, min_depth, max_depth))


def count_zygmund(domain, min_depth: int, max_depth: int) -> int:
    ivs = _domain_intervals(domain)
    if ivs is None:
        return 0
    total = 0
    for j in range(min_depth, max_depth + 1):
        for k in range(min_depth, max_depth + 1):
            sizes = [len(_dyadic_positions(iv, l)) for iv, l in zip(ivs, (2.0 ** -j, 2.0 ** -k, 2.0 ** -(j + k)))]
            total += sizes[0] * sizes[1] * sizes[2]
    return total


@dataclass(frozen=True)
class ReflectedPair:
    """A Zygmund rectangle together with its reflected copy.

    ``dist_constants`` holds the measured ratios ``dist(I^i, ~I^i)`` over
    ``A^(1/4) l(I^i)`` (axes 1, 2) and over ``A^(1/2) l(I^3)`` (axis 3);
    ``kernel_constant`` is ``|K(c~, c)| * A * |R|``.
    """

    base: ZygmundRectangle
    reflected: ZygmundRectangle
    amplitude: float
    kernel_at_centers: float
    witness_scale: float
    dist_constants: tuple[float, float, float]
    kernel_constant: float


def reflect(r: ZygmundRectangle, k, A: float, witness_scale: float = 0.5) -> ReflectedPair:
    """Build the reflected rectangle of ``r`` from the kernel's witness.

    The witness is requested at ``y = c_R`` and
    ``delta_i = witness_scale * A^(1/4) * l(I^i)``.  With the built-in witness
    (offsets ``2 delta_1, 2 delta_2, 4 delta_1 delta_2``) the default
    ``witness_scale = 1/2`` puts the reflected centre at offsets
    ``(A^(1/4) l1, A^(1/4) l2, A^(1/2) l3)`` from ``c_R``.
    """
    if not A > 1:
        raise DomainError(f"amplitude must exceed 1, got {A}")
    c = r.center
    q = A ** 0.25
    d1 = witness_scale * q * r.i1.length
    d2 = witness_scale * q * r.i2.length
    x = np.asarray(k.witness(c, d1, d2), dtype=float)
    z = np.abs(x - c)
    if not (z[0] > d1 and z[1] > d2 and z[2] > d1 * d2):
        raise WitnessFailure(f"witness {x} is not separated from {c} at scales ({d1}, {d2})")
    kval = float(k.evaluate(x, c))
    lower = k.witness_constant / (d1 * d1 * d2 * d2)
    if not abs(kval) >= lower * (1.0 - 1e-12) or kval == 0.0:
        raise WitnessFailure(
            f"kernel {k.name!r}: |K(x, c_R)| = {abs(kval):.3e} below the witness bound {lower:.3e}"
        )
    lengths = r.lengths
    reflected = ZygmundRectangle.from_center(x, lengths[0], lengths[1], lengths[2])
    gaps = r.gaps(reflected)
    scales = (q * lengths[0], q * lengths[1], q * q * lengths[2])
    return ReflectedPair(
        base=r,
        reflected=reflected,
        amplitude=float(A),
        kernel_at_centers=kval,
        witness_scale=float(witness_scale),
        dist_constants=tuple(g / s for g, s in zip(gaps, scales)),
        kernel_constant=abs(kval) * A * r.volume,
    )


def dyadic_groups(domain, min_depth: int, max_depth: int):
    """Yield ``(lengths, lows)`` per scale pair ``(j, k)``.

    ``lows`` is an ``(M, 3)`` array of lower corners listed in the order of
    :func:`enumerate_zygmund`; ``lengths`` is shared by the whole group.
    """
    if min_depth > max_depth:
        raise DomainError("min_depth must not exceed max_depth")
    ivs = _domain_intervals(domain)
    if ivs is None:
        return
    for j in range(min_depth, max_depth + 1):
        for k in range(min_depth, max_depth + 1):
            group = dyadic_group(ivs, j, k)
            if group is not None:
                yield group


def dyadic_group(domain, j: int, k: int):
    """``(lengths, lows)`` for the single scale pair ``(j, k)``, or ``None`` if empty."""
    ivs = _domain_intervals(domain)
    if ivs is None:
        return None
    lengths = np.array([2.0 ** -j, 2.0 ** -k, 2.0 ** -(j + k)])
    pos = [np.arange(p.start, p.stop) * l for p, l in zip(
        (_dyadic_positions(iv, l) for iv, l in zip(ivs, lengths)), lengths)]
    if any(len(p) == 0 for p in pos):
        return None
    g = np.meshgrid(*pos, indexing="ij")
    return lengths, np.stack([c.reshape(-1) for c in g], axis=1)


def rectangle_from_corner(lo, lengths) -> ZygmundRectangle:
    lo = [float(v) for v in lo]
    return ZygmundRectangle(*(Interval(a, a + float(l)) for a, l in zip(lo, lengths)))
