"""Oscillation functionals and the norm estimators built on them.

Suprema over all Zygmund rectangles are replaced by maxima over dyadic
families (optionally enlarged by random rectangles), so every reported norm
is a lower estimate and carries the size of the family it was taken over.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, GeometryError, PositivityError
from .fields import Symbol, as_resolution, mean_abs_deviation
from .geometry import Box, ZygmundRectangle, dyadic_groups, rectangle_from_corner

DEFAULT_C_EQ = 16.0
_ROW_BUDGET = 1 << 21


@dataclass(frozen=True)
class OscillationReport:
    rectangle: ZygmundRectangle
    osc: float
    alpha: float
    o_alpha: float
    resolution: tuple[int, int, int]
    refinement_delta: float


def osc(b: Symbol, r: ZygmundRectangle, res=8, alpha: float = 0.0) -> OscillationReport:
    """Mean oscillation of ``b`` on ``r`` with one refinement doubling recorded."""
    res = as_resolution(res)
    value = mean_abs_deviation(b, r, res)
    fine = mean_abs_deviation(b, r, tuple(2 * n for n in res))
    return OscillationReport(r, value, float(alpha), value / r.volume ** alpha, res, abs(value - fine))


def _offsets(lengths, res) -> np.ndarray:
    axes = [(np.arange(n) + 0.5) * (l / n) for l, n in zip(lengths, res)]
    g = np.meshgrid(*axes, indexing="ij")
    return np.stack([c.reshape(-1) for c in g], axis=1)


def _row_osc(vals: np.ndarray) -> np.ndarray:
    d = vals - vals.mean(axis=1, keepdims=True)
    scale = np.max(np.abs(vals), axis=1, keepdims=True)
    g = np.sign(d)
    g[np.abs(d) <= 8.0 * np.finfo(float).eps * scale] = 0.0
    return np.mean(d * g, axis=1)


def _family(domain, depths, jitter: int, seed: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    lo_d, hi_d = depths
    yield from dyadic_groups(domain, lo_d, hi_d)
    if jitter > 0:
        box = domain if isinstance(domain, Box) else Box.from_bounds(domain)
        rng = np.random.default_rng(seed)
        for _ in range(jitter):
            j, k = rng.uniform(lo_d, hi_d, size=2)
            lengths = np.array([2.0 ** -j, 2.0 ** -k, 2.0 ** -(j + k)])
            room = box.lengths - lengths
            if np.any(room < 0):
                continue
            yield lengths, (box.lo + rng.uniform(0.0, 1.0, size=3) * room)[None, :]


def family_reduce(
    b: Symbol, domain, depths, res, row_stat: Callable, jitter: int = 0, seed: int = 0
) -> tuple[float, ZygmundRectangle | None, int, float]:
    """Max of ``row_stat(values, lengths)`` over a rectangle family.

    ``row_stat`` receives the ``(M, N)`` sample block of one scale group.
    Returns the maximum, the first rectangle attaining it, the family size
    and the minimum.
    """
    res = as_resolution(res)
    best, best_rect, count, low = -np.inf, None, 0, np.inf
    for lengths, lows in _family(domain, depths, jitter, seed):
        off = _offsets(lengths, res)
        step = max(1, _ROW_BUDGET // off.shape[0])
        for a in range(0, lows.shape[0], step):
            chunk = lows[a : a + step]
            pts = chunk[:, None, :] + off[None, :, :]
            vals = np.asarray(b.evaluate(pts), dtype=float)
            stat = row_stat(vals, lengths)
            i = int(np.argmax(stat))
            if stat[i] > best:
                best, best_rect = float(stat[i]), rectangle_from_corner(chunk[i], lengths)
            low = min(low, float(np.min(stat)))
            count += chunk.shape[0]
    if count == 0:
        return 0.0, None, 0, 0.0
    return best, best_rect, count, low


@dataclass(frozen=True)
class NormEstimate:
    value: float
    witness: ZygmundRectangle | None
    family_size: int
    alpha: float
    minimum: float = 0.0


def bmo_norm(b: Symbol, domain, depths=(0, 3), alpha: float = 0.0, res=8, jitter: int = 0, seed: int = 0) -> NormEstimate:
    """``max_R osc(b, R) / |R|^alpha`` over the dyadic family (plus ``jitter`` random rectangles).

    ``alpha = 0`` gives the bmo_Z estimate.  ``minimum`` is the smallest value
    over the same family, which shows how shape independent the estimate is.
    """
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")

    def stat(vals, lengths):
        return _row_osc(vals) / float(np.prod(lengths)) ** alpha

    value, witness, size, low = family_reduce(b, domain, depths, res, stat, jitter, seed)
    return NormEstimate(max(value, 0.0), witness, size, float(alpha), max(low, 0.0))


class HolderReport(NamedTuple):
    value: float
    infinite: bool
    pair: tuple | None
    samples: int


def default_pair_sampler(domain, seed: int = 0) -> Callable:
    """Pairs inside ``domain``: a third random, a third differing only in ``x3``,
    and a sixth each differing only in ``x1`` or only in ``x2``.
    """
    box = domain if isinstance(domain, Box) else Box.from_bounds(domain)

    def sample(n):
        rng = np.random.default_rng(seed)
        x = box.lo + rng.uniform(size=(n, 3)) * box.lengths
        y = box.lo + rng.uniform(size=(n, 3)) * box.lengths
        kind = np.arange(n) % 6
        for axis, sel in ((0, kind == 2), (1, kind == 3)):
            keep = [a for a in range(3) if a != axis]
            y[np.ix_(sel, keep)] = x[np.ix_(sel, keep)]
        only3 = kind >= 4
        y[only3, :2] = x[only3, :2]
        return x, y

    return sample


def holder_x3_seminorm(b: Symbol, alpha: float, pair_sampler: Callable | None = None, n: int = 10_000, domain=None) -> HolderReport:
    """``max |b(x) - b(y)| / |x3 - y3|^(2 alpha)`` over sampled pairs.

    A nonzero difference across a pair with ``x3 = y3`` makes the value
    infinite.  Pairs with zero difference and ``x3 = y3`` are skipped.
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    if pair_sampler is None:
        pair_sampler = default_pair_sampler(domain if domain is not None else [[0, 1]] * 3)
    x, y = pair_sampler(n)
    num = np.abs(np.asarray(b.evaluate(x), dtype=float) - np.asarray(b.evaluate(y), dtype=float))
    den = np.abs(x[:, 2] - y[:, 2]) ** (2.0 * alpha)
    ratio = np.zeros_like(num)
    pos = den > 0
    ratio[pos] = num[pos] / den[pos]
    ratio[~pos & (num > 0)] = np.inf
    i = int(np.argmax(ratio)) if len(ratio) else 0
    value = float(ratio[i]) if len(ratio) else 0.0
    return HolderReport(value, bool(np.isinf(value)), (x[i].copy(), y[i].copy()) if len(ratio) else None, len(ratio))


@dataclass(frozen=True)
class EquivalenceReport:
    bmo: NormEstimate
    holder: HolderReport
    ratio: float
    c_eq: float
    status: str
    flagged: bool
    assumption: str = "b locally s-integrable for some s > 1"


def check_equivalence(
    b: Symbol, alpha: float, domain, depths=(0, 3), n: int = 10_000, c_eq: float = DEFAULT_C_EQ, res=8, seed: int = 0
) -> EquivalenceReport:
    """Compare the bmo_Z^alpha estimate with the Hölder-in-x3 seminorm.

    The report is flagged (never raised) when the ratio leaves
    ``[1 / c_eq, c_eq]`` or the Hölder side is infinite.
    """
    norm = bmo_norm(b, domain, depths, alpha, res)
    hold = holder_x3_seminorm(b, alpha, default_pair_sampler(domain, seed), n)
    if norm.value == 0.0 and hold.value == 0.0:
        return EquivalenceReport(norm, hold, float("nan"), c_eq, "both zero: consistent", False)
    if hold.infinite:
        return EquivalenceReport(norm, hold, 0.0, c_eq, "not bmo_Z^alpha on R^3: Hölder side infinite", True)
    ratio = norm.value / hold.value if hold.value > 0 else float("inf")
    if 1.0 / c_eq <= ratio <= c_eq:
        return EquivalenceReport(norm, hold, ratio, c_eq, "comparable", False)
    return EquivalenceReport(norm, hold, ratio, c_eq, f"ratio outside [1/{c_eq:g}, {c_eq:g}]", True)


# -- nested chains --------------------------------------------------------------

TELESCOPE_FACTOR = 16.0


def chain_constant(alpha: float) -> float:
    """Constant in ``|b(x) - b(y)| <= C ||b|| (r1 r2)^(2 alpha)`` from the chain.

    Each telescoping step costs the volume ratio 16 of consecutive
    rectangles, and ``sum_k |I_k|^alpha`` is a geometric series with ratio
    ``16^-alpha`` starting at ``|L|^alpha = 16^alpha (r1 r2)^(2 alpha)``.
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    q = 16.0 ** -alpha
    return 2.0 * TELESCOPE_FACTOR * 16.0 ** alpha / (1.0 - q)


@dataclass(frozen=True)
class ChainTranscript:
    endpoints: tuple
    rectangles: tuple
    osc_sum: float
    bound: float
    difference: float
    telescoped: float
    tail: float
    r1: float
    r2: float
    norm_estimate: float
    per_level: tuple = field(default=())

    @property
    def measured_constant(self) -> float:
        """``|b(x) - b(y)| / osc_sum`` (0 when both vanish)."""
        if self.osc_sum == 0:
            return 0.0 if self.difference == 0 else float("inf")
        return self.difference / self.osc_sum


def _chain_rect(center, r1, r2, k) -> ZygmundRectangle:
    s = 2.0 ** (1 - k)
    return ZygmundRectangle.from_center(center, s * r1, s * r2, s * s * r1 * r2)


def _inside(inner: ZygmundRectangle, outer: ZygmundRectangle) -> bool:
    tol = 1e-12 * outer.lengths
    return bool(np.all(inner.lo >= outer.lo - tol) and np.all(inner.hi <= outer.hi + tol))


def chain_bound(
    b: Symbol, x, y, alpha: float, eps: float = 1e-6, k_max: int = 20, res=4, norm_estimate: float | None = None
) -> ChainTranscript:
    """Nested-rectangle chain from a common ancestor ``L`` down to ``x`` and ``y``.

    ``r1 = max(|x1 - y1|, eps)`` and ``r2 = max(|x2 - y2|, eps, |x3 - y3| / r1)``,
    so ``|x3 - y3| <= r1 r2`` always holds and one construction covers both
    orderings of ``|x3 - y3|`` and ``|x1 - y1| |x2 - y2|``.  ``L`` is centred
    at the midpoint with sides ``(2 r1, 2 r2, 4 r1 r2)``; ``I_k`` and ``J_k``
    are centred at ``x`` and ``y`` with sides
    ``(2^(1-k) r1, 2^(1-k) r2, 2^(2-2k) r1 r2)``.

    ``telescoped`` is the sum of the jumps between consecutive averages plus
    ``tail``, the distance of ``b(x)``, ``b(y)`` from the averages over the
    last rectangles; by the triangle inequality it bounds ``|b(x) - b(y)|``.
    Each jump is at most 16 times the oscillation on the larger rectangle,
    which links ``telescoped`` to ``16 osc_sum``.  ``bound`` is
    ``chain_constant(alpha) * norm_estimate * (r1 r2)^(2 alpha)``.
    """
    if k_max < 1:
        raise DomainError("k_max must be at least 1")
    if eps <= 0:
        raise DomainError("eps must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r1 = max(abs(x[0] - y[0]), eps)
    r2 = max(abs(x[1] - y[1]), eps, abs(x[2] - y[2]) / r1)
    mid = 0.5 * (x + y)
    L = ZygmundRectangle.from_center(mid, 2 * r1, 2 * r2, 4 * r1 * r2)
    I = [_chain_rect(x, r1, r2, k) for k in range(1, k_max + 1)]
    J = [_chain_rect(y, r1, r2, k) for k in range(1, k_max + 1)]
    if not (_inside(I[0], L) and _inside(J[0], L)):
        raise GeometryError("first chain rectangles are not inside the top rectangle")
    for seq in (I, J):
        for a, c in zip(seq, seq[1:]):
            if not _inside(c, a):
                raise GeometryError("chain rectangles are not nested")
    res = as_resolution(res)
    osc_L = mean_abs_deviation(b, L, res)
    mean_L = float(np.mean(b.sample(L, res).samples))
    per_level = []
    steps = 0.0
    prev = (L, L, osc_L, osc_L, mean_L, mean_L)
    for a, c in zip(I, J):
        ma = float(np.mean(b.sample(a, res).samples))
        mc = float(np.mean(b.sample(c, res).samples))
        per_level.append((prev[2], prev[3]))
        steps += abs(ma - prev[4]) + abs(mc - prev[5])
        prev = (a, c, mean_abs_deviation(b, a, res), mean_abs_deviation(b, c, res), ma, mc)
    osc_sum = float(sum(p + q for p, q in per_level))
    bx, by = float(b.evaluate(x)), float(b.evaluate(y))
    tail = abs(bx - prev[4]) + abs(by - prev[5])
    norm = 0.0 if norm_estimate is None else float(norm_estimate)
    return ChainTranscript(
        endpoints=(x, y),
        rectangles=(L, tuple(I), tuple(J)),
        osc_sum=osc_sum,
        bound=chain_constant(alpha) * norm * (r1 * r2) ** (2 * alpha),
        difference=abs(bx - by),
        telescoped=steps + tail,
        tail=tail,
        r1=r1,
        r2=r2,
        norm_estimate=norm,
        per_level=tuple(per_level),
    )


# -- weights ------------------------------------------------------------------------


def apz_constant(w: Symbol, p: float, domain, depths=(0, 3), res=8) -> NormEstimate:
    """``max_R <w>_R <w^(-1/(p-1))>_R^(p-1)`` over the dyadic family.

    ``minimum`` reports the smallest per-rectangle value, which is at least 1
    by Jensen's inequality at grid level.
    """
    if not p > 1:
        raise DomainError("p must exceed 1")

    def stat(vals, lengths):
        if np.any(vals <= 0):
            raise PositivityError(f"weight {w.name!r} is not positive on the family")
        return vals.mean(axis=1) * np.mean(vals ** (-1.0 / (p - 1.0)), axis=1) ** (p - 1.0)

    value, witness, size, low = family_reduce(w, domain, depths, res, stat)
    return NormEstimate(value, witness, size, 0.0, low)


def o_alpha_dilation_pair(b: Symbol, r: ZygmundRectangle, s: float, t: float, alpha: float, res=8) -> tuple[float, float]:
    """Both sides of ``O_alpha(b o rho, R) = (st)^(2 alpha) O_alpha(b, rho R)``."""
    from .geometry import ZygmundDilation, dilate_rectangle

    d = ZygmundDilation(s, t)
    composed = Symbol(f"{b.name}-dilated", lambda x: b.evaluate(np.asarray(x, dtype=float) * d.factors))
    left = osc(composed, r, res, alpha).o_alpha
    right = (s * t) ** (2 * alpha) * osc(b, dilate_rectangle(r, d), res, alpha).o_alpha
    return left, right


def best_constant_ratio(b: Symbol, r: ZygmundRectangle, constants: Sequence[float], res=8) -> float:
    """``osc(b, R) / min_c <|b - c|>_R``; at most 2 for any set of constants."""
    vals = b.sample(r, res).samples
    best = min(float(np.mean(np.abs(vals - c))) for c in constants)
    value = mean_abs_deviation(b, r, res)
    if best == 0.0:
        return 0.0 if value == 0.0 else float("inf")
    return value / best
