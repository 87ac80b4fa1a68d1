"""A multiplier in the Zygmund class whose first derivatives are unbounded.

``m(xi) = xi3 / sqrt((xi1 xi2)^2 + xi3^2)`` is invariant under the frequency
dilations ``(s xi1, t xi2, st xi3)``.  First partials are available in closed
form; higher ones come from nested central differences with one Richardson
step.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ClearanceError, DomainError, SingularityError

H_SCALE = 1e-3
CLEARANCE = 10.0
CORNER_VALUE = 2.0 ** -1.5


class MultiIndex(NamedTuple):
    a1: int
    a2: int
    a3: int

    @property
    def order(self) -> int:
        return self.a1 + self.a2 + self.a3

    def label(self) -> str:
        return f"({self.a1},{self.a2},{self.a3})"


def as_multi_index(alpha) -> MultiIndex:
    a = MultiIndex(*(int(v) for v in alpha))
    if min(a) < 0:
        raise DomainError(f"multi-index entries must be nonnegative, got {tuple(a)}")
    return a


def multi_indices(max_order: int) -> list[MultiIndex]:
    out = [MultiIndex(*a) for a in itertools.product(range(max_order + 1), repeat=3) if sum(a) <= max_order]
    return sorted(out, key=lambda a: (a.order, tuple(-v for v in a)))


def _split(xi):
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != 3:
        raise DomainError("frequency points need three coordinates")
    return xi, xi[..., 0], xi[..., 1], xi[..., 2]


def _radius_sq(x1, x2, x3):
    a = x1 * x2
    r2 = a * a + x3 * x3
    if np.any(r2 == 0):
        raise SingularityError("frequency point on the singular set xi1 xi2 = xi3 = 0")
    return a, r2


def fp_multiplier(xi):
    """Closed-form value; scalar in, scalar out."""
    _, x1, x2, x3 = _split(xi)
    _, r2 = _radius_sq(x1, x2, x3)
    out = x3 / np.sqrt(r2)
    return float(out) if out.ndim == 0 else out


def fp_gradient(xi) -> np.ndarray:
    """Closed-form partials, stacked on the last axis."""
    _, x1, x2, x3 = _split(xi)
    if np.any(x1 == 0):
        raise DomainError("the xi1 partial is written with a 1/xi1 factor; xi1 = 0 is excluded")
    a, r2 = _radius_sq(x1, x2, x3)
    r3 = r2 * np.sqrt(r2)
    d1 = -(a * a * x3) / (x1 * r3)
    d2 = -x1 * a * x3 / r3
    d3 = a * a / r3
    return np.stack([d1, d2, d3], axis=-1)


def fd_steps(xi, h_scale: float = H_SCALE) -> np.ndarray:
    """Per-axis steps scaled to the distance over which ``m`` changes."""
    _, x1, x2, x3 = _split(xi)
    ax = np.abs(np.stack([x1, x2, x3], axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        local = np.stack([ax[..., 2] / ax[..., 1], ax[..., 2] / ax[..., 0], ax[..., 0] * ax[..., 1]], axis=-1)
    local = np.where(np.isfinite(local), local, 0.0)
    s = np.maximum(ax, local)
    s = np.where(s > 0, s, 1.0)
    return h_scale * s


def check_clearance(xi, h: np.ndarray, factor: float = CLEARANCE) -> None:
    _, x1, x2, x3 = _split(xi)
    ok = (np.abs(x3) > factor * h[..., 2]) | ((np.abs(x1) > factor * h[..., 0]) & (np.abs(x2) > factor * h[..., 1]))
    if not np.all(ok):
        bad = np.asarray(xi, dtype=float).reshape(-1, 3)[~np.asarray(ok).reshape(-1)][0]
        raise ClearanceError(f"finite-difference stencil too close to the singular set at {bad.tolist()}")


def _stencil(n: int):
    return [((n / 2.0 - k), (-1) ** k * comb(n, k)) for k in range(n + 1)]


def _nested(xi, alpha: MultiIndex, h):
    acc = 0.0
    for terms in itertools.product(*(_stencil(n) for n in alpha)):
        shift = np.stack([t[0] * h[..., i] for i, t in enumerate(terms)], axis=-1)
        w = np.prod([t[1] for t in terms])
        acc = acc + w * fp_multiplier(xi + shift)
    return acc / np.prod([h[..., i] ** n for i, n in enumerate(alpha)], axis=0)


def fp_partial_fd(xi, alpha, h_scale: float = H_SCALE):
    """``d^alpha m`` by nested central differences and one Richardson step."""
    a = as_multi_index(alpha)
    if a.order > 3:
        raise DomainError("finite differences are supported up to order 3")
    xi = np.asarray(xi, dtype=float)
    if a.order == 0:
        return fp_multiplier(xi)
    h = fd_steps(xi, h_scale)
    check_clearance(xi, h)
    coarse = _nested(xi, a, h)
    fine = _nested(xi, a, 0.5 * h)
    out = (4.0 * fine - coarse) / 3.0
    return float(out) if np.ndim(out) == 0 else out


def fp_bound(xi, alpha):
    """``|xi1|^(a2 - a1) * |(|xi1| xi2, xi3)|^-(a2 + a3)``."""
    a = as_multi_index(alpha)
    _, x1, x2, x3 = _split(xi)
    p1, p2 = a.a2 - a.a1, -(a.a2 + a.a3)
    if p1 < 0 and np.any(x1 == 0):
        raise DomainError("bound needs xi1 != 0 for this multi-index")
    r = np.hypot(np.abs(x1) * x2, x3)
    if p2 < 0 and np.any(r == 0):
        raise DomainError("bound needs (xi1 xi2, xi3) != 0 for this multi-index")
    out = np.abs(x1) ** p1 * r ** p2
    return float(out) if np.ndim(out) == 0 else out


def partial(xi, alpha, h_scale: float = H_SCALE):
    """Closed form where available, finite differences otherwise."""
    a = as_multi_index(alpha)
    if a.order == 0:
        return fp_multiplier(xi)
    if a.order == 1:
        return fp_gradient(xi)[..., a.index(1)]
    return fp_partial_fd(xi, a, h_scale)


# -- grids and sweeps -------------------------------------------------------------


@dataclass(frozen=True)
class LogGrid:
    """Positive-octant grid with ``n`` log-spaced values per axis on ``[2^lo, 2^hi]``."""

    lo: float = -20.0
    hi: float = 20.0
    n: int = 81

    def __post_init__(self):
        if not self.hi > self.lo or self.n < 2:
            raise DomainError("log grid needs hi > lo and at least two points")

    @property
    def axis(self) -> np.ndarray:
        return 2.0 ** np.linspace(self.lo, self.hi, self.n)

    def refined(self) -> "LogGrid":
        return LogGrid(self.lo, self.hi, 2 * self.n - 1)

    def blocks(self, rows: int = 1 << 16):
        ax = self.axis
        g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
        for s in range(0, g.shape[0], rows):
            yield g[s:s + rows]

    def spec(self) -> str:
        return f"2^[{self.lo:g},{self.hi:g}] x{self.n}"


@dataclass(frozen=True)
class MultiplierCheck:
    alpha: MultiIndex
    max_ratio: float
    grid_spec: str
    argmax: tuple[float, float, float]


def _max_ratio(grid: LogGrid, a: MultiIndex, h_scale: float):
    best, arg = -1.0, None
    for pts in grid.blocks():
        ratio = np.abs(partial(pts, a, h_scale)) / fp_bound(pts, a)
        i = int(np.argmax(ratio))
        if ratio[i] > best:
            best, arg = float(ratio[i]), tuple(float(v) for v in pts[i])
    return best, arg


def check_mz1(grid: LogGrid | None = None, alpha_max: int = 2, h_scale: float = H_SCALE) -> list[MultiplierCheck]:
    """Sup over the grid of ``|d^alpha m| / bound`` for every ``|alpha| <= alpha_max``.

    ``|d^alpha m|`` and the bound are both unchanged by sign flips of the
    coordinates, so the positive octant suffices.
    """
    grid = grid or LogGrid()
    out = []
    for a in multi_indices(alpha_max):
        r, arg = _max_ratio(grid, a, h_scale)
        out.append(MultiplierCheck(a, r, grid.spec(), arg))
    return out


class StabilityRow(NamedTuple):
    alpha: MultiIndex
    coarse: float
    fine: float
    change: float


def mz1_stability(grid: LogGrid | None = None, alpha_max: int = 2, h_scale: float = H_SCALE) -> list[StabilityRow]:
    """Relative change of each max ratio when the grid density doubles."""
    grid = grid or LogGrid()
    coarse = check_mz1(grid, alpha_max, h_scale)
    fine = check_mz1(grid.refined(), alpha_max, h_scale)
    rows = []
    for c, f in zip(coarse, fine):
        change = abs(f.max_ratio - c.max_ratio) / max(f.max_ratio, np.finfo(float).tiny)
        rows.append(StabilityRow(c.alpha, c.max_ratio, f.max_ratio, change))
    return rows


class SweepRow(NamedTuple):
    eps: float
    d1: float
    d2: float
    d3: float
    corner: float


def eps_box(eps: float, n: int = 17) -> np.ndarray:
    t = np.linspace(1.0, 2.0, n)
    g = np.meshgrid(eps * t, eps * t, eps * eps * t, indexing="ij")
    return np.stack([c.reshape(-1) for c in g], axis=1)


def unboundedness_sweep(eps_ladder: Sequence[float] = tuple(2.0 ** -k for k in range(2, 13, 2)), n: int = 17) -> list[SweepRow]:
    """Normalized gradient maxima over ``[e,2e] x [e,2e] x [e^2,2e^2]``.

    The box is a frequency dilation of the ``e = 1`` box, so ``e max|d1 m|``,
    ``e max|d2 m|`` and ``e^2 max|d3 m|`` do not depend on ``e``; hence the
    unnormalized maxima blow up as ``e -> 0``.
    """
    rows = []
    for e in eps_ladder:
        if not e > 0:
            raise DomainError(f"eps must be positive, got {e}")
        g = np.abs(fp_gradient(eps_box(e, n))).max(axis=0)
        corner = e * abs(float(fp_gradient(np.array([e, e, e * e]))[0]))
        rows.append(SweepRow(float(e), e * g[0], e * g[1], e * e * g[2], corner))
    return rows


def gradient_check(xi, h_scale: float = H_SCALE) -> np.ndarray:
    """``|fd - closed| / bound`` for each first partial, shape ``(..., 3)``.

    The error is measured against the size bound, which is the natural scale
    of each partial; the closed forms vanish on whole coordinate planes.
    """
    xi = np.asarray(xi, dtype=float)
    exact = fp_gradient(xi)
    out = []
    for i in range(3):
        a = MultiIndex(*(1 if j == i else 0 for j in range(3)))
        fd = fp_partial_fd(xi, a, h_scale)
        out.append(np.abs(fd - exact[..., i]) / fp_bound(xi, a))
    return np.stack(out, axis=-1)


def clearance_points(n: int, seed: int = 0, log2_range=(-10.0, 10.0)) -> np.ndarray:
    """Random signed points with log-uniform magnitudes that respect the clearance rule."""
    rng = np.random.default_rng(seed)
    mag = 2.0 ** rng.uniform(*log2_range, size=(n, 3))
    pts = mag * rng.choice([-1.0, 1.0], size=(n, 3))
    check_clearance(pts, fd_steps(pts))
    return pts
