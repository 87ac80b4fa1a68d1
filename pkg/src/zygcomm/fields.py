"""Symbols, grid-sampled functions and tensor midpoint quadrature."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DomainError
from .geometry import Box

Resolution = tuple[int, int, int]


def as_resolution(res) -> Resolution:
    if np.isscalar(res):
        res = (res, res, res)
    out = tuple(int(n) for n in res)
    if len(out) != 3 or min(out) < 1:
        raise DomainError(f"resolution needs three positive counts, got {res}")
    return out


def midpoints(lo: float, hi: float, n: int) -> np.ndarray:
    h = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * h


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Cell-midpoint samples of a function supported on ``box``.

    ``samples`` has shape ``resolution``; the flat ordering used by
    :attr:`nodes` and :attr:`flat` is C order.
    """

    box: Box
    resolution: Resolution
    samples: np.ndarray

    def __post_init__(self):
        res = as_resolution(self.resolution)
        arr = np.asarray(self.samples, dtype=float).reshape(res)
        arr.setflags(write=False)
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "samples", arr)

    @classmethod
    def from_function(cls, func: Callable, box: Box, res) -> "GridFunction":
        res = as_resolution(res)
        return cls(box, res, np.asarray(func(grid_nodes(box, res)), dtype=float).reshape(res))

    @classmethod
    def constant(cls, box: Box, res, value: float = 1.0) -> "GridFunction":
        res = as_resolution(res)
        return cls(box, res, np.full(res, float(value)))

    @property
    def cell_volume(self) -> float:
        n1, n2, n3 = self.resolution
        return self.box.volume / (n1 * n2 * n3)

    @property
    def nodes(self) -> np.ndarray:
        return grid_nodes(self.box, self.resolution)

    @property
    def flat(self) -> np.ndarray:
        return self.samples.reshape(-1)

    @property
    def size(self) -> int:
        return self.samples.size

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def with_samples(self, samples) -> "GridFunction":
        return GridFunction(self.box, self.resolution, np.asarray(samples, dtype=float).reshape(self.resolution))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _same_grid(self, other)
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _same_grid(self, other)
        return self.with_samples(self.samples - other.samples)

    def __mul__(self, c) -> "GridFunction":
        if isinstance(c, GridFunction):
            _same_grid(self, c)
            return self.with_samples(self.samples * c.samples)
        return self.with_samples(self.samples * float(c))

    __rmul__ = __mul__


def _same_grid(a: GridFunction, b: GridFunction):
    if a.box != b.box or a.resolution != b.resolution:
        raise DomainError("grid functions live on different grids")


def grid_axes(box: Box, res) -> list[np.ndarray]:
    res = as_resolution(res)
    return [midpoints(iv.lo, iv.hi, n) for iv, n in zip(box.intervals, res)]


def grid_nodes(box: Box, res) -> np.ndarray:
    """Cell midpoints as an ``(n1 n2 n3, 3)`` array in C order."""
    a1, a2, a3 = grid_axes(box, res)
    g = np.meshgrid(a1, a2, a3, indexing="ij")
    return np.stack([c.reshape(-1) for c in g], axis=1)


def quadrature(g: GridFunction) -> float:
    """Midpoint-rule integral of ``g`` over its box."""
    return float(np.sum(g.samples) * g.cell_volume)


def inner(f: GridFunction, g: GridFunction) -> float:
    _same_grid(f, g)
    return float(np.sum(f.samples * g.samples) * f.cell_volume)


@dataclass(frozen=True, eq=False)
class Symbol:
    """A scalar field ``b`` on R^3.

    ``holder_exponent`` is the claimed exponent ``beta`` in
    ``|b(x) - b(y)| <= C |x3 - y3|^beta`` (``None`` if no claim), and
    ``x12_independent`` marks symbols that do not depend on ``x1`` or ``x2``.
    """

    name: str
    evaluate: Callable
    holder_exponent: float | None = None
    x12_independent: bool = False
    domain: Box | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.evaluate(x)

    def sample(self, box: Box, res) -> GridFunction:
        if self.domain is not None and not self.domain.contains_box(box):
            raise DomainError(f"symbol {self.name!r} is only defined on {self.domain.label()}")
        return GridFunction.from_function(self.evaluate, box, res)

    def label(self) -> str:
        if not self.params:
            return self.name
        inner_ = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}({inner_})"


def _coord(x, i):
    return np.asarray(x, dtype=float)[..., i]


def constant_symbol(c: float = 1.0) -> Symbol:
    c = float(c)
    return Symbol(
        "constant",
        lambda x: np.full(np.shape(x)[:-1], c),
        holder_exponent=1.0,
        x12_independent=True,
        params={"c": c},
    )


def linear_x3() -> Symbol:
    return Symbol("linear-x3", lambda x: _coord(x, 2), holder_exponent=1.0, x12_independent=True)


def linear_x1() -> Symbol:
    return Symbol("linear-x1", lambda x: _coord(x, 0))


def holder_x3(beta: float = 0.5) -> Symbol:
    beta = float(beta)
    if not 0.0 < beta <= 1.0:
        raise DomainError(f"holder exponent must lie in (0, 1], got {beta}")
    return Symbol(
        "holder-x3",
        lambda x: np.abs(_coord(x, 2)) ** beta,
        holder_exponent=beta,
        x12_independent=True,
        params={"beta": beta},
    )


def sign_x3(at: float = 0.0) -> Symbol:
    """``sign(x3 - at)`` with ``sign(0) = 0``."""
    at = float(at)
    return Symbol("sign-x3", lambda x: np.sign(_coord(x, 2) - at), x12_independent=True, params={"at": at})


def separable_product(coeffs=(1.0, 1.0, 1.0)) -> Symbol:
    """``prod_i (1 + c_i x_i)``."""
    c = tuple(float(v) for v in coeffs)
    if len(c) != 3:
        raise DomainError("separable-product needs three coefficients")

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        return (1.0 + c[0] * x[..., 0]) * (1.0 + c[1] * x[..., 1]) * (1.0 + c[2] * x[..., 2])

    indep = c[0] == 0.0 and c[1] == 0.0
    return Symbol(
        "separable-product",
        evaluate,
        holder_exponent=1.0 if indep else None,
        x12_independent=indep,
        params={"coeffs": list(c)},
    )


def load_grid_file(path) -> GridFunction:
    """Read samples from ``path`` plus the JSON sidecar ``path + '.json'``.

    The sidecar holds ``box`` (``{"i1": [lo, hi], ...}``), ``resolution`` and
    optionally ``format`` (``"f8"`` for raw little-endian float64, ``"csv"``);
    the format defaults to the file suffix.
    """
    path = Path(path)
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        raise DomainError(f"missing sidecar {sidecar}")
    meta = json.loads(sidecar.read_text())
    box = Box.from_bounds([meta["box"]["i1"], meta["box"]["i2"], meta["box"]["i3"]])
    res = as_resolution(meta["resolution"])
    fmt = meta.get("format", "csv" if path.suffix.lower() == ".csv" else "f8")
    if fmt == "csv":
        data = np.loadtxt(path, delimiter=",", dtype=float, ndmin=1).reshape(-1)
    elif fmt == "f8":
        data = np.fromfile(path, dtype="<f8")
    else:
        raise DomainError(f"unknown grid file format {fmt!r}")
    if data.size != res[0] * res[1] * res[2]:
        raise DomainError(f"{path}: expected {res[0] * res[1] * res[2]} samples, found {data.size}")
    return GridFunction(box, res, data.reshape(res))


def save_grid_file(g: GridFunction, path, fmt: str = "f8") -> None:
    path = Path(path)
    if fmt == "csv":
        np.savetxt(path, g.flat[None, :], delimiter=",", fmt="%.17g")
    elif fmt == "f8":
        g.flat.astype("<f8").tofile(path)
    else:
        raise DomainError(f"unknown grid file format {fmt!r}")
    meta = {"box": g.box.to_json(), "resolution": list(g.resolution), "format": fmt}
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2))


def grid_symbol(g: GridFunction, name: str = "from-grid-file") -> Symbol:
    """Piecewise-constant symbol taking the value of the cell containing ``x``."""
    lo = g.box.lo
    h = g.box.lengths / np.array(g.resolution)
    hi_idx = np.array(g.resolution) - 1
    samples = g.samples

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        if np.any(x < lo) or np.any(x > g.box.hi):
            raise DomainError(f"point outside the grid box {g.box.label()}")
        idx = np.minimum(np.floor((x - lo) / h).astype(np.int64), hi_idx)
        return samples[idx[..., 0], idx[..., 1], idx[..., 2]]

    return Symbol(name, evaluate, domain=g.box)


def from_grid_file(path) -> Symbol:
    s = grid_symbol(load_grid_file(path))
    return Symbol(s.name, s.evaluate, domain=s.domain, params={"path": str(path)})


_SYMBOLS: dict[str, Callable[..., Symbol]] = {
    "constant": constant_symbol,
    "linear-x3": linear_x3,
    "linear-x1": linear_x1,
    "holder-x3": holder_x3,
    "sign-x3": sign_x3,
    "separable-product": separable_product,
    "from-grid-file": from_grid_file,
}


def symbol_names() -> list[str]:
    return sorted(_SYMBOLS)


def get_symbol(name: str, **params) -> Symbol:
    try:
        factory = _SYMBOLS[name]
    except KeyError:
        raise DomainError(f"unknown symbol {name!r}; known: {', '.join(symbol_names())}") from None
    return factory(**params)


def sample(b: Symbol, box: Box, res) -> GridFunction:
    return b.sample(box, res)


def mean(b: Symbol | GridFunction, r: Box, res=None) -> float:
    """``<b>_R`` by midpoint quadrature."""
    g = b if isinstance(b, GridFunction) else b.sample(r, res)
    return float(np.mean(g.samples))


def _sign_with_floor(d: np.ndarray, scale: float) -> np.ndarray:
    # deviations at rounding level are treated as exact zeros
    g = np.sign(d)
    g[np.abs(d) <= 8.0 * np.finfo(float).eps * scale] = 0.0
    return g


def extremal_testfunction(b: Symbol | GridFunction, r: Box, res=None) -> GridFunction:
    """``f = (g - <g>_R) 1_R`` with ``g = sign(b - <b>_R)``.

    Pairing ``f`` with ``b`` returns the grid value of ``int_R |b - <b>_R|``.
    """
    bg = b if isinstance(b, GridFunction) else b.sample(r, res)
    vals = bg.samples
    d = vals - np.mean(vals)
    g = _sign_with_floor(d, float(np.max(np.abs(vals))) if vals.size else 0.0)
    return bg.with_samples(g - np.mean(g))


def mean_abs_deviation(b: Symbol | GridFunction, r: Box, res=None) -> float:
    """Grid value of ``(1/|R|) int_R |b - <b>_R|``."""
    bg = b if isinstance(b, GridFunction) else b.sample(r, res)
    vals = bg.samples
    d = vals - np.mean(vals)
    g = _sign_with_floor(d, float(np.max(np.abs(vals))) if vals.size else 0.0)
    return float(np.mean(d * g))
