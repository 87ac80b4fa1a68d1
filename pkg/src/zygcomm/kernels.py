"""Zygmund kernel calculus: decay factor, size bound, model kernels, checkers.

Kernels act on points stored in arrays of shape ``(..., 3)``; ``evaluate(x, y)``
broadcasts over the leading axes.  The built-in catalog is

``nagel-wainger``
    ``sign(z1 z2) / ((z1 z2)^2 + z3^2)`` with ``z = x - y``.
``nw-even``
    ``1 / ((z1 z2)^2 + z3^2)``, the same kernel without the sign factor.  It
    is even in ``z1``, so its partial kernels do not cancel.
``zero-stub``, ``constant-stub``
    Degenerate kernels used to exercise the failure paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import _accel
from .errors import DomainError, SingularityError

# Lipschitz constant of the Nagel-Wainger modulus omega(t) = c t.  Measured as
# the largest check_continuity ratio over 10^5 admissible samples with c = 1
# (observed 6.0 up to rounding) and rounded up.
NW_LIPSCHITZ = 8.0

# |K(w, y)| = 1 / (32 d1^2 d2^2) at the built-in witness point w.
NW_WITNESS_CONSTANT = 1.0 / 32.0


def _check_theta(theta):
    if not (0.0 < theta <= 1.0):
        raise DomainError(f"theta must lie in (0, 1], got {theta}")


def d_theta(t1, t2, t3, theta):
    """Decay factor ``(t3/(t1 t2) + t1 t2/t3)^(-theta)``, maximal on ``t3 = t1 t2``."""
    _check_theta(theta)
    t1, t2, t3 = (np.asarray(t, dtype=float) for t in (t1, t2, t3))
    if not (np.all(t1 > 0) and np.all(t2 > 0) and np.all(t3 > 0)):
        raise DomainError("d_theta needs positive arguments")
    p = t1 * t2
    out = (t3 / p + p / t3) ** (-theta)
    return out if out.ndim else float(out)


def size_z(t1, t2, t3, theta):
    """Zygmund size bound ``D_theta(t1, t2, t3) / (t1 t2 t3)``.

    Evaluated through the equivalent product form
    ``(t1^2 t2^2 + t3^2)^(-theta) (t1 t2 t3)^(theta - 1)``, which avoids
    overflow in the ratio ``t3 / (t1 t2)``.
    """
    _check_theta(theta)
    t1, t2, t3 = (np.asarray(t, dtype=float) for t in (t1, t2, t3))
    if not (np.all(t1 > 0) and np.all(t2 > 0) and np.all(t3 > 0)):
        raise DomainError("size_z needs positive arguments")
    p = t1 * t2
    out = np.hypot(p, t3) ** (-2.0 * theta) * (p * t3) ** (theta - 1.0)
    return out if out.ndim else float(out)


def _diff(x, y):
    z = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if z.shape[-1] != 3:
        raise DomainError(f"points must have 3 coordinates, got shape {z.shape}")
    return z


def _nw_denominator(z):
    p = z[..., 0] * z[..., 1]
    den = p * p + z[..., 2] * z[..., 2]
    if np.any(den == 0.0):
        raise SingularityError("kernel evaluated where z1 z2 = z3 = 0")
    return p, den


def nagel_wainger(x, y):
    """``sign(z1 z2) / ((z1 z2)^2 + z3^2)`` at ``z = x - y``."""
    p, den = _nw_denominator(_diff(x, y))
    out = np.sign(p) / den
    return out if out.ndim else float(out)


def nw_even(x, y):
    _, den = _nw_denominator(_diff(x, y))
    out = 1.0 / den
    return out if out.ndim else float(out)


def nw_witness(y, d1, d2):
    """Point ``y + (2 d1, 2 d2, 4 d1 d2)``; it lies on the Zygmund manifold of ``y``."""
    if not (d1 > 0 and d2 > 0):
        raise DomainError(f"witness scales must be positive, got {d1}, {d2}")
    y = np.asarray(y, dtype=float)
    return y + np.array([2.0 * d1, 2.0 * d2, 4.0 * d1 * d2])


def lipschitz_modulus(c: float) -> Callable:
    def omega(t):
        return c * np.asarray(t, dtype=float)

    return omega


@dataclass(frozen=True)
class Kernel:
    """Evaluation contract for a Zygmund kernel.

    ``witness(y, d1, d2)`` must return a point separated from ``y`` by more than
    ``d1``, ``d2`` and ``d1 d2`` in the three coordinates where
    ``|K| >= witness_constant / (d1 d2)^2``.  ``code`` selects a compiled loop
    in :mod:`zygcomm._accel`; user kernels keep the generic code ``-1``.
    """

    name: str
    evaluate: Callable
    theta: float = 1.0
    modulus: Callable = field(default=lipschitz_modulus(1.0), compare=False)
    witness: Callable | None = field(default=None, compare=False)
    witness_constant: float = NW_WITNESS_CONSTANT
    code: int = _accel.CODE_GENERIC
    param: float = 0.0
    convolution: bool = True

    def __post_init__(self):
        _check_theta(self.theta)

    def __call__(self, x, y):
        return self.evaluate(x, y)

    def transpose_evaluate(self, x, y):
        return self.evaluate(y, x)


def _zero(x, y):
    z = _diff(x, y)
    out = np.zeros(z.shape[:-1])
    return out if out.ndim else 0.0


def _constant_factory(c):
    def evaluate(x, y):
        z = _diff(x, y)
        out = np.full(z.shape[:-1], float(c))
        return out if out.ndim else float(c)

    return evaluate


def make_nagel_wainger(theta: float = 1.0) -> Kernel:
    return Kernel(
        name="nagel-wainger",
        evaluate=nagel_wainger,
        theta=theta,
        modulus=lipschitz_modulus(NW_LIPSCHITZ),
        witness=nw_witness,
        code=_accel.CODE_NW,
    )


def make_nw_even(theta: float = 1.0) -> Kernel:
    return Kernel(
        name="nw-even",
        evaluate=nw_even,
        theta=theta,
        modulus=lipschitz_modulus(NW_LIPSCHITZ),
        witness=nw_witness,
        code=_accel.CODE_NW_EVEN,
    )


def make_zero_stub(theta: float = 1.0) -> Kernel:
    return Kernel(name="zero-stub", evaluate=_zero, theta=theta, witness=nw_witness, code=_accel.CODE_ZERO)


def make_constant_stub(theta: float = 1.0, value: float = 1.0) -> Kernel:
    return Kernel(
        name="constant-stub",
        evaluate=_constant_factory(value),
        theta=theta,
        witness=nw_witness,
        code=_accel.CODE_CONSTANT,
        param=float(value),
    )


_REGISTRY: dict[str, Callable[..., Kernel]] = {
    "nagel-wainger": make_nagel_wainger,
    "nw-even": make_nw_even,
    "zero-stub": make_zero_stub,
    "constant-stub": make_constant_stub,
}


def register_kernel(name: str, factory: Callable[..., Kernel], overwrite: bool = False) -> None:
    """Make ``factory(theta=..., **params)`` available under ``name``."""
    if name in _REGISTRY and not overwrite:
        raise DomainError(f"kernel {name!r} already registered")
    _REGISTRY[name] = factory


def kernel_names() -> list[str]:
    return sorted(_REGISTRY)


def get_kernel(name: str, theta: float = 1.0, **params) -> Kernel:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise DomainError(f"unknown kernel {name!r}; known: {', '.join(kernel_names())}") from None
    return factory(theta=theta, **params)


class BoundCheckReport(NamedTuple):
    max_ratio: float
    argmax_sample: tuple
    samples: int


def _separations(x, y):
    z = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    return z[..., 0], z[..., 1], z[..., 2]


def check_size_bound(k: Kernel, sampler: Callable, n: int) -> BoundCheckReport:
    """Largest ``|K(x, y)| / size_z(|x - y|)`` over ``n`` sampled pairs.

    ``sampler(n)`` returns two arrays of shape ``(n, 3)``.
    """
    x, y = sampler(n)
    t1, t2, t3 = _separations(x, y)
    ratio = np.abs(k.evaluate(x, y)) / size_z(t1, t2, t3, k.theta)
    i = int(np.argmax(ratio))
    return BoundCheckReport(float(ratio[i]), (x[i].copy(), y[i].copy()), len(ratio))


def _safe_ratio(num, den):
    out = np.zeros_like(num)
    pos = den > 0
    out[pos] = num[pos] / den[pos]
    out[~pos & (num > 0)] = np.inf
    return out


def check_continuity(k: Kernel, sampler: Callable, n: int) -> BoundCheckReport:
    """Largest continuity ratio over sampled perturbations.

    ``sampler(n)`` returns ``(x, y, xp)``.  Four conditions are measured with
    the displacement ``d = xp - x``: moving ``x1``, moving ``(x2, x3)``, and the
    same two moves applied to ``y``.  Each difference is divided by
    ``omega(relative move) * size_z(|x - y|)``; a zero over zero counts as 0.
    """
    x, y, xp = (np.asarray(a, dtype=float) for a in sampler(n))
    d = xp - x
    sep = np.abs(x - y)
    if np.any(np.abs(d) > 0.5 * sep * (1.0 + 1e-12)):
        raise DomainError("perturbation exceeds half the separation")
    t1, t2, t3 = sep[:, 0], sep[:, 1], sep[:, 2]
    size = size_z(t1, t2, t3, k.theta)
    base = k.evaluate(x, y)
    rel1 = np.abs(d[:, 0]) / t1
    rel23 = np.abs(d[:, 1]) / t2 + np.abs(d[:, 2]) / t3
    om1 = np.asarray(k.modulus(rel1), dtype=float)
    om23 = np.asarray(k.modulus(rel23), dtype=float)

    def moved(a, axes):
        b = a.copy()
        b[:, axes] += d[:, axes]
        return b

    ratios = np.stack(
        [
            _safe_ratio(np.abs(k.evaluate(moved(x, [0]), y) - base), om1 * size),
            _safe_ratio(np.abs(k.evaluate(moved(x, [1, 2]), y) - base), om23 * size),
            _safe_ratio(np.abs(k.evaluate(x, moved(y, [0])) - base), om1 * size),
            _safe_ratio(np.abs(k.evaluate(x, moved(y, [1, 2])) - base), om23 * size),
        ]
    )
    flat = int(np.argmax(ratios))
    i = flat % ratios.shape[1]
    return BoundCheckReport(float(ratios.flat[flat]), (x[i].copy(), y[i].copy()), ratios.shape[1])


def pair_sampler(seed: int = 0, log2_range=(-6.0, 6.0), on_manifold: bool = False) -> Callable:
    """Random separated pairs with log-uniform coordinate gaps.

    With ``on_manifold`` the third gap equals the product of the first two.
    """
    lo, hi = log2_range

    def sample(n):
        rng = np.random.default_rng(seed)
        y = rng.uniform(-1.0, 1.0, size=(n, 3))
        g = 2.0 ** rng.uniform(lo, hi, size=(n, 3))
        if on_manifold:
            g[:, 2] = g[:, 0] * g[:, 1]
        signs = rng.choice([-1.0, 1.0], size=(n, 3))
        return y + signs * g, y

    return sample


def perturbation_sampler(seed: int = 0, log2_range=(-6.0, 6.0), fraction: float = 0.5) -> Callable:
    """Triples ``(x, y, xp)`` with ``|xp_i - x_i| <= fraction |x_i - y_i|``."""
    if not 0.0 <= fraction <= 0.5:
        raise DomainError("fraction must lie in [0, 1/2]")
    pairs = pair_sampler(seed, log2_range)

    def sample(n):
        x, y = pairs(n)
        rng = np.random.default_rng(seed + 1)
        u = rng.uniform(-1.0, 1.0, size=x.shape)
        return x, y, x + fraction * u * np.abs(x - y)

    return sample


def transposed(k: Kernel) -> Kernel:
    """Kernel ``(x, y) -> K(y, x)``.

    Built-in convolution kernels are even in ``z``, so they keep their code.
    """
    if k.code >= 0:
        return k
    return Kernel(
        name=f"{k.name}^T",
        evaluate=k.transpose_evaluate,
        theta=k.theta,
        modulus=k.modulus,
        witness=None,
        witness_constant=k.witness_constant,
        code=_accel.CODE_GENERIC,
        param=k.param,
        convolution=k.convolution,
    )
