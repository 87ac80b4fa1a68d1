"""Dense kernel sums over node sets, with numba and pure-numpy backends.

Every quadrature in the package reduces to sums of the form
``sum_j K(x_i, y_j) w_j`` over two node clouds.  Built-in convolution kernels
carry an integer ``code`` understood by the compiled loops; any other kernel
goes through the numpy path with its vectorised ``evaluate``.

Set ``ZYGCOMM_DISABLE_NUMBA=1`` to force the numpy backend.  Reductions in the
compiled loops run sequentially in index order, so results do not depend on
scheduling.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

CODE_GENERIC = -1
CODE_ZERO = 0
CODE_CONSTANT = 1
CODE_NW = 2
CODE_NW_EVEN = 3

_BLOCK_ENTRIES = 1 << 22


def numba_enabled() -> bool:
    """True when the compiled backend will be used for built-in kernels."""
    flag = os.environ.get("ZYGCOMM_DISABLE_NUMBA", "").strip().lower()
    return HAVE_NUMBA and flag in ("", "0", "false", "no")


if HAVE_NUMBA:
    njit = numba.njit(cache=True, nogil=True)

    @numba.njit(cache=True, inline="always")
    def _kval(code, param, z1, z2, z3):
        if code == CODE_ZERO:
            return 0.0
        if code == CODE_CONSTANT:
            return param
        p = z1 * z2
        den = p * p + z3 * z3
        if code == CODE_NW:
            if p > 0.0:
                return 1.0 / den
            if p < 0.0:
                return -1.0 / den
            return 0.0
        return 1.0 / den

    @njit
    def _apply_nb(code, param, X, Y, w, transpose, absolute):
        n = X.shape[0]
        m = Y.shape[0]
        out = np.zeros(n)
        sgn = -1.0 if transpose else 1.0
        for i in range(n):
            x1, x2, x3 = X[i, 0], X[i, 1], X[i, 2]
            s = 0.0
            for j in range(m):
                k = _kval(code, param, sgn * (x1 - Y[j, 0]), sgn * (x2 - Y[j, 1]), sgn * (x3 - Y[j, 2]))
                if absolute:
                    k = abs(k)
                s += k * w[j]
            out[i] = s
        return out

    @njit
    def _commutator_nb(code, param, X, Y, bx, by, phi, absolute):
        n = X.shape[0]
        m = Y.shape[0]
        out = np.zeros(n)
        for i in range(n):
            x1, x2, x3 = X[i, 0], X[i, 1], X[i, 2]
            b0 = bx[i]
            s = 0.0
            for j in range(m):
                k = _kval(code, param, x1 - Y[j, 0], x2 - Y[j, 1], x3 - Y[j, 2])
                if absolute:
                    s += abs(b0 - by[j]) * abs(k) * abs(phi[j])
                else:
                    s += (b0 - by[j]) * k * phi[j]
            out[i] = s
        return out

    @njit
    def _ratio_dev_nb(code, param, X, Y, denom, scale, transpose):
        best = 0.0
        kmin = np.inf
        kmax = 0.0
        sgn = -1.0 if transpose else 1.0
        for i in range(X.shape[0]):
            x1, x2, x3 = X[i, 0], X[i, 1], X[i, 2]
            for j in range(Y.shape[0]):
                k = _kval(code, param, sgn * (x1 - Y[j, 0]), sgn * (x2 - Y[j, 1]), sgn * (x3 - Y[j, 2]))
                d = abs(scale * k / denom[j] - 1.0)
                if d > best:
                    best = d
                a = abs(k)
                if a < kmin:
                    kmin = a
                if a > kmax:
                    kmax = a
        return best, kmin, kmax


def _kernel_block(kernel, X, Y, transpose):
    code = getattr(kernel, "code", CODE_GENERIC)
    if code == CODE_ZERO:
        return np.zeros((X.shape[0], Y.shape[0]))
    if code == CODE_CONSTANT:
        return np.full((X.shape[0], Y.shape[0]), float(kernel.param))
    if code in (CODE_NW, CODE_NW_EVEN):
        z = X[:, None, :] - Y[None, :, :]
        p = z[..., 0] * z[..., 1]
        val = 1.0 / (p * p + z[..., 2] * z[..., 2])
        return np.sign(p) * val if code == CODE_NW else val
    if transpose:
        return kernel.evaluate(Y[None, :, :], X[:, None, :])
    return kernel.evaluate(X[:, None, :], Y[None, :, :])


def _row_blocks(n, m):
    step = max(1, _BLOCK_ENTRIES // max(m, 1))
    for start in range(0, n, step):
        yield start, min(n, start + step)


def _use_compiled(kernel) -> bool:
    return numba_enabled() and getattr(kernel, "code", CODE_GENERIC) >= 0


def _prep(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def apply(kernel, X, Y, w, transpose=False, absolute=False) -> np.ndarray:
    """``out_i = sum_j K(X_i, Y_j) w_j`` (``K(Y_j, X_i)`` if ``transpose``).

    With ``absolute`` the kernel enters as ``|K|`` and ``w`` is used as given.
    """
    X, Y, w = _prep(X), _prep(Y), _prep(w)
    if _use_compiled(kernel):
        return _apply_nb(kernel.code, float(kernel.param), X, Y, w, bool(transpose), bool(absolute))
    out = np.empty(X.shape[0])
    for a, b in _row_blocks(X.shape[0], Y.shape[0]):
        K = _kernel_block(kernel, X[a:b], Y, transpose)
        if absolute:
            K = np.abs(K)
        out[a:b] = K @ w
    return out


def commutator_rows(kernel, X, Y, bx, by, phi, absolute=False) -> np.ndarray:
    """``out_i = sum_j (b(X_i) - b(Y_j)) K(X_i, Y_j) phi_j``.

    With ``absolute`` every factor is replaced by its modulus, which gives the
    pointwise domination majorant.
    """
    X, Y = _prep(X), _prep(Y)
    bx, by, phi = _prep(bx), _prep(by), _prep(phi)
    if _use_compiled(kernel):
        return _commutator_nb(kernel.code, float(kernel.param), X, Y, bx, by, phi, bool(absolute))
    out = np.empty(X.shape[0])
    for a, b in _row_blocks(X.shape[0], Y.shape[0]):
        K = _kernel_block(kernel, X[a:b], Y, False)
        B = bx[a:b, None] - by[None, :]
        if absolute:
            out[a:b] = (np.abs(B) * np.abs(K)) @ np.abs(phi)
        else:
            out[a:b] = (B * K) @ phi
    return out


def ratio_deviation(kernel, X, Y, denom, scale, transpose=False) -> tuple[float, float, float]:
    """``max_ij |scale K(X_i, Y_j) / denom_j - 1|`` together with min and max ``|K|``."""
    X, Y, denom = _prep(X), _prep(Y), _prep(denom)
    if _use_compiled(kernel):
        best, kmin, kmax = _ratio_dev_nb(kernel.code, float(kernel.param), X, Y, denom, float(scale), bool(transpose))
        return float(best), float(kmin), float(kmax)
    best, kmin, kmax = 0.0, np.inf, 0.0
    for a, b in _row_blocks(X.shape[0], Y.shape[0]):
        K = _kernel_block(kernel, X[a:b], Y, transpose)
        best = max(best, float(np.max(np.abs(scale * K / denom[None, :] - 1.0))))
        aK = np.abs(K)
        kmin = min(kmin, float(aK.min()))
        kmax = max(kmax, float(aK.max()))
    return best, kmin, kmax
