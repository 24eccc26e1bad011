"""
Numerically stable special functions shared by the likelihoods and the statistics code.

All functions accept scalars or numpy arrays and return the same shape (0-d input gives a
Python float). Out-of-domain arguments raise DomainError instead of returning NaN.

Usage:
    log_gamma(0.5)                 # 0.5 * ln(pi)
    log_beta(a, b)                 # vectorized over arrays
    log_sum_exp(values, axis=1)    # row-wise
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike

from src.core.errors import DomainError, SizeError

# Lanczos approximation, g = 7, 9 coefficients.
_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array(
    [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ]
)
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)

# Bernoulli-number terms of the digamma asymptotic series: B_2k / (2k), k = 1..7.
_DIGAMMA_SERIES = np.array(
    [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32760.0,
        1.0 / 12.0,
    ]
)
_DIGAMMA_SHIFT = 10.0


def _as_float_array(x: ArrayLike) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _out(values: np.ndarray) -> float | np.ndarray:
    return float(values) if values.ndim == 0 else values


def _require_positive(x: np.ndarray, name: str) -> None:
    flat = x.ravel()
    ok = (flat > 0) & np.isfinite(flat)
    if not np.all(ok):
        bad = flat[~ok][0]
        raise DomainError(f"{name}: argument must be finite and > 0, got {bad!r}")


def _lanczos(x: np.ndarray) -> np.ndarray:
    """ln Gamma(x) for x >= 0.5."""
    z = x - 1.0
    acc = np.full_like(z, _LANCZOS_COEF[0])
    for i in range(1, len(_LANCZOS_COEF)):
        acc = acc + _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(acc)


def log_gamma(x: ArrayLike) -> float | np.ndarray:
    """ln Gamma(x) for x > 0, Lanczos with reflection below 0.5."""
    x = _as_float_array(x)
    _require_positive(x, "log_gamma")
    flat = x.reshape(-1)
    small = flat < 0.5
    out = np.empty_like(flat)
    out[~small] = _lanczos(flat[~small])
    if np.any(small):
        xs = flat[small]
        out[small] = np.log(np.pi / np.sin(np.pi * xs)) - _lanczos(1.0 - xs)
    return _out(out.reshape(x.shape))


def digamma(x: ArrayLike) -> float | np.ndarray:
    """psi(x) for x > 0: recurrence shift to x >= 10, then the asymptotic series."""
    x = _as_float_array(x)
    _require_positive(x, "digamma")
    shape = x.shape
    x = x.reshape(-1).copy()
    acc = np.zeros_like(x)
    low = x < _DIGAMMA_SHIFT
    while np.any(low):
        acc[low] -= 1.0 / x[low]
        x[low] += 1.0
        low = x < _DIGAMMA_SHIFT
    inv2 = 1.0 / (x * x)
    series = np.zeros_like(x)
    for coef in _DIGAMMA_SERIES[::-1]:
        series = (series + coef) * inv2
    return _out((acc + np.log(x) - 0.5 / x - series).reshape(shape))


def log_beta(a: ArrayLike, b: ArrayLike) -> float | np.ndarray:
    """ln B(a, b) = ln Gamma(a) + ln Gamma(b) - ln Gamma(a + b)."""
    a = _as_float_array(a)
    b = _as_float_array(b)
    _require_positive(a, "log_beta")
    _require_positive(b, "log_beta")
    return _out(
        np.asarray(log_gamma(a)) + np.asarray(log_gamma(b)) - np.asarray(log_gamma(a + b))
    )


def log_sigmoid(z: ArrayLike) -> float | np.ndarray:
    """-log1p(exp(-z)) evaluated without overflow on either tail."""
    z = _as_float_array(z)
    return _out(np.minimum(z, 0.0) - np.log1p(np.exp(-np.abs(z))))


def sigmoid(z: ArrayLike) -> float | np.ndarray:
    z = _as_float_array(z)
    e = np.exp(-np.abs(z))
    return _out(np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e)))


def log_sum_exp(values: ArrayLike, axis: int | None = None) -> float | np.ndarray:
    """log(sum(exp(values))) with the maximum subtracted before exponentiating."""
    v = _as_float_array(values)
    if v.size == 0 or (axis is not None and v.shape[axis] == 0):
        raise SizeError("log_sum_exp: empty input")
    m = np.max(v, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(v - shift), axis=axis, keepdims=True)) + shift
    if axis is None:
        return float(out.ravel()[0])
    return np.squeeze(out, axis=axis)


def weighted_quantile(values: ArrayLike, weights: ArrayLike, q: float) -> float:
    """
    Quantile of the weighted empirical distribution.

    Sorted values sit at cumulative positions (C_i - w_i) / (1 - w_last) and are linearly
    interpolated; with equal weights this is the order-statistic rule p(S - 1) + 1.
    """
    v = _as_float_array(values).ravel()
    w = _as_float_array(weights).ravel()
    if v.size == 0:
        raise SizeError("weighted_quantile: empty input")
    if w.shape != v.shape:
        raise SizeError(f"weighted_quantile: {v.size} values but {w.size} weights")
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"weighted_quantile: q must be in [0, 1], got {q!r}")
    if np.any(w < 0) or not np.sum(w) > 0:
        raise DomainError("weighted_quantile: weights must be >= 0 with a positive sum")

    keep = w > 0
    v, w = v[keep], w[keep]
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order] / np.sum(w[order])
    if v.size == 1:
        return float(v[0])
    positions = (np.cumsum(w) - w) / (1.0 - w[-1])
    return float(np.interp(q, positions, v))
