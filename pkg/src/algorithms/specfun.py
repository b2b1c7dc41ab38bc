"""
Special functions for the exact moments of the block statistics.

Digamma and trigamma are evaluated by shifting the argument above 6 with
the upward recurrence and then summing the asymptotic (Bernoulli) series.
D(x) and D_s(x) are digamma differences, D_s'(x) is the x-derivative of
D_s and carries the chain-rule factor 1/2.

All functions accept scalars or numpy arrays; scalars return floats.
"""

from typing import Union

import numpy as np

from algorithms.errors import DomainError

ArrayLike = Union[float, int, np.ndarray]

_SHIFT_THRESHOLD = 6.0

# Bernoulli-series coefficients, psi(x) ~ ln x - 1/(2x) - sum c_k x^(-2k)
_DIGAMMA_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

# psi'(x) ~ 1/x + 1/(2x^2) + sum c_k x^(-(2k+1))
_TRIGAMMA_COEFFS = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)


def _as_positive_array(x: ArrayLike, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"{name} requires a finite positive argument, got {x!r}")
    return arr


def _scalar_or_array(value: np.ndarray, like: ArrayLike) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(value)
    return value


def _shift_up(x: np.ndarray, power: int) -> tuple:
    """Apply the recurrence until every entry is >= the threshold.

    Returns the shifted argument and the accumulated correction
    sum of 1/x**power over the skipped points.
    """
    shifted = np.atleast_1d(np.array(x, dtype=float, copy=True))
    correction = np.zeros_like(shifted)
    small = shifted < _SHIFT_THRESHOLD
    while np.any(small):
        correction[small] += shifted[small] ** (-power)
        shifted[small] += 1.0
        small = shifted < _SHIFT_THRESHOLD
    return shifted.reshape(np.shape(x)), correction.reshape(np.shape(x))


def digamma(x: ArrayLike) -> ArrayLike:
    """Psi(x) = d/dx log Gamma(x) for x > 0."""
    arr = _as_positive_array(x, "digamma")
    shifted, correction = _shift_up(arr, 1)

    inv_sq = 1.0 / (shifted * shifted)
    series = np.zeros_like(shifted)
    term = np.ones_like(shifted)
    for coeff in _DIGAMMA_COEFFS:
        term = term * inv_sq
        series += coeff * term

    value = np.log(shifted) - 0.5 / shifted - series - correction
    return _scalar_or_array(value, x)


def trigamma(x: ArrayLike) -> ArrayLike:
    """Psi'(x) for x > 0."""
    arr = _as_positive_array(x, "trigamma")
    shifted, correction = _shift_up(arr, 2)

    inv = 1.0 / shifted
    inv_sq = inv * inv
    series = np.zeros_like(shifted)
    term = np.array(inv, copy=True)
    for coeff in _TRIGAMMA_COEFFS:
        term = term * inv_sq
        series += coeff * term

    value = inv + 0.5 * inv_sq + series + correction
    return _scalar_or_array(value, x)


def d_func(x: ArrayLike) -> ArrayLike:
    """D(x) = Psi((x+1)/2) - Psi(x/2)."""
    arr = _as_positive_array(x, "d_func")
    value = np.asarray(digamma((arr + 1.0) / 2.0)) - np.asarray(digamma(arr / 2.0))
    return _scalar_or_array(value, x)


def _check_shift(s: ArrayLike, x: ArrayLike, name: str) -> tuple:
    s_arr = np.asarray(s)
    x_arr = np.asarray(x, dtype=float)
    if np.any(s_arr < 0) or np.any(s_arr != np.floor(s_arr)):
        raise DomainError(f"{name} requires a nonnegative integer s, got {s!r}")
    lower = x_arr - s_arr + 1.0
    if np.any(~np.isfinite(x_arr)) or np.any(lower <= 0.0):
        raise DomainError(f"{name} requires x - s + 1 > 0, got s={s!r}, x={x!r}")
    return s_arr.astype(float), x_arr, lower


def d_s(s: ArrayLike, x: ArrayLike) -> ArrayLike:
    """D_s(x) = Psi((x+1)/2) - Psi((x-s+1)/2), the sum of D(j) for j = x-s+1..x."""
    s_arr, x_arr, lower = _check_shift(s, x, "d_s")
    value = np.asarray(digamma((x_arr + 1.0) / 2.0)) - np.asarray(digamma(lower / 2.0))
    # s = 0: empty sum
    value = np.where(s_arr == 0, 0.0, value)
    return float(value) if np.ndim(value) == 0 else value


def d_s_prime(s: ArrayLike, x: ArrayLike) -> ArrayLike:
    """dD_s/dx = (1/2) [Psi'((x+1)/2) - Psi'((x-s+1)/2)]."""
    s_arr, x_arr, lower = _check_shift(s, x, "d_s_prime")
    value = 0.5 * (np.asarray(trigamma((x_arr + 1.0) / 2.0)) - np.asarray(trigamma(lower / 2.0)))
    value = np.where(s_arr == 0, 0.0, value)
    return float(value) if np.ndim(value) == 0 else value
