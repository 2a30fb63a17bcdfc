"""Gaussian kernel, its derivatives and the constants used by the risk formulas."""

from dataclasses import dataclass, field
from math import factorial, pi, sqrt

import numpy as np

SQRT_2PI = sqrt(2.0 * pi)
SQRT_PI = sqrt(pi)
MAX_ORDER = 12


def gaussian_derivative(r, x):
    """Return the r-th derivative of the standard normal density at ``x``.

    Uses the probabilists' Hermite recurrence
    ``phi^(k+1)(x) = -x phi^(k)(x) - k phi^(k-1)(x)``.

    Parameters
    ----------
    r : int
        Derivative order, ``0 <= r <= 12``.
    x : float or array_like
        Evaluation point(s).

    Returns
    -------
    float or ndarray
    """
    r = int(r)
    if r < 0 or r > MAX_ORDER:
        raise ValueError(f"derivative order must be in [0, {MAX_ORDER}], got {r}")
    x = np.asarray(x, dtype=float)
    phi = np.exp(-0.5 * x * x) / SQRT_2PI
    prev = np.zeros_like(phi)
    cur = phi
    for k in range(r):
        prev, cur = cur, -x * cur - k * prev
    return cur if cur.ndim else float(cur)


def hermite_at_zero(r):
    """Value of the probabilists' Hermite polynomial He_r at 0."""
    if r % 2:
        return 0
    return (-1) ** (r // 2) * factorial(r) // (2 ** (r // 2) * factorial(r // 2))


@dataclass(frozen=True)
class KernelConstants:
    """Constants of the Gaussian kernel.

    Attributes
    ----------
    roughness : float
        ``R(K) = int K^2``.
    second_moment : float
        ``mu_2(K) = int x^2 K``.
    derivative_at_zero : dict
        Even order ``r`` -> ``phi^(r)(0)`` for ``r <= 12``.
    """

    roughness: float
    second_moment: float
    derivative_at_zero: dict = field(default_factory=dict)


def kernel_constants():
    """Return the :class:`KernelConstants` of the standard normal kernel."""
    table = {r: hermite_at_zero(r) / SQRT_2PI for r in range(0, MAX_ORDER + 1, 2)}
    return KernelConstants(
        roughness=1.0 / (2.0 * SQRT_PI),
        second_moment=1.0,
        derivative_at_zero=table,
    )


GAUSSIAN = kernel_constants()
