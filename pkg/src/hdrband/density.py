"""Kernel density and density-derivative estimation.

Two evaluation paths are provided: an exact O(n m) sum and a linear-binned
approximation computed as a discrete convolution on a uniform grid.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .kernel import gaussian_derivative

DEFAULT_GRID_SIZE = 1024
TAIL_RADIUS = 6.0
_CHUNK = 2**22


def check_sample(x, min_size=1, name="sample"):
    """Validate a one-dimensional sample and return it as a sorted float array.

    Accepts shape ``(n,)`` or ``(n, 1)``.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_size:
        raise ValueError(f"{name} needs at least {min_size} observations, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr = np.sort(arr)
    arr.flags.writeable = False
    return arr


def _check_bandwidth(h):
    h = float(h)
    if not h > 0 or not np.isfinite(h):
        raise ValueError(f"bandwidth must be a positive finite number, got {h}")
    return h


def _check_order(order):
    if order not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {order!r}")
    return int(order)


@dataclass(frozen=True)
class EvaluationGrid:
    """Uniform grid ``lo + k * delta``, ``k = 0 .. count - 1``.

    ``bin_weights`` holds linear-binned counts once :func:`linear_bin` has
    been applied.
    """

    lo: float
    hi: float
    count: int = DEFAULT_GRID_SIZE
    bin_weights: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.count) < 2:
            raise ValueError("grid needs at least 2 points")

    @classmethod
    def around(cls, sample, h, count=DEFAULT_GRID_SIZE, radius=TAIL_RADIUS):
        """Grid spanning ``[min - radius*h, max + radius*h]``."""
        return cls(float(sample[0] - radius * h), float(sample[-1] + radius * h), int(count))

    @property
    def delta(self):
        return (self.hi - self.lo) / (self.count - 1)

    @property
    def points(self):
        return np.linspace(self.lo, self.hi, self.count)


def linear_bin(sample, grid):
    """Return ``grid`` with linear-binned weights of ``sample`` attached.

    Each observation splits unit mass between its two neighbouring grid
    points in proportion to proximity.
    """
    x = np.asarray(sample, dtype=float)
    if x.size and (x.min() < grid.lo or x.max() > grid.hi):
        raise ValueError("observations fall outside the grid")
    pos = (x - grid.lo) / grid.delta
    left = np.clip(np.floor(pos).astype(np.intp), 0, grid.count - 2)
    frac = pos - left
    w = np.bincount(left, weights=1.0 - frac, minlength=grid.count)
    w += np.bincount(left + 1, weights=frac, minlength=grid.count)
    return EvaluationGrid(grid.lo, grid.hi, grid.count, w)


def kde_evaluate(sample, h, order, points):
    """Exact kernel estimate of ``f^(order)`` at ``points``.

    Computes ``(n h^(order+1))^-1 sum_i phi^(order)((x - X_i) / h)``.
    """
    h = _check_bandwidth(h)
    order = _check_order(order)
    x = np.asarray(sample, dtype=float)
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("no evaluation points given")
    out = np.empty(pts.size)
    step = max(1, _CHUNK // max(x.size, 1))
    for start in range(0, pts.size, step):
        u = (pts[start:start + step, None] - x[None, :]) / h
        out[start:start + step] = gaussian_derivative(order, u).sum(axis=1)
    return out / (x.size * h ** (order + 1))


@dataclass(frozen=True)
class DensityCurve:
    """Estimate of ``f^(order)`` tabulated on ``grid``."""

    grid: EvaluationGrid
    order: int
    bandwidth: float
    values: np.ndarray = field(repr=False)

    @property
    def x(self):
        return self.grid.points

    def to_csv(self, fh):
        writer = csv.writer(fh)
        writer.writerow(["x", "value"])
        for xv, v in zip(self.x, self.values):
            writer.writerow([repr(float(xv)), repr(float(v))])


def binned_kernel_sum(weights, delta, h, order, radius=TAIL_RADIUS):
    """Convolve grid weights with ``phi^(order)`` sampled at lags ``k*delta``.

    Lags beyond ``radius*h`` are dropped. Returns the unnormalized sum
    ``sum_l w_l phi^(order)((k - l) delta / h)``.
    """
    m = len(weights)
    kmax = min(m - 1, int(np.floor(radius * h / delta)))
    lags = np.arange(-kmax, kmax + 1) * delta / h
    kern = gaussian_derivative(order, lags)
    return fftconvolve(weights, kern, mode="full")[kmax:kmax + m]


def kde_on_grid(sample, h, order, grid=None, binned=True):
    """Kernel estimate of ``f^(order)`` on a uniform grid.

    Parameters
    ----------
    sample : array_like
    h : float
        Bandwidth.
    order : {0, 1, 2}
    grid : EvaluationGrid, optional
        Defaults to 1024 points spanning six bandwidths beyond the data.
    binned : bool
        Use linear binning plus convolution instead of the exact sum.
    """
    h = _check_bandwidth(h)
    order = _check_order(order)
    x = np.asarray(sample, dtype=float)
    if grid is None:
        grid = EvaluationGrid.around(np.sort(x), h)
    if not binned:
        vals = kde_evaluate(x, h, order, grid.points)
    else:
        if grid.bin_weights is None:
            grid = linear_bin(x, grid)
        s = binned_kernel_sum(grid.bin_weights, grid.delta, h, order)
        vals = s / (x.size * h ** (order + 1))
    if order == 0:
        vals = np.maximum(vals, 0.0)
    vals.flags.writeable = False
    return DensityCurve(grid, order, h, vals)
