"""Highest-density-region levels, regions, level crossings and the mu_f error."""

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .density import EvaluationGrid, kde_evaluate, kde_on_grid
from .exceptions import CrossingError, HDRError


class IntervalUnion:
    """Finite union of disjoint closed intervals, kept sorted and merged.

    Intervals that touch or overlap are merged on construction.
    """

    __slots__ = ("_iv",)

    def __init__(self, intervals=()):
        iv = sorted((float(a), float(b)) for a, b in intervals)
        merged = []
        for a, b in iv:
            if b < a:
                raise ValueError(f"interval endpoints out of order: ({a}, {b})")
            if merged and a <= merged[-1][1]:
                if b > merged[-1][1]:
                    merged[-1] = (merged[-1][0], b)
            else:
                merged.append((a, b))
        self._iv = tuple(merged)

    @property
    def intervals(self):
        return self._iv

    def __iter__(self):
        return iter(self._iv)

    def __len__(self):
        return len(self._iv)

    def __eq__(self, other):
        return isinstance(other, IntervalUnion) and self._iv == other._iv

    def __hash__(self):
        return hash(self._iv)

    def __repr__(self):
        return f"IntervalUnion({list(self._iv)!r})"

    @property
    def length(self):
        return sum(b - a for a, b in self._iv)

    def contains(self, x):
        """Vectorized membership test."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for a, b in self._iv:
            out |= (x >= a) & (x <= b)
        return out

    def symmetric_difference(self, other):
        """Closure of ``self`` xor ``other``.

        Built from the elementary segments between all endpoints; membership
        of each segment is decided at its midpoint.
        """
        cuts = sorted({p for iv in (self._iv, other._iv) for ab in iv for p in ab})
        if len(cuts) < 2:
            return IntervalUnion()
        cuts = np.array(cuts)
        mids = 0.5 * (cuts[:-1] + cuts[1:])
        keep = self.contains(mids) ^ other.contains(mids)
        return IntervalUnion(
            (cuts[i], cuts[i + 1]) for i in np.nonzero(keep)[0]
        )

    def mass(self, cdf):
        """Probability of the union under a distribution with cdf ``cdf``."""
        if not self._iv:
            return 0.0
        ends = np.array(self._iv)
        return float(np.sum(cdf(ends[:, 1]) - cdf(ends[:, 0])))

    def to_json(self):
        return json.dumps([list(p) for p in self._iv])

    @classmethod
    def from_json(cls, text):
        return cls(tuple(p) for p in json.loads(text))

    def to_csv_rows(self):
        return [("lo", "hi")] + [(repr(a), repr(b)) for a, b in self._iv]


def _superlevel_pieces(x, v, level):
    """Per-cell pieces of ``{g >= level}`` for the piecewise-linear ``g``.

    Returns (left, right, value_left, value_right) arrays, one row per cell
    with nonempty overlap.
    """
    a, b = v[:-1], v[1:]
    xl, xr = x[:-1], x[1:]
    above_a, above_b = a >= level, b >= level
    live = above_a | above_b
    a, b, xl, xr = a[live], b[live], xl[live], xr[live]
    above_a, above_b = above_a[live], above_b[live]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(a != b, (level - a) / (b - a), 0.0)
    cross = xl + t * (xr - xl)
    left = np.where(above_a, xl, cross)
    right = np.where(above_b, xr, cross)
    vl = np.where(above_a, a, level)
    vr = np.where(above_b, b, level)
    return left, right, vl, vr


def superlevel_mass(curve, level):
    """Integral of the curve over the region where it is at least ``level``.

    The curve is treated as piecewise linear between grid points, so the
    result is continuous and strictly decreasing in ``level`` below the
    maximum.
    """
    left, right, vl, vr = _superlevel_pieces(curve.x, curve.values, level)
    return float(np.sum(0.5 * (right - left) * (vl + vr)))


def level_for_tau(curve, tau, tol=1e-12):
    """Level ``y`` whose superlevel set of ``curve`` carries mass ``1 - tau``."""
    if curve.order != 0:
        raise ValueError("level_for_tau needs an order-0 curve")
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    target = 1.0 - tau
    total = superlevel_mass(curve, 0.0)
    if total < target:
        raise HDRError(
            f"curve mass {total:.6g} is below 1 - tau = {target:.6g}; widen the grid"
        )
    top = float(np.max(curve.values))
    return brentq(
        lambda y: superlevel_mass(curve, y) - target,
        0.0,
        top,
        xtol=tol * top,
        rtol=1e-15,
        maxiter=500,
    )


def extract_region(curve, level):
    """Region where the linearly interpolated curve is at least ``level``.

    Grid ends are treated as lying below the level, so a region touching the
    grid boundary is cut there.
    """
    if curve.order != 0:
        raise ValueError("extract_region needs an order-0 curve")
    x, v = curve.x, curve.values
    above = v >= level
    if not above.any():
        return IntervalUnion()
    padded = np.concatenate([[False], above, [False]])
    starts = np.nonzero(~padded[:-1] & padded[1:])[0]
    stops = np.nonzero(padded[:-1] & ~padded[1:])[0] - 1
    out = []
    for i, j in zip(starts, stops):
        a = x[i] if i == 0 else _interp_cross(x[i - 1], x[i], v[i - 1], v[i], level)
        b = x[j] if j == len(x) - 1 else _interp_cross(x[j], x[j + 1], v[j], v[j + 1], level)
        out.append((a, b))
    return IntervalUnion(out)


def _interp_cross(x0, x1, v0, v1, level):
    if v1 == v0:
        return x0
    return x0 + (level - v0) / (v1 - v0) * (x1 - x0)


@dataclass(frozen=True)
class CrossingSet:
    """Pilot level and the estimated crossings of it.

    ``crossings`` rows are ``(x_j, slope, curvature)``.
    """

    level: float
    crossings: np.ndarray
    pruned: int = 0

    @property
    def r(self):
        return len(self.crossings) // 2

    @property
    def x(self):
        return self.crossings[:, 0]

    @property
    def slopes(self):
        return self.crossings[:, 1]

    @property
    def curvatures(self):
        return self.crossings[:, 2]


def _prune_once(pts, slopes):
    """Drop the narrowest island or gap bounded by a wrong-signed slope."""
    bad = np.sign(slopes) != _alternating(len(pts))
    pairs = [j for j in range(len(pts) - 1) if bad[j] or bad[j + 1]]
    j = min(pairs, key=lambda k: pts[k + 1] - pts[k])
    keep = np.ones(len(pts), dtype=bool)
    keep[[j, j + 1]] = False
    return keep


def find_crossings(sample, h0, h1, h2, tau, grid=None, binned=True, newton_steps=1,
                   prune=False):
    """Pilot level ``f_hat_{h0,tau}`` and crossings with slope and curvature.

    Boundaries of the estimated region are located by interpolation on the
    grid, refined by Newton steps on the exact-sum estimate, then paired
    with ``f_hat'_{h1}`` and ``f_hat''_{h2}`` evaluated exactly.

    With ``prune=True``, islands or gaps of the pilot region whose bounding
    ``f_hat'_{h1}`` slopes have the wrong sign are treated as pilot noise:
    the narrowest such feature is removed until the signs alternate. The
    number of removed crossings is stored in ``CrossingSet.pruned``.

    Raises
    ------
    CrossingError
        If no crossing exists or the slopes fail to alternate in sign.
    """
    x = np.asarray(sample, dtype=float)
    if grid is None:
        grid = EvaluationGrid.around(x, max(h0, h1, h2))
    curve = kde_on_grid(x, h0, 0, grid, binned=binned)
    level = level_for_tau(curve, tau)
    region = extract_region(curve, level)
    pts = np.array([p for iv in region for p in iv])
    if pts.size == 0:
        raise CrossingError("no level crossings found", {"level": level})
    lo, hi = curve.x[0], curve.x[-1]
    if np.any(pts <= lo) or np.any(pts >= hi):
        raise CrossingError("estimated region reaches the grid boundary", {"level": level})
    for _ in range(newton_steps):
        f0 = kde_evaluate(x, h0, 0, pts)
        f1 = kde_evaluate(x, h0, 1, pts)
        step = np.where(f1 != 0, (f0 - level) / np.where(f1 != 0, f1, 1.0), 0.0)
        # Keep each step inside its grid cell.
        step = np.clip(step, -grid.delta, grid.delta)
        pts = pts - step
    slopes = kde_evaluate(x, h1, 1, pts)
    diag = {"level": level, "x": pts.tolist(), "slopes": slopes.tolist()}
    n_found = len(pts)
    while len(pts) and np.any(np.sign(slopes) != _alternating(len(pts))):
        if not prune:
            raise CrossingError("pilot slopes do not alternate +,-,+,-,...", diag)
        keep = _prune_once(pts, slopes)
        pts, slopes = pts[keep], slopes[keep]
    if len(pts) == 0:
        raise CrossingError("no crossings survive slope-sign pruning", diag)
    curv = kde_evaluate(x, h2, 2, pts)
    return CrossingSet(
        float(level), np.column_stack([pts, slopes, curv]), n_found - len(pts)
    )


def _alternating(k):
    return np.where(np.arange(k) % 2 == 0, 1.0, -1.0)


def symmetric_difference_mass(a, b, truth):
    """``mu_f(A xor B)``: probability under ``truth`` of lying in exactly one set."""
    return a.symmetric_difference(b).mass(truth.cdf)


def kde_hdr(sample, h, tau, grid_size=1024, binned=True):
    """Plug-in HDR estimate: ``(level, region, curve)`` for bandwidth ``h``."""
    x = np.asarray(sample, dtype=float)
    grid = EvaluationGrid.around(np.sort(x), h, grid_size)
    curve = kde_on_grid(x, h, 0, grid, binned=binned)
    level = level_for_tau(curve, tau)
    return level, extract_region(curve, level), curve
