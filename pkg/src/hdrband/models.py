"""Normal-mixture reference densities with exact pdf, derivatives, cdf and HDRs.

The Marron and Wand (1992) benchmark densities are provided as presets
``mw1`` .. ``mw10`` together with ``normal``.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .exceptions import DegenerateLevelError
from .hdr import IntervalUnion
from .kernel import SQRT_2PI


@dataclass(frozen=True)
class NormalMixture:
    """Finite mixture of univariate normals.

    Parameters
    ----------
    weights, means, sds : tuple of float
        Component weights (positive, summing to one), means and standard
        deviations (positive).
    """

    weights: tuple
    means: tuple
    sds: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=float)
        sd = np.asarray(self.sds, dtype=float)
        if not (w.ndim == mu.ndim == sd.ndim == 1) or not (len(w) == len(mu) == len(sd)):
            raise ValueError("weights, means and sds must be 1-d sequences of equal length")
        if len(w) == 0:
            raise ValueError("a mixture needs at least one component")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be strictly positive and sum to 1")
        if np.any(sd <= 0) or not np.all(np.isfinite(mu)):
            raise ValueError("sds must be strictly positive and means finite")
        object.__setattr__(self, "weights", tuple(float(v) for v in w))
        object.__setattr__(self, "means", tuple(float(v) for v in mu))
        object.__setattr__(self, "sds", tuple(float(v) for v in sd))

    @classmethod
    def from_components(cls, components):
        """Build from an iterable of ``(weight, mean, sd)`` triples."""
        w, mu, sd = zip(*components)
        return cls(w, mu, sd)

    @classmethod
    def from_json(cls, text):
        """Parse ``{"components": [{"w": .., "mu": .., "sd": ..}, ...]}``."""
        doc = json.loads(text) if isinstance(text, str) else text
        try:
            comps = [(c["w"], c["mu"], c["sd"]) for c in doc["components"]]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed mixture JSON: {exc}") from None
        return cls.from_components(comps)

    def to_json(self):
        comps = [
            {"w": w, "mu": m, "sd": s} for w, m, s in zip(self.weights, self.means, self.sds)
        ]
        return json.dumps({"components": comps})

    def _arrays(self):
        return (np.array(self.weights), np.array(self.means), np.array(self.sds))

    def pdf(self, x, order=0):
        """Exact ``f``, ``f'`` or ``f''`` at ``x`` (vectorized)."""
        if order not in (0, 1, 2):
            raise ValueError(f"unsupported derivative order {order!r}; use 0, 1 or 2")
        w, mu, sd = self._arrays()
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - mu) / sd
        phi = np.exp(-0.5 * z * z) / SQRT_2PI
        if order == 0:
            terms = phi / sd
        elif order == 1:
            terms = -z * phi / sd**2
        else:
            terms = (z * z - 1.0) * phi / sd**3
        out = terms @ w
        return out if out.ndim else float(out)

    def cdf(self, x):
        """Exact mixture cdf via component normal cdfs."""
        w, mu, sd = self._arrays()
        x = np.asarray(x, dtype=float)
        out = ndtr((x[..., None] - mu) / sd) @ w
        return out if out.ndim else float(out)

    def sample(self, n, seed):
        """Draw ``n`` sorted i.i.d. observations; deterministic given ``seed``."""
        return mixture_sample(self, n, seed)

    def support_grid(self, half_width=10.0, per_component=401):
        """Sorted abscissae resolving every component at its own scale."""
        pts = [
            m + s * np.linspace(-half_width, half_width, per_component)
            for m, s in zip(self.means, self.sds)
        ]
        return np.unique(np.concatenate(pts))


def mixture_eval(m, order, x):
    """Evaluate ``f^(order)(x)`` for a :class:`NormalMixture`."""
    return m.pdf(x, order)


def mixture_cdf(m, x):
    """Mixture cdf at ``x``."""
    return m.cdf(x)


def make_rng(seed, *stream):
    """Counter-based generator keyed by ``seed`` and an optional stream index.

    Philox output depends only on the key, so draws for stream ``i`` do not
    depend on how many other streams were consumed or in which order.
    """
    ss = np.random.SeedSequence([int(seed), *map(int, stream)])
    return np.random.Generator(np.random.Philox(ss))


def mixture_sample(m, n, seed, *stream):
    """Sorted sample of size ``n`` from ``m``.

    Extra ``stream`` integers (e.g. a replication index) select an
    independent stream under the same seed.
    """
    n = int(n)
    if n < 1:
        raise ValueError("sample size must be at least 1")
    rng = make_rng(seed, *stream)
    w, mu, sd = m._arrays()
    comp = rng.choice(len(w), size=n, p=w)
    x = mu[comp] + sd[comp] * rng.standard_normal(n)
    x.sort()
    return x


@dataclass(frozen=True)
class HdrOracle:
    """Exact highest-density region of a mixture.

    ``crossings`` holds rows ``(x_j, f'(x_j), f''(x_j))`` in increasing ``x``.
    """

    tau: float
    level: float
    region: IntervalUnion
    crossings: np.ndarray

    @property
    def slopes(self):
        return self.crossings[:, 1]

    @property
    def curvatures(self):
        return self.crossings[:, 2]


def _level_roots(m, y, grid, fgrid):
    """Roots of ``f(x) = y`` bracketed on ``grid``."""
    g = fgrid - y
    idx = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
    roots = [
        brentq(lambda t: m.pdf(t) - y, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-15)
        for i in idx
    ]
    return np.array(roots), idx


def _superlevel_mass(m, y, grid, fgrid):
    roots, _ = _level_roots(m, y, grid, fgrid)
    if len(roots) % 2:
        raise DegenerateLevelError(f"odd number of level crossings at y={y}")
    cdf = m.cdf(roots)
    return float(np.sum(cdf[1::2] - cdf[0::2])), roots


def hdr_oracle(m, tau, slope_tol=1e-6):
    """Exact level ``f_tau``, region ``R_tau`` and crossings of a mixture.

    The level solves ``int f 1{f >= y} = 1 - tau``; the mass of a superlevel
    set is computed exactly from cdf differences between its crossings.

    Raises
    ------
    DegenerateLevelError
        If the level is (numerically) tangent to ``f``.
    """
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    grid = m.support_grid()
    fgrid = m.pdf(grid)
    target = 1.0 - tau
    ymax = float(fgrid.max())

    def excess(y):
        return _superlevel_mass(m, y, grid, fgrid)[0] - target

    level = brentq(excess, ymax * 1e-12, ymax * (1 - 1e-12), xtol=1e-15, rtol=1e-15, maxiter=500)
    mass, roots = _superlevel_mass(m, level, grid, fgrid)
    if abs(mass - target) > 1e-10:
        raise DegenerateLevelError(
            f"level search did not converge (mass error {mass - target:.3g})"
        )
    slopes = m.pdf(roots, 1)
    if len(roots) == 0 or np.any(np.abs(slopes) < slope_tol):
        raise DegenerateLevelError(f"tau={tau} puts the level at a local extremum of f")
    if np.any(slopes[0::2] <= 0) or np.any(slopes[1::2] >= 0):
        raise DegenerateLevelError("crossing slopes do not alternate in sign")
    curv = m.pdf(roots, 2)
    region = IntervalUnion(list(zip(roots[0::2], roots[1::2])))
    return HdrOracle(
        tau=float(tau),
        level=float(level),
        region=region,
        crossings=np.column_stack([roots, slopes, curv]),
    )


def _mw3():
    return [(1 / 8, 3 * ((2 / 3) ** l - 1), (2 / 3) ** l) for l in range(8)]


def _mw10():
    return [(1 / 2, 0.0, 1.0)] + [(1 / 10, l / 2 - 1, 1 / 10) for l in range(5)]


# Parameters transcribed from Marron & Wand (1992), Table 1.
PRESETS = {
    "normal": NormalMixture.from_components([(1.0, 0.0, 1.0)]),
    "mw1": NormalMixture.from_components([(1.0, 0.0, 1.0)]),
    "mw2": NormalMixture.from_components(
        [(1 / 5, 0.0, 1.0), (1 / 5, 1 / 2, 2 / 3), (3 / 5, 13 / 12, 5 / 9)]
    ),
    "mw3": NormalMixture.from_components(_mw3()),
    "mw4": NormalMixture.from_components([(2 / 3, 0.0, 1.0), (1 / 3, 0.0, 1 / 10)]),
    "mw5": NormalMixture.from_components([(1 / 10, 0.0, 1.0), (9 / 10, 0.0, 1 / 10)]),
    "mw6": NormalMixture.from_components([(1 / 2, -1.0, 2 / 3), (1 / 2, 1.0, 2 / 3)]),
    "mw7": NormalMixture.from_components([(1 / 2, -3 / 2, 1 / 2), (1 / 2, 3 / 2, 1 / 2)]),
    "mw8": NormalMixture.from_components([(3 / 4, 0.0, 1.0), (1 / 4, 3 / 2, 1 / 3)]),
    "mw9": NormalMixture.from_components(
        [(9 / 20, -6 / 5, 3 / 5), (9 / 20, 6 / 5, 3 / 5), (1 / 10, 0.0, 1 / 4)]
    ),
    "mw10": NormalMixture.from_components(_mw10()),
}


def get_model(source):
    """Resolve a preset name, a JSON string or a path to a JSON file."""
    if isinstance(source, NormalMixture):
        return source
    if source in PRESETS:
        return PRESETS[source]
    text = source
    if not source.lstrip().startswith("{"):
        try:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        except OSError:
            raise ValueError(
                f"unknown model {source!r}; presets: {', '.join(sorted(PRESETS))}"
            ) from None
    return NormalMixture.from_json(text)
