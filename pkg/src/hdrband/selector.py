"""Plug-in bandwidth selection for HDR estimation, plus the LSCV baseline.

The HDR selector runs a two-stage direct plug-in chain for the pilot
bandwidths ``h0, h1, h2`` (density, first and second derivative), estimates
the level and its crossings, and minimizes the estimated asymptotic risk.
"""

import json
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.signal import fftconvolve

from .density import EvaluationGrid, check_sample, linear_bin
from .exceptions import CrossingError, HDRError, NoInteriorMinimumError, PipelineError
from .hdr import CrossingSet, find_crossings
from .kernel import GAUSSIAN, SQRT_2PI, SQRT_PI, gaussian_derivative
from .risk import minimize_AR, refine_minimum, risk_coefficients

MIN_SAMPLE_SIZE = 50
IQR_TO_SD = 1.349


def robust_scale(sample):
    """``min(sd, IQR / 1.349)`` with linearly interpolated quartiles."""
    x = np.asarray(sample, dtype=float)
    if x.size < 4:
        raise ValueError("robust_scale needs at least 4 observations")
    q25, q75 = np.percentile(x, [25, 75])
    sigma = min(float(np.std(x, ddof=1)), float(q75 - q25) / IQR_TO_SD)
    if not sigma > 0:
        raise ValueError("sample has zero scale")
    return sigma


def _check_psi_order(r, hi):
    if r % 2 or not 4 <= r <= hi:
        raise ValueError(f"psi order must be even and in [4, {hi}], got {r}")


def psi_normal_scale(r, sigma):
    """Normal-scale value of ``psi_r = int f^(r) f`` for ``N(mu, sigma^2)``."""
    _check_psi_order(r, 12)
    return (-1) ** (r // 2) * factorial(r) / (
        (2.0 * sigma) ** (r + 1) * factorial(r // 2) * SQRT_PI
    )


def psi_kernel_estimate(sample, r, g, binned=True, grid_size=8192):
    """Kernel estimate ``n^-2 g^-(r+1) sum_i sum_j L^(r)((X_i - X_j) / g)``.

    The double sum includes the diagonal ``i = j``. The binned path
    linear-bins the sample on ``grid_size`` points and evaluates the pair
    sum as a convolution over all lags.
    """
    _check_psi_order(r, 10)
    g = float(g)
    if not g > 0:
        raise ValueError(f"g must be positive, got {g}")
    x = np.asarray(sample, dtype=float)
    n = x.size
    if n == 1 or not binned or x[-1] == x[0]:
        total = 0.0
        step = max(1, 2**22 // n)
        for start in range(0, n, step):
            u = (x[start:start + step, None] - x[None, :]) / g
            total += float(gaussian_derivative(r, u).sum())
    else:
        grid = linear_bin(x, EvaluationGrid(float(x.min()), float(x.max()), grid_size))
        c = grid.bin_weights
        lags = np.arange(-(grid_size - 1), grid_size) * grid.delta / g
        # full[k + m - 1] = sum_l c_l L^(r)((k - l) delta / g)
        full = fftconvolve(c, gaussian_derivative(r, lags))
        total = float(np.dot(c, full[grid_size - 1:2 * grid_size - 1]))
    return total / (n * n * g ** (r + 1))


def _functional_constant(r, literal):
    # -2 L^(r)(0), with or without the 1/sqrt(2 pi) factor.
    c = -2.0 * GAUSSIAN.derivative_at_zero[r]
    return c * SQRT_2PI if literal else c


def optimal_functional_bandwidth(r, psi_next, n, literal=False):
    """AMSE-optimal ``g`` for estimating ``psi_r`` given ``psi_(r+2)``.

    ``g = [-2 L^(r)(0) / (n psi_(r+2) mu_2(L))]^(1/(r+3))``. With
    ``literal=True`` the constant omits the ``1/sqrt(2 pi)`` factor of
    ``L^(r)(0)``, giving the integer constants 30, -210, 1890, ...
    """
    radicand = _functional_constant(r, literal) / (n * psi_next * GAUSSIAN.second_moment)
    if not radicand > 0:
        raise ValueError(f"nonpositive radicand for r={r} (psi_{r + 2}={psi_next:.4g})")
    return radicand ** (1.0 / (r + 3))


_AMISE_CONST = {
    0: 1.0 / (2.0 * SQRT_PI),
    1: -3.0 / (4.0 * SQRT_PI),
    2: 15.0 / (8.0 * SQRT_PI),
}


def plugin_derivative_bandwidth(r, psi_est, n):
    """AMISE-optimal bandwidth for ``f^(r)``, ``r`` in {0, 1, 2}.

    ``psi_est`` estimates ``psi_4``, ``psi_6`` or ``psi_8`` respectively.
    """
    if r not in _AMISE_CONST:
        raise ValueError(f"derivative order must be 0, 1 or 2, got {r}")
    radicand = _AMISE_CONST[r] / (psi_est * n)
    if not radicand > 0:
        raise ValueError(f"psi_{2 * r + 4} estimate has the wrong sign ({psi_est:.4g})")
    return radicand ** (1.0 / (2 * r + 5))


@dataclass
class SelectorConfig:
    """Tuning knobs for :func:`hdr_bandwidth`.

    ``paper_literal_constants`` switches the functional-bandwidth constants
    to their integer form (see :func:`optimal_functional_bandwidth`).
    """

    binned: bool = True
    psi_grid_size: int = 8192
    grid_size: int = 1024
    paper_literal_constants: bool = False
    newton_steps: int = 1
    prune_crossings: bool = True
    min_sample_size: int = MIN_SAMPLE_SIZE


@dataclass
class SelectorReport:
    """Every intermediate of one run of the HDR plug-in selector."""

    bandwidth: float
    tau: float
    n: int
    sigma_hat: float
    psi_normal_scale: dict
    psi_level1: dict
    psi_level2: dict
    functional_bandwidths: dict
    pilot_bandwidths: tuple
    crossings: CrossingSet
    coefficients: object
    c_opt_hat: float
    multimodal: bool = False
    sign_fallbacks: list = field(default_factory=list)

    @property
    def r_hat(self):
        return self.crossings.r

    def to_dict(self):
        return {
            "bandwidth": self.bandwidth,
            "tau": self.tau,
            "n": self.n,
            "sigma_hat": self.sigma_hat,
            "psi_normal_scale": {str(k): v for k, v in self.psi_normal_scale.items()},
            "psi_level1": {str(k): v for k, v in self.psi_level1.items()},
            "psi_level2": {str(k): v for k, v in self.psi_level2.items()},
            "functional_bandwidths": self.functional_bandwidths,
            "pilot_bandwidths": {
                "h0": self.pilot_bandwidths[0],
                "h1": self.pilot_bandwidths[1],
                "h2": self.pilot_bandwidths[2],
            },
            "level": self.crossings.level,
            "r_hat": self.r_hat,
            "pruned_crossings": self.crossings.pruned,
            "crossings": [
                {"x": x, "slope": s, "curvature": c}
                for x, s, c in self.crossings.crossings.tolist()
            ],
            "coefficients": self.coefficients.to_dict(),
            "c_opt_hat": self.c_opt_hat,
            "multimodal": self.multimodal,
            "sign_fallbacks": self.sign_fallbacks,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def _expected_sign(r):
    return 1.0 if (r // 2) % 2 == 0 else -1.0


def hdr_bandwidth(sample, tau, config=None):
    """Plug-in bandwidth for kernel estimation of the ``100(1 - tau)%`` HDR.

    Parameters
    ----------
    sample : array_like
        One-dimensional data, at least 50 observations.
    tau : float
        In (0, 1).
    config : SelectorConfig, optional

    Returns
    -------
    SelectorReport

    Raises
    ------
    PipelineError
        Tagged with the step that failed.
    """
    cfg = config or SelectorConfig()
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    x = check_sample(sample, cfg.min_sample_size)
    n = x.size
    lit = cfg.paper_literal_constants
    fallbacks = []

    try:
        sigma = robust_scale(x)
    except ValueError as exc:
        raise PipelineError(2, str(exc)) from None
    ns = {r: psi_normal_scale(r, sigma) for r in (8, 10, 12)}

    def estimate(step, r, g):
        val = psi_kernel_estimate(x, r, g, cfg.binned, cfg.psi_grid_size)
        if np.sign(val) != _expected_sign(r):
            fallbacks.append({"step": step, "r": r, "estimate": val})
            val = psi_normal_scale(r, sigma)
        return val

    gs = {}
    step = 4
    try:
        # Level 1: g for psi_r from the normal-scale psi_(r+2).
        lvl1 = {}
        for r in (6, 8, 10):
            gs[f"level1_r{r}"] = g = optimal_functional_bandwidth(r, ns[r + 2], n, lit)
            lvl1[r] = estimate(4, r, g)
        step = 5
        lvl2 = {}
        for r in (4, 6, 8):
            gs[f"level2_r{r}"] = g = optimal_functional_bandwidth(r, lvl1[r + 2], n, lit)
            lvl2[r] = estimate(5, r, g)
        step = 6
        h0 = plugin_derivative_bandwidth(0, lvl2[4], n)
        h1 = plugin_derivative_bandwidth(1, lvl2[6], n)
        h2 = plugin_derivative_bandwidth(2, lvl2[8], n)
    except ValueError as exc:
        raise PipelineError(step, str(exc)) from None

    grid = EvaluationGrid.around(x, max(h0, h1, h2), cfg.grid_size)
    try:
        cs = find_crossings(
            x, h0, h1, h2, tau, grid, cfg.binned, cfg.newton_steps, cfg.prune_crossings
        )
    except (CrossingError, HDRError) as exc:
        raise PipelineError(8, str(exc)) from None
    try:
        rc = risk_coefficients(cs.level, cs.slopes, cs.curvatures, clamp=True)
    except (ValueError, HDRError) as exc:
        raise PipelineError(9, str(exc)) from None
    try:
        res = minimize_AR(n, rc, c_ref=h0 * n**0.2)
    except NoInteriorMinimumError as exc:
        raise PipelineError(10, str(exc)) from None

    return SelectorReport(
        bandwidth=res.c_opt * n**-0.2,
        tau=float(tau),
        n=n,
        sigma_hat=sigma,
        psi_normal_scale=ns,
        psi_level1=lvl1,
        psi_level2=lvl2,
        functional_bandwidths=gs,
        pilot_bandwidths=(h0, h1, h2),
        crossings=cs,
        coefficients=rc,
        c_opt_hat=res.c_opt,
        multimodal=res.multimodal,
        sign_fallbacks=fallbacks,
    )


def _pair_distances(x, binned, grid_size):
    """Distinct-pair distances ``X_j - X_i`` (i < j) with multiplicities."""
    n = x.size
    if not binned:
        iu = np.triu_indices(n, k=1)
        d = (x[None, :] - x[:, None])[iu]
        return d, np.ones_like(d)
    grid = linear_bin(x, EvaluationGrid(float(x[0]), float(x[-1]), grid_size))
    c = grid.bin_weights
    auto = fftconvolve(c, c[::-1])[grid_size - 1:]
    counts = auto.copy()
    counts[0] = 0.5 * (auto[0] - n)
    d = np.arange(grid_size) * grid.delta
    return d, counts


def lscv_score(sample, h, _pairs=None):
    """Least-squares cross-validation criterion at bandwidth ``h``.

    ``int f_hat^2 - (2/n) sum_i f_hat_{-i}(X_i)`` via Gaussian convolution
    identities.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    d, w = _pairs if _pairs is not None else _pair_distances(x, False, 0)
    h = float(h)
    # exp(-d^2 / 4h^2) serves both kernels: phi_{sqrt2 h} and its square phi_h.
    e = np.exp(-0.25 * (d / h) ** 2)
    int_sq = (n + 2.0 * np.dot(w, e)) / (n**2 * 2.0 * SQRT_PI * h)
    loo = 2.0 * np.dot(w, e * e) / (n * (n - 1) * SQRT_2PI * h)
    return int_sq - 2.0 * loo


def _lscv_slope(x, h, pairs):
    # d/dh of lscv_score.
    n = x.size
    d, w = pairs
    q = (d / h) ** 2
    e = np.exp(-0.25 * q)
    sw_e, sw_e2 = np.dot(w, e), np.dot(w, e * e)
    int_sq = (n + 2.0 * sw_e) / (n**2 * 2.0 * SQRT_PI * h)
    loo = 2.0 * sw_e2 / (n * (n - 1) * SQRT_2PI * h)
    d_int = np.dot(w, e * q) / (n**2 * 2.0 * SQRT_PI * h * h) - int_sq / h
    d_loo = 2.0 * np.dot(w, e * e * q) / (n * (n - 1) * SQRT_2PI * h * h) - loo / h
    return float(d_int - 2.0 * d_loo)


@dataclass
class LSCVResult:
    bandwidth: float
    score: float
    boundary: bool


def lscv_bandwidth(sample, h_ref=None, span=(0.01, 4.0), grid_points=80, binned=None, grid_size=8192):
    """Bandwidth minimizing the LSCV criterion.

    The search grid is log-spaced over ``span`` times ``h_ref`` (default the
    normal-reference bandwidth ``1.06 sigma_hat n^(-1/5)``), then refined
    around the best grid point. Pair distances are exact for ``n <= 5000`` and
    binned above unless ``binned`` says otherwise.
    """
    x = check_sample(sample, 10)
    n = x.size
    if h_ref is None:
        h_ref = 1.06 * robust_scale(x) * n**-0.2
    if binned is None:
        binned = n > 5000
    pairs = _pair_distances(x, binned, grid_size)
    logh = np.linspace(np.log(span[0] * h_ref), np.log(span[1] * h_ref), grid_points)
    scores = np.array([lscv_score(x, np.exp(t), pairs) for t in logh])
    k = int(np.argmin(scores))
    if k in (0, grid_points - 1):
        return LSCVResult(float(np.exp(logh[k])), float(scores[k]), True)
    h, val = refine_minimum(
        lambda t: lscv_score(x, t, pairs),
        lambda t: _lscv_slope(x, t, pairs),
        float(np.exp(logh[k - 1])),
        float(np.exp(logh[k + 1])),
        xtol=1e-13,
    )
    return LSCVResult(float(h), float(val), False)
