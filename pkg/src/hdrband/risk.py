"""Asymptotic HDR risk: coefficients, risk curves, minimization and Monte Carlo.

Notation follows the usual expansion of ``E mu_f(R_hat xor R)`` in terms of
per-crossing coefficients ``B1_j, B2_j, B3_j`` built from the level, the
slopes ``f'(x_j)`` and the curvatures ``f''(x_j)`` at the crossings.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr
from scipy.stats import norm, rankdata

from .exceptions import HDRError, NoInteriorMinimumError
from .hdr import kde_hdr, symmetric_difference_mass
from .kernel import GAUSSIAN, SQRT_2PI
from .models import hdr_oracle, mixture_sample

VARIANCE_FLOOR = 1e-12
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RiskCoefficients:
    """Coefficients of the asymptotic risk expansion.

    Per-crossing arrays have one entry per crossing ``x_1 < ... < x_2r``.
    ``clamped`` counts crossings whose variance term hit the floor.
    """

    f_tau: float
    d1: float
    d2: float
    d3: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    clamped: int = 0

    def to_dict(self):
        return {
            "f_tau": self.f_tau,
            "d1": self.d1,
            "d2": self.d2,
            "d3": self.d3.tolist(),
            "b1": self.b1.tolist(),
            "b2": self.b2.tolist(),
            "b3": self.b3.tolist(),
            "clamped": self.clamped,
        }


def risk_coefficients(level, slopes, curvatures, constants=GAUSSIAN, clamp=False):
    """Compute ``D1, D2, D3_j`` and ``B1_j, B2_j, B3_j``.

    Parameters
    ----------
    level : float
        The density level ``f_tau``.
    slopes, curvatures : array_like
        ``f'(x_j)`` and ``f''(x_j)`` at the ``2r`` crossings, in increasing x.
    constants : KernelConstants
    clamp : bool
        Floor the variance term ``R(K) f_tau - 2 D3_j + D2`` at 1e-12. Meant
        for estimated inputs, where noise can make it nonpositive.
    """
    fp = np.asarray(slopes, dtype=float)
    fpp = np.asarray(curvatures, dtype=float)
    if fp.ndim != 1 or fp.shape != fpp.shape:
        raise ValueError("slopes and curvatures must be 1-d arrays of equal length")
    if len(fp) == 0 or len(fp) % 2:
        raise ValueError(f"need an even, nonzero number of crossings, got {len(fp)}")
    if np.any(fp == 0):
        raise ValueError("crossing slopes must be nonzero")
    if not level > 0:
        raise ValueError("level must be positive")
    rk, mu2 = constants.roughness, constants.second_moment
    absfp = np.abs(fp)
    s = np.sum(1.0 / absfp)
    paired = np.sum(fp[1::2] - fp[0::2])
    d1 = 0.5 * mu2 / s * (np.sum(fpp / absfp) + paired / level)
    # Normalized weights w_j = |f'_j|^-1 / S give D3_j = R f w_j and
    # D2 = R f sum w_j^2, so D3_j == D2 exactly when all |f'_j| agree.
    w = (1.0 / absfp) / s
    d2 = rk * level * np.sum(w * w)
    d3 = rk * level * w
    var = rk * level - 2.0 * d3 + d2
    clamped = 0
    if clamp:
        clamped = int(np.sum(var < VARIANCE_FLOOR))
        var = np.maximum(var, VARIANCE_FLOOR)
    elif np.any(var <= 0):
        raise HDRError("variance term is nonpositive; pass clamp=True for estimated inputs")
    bias = np.abs(0.5 * mu2 * fpp - d1)
    sd = np.sqrt(var)
    return RiskCoefficients(
        f_tau=float(level),
        d1=float(d1),
        d2=float(d2),
        d3=d3,
        b1=2.0 * level * sd / absfp,
        b2=bias / sd,
        b3=level * bias / absfp,
        clamped=clamped,
    )


def _phi(x):
    return np.exp(-0.5 * x * x) / SQRT_2PI


def asymptotic_risk_in_h(h, n, rc):
    """Leading-order risk at bandwidth ``h`` for sample size ``n``.

    Vectorized over ``h``.
    """
    h = np.asarray(h, dtype=float)
    z = np.sqrt(n) * h[..., None] ** 2.5 * rc.b2
    t1 = rc.b1 * _phi(z) / np.sqrt(n * h[..., None])
    t2 = rc.b3 * h[..., None] ** 2 * (2.0 * ndtr(z) - 1.0)
    out = np.sum(t1 + t2, axis=-1)
    return out if out.ndim else float(out)


def asymptotic_risk_AR(c, n, rc):
    """Asymptotic risk as a function of ``c`` where ``h = c n^(-1/5)``."""
    return n ** -0.4 * _scaled_ar(c, rc)


def _scaled_ar(c, rc):
    # n^(2/5) * AR(c); free of n.
    c = np.asarray(c, dtype=float)
    z = rc.b2 * c[..., None] ** 2.5
    t1 = rc.b1 / np.sqrt(c[..., None]) * _phi(z)
    t2 = rc.b3 * c[..., None] ** 2 * (2.0 * ndtr(z) - 1.0)
    out = np.sum(t1 + t2, axis=-1)
    return out if out.ndim else float(out)


def _scaled_ar_slope(c, rc):
    # d/dc of _scaled_ar.
    z = rc.b2 * c**2.5
    pz = _phi(z)
    t1 = rc.b1 * c**-1.5 * pz * (-0.5 - 2.5 * z * z)
    t2 = rc.b3 * c * (2.0 * (2.0 * ndtr(z) - 1.0) + 5.0 * z * pz)
    return float(np.sum(t1 + t2))


def refine_minimum(f, slope, a, b, xtol=1e-12):
    """Minimizer of ``f`` on ``[a, b]``, a bracket around one local minimum.

    Solves ``slope = 0`` when the slope changes sign across the bracket,
    which pins the minimizer to near machine precision; otherwise falls
    back to golden-section search on ``f``.
    """
    if slope(a) < 0.0 < slope(b):
        x = brentq(slope, a, b, xtol=xtol * abs(a), rtol=1e-15, maxiter=500)
        return x, f(x)
    return golden_section(f, a, b, xtol=xtol)


def golden_section(f, a, b, xtol=1e-12, maxiter=500):
    """Minimize a unimodal ``f`` on ``[a, b]`` by golden-section search."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if abs(b - a) <= xtol * (abs(a) + abs(b)) * 0.5:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def local_minima(values):
    """Indices of interior local minima of a sampled curve."""
    v = np.asarray(values)
    return np.nonzero((v[1:-1] < v[:-2]) & (v[1:-1] <= v[2:]))[0] + 1


class ARMinimum(NamedTuple):
    c_opt: float
    value: float
    multimodal: bool
    bracket: tuple


def default_c_ref(rc):
    """Scale where the largest ``B2_j c^(5/2)`` equals one."""
    return float(np.max(rc.b2)) ** -0.4


def minimize_AR(n, rc, c_ref=None, span=100.0, grid_points=512, xtol=1e-13):
    """Global minimizer of ``AR(c)``.

    A log-spaced grid over ``[c_ref/span, c_ref*span]`` locates the basin of
    the global minimum, which :func:`refine_minimum` then resolves.

    Returns
    -------
    ARMinimum
        ``c_opt``, ``AR(c_opt)``, whether the grid showed more than one
        local minimum, and the bracket searched.

    Raises
    ------
    NoInteriorMinimumError
        If the grid minimum sits on a bracket end.
    """
    if not np.any((rc.b2 > 0) & (rc.b3 > 0)):
        raise NoInteriorMinimumError(
            "AR(c) is decreasing: no crossing has both B2 and B3 positive"
        )
    if c_ref is None:
        c_ref = default_c_ref(rc)
    bracket = (c_ref / span, c_ref * span)
    logc = np.linspace(np.log(bracket[0]), np.log(bracket[1]), grid_points)
    vals = _scaled_ar(np.exp(logc), rc)
    k = int(np.argmin(vals))
    if k == 0 or k == grid_points - 1:
        raise NoInteriorMinimumError(
            f"minimum of AR(c) at bracket end c={np.exp(logc[k]):.4g}", bracket
        )
    multimodal = len(local_minima(vals)) > 1
    c_opt, _ = refine_minimum(
        lambda c: _scaled_ar(c, rc),
        lambda c: _scaled_ar_slope(c, rc),
        float(np.exp(logc[k - 1])),
        float(np.exp(logc[k + 1])),
        xtol=xtol,
    )
    c_opt = float(c_opt)
    return ARMinimum(c_opt, float(asymptotic_risk_AR(c_opt, n, rc)), multimodal, bracket)


def interval_risk_slope(x, b):
    """``5 x^(6/5) u'(x) / phi(x)`` for ``u(x) = x^(-1/5) phi(x) + b x^(4/5)(2 Phi(x) - 1)``.

    Its unique sign change locates the minimum of the symmetric one-interval
    risk curve.
    """
    x = np.asarray(x, dtype=float)
    return -1.0 + 4.0 * b * x * (2.0 * ndtr(x) - 1.0) / _phi(x) + 5.0 * (2.0 * b - 1.0) * x**2


@dataclass(frozen=True)
class RiskCurvePoint:
    h: float
    asymptotic: float
    mc_mean: Optional[float] = None
    mc_se: Optional[float] = None
    M: int = 0


def _workers():
    try:
        return max(1, int(os.environ.get("HDRBAND_THREADS", "1")))
    except ValueError:
        return 1


def _ordered_map(fn, items, workers=None):
    """``map`` that may fan out over threads but keeps input order."""
    workers = workers or _workers()
    if workers == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def replication_sample(m, n, seed, rep):
    """Sample for replication ``rep``; independent of any other replication."""
    return mixture_sample(m, n, seed, rep)


def monte_carlo_errors(m, n, tau, h_values, reps, seed, grid_size=1024, oracle=None, workers=None):
    """Matrix of ``mu_f(R_hat_h xor R_tau)`` with one row per replication index.

    ``reps`` is either a count or an explicit sequence of replication indices.
    """
    oracle = oracle or hdr_oracle(m, tau)
    idx = range(reps) if np.isscalar(reps) else list(reps)
    hs = np.atleast_1d(np.asarray(h_values, dtype=float))

    def one(rep):
        x = replication_sample(m, n, seed, rep)
        row = np.empty(hs.size)
        for k, h in enumerate(hs):
            _, region, _ = kde_hdr(x, h, tau, grid_size)
            row[k] = symmetric_difference_mass(region, oracle.region, m)
        return row

    return np.array(_ordered_map(one, idx, workers)).reshape(len(idx), hs.size)


def monte_carlo_risk(m, n, tau, h_values, M, seed, grid_size=1024, workers=None):
    """Monte Carlo and asymptotic risk curves over ``h_values``.

    Returns a list of :class:`RiskCurvePoint`.
    """
    if int(M) < 1:
        raise ValueError("M must be at least 1")
    oracle = hdr_oracle(m, tau)
    rc = risk_coefficients(oracle.level, oracle.slopes, oracle.curvatures)
    errs = monte_carlo_errors(m, n, tau, h_values, int(M), seed, grid_size, oracle, workers)
    mean = errs.mean(axis=0)
    se = errs.std(axis=0, ddof=1) / np.sqrt(M) if M > 1 else np.zeros_like(mean)
    asym = asymptotic_risk_in_h(np.asarray(h_values, dtype=float), n, rc)
    return [
        RiskCurvePoint(float(h), float(a), float(mm), float(s), int(M))
        for h, a, mm, s in zip(np.atleast_1d(h_values), np.atleast_1d(asym), mean, se)
    ]


def signed_rank_test(d):
    """Wilcoxon signed-rank test of zero median, normal approximation.

    Zero differences are dropped; ties use average ranks with the usual
    variance correction; a continuity correction of 1/2 is applied.

    Returns
    -------
    (w_plus, z, p_value) : tuple of float
    """
    d = np.asarray(d, dtype=float)
    d = d[d != 0]
    k = d.size
    if k == 0:
        return 0.0, 0.0, 1.0
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    mean = k * (k + 1) / 4.0
    _, counts = np.unique(np.abs(d), return_counts=True)
    var = k * (k + 1) * (2 * k + 1) / 24.0 - np.sum(counts**3 - counts) / 48.0
    diff = w_plus - mean
    z = (diff - 0.5 * np.sign(diff)) / np.sqrt(var) if var > 0 else 0.0
    return w_plus, float(z), float(2.0 * norm.sf(abs(z)))


@dataclass
class SimulationRecord:
    rep: int
    tau: float
    err_hdr: float
    err_lscv: float
    h_hdr: float
    h_lscv: float


@dataclass
class SimulationResult:
    """Per-replication records plus per-tau summaries."""

    records: list
    failures: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def summarize(records, taus):
    out = {}
    for tau in taus:
        rows = [r for r in records if r.tau == tau]
        ok = [r for r in rows if r.err_hdr > 0 and r.err_lscv > 0]
        lr = np.array([np.log10(r.err_hdr / r.err_lscv) for r in ok])
        w, z, p = signed_rank_test(lr)
        out[tau] = {
            "reps": len(rows),
            "median_log10_ratio": float(np.median(lr)) if lr.size else float("nan"),
            "median_err_hdr": float(np.median([r.err_hdr for r in rows])) if rows else float("nan"),
            "median_err_lscv": float(np.median([r.err_lscv for r in rows])) if rows else float("nan"),
            "wilcoxon_w": w,
            "wilcoxon_z": z,
            "wilcoxon_p": p,
            "low_power": lr.size < 20,
        }
    return out


def compare_selectors(
    m,
    n,
    taus,
    reps,
    seed,
    hdr_selector=None,
    baseline_selector=None,
    grid_size=1024,
    workers=None,
):
    """Simulation comparison of the HDR selector against LSCV.

    Each replication draws one sample, selects bandwidths with both
    selectors and records ``mu_f(R_hat xor R_tau)`` for each ``tau``.
    Replications where a selector fails are excluded and listed in
    ``failures``.

    ``hdr_selector(sample, tau)`` and ``baseline_selector(sample)`` return
    bandwidths; they default to the plug-in HDR selector and LSCV.
    """
    from .selector import hdr_bandwidth, lscv_bandwidth

    if int(reps) < 2:
        raise ValueError("reps must be at least 2")
    taus = [float(t) for t in taus]
    if hdr_selector is None:
        hdr_selector = lambda x, t: hdr_bandwidth(x, t).bandwidth  # noqa: E731
    if baseline_selector is None:
        baseline_selector = lambda x: lscv_bandwidth(x).bandwidth  # noqa: E731
    oracles = {t: hdr_oracle(m, t) for t in taus}

    def err(x, h, tau):
        _, region, _ = kde_hdr(x, h, tau, grid_size)
        return symmetric_difference_mass(region, oracles[tau].region, m)

    def one(rep):
        x = replication_sample(m, n, seed, rep)
        recs, fails = [], []
        try:
            h_l = float(baseline_selector(x))
        except HDRError as exc:
            return [], [(rep, None, f"baseline: {exc}")]
        e_l = {t: err(x, h_l, t) for t in taus}
        for t in taus:
            try:
                h_h = float(hdr_selector(x, t))
            except HDRError as exc:
                fails.append((rep, t, f"hdr: {exc}"))
                continue
            recs.append(SimulationRecord(rep, t, err(x, h_h, t), e_l[t], h_h, h_l))
        return recs, fails

    records, failures = [], []
    for recs, fails in _ordered_map(one, range(int(reps)), workers):
        records.extend(recs)
        failures.extend(fails)
    return SimulationResult(records, failures, summarize(records, taus))
