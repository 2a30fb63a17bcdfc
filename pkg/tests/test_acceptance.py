"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

from math import pi, sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from hdrband.hdr import IntervalUnion, symmetric_difference_mass
from hdrband.kernel import gaussian_derivative, kernel_constants
from hdrband.models import PRESETS, hdr_oracle, mixture_sample
from hdrband.risk import (
    _scaled_ar,
    compare_selectors,
    minimize_AR,
    monte_carlo_risk,
    risk_coefficients,
)
from hdrband.selector import (
    hdr_bandwidth,
    lscv_bandwidth,
    psi_kernel_estimate,
    psi_normal_scale,
)

STD = PRESETS["normal"]
SEED = 20240601


def _oracle_rc(name, tau):
    o = hdr_oracle(PRESETS[name], tau)
    return risk_coefficients(o.level, o.slopes, o.curvatures)


def test_criterion_1_constants(criterion):
    k = kernel_constants()
    errs = [abs(k.roughness - 1 / (2 * sqrt(pi))), abs(k.second_moment - 1.0)]
    # phi^(r)(0) = (-1)^(r/2) (r-1)!! / sqrt(2 pi)
    for r in range(0, 13, 2):
        dfact = float(np.prod(np.arange(r - 1, 0, -2))) if r else 1.0
        exact = (-1) ** (r // 2) * dfact / sqrt(2 * pi)
        errs.append(abs(k.derivative_at_zero[r] - exact) / abs(exact))
        errs.append(abs(gaussian_derivative(r, 0.0) - exact) / abs(exact))
    displays = {8: 105 / (32 * sqrt(pi)), 10: -945 / (64 * sqrt(pi)), 12: 10395 / (128 * sqrt(pi))}
    for r, exact in displays.items():
        errs.append(abs(psi_normal_scale(r, 1.0) - exact) / abs(exact))
    worst = max(errs)
    ok = criterion(1, worst <= 1e-12, f"closed-form constants, worst error {worst:.2e} (tol 1e-12)")
    assert ok


def _bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_criterion_2_oracle_hdr(criterion):
    # Independent route: the region is [-a, a] with 2 Phi(a) - 1 = 1 - tau.
    a_ref = _bisect(lambda a: 2 * norm.cdf(a) - 1 - 0.5, 0.0, 10.0)
    level_ref = norm.pdf(a_ref)
    o = hdr_oracle(STD, 0.5)
    ((lo, hi),) = o.region.intervals
    errs = [
        abs(o.level - 0.31777),
        abs(o.level - level_ref),
        abs(lo + 0.67449),
        abs(hi - 0.67449),
        abs(hi - a_ref),
        abs(lo + a_ref),
    ]
    ok = criterion(
        2, max(errs) <= 1e-4,
        f"normal tau=0.5 level {o.level:.6f}, region [{lo:.5f}, {hi:.5f}] (tol 1e-4)",
    )
    assert ok


def test_criterion_3_coefficients(criterion):
    rc = _oracle_rc("normal", 0.5)
    # Independent script from closed forms at x = +-a.
    a = norm.ppf(0.75)
    f = norm.pdf(a)
    fp, fpp = a * f, (a * a - 1) * f
    rk = 1 / (2 * sqrt(pi))
    s = 2 / fp
    d1 = 0.5 / s * (2 * fpp / fp + (-fp - fp) / f)
    d2 = rk * f / s**2 * 2 / fp**2
    d3 = rk * f / (fp * s)
    var = rk * f - 2 * d3 + d2
    bias = abs(0.5 * fpp - d1)
    ref = {
        "D1": (rc.d1, d1, -0.1589),
        "D2": (rc.d2, d2, 0.04482),
        "B1": (rc.b1[0], 2 * f * sqrt(var) / fp, 0.6277),
        "B2": (rc.b2[0], bias / sqrt(var), 0.3414),
        "B3": (rc.b3[0], f * bias / fp, 0.1072),
    }
    rel = max(abs(got / want - 1) for got, want, _ in ref.values())
    # The printed values carry 4 significant figures.
    printed = max(abs(got / shown - 1) for got, _, shown in ref.values())
    d3_exact = bool(np.all(rc.d3 == rc.d2))
    ok = criterion(
        3, rel <= 1e-4 and printed <= 5e-4 and d3_exact,
        f"coefficients rel err {rel:.1e} (tol 1e-4), D3 == D2 exactly: {d3_exact}",
    )
    assert ok


@pytest.mark.parametrize("name, tau", [("normal", 0.5), ("normal", 0.2), ("mw4", 0.5)])
def test_criterion_4_minimizer(criterion, name, tau):
    rc = _oracle_rc(name, tau)
    res = minimize_AR(1000, rc)
    grid = np.linspace(0.01, 10.0, 10**6)
    vals = np.concatenate([_scaled_ar(chunk, rc) for chunk in np.array_split(grid, 20)])
    brute = grid[np.argmin(vals)]
    rel = abs(res.c_opt / brute - 1)
    ok = criterion(
        4, rel <= 1e-4,
        f"{name} tau={tau}: c_opt {res.c_opt:.6f} vs 1e6-grid {brute:.6f}, rel {rel:.1e} (tol 1e-4)",
    )
    assert ok


def test_criterion_5_psi_binned(criterion):
    worst = 0.0
    for name in ("normal", "mw4"):
        x = mixture_sample(PRESETS[name], 1000, SEED)
        rep = hdr_bandwidth(x, 0.5)
        for key, g in rep.functional_bandwidths.items():
            r = int(key.split("_r")[1])
            exact = psi_kernel_estimate(x, r, g, binned=False)
            binned = psi_kernel_estimate(x, r, g, binned=True)
            worst = max(worst, abs(binned / exact - 1))
    ok = criterion(5, worst <= 1e-3, f"binned vs exact psi, worst rel {worst:.1e} (tol 1e-3)")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("name", ["normal", "mw2"])
def test_criterion_6_risk_curve(criterion, name):
    n, tau, M = 1000, 0.5, 100
    h_opt = minimize_AR(n, _oracle_rc(name, tau)).c_opt * n**-0.2
    hs = np.sort(np.append(np.geomspace(0.05, 1.0, 20), h_opt))
    pts = monte_carlo_risk(PRESETS[name], n, tau, hs, M, SEED)
    mc = np.array([p.mc_mean for p in pts])
    asym = np.array([p.asymptotic for p in pts])
    h_mc, h_as = hs[np.argmin(mc)], hs[np.argmin(asym)]
    ratio = max(h_mc / h_as, h_as / h_mc)
    excess = mc[np.argmin(asym)] / mc.min() - 1
    ok = criterion(
        6, ratio <= 2 and excess <= 0.25,
        f"{name}: MC argmin {h_mc:.4f}, asymptotic argmin {h_as:.4f} (ratio {ratio:.2f}, tol 2); "
        f"MC excess at asymptotic argmin {excess:.1%} (tol 25%)",
    )
    assert ok


@pytest.mark.slow
def test_criterion_7_simulation_direction(criterion):
    res = compare_selectors(PRESETS["mw4"], 1000, [0.2, 0.5, 0.8], 100, SEED)
    med = {t: res.summary[t]["median_log10_ratio"] for t in (0.2, 0.5, 0.8)}
    ok = med[0.2] < 0 and med[0.5] < 0 and med[0.8] > 0
    detail = ", ".join(
        f"tau={t}: {m:+.3f} (p={res.summary[t]['wilcoxon_p']:.2g})" for t, m in med.items()
    )
    ok = criterion(
        7, ok, f"median log10(err_hdr/err_lscv) {detail}; failures {len(res.failures)}"
    )
    assert ok


TRANSFORMS = [(1.0, 3.7), (1.0, -250.0), (2.5, 0.0), (0.01, -4.0), (7.3, 2.1)]


def test_criterion_8_equivariance(criterion):
    shift_err = scale_err = 0.0
    for name in ("normal", "mw4"):
        x = mixture_sample(PRESETS[name], 1000, SEED)
        base = (hdr_bandwidth(x, 0.5).bandwidth, lscv_bandwidth(x).bandwidth)
        for a, b in TRANSFORMS:
            y = a * x + b
            got = (hdr_bandwidth(y, 0.5).bandwidth, lscv_bandwidth(y).bandwidth)
            err = max(abs(g / (a * h) - 1) for g, h in zip(got, base))
            if a == 1.0:
                shift_err = max(shift_err, err)
            else:
                scale_err = max(scale_err, err)
    ok = criterion(
        8, shift_err <= 1e-11 and scale_err <= 1e-6,
        f"bandwidth equivariance: shift rel err {shift_err:.1e} (tol 1e-11), "
        f"scale rel err {scale_err:.1e} (tol 1e-6)",
    )
    assert ok


unions = st.lists(
    st.tuples(st.floats(-5, 5), st.floats(0, 3)).map(lambda t: (t[0], t[0] + t[1])),
    max_size=5,
).map(IntervalUnion)

_AXIOM_FAILURES = []


@given(unions, unions, unions, st.sampled_from(sorted(PRESETS)))
@settings(max_examples=300, deadline=None)
def _check_axioms(a, b, c, name):
    m = PRESETS[name]
    d = lambda p, q: symmetric_difference_mass(p, q, m)  # noqa: E731
    if d(a, a) != 0.0 or d(a, b) != d(b, a) or d(a, c) > d(a, b) + d(b, c) + 1e-14:
        _AXIOM_FAILURES.append((a, b, c, name))
    assert not _AXIOM_FAILURES


def test_criterion_8_mu_f_axioms(criterion):
    try:
        _check_axioms()
    finally:
        ok = criterion(
            8, not _AXIOM_FAILURES,
            "mu_f axioms (A xor A = 0, symmetry exact, triangle) on 300 random triples",
        )
    assert ok


@pytest.mark.slow
def test_criterion_9_convergence(criterion):
    c_opt = minimize_AR(1000, _oracle_rc("normal", 0.5)).c_opt
    meds = []
    for n in (10**3, 10**4, 10**5):
        dev = [
            abs(hdr_bandwidth(mixture_sample(STD, n, SEED, s), 0.5).bandwidth * n**0.2 / c_opt - 1)
            for s in range(20)
        ]
        meds.append(float(np.median(dev)))
    ok = criterion(
        9, meds[0] > meds[1] > meds[2],
        "median |h n^(1/5) / c_opt - 1| over 20 seeds: "
        + ", ".join(f"n=1e{k}: {v:.4f}" for k, v in zip((3, 4, 5), meds)),
    )
    assert ok
