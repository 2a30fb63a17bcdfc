import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdrband.density import DensityCurve, EvaluationGrid, kde_evaluate, kde_on_grid
from hdrband.exceptions import CrossingError, HDRError
from hdrband.hdr import (
    IntervalUnion,
    extract_region,
    find_crossings,
    kde_hdr,
    level_for_tau,
    superlevel_mass,
    symmetric_difference_mass,
)
from hdrband.models import PRESETS, hdr_oracle, mixture_sample

STD = PRESETS["normal"]


def test_interval_union_merges():
    u = IntervalUnion([(2, 3), (0, 1), (0.5, 1.5), (3, 4)])
    assert u.intervals == ((0.0, 1.5), (2.0, 4.0))
    assert u.length == pytest.approx(3.5)
    assert u.contains([0.0, 1.7, 4.0]).tolist() == [True, False, True]
    with pytest.raises(ValueError):
        IntervalUnion([(1, 0)])


def test_interval_union_serialization():
    u = IntervalUnion([(-1.5, 0.25), (1, 2)])
    assert IntervalUnion.from_json(u.to_json()) == u
    rows = u.to_csv_rows()
    assert rows[0] == ("lo", "hi") and len(rows) == 3


def test_symmetric_difference_example():
    a = IntervalUnion([(0, 2)])
    b = IntervalUnion([(1, 3)])
    assert a.symmetric_difference(b).intervals == ((0.0, 1.0), (2.0, 3.0))
    assert a.symmetric_difference(a).intervals == ()
    assert IntervalUnion().symmetric_difference(IntervalUnion()).intervals == ()


intervals = st.lists(
    st.tuples(st.floats(-4, 4), st.floats(0, 2)).map(lambda t: (t[0], t[0] + t[1])),
    max_size=4,
).map(IntervalUnion)


@given(intervals, intervals, intervals)
@settings(max_examples=200, deadline=None)
def test_mu_f_is_a_pseudometric(a, b, c):
    d = lambda p, q: symmetric_difference_mass(p, q, STD)  # noqa: E731
    assert d(a, a) == 0.0
    assert d(a, b) == pytest.approx(d(b, a), abs=1e-15)
    assert 0.0 <= d(a, b) <= 1.0 + 1e-15
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-14


def _normal_curve(count=4001):
    grid = EvaluationGrid(-8.0, 8.0, count)
    return DensityCurve(grid, 0, 1.0, STD.pdf(grid.points))


@pytest.mark.parametrize("tau", [0.1, 0.5, 0.9])
def test_level_for_tau_on_true_density(tau):
    curve = _normal_curve()
    level = level_for_tau(curve, tau)
    assert superlevel_mass(curve, level) == pytest.approx(1 - tau, abs=1e-9)
    o = hdr_oracle(STD, tau)
    assert level == pytest.approx(o.level, rel=1e-5)
    region = extract_region(curve, level)
    ((lo, hi),) = region.intervals
    ((olo, ohi),) = o.region.intervals
    assert lo == pytest.approx(olo, abs=1e-4) and hi == pytest.approx(ohi, abs=1e-4)


def test_level_for_tau_rejects_short_grid():
    grid = EvaluationGrid(-0.5, 0.5, 101)
    curve = DensityCurve(grid, 0, 1.0, STD.pdf(grid.points))
    with pytest.raises(HDRError):
        level_for_tau(curve, 0.2)
    with pytest.raises(ValueError):
        level_for_tau(curve, 0.0)


def test_kde_hdr_normal_close_to_truth():
    x = mixture_sample(STD, 5000, 4)
    level, region, _ = kde_hdr(x, 0.25, 0.5)
    o = hdr_oracle(STD, 0.5)
    assert len(region) == 1
    assert symmetric_difference_mass(region, o.region, STD) < 0.05
    assert level == pytest.approx(o.level, rel=0.1)


def test_tiny_bandwidth_fragments_region():
    x = mixture_sample(STD, 300, 5)
    _, region, _ = kde_hdr(x, 0.001, 0.5, grid_size=200_000)
    assert len(region) > 20


@pytest.mark.parametrize("binned", [True, False])
def test_find_crossings_normal(binned):
    x = mixture_sample(STD, 4000, 6)
    cs = find_crossings(x, 0.25, 0.35, 0.45, 0.5, binned=binned)
    o = hdr_oracle(STD, 0.5)
    assert cs.r == 1
    np.testing.assert_allclose(cs.x, o.crossings[:, 0], atol=0.1)
    assert cs.slopes[0] > 0 > cs.slopes[1]
    assert np.all(cs.curvatures < 0)
    assert cs.pruned == 0


def test_newton_step_reduces_level_error():
    x = mixture_sample(STD, 2000, 7)
    grid = EvaluationGrid.around(x, 0.3, 64)
    err = []
    for steps in (0, 1):
        cs = find_crossings(x, 0.3, 0.3, 0.3, 0.5, grid=grid, binned=False, newton_steps=steps)
        err.append(np.max(np.abs(kde_evaluate(x, 0.3, 0, cs.x) - cs.level)))
    assert err[1] < err[0]


def test_strict_crossings_raise_and_prune_recovers():
    x = mixture_sample(STD, 400, 8)
    # Wildly mismatched pilots: h0 tiny makes many islands, h1 large smooths slopes.
    with pytest.raises(CrossingError) as info:
        find_crossings(x, 0.01, 1.0, 1.0, 0.5, grid=EvaluationGrid.around(x, 0.01, 20_000))
    assert "level" in info.value.diagnostics
    cs = find_crossings(
        x, 0.01, 1.0, 1.0, 0.5, grid=EvaluationGrid.around(x, 0.01, 20_000), prune=True
    )
    assert cs.pruned > 0
    assert np.all(np.sign(cs.slopes) == np.where(np.arange(len(cs.x)) % 2 == 0, 1, -1))


def test_curve_order_checked():
    x = mixture_sample(STD, 100, 9)
    d1 = kde_on_grid(x, 0.3, 1)
    with pytest.raises(ValueError):
        level_for_tau(d1, 0.5)
    with pytest.raises(ValueError):
        extract_region(d1, 0.1)
