"""Scikit-learn compatible HDR estimator."""

import numpy as np
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .density import EvaluationGrid, kde_evaluate, kde_on_grid
from .hdr import extract_region, level_for_tau
from .selector import SelectorConfig, hdr_bandwidth, lscv_bandwidth


def _as_1d(X):
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature, got {X.shape[1]}")
        X = X[:, 0]
    return X


class KernelHDR(OutlierMixin, BaseEstimator):
    """Kernel estimate of the ``100(1 - tau)%`` highest-density region.

    Parameters
    ----------
    tau : float, default=0.5
        One minus the coverage of the region.
    bandwidth : {"hdr", "lscv"} or float, default="hdr"
        ``"hdr"`` uses the HDR plug-in selector, ``"lscv"`` least-squares
        cross-validation.
    grid_size : int, default=1024
    binned : bool, default=True
    paper_literal_constants : bool, default=False

    Attributes
    ----------
    bandwidth_ : float
    level_ : float
        Estimated density level bounding the region.
    region_ : IntervalUnion
    report_ : SelectorReport or None
        Set when ``bandwidth="hdr"``.
    """

    def __init__(self, tau=0.5, bandwidth="hdr", grid_size=1024, binned=True,
                 paper_literal_constants=False):
        self.tau = tau
        self.bandwidth = bandwidth
        self.grid_size = grid_size
        self.binned = binned
        self.paper_literal_constants = paper_literal_constants

    def fit(self, X, y=None):
        x = np.sort(_as_1d(X))
        self.report_ = None
        if self.bandwidth == "hdr":
            cfg = SelectorConfig(
                binned=self.binned,
                grid_size=self.grid_size,
                paper_literal_constants=self.paper_literal_constants,
            )
            self.report_ = hdr_bandwidth(x, self.tau, cfg)
            h = self.report_.bandwidth
        elif self.bandwidth == "lscv":
            h = lscv_bandwidth(x).bandwidth
        else:
            h = float(self.bandwidth)
        self.bandwidth_ = h
        self.sample_ = x
        grid = EvaluationGrid.around(x, h, self.grid_size)
        self.curve_ = kde_on_grid(x, h, 0, grid, binned=self.binned)
        self.level_ = level_for_tau(self.curve_, self.tau)
        self.region_ = extract_region(self.curve_, self.level_)
        return self

    def score_samples(self, X):
        """Log of the kernel density estimate at ``X``."""
        check_is_fitted(self, "level_")
        with np.errstate(divide="ignore"):
            return np.log(kde_evaluate(self.sample_, self.bandwidth_, 0, _as_1d(X)))

    def decision_function(self, X):
        """Estimated density minus the region level; positive inside."""
        check_is_fitted(self, "level_")
        return kde_evaluate(self.sample_, self.bandwidth_, 0, _as_1d(X)) - self.level_

    def predict(self, X):
        """``1`` for points inside the estimated region, ``-1`` outside."""
        check_is_fitted(self, "region_")
        return np.where(self.region_.contains(_as_1d(X)), 1, -1)
