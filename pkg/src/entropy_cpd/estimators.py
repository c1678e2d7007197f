"""scikit-learn style wrappers around the discretizers and the rolling scanner."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .categorical import SignTripleEncoding, discretize, encode_sign_triples, quantile_bins
from .detect import rolling_scan
from .exceptions import DataError

__all__ = ["QuantileBinner", "RollingEntropyScanner", "SignTripleEncoder"]


def _as_series(X) -> np.ndarray:
    """Accept a 1-D array or a single-column 2-D array."""
    arr = check_array(X, ensure_2d=False, dtype=np.float64)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise DataError(f"expected a single series, got {arr.shape[1]} columns")
        arr = arr[:, 0]
    return arr


class QuantileBinner(TransformerMixin, BaseEstimator):
    """Map values to ``n_bins`` categories cut at the empirical ``j/n_bins`` quantiles.

    Parameters
    ----------
    n_bins : int, default=4
        Number of categories.

    Attributes
    ----------
    bins_ : BinningScheme
    """

    def __init__(self, n_bins=4):
        self.n_bins = n_bins

    def fit(self, X, y=None):
        x = _as_series(X)
        self.bins_ = quantile_bins(x, self.n_bins)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "bins_")
        return discretize(_as_series(X), self.bins_)


class SignTripleEncoder(TransformerMixin, BaseEstimator):
    """Encode a series into up/down patterns of three consecutive increments.

    The output is 3 shorter than the input and consecutive codes overlap.
    """

    def __init__(self, merge=False):
        self.merge = merge

    def fit(self, X, y=None):
        _as_series(X)
        self.encoding_ = SignTripleEncoding(merge=bool(self.merge))
        self.n_categories_ = self.encoding_.k
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "encoding_")
        return encode_sign_triples(_as_series(X), self.encoding_)


class RollingEntropyScanner(BaseEstimator):
    """Rolling relative-entropy change-point scanner.

    ``fit`` runs the scan and stores it in ``result_``; ``predict`` returns the
    detection mask of the first method. Positions refer to window end points,
    see :class:`~entropy_cpd.detect.ScanResult`.
    """

    def __init__(self, window=250, n_categories=4, preprocess="quantile", reference="previous",
                 methods=("asymptotic2",), alpha=0.01, step=1, n_jobs=1):
        self.window = window
        self.n_categories = n_categories
        self.preprocess = preprocess
        self.reference = reference
        self.methods = methods
        self.alpha = alpha
        self.step = step
        self.n_jobs = n_jobs

    def fit(self, X, y=None, timestamps=None):
        x = _as_series(X)
        k = self.n_categories
        if str(self.preprocess).startswith("sign"):
            k = None
        self.result_ = rolling_scan(x, self.window, k, preprocess=self.preprocess,
                                    reference=self.reference, methods=tuple(self.methods),
                                    alpha=self.alpha, timestamps=timestamps, step=self.step,
                                    threads=self.n_jobs)
        self.n_features_in_ = 1
        return self

    def predict(self, X=None):
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "result_")
        first = next(iter(self.result_.detections))
        return self.result_.detections[first].copy()

    def fit_predict(self, X, y=None):
        return self.fit(X).predict()

    def score_samples(self, X=None):
        """The relative-entropy trace used for detection."""
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "result_")
        return self.result_.statistic.copy()
