"""Change-point decisions: relative-entropy tests, moment baselines, the AIC
criterion, and a rolling-window scanner.

Throughout, the later window plays ``p`` and the earlier (reference) window
plays ``q`` in ``D(p_hat || q_hat)``: an empty category on the reference side
is what makes the statistic blow up.
"""

from __future__ import annotations

import functools
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .bounds import BetaMode, BoundSpec, Family, bound_quantile
from .categorical import (
    CategoricalDistribution,
    SignTripleEncoding,
    _labels,
    discretize,
    empirical_distribution,
    encode_sign_triples,
    quantile_bins,
)
from .divergence import kl_rows, relative_entropy, reverse_pinsker_coefficient
from .exceptions import ConfigError, DataError

__all__ = [
    "AIC",
    "MethodTag",
    "ScanResult",
    "TestResult",
    "aic_equivalent_threshold",
    "delta_aic",
    "delta_aic_counts",
    "f_test",
    "f_test_counts",
    "parse_method",
    "re_test",
    "rolling_scan",
    "t_test",
    "welch_t_counts",
]

AIC = "aic"


@dataclass(frozen=True)
class MethodTag:
    """A parsed threshold method: a bound family or the AIC line.

    Textual form: ``family`` or ``family:beta`` where ``beta`` is ``unit``,
    ``rp`` (alias ``auto``: reverse-Pinsker coefficient of the data) or a
    positive number. Two-sample concentration families default to ``unit``.
    """

    family: Family | None
    beta_mode: BetaMode = BetaMode.UNIT
    beta: float | None = None

    @property
    def is_aic(self) -> bool:
        return self.family is None

    @property
    def data_beta(self) -> bool:
        return (self.family is not None and self.family.needs_beta
                and self.beta is None and self.beta_mode is BetaMode.REVERSE_PINSKER)

    def spec(self, n: int, k: int, m: int | None = None, p=None) -> BoundSpec:
        return BoundSpec(self.family, n=n, k=k, m=m, beta_mode=self.beta_mode, beta=self.beta, p=p)

    def __str__(self):
        if self.family is None:
            return AIC
        if not self.family.needs_beta:
            return self.family.value
        if self.beta is not None:
            return f"{self.family.value}:{self.beta:g}"
        return f"{self.family.value}:{'unit' if self.beta_mode is BetaMode.UNIT else 'rp'}"


def parse_method(tag) -> MethodTag:
    if isinstance(tag, MethodTag):
        return tag
    if isinstance(tag, BoundSpec):
        return MethodTag(tag.family, tag.beta_mode, tag.beta)
    if isinstance(tag, Family):
        return MethodTag(tag)
    text = str(tag).strip().lower()
    if text in (AIC, "aic_line", "delta_aic"):
        return MethodTag(None)
    name, _, beta = text.partition(":")
    try:
        family = Family(name)
    except ValueError:
        raise ConfigError(f"unknown method {tag!r}") from None
    if not beta:
        return MethodTag(family)
    if not family.needs_beta:
        raise ConfigError(f"method {name} takes no beta")
    if beta == "unit":
        return MethodTag(family, BetaMode.UNIT)
    if beta in ("rp", "auto", "reverse_pinsker"):
        return MethodTag(family, BetaMode.REVERSE_PINSKER)
    try:
        value = float(beta)
    except ValueError:
        raise ConfigError(f"bad beta {beta!r} in method {tag!r}") from None
    if not value > 0:
        raise ConfigError("beta must be positive")
    return MethodTag(family, BetaMode.UNIT, value)


@dataclass
class TestResult:
    """Outcome of one test. ``reject`` is ``statistic > threshold`` except that an
    infinite relative entropy always rejects (``info["infinite"]``)."""

    __test__ = False  # not a pytest class

    statistic: float
    threshold: float
    method: str
    alpha: float
    reject: bool
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "statistic": _jsonable(self.statistic),
            "threshold": _jsonable(self.threshold),
            "method": self.method,
            "alpha": self.alpha,
            "reject": bool(self.reject),
            "info": {k: _jsonable(v) for k, v in self.info.items()},
        }


def _jsonable(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


@functools.lru_cache(maxsize=4096)
def _cached_threshold(family: Family, beta_mode: BetaMode, beta, n: int, m, k: int, alpha: float) -> float:
    return bound_quantile(alpha, BoundSpec(family, n=n, k=k, m=m, beta_mode=beta_mode, beta=beta))


def method_threshold(method, alpha: float, n: int, k: int, m: int | None = None,
                     beta: float | None = None, p=None) -> float:
    """Threshold (nats) of ``method`` at level ``alpha`` for windows of ``n`` and ``m``.

    ``beta`` supplies the data-driven coefficient for ``:rp`` methods.
    """
    tag = parse_method(method)
    if tag.is_aic:
        return aic_equivalent_threshold(k, n)
    fam = tag.family
    m_eff = m if fam.two_sample else None
    if fam in (Family.BE_ENVELOPE, Family.BE2_QUADRATIC):
        p = p if p is not None else CategoricalDistribution.uniform(k)
        return bound_quantile(alpha, tag.spec(n, k, m_eff, p))
    if tag.data_beta:
        if beta is None:
            raise ConfigError(f"{tag} needs a data-driven beta")
        return _cached_threshold(fam, BetaMode.UNIT, float(beta), n, m_eff, k, alpha)
    return _cached_threshold(fam, tag.beta_mode, tag.beta, n, m_eff, k, alpha)


def re_test(first: Sequence[int], second: Sequence[int], k: int, method="asymptotic2",
            alpha: float = 0.05) -> TestResult:
    """Relative-entropy change-point test between two label sequences.

    The statistic is ``D(p_hat_second || q_hat_first)``. One-sample methods use
    ``n = len(second)``.
    """
    a, b = _labels(first, k), _labels(second, k)
    if a.size == 0 or b.size == 0:
        raise DataError("both samples must be nonempty")
    q_hat = empirical_distribution(a, k)
    p_hat = empirical_distribution(b, k)
    tag = parse_method(method)
    div = relative_entropy(p_hat, q_hat)
    info: dict = {"n": b.size, "m": a.size, "k": k, "infinite": not div.finite}

    beta = None
    threshold = math.nan
    if tag.data_beta:
        if q_hat.min_prob > 0:
            beta = reverse_pinsker_coefficient(p_hat, q_hat)
            info["beta"] = beta
        else:
            info["warning"] = "empty reference category: no reverse-Pinsker threshold"
    if not (tag.data_beta and beta is None):
        threshold = method_threshold(tag, alpha, n=b.size, k=k, m=a.size, beta=beta)
    if tag.family is not None and tag.family.needs_beta:
        info["conjectured"] = beta is None and tag.beta_mode is BetaMode.UNIT and tag.beta is None

    reject = (not div.finite) or bool(div.value > threshold)
    return TestResult(div.value, threshold, str(tag), alpha, reject, info)


# -- moment baselines ---------------------------------------------------------

def _moments_from_counts(counts: np.ndarray, values: np.ndarray):
    n = counts.sum(axis=-1)
    mean = counts @ values / n
    ss = counts @ (values**2) - n * mean**2
    var = np.maximum(ss, 0.0) / (n - 1)
    return n, mean, var


def welch_t_counts(first: np.ndarray, second: np.ndarray, values: np.ndarray, alpha: float):
    """Vectorised two-sided Welch test on count rows; returns ``(|t|, threshold)``."""
    n1, m1, v1 = _moments_from_counts(first, values)
    n2, m2, v2 = _moments_from_counts(second, values)
    se2 = v1 / n1 + v2 / n2
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.abs(m2 - m1) / np.sqrt(se2)
        df = se2**2 / ((v1 / n1) ** 2 / (n1 - 1) + (v2 / n2) ** 2 / (n2 - 1))
    t = np.where(se2 > 0, t, np.where(m1 == m2, 0.0, np.inf))
    df = np.where(se2 > 0, df, 1.0)
    return t, stats.t.ppf(1.0 - alpha / 2.0, df)


def f_test_counts(first: np.ndarray, second: np.ndarray, values: np.ndarray, alpha: float):
    """Vectorised two-sided variance-ratio test; returns ``(folded, ratio)``.

    ``folded = max(F / F_{1-a/2}, F_{a/2} / F)`` so rejection is ``folded > 1``.
    """
    n1, _, v1 = _moments_from_counts(first, values)
    n2, _, v2 = _moments_from_counts(second, values)
    d1, d2 = n1 - 1, n2 - 1
    hi = stats.f.ppf(1.0 - alpha / 2.0, d1, d2)
    lo = stats.f.ppf(alpha / 2.0, d1, d2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = v1 / v2
        folded = np.maximum(ratio / hi, lo / ratio)
    folded = np.where((v1 == 0) & (v2 == 0), 0.0, folded)
    return folded, ratio


def _real_sample(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size < 2:
        raise DataError(f"{name} needs at least 2 observations")
    return arr


def t_test(x: Sequence[float], y: Sequence[float], alpha: float = 0.05) -> TestResult:
    """Two-sided Welch t-test; the statistic stored is ``|t|``."""
    a, b = _real_sample(x, "x"), _real_sample(y, "y")
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    if va == 0 and vb == 0:
        raise DataError("both samples have zero variance")
    sa, sb = va / a.size, vb / b.size
    t = abs(float(b.mean() - a.mean())) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (a.size - 1) + sb**2 / (b.size - 1))
    thr = float(stats.t.ppf(1.0 - alpha / 2.0, df))
    return TestResult(float(t), thr, "t", alpha, bool(t > thr), {"df": float(df)})


def f_test(x: Sequence[float], y: Sequence[float], alpha: float = 0.05) -> TestResult:
    """Two-sided F-test on ``var(x) / var(y)``, folded so that ``reject = statistic > 1``."""
    a, b = _real_sample(x, "x"), _real_sample(y, "y")
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    if va == 0 or vb == 0:
        raise DataError("F-test needs positive variances")
    d1, d2 = a.size - 1, b.size - 1
    hi = float(stats.f.ppf(1.0 - alpha / 2.0, d1, d2))
    lo = float(stats.f.ppf(alpha / 2.0, d1, d2))
    ratio = va / vb
    folded = max(ratio / hi, lo / ratio)
    info = {"variance_ratio": ratio, "lower_critical": lo, "upper_critical": hi}
    return TestResult(folded, 1.0, "f", alpha, bool(folded > 1.0), info)


# -- AIC ------------------------------------------------------------------------

def _xlogx(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)


def delta_aic_counts(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Vectorised one-regime vs two-regime AIC difference for equal-size count rows."""
    first = np.asarray(first, dtype=float)
    second = np.asarray(second, dtype=float)
    n = first.sum(axis=-1)
    k = first.shape[-1]
    q, p = first / n[..., None], second / n[..., None]
    ll_h1 = n * np.sum(_xlogx(p) + _xlogx(q), axis=-1)
    ll_h0 = n * np.sum(2.0 * _xlogx((p + q) / 2.0), axis=-1)
    return -2.0 * (k - 1) - 2.0 * (ll_h0 - ll_h1)


def delta_aic(p_hat: CategoricalDistribution, q_hat: CategoricalDistribution) -> tuple[float, bool]:
    """``(delta_aic, change_point)`` with ``change_point = delta_aic > 0``."""
    if p_hat.k != q_hat.k:
        raise ConfigError("dimension mismatch")
    if p_hat.count <= 0 or p_hat.count != q_hat.count:
        raise DataError("delta_aic needs two empirical distributions with the same positive count")
    n = p_hat.count
    value = float(delta_aic_counts(np.round(q_hat.probs * n), np.round(p_hat.probs * n)))
    return value, value > 0


def aic_equivalent_threshold(k: int, n: int) -> float:
    """Relative-entropy level ``2 (k - 1) / n`` at which the AIC criterion switches."""
    if k < 2 or n < 1:
        raise ConfigError("need k >= 2 and n >= 1")
    return 2.0 * (k - 1) / n


# -- rolling scan ----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf"
        return repr(v)
    if hasattr(v, "isoformat"):
        return v.isoformat()
    return str(v)


@dataclass
class ScanResult:
    """Relative-entropy traces of a rolling scan.

    Position ``i`` compares the window ending at ``timestamps[i]`` (inclusive)
    with the window just before it (``re_prev``) and with the first window
    (``re_ref``). Detections use the trace selected by ``reference``.
    Successive positions share data and, with sign triples, the observations
    inside a window overlap too; the thresholds assume independent samples.
    """

    timestamps: list
    re_prev: np.ndarray
    re_ref: np.ndarray
    thresholds: dict[str, np.ndarray]
    detections: dict[str, np.ndarray]
    reference: str = "previous"
    warnings: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.timestamps)

    @property
    def statistic(self) -> np.ndarray:
        return self.re_prev if self.reference == "previous" else self.re_ref

    def detected_positions(self, method: str) -> np.ndarray:
        return np.flatnonzero(self.detections[method])

    def columns(self) -> list[str]:
        return (["timestamp", "re_prev", "re_ref"]
                + [f"{m}_threshold" for m in self.thresholds]
                + [f"{m}_detect" for m in self.detections])

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns()) + "\n")
        thr = list(self.thresholds.values())
        det = list(self.detections.values())
        for i, ts in enumerate(self.timestamps):
            row = [ts, self.re_prev[i], self.re_ref[i], *(t[i] for t in thr), *(d[i] for d in det)]
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text

    def to_dict(self) -> dict:
        def col(arr):
            return [_jsonable(v) for v in np.asarray(arr).tolist()]

        return {
            "timestamps": [_fmt(t) for t in self.timestamps],
            "re_prev": col(self.re_prev),
            "re_ref": col(self.re_ref),
            "thresholds": {m: col(v) for m, v in self.thresholds.items()},
            "detections": {m: [bool(x) for x in v] for m, v in self.detections.items()},
            "reference": self.reference,
            "warnings": list(self.warnings),
            "meta": self.meta,
        }

    def to_json(self, target=None) -> str:
        text = json.dumps(self.to_dict(), indent=1, sort_keys=False)
        if target is not None:
            Path(target).write_text(text)
        return text


def _preprocess(values: np.ndarray, preprocess: str, k: int | None):
    text = preprocess.strip().lower()
    if text in ("quantile", "quantile_bins"):
        if k is None:
            raise ConfigError("quantile preprocessing needs k")
        bins = quantile_bins(values, k)
        return discretize(values, bins), k, 0, {"cuts": list(bins.cuts)}
    if text.startswith("sign-triples") or text.startswith("sign_triples"):
        _, _, opt = text.partition(":")
        if opt not in ("", "merge"):
            raise ConfigError(f"unknown sign-triple option {opt!r}")
        enc = SignTripleEncoding(merge=opt == "merge")
        if k is not None and k != enc.k:
            raise ConfigError(f"{preprocess} produces {enc.k} categories, not k={k}")
        return encode_sign_triples(values, enc), enc.k, 3, {"merge": enc.merge}
    if text in ("labels", "none"):
        if k is None:
            raise ConfigError("label input needs k")
        return _labels(values, k), k, 0, {}
    raise ConfigError(f"unknown preprocessing {preprocess!r}")


def rolling_scan(series, window: int, k: int | None = None, preprocess: str = "quantile",
                 reference: str = "previous", methods=("asymptotic2",), alpha: float = 0.01,
                 timestamps: Sequence | None = None, step: int = 1, threads: int = 1) -> ScanResult:
    """Rolling relative-entropy scan.

    ``series`` holds raw values (``preprocess="quantile"`` fits cut-points on the
    whole series; ``"sign-triples[:merge]"`` encodes increments) or category
    labels (``preprocess="labels"``). Thresholds use ``n = m = window``.
    """
    if reference in ("previous_window",):
        reference = "previous"
    if reference in ("first_window",):
        reference = "first"
    if reference not in ("previous", "first"):
        raise ConfigError(f"reference must be 'previous' or 'first', got {reference!r}")
    if window < 1 or step < 1:
        raise ConfigError("window and step must be positive")
    values = np.asarray(series, dtype=float).ravel()
    if timestamps is not None and len(timestamps) != values.size:
        raise DataError("timestamps and series differ in length")
    labels, k, offset, pre_meta = _preprocess(values, preprocess, k)
    n_obs = labels.size
    if n_obs < 2 * window:
        raise DataError(f"need at least {2 * window} encoded observations, got {n_obs}")

    tags = [parse_method(m) for m in methods]
    if not tags:
        raise ConfigError("at least one method is required")
    onehot = np.zeros((n_obs + 1, k), dtype=np.int64)
    onehot[np.arange(1, n_obs + 1), labels] = 1
    cum = np.cumsum(onehot, axis=0)
    ends = np.arange(2 * window, n_obs + 1, step)
    cur = cum[ends] - cum[ends - window]
    prev = cum[ends - window] - cum[ends - 2 * window]
    first = np.broadcast_to(cum[window] - cum[0], cur.shape)

    re_prev = kl_rows(cur / window, prev / window)
    re_ref = kl_rows(cur / window, first / window)
    ref_counts = prev if reference == "previous" else first
    chosen = re_prev if reference == "previous" else re_ref

    warnings: list[str] = []
    thresholds: dict[str, np.ndarray] = {}
    detections: dict[str, np.ndarray] = {}
    empty_ref = ref_counts.min(axis=1) == 0
    for tag in tags:
        name = str(tag)
        if tag.data_beta:
            thr = _per_position_thresholds(tag, alpha, window, k, cur, ref_counts, threads)
            if np.any(empty_ref):
                warnings.append(f"{name}: {int(empty_ref.sum())} positions with an empty "
                                "reference category have no threshold")
        else:
            thr = np.full(ends.size, method_threshold(tag, alpha, n=window, k=k, m=window))
        with np.errstate(invalid="ignore"):
            det = np.isinf(chosen) | (chosen > thr)
        thresholds[name] = thr
        detections[name] = det
    if np.any(np.isinf(chosen)):
        warnings.append(f"{int(np.isinf(chosen).sum())} positions with infinite relative entropy")

    if timestamps is None:
        stamps = [int(e - 1 + offset) for e in ends]
    else:
        stamps = [timestamps[int(e - 1 + offset)] for e in ends]
    meta = {
        "window": window, "k": k, "alpha": alpha, "step": step, "preprocess": preprocess,
        "reference": reference, "methods": [str(t) for t in tags],
        "conjectured": [str(t) for t in tags if t.family is not None and t.family.needs_beta
                        and not t.data_beta and t.beta is None],
        **pre_meta,
    }
    return ScanResult(stamps, re_prev, re_ref, thresholds, detections, reference, warnings, meta)


def _per_position_thresholds(tag: MethodTag, alpha, window, k, cur, ref, threads) -> np.ndarray:
    def one(i):
        if ref[i].min() == 0:
            return math.nan
        beta = reverse_pinsker_coefficient(cur[i] / window, ref[i] / window)
        return method_threshold(tag, alpha, n=window, k=k, m=window, beta=beta)

    idx = range(cur.shape[0])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, idx, chunksize=64))
    else:
        out = [one(i) for i in idx]
    return np.asarray(out, dtype=float)
