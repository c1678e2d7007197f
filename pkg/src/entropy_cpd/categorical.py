"""Categorical distributions, discretization of raw series and seeded sampling."""

from __future__ import annotations

import csv
import datetime as dt
import io
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import ConfigError, DataError

__all__ = [
    "ALTERNATION",
    "TREND",
    "BinningScheme",
    "CategoricalDistribution",
    "SignTripleEncoding",
    "aggregate_series",
    "discretize",
    "empirical_distribution",
    "encode_sign_triples",
    "quantile_bins",
    "ranked_exponential",
    "read_series_csv",
    "sample_categorical",
    "sample_counts",
]

_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CategoricalDistribution:
    """A probability vector over ``k >= 2`` categories.

    ``count`` is the number of observations behind an empirical distribution,
    and 0 for a theoretical one.
    """

    probs: np.ndarray
    count: int = 0

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float).ravel()
        if probs.size < 2:
            raise ConfigError("a categorical distribution needs k >= 2 categories")
        if np.any(probs < -_TOL) or np.any(probs > 1 + _TOL) or not np.all(np.isfinite(probs)):
            raise ConfigError("probabilities must lie in [0, 1]")
        if abs(probs.sum() - 1.0) > _TOL:
            raise ConfigError(f"probabilities sum to {probs.sum()!r}, not 1")
        if self.count < 0:
            raise ConfigError("count must be nonnegative")
        if self.count > 0:
            scaled = probs * self.count
            if np.max(np.abs(scaled - np.round(scaled))) > 1e-9 * self.count:
                raise ConfigError("empirical probabilities must be multiples of 1/count")
        probs = np.clip(probs, 0.0, 1.0)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "count", int(self.count))

    @classmethod
    def uniform(cls, k: int) -> "CategoricalDistribution":
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def from_counts(cls, counts) -> "CategoricalDistribution":
        counts = np.asarray(counts)
        n = int(counts.sum())
        if n <= 0:
            raise DataError("cannot build an empirical distribution from zero observations")
        return cls(counts / n, count=n)

    @property
    def k(self) -> int:
        return self.probs.size

    @property
    def min_prob(self) -> float:
        return float(self.probs.min())

    def __eq__(self, other):
        if not isinstance(other, CategoricalDistribution):
            return NotImplemented
        return self.count == other.count and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash((self.count, self.probs.tobytes()))

    def __repr__(self):
        return f"CategoricalDistribution(probs={np.round(self.probs, 6).tolist()}, count={self.count})"


@dataclass(frozen=True)
class BinningScheme:
    """Ordered cut-points. Category of ``v`` is the number of cuts strictly below ``v``."""

    cuts: tuple[float, ...]

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cuts)
        if not cuts:
            raise ConfigError("a binning scheme needs at least one cut")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ConfigError("cuts must be strictly increasing")
        object.__setattr__(self, "cuts", cuts)

    @property
    def k(self) -> int:
        return len(self.cuts) + 1


def quantile_bins(data: Sequence[float], k: int) -> BinningScheme:
    """Cut-points at the empirical ``j/k`` quantiles (linear interpolation)."""
    if k < 2:
        raise ConfigError("k must be at least 2")
    arr = np.asarray(data, dtype=float).ravel()
    if arr.size == 0:
        raise DataError("cannot fit quantile bins on empty data")
    if not np.all(np.isfinite(arr)):
        raise DataError("data contain non-finite values")
    if np.unique(arr).size < k:
        raise DataError(f"need at least {k} distinct values for {k} quantile bins")
    cuts = np.quantile(arr, np.arange(1, k) / k)
    if np.any(np.diff(cuts) <= 0):
        raise DataError("quantile cut-points collide; data are too concentrated for k bins")
    return BinningScheme(tuple(cuts))


def discretize(data: Sequence[float], bins: BinningScheme) -> np.ndarray:
    """Category index of each value; a value equal to a cut goes to the lower bin."""
    arr = np.asarray(data, dtype=float).ravel()
    return np.searchsorted(np.asarray(bins.cuts), arr, side="left").astype(np.int64)


def _labels(labels, k: int) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        as_int = arr.astype(np.int64)
        if not np.array_equal(as_int, arr):
            raise DataError("labels must be integers")
        arr = as_int
    arr = arr.astype(np.int64).ravel()
    if arr.size and (arr.min() < 0 or arr.max() >= k):
        raise DataError(f"labels must lie in [0, {k - 1}]")
    return arr


def empirical_distribution(labels: Sequence[int], k: int) -> CategoricalDistribution:
    arr = _labels(labels, k)
    if arr.size == 0:
        raise DataError("empirical distribution of an empty sequence")
    return CategoricalDistribution.from_counts(np.bincount(arr, minlength=k))


def ranked_exponential(phi: float, k: int) -> CategoricalDistribution:
    """Finite discrete exponential: ``p_i`` proportional to ``exp(-phi * i)``, ``i = 1..k``."""
    if k < 2:
        raise ConfigError("k must be at least 2")
    logw = -phi * np.arange(1, k + 1, dtype=float)
    logw -= logw.max()
    w = np.exp(logw)
    return CategoricalDistribution(w / w.sum())


def sample_categorical(dist: CategoricalDistribution, n: int, stream: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. category labels drawn from ``dist``."""
    if n < 0:
        raise ConfigError("n must be nonnegative")
    if n == 0:
        return np.empty(0, dtype=np.int64)
    return stream.choice(dist.k, size=n, p=dist.probs).astype(np.int64)


def sample_counts(dist: CategoricalDistribution, n: int, stream: np.random.Generator) -> np.ndarray:
    """Category counts of ``n`` i.i.d. draws.

    numpy's multinomial sampler works by conditional binomials, so the cost is
    O(k) whatever ``n``.
    """
    if n < 0:
        raise ConfigError("n must be nonnegative")
    return stream.multinomial(n, dist.probs)


# merged sign-triple layout: trend, alternation, then the rest in binary order
TREND = 0
ALTERNATION = 1
_MERGED = {0b000: TREND, 0b111: TREND, 0b010: ALTERNATION, 0b101: ALTERNATION,
           0b001: 2, 0b011: 3, 0b100: 4, 0b110: 5}
_MERGED_LUT = np.array([_MERGED[c] for c in range(8)], dtype=np.int64)


@dataclass(frozen=True)
class SignTripleEncoding:
    """Up/down patterns of three consecutive increments.

    With ``merge=False`` a triple ``(b1, b2, b3)`` maps to ``4*b1 + 2*b2 + b3``.
    With ``merge=True`` the two monotone triples share class 0, the two strict
    alternations share class 1, and 001, 011, 100, 110 become 2..5.
    """

    merge: bool = False

    @property
    def k(self) -> int:
        return 6 if self.merge else 8


def encode_sign_triples(series: Sequence[float], enc: SignTripleEncoding = SignTripleEncoding()) -> np.ndarray:
    """Encode overlapping windows of increment signs (stride 1).

    A zero increment counts as "down". Successive outputs share two of their
    three increments, so they are NOT independent observations.
    """
    arr = np.asarray(series, dtype=float).ravel()
    if arr.size < 4:
        raise DataError("sign-triple encoding needs at least 4 observations")
    up = (np.diff(arr) > 0).astype(np.int64)
    codes = 4 * up[:-2] + 2 * up[1:-1] + up[2:]
    return _MERGED_LUT[codes] if enc.merge else codes


def _as_datetime(value) -> dt.datetime:
    if isinstance(value, dt.datetime):
        return value
    if isinstance(value, dt.date):
        return dt.datetime(value.year, value.month, value.day)
    if isinstance(value, np.datetime64):
        return value.astype("datetime64[us]").astype(dt.datetime)
    return dt.datetime.fromisoformat(str(value))


def aggregate_series(timestamps: Sequence, values: Sequence[float], rule: str = "daily"):
    """Mean of ``values`` per calendar day or ISO week.

    Returns ``(bucket_starts, means)``; buckets without observations do not appear.
    """
    if rule not in ("daily", "weekly"):
        raise ConfigError(f"unknown aggregation rule {rule!r}")
    times = [_as_datetime(t) for t in timestamps]
    vals = np.asarray(values, dtype=float).ravel()
    if len(times) != vals.size:
        raise DataError("timestamps and values differ in length")
    if any(b < a for a, b in zip(times, times[1:])):
        raise DataError("timestamps must be sorted ascending")

    if rule == "daily":
        def key(t):
            return t.date()
    else:
        def key(t):
            return t.date() - dt.timedelta(days=t.weekday())

    out_t, out_v = [], []
    idx = itertools.groupby(range(len(times)), key=lambda i: key(times[i]))
    for bucket, members in idx:
        members = list(members)
        out_t.append(bucket)
        out_v.append(float(np.mean(vals[members])))
    return out_t, np.asarray(out_v)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _is_date(s: str) -> bool:
    try:
        dt.datetime.fromisoformat(s)
    except ValueError:
        return False
    return True


def read_series_csv(source) -> tuple[list | None, np.ndarray]:
    """Read a ``date,value`` or single ``value`` CSV; the header row is optional.

    ``source`` is a path or an open text stream. Returns ``(timestamps, values)``
    with ``timestamps = None`` for single-column files.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError("empty CSV input")
    rows = [[c.strip() for c in r] for r in rows]
    width = len(rows[0])
    if width not in (1, 2):
        raise DataError(f"expected 1 or 2 CSV columns, found {width}")
    if not _is_number(rows[0][-1]):
        rows = rows[1:]
    if not rows:
        raise DataError("CSV contains a header but no data")
    if any(len(r) != width for r in rows):
        raise DataError("ragged CSV rows")
    try:
        values = np.array([float(r[-1]) for r in rows])
    except ValueError as exc:
        raise DataError(f"non-numeric value in CSV: {exc}") from None
    if width == 1:
        return None, values
    if not all(_is_date(r[0]) for r in rows):
        raise DataError("first column must hold ISO-8601 dates")
    return [_parse_stamp(r[0]) for r in rows], values


def _parse_stamp(s: str):
    # plain dates stay dates so that outputs echo the input format
    stamp = dt.datetime.fromisoformat(s)
    return stamp.date() if len(s) == 10 else stamp
