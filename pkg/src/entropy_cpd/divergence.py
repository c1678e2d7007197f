"""Entropy and divergence functionals on categorical distributions (natural logs)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .categorical import CategoricalDistribution
from .exceptions import ConfigError, ZeroProbabilityError

__all__ = [
    "DivergenceValue",
    "kl_rows",
    "l1_distance",
    "relative_entropy",
    "reverse_pinsker_coefficient",
    "shannon_entropy",
    "triangle_surrogate_bound",
]


@dataclass(frozen=True)
class DivergenceValue:
    """A relative entropy in nats; ``value`` is ``inf`` exactly when ``finite`` is False."""

    value: float
    finite: bool

    def __float__(self):
        return self.value


def _probs(p) -> np.ndarray:
    if isinstance(p, CategoricalDistribution):
        return p.probs
    arr = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ConfigError("probabilities must be finite and nonnegative")
    return arr


def _check_k(p: np.ndarray, q: np.ndarray) -> None:
    if p.shape[-1] != q.shape[-1]:
        raise ConfigError(f"dimension mismatch: {p.shape[-1]} vs {q.shape[-1]} categories")


def shannon_entropy(p) -> float:
    """``-sum p_i log p_i`` with ``0 log 0 = 0``."""
    pr = _probs(p)
    nz = pr[pr > 0]
    return float(-np.sum(nz * np.log(nz)))


def kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise relative entropy ``D(p_row || q_row)`` for 2-D arrays of probabilities.

    Rows where ``p`` puts mass on a category with ``q = 0`` give ``inf``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_k(p, q)
    pos = p > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pos, p * (np.log(np.where(pos, p, 1.0)) - np.log(q)), 0.0)
    return np.sum(terms, axis=-1)


def relative_entropy(p, q) -> DivergenceValue:
    """Kullback-Leibler divergence ``D(p || q)``."""
    pr, qr = _probs(p), _probs(q)
    _check_k(pr, qr)
    support = pr > 0
    if np.any(qr[support] == 0):
        return DivergenceValue(math.inf, False)
    ps, qs = pr[support], qr[support]
    val = float(np.sum(ps * np.log(ps / qs)))
    # rounding can leave a -1e-17 residue when p == q
    return DivergenceValue(max(val, 0.0), True)


def l1_distance(p, q) -> float:
    pr, qr = _probs(p), _probs(q)
    _check_k(pr, qr)
    return float(np.sum(np.abs(pr - qr)))


def reverse_pinsker_coefficient(p, q) -> float:
    """``2 / min q - 2 min(p / q)``, the factor coupling ``D(p||q)`` to one-sample terms."""
    pr, qr = _probs(p), _probs(q)
    _check_k(pr, qr)
    mq = float(qr.min())
    if mq <= 0:
        raise ZeroProbabilityError("reference distribution has an empty category (min q = 0)")
    return 2.0 / mq - 2.0 * float(np.min(pr / qr))


def triangle_surrogate_bound(p, q, r) -> float:
    """Upper bound ``beta(p, q) * (D(p||r) + D(q||r))`` on ``D(p||q)``.

    Only this orientation is provided, although the bound also holds with
    the arguments of either right-hand divergence swapped.
    """
    beta = reverse_pinsker_coefficient(p, q)
    total = relative_entropy(p, r).value + relative_entropy(q, r).value
    return beta * total
