"""Approximations of the law of the empirical relative entropy.

Two scales appear here and they are easy to mix up:

* concentration bounds (Sanov, Mardia, Agrawal, two-sample) and everything
  taking a :class:`BoundSpec` work with ``x`` in raw nats of ``D_KL``;
* :func:`kappa` and :func:`be_envelope` work on the ``2 n D_KL`` scale of the
  chi-squared limit.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .categorical import CategoricalDistribution
from .exceptions import ConfigError, NumericalValidityError, ZeroProbabilityError
from .numerics import chi2_cdf, chi2_quantile, chi2_sf, ln_gamma, solve_cubic

__all__ = [
    "BetaMode",
    "BoundSpec",
    "Envelope",
    "Family",
    "agrawal_bound",
    "asymptotic_threshold",
    "be2_quadratic_error",
    "be_envelope",
    "be_error_term",
    "bound_quantile",
    "bound_value",
    "kappa",
    "mardia_bound",
    "mardia_k_max",
    "sanov_bound",
    "twosample_bound",
    "twosample_sigma",
]


class Family(str, enum.Enum):
    ASYMPTOTIC1 = "asymptotic1"
    ASYMPTOTIC2 = "asymptotic2"
    BE_ENVELOPE = "be_envelope"
    BE2_QUADRATIC = "be2_quadratic"
    SANOV_BINOM = "sanov_binom"
    SANOV_SIMPLE = "sanov_simple"
    MARDIA = "mardia"
    AGRAWAL1 = "agrawal1"
    AGRAWAL2 = "agrawal2"
    AGRAWAL3 = "agrawal3"
    TWOSAMPLE1 = "twosample1"
    TWOSAMPLE2 = "twosample2"
    TWOSAMPLE3 = "twosample3"

    @property
    def two_sample(self) -> bool:
        return self in (Family.ASYMPTOTIC2, Family.BE2_QUADRATIC, *_TWOSAMPLE)

    @property
    def needs_beta(self) -> bool:
        return self in _TWOSAMPLE


_TWOSAMPLE = (Family.TWOSAMPLE1, Family.TWOSAMPLE2, Family.TWOSAMPLE3)


class BetaMode(str, enum.Enum):
    REVERSE_PINSKER = "reverse_pinsker"
    UNIT = "unit"


@dataclass(frozen=True)
class Envelope:
    lower: float
    upper: float

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper <= 1.0:
            raise NumericalValidityError(f"invalid envelope [{self.lower}, {self.upper}]")

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack


def _exp(logv: float) -> float:
    return math.exp(logv) if logv < 709.0 else math.inf


# -- asymptotics ------------------------------------------------------------

def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha!r}")


def _effective_size(n: int, m: int | None) -> float:
    """Scale ``c`` such that ``2 c D_KL`` is asymptotically chi-squared."""
    return float(n) if m is None else n * m / (n + m)


def asymptotic_threshold(alpha: float, k: int, n: int, m: int | None = None) -> float:
    """Upper ``alpha`` quantile of the chi-squared limit, in nats of ``D_KL``.

    One-sample: ``chi2_{k-1,1-alpha} / (2n)``; two-sample:
    ``chi2_{k-1,1-alpha} (n + m) / (2 n m)``.
    """
    _check_alpha(alpha)
    return chi2_quantile(1.0 - alpha, k - 1) / (2.0 * _effective_size(n, m))


# -- Berry-Esseen ---------------------------------------------------------------

def _full_support(p: CategoricalDistribution) -> np.ndarray:
    pr = p.probs
    if np.any(pr <= 0):
        raise ZeroProbabilityError("the Berry-Esseen terms need a distribution with full support")
    return pr


def be_error_term(n: int, p: CategoricalDistribution) -> float:
    """Uniform error ``E_{n,k}`` of the Berry-Esseen envelope."""
    pr = _full_support(p)
    k = pr.size
    const = 42.0 * (k - 1) ** 0.25 + 16.0
    return float(const * np.sum((1.0 - pr) ** 1.5 / np.sqrt(n * pr)))


def kappa(x: float, n: int, mu: float, direction: str) -> float:
    """Corrected chi-squared argument ``kappa^{up}`` or ``kappa^{down}`` at ``x``.

    ``x`` is on the ``2 n D`` scale and ``mu`` is the smallest category
    probability. Square of the smallest positive root ``y`` of
    ``y**2 -/+ y**3 / sqrt(mu n) = x``; ``inf`` when no positive root exists.
    """
    if direction not in ("up", "down"):
        raise ConfigError(f"direction must be 'up' or 'down', got {direction!r}")
    if not x > 0:
        raise ConfigError("kappa requires x > 0")
    if not 0 < mu <= 1:
        raise ConfigError("mu must lie in (0, 1]")
    a = (mu * n) ** -0.5
    if direction == "up":
        a = -a
    positive = [r for r in solve_cubic(a, x) if r > 0]
    if not positive:
        return math.inf
    return min(positive) ** 2


def be_envelope(x: float, n: int, p: CategoricalDistribution) -> Envelope:
    """Bracket on ``P(2 n D(p_hat || p) <= x)``, clamped to [0, 1]."""
    err = be_error_term(n, p)
    dof = p.k - 1
    mu = p.min_prob
    lo_arg = kappa(x, n, mu, "down")
    hi_arg = kappa(x, n, mu, "up")
    lower = chi2_cdf(lo_arg, dof) - err
    upper = chi2_cdf(hi_arg, dof) + err
    return Envelope(min(max(lower, 0.0), 1.0), min(max(upper, 0.0), 1.0))


def be2_quadratic_error(n: int, m: int, p: CategoricalDistribution) -> float:
    """Kolmogorov-distance bound for the two-sample quadratic (Pearson-type) statistic."""
    prefactor = (n * n + m * m) / (math.sqrt(n * m) * (n + m))
    return prefactor * be_error_term(n + m, p)


# -- one-sample concentration -----------------------------------------------------

def _log_binom(a: int, b: int) -> float:
    return ln_gamma(a + 1) - ln_gamma(b + 1) - ln_gamma(a - b + 1)


def sanov_bound(x: float, n: int, k: int, variant: str = "binom") -> float:
    """Method-of-types bound on ``P(D(p_hat||p) >= x)``; ``x`` in nats."""
    if n < 1 or k < 2:
        raise ConfigError("sanov_bound needs n >= 1 and k >= 2")
    if variant == "binom":
        logv = _log_binom(n + k - 1, k - 1) - n * x
    elif variant == "simple":
        logv = k * math.log(n + 1) - n * x
    else:
        raise ConfigError(f"unknown Sanov variant {variant!r}")
    return _exp(logv)


def mardia_k_max(n: int) -> float:
    return 2.0 + math.sqrt(n * math.e**3 / (2.0 * math.pi))


def _check_mardia(n: int, k: int) -> None:
    if not 3 <= k <= mardia_k_max(n):
        raise NumericalValidityError(
            f"Mardia's bound needs 3 <= k <= {mardia_k_max(n):.3f} at n={n}, got k={k}")


def _log_mardia(x: float, n: int, k: int) -> float:
    return (math.log(6.0) + 2.0 - 1.5 * math.log(math.pi)
            + 0.5 * k * (math.log(n) + 3.0 - math.log(2.0 * math.pi * k)) - n * x)


def mardia_bound(x: float, n: int, k: int) -> float:
    _check_mardia(n, k)
    return _exp(_log_mardia(x, n, k))


@functools.lru_cache(maxsize=64)
def _log_falling(n: int) -> np.ndarray:
    """``log(n! / ((n-j)! n^j))`` for ``j = 0..n``, as a running product."""
    out = np.zeros(n + 1)
    out[1:] = np.cumsum(np.log1p(-np.arange(n) / n))
    out.setflags(write=False)
    return out


def _log_mgf_sum(n: int, t: float) -> float:
    """``log sum_j n! / (n^{2j} (n-j)!) t^j``; ``t`` in ``[0, n]``."""
    if t <= 0:
        return 0.0
    j = np.arange(n + 1)
    return float(logsumexp(_log_falling(n) + j * math.log(t / n)))


def _minimize(f, lo: float, hi: float, extra=()) -> float:
    """Smallest value of ``f`` found on ``[lo, hi]``.

    Every evaluation of a Chernoff objective is itself a valid bound, so the
    search only needs to be good, not certified: dense scan, then
    golden-section refinement around the best grid point.
    """
    grid = np.linspace(lo, hi, 129)
    vals = np.array([f(t) for t in grid])
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > 1e-10 * max(1.0, abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return min(vals[i], fc, fd, *(f(t) for t in extra))


def _check_agrawal(x: float, n: int, k: int) -> None:
    if not x > (k - 1) / n:
        raise NumericalValidityError(f"Agrawal's bounds need x > (k-1)/n = {(k - 1) / n:.6g}, got {x!r}")


def _log_agrawal(x: float, n: int, k: int, variant: str) -> float:
    _check_agrawal(x, n, k)
    if variant == "m3":
        y = n * x
        return -y + (k - 1) * (1.0 + math.log(y / (k - 1)))
    t_star = n - (k - 1) / x
    if variant == "m2":
        return -t_star * x + (k - 1) * _log_mgf_sum(n, t_star)
    if variant == "m1":
        return _minimize(lambda t: -t * x + (k - 1) * _log_mgf_sum(n, t), 0.0, float(n), extra=(t_star,))
    raise ConfigError(f"unknown Agrawal variant {variant!r}")


def agrawal_bound(x: float, n: int, k: int, variant: str = "m3") -> float:
    """Moment-generating-function bounds ``M1 <= M2 <= M3`` on ``P(D(p_hat||p) >= x)``."""
    return _exp(_log_agrawal(x, n, k, variant))


# -- two-sample concentration -----------------------------------------------------

def _twosample_min_x(n: int, m: int, k: int, beta: float) -> float:
    return beta * (k - 1) * (m + n) / (m * n)


def twosample_sigma(x: float, n: int, m: int, k: int, beta: float) -> float:
    """Optimal Chernoff parameter of the two-sample bound."""
    if not beta > 0:
        raise ConfigError("beta must be positive")
    c = beta * (k - 1) / x
    a = 0.5 * (n + m) - c
    b = math.sqrt(c * c + 0.25 * (m - n) ** 2)
    # a - b rewritten as (a^2 - b^2) / (a + b) to avoid cancellation when m >> n
    return (n * m - (n + m) * c) / (a + b)


def _log_twosample(x: float, n: int, m: int, k: int, beta: float, variant: str) -> float:
    if not beta > 0:
        raise ConfigError("beta must be positive")
    x_min = _twosample_min_x(n, m, k, beta)
    if not x >= x_min * (1.0 - 1e-12):
        raise NumericalValidityError(
            f"two-sample bounds need x >= beta (k-1)(m+n)/(mn) = {x_min:.6g}, got {x!r}")
    sigma = max(twosample_sigma(x, n, m, k, beta), 0.0)
    if variant == "t3":
        return -sigma * x / beta - (k - 1) * (math.log1p(-sigma / m) + math.log1p(-sigma / n))

    def objective(s):
        return -s * x / beta + (k - 1) * (_log_mgf_sum(m, s) + _log_mgf_sum(n, s))

    if variant == "t2":
        return objective(sigma)
    if variant == "t1":
        return _minimize(objective, 0.0, float(min(m, n)), extra=(sigma,))
    raise ConfigError(f"unknown two-sample variant {variant!r}")


def twosample_bound(x: float, n: int, m: int, k: int, beta: float, variant: str = "t3") -> float:
    """Bounds on ``P(D(p_hat_n || q_hat_m) >= x)`` under a common law.

    ``beta`` is the reverse-Pinsker coefficient of the two empirical laws;
    ``beta = 1`` gives the conjectured (unproven) tighter variants.
    """
    return _exp(_log_twosample(x, n, m, k, beta, variant))


# -- unified interface --------------------------------------------------------

@dataclass(frozen=True)
class BoundSpec:
    """Selects one approximation of the null law of the relative entropy.

    ``beta`` overrides ``beta_mode``. With ``beta_mode="reverse_pinsker"`` and
    no explicit ``beta`` the coefficient must be supplied from data (see
    :meth:`with_beta`), or from ``p`` as its value at ``p_hat = q_hat = p``.
    """

    family: Family
    n: int
    k: int
    m: int | None = None
    beta_mode: BetaMode = BetaMode.UNIT
    beta: float | None = None
    p: CategoricalDistribution | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "beta_mode", BetaMode(self.beta_mode))
        if self.n < 1 or self.k < 2:
            raise ConfigError("BoundSpec needs n >= 1 and k >= 2")
        if self.family.two_sample and self.m is None:
            object.__setattr__(self, "m", self.n)
        if self.m is not None and self.m < 1:
            raise ConfigError("m must be positive")
        if self.p is not None and self.p.k != self.k:
            raise ConfigError("p has the wrong number of categories")
        if self.family in (Family.BE_ENVELOPE, Family.BE2_QUADRATIC) and self.p is None:
            raise ConfigError(f"{self.family.value} needs the generating distribution p")
        if self.family is Family.MARDIA:
            _check_mardia(self.n, self.k)
        if self.beta is not None and not self.beta > 0:
            raise ConfigError("beta must be positive")

    def with_beta(self, beta: float) -> "BoundSpec":
        return replace(self, beta=float(beta))

    @property
    def conjectured(self) -> bool:
        """True for two-sample concentration bounds evaluated with beta = 1."""
        return self.family.needs_beta and self.resolved_beta() == 1.0

    def resolved_beta(self) -> float:
        if self.beta is not None:
            return self.beta
        if self.beta_mode is BetaMode.UNIT:
            return 1.0
        if self.p is not None:
            pr = _full_support(self.p)
            return 2.0 / float(pr.min()) - 2.0
        raise ConfigError("reverse-Pinsker beta needs the empirical distributions; use with_beta()")

    def domain_start(self) -> float:
        """Infimum of the x-domain (nats) on which the family is defined."""
        if self.family in (Family.AGRAWAL1, Family.AGRAWAL2, Family.AGRAWAL3):
            return (self.k - 1) / self.n
        if self.family.needs_beta:
            return _twosample_min_x(self.n, self.m, self.k, self.resolved_beta())
        return 0.0

    def label(self) -> str:
        tag = self.family.value
        if self.family.needs_beta:
            tag += ":unit" if self.beta_mode is BetaMode.UNIT and self.beta is None else ":rp"
        return tag


def bound_value(x: float, spec: BoundSpec) -> float:
    """Value at ``x`` (nats) of the family's approximation of ``P(D >= x)``."""
    f, n, k, m = spec.family, spec.n, spec.k, spec.m
    if f in (Family.ASYMPTOTIC1, Family.ASYMPTOTIC2):
        c = _effective_size(n, m if f is Family.ASYMPTOTIC2 else None)
        return chi2_sf(max(2.0 * c * x, 0.0), k - 1)
    if f is Family.BE_ENVELOPE:
        if x <= 0:
            return 1.0
        return 1.0 - be_envelope(2.0 * n * x, n, spec.p).lower
    if f is Family.BE2_QUADRATIC:
        c = _effective_size(n, m)
        return min(1.0, chi2_sf(max(2.0 * c * x, 0.0), k - 1) + be2_quadratic_error(n, m, spec.p))
    if f is Family.SANOV_BINOM:
        return sanov_bound(x, n, k, "binom")
    if f is Family.SANOV_SIMPLE:
        return sanov_bound(x, n, k, "simple")
    if f is Family.MARDIA:
        return mardia_bound(x, n, k)
    if f in (Family.AGRAWAL1, Family.AGRAWAL2, Family.AGRAWAL3):
        return agrawal_bound(x, n, k, "m" + f.value[-1])
    return twosample_bound(x, n, m, k, spec.resolved_beta(), "t" + f.value[-1])


_X_CAP = 1e3


def bound_quantile(alpha: float, spec: BoundSpec) -> float:
    """Smallest ``x`` (nats, relative precision 1e-10) with ``bound_value(x) <= alpha``.

    Asymptotic families return :func:`asymptotic_threshold` directly.
    """
    _check_alpha(alpha)
    if spec.family is Family.ASYMPTOTIC1:
        return asymptotic_threshold(alpha, spec.k, spec.n)
    if spec.family is Family.ASYMPTOTIC2:
        return asymptotic_threshold(alpha, spec.k, spec.n, spec.m)

    start = spec.domain_start()
    lo = start * (1.0 + 1e-12) + 1e-300 if start > 0 else 0.0
    if lo > 0 and bound_value(lo, spec) <= alpha:
        return lo
    hi = max(2.0 * lo, 1e-3)
    while bound_value(hi, spec) > alpha:
        lo, hi = hi, 2.0 * hi
        if hi > _X_CAP:
            raise NumericalValidityError(
                f"{spec.family.value} never drops to alpha={alpha} below x={_X_CAP} nats")
    while hi - lo > 1e-10 * hi:
        mid = 0.5 * (lo + hi)
        if bound_value(mid, spec) <= alpha:
            hi = mid
        else:
            lo = mid
    return hi
