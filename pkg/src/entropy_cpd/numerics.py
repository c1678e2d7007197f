"""Special functions and the exact solver for ``a*x**3 + x**2 - d = 0``."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .exceptions import DomainError

__all__ = [
    "Branch",
    "CubicRoots",
    "chi2_cdf",
    "chi2_quantile",
    "chi2_sf",
    "ln_gamma",
    "solve_cubic",
]


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"ln_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def _check_dof(dof) -> None:
    if int(dof) != dof or dof < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {dof!r}")


def chi2_cdf(x, dof: int):
    """CDF of the chi-squared law, i.e. the regularized gamma ``P(dof/2, x/2)``.

    Accepts scalars or arrays; ``x = +inf`` maps to 1.
    """
    _check_dof(dof)
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("chi2_cdf requires x >= 0")
    out = special.gammainc(dof / 2.0, arr / 2.0)
    return float(out) if out.ndim == 0 else out


def chi2_sf(x, dof: int):
    """Upper tail ``1 - chi2_cdf``, computed without cancellation."""
    _check_dof(dof)
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("chi2_sf requires x >= 0")
    out = special.gammaincc(dof / 2.0, arr / 2.0)
    return float(out) if out.ndim == 0 else out


def _chi2_logpdf(x: float, dof: int) -> float:
    h = dof / 2.0
    return (h - 1.0) * math.log(x) - x / 2.0 - h * math.log(2.0) - math.lgamma(h)


def chi2_quantile(p: float, dof: int) -> float:
    """Inverse of :func:`chi2_cdf` for ``0 < p < 1``."""
    _check_dof(dof)
    if not 0.0 < p < 1.0:
        raise DomainError(f"chi2_quantile requires 0 < p < 1, got {p!r}")
    x = 2.0 * float(special.gammaincinv(dof / 2.0, p))
    # two Newton steps on the CDF
    for _ in range(2):
        if x <= 0:
            break
        err = chi2_cdf(x, dof) - p
        step = err / math.exp(_chi2_logpdf(x, dof))
        if not math.isfinite(step):
            break
        x = max(x - step, x / 2.0)
    return x


class Branch(str, enum.Enum):
    THREE_REAL = "three-real"
    ONE_REAL = "one-real"


@dataclass(frozen=True)
class CubicRoots:
    """Real roots of ``a*x**3 + x**2 - d`` in descending order."""

    roots: tuple[float, ...]
    branch: Branch

    def __iter__(self):
        return iter(self.roots)

    def __len__(self):
        return len(self.roots)


def _polish(a: float, d: float, x: float) -> float:
    """Newton refinement on the (undepressed) cubic; keeps the best iterate."""
    best, best_res = x, abs((a * x + 1.0) * x * x - d)
    for _ in range(4):
        deriv = (3.0 * a * x + 2.0) * x
        if deriv == 0.0 or not math.isfinite(deriv):
            break
        x = x - ((a * x + 1.0) * x * x - d) / deriv
        res = abs((a * x + 1.0) * x * x - d)
        if res < best_res:
            best, best_res = x, res
        if res == 0.0:
            break
    return best


def solve_cubic(a: float, d: float) -> CubicRoots:
    """All real solutions of ``a*x**3 + x**2 - d = 0`` for ``d > 0``.

    ``a = 0`` degenerates to ``x**2 = d`` and returns ``(sqrt(d), -sqrt(d))``
    (the third root has escaped to infinity), reported on the three-real branch.
    For ``a != 0`` the trigonometric form is used when ``d <= 4 / (27 a**2)``
    and Cardano's single real root otherwise. Roots are Newton-polished.
    """
    if not d > 0:
        raise DomainError(f"solve_cubic requires d > 0, got {d!r}")
    if a == 0.0:
        r = math.sqrt(d)
        return CubicRoots((r, -r), Branch.THREE_REAL)

    s = 27.0 * a * a * d
    if s <= 4.0:
        arg = min(1.0, max(-1.0, (s - 2.0) / 2.0))
        theta = math.acos(arg) / 3.0
        inv = 1.0 / (3.0 * a)
        raw = [inv * (2.0 * math.cos(theta - 2.0 * r * math.pi / 3.0) - 1.0) for r in range(3)]
        if s < 1.0:
            # small |a|: the two roots near +/-sqrt(d) cancel catastrophically
            # in the trigonometric form, so deflate by the far root instead
            far = _polish(a, d, max(raw, key=abs))
            raw = [far, *_deflated_pair(a, d, far)]
        roots = sorted((_polish(a, d, x) for x in raw), reverse=True)
        return CubicRoots(tuple(roots), Branch.THREE_REAL)

    # depressed cubic y**3 + p y + q with x = y - 1/(3a)
    q = 2.0 / (27.0 * a**3) - d / a
    disc = math.sqrt((27.0 * d * d * a * a - 4.0 * d) / (108.0 * a**4))
    x = np.cbrt(-q / 2.0 + disc) + np.cbrt(-q / 2.0 - disc) - 1.0 / (3.0 * a)
    return CubicRoots((_polish(a, d, float(x)),), Branch.ONE_REAL)


def _deflated_pair(a: float, d: float, far: float) -> tuple[float, float]:
    # Vieta with zero pairwise-sum: the remaining roots have
    # sum -d / (a far^2) and product d / (a far), both cancellation-free
    total = -d / (a * far * far)
    prod = d / (a * far)
    disc = math.sqrt(max(total * total - 4.0 * prod, 0.0))
    q = -0.5 * (-total + math.copysign(disc, -total))
    return q, prod / q
