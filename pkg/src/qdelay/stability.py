"""Hopf-bifurcation machinery for both queue models.

Linearising either model about the symmetric equilibrium and uncoupling the
sum and difference of the perturbations leaves a scalar transcendental
characteristic equation for the difference mode.  This module evaluates the
corresponding residuals, computes critical delays (in closed form for the
constant-delay model, by scan + bisection for the moving-average model),
tracks characteristic roots with Newton iteration, evaluates the analytic
root-crossing rates under small delay perturbations, and sweeps Hopf curves
over the arrival rate.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .models import CONSTANT, MOVING_AVERAGE

__all__ = [
    "ConvergenceError",
    "HopfPoint",
    "PerturbationQuery",
    "characteristic_residual_constant",
    "characteristic_residual_ma",
    "critical_delay_constant",
    "critical_delay_ma",
    "hopf_curve",
    "hopf_frequency_ma",
    "ma_candidate_roots",
    "ma_threshold_function",
    "r2_constant",
    "r2_ma",
    "root_track",
]

# Tolerance separating true moving-average roots from extraneous ones: true
# roots satisfy the unsquared sine/cosine pair to ~1e-8 after bisection,
# extraneous candidates miss the cosine condition by ~0.4.
MA_VALIDATION_TOL = 5e-3

_MA_SCAN_POINTS = 2000


class ConvergenceError(RuntimeError):
    """Newton root tracking failed to converge."""


@dataclass(frozen=True)
class HopfPoint:
    """A point (lam, mu, delta_cr, omega) on a Hopf curve.

    ``branch`` 0 is the smallest positive critical delay.  ``validated``
    records whether a moving-average candidate satisfies both unsquared
    imaginary-axis conditions (always True for the constant-delay model).
    """

    lam: float
    mu: float
    delta_cr: float
    omega: float
    branch: int = 0
    validated: bool = True


@dataclass(frozen=True)
class PerturbationQuery:
    """Delay perturbation around a Hopf point.

    ``delta1`` is the full (signed) perturbation of the delay away from
    ``delta0``; the bookkeeping small parameter is absorbed into it.
    """

    delta0: float
    delta1: float
    omega: float

    def __post_init__(self):
        if not (math.isfinite(self.delta0) and self.delta0 > 0.0):
            raise ValueError("delta0 must be finite and > 0")


def _validate_rates(lam: float, mu: float) -> None:
    if not (math.isfinite(lam) and lam > 0.0):
        raise ValueError("lam must be finite and > 0")
    if not (math.isfinite(mu) and mu > 0.0):
        raise ValueError("mu must be finite and > 0")


def critical_delay_constant(lam: float, mu: float) -> HopfPoint | None:
    """Closed-form critical delay of the constant-delay model.

    For lam > 2 mu the difference mode loses stability at
    ``delta_cr = arccos(-2 mu / lam) / omega`` with
    ``omega = sqrt(lam^2 - 4 mu^2) / 2``; for lam <= 2 mu there is no
    pure-imaginary crossing and the equilibrium is stable for every delay,
    so None is returned.
    """
    _validate_rates(lam, mu)
    if lam <= 2.0 * mu:
        return None
    omega = 0.5 * math.sqrt(lam * lam - 4.0 * mu * mu)
    delta_cr = math.acos(-2.0 * mu / lam) / omega
    return HopfPoint(lam=lam, mu=mu, delta_cr=delta_cr, omega=omega)


def characteristic_residual_constant(r: complex, lam: float, mu: float,
                                     delta: float) -> complex:
    """Residual r + (lam/2) e^(-r delta) + mu of the difference mode."""
    return r + 0.5 * lam * cmath.exp(-r * delta) + mu


def characteristic_residual_ma(r: complex, lam: float, mu: float,
                               delta: float) -> complex:
    """Cleared-form residual r^2 + mu r - (lam / 2 delta)(e^(-r delta) - 1).

    Clearing the 1/r pole makes r = 0 a trivial root of this form; it is
    not a root of the underlying characteristic equation and is excluded
    from Hopf candidates.
    """
    if delta <= 0.0:
        raise ValueError("delta must be > 0")
    return r * r + mu * r - (0.5 * lam / delta) * (cmath.exp(-r * delta) - 1.0)


def hopf_frequency_ma(lam: float, mu: float, delta: float) -> float:
    """Crossing frequency sqrt(lam / delta - mu^2) of the moving-average model."""
    _validate_rates(lam, mu)
    if delta <= 0.0:
        raise ValueError("delta must be > 0")
    arg = lam / delta - mu * mu
    if arg <= 0.0:
        raise ValueError("no real crossing frequency: lam / delta <= mu^2")
    return math.sqrt(arg)


def ma_threshold_function(delta, lam: float, mu: float):
    """Moving-average threshold function whose zeros are critical-delay candidates.

    f(delta) = sin(delta * omega) + (2 mu delta / lam) * omega with
    omega = sqrt(lam / delta - mu^2); defined for 0 < delta < lam / mu^2.
    Accepts scalar or array delta.
    """
    _validate_rates(lam, mu)
    d = np.asarray(delta, dtype=float)
    if np.any(d <= 0.0) or np.any(lam / d <= mu * mu):
        raise ValueError("delta must lie in (0, lam / mu^2)")
    omega = np.sqrt(lam / d - mu * mu)
    f = np.sin(d * omega) + (2.0 * mu * d / lam) * omega
    return float(f) if np.isscalar(delta) else f


def _bisect(f, lo: float, hi: float, f_lo: float, max_iter: int = 200) -> float:
    # refine to float resolution; the residual at i*omega is steep in delta
    # for large lam, so a coarse root would not sit on the imaginary axis
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            return mid
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_lo < 0.0) == (f_mid < 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ma_candidate_roots(lam: float, mu: float,
                       bracket: tuple[float, float] | None = None) -> list[HopfPoint]:
    """All sign-change roots of the moving-average threshold function.

    Scans a geometric grid over (1e-4 lam/mu^2, lam/mu^2), or the given
    bracket intersected with that domain, refines each sign change by
    bisection to an interval below 1e-10, and flags each candidate as
    validated when both unsquared conditions

        cos(omega delta) = 1 - 2 delta omega^2 / lam
        sin(omega delta) = -2 delta mu omega / lam

    hold within ``MA_VALIDATION_TOL`` (squaring them introduces extraneous
    roots, which fail the cosine condition by a wide margin).  The trivial
    omega = 0 root at the domain boundary never produces a sign change.
    """
    _validate_rates(lam, mu)
    delta_max = lam / (mu * mu)
    lo, hi = (1e-4 * delta_max, delta_max) if bracket is None else bracket
    lo = max(float(lo), 1e-9 * delta_max)
    hi = min(float(hi), (1.0 - 1e-9) * delta_max)
    if not lo < hi:
        return []
    grid = np.geomspace(lo, hi, _MA_SCAN_POINTS)
    f_vals = ma_threshold_function(grid, lam, mu)

    def f(d: float) -> float:
        return ma_threshold_function(d, lam, mu)

    points: list[HopfPoint] = []
    for i in np.nonzero(np.sign(f_vals[:-1]) * np.sign(f_vals[1:]) < 0.0)[0]:
        delta = _bisect(f, float(grid[i]), float(grid[i + 1]), float(f_vals[i]))
        omega = hopf_frequency_ma(lam, mu, delta)
        cos_err = abs(math.cos(omega * delta) - (1.0 - 2.0 * delta * omega * omega / lam))
        sin_err = abs(math.sin(omega * delta) + 2.0 * delta * mu * omega / lam)
        ok = cos_err <= MA_VALIDATION_TOL and sin_err <= MA_VALIDATION_TOL
        points.append(HopfPoint(lam=lam, mu=mu, delta_cr=delta, omega=omega,
                                branch=len(points), validated=ok))
    return points


def critical_delay_ma(lam: float, mu: float,
                      bracket: tuple[float, float] | None = None) -> list[HopfPoint]:
    """Validated moving-average critical delays, sorted and branch-indexed.

    Returns an empty list when no validated root lies in range.
    """
    validated = [p for p in ma_candidate_roots(lam, mu, bracket) if p.validated]
    return [replace(p, branch=i) for i, p in enumerate(validated)]


def r2_constant(query: PerturbationQuery, lam: float, mu: float) -> float:
    """Real part acquired by the critical root pair of the constant-delay
    model under a delay perturbation delta0 -> delta0 + delta1.

    The denominator is a sum of positive terms, so the sign always equals
    the sign of delta1: increasing the delay pushes the pair rightward.
    """
    d0 = query.delta0
    w = query.omega
    return 4.0 * w * w * query.delta1 / (8.0 * d0 * mu + d0 * d0 * lam * lam + 4.0)


def r2_ma(query: PerturbationQuery, lam: float, mu: float) -> float:
    """Real part acquired by the critical root pair of the moving-average
    model under a delay perturbation delta0 -> delta0 + delta1.

    The sign equals sign(delta1) * sign(delta0 omega^2 - mu lam); see
    ``root_track`` for a direct numerical check of crossing directions.
    """
    d0 = query.delta0
    w2 = query.omega * query.omega
    num = 2.0 * query.delta1 * w2 * (2.0 * d0 * w2 - 2.0 * mu * lam)
    den = (8.0 * d0 * d0 * mu * w2 + 12.0 * d0 * w2
           + 4.0 * d0 * lam * mu + d0 * lam * lam + 4.0 * lam)
    return num / den


def _residual_and_derivative(model: str, lam: float, mu: float, delta: float):
    if model == CONSTANT:
        if delta < 0.0:
            raise ValueError("delta must be >= 0 for the constant-delay model")

        def res(r: complex) -> complex:
            return characteristic_residual_constant(r, lam, mu, delta)

        def dres(r: complex) -> complex:
            return 1.0 - 0.5 * lam * delta * cmath.exp(-r * delta)

    elif model == MOVING_AVERAGE:
        if delta <= 0.0:
            raise ValueError("delta must be > 0 for the moving-average model")

        def res(r: complex) -> complex:
            return characteristic_residual_ma(r, lam, mu, delta)

        def dres(r: complex) -> complex:
            return 2.0 * r + mu + 0.5 * lam * cmath.exp(-r * delta)

    else:
        raise ValueError(f"unknown model kind: {model!r}")
    return res, dres


def root_track(model: str, lam: float, mu: float, delta: float,
               seed: complex, tol: float = 1e-12, max_iter: int = 100) -> complex:
    """Newton iteration on the characteristic residual from a seed root.

    Seeding with i*omega of a nearby Hopf point tracks the critical pair as
    the delay moves off the threshold, giving a numerical oracle for the
    crossing direction.  The residual derivative is analytic.

    Raises
    ------
    ConvergenceError
        No root with |residual| < tol within ``max_iter`` iterations, or a
        singular derivative at an iterate.
    """
    _validate_rates(lam, mu)
    res, dres = _residual_and_derivative(model, lam, mu, delta)
    r = complex(seed)
    if not (math.isfinite(r.real) and math.isfinite(r.imag)):
        raise ValueError("seed must be finite")
    for _ in range(max_iter):
        value = res(r)
        if abs(value) < tol:
            return r
        slope = dres(r)
        if slope == 0.0:
            raise ConvergenceError(f"singular residual derivative at {r}")
        r = r - value / slope
    if abs(res(r)) < tol:
        return r
    raise ConvergenceError(
        f"Newton did not reach |residual| < {tol:g} in {max_iter} iterations")


def hopf_curve(model: str, mu: float, lambda_range: tuple[float, float],
               n_points: int) -> list[HopfPoint]:
    """Critical delay versus arrival rate on a linear lambda grid.

    For the constant-delay model the closed form is evaluated where
    lam > 2 mu; for the moving-average model the smallest validated branch
    is used.  Grid points without a (validated) root emit nothing.
    """
    if model not in (CONSTANT, MOVING_AVERAGE):
        raise ValueError(f"unknown model kind: {model!r}")
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    lo, hi = lambda_range
    if not (0.0 < lo <= hi):
        raise ValueError("lambda_range must satisfy 0 < lo <= hi")
    lams = np.linspace(lo, hi, n_points)
    points: list[HopfPoint] = []
    for lam in lams:
        if model == CONSTANT:
            point = critical_delay_constant(float(lam), mu)
            if point is not None:
                points.append(point)
        else:
            roots = critical_delay_ma(float(lam), mu)
            if roots:
                points.append(roots[0])
    return points
