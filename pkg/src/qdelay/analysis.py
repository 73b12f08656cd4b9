"""Simulation-side diagnostics: regime classification, conservation checks,
and parameter sweeps that confront analytic thresholds with integrated
trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import models, stability
from .dde import NumericalFailureError, Trajectory

__all__ = [
    "FAILED",
    "INCONCLUSIVE",
    "NOT_APPLICABLE",
    "OSCILLATORY",
    "SYNCHRONIZED",
    "StabilityVerdict",
    "SweepRow",
    "analytic_threshold",
    "classify_stability",
    "conservation_check",
    "default_thresholds",
    "locate_transition",
    "sweep",
]

SYNCHRONIZED = "synchronized"
OSCILLATORY = "oscillatory"
INCONCLUSIVE = "inconclusive"
NOT_APPLICABLE = "not-applicable"
FAILED = "failed"


@dataclass(frozen=True)
class StabilityVerdict:
    """Tail-amplitude classification of a two-queue trajectory.

    ``classification`` is synchronized iff the tail amplitude of q1 - q2 is
    below ``eps_sync``, oscillatory iff above ``eps_osc``, else
    inconclusive.  ``growing`` reports whether the amplitude over the last
    quarter of the run exceeds that of the previous quarter, to help
    resolve near-threshold cases; it never changes the classification.
    """

    classification: str
    amplitude: float
    burn_in: float
    horizon: float
    growing: bool


@dataclass(frozen=True)
class SweepRow:
    """One (lam, mu, delta) cell of a regime sweep."""

    lam: float
    mu: float
    delta: float
    predicted: str
    observed: str
    amplitude: float
    agree: bool
    growing: bool | None = None
    error: str | None = None


def default_thresholds(params: models.ModelParams) -> tuple[float, float]:
    """(eps_sync, eps_osc) = (0.1%, 1%) of the equilibrium queue length.

    Sustained limit cycles swing by order-one fractions of the equilibrium
    while decayed transients sit far below 0.1% of it, so the pair cleanly
    separates the regimes away from the threshold.
    """
    q = models.equilibrium(params)
    return 1e-3 * q, 1e-2 * q


def classify_stability(traj: Trajectory, burn_in_fraction: float,
                       eps_sync: float, eps_osc: float) -> StabilityVerdict:
    """Classify a trajectory from the amplitude of q1 - q2 after a burn-in.

    The amplitude is max - min of the difference over the post-burn-in
    nodes.  The horizon should cover at least ~20 relaxation times so the
    tail reflects the asymptotic regime.
    """
    if not 0.0 < burn_in_fraction < 1.0:
        raise ValueError("burn_in_fraction must lie in (0, 1)")
    if not 0.0 < eps_sync < eps_osc:
        raise ValueError("thresholds must satisfy 0 < eps_sync < eps_osc")
    diff = traj.states[:, 0] - traj.states[:, 1]
    n = diff.size
    start = math.ceil(burn_in_fraction * (n - 1))
    tail = diff[start:]
    if tail.size < 8:
        raise ValueError("horizon too short for the requested burn-in")
    amplitude = float(tail.max() - tail.min())
    if amplitude < eps_sync:
        classification = SYNCHRONIZED
    elif amplitude > eps_osc:
        classification = OSCILLATORY
    else:
        classification = INCONCLUSIVE
    q3 = (3 * (n - 1)) // 4
    q2 = (n - 1) // 2
    last = diff[q3:]
    prev = diff[q2:q3 + 1]
    growing = float(last.max() - last.min()) > float(prev.max() - prev.min())
    return StabilityVerdict(classification=classification, amplitude=amplitude,
                            burn_in=float(traj.times[start]),
                            horizon=traj.horizon, growing=growing)


def conservation_check(traj: Trajectory, params: models.ModelParams) -> float:
    """Max node deviation of q1 + q2 from its exact relaxation solution.

    The choice weights sum to one, so the total fluid obeys
    s' = lam - mu s exactly in both models and
    s(t) = lam/mu + (s(0) - lam/mu) e^(-mu t).
    """
    s = traj.states[:, 0] + traj.states[:, 1]
    s_inf = params.lam / params.mu
    target = s_inf + (s[0] - s_inf) * np.exp(-params.mu * traj.times)
    return float(np.max(np.abs(s - target)))


def analytic_threshold(model: str, lam: float, mu: float) -> float | None:
    """Smallest critical delay for (lam, mu), or None where none exists."""
    if model == models.CONSTANT:
        point = stability.critical_delay_constant(lam, mu)
        return None if point is None else point.delta_cr
    if model == models.MOVING_AVERAGE:
        roots = stability.critical_delay_ma(lam, mu)
        return roots[0].delta_cr if roots else None
    raise ValueError(f"unknown model kind: {model!r}")


def _default_horizon(mu: float, delta: float) -> float:
    # >= 20 relaxation times, and long enough to see several delay windows
    return max(200.0 / mu, 50.0 * delta)


def sweep(model: str, mu: float, lambdas, deltas, horizon: float | None = None,
          step: float | None = None, phi1: float | None = None,
          phi2: float | None = None,
          burn_in_fraction: float = 0.5) -> list[SweepRow]:
    """Integrate and classify every (lam, delta) cell against the analytic
    threshold.

    Rows are produced in grid order (lambdas outer, deltas inner) and are
    independent of each other; integration failures are recorded per row
    rather than aborting the sweep.  ``agree`` is True when the observed
    verdict matches the prediction or no prediction exists.
    """
    rows: list[SweepRow] = []
    for lam in lambdas:
        lam = float(lam)
        threshold = analytic_threshold(model, lam, mu)
        for delta in deltas:
            delta = float(delta)
            if threshold is None:
                predicted = NOT_APPLICABLE
            elif delta < threshold:
                predicted = SYNCHRONIZED
            else:
                predicted = OSCILLATORY
            try:
                params = models.ModelParams(lam=lam, mu=mu, delta=delta)
                run_horizon = _default_horizon(mu, delta) if horizon is None else horizon
                traj = models.simulate(model, params, horizon=run_horizon,
                                       step=step, phi1=phi1, phi2=phi2)
                eps_sync, eps_osc = default_thresholds(params)
                verdict = classify_stability(traj, burn_in_fraction, eps_sync, eps_osc)
            except (NumericalFailureError, ValueError) as exc:
                rows.append(SweepRow(lam=lam, mu=mu, delta=delta,
                                     predicted=predicted, observed=FAILED,
                                     amplitude=float("nan"), agree=False,
                                     error=str(exc)))
                continue
            agree = predicted == NOT_APPLICABLE or verdict.classification == predicted
            rows.append(SweepRow(lam=lam, mu=mu, delta=delta, predicted=predicted,
                                 observed=verdict.classification,
                                 amplitude=verdict.amplitude, agree=agree,
                                 growing=verdict.growing))
    return rows


def locate_transition(model: str, lam: float, mu: float, delta_lo: float,
                      delta_hi: float, n_iter: int = 12,
                      horizon: float | None = None,
                      burn_in_fraction: float = 0.5,
                      phi1: float | None = None,
                      phi2: float | None = None) -> float:
    """Bisect on the delay for the simulated synchronized/oscillatory flip.

    ``delta_lo`` must classify synchronized and ``delta_hi`` must not; the
    returned midpoint estimates the simulated stability boundary, which can
    be confronted with the analytic critical delay.
    """

    def observed(delta: float) -> str:
        params = models.ModelParams(lam=lam, mu=mu, delta=delta)
        run_horizon = _default_horizon(mu, delta) if horizon is None else horizon
        traj = models.simulate(model, params, horizon=run_horizon,
                               phi1=phi1, phi2=phi2)
        eps_sync, eps_osc = default_thresholds(params)
        return classify_stability(traj, burn_in_fraction, eps_sync, eps_osc).classification

    if observed(delta_lo) != SYNCHRONIZED:
        raise ValueError("delta_lo does not classify as synchronized")
    if observed(delta_hi) == SYNCHRONIZED:
        raise ValueError("delta_hi classifies as synchronized")
    lo, hi = float(delta_lo), float(delta_hi)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        if observed(mid) == SYNCHRONIZED:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
