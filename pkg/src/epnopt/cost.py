"""Composite cost evaluation: response time plus energy-loss rate.

The cost of an allocation is C = W + E, where W is the overall mean
response time of jobs (Little's law over all workstations) and E is the
total rate of wasted energy packets (store leakage plus deliveries to
idle workstations).

For geometric batches both terms have closed forms in p, which the
optimizers and the grid oracle evaluate vectorized; the general forms in
(q1, q2) stay available for arbitrary batch distributions and as an
algebraic cross-check.
"""

from __future__ import annotations

import numpy as np

from .errors import OutOfBox
from .model import Allocation, CostBreakdown, NetworkConfig, StationaryState
from .stationary import feasible_box, solve_network


def response_time(config: NetworkConfig, state: StationaryState) -> float:
    """Overall mean response time in seconds: (1/lambda+) sum q1/(1-q1).

    Little's law applied to the stationary mean queue lengths q1/(1-q1).
    """
    q1 = state.q1_array()
    return float(np.sum(q1 / (1.0 - q1)) / config.total_arrival_rate)


def energy_loss_rate(
    config: NetworkConfig, alloc: Allocation, state: StationaryState
) -> float:
    """Total EP waste rate: sum q2*delta (leakage) + q2*w*(1-q1) (idle hits)."""
    q1 = state.q1_array()
    q2 = state.q2_array()
    return float(
        np.sum(q2 * config.leak_rates() + q2 * config.delivery_rates() * (1.0 - q1))
    )


def evaluate_cost(config: NetworkConfig, alloc: Allocation) -> CostBreakdown:
    """Solve the stationary state at ``alloc`` and return the cost split.

    Propagates UnstableNetwork when the allocation is not stationary.
    """
    state = solve_network(config, alloc)
    w = response_time(config, state)
    e = energy_loss_rate(config, alloc, state)
    return CostBreakdown(response_time=w, energy_loss=e)


# ---------------------------------------------------------------------------
# Geometric-batch closed forms.
#
# With P[b=s] = (1-u)u^(s-1) the WS utilization collapses to
# q1 = lambda / (u*lambda + sigma*gamma*p), so W and E become explicit
# rational functions of p. The pairs are independent: the forms below are
# valid per pair for any p vector strictly inside the feasibility box,
# whether or not it sums to 1 (the simplex constraint is a resource
# constraint, not a stationarity requirement). That property is what the
# finite-difference oracles rely on.
# ---------------------------------------------------------------------------


def geometric_cost_parts(config: NetworkConfig, p: np.ndarray):
    """Vectorized (W, E, C) for an array of allocation vectors.

    ``p`` has shape (..., N); returns three arrays of shape (...).
    No feasibility masking: callers mask with the box themselves.
    """
    lam = config.arrival_rates()
    u = config.batch_u()
    sigma = config.efficiencies()
    gamma = config.harvest_rate
    lam_plus = config.total_arrival_rate
    p = np.asarray(p, dtype=float)

    sg = sigma * gamma * p
    w = np.sum(lam / (lam * (u - 1.0) + sg), axis=-1) / lam_plus
    e = gamma * np.sum(p, axis=-1) - lam_plus + np.sum(
        lam**2 * u / (lam * u + sg), axis=-1
    )
    return w, e, w + e


def geometric_cost_at(config: NetworkConfig, p) -> CostBreakdown:
    """Closed-form cost at a raw p vector (sum(p) = 1 not required).

    Raises OutOfBox when any coordinate leaves its open feasibility
    interval, where the closed forms stop describing a stationary system.
    """
    p = np.asarray(p, dtype=float)
    box = feasible_box(config)
    if not box.contains(p):
        raise OutOfBox(f"p={p.tolist()} outside feasibility box")
    w, e, _ = geometric_cost_parts(config, p)
    return CostBreakdown(response_time=float(w), energy_loss=float(e))


def geometric_gradient(config: NetworkConfig, p: np.ndarray) -> np.ndarray:
    """Per-coordinate derivative dC/dp_i of the closed-form cost.

    Shape follows ``p`` (..., N). Always negative inside the box: more
    energy helps every pair; the simplex constraint is what makes the
    trade-off.
    """
    lam = config.arrival_rates()
    u = config.batch_u()
    sigma = config.efficiencies()
    gamma = config.harvest_rate
    lam_plus = config.total_arrival_rate
    p = np.asarray(p, dtype=float)

    sg = sigma * gamma * p
    dw = -lam * sigma * gamma / (lam_plus * (lam * (u - 1.0) + sg) ** 2)
    de = -(lam**2) * u * sigma * gamma / (lam * u + sg) ** 2
    return dw + de


def geometric_curvature(config: NetworkConfig, p: np.ndarray) -> np.ndarray:
    """Per-coordinate second derivative d2C/dp_i2 (diagonal Hessian).

    2*lam*sigma^2*gamma^2 / (lam+ * (sigma*gamma*p - lam*(1-u))^3)
    + 2*lam^2*u*sigma^2*gamma^2 / (lam*u + sigma*gamma*p)^3,
    strictly positive inside the box, so the cost is strictly convex there.
    """
    lam = config.arrival_rates()
    u = config.batch_u()
    sigma = config.efficiencies()
    gamma = config.harvest_rate
    lam_plus = config.total_arrival_rate
    p = np.asarray(p, dtype=float)

    sg2 = (sigma * gamma) ** 2
    d2w = 2.0 * lam * sg2 / (lam_plus * (sigma * gamma * p - lam * (1.0 - u)) ** 3)
    d2e = 2.0 * lam**2 * u * sg2 / (lam * u + sigma * gamma * p) ** 3
    return d2w + d2e
