"""Traffic-equation solvers and the product-form stationary distribution.

Each pair is an open two-queue system: jobs accumulate at the WS and are
removed in batches by packets delivered from the ES; packets accumulate at
the ES and depart by delivery or leakage. With exponential timing the
joint stationary distribution factorizes into per-queue geometric terms
with marginal utilizations q1 (WS busy) and q2 (ES non-empty).
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .errors import InfeasibleNetwork, NoStationarySolution, UnstableNetwork
from .model import (
    Allocation,
    FeasibleBox,
    Geometric,
    NetworkConfig,
    StationaryState,
    StationPair,
)

# Utilizations are accepted only strictly inside (EDGE_EPS, 1 - EDGE_EPS);
# the stationary distribution requires 0 < q < 1 strictly.
EDGE_EPS = 1e-12

_FIXED_POINT_TOL = 1e-12


def es_utilization(p_i: float, station: StationPair, harvest_rate: float) -> float:
    """Probability the energy store is non-empty: gamma*p / (w + delta).

    Not clamped; the caller checks < 1 for stationarity.
    """
    return harvest_rate * p_i / (station.delivery_rate + station.leak_rate)


def ws_utilization_geometric(station: StationPair, q2: float) -> float:
    """Closed-form WS utilization for a geometric batch:
    lambda / (u*lambda + q2*w)."""
    u = station.batch.u
    return station.arrival_rate / (
        u * station.arrival_rate + q2 * station.delivery_rate
    )


def _removal_rate(station: StationPair, q2: float, x: float) -> float:
    """Effective negative-customer rate seen by the WS at utilization x:
    q2 * w * (1 - sum_s x^s pi_s) / (1 - x)."""
    series = station.batch.removal_series(x)
    return q2 * station.delivery_rate * (1.0 - series) / (1.0 - x)


def ws_utilization_fixed_point(station: StationPair, q2: float) -> float:
    """WS utilization for an arbitrary batch pmf, by bracketed root finding.

    Solves x * R(x) = lambda on (0, 1), where R is the batch-dependent
    removal rate. g(x) = x*q2*w*(1 - sum x^s pi_s) - lambda*(1 - x) is
    negative at 0 and, when a stationary solution exists, positive just
    below 1; x = 1 is always a root of g, so the bracket stops short of it.

    Raises NoStationarySolution when no root lies in (0, 1).
    """
    lam = station.arrival_rate
    w = station.delivery_rate

    def g(x: float) -> float:
        return x * q2 * w * (1.0 - station.batch.removal_series(x)) - lam * (1.0 - x)

    hi = 1.0 - 1e-9
    if q2 <= 0.0 or g(hi) <= 0.0:
        raise NoStationarySolution(
            f"no WS utilization in (0, 1) for arrival_rate={lam}, q2={q2}"
        )
    x = brentq(g, 0.0, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)

    # Polish on the original fixed-point form x*R(x) - lambda.
    for _ in range(3):
        res = x * _removal_rate(station, q2, x) - lam
        if abs(res) <= _FIXED_POINT_TOL:
            break
        h = 1e-9 * max(x, 1e-3)
        d = (
            (x + h) * _removal_rate(station, q2, x + h)
            - (x - h) * _removal_rate(station, q2, x - h)
        ) / (2.0 * h)
        step = res / d
        if not np.isfinite(step) or not 0.0 < x - step < 1.0:
            break
        x -= step
    return float(x)


def solve_station(station: StationPair, q2: float) -> float:
    """WS utilization, dispatching to the closed form for geometric batches."""
    if isinstance(station.batch, Geometric):
        return ws_utilization_geometric(station, q2)
    return ws_utilization_fixed_point(station, q2)


def solve_network(config: NetworkConfig, alloc: Allocation) -> StationaryState:
    """Solve both utilizations for every pair.

    Raises UnstableNetwork naming the first pair whose q1 or q2 leaves
    (0, 1); pairs are independent, so order follows the station list.
    """
    if len(alloc) != config.n:
        raise ValueError(
            f"allocation has {len(alloc)} entries for {config.n} stations"
        )
    q1, q2 = [], []
    for i, (st, p_i) in enumerate(zip(config.stations, alloc.p)):
        q2_i = es_utilization(p_i, st, config.harvest_rate)
        if not EDGE_EPS < q2_i < 1.0 - EDGE_EPS:
            raise UnstableNetwork(i + 1, "q2", q2_i)
        try:
            q1_i = solve_station(st, q2_i)
        except NoStationarySolution:
            raise UnstableNetwork(i + 1, "q1") from None
        if not EDGE_EPS < q1_i < 1.0 - EDGE_EPS:
            raise UnstableNetwork(i + 1, "q1", q1_i)
        q1.append(q1_i)
        q2.append(q2_i)
    return StationaryState(q1, q2)


def joint_probability(state: StationaryState, jobs, stores) -> float:
    """Stationary probability of the joint state (jobs per WS, packets per ES).

    The distribution is a product of independent geometric marginals:
    prod_i q1^k (1-q1) * q2^b (1-q2).
    """
    jobs = np.asarray(jobs)
    stores = np.asarray(stores)
    if jobs.shape != (state.n,) or stores.shape != (state.n,):
        raise ValueError("jobs and stores must each have one entry per pair")
    if np.any(jobs < 0) or np.any(stores < 0):
        raise ValueError("queue lengths must be non-negative")
    q1 = state.q1_array()
    q2 = state.q2_array()
    return float(
        np.prod(q1**jobs * (1.0 - q1)) * np.prod(q2**stores * (1.0 - q2))
    )


def feasible_box(config: NetworkConfig) -> FeasibleBox:
    """Open per-pair bounds on p keeping every utilization below 1.

    lower_i = lambda_i (1 - u_i) / (gamma * sigma_i) keeps the WS stable,
    upper_i = (w_i + delta_i) / gamma keeps the store stable. Defined for
    geometric batches (the WS bound uses u).

    Raises InfeasibleNetwork when the box cannot meet sum(p) = 1.
    """
    lam = config.arrival_rates()
    u = config.batch_u()
    sigma = config.efficiencies()
    gamma = config.harvest_rate
    lower = lam * (1.0 - u) / (gamma * sigma)
    upper = (config.delivery_rates() + config.leak_rates()) / gamma
    if lower.sum() >= 1.0:
        raise InfeasibleNetwork(
            f"sum of lower bounds {lower.sum():.6g} >= 1: harvest rate too small"
        )
    if upper.sum() <= 1.0:
        raise InfeasibleNetwork(
            f"sum of upper bounds {upper.sum():.6g} <= 1: stores cannot absorb the harvest"
        )
    return FeasibleBox(lower, upper)
