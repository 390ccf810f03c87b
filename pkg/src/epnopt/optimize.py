"""Optimal energy distribution: minimize C(p) subject to sum(p) = 1.

Three analytic routes plus a brute-force grid oracle, all for geometric
batches (the closed-form cost requires them):

- two pairs: the stationarity equation dC/dp1 = 0 is bracketed between
  the response-time singularities and solved directly;
- three or more pairs: the first-order system couples every pair's WS
  utilization to the first pair's through a quartic per pair; an outer
  bracket on q11 enforces the allocation-sum constraint;
- abundant harvest: when utilizations are near zero the Lagrangian of a
  simplified cost has an explicit solution;
- grid oracle: exhaustive simplex-grid sweep, the independent check.

Every analytic optimum is Newton-polished on the simplex, so reported
first-order residuals are near machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .cost import (
    evaluate_cost,
    geometric_cost_parts,
    geometric_curvature,
    geometric_gradient,
)
from .errors import (
    ApproximationOutOfBox,
    ConstraintRootNotBracketed,
    InfeasibleNetwork,
    NoAdmissibleRoot,
    NoInteriorRoot,
    OutOfBox,
)
from .model import Allocation, CostBreakdown, FeasibleBox, NetworkConfig
from .stationary import feasible_box, solve_network

# Search intervals are pulled inward from the box edges where the cost
# diverges; roots are never this close to a boundary in a sane instance.
BOUNDARY_SHRINK = 1e-9

_FOC_TOL = 1e-9  # max residual accepted for a quartic root
_POLISH_TOL = 1e-12


class Method(str, Enum):
    TWO_PAIR_ROOT = "two_pair_root"
    QUARTIC_SYSTEM = "quartic_system"
    LARGE_GAMMA_CLOSED_FORM = "large_gamma_closed_form"
    GRID_ORACLE = "grid_oracle"


@dataclass(frozen=True)
class OptimizeResult:
    """An optimal (or grid-best) allocation with its certificate."""

    p_star: Allocation
    q1_star: tuple[float, ...]
    cost: CostBreakdown
    method: Method
    residual: float  # max first-order-condition violation on the simplex


@dataclass(frozen=True)
class SweepGrid:
    """Cost landscape over the simplex grid; NaN marks infeasible points.

    axes holds the free-dimension grids: (p1,) for two pairs,
    (p1, p2) for three; the last coordinate follows from sum(p) = 1.
    """

    axes: tuple[np.ndarray, ...]
    response_time: np.ndarray
    energy_loss: np.ndarray
    total: np.ndarray
    feasible: np.ndarray


def _require_geometric(config: NetworkConfig, what: str):
    if not config.is_geometric:
        raise ValueError(f"{what} requires geometric batch distributions")


def _gradient_spread(config: NetworkConfig, p: np.ndarray) -> float:
    """Max deviation of the per-coordinate cost slopes from their mean.

    Zero exactly when all dC/dp_i agree, i.e. the first-order conditions
    under the sum(p) = 1 coupling hold.
    """
    g = geometric_gradient(config, p)
    return float(np.max(np.abs(g - g.mean())))


def _polish_on_simplex(
    config: NetworkConfig, p: np.ndarray, box: FeasibleBox, iters: int = 6
) -> np.ndarray:
    """Equality-constrained Newton steps; keeps sum(p) and box membership."""
    p = np.asarray(p, dtype=float).copy()
    for _ in range(iters):
        g = geometric_gradient(config, p)
        h = geometric_curvature(config, p)
        nu = -np.sum(g / h) / np.sum(1.0 / h)
        step = -(g + nu) / h  # sums to zero by construction
        if np.max(np.abs(step)) < 1e-16:
            break
        alpha = 1.0
        while alpha > 1e-8 and not box.contains(p + alpha * step):
            alpha *= 0.5
        if alpha <= 1e-8:
            break
        p = p + alpha * step
    return p


def _result_at(
    config: NetworkConfig, p: np.ndarray, method: Method
) -> OptimizeResult:
    alloc = Allocation(p)
    state = solve_network(config, alloc)
    cost = evaluate_cost(config, alloc)
    return OptimizeResult(
        p_star=alloc,
        q1_star=state.q1,
        cost=cost,
        method=method,
        residual=_gradient_spread(config, np.asarray(p)),
    )


# ---------------------------------------------------------------------------
# Two pairs
# ---------------------------------------------------------------------------


def _p1_interval(box: FeasibleBox) -> tuple[float, float]:
    lo = max(box.lower[0], 1.0 - box.upper[1])
    hi = min(box.upper[0], 1.0 - box.lower[1])
    return lo, hi


def cost_slope_two_pairs(config: NetworkConfig, p1: float) -> float:
    """dC/dp1 for a two-pair network with p2 = 1 - p1.

    Raises OutOfBox when (p1, 1-p1) is infeasible.
    """
    _require_geometric(config, "cost slope")
    if config.n != 2:
        raise ValueError("cost_slope_two_pairs requires exactly two pairs")
    p = np.array([p1, 1.0 - p1])
    box = feasible_box(config)
    if not box.contains(p):
        raise OutOfBox(f"p1={p1} outside the feasible interval")
    g = geometric_gradient(config, p)
    return float(g[0] - g[1])


def optimize_two_pairs(config: NetworkConfig) -> OptimizeResult:
    """Bracketed root of dC/dp1 on the feasible p1 interval."""
    _require_geometric(config, "optimization")
    if config.n != 2:
        raise ValueError("optimize_two_pairs requires exactly two pairs")
    box = feasible_box(config)
    if box.is_degenerate():
        raise InfeasibleNetwork("feasibility box does not meet the simplex")
    lo, hi = _p1_interval(box)
    lo += BOUNDARY_SHRINK
    hi -= BOUNDARY_SHRINK

    def slope(p1: float) -> float:
        p = np.array([p1, 1.0 - p1])
        g = geometric_gradient(config, p)
        return float(g[0] - g[1])

    s_lo, s_hi = slope(lo), slope(hi)
    if not (s_lo < 0.0 < s_hi):
        raise NoInteriorRoot(
            f"dC/dp1 does not change sign on ({lo:.6g}, {hi:.6g}); "
            "minimum sits on a store-stability boundary"
        )
    p1 = brentq(slope, lo, hi, xtol=1e-12, rtol=8.9e-16, maxiter=200)
    p = _polish_on_simplex(config, np.array([p1, 1.0 - p1]), box)
    return _result_at(config, p, Method.TWO_PAIR_ROOT)


# ---------------------------------------------------------------------------
# Three or more pairs: quartic system
# ---------------------------------------------------------------------------


def coupling_coefficient(config: NetworkConfig, q11: float, i: int) -> float:
    """Coefficient tying pair i's first-order condition to pair 1's.

    f_i = (1/(lam+ (1-q11)^2) + lam1*u1) * (sigma1*lam_i)/(sigma_i*lam1) * q11^2,
    for 0-based station index i >= 1.
    """
    _require_geometric(config, "coupling coefficient")
    if not 0.0 < q11 < 1.0:
        raise ValueError(f"q11 must be in (0, 1), got {q11}")
    if i < 1 or i >= config.n:
        raise ValueError(f"station index {i} out of range [1, {config.n})")
    st1, sti = config.stations[0], config.stations[i]
    lam_plus = config.total_arrival_rate
    lead = 1.0 / (lam_plus * (1.0 - q11) ** 2) + st1.arrival_rate * st1.batch.u
    ratio = (st1.energy_efficiency * sti.arrival_rate) / (
        sti.energy_efficiency * st1.arrival_rate
    )
    return lead * ratio * q11 * q11


def utilization_from_coupling(config: NetworkConfig, f_i: float, i: int) -> float:
    """The unique q in (0, 1) with 1/(lam+ (1-q)^2) + lam*u = f_i / q^2.

    Clearing denominators yields a quartic; its roots (companion matrix)
    are screened against the original condition and Newton-polished,
    because the rearrangement can admit extraneous roots. The original
    condition is strictly decreasing in q, so exactly one root survives;
    a Brent bracket on it is kept as a fallback for degenerate extraction.
    """
    if i < 1 or i >= config.n:
        raise ValueError(f"station index {i} out of range [1, {config.n})")
    if f_i <= 0.0 or not math.isfinite(f_i):
        raise NoAdmissibleRoot(f"coupling coefficient must be positive, got {f_i}")
    st = config.stations[i]
    a = st.arrival_rate * st.batch.u
    lam_plus = config.total_arrival_rate

    def foc(q: float) -> float:
        return f_i / (q * q) - 1.0 / (lam_plus * (1.0 - q) ** 2) - a

    def foc_scale(q: float) -> float:
        # The condition is a difference of these terms; residuals are
        # meaningful relative to them (near the interval ends the terms
        # blow up and an absolute target is below representable noise).
        return max(1.0, f_i / (q * q), 1.0 / (lam_plus * (1.0 - q) ** 2), a)

    def foc_deriv(q: float) -> float:
        return -2.0 * f_i / q**3 - 2.0 / (lam_plus * (1.0 - q) ** 3)

    def accept_tol(q: float) -> float:
        # A root cannot beat the residual of a one-ulp perturbation; for
        # roots pushed against 1 (huge f during bracketing) that floor
        # dominates the nominal tolerance.
        return max(_FOC_TOL * foc_scale(q), 4.0 * abs(foc_deriv(q)) * 2.3e-16)

    def polish(q: float) -> float:
        for _ in range(60):
            r = foc(q)
            if abs(r) <= _POLISH_TOL * foc_scale(q):
                break
            q_new = q - r / foc_deriv(q)
            if not 0.0 < q_new < 1.0 or q_new == q:
                break
            q = q_new
        return q

    coeffs = [1.0, -2.0, 1.0 + 1.0 / (a * lam_plus) - f_i / a, 2.0 * f_i / a, -f_i / a]
    best, best_score = None, np.inf
    for r in np.roots(coeffs):
        if abs(r.imag) > 1e-6 * max(1.0, abs(r.real)):
            continue
        q = float(r.real)
        if not 0.0 < q < 1.0:
            continue
        q = polish(q)
        score = abs(foc(q)) / accept_tol(q)
        if score < best_score:
            best, best_score = q, score
    if best is None or best_score > 1.0:
        # companion-matrix extraction degenerated; the condition itself is
        # monotone with a guaranteed sign change, so bracket it directly.
        lo, hi = 1e-13, 1.0 - 1e-13
        if foc(lo) <= 0.0 or foc(hi) >= 0.0:
            raise NoAdmissibleRoot(
                f"no root of the first-order condition in (0, 1) for f={f_i}"
            )
        best = polish(brentq(foc, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200))
        if abs(foc(best)) > accept_tol(best):
            raise NoAdmissibleRoot(
                f"first-order residual {foc(best):.3g} exceeds tolerance"
            )
    return float(best)


def _allocation_from_utilizations(
    config: NetworkConfig, q1: np.ndarray
) -> np.ndarray:
    """Invert q1 = lam/(u*lam + sigma*gamma*p) to p per pair."""
    lam = config.arrival_rates()
    u = config.batch_u()
    sigma = config.efficiencies()
    return lam / (sigma * config.harvest_rate) * (1.0 / q1 - u)


def optimize_multi(config: NetworkConfig) -> OptimizeResult:
    """First-order system solved by an outer bracket on pair 1's utilization.

    For each candidate q11 the quartics give every other pair's
    utilization, hence an allocation; its sum is strictly decreasing in
    q11 (each q1_i rises with q11, shrinking each p_i), so the constraint
    sum(p) = 1 has a unique bracketed root. Monotonicity is asserted on
    the evaluations; on violation the separable dual (shared marginal
    cost, water-filling) takes over.
    """
    _require_geometric(config, "optimization")
    if config.n < 2:
        raise ValueError("optimize_multi requires at least two pairs")
    box = feasible_box(config)
    if box.is_degenerate():
        raise InfeasibleNetwork("feasibility box does not meet the simplex")

    seen: list[tuple[float, np.ndarray]] = []

    def utilizations(q11: float) -> np.ndarray:
        q1 = np.empty(config.n)
        q1[0] = q11
        for i in range(1, config.n):
            q1[i] = utilization_from_coupling(
                config, coupling_coefficient(config, q11, i), i
            )
        seen.append((q11, q1))
        return q1

    def constraint_gap(q11: float) -> float:
        return float(_allocation_from_utilizations(config, utilizations(q11)).sum() - 1.0)

    # q11 is strictly decreasing in p1, so pair 1's feasible p interval maps
    # to (q11 at upper bound, 1); p1 at its lower bound gives q11 = 1 exactly.
    st1 = config.stations[0]
    lo = st1.arrival_rate / (
        st1.arrival_rate * st1.batch.u
        + st1.energy_efficiency
        * config.harvest_rate
        * (box.upper[0] - BOUNDARY_SHRINK)
    )
    hi = 1.0 - BOUNDARY_SHRINK
    if constraint_gap(lo) <= 0.0:
        raise NoInteriorRoot(
            "allocation sum stays below 1 even with pair 1 at its "
            "store-stability bound; minimum is not interior"
        )
    if constraint_gap(hi) >= 0.0:
        raise ConstraintRootNotBracketed(
            "allocation-sum constraint has no sign change in q11"
        )
    q11 = brentq(constraint_gap, lo, hi, xtol=1e-13, rtol=8.9e-16, maxiter=200)
    q1 = utilizations(q11)

    seen.sort(key=lambda t: t[0])
    diffs = np.diff(np.array([q for _, q in seen]), axis=0)
    if seen and np.any(diffs < -1e-9):
        p = _waterfill(config, box)
    else:
        p = _allocation_from_utilizations(config, q1)
        if not box.contains(p):
            raise NoInteriorRoot(
                "stationarity point leaves the feasibility box; "
                "minimum sits on a store-stability boundary"
            )
        p = _polish_on_simplex(config, p, box)
    return _result_at(config, p, Method.QUARTIC_SYSTEM)


def _waterfill(config: NetworkConfig, box: FeasibleBox) -> np.ndarray:
    """Exact fallback: the cost is separable and strictly convex, so the
    optimum equalizes marginal costs. Bisection on the shared marginal
    cost nu, with each p_i(nu) bracketed inside its box interval."""
    lo = box.lower_array() + BOUNDARY_SHRINK
    hi = box.upper_array() - BOUNDARY_SHRINK
    base = box.interior_point()  # keeps unused coordinates off the poles

    def slope_i(i: int, x: float) -> float:
        p = base.copy()
        p[i] = x
        return float(geometric_gradient(config, p)[i])

    def p_of(nu: float) -> np.ndarray:
        out = np.empty(config.n)
        for i in range(config.n):
            if slope_i(i, lo[i]) >= nu:
                out[i] = lo[i]
            elif slope_i(i, hi[i]) <= nu:
                out[i] = hi[i]
            else:
                out[i] = brentq(
                    lambda x, i=i: slope_i(i, x) - nu, lo[i], hi[i], xtol=1e-13
                )
        return out

    nu_hi = min(slope_i(i, hi[i]) for i in range(config.n))
    nu_lo = nu_hi - 1.0
    while p_of(nu_lo).sum() > 1.0:
        nu_lo = nu_hi - 2.0 * (nu_hi - nu_lo)
    if p_of(nu_hi).sum() < 1.0:
        raise NoInteriorRoot("marginal-cost equalization needs p beyond the box")
    nu = brentq(lambda v: p_of(v).sum() - 1.0, nu_lo, nu_hi, xtol=1e-13)
    return _polish_on_simplex(config, p_of(nu), box)


# ---------------------------------------------------------------------------
# Abundant harvest closed form
# ---------------------------------------------------------------------------


def abundant_harvest_allocation(config: NetworkConfig) -> OptimizeResult:
    """Closed-form allocation for the near-idle regime (utilizations ~ 0).

    p_i = sqrt(lam_i/sigma_i)/sum_j sqrt(lam_j/sigma_j)
          * (1 + sum_j lam_j*u_j/(sigma_j*gamma)) - lam_i*u_i/(sigma_i*gamma),
    which sums to 1 by construction. The returned cost is the exact C
    evaluated at this approximate allocation.

    Raises ApproximationOutOfBox when the harvest rate is too small for
    the regime and the formula leaves the feasibility box.
    """
    _require_geometric(config, "abundant-harvest allocation")
    lam = config.arrival_rates()
    u = config.batch_u()
    sigma = config.efficiencies()
    gamma = config.harvest_rate

    weight = np.sqrt(lam / sigma)
    correction = lam * u / (sigma * gamma)
    p = weight / weight.sum() * (1.0 + correction.sum()) - correction
    box = feasible_box(config)
    if not box.contains(p):
        raise ApproximationOutOfBox(
            "closed-form allocation leaves the feasibility box; "
            "the harvest rate is too small for the near-idle regime"
        )
    return _result_at(config, p, Method.LARGE_GAMMA_CLOSED_FORM)


# ---------------------------------------------------------------------------
# Curvature and grid oracle
# ---------------------------------------------------------------------------


def cost_curvature(config: NetworkConfig, alloc: Allocation) -> np.ndarray:
    """Diagonal of the cost Hessian in p at a feasible allocation.

    Strictly positive inside the feasibility box (strict convexity).
    Raises OutOfBox for infeasible allocations.
    """
    _require_geometric(config, "cost curvature")
    p = alloc.as_array()
    box = feasible_box(config)
    if not box.contains(p):
        raise OutOfBox(f"allocation {alloc.p} outside feasibility box")
    return geometric_curvature(config, p)


def grid_search(
    config: NetworkConfig, step: float
) -> tuple[Allocation, CostBreakdown, SweepGrid]:
    """Exhaustive simplex-grid sweep; the optimizer's independent oracle.

    Free coordinates run over multiples of ``step``; the last coordinate
    closes the simplex. Grid points outside the open feasibility box are
    marked infeasible (NaN), never given a cost.
    """
    _require_geometric(config, "grid search")
    if step <= 0.0:
        raise ValueError(f"step must be > 0, got {step}")
    if config.n not in (2, 3):
        raise ValueError("grid search supports two or three pairs")
    box = feasible_box(config)
    lo, hi = box.lower_array(), box.upper_array()

    if config.n == 2:
        p1 = np.arange(1, math.ceil(1.0 / step)) * step
        pts = np.stack([p1, 1.0 - p1], axis=-1)
        axes = (p1,)
    else:
        p1 = np.arange(1, math.ceil(1.0 / step)) * step
        p2 = np.arange(1, math.ceil(1.0 / step)) * step
        p1 = p1[(p1 > lo[0]) & (p1 < hi[0])]
        p2 = p2[(p2 > lo[1]) & (p2 < hi[1])]
        g1, g2 = np.meshgrid(p1, p2, indexing="ij")
        pts = np.stack([g1, g2, 1.0 - g1 - g2], axis=-1)
        axes = (p1, p2)

    feasible = np.all((pts > lo) & (pts < hi), axis=-1)
    w = np.full(feasible.shape, np.nan)
    e = np.full(feasible.shape, np.nan)
    c = np.full(feasible.shape, np.nan)
    if feasible.any():
        wf, ef, cf = geometric_cost_parts(config, pts[feasible])
        w[feasible], e[feasible], c[feasible] = wf, ef, cf
    grid = SweepGrid(axes=axes, response_time=w, energy_loss=e, total=c, feasible=feasible)

    if not feasible.any():
        raise InfeasibleNetwork(f"no feasible grid point at step {step}")
    flat = np.where(feasible.ravel(), c.ravel(), np.inf)
    best = int(np.argmin(flat))
    p_best = pts.reshape(-1, config.n)[best]
    # Close the simplex exactly; the last coordinate carries rounding.
    p_best = np.append(p_best[:-1], 1.0 - p_best[:-1].sum())
    alloc = Allocation(p_best)
    return alloc, evaluate_cost(config, alloc), grid


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

_METHOD_ALIASES = {
    "auto": "auto",
    "n2": Method.TWO_PAIR_ROOT,
    "two_pair_root": Method.TWO_PAIR_ROOT,
    "quartic": Method.QUARTIC_SYSTEM,
    "quartic_system": Method.QUARTIC_SYSTEM,
    "large-gamma": Method.LARGE_GAMMA_CLOSED_FORM,
    "large_gamma_closed_form": Method.LARGE_GAMMA_CLOSED_FORM,
    "grid": Method.GRID_ORACLE,
    "grid_oracle": Method.GRID_ORACLE,
}


def optimal_allocation(
    config: NetworkConfig, method: str | Method = "auto", grid_step: float = 1e-3
) -> OptimizeResult:
    """Find the cost-minimizing allocation.

    ``auto`` picks the exact analytic route by pair count; the
    abundant-harvest approximation never runs unless asked for.
    """
    key = method.value if isinstance(method, Method) else str(method)
    resolved = _METHOD_ALIASES.get(key)
    if resolved is None:
        raise ValueError(f"unknown method {method!r}")
    if resolved == "auto":
        if config.n < 2:
            raise ValueError(
                "optimization needs at least two pairs; one pair has the "
                "unique allocation (1.0,)"
            )
        resolved = Method.TWO_PAIR_ROOT if config.n == 2 else Method.QUARTIC_SYSTEM
    if resolved is Method.TWO_PAIR_ROOT:
        return optimize_two_pairs(config)
    if resolved is Method.QUARTIC_SYSTEM:
        return optimize_multi(config)
    if resolved is Method.LARGE_GAMMA_CLOSED_FORM:
        return abundant_harvest_allocation(config)
    alloc, cost, _ = grid_search(config, grid_step)
    state = solve_network(config, alloc)
    return OptimizeResult(
        p_star=alloc,
        q1_star=state.q1,
        cost=cost,
        method=Method.GRID_ORACLE,
        residual=_gradient_spread(config, alloc.as_array()),
    )
