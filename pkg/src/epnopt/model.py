"""Domain types for energy packet networks.

A network is a set of N independent station pairs, each coupling a
workstation (WS, holds jobs) to an energy store (ES, holds energy
packets). A shared harvested-energy rate ``gamma`` is split across the
stores by an allocation vector p with sum(p) = 1. One delivered energy
packet executes a random batch of jobs; the batch-size distribution is
per pair.

All values are immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROB_TOL = 1e-12


@dataclass(frozen=True)
class Geometric:
    """Geometric batch-size distribution: P[b = s] = (1 - u) u^(s-1), s >= 1."""

    u: float

    def __post_init__(self):
        if not 0.0 < self.u < 1.0:
            raise ValueError(f"geometric parameter u must be in (0, 1), got {self.u}")

    @property
    def mean(self) -> float:
        return 1.0 / (1.0 - self.u)

    def removal_series(self, x: float) -> float:
        """Power series sum_s x^s P[b = s] for |x| < 1/u, in closed form."""
        return (1.0 - self.u) * x / (1.0 - self.u * x)


@dataclass(frozen=True)
class GeneralBatch:
    """Finite-support batch-size distribution given as {size: probability}."""

    pmf: tuple[tuple[int, float], ...]

    def __init__(self, pmf):
        items = sorted(dict(pmf).items())
        object.__setattr__(self, "pmf", tuple((int(s), float(p)) for s, p in items))
        self._validate()

    def _validate(self):
        if not self.pmf:
            raise ValueError("batch pmf must not be empty")
        sizes = [s for s, _ in self.pmf]
        if len(set(sizes)) != len(sizes):
            raise ValueError("batch sizes must be distinct")
        for s, p in self.pmf:
            if s < 1:
                raise ValueError(f"batch sizes must be >= 1, got {s}")
            if p <= 0.0:
                raise ValueError(f"batch probabilities must be > 0, got {p}")
        total = sum(p for _, p in self.pmf)
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"batch probabilities must sum to 1, got {total!r}")

    @property
    def mean(self) -> float:
        return sum(s * p for s, p in self.pmf)

    def removal_series(self, x: float) -> float:
        """Power series sum_s x^s P[b = s], evaluated exactly."""
        return sum(p * x**s for s, p in self.pmf)


BatchDistribution = Geometric | GeneralBatch


@dataclass(frozen=True)
class StationPair:
    """One workstation plus its energy store.

    arrival_rate: external job arrivals at the WS (jobs/sec).
    delivery_rate: ES -> WS energy packet delivery rate (EPs/sec).
    leak_rate: ES leakage rate (EPs/sec).
    batch: distribution of jobs executed per delivered packet.
    """

    arrival_rate: float
    delivery_rate: float
    leak_rate: float
    batch: BatchDistribution

    def __post_init__(self):
        if self.arrival_rate <= 0.0:
            raise ValueError(f"arrival_rate must be > 0, got {self.arrival_rate}")
        if self.delivery_rate <= 0.0:
            raise ValueError(f"delivery_rate must be > 0, got {self.delivery_rate}")
        if self.leak_rate < 0.0:
            raise ValueError(f"leak_rate must be >= 0, got {self.leak_rate}")
        if not isinstance(self.batch, (Geometric, GeneralBatch)):
            raise TypeError("batch must be Geometric or GeneralBatch")

    @property
    def energy_efficiency(self) -> float:
        """Fraction of store departures that reach the workstation."""
        return self.delivery_rate / (self.delivery_rate + self.leak_rate)


@dataclass(frozen=True)
class NetworkConfig:
    """The whole model instance: harvest rate plus station pairs."""

    harvest_rate: float
    stations: tuple[StationPair, ...]

    def __init__(self, harvest_rate: float, stations):
        object.__setattr__(self, "harvest_rate", float(harvest_rate))
        object.__setattr__(self, "stations", tuple(stations))
        if self.harvest_rate <= 0.0:
            raise ValueError(f"harvest_rate must be > 0, got {harvest_rate}")
        if len(self.stations) < 1:
            raise ValueError("at least one station pair is required")
        for st in self.stations:
            if not isinstance(st, StationPair):
                raise TypeError("stations must be StationPair instances")

    @property
    def n(self) -> int:
        return len(self.stations)

    @property
    def total_arrival_rate(self) -> float:
        return float(sum(st.arrival_rate for st in self.stations))

    @property
    def is_geometric(self) -> bool:
        return all(isinstance(st.batch, Geometric) for st in self.stations)

    # Parameter vectors, handy for vectorized cost evaluation.
    def arrival_rates(self) -> np.ndarray:
        return np.array([st.arrival_rate for st in self.stations])

    def delivery_rates(self) -> np.ndarray:
        return np.array([st.delivery_rate for st in self.stations])

    def leak_rates(self) -> np.ndarray:
        return np.array([st.leak_rate for st in self.stations])

    def efficiencies(self) -> np.ndarray:
        return np.array([st.energy_efficiency for st in self.stations])

    def batch_u(self) -> np.ndarray:
        """Geometric batch parameters; raises for non-geometric pairs."""
        if not self.is_geometric:
            raise ValueError("network has non-geometric batch distributions")
        return np.array([st.batch.u for st in self.stations])


@dataclass(frozen=True)
class Allocation:
    """Split of the harvested energy rate across stores; sums to 1."""

    p: tuple[float, ...]

    def __init__(self, p):
        object.__setattr__(self, "p", tuple(float(x) for x in np.asarray(p, dtype=float)))
        for i, x in enumerate(self.p):
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"p[{i}] = {x} outside [0, 1]")
        total = sum(self.p)
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"allocation must sum to 1, got {total!r}")

    def __len__(self) -> int:
        return len(self.p)

    def as_array(self) -> np.ndarray:
        return np.array(self.p)


@dataclass(frozen=True)
class StationaryState:
    """Solved per-pair utilizations.

    q1[i]: probability WS i holds at least one job.
    q2[i]: probability ES i holds at least one energy packet.
    Entries must lie strictly inside (0, 1).
    """

    q1: tuple[float, ...]
    q2: tuple[float, ...]

    def __init__(self, q1, q2):
        object.__setattr__(self, "q1", tuple(float(x) for x in q1))
        object.__setattr__(self, "q2", tuple(float(x) for x in q2))
        if len(self.q1) != len(self.q2):
            raise ValueError("q1 and q2 must have equal length")
        for name, vec in (("q1", self.q1), ("q2", self.q2)):
            for i, x in enumerate(vec):
                if not 0.0 < x < 1.0:
                    raise ValueError(f"{name}[{i}] = {x} outside (0, 1)")

    @property
    def n(self) -> int:
        return len(self.q1)

    def q1_array(self) -> np.ndarray:
        return np.array(self.q1)

    def q2_array(self) -> np.ndarray:
        return np.array(self.q2)


@dataclass(frozen=True)
class CostBreakdown:
    """Composite cost: response_time (sec) + energy_loss (EPs/sec)."""

    response_time: float
    energy_loss: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.response_time + self.energy_loss)


@dataclass(frozen=True)
class FeasibleBox:
    """Per-pair open intervals on p guaranteeing all utilizations < 1."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __init__(self, lower, upper):
        object.__setattr__(self, "lower", tuple(float(x) for x in lower))
        object.__setattr__(self, "upper", tuple(float(x) for x in upper))
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have equal length")

    @property
    def n(self) -> int:
        return len(self.lower)

    def lower_array(self) -> np.ndarray:
        return np.array(self.lower)

    def upper_array(self) -> np.ndarray:
        return np.array(self.upper)

    def is_degenerate(self) -> bool:
        """True when no allocation on the simplex can sit strictly inside."""
        return (
            any(lo >= hi for lo, hi in zip(self.lower, self.upper))
            or sum(self.lower) >= 1.0
            or sum(self.upper) <= 1.0
        )

    def contains(self, p, shrink: float = 0.0) -> bool:
        """Strict membership, optionally shrunk inward by ``shrink``."""
        arr = np.asarray(p, dtype=float)
        return bool(
            np.all(arr > self.lower_array() + shrink)
            and np.all(arr < self.upper_array() - shrink)
        )

    def interior_point(self) -> np.ndarray:
        """A strictly interior point of box-intersect-simplex.

        Distributes the slack 1 - sum(lower) proportionally to the interval
        widths; valid whenever the box is non-degenerate.
        """
        lo, hi = self.lower_array(), self.upper_array()
        width = hi - lo
        return lo + (1.0 - lo.sum()) * width / width.sum()
