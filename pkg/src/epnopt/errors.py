"""Exception types for energy packet network analysis."""

from __future__ import annotations


class EpnError(Exception):
    """Base class for all toolkit errors."""


class NoStationarySolution(EpnError):
    """The workstation traffic equation has no root in (0, 1)."""


class UnstableNetwork(EpnError):
    """A pair's utilization leaves (0, 1); no stationary distribution exists.

    Attributes:
        pair: 1-based index of the first offending station pair.
        which: "q1" (workstation) or "q2" (energy store).
    """

    def __init__(self, pair: int, which: str, value: float | None = None):
        self.pair = pair
        self.which = which
        self.value = value
        detail = f" (value {value:.6g})" if value is not None else ""
        super().__init__(
            f"pair {pair}: {which} outside (0, 1){detail}; network is not stationary"
        )


class InfeasibleNetwork(EpnError):
    """No allocation can keep every utilization below 1 while summing to 1."""


class OutOfBox(EpnError):
    """The requested allocation lies outside the feasibility box."""


class NoInteriorRoot(EpnError):
    """No stationary point inside the feasibility box (internal error when
    the convexity conditions hold)."""


class NoAdmissibleRoot(EpnError):
    """No quartic root in (0, 1) satisfies the first-order condition."""


class ConstraintRootNotBracketed(EpnError):
    """The allocation-sum constraint equation has no sign change on the
    search interval."""


class ApproximationOutOfBox(EpnError):
    """The abundant-harvest closed form falls outside the feasibility box
    (harvest rate too small for the approximation regime)."""


class InvalidSimConfig(EpnError):
    """Simulation configuration violates its invariants."""
