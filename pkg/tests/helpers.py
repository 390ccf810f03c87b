"""Shared builders for the test suite: the three reference networks
(loaded from the bundled config documents, which therefore drive both
the unit and the acceptance suites) and randomized feasible instances."""

from __future__ import annotations

from pathlib import Path

import numpy as np

import epnopt as ep
from epnopt.cli import load_document

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def table1() -> ep.NetworkConfig:
    return load_document(str(CONFIG_DIR / "table1.yaml"))[0]


def table2() -> ep.NetworkConfig:
    return load_document(str(CONFIG_DIR / "table2.yaml"))[0]


def table3() -> ep.NetworkConfig:
    return load_document(str(CONFIG_DIR / "table3.yaml"))[0]


def random_network(
    rng: np.random.Generator,
    n: int | None = None,
    min_width: float = 0.0,
) -> ep.NetworkConfig:
    """A random geometric network with a usable feasibility box.

    The harvest rate is scaled so the stability lower bounds sum well
    below 1; instances whose box is degenerate (or narrower than
    ``min_width`` per pair) are redrawn.
    """
    while True:
        size = int(rng.integers(2, 4)) if n is None else n
        lam = rng.uniform(2.0, 80.0, size)
        u = rng.uniform(0.05, 0.7, size)
        w = rng.uniform(20.0, 150.0, size)
        delta = rng.uniform(0.0, 20.0, size)
        sigma = w / (w + delta)
        target = rng.uniform(0.35, 0.75)  # sum of stability lower bounds
        gamma = float((lam * (1.0 - u) / sigma).sum() / target)
        net = ep.NetworkConfig(
            gamma,
            [
                ep.StationPair(a, b, c, ep.Geometric(d))
                for a, b, c, d in zip(lam, w, delta, u)
            ],
        )
        try:
            box = ep.feasible_box(net)
        except ep.InfeasibleNetwork:
            continue
        if box.is_degenerate():
            continue
        widths = box.upper_array() - box.lower_array()
        if np.any(widths < min_width):
            continue
        return net


def interior_allocation(
    rng: np.random.Generator, net: ep.NetworkConfig, margin: float = 0.0
) -> ep.Allocation:
    """A random allocation strictly inside the feasibility box.

    Samples Dirichlet splits of the slack above the lower bounds and
    falls back to the deterministic interior point when the box is thin.
    """
    box = ep.feasible_box(net)
    lo = box.lower_array()
    slack = 1.0 - lo.sum()
    for _ in range(200):
        p = lo + slack * rng.dirichlet(np.ones(net.n))
        if box.contains(p, margin):
            return ep.Allocation(p)
    return ep.Allocation(box.interior_point())
