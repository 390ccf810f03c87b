"""The abundant-harvest closed form.

When harvesting far exceeds the job load, workstations are nearly
always idle and the cost simplifies enough for an explicit optimal
allocation. This script compares that closed form with the exact
optimizer and the grid oracle on a lightly loaded network.
"""

import numpy as np

import epnopt as ep

net = ep.NetworkConfig(230.0, [
    ep.StationPair(5.0, 100.0, 10.0, ep.Geometric(0.2)),
    ep.StationPair(6.0, 80.0, 10.0, ep.Geometric(0.2)),
    ep.StationPair(5.0, 65.0, 25.0, ep.Geometric(0.2)),
])
print(f"harvest {net.harvest_rate} EPs/sec vs total load "
      f"{net.total_arrival_rate} jobs/sec")

approx = ep.optimal_allocation(net, method="large-gamma")
print("\nClosed-form allocation:")
print("  p_hat =", np.round(approx.p_star.p, 4))
print("  q1 at p_hat =", np.round(approx.q1_star, 4), " (all near zero)")
print(f"  exact cost at p_hat = {approx.cost.total:.4f}")

exact = ep.optimal_allocation(net)  # quartic system
print("\nExact optimizer:")
print("  p* =", np.round(exact.p_star.p, 4))
print(f"  C* = {exact.cost.total:.4f}")

_, grid_cost, _ = ep.grid_search(net, step=1e-3)
print(f"\nGrid oracle minimum: {grid_cost.total:.4f}")
print(f"approximation gap C(p_hat) - C* = "
      f"{approx.cost.total - exact.cost.total:.2e}")

print("\nWith scarce harvesting the closed form leaves the feasible box:")
tight = ep.NetworkConfig(50.0, [
    ep.StationPair(5.0, 100.0, 0.0, ep.Geometric(0.5)),
    ep.StationPair(80.0, 50.0, 0.0, ep.Geometric(0.5)),
])
try:
    ep.optimal_allocation(tight, method="large-gamma")
except ep.ApproximationOutOfBox as err:
    print(f"  {err}")
