"""Stationary analysis of a two-pair energy packet network.

Each pair couples a workstation (jobs arrive at rate lambda) to an
energy store charged with a share p_i of the harvested rate gamma.
A delivered packet executes a geometric batch of jobs; leakage drains
the store at rate delta. This script solves the traffic equations,
evaluates the joint distribution, and prices an allocation.
"""

import numpy as np

import epnopt as ep

net = ep.NetworkConfig(
    harvest_rate=150.0,
    stations=[
        ep.StationPair(arrival_rate=50.0, delivery_rate=100.0, leak_rate=10.0,
                       batch=ep.Geometric(0.2)),
        ep.StationPair(arrival_rate=60.0, delivery_rate=80.0, leak_rate=6.0,
                       batch=ep.Geometric(0.2)),
    ],
)

print("Feasible energy shares (stability box):")
box = ep.feasible_box(net)
for i, (lo, hi) in enumerate(zip(box.lower, box.upper), start=1):
    print(f"  pair {i}: {lo:.4f} < p_{i} < {hi:.4f}")

alloc = ep.Allocation([0.46, 0.54])
state = ep.solve_network(net, alloc)
print(f"\nAt p = {alloc.p}:")
print("  P[WS busy]      q1 =", np.round(state.q1, 5))
print("  P[ES non-empty] q2 =", np.round(state.q2, 5))

print("\nJoint distribution (product form):")
print("  P[all queues empty] =", f"{ep.joint_probability(state, [0, 0], [0, 0]):.6f}")
print("  P[K=(1,0), B=(2,1)] =", f"{ep.joint_probability(state, [1, 0], [2, 1]):.6f}")

cost = ep.evaluate_cost(net, alloc)
print("\nCost of this allocation:")
print(f"  response time W = {cost.response_time:.4f} s")
print(f"  energy loss   E = {cost.energy_loss:.4f} EPs/sec")
print(f"  composite     C = {cost.total:.4f}")

print("\nStarving a store is detected:")
try:
    ep.solve_network(net, ep.Allocation([0.29, 0.71]))
except ep.UnstableNetwork as err:
    print(f"  {err}")
