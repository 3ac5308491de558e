"""
Convergence from arbitrary states
=================================

Start a 4x4 grid in a random configuration and run it under each daemon
until a second BFS construction completes.  Rounds to each attractor are
printed next to the proven bounds.
"""

from ssbfs import ALL_POLICIES, DaemonPolicy, bound_report, execute, random_configuration
from ssbfs.topologies import grid

t = grid(4, 4)
print(f"n = {t.n}, D = {t.diameter}")

for k, base in enumerate(ALL_POLICIES):
    policy = DaemonPolicy(base.kind, 42 + k, base.probability, base.script)
    trace = execute(t, random_configuration(t, 42), policy, "constructions:1")
    rep = bound_report(trace)
    reached = "  ".join(f"{name}={rep.rounds_to[name]}/{rep.bounds[name]}" for name in rep.rounds_to)
    print(f"{policy.label():>14}: {reached}  steps={trace.step_count}")

# every bound holds with a lot of room; Al typically arrives far below
# (D+2)n(2n+3) rounds
