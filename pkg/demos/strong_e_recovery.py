"""
A StrongE leaf that needs a third round
=======================================

The root is Power, has a StrongE neighbor and a Working child.  RC1 waits
for the child to clean up, so the root leaves Power only in round 2 and
the leaf reaches Idle in round 3 whatever the daemon does.
"""

from ssbfs import DaemonPolicy, ProcessState, Configuration, Phase, Status, bound_report, execute
from ssbfs.topologies import star

t = star(3)
c = Configuration.from_states([
    ProcessState(None, None, 0, Status.POWER, Phase.A),
    ProcessState(None, None, 0, Status.STRONG_E, Phase.A),
    ProcessState(0, 0, 0, Status.WORKING, Phase.A),
])

trace = execute(t, c, DaemonPolicy("sync"), "rounds:4")
for s, moves in enumerate(trace.rule_sequence(), 1):
    print(f"round {trace.step_round[s - 1]}: {moves}")
print("StrongE windows (checked, late):", bound_report(trace).recovery["StrongE"])
