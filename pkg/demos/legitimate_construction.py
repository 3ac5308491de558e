"""
One BFS construction in the legitimate regime
=============================================

From a configuration where the last construction just ended, the root
starts a new one.  Under the synchronous daemon a construction on a path
of diameter D takes exactly D^2 + 3D + 1 rounds and nobody moves more than
2D + 1 times.
"""

import numpy as np

from ssbfs import DaemonPolicy, construction_bound, constructions, execute, legitimate_configuration, stage_label
from ssbfs.topologies import path

for d in range(1, 6):
    t = path(d + 1)
    trace = execute(t, legitimate_configuration(t), DaemonPolicy("sync"), "constructions:1")
    c = constructions(trace)[0]
    print(f"D={d}: {c.rounds:3d} rounds (D^2+3D+1 = {construction_bound(d)}), max moves {c.max_moves} <= {2 * d + 1}")

# stage of each configuration of the D=3 run, one letter per step
t = path(4)
trace = execute(t, legitimate_configuration(t), DaemonPolicy("sync"), "constructions:1")
letters = "".join(stage_label(trace.configuration(i), t).stage.value[0] for i in range(trace.step_count + 1))
print(letters)

# how often each rule fires during the construction
codes, counts = np.unique(trace.activations[trace.activations > 0], return_counts=True)
print(dict(zip((int(x) for x in codes), (int(x) for x in counts))))
