"""
Exhaustive checks on the two-node path
======================================

All 960 configurations of P2 are enumerated.  Liveness and guard
exclusivity hold everywhere; the not-unSafe closure breaks only from
configurations holding a Faulty child, and holds on every step that starts
inside A1.
"""

from ssbfs import BASIC_CLOSURES, closure_check, model_check_basics
from ssbfs.topologies import path

t = path(2)
basics = model_check_basics(t)
print(f"{basics.configurations} configurations, dead={basics.liveness_violations}, clashes={basics.exclusivity_violations}")

everywhere = closure_check(t, BASIC_CLOSURES)
for prop, count in everywhere.counts.items():
    print(f"{prop.value:>24}: {count} / {everywhere.steps_checked}")

v = everywhere.violations[0]
print("counterexample:", v.property.value, "activating", sorted(v.activation))
for u, s in enumerate(v.before):
    print(f"  node {u}: {s}")

inside = closure_check(t, BASIC_CLOSURES, within="A1")
print(f"steps from A1: {len(inside)} violations / {inside.steps_checked}")
