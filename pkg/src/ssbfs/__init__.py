"""Simulator, property harness and bounded model checker for a self-stabilizing
BFS spanning-tree construction in the atomic-state model."""

from .analysis import (
    BASIC_CLOSURES,
    AttractorReport,
    BoundReport,
    ClosureProperty,
    Stage,
    StageLabel,
    attractor_report,
    bfs_tree_check,
    bound_report,
    closure_check,
    construction_bound,
    constructions,
    model_check_basics,
    move_language_check,
    stage_label,
)
from .daemon import ALL_POLICIES, DaemonPolicy, PolicyKind, Stop, StopReason, Trace, execute, round_boundaries
from .model import (
    Configuration,
    PackedState,
    Phase,
    ProcessState,
    Status,
    Topology,
    TopologyError,
    build_topology,
    count_configurations,
    enumerate_configurations,
    legitimate_configuration,
    pack,
    random_configuration,
    unpack,
)
from .predicates import (
    PredicateName,
    child_set,
    count_potential,
    eval_analysis_predicate,
    eval_guard_predicate,
)
from .rules import GuardExclusivityError, Rule, RuleName, StepRecord, apply_rule, enabled_rule, step

__version__ = "0.1.0"

__all__ = [
    "ALL_POLICIES",
    "BASIC_CLOSURES",
    "AttractorReport",
    "BoundReport",
    "ClosureProperty",
    "Configuration",
    "DaemonPolicy",
    "GuardExclusivityError",
    "PackedState",
    "Phase",
    "PolicyKind",
    "PredicateName",
    "ProcessState",
    "Rule",
    "RuleName",
    "Stage",
    "StageLabel",
    "Status",
    "StepRecord",
    "Stop",
    "StopReason",
    "Topology",
    "TopologyError",
    "Trace",
    "apply_rule",
    "attractor_report",
    "bfs_tree_check",
    "bound_report",
    "build_topology",
    "child_set",
    "closure_check",
    "construction_bound",
    "constructions",
    "count_configurations",
    "count_potential",
    "enabled_rule",
    "enumerate_configurations",
    "eval_analysis_predicate",
    "eval_guard_predicate",
    "execute",
    "legitimate_configuration",
    "model_check_basics",
    "move_language_check",
    "pack",
    "random_configuration",
    "round_boundaries",
    "stage_label",
    "step",
    "unpack",
]
