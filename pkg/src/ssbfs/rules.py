"""Rule guards, rule actions and computation steps.

Rules are coded as small integers (``RuleName``); ``guard_mask`` returns every
satisfied guard of a process as a bitmask so that the exclusivity of guards
can be checked rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Mapping, NamedTuple

import numpy as np
from numba import njit

from .model import NIL, Configuration, ProcessState, Topology
from .predicates import (
    C,
    IDLE,
    MUTANT_RC5_KEEPS_PARENT,
    P,
    PH,
    POWER,
    S,
    STRONG_E,
    TS,
    WEAK_E,
    WORKING,
    conflict,
    connection_candidates,
    connection_ready,
    detached,
    end_intermediate_phase,
    end_last_phase,
    faulty,
    has_child,
    illegal_child,
    illegal_live_root,
    isolated,
    new_phase,
    no_strong_e_neighbor,
    ok,
    power_faulty,
    quiet_subtree,
    strong_conflict,
    strong_e_ready,
)


class RuleName(IntEnum):
    RC1 = 1
    RC2 = 2
    RC3 = 3
    RC4 = 4
    RC5 = 5
    RC6 = 6
    R1 = 7
    R2 = 8
    R3 = 9
    R4 = 10
    R5 = 11
    R6 = 12
    R7 = 13

    @property
    def root_only(self) -> bool:
        return self in ROOT_RULES


ROOT_RULES = frozenset({RuleName.RC1, RuleName.RC2, RuleName.RC3, RuleName.R1, RuleName.R2})
NONE = 0

# permissive-mode resolution order when several guards hold at once
PRIORITY = np.array([4, 5, 3, 1, 2, 6, 7, 8, 9, 10, 11, 12, 13], dtype=np.int64)


class Rule(NamedTuple):
    name: RuleName
    connection_target: int | None = None

    def __str__(self) -> str:
        if self.connection_target is None:
            return self.name.name
        return f"{self.name.name}->{self.connection_target}"


class GuardExclusivityError(RuntimeError):
    def __init__(self, node: int, rules: list[RuleName]):
        self.node = node
        self.rules = rules
        names = ", ".join(r.name for r in rules)
        super().__init__(f"node {node} has several satisfied guards: {names}")


class RuleNotEnabledError(ValueError):
    pass


@dataclass(frozen=True)
class StepRecord:
    activated: dict[int, Rule]
    before: Configuration
    after: Configuration


# --- kernels -----------------------------------------------------------------


@njit(cache=True)
def guard_mask(cfg, ptr, idx, root, u, flags):
    """Bit ``1 << code`` is set for every rule whose guard holds at ``u``."""
    m = 0
    if u == root:
        conf = conflict(cfg, ptr, idx, root, u)
        if not conf and power_faulty(cfg, ptr, idx, u) and quiet_subtree(cfg, ptr, idx, u):
            m |= 1 << 1
        if detached(cfg, ptr, idx, root, u) and strong_e_ready(cfg, ptr, idx, u):
            m |= 1 << 2
        if conf:
            m |= 1 << 3
        if ok(cfg, ptr, idx, root, u, flags):
            if end_last_phase(cfg, ptr, idx, u) and no_strong_e_neighbor(cfg, ptr, idx, u):
                m |= 1 << 7
            if end_intermediate_phase(cfg, ptr, idx, u):
                m |= 1 << 8
        return m

    if strong_conflict(cfg, ptr, idx, u, flags):
        m |= 1 << 4
    elif (
        conflict(cfg, ptr, idx, root, u)
        or faulty(cfg, ptr, idx, root, u)
        or power_faulty(cfg, ptr, idx, u)
        or illegal_live_root(cfg, ptr, idx, root, u)
        or illegal_child(cfg, ptr, idx, root, u)
    ):
        m |= 1 << 5
    if detached(cfg, ptr, idx, root, u) and isolated(cfg, ptr, idx, u):
        clear = True
        for k in range(ptr[u], ptr[u + 1]):
            v = idx[k]
            if cfg[v, S] == POWER and cfg[v, C] != cfg[u, C]:
                clear = False
                break
        if clear:
            m |= 1 << 6
    if ok(cfg, ptr, idx, root, u, flags):
        if connection_candidates(cfg, ptr, idx, root, u) > 0:
            m |= 1 << 9
        if new_phase(cfg, ptr, idx, u):
            if has_child(cfg, ptr, idx, u):
                m |= 1 << 10
            elif no_strong_e_neighbor(cfg, ptr, idx, u):
                m |= 1 << 11
        if end_intermediate_phase(cfg, ptr, idx, u):
            m |= 1 << 12
        if cfg[u, P] != NIL and end_last_phase(cfg, ptr, idx, u):
            m |= 1 << 13
    return m


@njit(cache=True)
def pick_rule(mask):
    if mask == 0:
        return 0
    for i in range(PRIORITY.shape[0]):
        code = PRIORITY[i]
        if mask & (1 << code):
            return code
    return 0


@njit(cache=True)
def popcount(mask):
    c = 0
    while mask:
        mask &= mask - 1
        c += 1
    return c


@njit(cache=True)
def enabled_vector(cfg, ptr, idx, root, flags):
    """Chosen rule code per node (0 when disabled) and the number of multi-guard nodes."""
    n = cfg.shape[0]
    rules = np.zeros(n, dtype=np.int8)
    clashes = 0
    for u in range(n):
        m = guard_mask(cfg, ptr, idx, root, u, flags)
        if m & (m - 1):
            clashes += 1
        rules[u] = pick_rule(m)
    return rules, clashes


@njit(cache=True)
def nth_connection_target(cfg, ptr, idx, u, nth):
    seen = 0
    for k in range(ptr[u], ptr[u + 1]):
        v = idx[k]
        if cfg[v, S] == POWER and cfg[v, C] != cfg[u, C]:
            if seen == nth:
                return v
            seen += 1
    return NIL


@njit(cache=True)
def apply_action(cfg, out, u, rule, target, flags):
    """Write the action of ``rule`` at ``u`` into ``out``; guards read ``cfg``."""
    if rule == 1 or rule == 2:
        out[u, S] = WORKING
    elif rule == 3:
        out[u, S] = STRONG_E
    elif rule == 4:
        out[u, S] = STRONG_E
        out[u, P] = NIL
    elif rule == 5:
        out[u, S] = WEAK_E
        if not flags & MUTANT_RC5_KEEPS_PARENT:
            out[u, P] = NIL
    elif rule == 6:
        out[u, S] = IDLE
    elif rule == 7:
        out[u, C] = 1 - cfg[u, C]
        out[u, S] = POWER
    elif rule == 8:
        out[u, PH] = 1 - cfg[u, PH]
        out[u, S] = WORKING
    elif rule == 9:
        out[u, C] = cfg[target, C]
        out[u, PH] = cfg[target, PH]
        out[u, S] = IDLE
        out[u, P] = target
        out[u, TS] = target
    elif rule == 10:
        out[u, PH] = cfg[cfg[u, P], PH]
        out[u, S] = WORKING
    elif rule == 11:
        out[u, PH] = cfg[cfg[u, P], PH]
        out[u, S] = POWER
    elif rule == 12:
        out[u, S] = IDLE
    elif rule == 13:
        out[u, S] = IDLE
        out[u, P] = NIL


@njit(cache=True)
def step_kernel(cfg, ptr, idx, root, nodes, rules, flags):
    """Simultaneous step; R3 joins the smallest-identifier candidate."""
    out = cfg.copy()
    for i in range(nodes.shape[0]):
        u = nodes[i]
        target = NIL
        if rules[i] == 9:
            target = nth_connection_target(cfg, ptr, idx, u, 0)
        apply_action(cfg, out, u, rules[i], target, flags)
    return out


# --- Python API --------------------------------------------------------------


def _arrays(config: Configuration, topology: Topology):
    if config.n != topology.n:
        raise ValueError(f"configuration has {config.n} nodes, topology has {topology.n}")
    return config.array, topology.adj_ptr, topology.adj_idx, topology.root


def satisfied_guards(config: Configuration, topology: Topology, u: int, flags: int = 0) -> list[RuleName]:
    cfg, ptr, idx, root = _arrays(config, topology)
    m = guard_mask(cfg, ptr, idx, root, u, flags)
    return [r for r in RuleName if m & (1 << r)]


def connection_targets(config: Configuration, topology: Topology, u: int) -> list[int]:
    cfg, ptr, idx, root = _arrays(config, topology)
    if u == root or not connection_ready(cfg, ptr, idx, root, u):
        return []
    return [v for v in topology.neighbors(u) if cfg[v, S] == POWER and cfg[v, C] != cfg[u, C]]


def enabled_rule(
    config: Configuration,
    topology: Topology,
    u: int,
    *,
    strict: bool = True,
    rng: np.random.Generator | None = None,
    flags: int = 0,
) -> Rule | None:
    """The rule ``u`` may execute, or ``None``.

    With ``strict`` a process with two satisfied guards raises
    :class:`GuardExclusivityError`; otherwise the fixed priority decides.  R3
    joins the smallest-identifier candidate unless ``rng`` is given.
    """
    guards = satisfied_guards(config, topology, u, flags)
    if not guards:
        return None
    if len(guards) > 1 and strict:
        raise GuardExclusivityError(u, guards)
    name = RuleName(int(pick_rule(sum(1 << g for g in guards))))
    if name is not RuleName.R3:
        return Rule(name)
    targets = connection_targets(config, topology, u)
    target = targets[0] if rng is None else targets[int(rng.integers(len(targets)))]
    return Rule(name, target)


def enabled_processes(config: Configuration, topology: Topology, *, strict: bool = True) -> dict[int, Rule]:
    rules = {}
    for u in range(topology.n):
        rule = enabled_rule(config, topology, u, strict=strict)
        if rule is not None:
            rules[u] = rule
    return rules


def _check_enabled(config, topology, u, rule: Rule, flags: int) -> None:
    if rule.name not in satisfied_guards(config, topology, u, flags):
        raise RuleNotEnabledError(f"{rule.name.name} is not enabled at node {u}")
    if rule.name is RuleName.R3:
        if rule.connection_target not in connection_targets(config, topology, u):
            raise RuleNotEnabledError(f"Connection({u}, {rule.connection_target}) does not hold")
    elif rule.connection_target is not None:
        raise ValueError("only R3 carries a connection target")


def apply_rule(config: Configuration, topology: Topology, u: int, rule: Rule | RuleName, flags: int = 0) -> ProcessState:
    """The new local state of ``u`` after executing ``rule``; nothing else changes."""
    if isinstance(rule, RuleName):
        rule = Rule(rule, connection_targets(config, topology, u)[0] if rule is RuleName.R3 else None)
    _check_enabled(config, topology, u, rule, flags)
    out = config.array.copy()
    target = NIL if rule.connection_target is None else rule.connection_target
    apply_action(config.array, out, u, int(rule.name), target, flags)
    return Configuration(out)[u]


def step(
    config: Configuration,
    topology: Topology,
    activation: Iterable[int] | Mapping[int, Rule],
    *,
    strict: bool = True,
    flags: int = 0,
) -> StepRecord:
    """One computation step: every activated guard reads ``config``, writes land together."""
    if isinstance(activation, Mapping):
        chosen = dict(activation)
    else:
        chosen = {}
        for u in activation:
            rule = enabled_rule(config, topology, u, strict=strict, flags=flags)
            if rule is None:
                raise RuleNotEnabledError(f"node {u} is not enabled")
            chosen[u] = rule
    if not chosen:
        raise ValueError("activation set is empty")
    out = config.array.copy()
    for u, rule in chosen.items():
        _check_enabled(config, topology, u, rule, flags)
        target = NIL if rule.connection_target is None else rule.connection_target
        apply_action(config.array, out, u, int(rule.name), target, flags)
    return StepRecord(chosen, config, Configuration(out))
