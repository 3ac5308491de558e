"""Daemons, the execution driver and round accounting.

The driver is a single compiled loop.  It keeps the enabled set up to date
incrementally (a move at ``u`` can only change guards in ``N[u]``), closes
rounds as soon as every process enabled at the round start has moved or been
neutralized, and records a compact history that the trace checks in
:mod:`ssbfs.analysis` consume.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .attractors import L_AL, LEVEL_BITS, bfs_ok, config_levels, stage_code
from .model import Configuration, Topology
from .predicates import C, connection_candidates, potential_counts
from .rules import (
    GuardExclusivityError,
    Rule,
    RuleName,
    StepRecord,
    apply_action,
    guard_mask,
    nth_connection_target,
    pick_rule,
    satisfied_guards,
)

SYNC, CENTRAL_RANDOM, CENTRAL_MIN, DIST_RANDOM, ROUND_ROBIN, ADVERSARY, WEAKLY_FAIR = range(7)

STOP_NONE, STOP_LEVEL, STOP_ROUNDS, STOP_CONSTRUCTIONS, STOP_R1_COUNT = range(5)

(
    END_TARGET,
    END_STEP_LIMIT,
    END_NO_ENABLED,
    END_ROUND_LIMIT,
    END_GUARD_CLASH,
) = range(5)


class PolicyKind(str, Enum):
    SYNCHRONOUS = "sync"
    CENTRAL_RANDOM = "central-random"
    CENTRAL_MIN_ID = "central-min"
    DISTRIBUTED_RANDOM = "dist-random"
    ROUND_ROBIN = "round-robin"
    ADVERSARY_SCRIPT = "adversary"
    WEAKLY_FAIR_QUEUE = "weakly-fair"


_KIND_CODES = {kind: code for code, kind in enumerate(PolicyKind)}


class StopReason(str, Enum):
    TARGET_REACHED = "target-attractor-reached"
    STEP_LIMIT = "step-limit"
    FIXPOINT_IMPOSSIBLE = "fixpoint-impossible"
    ROUND_LIMIT = "round-limit"


@dataclass(frozen=True)
class DaemonPolicy:
    """Who moves each step.

    ``probability`` is used by the distributed random daemon and ``script`` by
    the adversary.  ``random_connection`` makes R3 join a seeded-random
    candidate instead of the smallest identifier.
    """

    kind: PolicyKind
    seed: int = 0
    probability: float = 0.5
    script: tuple[frozenset[int], ...] = ()
    random_connection: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.kind is PolicyKind.DISTRIBUTED_RANDOM and not 0.0 < self.probability <= 1.0:
            raise ValueError("activation probability must lie in (0, 1]")
        if self.kind is PolicyKind.ADVERSARY_SCRIPT and not self.script:
            raise ValueError("an adversary needs a nonempty script")
        object.__setattr__(self, "script", tuple(frozenset(int(u) for u in s) for s in self.script))

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "DaemonPolicy":
        """Parse a daemon flag: ``sync``, ``dist-random:0.3``, ``adversary:PATH`` ..."""
        name, _, arg = text.partition(":")
        kind = PolicyKind(name)
        if kind is PolicyKind.DISTRIBUTED_RANDOM:
            return cls(kind, seed, probability=float(arg) if arg else 0.5)
        if kind is PolicyKind.ADVERSARY_SCRIPT:
            if not arg:
                raise ValueError("adversary needs a script path")
            return cls(kind, seed, script=load_script(arg))
        if arg:
            raise ValueError(f"daemon {name} takes no argument")
        return cls(kind, seed)

    def label(self) -> str:
        if self.kind is PolicyKind.DISTRIBUTED_RANDOM:
            return f"{self.kind.value}:{self.probability:g}"
        return self.kind.value

    def _script_csr(self) -> tuple[np.ndarray, np.ndarray]:
        ptr = np.zeros(len(self.script) + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(s) for s in self.script])
        nodes = np.array([u for s in self.script for u in sorted(s)], dtype=np.int64)
        return ptr, nodes


def load_script(path: str | Path) -> tuple[frozenset[int], ...]:
    """An adversary script is a JSON list of node lists, replayed cyclically."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list) or not data:
        raise ValueError(f"{path}: expected a nonempty list of node lists")
    return tuple(frozenset(int(u) for u in entry) for entry in data)


ALL_POLICIES = (
    DaemonPolicy(PolicyKind.SYNCHRONOUS),
    DaemonPolicy(PolicyKind.CENTRAL_RANDOM),
    DaemonPolicy(PolicyKind.CENTRAL_MIN_ID),
    DaemonPolicy(PolicyKind.DISTRIBUTED_RANDOM, probability=0.5),
    DaemonPolicy(PolicyKind.ROUND_ROBIN),
    DaemonPolicy(PolicyKind.ADVERSARY_SCRIPT, script=(frozenset({0}), frozenset())),
    DaemonPolicy(PolicyKind.WEAKLY_FAIR_QUEUE),
)


@dataclass(frozen=True)
class Stop:
    """Stop condition: an attractor name, ``rounds:N``, ``constructions:N`` or ``r1:N``.

    ``constructions:N`` stops once N complete constructions (root R1 to the
    next root R1) have been observed after the first legitimate configuration.
    """

    kind: str
    value: int = 0

    @classmethod
    def parse(cls, text: str) -> "Stop":
        if text in LEVEL_BITS:
            return cls(text)
        name, _, arg = text.partition(":")
        if name not in ("rounds", "constructions", "r1") or not arg.isdigit():
            raise ValueError(f"bad stop condition {text!r}")
        return cls(name, int(arg))

    def codes(self) -> tuple[int, int]:
        if self.kind in LEVEL_BITS:
            return STOP_LEVEL, LEVEL_BITS[self.kind]
        if self.kind == "rounds":
            return STOP_ROUNDS, self.value
        if self.kind == "constructions":
            return STOP_CONSTRUCTIONS, self.value
        if self.kind == "r1":
            return STOP_R1_COUNT, self.value
        if self.kind == "none":
            return STOP_NONE, 0
        raise ValueError(self.kind)

    def __str__(self) -> str:
        return self.kind if self.kind in LEVEL_BITS else f"{self.kind}:{self.value}"


# --- selection ---------------------------------------------------------------


@njit(cache=True)
def _select(policy, enabled, rng, prob, state, stamps, prev, script_ptr, script_idx, sel):
    """Fill ``sel`` with a nonempty subset of the enabled nodes; returns its size.

    ``state`` holds ``[round-robin pointer, step counter]``; ``stamps`` and
    ``prev`` carry the weakly fair queue between calls.
    """
    n = enabled.shape[0]
    step = state[1]
    count = 0
    total = 0
    for u in range(n):
        sel[u] = False
        if enabled[u] != 0:
            total += 1
            if not prev[u]:
                stamps[u] = step
    if total == 0:
        return 0

    if policy == SYNC:
        for u in range(n):
            if enabled[u] != 0:
                sel[u] = True
        count = total
    elif policy == CENTRAL_RANDOM:
        pick = rng.integers(0, total)
        for u in range(n):
            if enabled[u] != 0:
                if pick == 0:
                    sel[u] = True
                    break
                pick -= 1
        count = 1
    elif policy == CENTRAL_MIN:
        for u in range(n):
            if enabled[u] != 0:
                sel[u] = True
                break
        count = 1
    elif policy == DIST_RANDOM:
        while count == 0:
            for u in range(n):
                if enabled[u] != 0 and rng.random() < prob:
                    sel[u] = True
                    count += 1
    elif policy == ROUND_ROBIN:
        start = state[0]
        for i in range(n):
            u = (start + i) % n
            if enabled[u] != 0:
                sel[u] = True
                state[0] = (u + 1) % n
                break
        count = 1
    elif policy == ADVERSARY:
        m = script_ptr.shape[0] - 1
        j = step % m
        for k in range(script_ptr[j], script_ptr[j + 1]):
            u = script_idx[k]
            if 0 <= u < n and enabled[u] != 0 and not sel[u]:
                sel[u] = True
                count += 1
        if count == 0:
            for u in range(n):
                if enabled[u] != 0:
                    sel[u] = True
                    break
            count = 1
    else:  # weakly fair: oldest continuously enabled process first
        best = -1
        for u in range(n):
            if enabled[u] != 0 and (best < 0 or stamps[u] < stamps[best]):
                best = u
        sel[best] = True
        count = 1

    for u in range(n):
        prev[u] = enabled[u] != 0
        if sel[u]:
            # a served process queues again behind everyone already waiting
            stamps[u] = step + 1
            prev[u] = False
    state[1] = step + 1
    return count


@dataclass
class SelectorState:
    """Mutable daemon state for stepping by hand with :func:`select`."""

    n: int
    seed: int = 0
    rng: np.random.Generator = field(init=False)
    counters: np.ndarray = field(init=False)
    stamps: np.ndarray = field(init=False)
    previous: np.ndarray = field(init=False)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)
        self.counters = np.zeros(2, dtype=np.int64)
        self.stamps = np.zeros(self.n, dtype=np.int64)
        self.previous = np.zeros(self.n, dtype=np.bool_)


def select(policy: DaemonPolicy, config: Configuration, enabled: Iterable[int], state: SelectorState) -> set[int]:
    """Nonempty subset of ``enabled`` chosen by ``policy``."""
    mask = np.zeros(config.n, dtype=np.int8)
    for u in enabled:
        mask[u] = 1
    if not mask.any():
        raise ValueError("no process is enabled")
    sel = np.zeros(config.n, dtype=np.bool_)
    sptr, sidx = _script_arrays(policy)
    _select(
        _KIND_CODES[policy.kind], mask, state.rng, policy.probability,
        state.counters, state.stamps, state.previous, sptr, sidx, sel,
    )
    return {int(u) for u in np.flatnonzero(sel)}


def _script_arrays(policy: DaemonPolicy):
    if policy.kind is PolicyKind.ADVERSARY_SCRIPT:
        return policy._script_csr()
    return np.zeros(2, dtype=np.int64), np.zeros(0, dtype=np.int64)


# --- the driver --------------------------------------------------------------


@njit(cache=True)
def _grow2(a, rows):
    out = np.empty((rows,) + a.shape[1:], dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True)
def _grow1(a, size):
    out = np.empty(size, dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True)
def _grow3(a, rows):
    out = np.empty((rows, a.shape[1], a.shape[2]), dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True)
def _execute(
    cfg0, ptr, idx, root, dist, diam, flags,
    policy, prob, script_ptr, script_idx, rng, random_target,
    stop_kind, stop_arg, max_steps, max_rounds, strict, record_configs,
):
    n = cfg0.shape[0]
    cap = 256
    acts = np.zeros((cap, n), dtype=np.int8)
    step_round = np.zeros(cap, dtype=np.int64)
    enabled_hist = np.zeros((cap + 1, n), dtype=np.int8)
    status_hist = np.zeros((cap + 1, n), dtype=np.int8)
    levels = np.zeros(cap + 1, dtype=np.int8)
    pots = np.zeros((cap + 1, 4), dtype=np.int32)
    rcolor = np.zeros(cap + 1, dtype=np.int8)
    bfs = np.zeros(cap + 1, dtype=np.bool_)
    stages = np.zeros(cap + 1, dtype=np.int8)
    round_ends = np.zeros(64, dtype=np.int64)
    configs = np.zeros((cap + 1 if record_configs else 1, n, 5), dtype=np.int32)

    cfg = cfg0.copy()
    enabled = np.zeros(n, dtype=np.int8)
    clashes = 0
    for u in range(n):
        m = guard_mask(cfg, ptr, idx, root, u, flags)
        if m & (m - 1):
            clashes += 1
        enabled[u] = pick_rule(m)

    def_state = np.zeros(2, dtype=np.int64)
    stamps = np.zeros(n, dtype=np.int64)
    prev = np.zeros(n, dtype=np.bool_)
    sel = np.zeros(n, dtype=np.bool_)
    pending = enabled != 0
    pending_count = 0
    for u in range(n):
        if pending[u]:
            pending_count += 1
    touched = np.zeros(n, dtype=np.bool_)
    new = cfg.copy()

    lv, fl = config_levels(cfg, ptr, idx, root, dist, diam)
    levels[0] = lv
    a, b, c, d = potential_counts(fl)
    pots[0, 0] = a
    pots[0, 1] = b
    pots[0, 2] = c
    pots[0, 3] = d
    rcolor[0] = cfg[root, C]
    bfs[0] = bfs_ok(cfg, dist, root)
    stages[0] = stage_code(cfg, fl, lv)
    enabled_hist[0] = enabled
    status_hist[0] = cfg[:, 3]
    if record_configs:
        configs[0] = cfg

    steps = 0
    rounds_done = 0
    al_seen = (lv & L_AL) != 0
    r1_total = 0
    r1_after_al = 0
    end = END_TARGET

    if strict and clashes > 0:
        end = END_GUARD_CLASH
    elif stop_kind == STOP_LEVEL and (lv & stop_arg) != 0:
        end = END_TARGET
    elif stop_kind == STOP_ROUNDS and stop_arg == 0:
        end = END_TARGET
    else:
        while True:
            if pending_count == 0:
                end = END_NO_ENABLED
                break
            if steps >= max_steps:
                end = END_STEP_LIMIT
                break
            if max_rounds >= 0 and rounds_done >= max_rounds:
                end = END_ROUND_LIMIT
                break
            _select(policy, enabled, rng, prob, def_state, stamps, prev, script_ptr, script_idx, sel)

            if steps + 1 > acts.shape[0]:
                size = 2 * acts.shape[0]
                acts = _grow2(acts, size)
                step_round = _grow1(step_round, size)
                enabled_hist = _grow2(enabled_hist, size + 1)
                status_hist = _grow2(status_hist, size + 1)
                levels = _grow1(levels, size + 1)
                pots = _grow2(pots, size + 1)
                rcolor = _grow1(rcolor, size + 1)
                bfs = _grow1(bfs, size + 1)
                stages = _grow1(stages, size + 1)
                if record_configs:
                    configs = _grow3(configs, size + 1)

            new[:, :] = cfg
            root_r1 = False
            for u in range(n):
                acts[steps, u] = 0
                if sel[u]:
                    rule = enabled[u]
                    acts[steps, u] = rule
                    target = -1
                    if rule == 9:
                        nth = 0
                        if random_target:
                            cnt = connection_candidates(cfg, ptr, idx, root, u)
                            nth = rng.integers(0, cnt)
                        target = nth_connection_target(cfg, ptr, idx, u, nth)
                    apply_action(cfg, new, u, rule, target, flags)
                    if rule == 7:
                        root_r1 = True
            cfg[:, :] = new
            step_round[steps] = rounds_done + 1

            # guards of u depend on N[u] only
            for u in range(n):
                touched[u] = False
            for u in range(n):
                if sel[u]:
                    touched[u] = True
                    for k in range(ptr[u], ptr[u + 1]):
                        touched[idx[k]] = True
            for u in range(n):
                if touched[u]:
                    m = guard_mask(cfg, ptr, idx, root, u, flags)
                    if m & (m - 1):
                        clashes += 1
                    enabled[u] = pick_rule(m)
            steps += 1

            for u in range(n):
                if pending[u] and (sel[u] or enabled[u] == 0):
                    pending[u] = False
                    pending_count -= 1
            if pending_count == 0:
                if rounds_done >= round_ends.shape[0]:
                    round_ends = _grow1(round_ends, 2 * round_ends.shape[0])
                round_ends[rounds_done] = steps
                rounds_done += 1
                for u in range(n):
                    pending[u] = enabled[u] != 0
                    if pending[u]:
                        pending_count += 1

            lv, fl = config_levels(cfg, ptr, idx, root, dist, diam)
            levels[steps] = lv
            a, b, c, d = potential_counts(fl)
            pots[steps, 0] = a
            pots[steps, 1] = b
            pots[steps, 2] = c
            pots[steps, 3] = d
            rcolor[steps] = cfg[root, C]
            bfs[steps] = bfs_ok(cfg, dist, root)
            stages[steps] = stage_code(cfg, fl, lv)
            enabled_hist[steps] = enabled
            status_hist[steps] = cfg[:, 3]
            if record_configs:
                configs[steps] = cfg

            if root_r1:
                r1_total += 1
                if al_seen:
                    r1_after_al += 1
            if lv & L_AL:
                al_seen = True

            if strict and clashes > 0:
                end = END_GUARD_CLASH
                break
            if stop_kind == STOP_LEVEL and (lv & stop_arg) != 0:
                break
            if stop_kind == STOP_ROUNDS and rounds_done >= stop_arg:
                break
            if stop_kind == STOP_CONSTRUCTIONS and r1_after_al >= stop_arg + 1:
                break
            if stop_kind == STOP_R1_COUNT and r1_total >= stop_arg:
                break

    k = steps + 1
    return (
        steps, end, clashes,
        acts[:steps].copy(), step_round[:steps].copy(), round_ends[:rounds_done].copy(),
        enabled_hist[:k].copy(), status_hist[:k].copy(), levels[:k].copy(),
        pots[:k].copy(), rcolor[:k].copy(), bfs[:k].copy(), stages[:k].copy(),
        configs[: (k if record_configs else 1)].copy(),
    )


_END_REASONS = {
    END_TARGET: StopReason.TARGET_REACHED,
    END_STEP_LIMIT: StopReason.STEP_LIMIT,
    END_NO_ENABLED: StopReason.FIXPOINT_IMPOSSIBLE,
    END_ROUND_LIMIT: StopReason.ROUND_LIMIT,
}


@dataclass
class Trace:
    """A recorded execution.

    Row ``i`` of the per-configuration arrays describes the configuration
    reached after ``i`` steps (row 0 is the initial one).  ``activations[s]``
    holds the rule code executed by each node during step ``s`` (0 = idle).
    ``configurations`` is present only when the execution was recorded in full.
    """

    topology: Topology
    initial: Configuration
    policy: DaemonPolicy
    stop: Stop
    stop_reason: StopReason
    activations: np.ndarray
    step_round: np.ndarray
    round_ends: np.ndarray
    enabled: np.ndarray
    statuses: np.ndarray
    levels: np.ndarray
    potentials: np.ndarray
    root_colors: np.ndarray
    bfs: np.ndarray
    stages: np.ndarray
    configurations: np.ndarray | None
    guard_clashes: int = 0

    @property
    def step_count(self) -> int:
        return int(self.activations.shape[0])

    @property
    def round_boundaries(self) -> list[int]:
        """Number of steps in each completed-round prefix."""
        return [int(x) for x in self.round_ends]

    @property
    def rounds(self) -> int:
        """Rounds started (the last one possibly incomplete)."""
        return int(self.step_round[-1]) if self.step_count else 0

    def configuration(self, i: int) -> Configuration:
        if self.configurations is None:
            raise ValueError("execution was not recorded in full")
        return Configuration(self.configurations[i])

    @property
    def final(self) -> Configuration:
        return self.configuration(self.step_count)

    @property
    def steps(self) -> list[StepRecord]:
        out = []
        for s in range(self.step_count):
            before, after = self.configuration(s), self.configuration(s + 1)
            activated = {}
            for u in np.flatnonzero(self.activations[s]):
                name = RuleName(int(self.activations[s, u]))
                target = after[int(u)].parent if name is RuleName.R3 else None
                activated[int(u)] = Rule(name, target)
            out.append(StepRecord(activated, before, after))
        return out

    def rule_sequence(self) -> list[dict[int, str]]:
        return [
            {int(u): RuleName(int(row[u])).name for u in np.flatnonzero(row)}
            for row in self.activations
        ]

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for rec in trace_records(self):
                fh.write(json.dumps(rec) + "\n")


def trace_records(trace: Trace) -> Iterable[dict]:
    for s, row in enumerate(trace.activations):
        yield {
            "step": s + 1,
            "activated": [
                {"node": int(u), "rule": RuleName(int(row[u])).name} for u in np.flatnonzero(row)
            ],
            "round": int(trace.step_round[s]),
        }


def round_bound_al(topology: Topology) -> int:
    n, d = topology.n, topology.diameter
    return 16 * n - 13 + (d + 2) * n * (2 * n + 3)


def default_max_steps(topology: Topology) -> int:
    return 64 * topology.n * round_bound_al(topology)


def execute(
    topology: Topology,
    initial: Configuration,
    policy: DaemonPolicy,
    stop: Stop | str = "Al",
    max_steps: int | None = None,
    *,
    max_rounds: int | None = None,
    strict: bool = False,
    record: bool = True,
    flags: int = 0,
    rng: np.random.Generator | None = None,
) -> Trace:
    """Run ``initial`` under ``policy`` until ``stop`` holds or a budget runs out.

    Budget exhaustion is reported in ``stop_reason``.  With ``strict`` a
    process with two satisfied guards raises :class:`GuardExclusivityError`.
    """
    if isinstance(stop, str):
        stop = Stop.parse(stop)
    initial.validate(topology)
    if max_steps is None:
        max_steps = default_max_steps(topology)
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    if rng is None:
        rng = np.random.default_rng(policy.seed)
    stop_kind, stop_arg = stop.codes()
    sptr, sidx = _script_arrays(policy)
    (
        steps, end, clashes, acts, step_round, round_ends, enabled, statuses,
        levels, pots, rcolor, bfs, stages, configs,
    ) = _execute(
        initial.array, topology.adj_ptr, topology.adj_idx, topology.root, topology.dist,
        topology.diameter, flags, _KIND_CODES[policy.kind], float(policy.probability),
        sptr, sidx, rng, policy.random_connection, stop_kind, stop_arg, int(max_steps),
        -1 if max_rounds is None else int(max_rounds), strict, record,
    )
    if end == END_GUARD_CLASH:
        last = Configuration(configs[-1]) if record else initial
        for u in range(topology.n):
            guards = satisfied_guards(last, topology, u, flags)
            if len(guards) > 1:
                raise GuardExclusivityError(u, guards)
        raise GuardExclusivityError(-1, [])
    return Trace(
        topology=topology,
        initial=initial,
        policy=policy,
        stop=stop,
        stop_reason=_END_REASONS[end],
        activations=acts,
        step_round=step_round,
        round_ends=round_ends,
        enabled=enabled,
        statuses=statuses,
        levels=levels,
        potentials=pots,
        root_colors=rcolor,
        bfs=bfs,
        stages=stages,
        configurations=configs if record else None,
        guard_clashes=int(clashes),
    )


def round_boundaries(trace: Trace, topology: Topology | None = None) -> list[int]:
    """Recompute round ends from the raw steps, independently of the driver.

    Uses the recorded configurations when present, otherwise the recorded
    enabled sets.
    """
    topology = topology or trace.topology
    if trace.configurations is not None:
        enabled_sets = []
        for i in range(trace.step_count + 1):
            config = trace.configuration(i)
            enabled_sets.append(
                {u for u in range(topology.n) if satisfied_guards(config, topology, u)}
            )
    else:
        enabled_sets = [set(np.flatnonzero(row).tolist()) for row in trace.enabled]
    bounds = []
    pending = set(enabled_sets[0])
    for s in range(trace.step_count):
        moved = set(np.flatnonzero(trace.activations[s]).tolist())
        pending -= moved
        pending &= enabled_sets[s + 1]
        if not pending:
            bounds.append(s + 1)
            pending = set(enabled_sets[s + 1])
    return bounds


def round_starts(trace: Trace) -> list[int]:
    """Configuration indices at which rounds begin (including the initial one)."""
    return [0] + trace.round_boundaries


def policy_for_trial(index: int, seed: int) -> DaemonPolicy:
    """Cycle through every daemon kind, for sweeps over all policies."""
    base = ALL_POLICIES[index % len(ALL_POLICIES)]
    return DaemonPolicy(base.kind, seed, base.probability, base.script, base.random_connection)


def script_from_sets(sets: Sequence[Iterable[int]]) -> tuple[frozenset[int], ...]:
    return tuple(frozenset(s) for s in sets)
