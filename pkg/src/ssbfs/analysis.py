"""Attractor membership, legitimacy checks, trace checks and the bounded model checker."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import numpy as np
from numba import njit

from .attractors import (
    L_A1,
    L_A2,
    L_A3,
    L_A4,
    L_AL,
    LEVEL_BITS,
    STAGE_BACKWARDING,
    STAGE_EXPANSION,
    STAGE_FORWARDING,
    base_levels,
    config_levels,
    in_a4_next,
    in_a4kl,
    in_a5,
    in_al,
)
from .daemon import Trace
from .model import (
    DEFAULT_ENUMERATION_CAP,
    Configuration,
    Topology,
    count_configurations,
    local_states,
    random_configuration_array,
    _encode_row,
)
from .predicates import (
    C,
    F_FAULTY,
    F_ILLEGAL_LIVE_ROOT,
    F_ILT,
    F_INFL,
    F_PIC,
    F_PIR,
    F_PP,
    F_UNREG,
    F_UNSAFE,
    IDLE,
    LITERAL_STRONG_CONFLICT,
    P,
    POWER,
    S,
    STRONG_E,
    WEAK_E,
    WORKING,
    analysis_flags,
    power_faulty,
    strong_conflict,
)
from .rules import RuleName, enabled_vector, guard_mask, step_kernel

# --- attractor report --------------------------------------------------------


@dataclass(frozen=True)
class AttractorReport:
    a1: bool
    a2: bool
    a3: bool
    a4: bool
    a5_levels: frozenset[int]
    a4kl_members: frozenset[tuple[int, int]]
    al: bool
    legitimate_bfs: bool

    @property
    def level(self) -> str:
        for name, flag in (("Al", self.al), ("A4", self.a4), ("A3", self.a3), ("A2", self.a2), ("A1", self.a1)):
            if flag:
                return name
        return "A0"


def attractor_report(config: Configuration, topology: Topology) -> AttractorReport:
    """Every attractor definition evaluated at ``config``.

    ``a4kl_members`` lists ``(k, l)`` for ``1 <= k <= l <= D+1`` and the
    ``(l+1, l)`` family for ``0 <= l <= D+1``.
    """
    cfg, ptr, idx, root, dist = config.array, topology.adj_ptr, topology.adj_idx, topology.root, topology.dist
    d = topology.diameter
    fl = analysis_flags(cfg, ptr, idx, root, dist)
    lv = base_levels(cfg, fl)
    a4 = bool(lv & L_A4)
    a5: set[int] = set()
    kl: set[tuple[int, int]] = set()
    if a4:
        for l in range(d + 2):
            if in_a5(cfg, fl, dist, root, l):
                a5.add(l)
            for k in range(1, l + 1):
                if in_a4kl(cfg, ptr, idx, fl, dist, root, k, l):
                    kl.add((k, l))
            if in_a4_next(cfg, ptr, idx, fl, dist, root, l):
                kl.add((l + 1, l))
    al = a4 and bool(in_al(cfg, ptr, idx, fl, dist, root, d))
    ok, _ = bfs_tree_check(config, topology)
    return AttractorReport(
        a1=bool(lv & L_A1),
        a2=bool(lv & L_A2),
        a3=bool(lv & L_A3),
        a4=a4,
        a5_levels=frozenset(a5),
        a4kl_members=frozenset(kl),
        al=al,
        legitimate_bfs=al and ok,
    )


def level_mask(config: Configuration, topology: Topology) -> int:
    lv, _ = config_levels(
        config.array, topology.adj_ptr, topology.adj_idx, topology.root, topology.dist, topology.diameter
    )
    return int(lv)


def bfs_tree_check(config: Configuration, topology: Topology) -> tuple[bool, list[int]]:
    """Every non-root must have TS pointing one hop closer to the root."""
    bad = []
    for u in range(topology.n):
        if u == topology.root:
            continue
        ts = config[u].tree_parent
        if ts is None or topology.distances[ts] != topology.distances[u] - 1:
            bad.append(u)
    return not bad, bad


# --- stages ------------------------------------------------------------------


class Stage(str, Enum):
    FORWARDING = "Forwarding"
    EXPANSION = "Expansion"
    BACKWARDING = "Backwarding"
    NOT_IN_PHASE = "NotInPhase"


_STAGE_BY_CODE = {
    STAGE_FORWARDING: Stage.FORWARDING,
    STAGE_EXPANSION: Stage.EXPANSION,
    STAGE_BACKWARDING: Stage.BACKWARDING,
}


@dataclass(frozen=True)
class StageLabel:
    stage: Stage
    working_height: int


def stage_label(config: Configuration, topology: Topology) -> StageLabel:
    """Phase stage of an A4 configuration.

    ``working_height`` is the largest tree depth of a Working process of the
    legal tree (the root has depth 0), and 0 when there is none.
    """
    cfg, ptr, idx, root = config.array, topology.adj_ptr, topology.adj_idx, topology.root
    fl = analysis_flags(cfg, ptr, idx, root, topology.dist)
    if not base_levels(cfg, fl) & L_A4:
        return StageLabel(Stage.NOT_IN_PHASE, 0)
    infl = [u for u in range(topology.n) if fl[u] & F_INFL]
    if any(cfg[u, S] != POWER for u in infl):
        stage = Stage.FORWARDING
    elif infl:
        stage = Stage.EXPANSION
    else:
        stage = Stage.BACKWARDING
    height = 0
    for u in range(topology.n):
        if fl[u] & F_ILT and cfg[u, S] == WORKING:
            depth, x = 0, u
            while x != root:
                x = int(cfg[x, P])
                depth += 1
            height = max(height, depth)
    return StageLabel(stage, height)


# --- move languages ----------------------------------------------------------

# next-symbol table of the non-root cycle R3 R5 (R6 R4)* R7
_FOLLOWS = {
    RuleName.R3: {RuleName.R5},
    RuleName.R5: {RuleName.R6, RuleName.R7},
    RuleName.R6: {RuleName.R4},
    RuleName.R4: {RuleName.R6, RuleName.R7},
    RuleName.R7: {RuleName.R3},
}


def accepts_moves(sequence: Iterable[RuleName | str], is_root: bool) -> bool:
    """Whether a rule sequence fits the cyclic move pattern of its role.

    The sequence may start anywhere inside the cycle and stop before its end.
    """
    last = None
    for sym in sequence:
        sym = RuleName[sym] if isinstance(sym, str) else RuleName(sym)
        if is_root:
            if sym not in (RuleName.R1, RuleName.R2):
                return False
            continue
        if sym not in _FOLLOWS:
            return False
        if last is not None and sym not in _FOLLOWS[last]:
            return False
        last = sym
    return True


@njit(cache=True)
def _language_scan(acts, start, root):
    n = acts.shape[1]
    last = np.zeros(n, dtype=np.int8)
    ok = np.ones(n, dtype=np.bool_)
    for s in range(start, acts.shape[0]):
        for u in range(n):
            a = acts[s, u]
            if a == 0 or not ok[u]:
                continue
            if u == root:
                if a != 7 and a != 8:
                    ok[u] = False
                continue
            if a < 9:
                ok[u] = False
                continue
            p = last[u]
            if p == 9:
                good = a == 11
            elif p == 11 or p == 10:
                good = a == 12 or a == 13
            elif p == 12:
                good = a == 10
            elif p == 13:
                good = a == 9
            else:
                good = True
            if not good:
                ok[u] = False
            last[u] = a
    return ok


def move_language_check(trace: Trace, from_step: int = 0) -> dict[int, bool]:
    """Per-process verdict for the moves made from step ``from_step`` onward."""
    ok = _language_scan(trace.activations, from_step, trace.topology.root)
    return {u: bool(ok[u]) for u in range(trace.topology.n)}


def first_index(trace: Trace, bit: int) -> int | None:
    hits = np.flatnonzero(trace.levels & bit)
    return int(hits[0]) if hits.size else None


# --- round-indexed trace checks ----------------------------------------------


def rounds_to(trace: Trace, bit: int) -> int | None:
    """Round in which the attractor is first reached (0 if it holds initially)."""
    i = first_index(trace, bit)
    if i is None:
        return None
    return 0 if i == 0 else int(trace.step_round[i - 1])


@njit(cache=True)
def _root_gaps(acts, step_round, starts, levels, root):
    """Largest number of rounds from an A4 round start to the next root move.

    Windows that end with the trace are counted only if they already exceed
    the largest finished gap (so an unbounded wait is still visible).
    """
    worst = 0
    open_worst = 0
    total_rounds = starts.shape[0] - 1
    nsteps = acts.shape[0]
    next_root = np.full(nsteps + 1, -1, dtype=np.int64)
    for s in range(nsteps - 1, -1, -1):
        next_root[s] = s if acts[s, root] != 0 else next_root[s + 1]
    for j in range(starts.shape[0]):
        c = starts[j]
        if not levels[c] & L_A4:
            continue
        s = next_root[c] if c < nsteps else -1
        if s >= 0:
            gap = step_round[s] - j
            if gap > worst:
                worst = gap
        else:
            gap = total_rounds - j
            if gap > open_worst:
                open_worst = gap
    return worst, open_worst


@njit(cache=True)
def _recovery_scan(statuses, acts, starts, levels, root):
    """Counts of (checked, violated) windows for the three status lemmas."""
    n = statuses.shape[1]
    out = np.zeros(6, dtype=np.int64)
    nstarts = starts.shape[0]
    for j in range(nstarts):
        c = starts[j]
        for u in range(n):
            s = statuses[c, u]
            if s == STRONG_E and j + 2 < nstarts:
                e = starts[j + 2]
                good = False
                for i in range(c + 1, e + 1):
                    t = statuses[i, u]
                    if (u == root and t != STRONG_E) or (u != root and t == IDLE):
                        good = True
                        break
                out[0] += 1
                if not good:
                    out[1] += 1
            elif s == WEAK_E and j + 2 < nstarts:
                e = starts[j + 2]
                good = False
                for i in range(c + 1, e + 1):
                    t = statuses[i, u]
                    if t == IDLE or t == STRONG_E:
                        good = True
                        break
                out[2] += 1
                if not good:
                    out[3] += 1
            elif s == POWER and levels[c] & L_A1 and j + 4 < nstarts:
                e = starts[j + 4]
                good = False
                for i in range(c, e):
                    if statuses[i + 1, u] != POWER or acts[i, u] == 7:
                        good = True
                        break
                out[4] += 1
                if not good:
                    out[5] += 1
    return out


@njit(cache=True)
def _potential_scan(pots, rcolor, starts, levels):
    """(checked, violated) window counts for the PIC and PIR potentials."""
    out = np.zeros(4, dtype=np.int64)
    nstarts = starts.shape[0]
    for j in range(nstarts - 4):
        a = starts[j]
        b = starts[j + 4]
        if levels[a] & L_A1 and pots[a, 0] > 0:
            steady = True
            for i in range(a, b + 1):
                if rcolor[i] != rcolor[a]:
                    steady = False
                    break
            if steady:
                out[0] += 1
                if pots[b, 0] + pots[b, 1] >= pots[a, 0] + pots[a, 1]:
                    out[1] += 1
        if levels[a] & L_A2 and pots[a, 2] > 0:
            out[2] += 1
            if pots[b, 2] + pots[b, 3] >= pots[a, 2] + pots[a, 3]:
                out[3] += 1
    return out


@dataclass
class Construction:
    start_step: int
    end_step: int
    rounds: int
    max_moves: int
    bfs_at_start: bool


@dataclass
class BoundReport:
    """Round measurements of one trace next to the proven bounds."""

    n: int
    diameter: int
    rounds_to: dict[str, int | None]
    bounds: dict[str, int]
    max_root_gap: int
    open_root_gap: int
    root_gap_bound: int
    constructions: list[Construction]
    recovery: dict[str, tuple[int, int]]
    potentials: dict[str, tuple[int, int]]
    language_ok: bool | None
    stage_spans: dict[str, int]
    violations: list[str] = field(default_factory=list)

    @property
    def construction_rounds(self) -> int | None:
        return self.constructions[0].rounds if self.constructions else None

    @property
    def max_moves_per_process(self) -> int | None:
        return max((c.max_moves for c in self.constructions), default=None)

    @property
    def ok(self) -> bool:
        return not self.violations


def construction_bound(diameter: int) -> int:
    return diameter * diameter + 3 * diameter + 1


def attractor_bounds(n: int, diameter: int) -> dict[str, int]:
    return {
        "A1": 1,
        "A2": 8 * n - 7,
        "A3": 16 * n - 15,
        "A4": 16 * n - 13,
        "Al": 16 * n - 13 + (diameter + 2) * n * (2 * n + 3),
    }


def constructions(trace: Trace) -> list[Construction]:
    """Root R1 to next root R1 segments that start after the first Al configuration."""
    al = first_index(trace, L_AL)
    if al is None:
        return []
    root = trace.topology.root
    r1 = [s for s in np.flatnonzero(trace.activations[:, root] == RuleName.R1) if s >= al]
    out = []
    for a, b in zip(r1, r1[1:]):
        moves = np.count_nonzero(trace.activations[a:b], axis=0)
        out.append(
            Construction(
                start_step=int(a),
                end_step=int(b),
                rounds=int(trace.step_round[b] - trace.step_round[a]),
                max_moves=int(moves.max()),
                bfs_at_start=bool(trace.bfs[a]),
            )
        )
    return out


def bfs_at_constructions(trace: Trace) -> tuple[int, int]:
    """(checked, failed) root R1 moves after Al with a legitimate TS tree."""
    al = first_index(trace, L_AL)
    if al is None:
        return 0, 0
    root = trace.topology.root
    steps = [s for s in np.flatnonzero(trace.activations[:, root] == RuleName.R1) if s >= al]
    return len(steps), sum(1 for s in steps if not trace.bfs[s])


def _stage_spans(trace: Trace, starts: np.ndarray) -> dict[str, int]:
    """Longest run of consecutive round starts sharing a stage, per stage."""
    best = {s.value: 0 for s in _STAGE_BY_CODE.values()}
    run_code, run = -1, 0
    for c in starts:
        code = int(trace.stages[c])
        run = run + 1 if code == run_code else 1
        run_code = code
        if code in _STAGE_BY_CODE:
            key = _STAGE_BY_CODE[code].value
            best[key] = max(best[key], run)
    return best


def bound_report(trace: Trace, topology: Topology | None = None) -> BoundReport:
    topology = topology or trace.topology
    n, d = topology.n, topology.diameter
    starts = np.array([0] + trace.round_boundaries, dtype=np.int64)
    bounds = attractor_bounds(n, d)
    reached = {
        name: rounds_to(trace, bit)
        for name, bit in (("A1", L_A1), ("A2", L_A2), ("A3", L_A3), ("A4", L_A4), ("Al", L_AL))
    }
    violations = []
    for name, r in reached.items():
        if r is not None and r > bounds[name]:
            violations.append(f"rounds to {name} = {r} > {bounds[name]}")

    gap, open_gap = _root_gaps(trace.activations, trace.step_round, starts, trace.levels, topology.root)
    gap_bound = 2 * n + 3
    if gap > gap_bound or open_gap > gap_bound:
        violations.append(f"root idle for {max(gap, open_gap)} rounds in A4 > {gap_bound}")

    rec = _recovery_scan(trace.statuses, trace.activations, starts, trace.levels, topology.root)
    recovery = {"StrongE": (int(rec[0]), int(rec[1])), "WeakE": (int(rec[2]), int(rec[3])), "Power": (int(rec[4]), int(rec[5]))}
    for name, (_, bad) in recovery.items():
        if bad:
            violations.append(f"{bad} {name} recovery windows exceeded")

    pot = _potential_scan(trace.potentials, trace.root_colors, starts, trace.levels)
    potentials = {"PIC": (int(pot[0]), int(pot[1])), "PIR": (int(pot[2]), int(pot[3]))}
    for name, (_, bad) in potentials.items():
        if bad:
            violations.append(f"{bad} {name} windows without potential decrease")

    cons = constructions(trace)
    for c in cons:
        if not c.bfs_at_start:
            violations.append(f"TS is not a BFS tree at the R1 of step {c.start_step}")
    _, bfs_bad = bfs_at_constructions(trace)
    if bfs_bad and not any("BFS" in v for v in violations):
        violations.append(f"TS is not a BFS tree at {bfs_bad} root R1 moves")
    for c in cons:
        if c.rounds > construction_bound(d):
            violations.append(f"construction took {c.rounds} rounds > {construction_bound(d)}")
        if c.max_moves > 2 * d + 1:
            violations.append(f"a process moved {c.max_moves} times in one construction > {2 * d + 1}")

    al = first_index(trace, L_AL)
    language_ok = None
    if al is not None:
        verdict = move_language_check(trace, al)
        language_ok = all(verdict.values())
        if not language_ok:
            bad = sorted(u for u, v in verdict.items() if not v)
            violations.append(f"move language rejected for nodes {bad}")

    return BoundReport(
        n=n,
        diameter=d,
        rounds_to=reached,
        bounds=bounds,
        max_root_gap=int(gap),
        open_root_gap=int(open_gap),
        root_gap_bound=gap_bound,
        constructions=cons,
        recovery=recovery,
        potentials=potentials,
        language_ok=language_ok,
        stage_spans=_stage_spans(trace, starts),
        violations=violations,
    )


# --- execution classes -------------------------------------------------------


class ExecutionClass(str, Enum):
    REGULAR = "regular"
    PSEUDO_REGULAR = "pseudo-regular"
    SAFE = "safe"
    INSIDE_SAFE = "inside-safe"
    UNRESTRICTED = "unrestricted"


_RECOVERY_CODES = {RuleName.RC1, RuleName.RC2, RuleName.RC3, RuleName.RC4, RuleName.RC5, RuleName.RC6}


def execution_class(trace: Trace, from_step: int = 0) -> ExecutionClass:
    """Strongest execution class satisfied by the suffix from ``from_step``.

    Needs a fully recorded trace.
    """
    topo = trace.topology
    ptr, idx, root, dist = topo.adj_ptr, topo.adj_idx, topo.root, topo.dist
    inside_safe = safe = pseudo = regular = True
    faulty_count = None
    for s in range(from_step, trace.step_count):
        before = trace.configurations[s]
        after = trace.configurations[s + 1]
        fb = analysis_flags(before, ptr, idx, root, dist)
        fa = analysis_flags(after, ptr, idx, root, dist)
        nf_b = int(np.count_nonzero(fb & F_FAULTY))
        if faulty_count is None:
            faulty_count = nf_b
        if int(np.count_nonzero(fa & F_FAULTY)) != faulty_count:
            inside_safe = False
        for u in np.flatnonzero(trace.activations[s]):
            rule = RuleName(int(trace.activations[s, u]))
            recovery = rule in _RECOVERY_CODES
            inside = bool(fb[u] & F_ILT) and before[u, S] != POWER and _has_child(before, ptr, idx, u)
            if inside and recovery:
                inside_safe = False
            if fb[u] & F_INFL and fb[u] & F_UNREG:
                safe = False
            if rule in (RuleName.RC1, RuleName.RC2, RuleName.RC3, RuleName.RC4):
                safe = False
            if fb[u] & F_ILT and recovery:
                pseudo = False
            if recovery:
                regular = False
        for u in range(topo.n):
            if not power_faulty(before, ptr, idx, u) and power_faulty(after, ptr, idx, u):
                safe = False
            if not fb[u] & F_UNREG and fa[u] & F_UNREG:
                pseudo = False
    safe = safe and inside_safe
    pseudo = pseudo and safe
    regular = regular and pseudo
    if regular:
        return ExecutionClass.REGULAR
    if pseudo:
        return ExecutionClass.PSEUDO_REGULAR
    if safe:
        return ExecutionClass.SAFE
    if inside_safe:
        return ExecutionClass.INSIDE_SAFE
    return ExecutionClass.UNRESTRICTED


def _has_child(cfg, ptr, idx, u) -> bool:
    return any(cfg[idx[k], P] == u for k in range(ptr[u], ptr[u + 1]))


def legitimate_step_check(trace: Trace) -> list[str]:
    """Step lemmas of the legitimate regime, checked on every recorded step.

    * staying in A4(k,l) while the root is idle;
    * a root move from A4(k,l), k <= l, is R2 and lands in A4(k+1,l), as
      long as some process sits at distance k (otherwise the phase has no
      joiners and the root may end the construction);
    * a configuration in A4(l+1,l) from which the root executes R1 is in
      A5(l+1), capped at A5(D+1).
    """
    topo = trace.topology
    root, d = topo.root, topo.diameter
    ecc = topo.root_eccentricity
    problems = []
    reports = [attractor_report(trace.configuration(i), topo) for i in range(trace.step_count + 1)]
    for s in range(trace.step_count):
        before, after = reports[s], reports[s + 1]
        root_rule = int(trace.activations[s, root])
        for k, l in sorted(before.a4kl_members):
            if root_rule == 0:
                if (k, l) not in after.a4kl_members:
                    problems.append(f"step {s}: left A4({k},{l}) without a root move")
            elif k <= min(l, ecc):
                if root_rule != RuleName.R2:
                    problems.append(f"step {s}: root executed {RuleName(root_rule).name} in A4({k},{l})")
                elif (k + 1, l) not in after.a4kl_members:
                    problems.append(f"step {s}: R2 from A4({k},{l}) missed A4({k + 1},{l})")
            elif k == l + 1 and root_rule == RuleName.R1 and min(l + 1, d + 1) not in before.a5_levels:
                problems.append(f"step {s}: R1 from A4({k},{l}) outside A5({min(l + 1, d + 1)})")
    return problems


# --- state-space enumeration kernels -----------------------------------------


def _local_tables(topology: Topology) -> tuple[np.ndarray, np.ndarray]:
    per_node = [local_states(topology, u) for u in range(topology.n)]
    width = max(len(p) for p in per_node)
    tables = np.zeros((topology.n, width, 5), dtype=np.int32)
    counts = np.zeros(topology.n, dtype=np.int64)
    for u, states in enumerate(per_node):
        counts[u] = len(states)
        for i, s in enumerate(states):
            tables[u, i] = _encode_row(s)
    return tables, counts


@njit(cache=True)
def decode_configuration(index, tables, counts, out):
    """Mixed-radix decode; node 0 is the most significant digit."""
    for u in range(counts.shape[0] - 1, -1, -1):
        digit = index % counts[u]
        index //= counts[u]
        out[u] = tables[u, digit]


def configuration_at(topology: Topology, index: int) -> Configuration:
    tables, counts = _local_tables(topology)
    out = np.zeros((topology.n, 5), dtype=np.int32)
    decode_configuration(index, tables, counts, out)
    return Configuration(out)


@njit(cache=True)
def _basics_scan(tables, counts, ptr, idx, root, start, stop, max_examples):
    n = counts.shape[0]
    cfg = np.zeros((n, 5), dtype=np.int32)
    dead = 0
    clashes = 0
    sc_differs = 0
    rules_differ = 0
    dead_examples = np.full(max_examples, -1, dtype=np.int64)
    clash_examples = np.full((max_examples, 3), -1, dtype=np.int64)
    for index in range(start, stop):
        decode_configuration(index, tables, counts, cfg)
        any_enabled = False
        sc_diff = False
        rule_diff = False
        for u in range(n):
            m = guard_mask(cfg, ptr, idx, root, u, 0)
            if m != 0:
                any_enabled = True
            if m & (m - 1):
                if clashes < max_examples:
                    clash_examples[clashes, 0] = index
                    clash_examples[clashes, 1] = u
                    clash_examples[clashes, 2] = m
                clashes += 1
            if u != root:
                if strong_conflict(cfg, ptr, idx, u, 0) != strong_conflict(cfg, ptr, idx, u, LITERAL_STRONG_CONFLICT):
                    sc_diff = True
                if guard_mask(cfg, ptr, idx, root, u, LITERAL_STRONG_CONFLICT) != m:
                    rule_diff = True
        if not any_enabled:
            if dead < max_examples:
                dead_examples[dead] = index
            dead += 1
        if sc_diff:
            sc_differs += 1
        if rule_diff:
            rules_differ += 1
    return dead, clashes, sc_differs, rules_differ, dead_examples, clash_examples


@dataclass
class BasicsReport:
    configurations: int
    liveness_violations: int
    exclusivity_violations: int
    dead_examples: list[Configuration]
    clash_examples: list[tuple[Configuration, int, list[str]]]
    strong_conflict_readings_differ: int
    guards_differ_under_literal_reading: int

    @property
    def ok(self) -> bool:
        return self.liveness_violations == 0 and self.exclusivity_violations == 0


def model_check_basics(
    topology: Topology, cap: int = DEFAULT_ENUMERATION_CAP, max_examples: int = 10
) -> BasicsReport:
    """Liveness and guard exclusivity over every configuration of ``topology``.

    Also counts configurations on which the two readings of StrongConflict
    disagree somewhere, and those on which the guards change as a result.
    """
    size = count_configurations(topology)
    if size > cap:
        raise ValueError(f"state space has {size} configurations, above the cap of {cap}")
    tables, counts = _local_tables(topology)
    dead, clashes, sc_diff, rule_diff, dead_ex, clash_ex = _basics_scan(
        tables, counts, topology.adj_ptr, topology.adj_idx, topology.root, 0, size, max_examples
    )
    return BasicsReport(
        configurations=size,
        liveness_violations=int(dead),
        exclusivity_violations=int(clashes),
        dead_examples=[configuration_at(topology, int(i)) for i in dead_ex if i >= 0],
        clash_examples=[
            (configuration_at(topology, int(i)), int(u), [r.name for r in RuleName if m & (1 << r)])
            for i, u, m in clash_ex
            if i >= 0
        ],
        strong_conflict_readings_differ=int(sc_diff),
        guards_differ_under_literal_reading=int(rule_diff),
    )


# --- closure checks ----------------------------------------------------------


class ClosureProperty(str, Enum):
    NOT_FAULTY = "not-faulty"
    NOT_ILLEGAL_LIVE_ROOT = "not-illegal-live-root"
    NOT_UNSAFE = "not-unsafe"
    INFLUENTIAL_MOVE = "influential-move"
    BECOMING_INFLUENTIAL_COLOR = "becoming-influential-color"
    R_COLOR_MONOTONE = "r-color-monotone"
    A4_NOT_UNREGULAR = "a4-not-unregular"
    A4_LEGAL_OR_IDLE = "a4-legal-or-idle"
    PIC_CLOSURE = "pic-closure"
    PIR_CLOSURE = "pir-closure"
    CLOSED_A1 = "closed-A1"
    CLOSED_A2 = "closed-A2"
    CLOSED_A3 = "closed-A3"
    CLOSED_A4 = "closed-A4"
    CLOSED_AL = "closed-Al"

    @property
    def bit(self) -> int:
        return 1 << list(ClosureProperty).index(self)


ALL_CLOSURE_PROPERTIES = tuple(ClosureProperty)
BASIC_CLOSURES = (ClosureProperty.NOT_FAULTY, ClosureProperty.NOT_ILLEGAL_LIVE_ROOT, ClosureProperty.NOT_UNSAFE)


@njit(cache=True)
def _check_step(before, after, moved, rules, fb, fa, lvb, lva, root, props):
    """Bitmask of the properties violated by one step (bit order of ClosureProperty)."""
    n = before.shape[0]
    bad = 0
    rcb = before[root, C]
    rca = after[root, C]
    for u in range(n):
        if props & 1:
            if fa[u] & F_FAULTY and (moved[u] or not fb[u] & F_FAULTY):
                bad |= 1
        if props & 2:
            if fa[u] & F_ILLEGAL_LIVE_ROOT and not fb[u] & F_ILLEGAL_LIVE_ROOT:
                bad |= 2
        if props & 4:
            if fa[u] & F_UNSAFE and not fb[u] & F_UNSAFE:
                bad |= 4
        if props & 8:
            if u != root and moved[u] and fa[u] & F_INFL and rules[u] != 11:
                bad |= 8
        if props & 16:
            if fa[u] & F_INFL and not fb[u] & F_INFL and after[u, C] != rca:
                bad |= 16
        if lvb & L_A4:
            if props & 64:
                if not fb[u] & F_UNREG and fa[u] & F_UNREG:
                    bad |= 64
            if props & 128:
                pre = not fb[u] & F_UNREG and (fb[u] & F_ILT or before[u, S] == IDLE)
                post = not fa[u] & F_UNREG and (fa[u] & F_ILT or after[u, S] == IDLE)
                if pre and not post:
                    bad |= 128
        if props & 256 and lvb & L_A1 and rca == rcb:
            if fa[u] & F_PIC and not fb[u] & F_PIC:
                bad |= 256
            if fa[u] & F_PIC and fa[u] & F_PP and not (fb[u] & F_PIC and fb[u] & F_PP):
                bad |= 256
        if props & 512 and lvb & L_A2:
            if fa[u] & F_PIR and not fb[u] & F_PIR:
                bad |= 512
            if fa[u] & F_PIR and fa[u] & F_PP and not (fb[u] & F_PIR and fb[u] & F_PP):
                bad |= 512
    if props & 32 and lvb & L_A4 and rules[root] != 7:
        cb = 0
        ca = 0
        for u in range(n):
            if before[u, C] == rcb:
                cb += 1
            if after[u, C] == rca:
                ca += 1
        if ca < cb:
            bad |= 32
    for i, lbit in enumerate((L_A1, L_A2, L_A3, L_A4, L_AL)):
        pbit = 1024 << i
        if props & pbit and lvb & lbit and not lva & lbit:
            bad |= pbit
    return bad


@njit(cache=True)
def _closure_exhaustive(tables, counts, ptr, idx, root, dist, diam, props, flags, within, start, stop, max_examples):
    n = counts.shape[0]
    cfg = np.zeros((n, 5), dtype=np.int32)
    nprops = 15
    viol = np.zeros(nprops, dtype=np.int64)
    examples = np.full((max_examples, 3), -1, dtype=np.int64)
    nex = 0
    steps_checked = 0
    moved = np.zeros(n, dtype=np.bool_)
    nodes = np.zeros(n, dtype=np.int64)
    rsel = np.zeros(n, dtype=np.int8)
    rules_full = np.zeros(n, dtype=np.int8)
    for index in range(start, stop):
        decode_configuration(index, tables, counts, cfg)
        rules, _ = enabled_vector(cfg, ptr, idx, root, flags)
        lvb, fb = config_levels(cfg, ptr, idx, root, dist, diam)
        if within and not lvb & within:
            continue
        en = np.flatnonzero(rules)
        e = en.shape[0]
        for subset in range(1, 1 << e):
            k = 0
            for u in range(n):
                moved[u] = False
                rules_full[u] = 0
            for b in range(e):
                if subset & (1 << b):
                    u = en[b]
                    nodes[k] = u
                    rsel[k] = rules[u]
                    moved[u] = True
                    rules_full[u] = rules[u]
                    k += 1
            after = step_kernel(cfg, ptr, idx, root, nodes[:k], rsel[:k], flags)
            lva, fa = config_levels(after, ptr, idx, root, dist, diam)
            bad = _check_step(cfg, after, moved, rules_full, fb, fa, lvb, lva, root, props)
            steps_checked += 1
            if bad:
                for i in range(nprops):
                    if bad & (1 << i):
                        viol[i] += 1
                if nex < max_examples:
                    examples[nex, 0] = index
                    examples[nex, 1] = subset
                    examples[nex, 2] = bad
                    nex += 1
    return steps_checked, viol, examples


@njit(cache=True)
def _closure_walk(cfg0, ptr, idx, root, dist, diam, rng, nsteps, props, flags, within, max_examples):
    """Random walk with uniformly random nonempty activation subsets."""
    n = cfg0.shape[0]
    cfg = cfg0.copy()
    viol = np.zeros(15, dtype=np.int64)
    examples = np.zeros((max_examples, n, 5), dtype=np.int32)
    ex_moved = np.zeros((max_examples, n), dtype=np.bool_)
    ex_bad = np.zeros(max_examples, dtype=np.int64)
    nex = 0
    moved = np.zeros(n, dtype=np.bool_)
    nodes = np.zeros(n, dtype=np.int64)
    rsel = np.zeros(n, dtype=np.int8)
    rules_full = np.zeros(n, dtype=np.int8)
    done = 0
    for _ in range(nsteps):
        rules, _c = enabled_vector(cfg, ptr, idx, root, flags)
        en = np.flatnonzero(rules)
        if en.shape[0] == 0:
            break
        lvb, fb = config_levels(cfg, ptr, idx, root, dist, diam)
        k = 0
        while k == 0:
            k = 0
            for u in range(n):
                moved[u] = False
                rules_full[u] = 0
            for u in en:
                if rng.random() < 0.5:
                    nodes[k] = u
                    rsel[k] = rules[u]
                    moved[u] = True
                    rules_full[u] = rules[u]
                    k += 1
        after = step_kernel(cfg, ptr, idx, root, nodes[:k], rsel[:k], flags)
        lva, fa = config_levels(after, ptr, idx, root, dist, diam)
        if within and not lvb & within:
            cfg = after
            continue
        bad = _check_step(cfg, after, moved, rules_full, fb, fa, lvb, lva, root, props)
        done += 1
        if bad:
            for i in range(15):
                if bad & (1 << i):
                    viol[i] += 1
            if nex < max_examples:
                examples[nex] = cfg
                ex_moved[nex] = moved
                ex_bad[nex] = bad
                nex += 1
        cfg = after
    return done, viol, examples[:nex], ex_moved[:nex], ex_bad[:nex]


@dataclass(frozen=True)
class ClosureViolation:
    property: ClosureProperty
    before: Configuration
    activation: frozenset[int]


@dataclass
class ClosureReport:
    properties: tuple[ClosureProperty, ...]
    steps_checked: int
    counts: dict[ClosureProperty, int]
    violations: list[ClosureViolation]
    within: str | None = None

    @property
    def ok(self) -> bool:
        return not any(self.counts.values())

    def __len__(self) -> int:
        return sum(self.counts.values())


def _props_mask(properties) -> tuple[tuple[ClosureProperty, ...], int]:
    props = tuple(ClosureProperty(p) for p in properties)
    mask = 0
    for p in props:
        mask |= p.bit
    return props, mask


def _explode(bad: int, props) -> list[ClosureProperty]:
    return [p for p in props if bad & p.bit]


def closure_check(
    topology: Topology,
    properties: Iterable[ClosureProperty | str] = BASIC_CLOSURES,
    mode: str = "exhaustive",
    *,
    trials: int = 1,
    steps: int = 1000,
    seed: int = 0,
    cap: int = DEFAULT_ENUMERATION_CAP,
    flags: int = 0,
    within: str | None = None,
    max_examples: int = 20,
) -> ClosureReport:
    """Check step-level closure properties.

    ``exhaustive`` tries every configuration with every nonempty subset of
    its enabled processes.  ``randomized`` runs ``trials`` random walks of
    ``steps`` steps from random configurations, activating a random nonempty
    subset each step.  ``within`` (an attractor name) restricts the checked
    steps to those that start inside that attractor.
    """
    props, mask = _props_mask(properties)
    within_bit = 0 if within is None else LEVEL_BITS[within]
    ptr, idx, root, dist, diam = topology.adj_ptr, topology.adj_idx, topology.root, topology.dist, topology.diameter
    counts = {p: 0 for p in props}
    examples: list[ClosureViolation] = []
    all_props = list(ClosureProperty)
    if mode == "exhaustive":
        size = count_configurations(topology)
        if size > cap:
            raise ValueError(f"state space has {size} configurations, above the cap of {cap}")
        tables, cnts = _local_tables(topology)
        checked, viol, ex = _closure_exhaustive(
            tables, cnts, ptr, idx, root, dist, diam, mask, flags, within_bit, 0, size, max_examples
        )
        for i, c in enumerate(viol):
            if all_props[i] in counts:
                counts[all_props[i]] += int(c)
        for index, subset, bad in ex:
            if index < 0:
                continue
            config = configuration_at(topology, int(index))
            rules, _ = enabled_vector(config.array, ptr, idx, root, flags)
            en = np.flatnonzero(rules)
            act = frozenset(int(en[b]) for b in range(len(en)) if subset & (1 << b))
            examples.extend(ClosureViolation(p, config, act) for p in _explode(int(bad), props))
    elif mode == "randomized":
        if trials < 1:
            raise ValueError("trials must be positive")
        rng = np.random.default_rng(seed)
        checked = 0
        for _ in range(trials):
            start = random_configuration_array(topology, rng)
            done, viol, ex_cfg, ex_moved, ex_bad = _closure_walk(
                start, ptr, idx, root, dist, diam, rng, steps, mask, flags, within_bit, max_examples
            )
            checked += int(done)
            for i, c in enumerate(viol):
                if all_props[i] in counts:
                    counts[all_props[i]] += int(c)
            for cfg, moved, bad in zip(ex_cfg, ex_moved, ex_bad):
                act = frozenset(int(u) for u in np.flatnonzero(moved))
                examples.extend(ClosureViolation(p, Configuration(cfg), act) for p in _explode(int(bad), props))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ClosureReport(props, int(checked), counts, examples[:max_examples], within)


__all__ = [
    "AttractorReport",
    "BasicsReport",
    "BoundReport",
    "ClosureProperty",
    "ClosureReport",
    "ClosureViolation",
    "Construction",
    "ExecutionClass",
    "Stage",
    "StageLabel",
    "accepts_moves",
    "attractor_bounds",
    "attractor_report",
    "bfs_tree_check",
    "bound_report",
    "closure_check",
    "construction_bound",
    "constructions",
    "execution_class",
    "legitimate_step_check",
    "level_mask",
    "model_check_basics",
    "move_language_check",
    "rounds_to",
    "stage_label",
]
