"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned in the constants below.  The randomized sweep is
shared by criteria 4-7 and 9-11 and is computed once per session.
"""

import time
from itertools import product

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from ssbfs.analysis import (
    BASIC_CLOSURES,
    bfs_at_constructions,
    bound_report,
    closure_check,
    construction_bound,
    constructions,
    model_check_basics,
)
from ssbfs.daemon import ALL_POLICIES, DaemonPolicy, StopReason, execute, policy_for_trial
from ssbfs.model import Phase, ProcessState, Status, legitimate_configuration, pack, random_configuration, unpack
from ssbfs.topologies import cycle, named_graph, path, random_connected, star

# pinned tolerances and sizes
BASICS_GRAPHS = {"p2": 960, "p3": 172_800, "triangle": 388_800}
BASICS_SECONDS = 120.0
RANDOM_CLOSURE_STEPS = 100_000
RANDOM_CLOSURE_GRAPHS = 100
SWEEP_TRIALS = 10_000
SWEEP_N = (2, 30)
A1_ROUNDS = 1
STRONG_E_ROUNDS, WEAK_E_ROUNDS, POWER_ROUNDS = 2, 2, 4
LEGIT_DIAMETERS = (1, 2, 3, 4)
PACK_DEGREES = range(1, 9)


def report(number: int, ok: bool, text: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)


# --- exhaustive basics -------------------------------------------------------


@pytest.fixture(scope="module")
def basics():
    t0 = time.perf_counter()
    reps = {name: model_check_basics(named_graph(name)) for name in BASICS_GRAPHS}
    return reps, time.perf_counter() - t0


def test_criterion_01_liveness(basics):
    reps, seconds = basics
    sizes = {k: r.configurations for k, r in reps.items()}
    dead = sum(r.liveness_violations for r in reps.values())
    ok = dead == 0 and sizes == BASICS_GRAPHS and seconds < BASICS_SECONDS
    report(1, ok, f"{dead} dead configurations over {sum(sizes.values())} ({sizes}), {seconds:.1f}s < {BASICS_SECONDS:.0f}s")
    assert ok


def test_criterion_02_guard_exclusivity(basics):
    reps, _ = basics
    clashes = sum(r.exclusivity_violations for r in reps.values())
    differ = {k: r.strong_conflict_readings_differ for k, r in reps.items()}
    report(2, clashes == 0, f"{clashes} processes with two satisfied guards; literal StrongConflict reading differs in {differ}")
    assert clashes == 0


# --- closure lemmas ----------------------------------------------------------


def test_criterion_03_closures():
    counts, checked = {}, 0
    for name in ("p2", "p3"):
        rep = closure_check(named_graph(name), BASIC_CLOSURES)
        checked += rep.steps_checked
        for p, c in rep.counts.items():
            counts[f"{name}:{p.value}"] = c
    per_graph = RANDOM_CLOSURE_STEPS // RANDOM_CLOSURE_GRAPHS
    rng = np.random.default_rng(3)
    random_bad = random_steps = 0
    for g in range(RANDOM_CLOSURE_GRAPHS):
        n = int(rng.integers(2, 31))
        t = random_connected(n, float(rng.uniform(0.15, 0.5)), 500 + g)
        rep = closure_check(t, BASIC_CLOSURES, "randomized", trials=1, steps=per_graph, seed=g)
        random_bad += len(rep)
        random_steps += rep.steps_checked
    exhaustive_bad = sum(counts.values())
    ok = exhaustive_bad == 0 and random_bad == 0 and random_steps >= RANDOM_CLOSURE_STEPS
    failing = {k: v for k, v in counts.items() if v}
    report(
        3, ok,
        f"exhaustive {exhaustive_bad} violations / {checked} steps {failing or ''}; "
        f"randomized {random_bad} / {random_steps} steps",
    )
    # supplementary: the same closures restricted to steps that start in A1
    within = sum(len(closure_check(named_graph(name), BASIC_CLOSURES, within="A1")) for name in ("p2", "p3"))
    print(f"      supplementary: {within} violations on steps starting in A1")
    assert ok


# --- randomized sweep --------------------------------------------------------


def sweep_topology(i: int):
    rng = np.random.default_rng(1000 + i)
    n = int(rng.integers(SWEEP_N[0], SWEEP_N[1] + 1))
    kind = i % 4
    if kind == 0:
        return path(n)
    if kind == 1:
        return cycle(max(3, n))
    if kind == 2:
        return star(n)
    return random_connected(n, float(rng.uniform(0.15, 0.5)), 1000 + i)


@pytest.fixture(scope="module")
def sweep():
    out = []
    for i in range(SWEEP_TRIALS):
        t = sweep_topology(i)
        tr = execute(t, random_configuration(t, i), policy_for_trial(i, i), "constructions:1", record=False)
        rep = bound_report(tr)
        out.append((i, t, tr.stop_reason, rep, bfs_at_constructions(tr)))
    return out


def test_criterion_04_rounds_to_a1(sweep):
    bad = [i for i, _, _, rep, _ in sweep if rep.rounds_to["A1"] is None or rep.rounds_to["A1"] > A1_ROUNDS]
    worst = max(rep.rounds_to["A1"] or 0 for *_, rep, _ in sweep)
    report(4, not bad, f"{len(bad)} / {len(sweep)} trials above {A1_ROUNDS} round (max {worst}), {len(ALL_POLICIES)} policies")
    assert not bad


def test_criterion_05_attractor_bounds(sweep):
    exceed = {name: 0 for name in ("A2", "A3", "A4", "Al")}
    unreached = 0
    for _, _, stop, rep, _ in sweep:
        if stop is not StopReason.TARGET_REACHED:
            unreached += 1
        for name in exceed:
            r = rep.rounds_to[name]
            if r is None or r > rep.bounds[name]:
                exceed[name] += 1
    ok = not any(exceed.values()) and unreached == 0
    ratio = max(rep.rounds_to["Al"] / rep.bounds["Al"] for *_, rep, _ in sweep if rep.rounds_to["Al"] is not None)
    report(5, ok, f"exceedances {exceed}, {unreached} trials short of their stop; max rounds/bound for Al {ratio:.3f}")
    assert ok


def test_criterion_06_root_gap(sweep):
    bad = [i for i, _, _, rep, _ in sweep if max(rep.max_root_gap, rep.open_root_gap) > rep.root_gap_bound]
    report(6, not bad, f"{len(bad)} / {len(sweep)} trials with a root-idle gap above 2n+3 rounds in A4")
    assert not bad


def test_criterion_07_recovery(sweep):
    totals = {k: [0, 0] for k in ("StrongE", "WeakE", "Power")}
    bad_trials = {k: [] for k in totals}
    for i, _, _, rep, _ in sweep:
        for k, (checked, bad) in rep.recovery.items():
            totals[k][0] += checked
            totals[k][1] += bad
            if bad:
                bad_trials[k].append(i)
    ok = not any(v[1] for v in totals.values())
    detail = ", ".join(f"{k} {v[1]} / {v[0]} windows" for k, v in totals.items())
    report(7, ok, f"{detail} (StrongE {STRONG_E_ROUNDS}, WeakE {WEAK_E_ROUNDS}, Power {POWER_ROUNDS} rounds)")
    if not ok:
        print(f"      failing trials: { {k: v[:10] for k, v in bad_trials.items() if v} }")
    assert ok


def test_criterion_08_legitimate_shape():
    problems = []
    for d in LEGIT_DIAMETERS:
        t = path(d + 1)
        start = legitimate_configuration(t)
        tr = execute(t, start, DaemonPolicy("sync"), "constructions:2")
        cons = constructions(tr)
        if len(cons) < 2:
            problems.append(f"D={d}: {len(cons)} constructions")
        for c in cons:
            if c.rounds != construction_bound(d):
                problems.append(f"D={d}: {c.rounds} rounds != {construction_bound(d)}")
            if c.max_moves > 2 * d + 1:
                problems.append(f"D={d}: {c.max_moves} moves > {2 * d + 1}")
        for k, base in enumerate(ALL_POLICIES[1:], 1):
            pol = DaemonPolicy(base.kind, k, base.probability, base.script)
            for c in constructions(execute(t, start, pol, "constructions:1")):
                if c.rounds > construction_bound(d) or c.max_moves > 2 * d + 1:
                    problems.append(f"D={d} {pol.label()}: {c.rounds} rounds, {c.max_moves} moves")
    rounds = {d: construction_bound(d) for d in LEGIT_DIAMETERS}
    report(8, not problems, f"sync construction rounds {rounds} exact; {len(problems)} problems {problems[:3]}")
    assert not problems


def test_criterion_09_bfs_at_constructions(sweep):
    checked = sum(b[0] for *_, b in sweep)
    bad = sum(b[1] for *_, b in sweep)
    report(9, bad == 0 and checked > 0, f"{bad} non-BFS TS trees at {checked} root R1 moves after Al")
    assert bad == 0 and checked > 0


def test_criterion_10_move_languages(sweep):
    rejected = [i for i, _, _, rep, _ in sweep if rep.language_ok is False]
    checked = sum(1 for *_, rep, _ in sweep if rep.language_ok is not None)
    report(10, not rejected, f"{len(rejected)} rejections over {checked} trace suffixes from Al")
    assert not rejected


def test_criterion_11_potentials(sweep):
    tot = {"PIC": [0, 0], "PIR": [0, 0]}
    for *_, rep, _ in sweep:
        for k, (checked, bad) in rep.potentials.items():
            tot[k][0] += checked
            tot[k][1] += bad
    ok = not any(v[1] for v in tot.values())
    report(11, ok, ", ".join(f"{k} {v[1]} / {v[0]} windows without decrease" for k, v in tot.items()))
    assert ok


# --- encoding ----------------------------------------------------------------


def test_criterion_12_encoding():
    bad = checked = 0
    for deg in PACK_DEGREES:
        want = 2 * int(np.ceil(np.log2(deg + 1))) + 5
        ptrs = [None, *range(deg)]
        for p, ts, c, s, ph in product(ptrs, ptrs, (0, 1), Status, Phase):
            st = ProcessState(p, ts, c, s, ph)
            packed = pack(st, deg)
            checked += 1
            if packed.width != want or unpack(packed, deg) != st:
                bad += 1
    report(12, bad == 0, f"{bad} width or round-trip failures over {checked} local states, degree 1..8")
    assert bad == 0
