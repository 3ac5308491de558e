import numpy as np
import pytest

from conftest import config, state
from ssbfs.analysis import (
    BASIC_CLOSURES,
    ClosureProperty,
    ExecutionClass,
    Stage,
    accepts_moves,
    attractor_bounds,
    attractor_report,
    bfs_tree_check,
    bound_report,
    closure_check,
    construction_bound,
    execution_class,
    first_index,
    legitimate_step_check,
    model_check_basics,
    move_language_check,
    stage_label,
)
from ssbfs.attractors import L_AL
from ssbfs.daemon import ALL_POLICIES, DaemonPolicy, execute
from ssbfs.model import legitimate_configuration, random_configuration
from ssbfs.predicates import MUTANT_RC5_KEEPS_PARENT
from ssbfs.predicates import eval_analysis_predicate as A
from ssbfs.rules import RuleName, step
from ssbfs.topologies import cycle, path, random_connected, star, triangle

SYNC = DaemonPolicy("sync")


def test_attractor_report_quiet_path():
    t = path(3)
    c = config(state(c=0, s="Working"), state(c=0), state(c=0))
    rep = attractor_report(c, t)
    assert rep.a1 and rep.a2 and rep.a3 and rep.a4
    assert {0, 1} <= rep.a5_levels
    assert 2 not in rep.a5_levels


def test_strong_e_leaves_a4():
    t = path(3)
    c = config(state(c=0, s="Working"), state(c=0, s="StrongE"), state(c=0))
    rep = attractor_report(c, t)
    assert rep.a3 and not rep.a4 and not rep.al


def test_faulty_leaves_everything():
    t = path(2)
    c = config(state(c=0, s="Working"), state(p=0, c=1))
    rep = attractor_report(c, t)
    assert not any((rep.a1, rep.a2, rep.a3, rep.a4, rep.al))
    assert rep.level == "A0"


def test_legitimate_configuration_is_in_al():
    for t in (path(2), path(5), cycle(6), star(5), random_connected(7, 0.4, 2)):
        rep = attractor_report(legitimate_configuration(t), t)
        assert rep.al and rep.legitimate_bfs
        assert t.diameter + 1 in rep.a5_levels


def test_bfs_tree_check():
    t = path(3)
    assert bfs_tree_check(config(state(s="Working"), state(ts=0), state(ts=1)), t) == (True, [])
    assert bfs_tree_check(config(state(s="Working"), state(ts=0), state()), t) == (False, [2])
    tri = triangle()
    ok, bad = bfs_tree_check(config(state(s="Working"), state(ts=2), state(ts=0)), tri)
    assert not ok and bad == [1]


def test_stage_backwarding_with_idle_children():
    t = path(3)
    c = config(state(c=0, s="Working"), state(p=0, ts=0, c=0), state(ts=1, c=1))
    lab = stage_label(c, t)
    assert lab.stage is Stage.BACKWARDING
    # the root is the only Working process and sits at depth 0
    assert lab.working_height == 0


def test_stage_expansion_after_r1():
    t = path(3)
    c = legitimate_configuration(t)
    after = step(c, t, {0}).after
    assert after[0].status.label == "Power"
    assert stage_label(after, t).stage is Stage.EXPANSION


def test_stage_forwarding_found_mid_phase():
    t = path(4)
    tr = execute(t, legitimate_configuration(t), SYNC, "constructions:1")
    labels = [stage_label(tr.configuration(i), t) for i in range(tr.step_count + 1)]
    assert {lab.stage for lab in labels} == {Stage.FORWARDING, Stage.EXPANSION, Stage.BACKWARDING}
    assert max(lab.working_height for lab in labels) == 2


def test_stage_outside_a4():
    t = path(2)
    c = config(state(c=0, s="Working"), state(p=0, c=1))
    assert stage_label(c, t).stage is Stage.NOT_IN_PHASE


@pytest.mark.parametrize(
    "seq, is_root, expected",
    [
        (["R1", "R2", "R2", "R1"], True, True),
        (["R2", "R1"], True, True),
        (["R1", "R3"], True, False),
        (["R3", "R5", "R7", "R3"], False, True),
        (["R3", "R4"], False, False),
        (["R6", "R4", "R6", "R4", "R7"], False, True),
        (["R5", "R6", "R4", "R7", "R3", "R5"], False, True),
        (["R3", "R5", "RC5"], False, False),
        ([], False, True),
    ],
)
def test_move_languages(seq, is_root, expected):
    assert accepts_moves(seq, is_root) is expected


def test_move_languages_on_trace():
    t = path(4)
    tr = execute(t, legitimate_configuration(t), SYNC, "constructions:2")
    assert all(move_language_check(tr, 0).values())


def test_basics_p2():
    rep = model_check_basics(path(2))
    assert rep.configurations == 960
    assert rep.liveness_violations == 0
    assert rep.exclusivity_violations == 0
    assert rep.ok


def test_basics_cap():
    with pytest.raises(ValueError, match="cap"):
        model_check_basics(path(3), cap=1000)


def test_not_faulty_closure_p2():
    rep = closure_check(path(2), [ClosureProperty.NOT_FAULTY])
    assert rep.counts[ClosureProperty.NOT_FAULTY] == 0
    assert rep.steps_checked > 960


def test_r_color_monotone_p3():
    rep = closure_check(path(3), [ClosureProperty.R_COLOR_MONOTONE])
    assert rep.ok


def test_mutant_rc5_is_caught():
    rep = closure_check(path(2), [ClosureProperty.NOT_FAULTY], flags=MUTANT_RC5_KEEPS_PARENT)
    assert rep.counts[ClosureProperty.NOT_FAULTY] > 0
    assert rep.violations and rep.violations[0].property is ClosureProperty.NOT_FAULTY


def test_unsafe_closure_counterexample_with_faulty_child():
    # a miscolored child of a Working root becomes a PowerParent when the
    # root starts a phase, making the root unSafe from an A0 configuration
    t = path(2)
    c = config(state(c=0, s="Working", ph="a"), state(p=0, ts=0, c=1, s="Idle", ph="a"))
    assert not attractor_report(c, t).a1
    assert not A(c, t, 0, "unSafe")
    after = step(c, t, {0}).after
    assert step(c, t, {0}).activated[0].name is RuleName.R2
    assert A(after, t, 1, "PowerParent")
    assert A(after, t, 0, "unSafe")


def test_unsafe_closure_holds_from_a1():
    props = [ClosureProperty.NOT_UNSAFE, ClosureProperty.BECOMING_INFLUENTIAL_COLOR]
    for t in (path(2), path(3)):
        assert closure_check(t, props, within="A1").ok


def test_closure_cap_and_mode():
    with pytest.raises(ValueError):
        closure_check(path(3), BASIC_CLOSURES, cap=10)
    with pytest.raises(ValueError):
        closure_check(path(2), BASIC_CLOSURES, mode="sideways")


def test_randomized_closure_walks():
    rep = closure_check(cycle(5), BASIC_CLOSURES[:2], "randomized", trials=3, steps=300, seed=1)
    assert rep.steps_checked == 900
    assert rep.ok


def test_bounds_for_p3():
    assert attractor_bounds(3, 2) == {"A1": 1, "A2": 17, "A3": 33, "A4": 35, "Al": 35 + 108}
    assert [construction_bound(d) for d in (1, 2, 3, 4)] == [5, 11, 19, 29]


def test_bound_report_p2_construction():
    t = path(2)
    tr = execute(t, config(state(c=0, s="Working"), state(c=0)), SYNC, "constructions:1")
    rep = bound_report(tr)
    assert rep.construction_rounds == 5
    assert rep.max_moves_per_process <= 3
    assert rep.rounds_to["A1"] == 0
    assert rep.ok, rep.violations


def test_bound_report_random_traces():
    for i, t in enumerate((path(3), cycle(5), star(5))):
        for j, pol in enumerate(ALL_POLICIES):
            seed = 7 * i + j
            pol = DaemonPolicy(pol.kind, seed, pol.probability, pol.script)
            tr = execute(t, random_configuration(t, seed), pol, "constructions:1", record=False)
            rep = bound_report(tr)
            assert rep.ok, rep.violations
            assert rep.rounds_to["A1"] <= 1


def test_step_lemmas_on_traces():
    for t in (path(3), cycle(5), star(4)):
        for seed in range(4):
            pol = ALL_POLICIES[seed]
            tr = execute(t, random_configuration(t, seed), pol, "constructions:2")
            assert legitimate_step_check(tr) == []


def test_execution_from_al_is_regular():
    t = path(4)
    tr = execute(t, random_configuration(t, 3), SYNC, "constructions:1")
    al = first_index(tr, L_AL)
    assert execution_class(tr, al) is ExecutionClass.REGULAR
    start = execute(t, random_configuration(t, 3), SYNC, "A1")
    assert execution_class(start, 0) in set(ExecutionClass)


def test_nesting_on_traces():
    t = random_connected(7, 0.4, 5)
    tr = execute(t, random_configuration(t, 5), DaemonPolicy("central-random", 5), "constructions:1")
    bits = np.array(tr.levels)
    for lo, hi in ((1, 2), (2, 4), (4, 8), (8, 16)):
        assert np.all((bits & hi == 0) | (bits & lo != 0))


def test_strong_e_leaf_next_to_unquiet_power_root_needs_three_rounds():
    # the root cannot leave Power (RC1) before its Working child is cleaned
    # up, and the StrongE leaf only becomes enabled after that
    t = star(3)
    c = config(state(c=0, s="Power"), state(c=0, s="StrongE"), state(p=0, ts=0, c=0, s="Working"))
    tr = execute(t, c, SYNC, "rounds:4")
    assert tr.rule_sequence()[:3] == [{2: "RC5"}, {0: "RC1", 2: "RC6"}, {1: "RC6"}]
    assert tr.round_boundaries[:3] == [1, 2, 3]
    assert bound_report(tr).recovery["StrongE"] == (3, 1)
