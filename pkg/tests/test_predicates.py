import pytest

from conftest import config, state
from ssbfs.predicates import (
    ANALYSIS_PREDICATES,
    GUARD_PREDICATES,
    PredicateName,
    child_set,
    count_potential,
    eval_analysis_predicate,
    eval_guard_predicate,
    predicate_table,
)
from ssbfs.topologies import path, triangle

G = eval_guard_predicate
A = eval_analysis_predicate


def test_child_sets():
    t = path(3)
    c = config(state(s="Working"), state(p=0), state(p=1))
    assert child_set(c, 0, t) == {1}
    assert child_set(c, 1, t) == {2}
    assert child_set(c, 2, t) == set()
    empty = config(state(s="Working"), state(), state())
    assert all(child_set(empty, u, t) == set() for u in range(3))


def test_child_sets_two_cycle():
    t = triangle()
    c = config(state(s="Working"), state(p=2), state(p=1))
    assert child_set(c, 1, t) == {2}
    assert child_set(c, 2, t) == {1}
    assert child_set(c, 0, t) == set()
    assert child_set(c, 1) == {2}


def test_root_conflict_power_neighbor_of_other_color():
    t = path(2)
    c = config(state(c=0, s="Working"), state(c=1, s="Power"))
    assert G(c, t, 0, "Conflict")


def test_root_conflict_when_childless_even_with_same_color():
    t = path(2)
    c = config(state(c=0, s="Working"), state(c=0, s="Power"))
    assert G(c, t, 0, "Conflict")
    c = config(state(c=0, s="Working"), state(p=0, c=0, s="Power"))
    assert not G(c, t, 0, "Conflict")


def test_faulty_phase_clause_under_power_parent():
    t = path(3)
    c = config(
        state(c=0, s="Working"),
        state(p=0, ts=0, c=0, s="Power", ph="a"),
        state(p=1, ts=1, c=0, s="Idle", ph="b"),
    )
    assert G(c, t, 2, "Faulty")
    same_phase = c.replace({2: state(p=1, ts=1, c=0, s="Idle", ph="a")})
    assert not G(same_phase, t, 2, "Faulty")


def test_strong_conflict_needs_two_power_colors():
    t = triangle()
    both = config(state(c=0, s="Power"), state(c=0, s="Idle"), state(c=1, s="Power"))
    assert G(both, t, 1, "StrongConflict")
    single = config(state(c=0, s="Working"), state(p=0, c=0, s="Idle"), state(c=1, s="Power"))
    assert not G(single, t, 1, "StrongConflict")
    assert G(single, t, 1, "Conflict")
    detached = single.replace({1: state(c=0, s="Idle")})
    assert not G(detached, t, 1, "Conflict")


def test_strong_conflict_literal_reading_fires_on_one_witness():
    t = triangle()
    single = config(state(c=0, s="Working"), state(p=0, c=0, s="Idle"), state(c=1, s="Power"))
    assert G(single, t, 1, "StrongConflict", literal_strong_conflict=True)


def test_strong_conflict_false_for_strong_e():
    t = triangle()
    c = config(state(c=0, s="Power"), state(c=0, s="StrongE"), state(c=1, s="Power"))
    assert not G(c, t, 1, "StrongConflict")


def test_connection_needs_candidate_argument():
    t = path(2)
    c = config(state(c=1, s="Power"), state(c=0))
    assert G(c, t, 1, "Connection", 0)
    with pytest.raises(ValueError):
        G(c, t, 1, "Connection")
    with pytest.raises(ValueError):
        G(c, t, 1, "Detached", 0)
    with pytest.raises(ValueError):
        G(c, t, 1, "NoSuchPredicate")
    with pytest.raises(ValueError):
        G(c, t, 1, "inLegalTree")
    with pytest.raises(ValueError):
        A(c, t, 1, "Detached")


def test_in_legal_tree_root():
    t = path(2)
    assert A(config(state(s="Working"), state()), t, 0, "inLegalTree")
    assert not A(config(state(s="StrongE"), state()), t, 0, "inLegalTree")


def test_two_cycle_is_unregular():
    t = triangle()
    c = config(state(s="Working"), state(p=2), state(p=1))
    assert not G(c, t, 1, "Faulty") and not G(c, t, 2, "Faulty")
    assert not A(c, t, 1, "inLegalTree") and not A(c, t, 2, "inLegalTree")
    assert A(c, t, 1, "unRegular")


def test_power_parent_chain():
    t = path(3)
    c = config(
        state(c=0, s="Working", ph="a"),
        state(p=0, ts=0, c=0, s="Idle", ph="b"),
        state(p=1, ts=1, c=0, s="Idle", ph="b"),
    )
    assert A(c, t, 1, "PowerParent")
    assert A(c, t, 2, "PowerParent")
    assert A(c, t, 2, "influential")
    assert not A(c, t, 0, "influential")


def test_correct_needs_tree_parent_closer_to_root():
    t = path(3)
    c = config(state(s="Working"), state(ts=0), state(ts=1))
    assert all(A(c, t, u, "correct") for u in range(3))
    c = config(state(s="Working"), state(ts=2), state(ts=1))
    assert not A(c, t, 1, "correct")
    c = config(state(s="Working"), state(), state(ts=1))
    assert not A(c, t, 1, "correct")


def test_potentials():
    t = path(3)
    quiet = config(state(s="Working"), state(c=1), state(c=1))
    assert count_potential(quiet, t, "PIC") == 0
    assert count_potential(quiet, t, "PIR") == 0
    same = config(state(c=1, s="Working"), state(c=1), state(c=1))
    assert count_potential(same, t, "r_color_count") == 3
    c = config(state(c=0, s="Working"), state(c=1, s="Power"), state(c=1))
    assert A(c, t, 1, "unRegular")
    assert count_potential(c, t, "PIC") == 1
    assert count_potential(c, t, "PIR") == 1
    assert count_potential(c, t, "PIC_PowerParent") == 0
    assert count_potential(c, t, "PIR_PowerParent") == 0
    with pytest.raises(ValueError):
        count_potential(c, t, "correct")


def test_unsafe_root_next_to_foreign_power():
    t = triangle()
    c = config(
        state(c=0, s="Working"),
        state(p=0, ts=0, c=0, s="Idle"),
        state(c=1, s="Power"),
    )
    assert A(c, t, 0, "insideLegalTree")
    assert A(c, t, 0, "unSafe")
    calm = c.replace({2: state(c=1, s="Idle")})
    assert not A(calm, t, 0, "unSafe")


def test_predicate_names_partition():
    assert len(PredicateName) == 30
    assert set(GUARD_PREDICATES) | set(ANALYSIS_PREDICATES) == set(PredicateName)
    assert PredicateName.CONNECTION in GUARD_PREDICATES


def test_predicate_table_covers_every_name():
    t = path(2)
    rows = predicate_table(config(state(s="Working"), state()), t)
    assert len(rows) == 2
    assert set(rows[0]) == {"node"} | {p.value for p in PredicateName}
