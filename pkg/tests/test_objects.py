import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfuc.objects import (
    OK,
    SPECS,
    STATE_WINDOWS,
    Command,
    counter_spec,
    degenerate_specs,
    derive_conflicts,
    get_spec,
    non_conflicting_subset,
    register_spec,
)
from cfuc.traces import equivalent


def test_counter_transitions():
    c = counter_spec()
    assert c.transition("inc", 0) == (OK, 1)
    assert c.transition("read", 5) == (5, 5)
    assert c.transition("dec", 0) == (OK, -1)


def test_counter_declared_conflicts():
    cc = counter_spec().conflicts
    assert cc.conflicts("read", "inc") and cc.conflicts("inc", "read")
    assert cc.conflicts("read", "dec")
    assert not cc.conflicts("inc", "dec")
    assert not cc.conflicts("inc", "inc")
    assert not cc.conflicts("read", "read")


def test_degenerate_relations():
    total, empty = degenerate_specs()
    for a, b in itertools.product(total.operations, repeat=2):
        assert total.conflicts.conflicts(a, b)
    for a, b in itertools.product(empty.operations, repeat=2):
        assert not empty.conflicts.conflicts(a, b)


def test_update_only_counter_schedules_with_equal_multisets_are_equivalent():
    spec = degenerate_specs()[1]
    words = list(itertools.product(spec.operations, repeat=4))
    for u, v in itertools.product(words, repeat=2):
        if sorted(u) == sorted(v):
            assert equivalent(u, v, spec.conflicts)


def test_derive_conflicts_counter_window():
    spec = counter_spec()
    derived = derive_conflicts(spec, range(-2, 3))
    assert derived == spec.conflicts
    assert derive_conflicts(spec, []).pairs == frozenset()


def test_derive_conflicts_register():
    reg = register_spec()
    derived = derive_conflicts(reg, [0, 1])
    assert derived.conflicts("write0", "write1")
    assert derived == reg.conflicts


@pytest.mark.parametrize("name", sorted(SPECS))
def test_declared_relations_cover_derived_ones(name):
    spec = get_spec(name)
    derived = derive_conflicts(spec, STATE_WINDOWS[name])
    assert derived.pairs <= spec.conflicts.pairs
    if name != "total-conflict-queue":
        assert derived == spec.conflicts


def test_queue_declares_more_than_it_needs():
    # identical enqueues commute, the queue is total by declaration
    spec = get_spec("total-conflict-queue")
    derived = derive_conflicts(spec, STATE_WINDOWS["total-conflict-queue"])
    assert not derived.conflicts("enq1", "enq1")
    assert spec.conflicts.conflicts("enq1", "enq1")


@pytest.mark.parametrize("name", sorted(SPECS))
def test_derived_relation_is_symmetric(name):
    spec = get_spec(name)
    rel = derive_conflicts(spec, STATE_WINDOWS[name])
    for a, b in itertools.product(spec.operations, repeat=2):
        assert rel.conflicts(a, b) == rel.conflicts(b, a)


def test_unknown_spec_name():
    with pytest.raises(KeyError, match="unknown object"):
        get_spec("stack")


@given(st.sampled_from(["read", "inc", "dec"]), st.sampled_from(["read", "inc", "dec"]),
       st.integers(1, 4), st.integers(1, 4), st.integers(1, 9), st.integers(1, 9))
def test_command_conflicts_follow_operations(a, b, i, j, s, t):
    cc = counter_spec().conflicts
    assert cc.conflicts(Command(a, i, s), Command(b, j, t)) == cc.conflicts(a, b)


def test_command_renders_compactly():
    assert str(Command("inc", 2, 3)) == "inc@2.3"


def test_non_conflicting_subset():
    spec = counter_spec()
    assert non_conflicting_subset(spec, ["inc", "read", "dec"]) == ["inc", "dec"]
    total = degenerate_specs()[0]
    assert non_conflicting_subset(total, total.operations) == []
