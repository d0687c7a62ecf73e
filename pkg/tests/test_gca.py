import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfuc.gca import (
    GCA_STEPS,
    DoubleProposal,
    GcaHarness,
    compat_projection,
    decide,
    glb_bot,
    lub_bot,
    propose,
)
from cfuc.objects import Command, counter_spec
from cfuc.sim import SchedulePlan, Simulation
from cfuc.traces import Trace, is_prefix
from cfuc.verify import check_gca_properties, check_gca_wait_freedom

from helpers import random_gca_inputs, run_gca

CC = counter_spec().conflicts
READ1 = Command("read", 1, 1)
INC2 = Command("inc", 2, 1)
INC1 = Command("inc", 1, 1)
DEC2 = Command("dec", 2, 1)


def T(*cmds):
    return Trace(tuple(cmds), CC)


def outputs(rec, instance=1):
    return {p: (o.trace, o.committed) for p, o in rec.gca_ledger[instance].outputs.items()}


def test_sole_participant_commits_its_input():
    rec = run_gca({1: T(READ1)}, 0, policy="round-robin")
    assert outputs(rec) == {1: (T(READ1), True)}
    assert rec.gca_ledger[1].steps[1] == GCA_STEPS


def test_identical_inputs_all_commit():
    rec = run_gca({p: T(INC2) for p in (1, 2, 3)}, 3)
    assert outputs(rec) == {p: (T(INC2), True) for p in (1, 2, 3)}


def test_compatible_inputs_commit_their_lub():
    rec = run_gca({1: T(INC1), 2: T(DEC2)}, 0, policy=(1, 2) * 4)
    both = T(DEC2, INC1)
    assert outputs(rec) == {1: (both, True), 2: (both, True)}


@pytest.mark.parametrize(
    "policy, expected",
    [
        ((1, 2) * 4, {1: ((), False), 2: ((), False)}),
        ((1,) * 4 + (2,) * 4, {1: ((READ1,), True), 2: ((READ1,), False)}),
        ((2,) * 4 + (1,) * 4, {1: ((INC2,), False), 2: ((INC2,), True)}),
        ((1, 1, 2, 2, 1, 2, 1, 2), {1: ((READ1,), False), 2: ((READ1,), False)}),
    ],
)
def test_conflicting_singletons(policy, expected):
    rec = run_gca({1: T(READ1), 2: T(INC2)}, 0, policy=policy)
    got = {p: (t.letters, c) for p, (t, c) in outputs(rec).items()}
    assert got == expected
    assert all(check_gca_properties(rec))


def test_compat_projection_examples():
    view = (T(READ1), None, T(INC2))
    co, same = compat_projection(view)
    assert not same
    assert co == (T(), None, T())
    view = (T(INC1), T(DEC2), None)
    assert compat_projection(view) == (view, True)
    assert compat_projection((T(READ1), T(READ1, INC2))) == ((T(READ1), T(READ1, INC2)), True)


def test_bottom_conventions():
    assert lub_bot([None, None], CC) == T()
    assert glb_bot([T(INC1), None]) is None
    assert lub_bot([T(INC1), None, T(DEC2)], CC) == T(INC1, DEC2)


def test_decide_adopts_flagged_glb():
    s = T(READ1)
    res = decide(1, s, (s, T(INC2)), ((T(), False), (T(INC2), True)))
    assert res.trace == T(INC2)
    assert not res.committed


def test_double_proposal_is_rejected():
    class Twice(GcaHarness):
        def program(self, ctx):
            yield from propose(ctx, 1, T(INC1))
            yield from propose(ctx, 1, T(INC1))

    sim = Simulation(1, Twice({1: T(INC1)}), SchedulePlan(policy="round-robin", fairness_bound=0), None)
    with pytest.raises(DoubleProposal):
        sim.run(100)


def _all_schedules(k1, k2):
    """Every interleaving of k1 steps of p1 and k2 of p2."""
    for ones in itertools.combinations(range(k1 + k2), k1):
        yield tuple(1 if i in ones else 2 for i in range(k1 + k2))


def test_exhaustive_two_proposers_with_crashes():
    pairs = [(T(READ1), T(INC2)), (T(INC1), T(DEC2)), (T(INC1), T(INC1)), (T(), T(INC2))]
    seen = 0
    for a, b in pairs:
        for c1, c2 in [(None, None), (1, None), (None, 2), (3, None)]:
            crash = {p: c for p, c in ((1, c1), (2, c2)) if c is not None}
            k1 = c1 if c1 else GCA_STEPS
            k2 = c2 if c2 else GCA_STEPS
            for pol in _all_schedules(k1, k2):
                rec = run_gca({1: a, 2: b}, 0, policy=pol, crash_points=crash)
                for v in check_gca_properties(rec):
                    assert v.holds, (a, b, pol, v)
                seen += 1
    # C(8,4) + C(5,1) + C(6,2) + C(7,3) schedules per input pair
    assert seen == 4 * (70 + 5 + 15 + 35)


def test_random_runs_satisfy_gca_properties():
    rng = random.Random(7)
    spec = counter_spec()
    for k in range(500):
        n = rng.choice([2, 3, 4])
        inputs = random_gca_inputs(rng, spec, n)
        crash = {p: rng.randint(0, GCA_STEPS) for p in range(1, n + 1) if rng.random() < 0.3}
        rec = run_gca(inputs, k, crash_points=crash)
        for v in check_gca_properties(rec):
            assert v.holds, (k, v)
        assert check_gca_wait_freedom(rec).holds


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 4))
def test_every_live_proposer_finishes_in_four_steps(seed, n):
    rng = random.Random(seed)
    inputs = random_gca_inputs(rng, counter_spec(), n)
    rec = run_gca(inputs, seed)
    entry = rec.gca_ledger[1]
    assert set(entry.outputs) == set(inputs)
    assert all(s == GCA_STEPS for s in entry.steps.values())
    assert all(rec.steps_by(p) == GCA_STEPS for p in inputs)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_commits_are_prefixes_of_every_output(seed):
    rng = random.Random(seed)
    rec = run_gca(random_gca_inputs(rng, counter_spec(), 3), seed)
    outs = rec.gca_ledger[1].outputs.values()
    for c in outs:
        if c.committed:
            for o in outs:
                assert is_prefix(c.trace, o.trace)
