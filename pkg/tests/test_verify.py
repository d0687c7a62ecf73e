import random

import pytest
from hypothesis import event, given, settings
from hypothesis import strategies as st

from cfuc import scenario
from cfuc.gca import GcaResult
from cfuc.objects import OK, Command, counter_spec, get_spec
from cfuc.sim import HistoryEvent, SchedulePlan, Workload, run
from cfuc.traces import Trace
from cfuc.uc import CfUC, WeakUC
from cfuc.verify import (
    LINEARIZABILITY_BOUND,
    ScenarioMismatch,
    SearchBudgetExceeded,
    Verdict,
    check_helping,
    check_linearizable,
    check_linearizable_bruteforce,
    check_progress,
    check_round_monotonicity,
    check_same_round_commits,
    cross_check_uc_responses,
    gca_instance_verdicts,
    operations_of,
    progress_hierarchy,
)

from helpers import random_workload

SPEC = counter_spec()
CC = SPEC.conflicts


def hist(*ops):
    """Build a history from (process, op, inv, resp, value); resp None = pending."""
    events = []
    for p, op, inv, resp, value in ops:
        events.append(HistoryEvent("inv", p, op, None, inv))
        if resp is not None:
            events.append(HistoryEvent("resp", p, op, value, resp))
    events.sort(key=lambda e: e.step_index)
    return events


def both(h, spec=SPEC):
    a = check_linearizable(h, spec).holds
    b = check_linearizable_bruteforce(h, spec).holds
    assert a == b
    return a


def test_empty_history():
    assert both([])


def test_sequential_increment_then_read():
    assert both(hist((1, "inc", 0, 1, OK), (2, "read", 2, 3, 1)))
    assert not both(hist((1, "inc", 0, 1, OK), (2, "read", 2, 3, 0)))


def test_read_cannot_see_an_increment_twice():
    assert not both(hist((1, "inc", 0, 5, OK), (2, "read", 1, 3, 2)))


def test_concurrent_read_may_go_either_way():
    assert both(hist((1, "inc", 0, 5, OK), (2, "read", 1, 3, 0)))
    assert both(hist((1, "inc", 0, 5, OK), (2, "read", 1, 3, 1)))


def test_pending_operations_may_take_effect_or_not():
    assert both(hist((1, "inc", 0, None, None), (2, "read", 1, 3, 1)))
    assert both(hist((1, "inc", 0, None, None), (2, "read", 1, 3, 0)))
    assert not both(hist((1, "inc", 0, None, None), (2, "read", 1, 3, 2)))


def test_real_time_order_is_respected():
    # p2 reads 1 after p1's inc and dec have both returned
    h = hist((1, "inc", 0, 1, OK), (1, "dec", 2, 3, OK), (2, "read", 4, 5, 1))
    assert not both(h)


def test_failing_verdict_carries_a_witness():
    v = check_linearizable(hist((1, "inc", 0, 1, OK), (2, "read", 2, 3, 0)), SPEC)
    assert not v and v.witness["history"]
    with pytest.raises(ValueError):
        Verdict("x", False)


def test_bound_is_enforced():
    h = hist(*[(1, "inc", 2 * k, 2 * k + 1, OK) for k in range(LINEARIZABILITY_BOUND + 1)])
    with pytest.raises(SearchBudgetExceeded):
        check_linearizable(h, SPEC)
    with pytest.raises(SearchBudgetExceeded):
        check_linearizable_bruteforce(h, SPEC)


def test_malformed_histories():
    with pytest.raises(ValueError):
        operations_of([HistoryEvent("resp", 1, "inc", OK, 0)])
    with pytest.raises(ValueError):
        operations_of([HistoryEvent("inv", 1, "inc", None, 0), HistoryEvent("inv", 1, "inc", None, 1)])


@st.composite
def histories(draw):
    """Each appearance of a process in the drawn sequence invokes its next
    operation or responds to its open one; operations left open are pending."""
    spec_name = draw(st.sampled_from(["counter", "register", "total-conflict-queue"]))
    spec = get_spec(spec_name)
    values = {"counter": [OK, 0, 1, 2, -1], "register": [OK, 0, 1],
              "total-conflict-queue": [OK, None, 1, 2]}[spec_name]
    events, open_, count = [], {}, 0
    for idx, p in enumerate(draw(st.lists(st.integers(1, 3), max_size=14))):
        if p in open_:
            op = open_.pop(p)
            events.append(HistoryEvent("resp", p, op, draw(st.sampled_from(values)), idx))
        elif count < 7:
            op = draw(st.sampled_from(spec.operations))
            open_[p] = op
            count += 1
            events.append(HistoryEvent("inv", p, op, None, idx))
    return spec, events


@settings(max_examples=400, deadline=None)
@given(histories())
def test_dual_routes_agree_on_small_histories(case):
    spec, h = case
    fast = check_linearizable(h, spec, max_ops=8)
    slow = check_linearizable_bruteforce(h, spec, max_ops=8)
    assert fast.holds == slow.holds
    event(f"linearizable={fast.holds}")


def test_dual_routes_agree_on_uc_runs():
    rng = random.Random(99)
    fails = 0
    for seed in range(300):
        n = rng.choice([2, 3])
        wl = random_workload(rng, SPEC, n, rng.randint(n, 7))
        rec = run(SchedulePlan(seed=seed), wl, (CfUC if seed % 2 else WeakUC)(SPEC), 20000, n=n)
        fast = check_linearizable(rec, SPEC, max_ops=8)
        assert fast.holds == check_linearizable_bruteforce(rec, SPEC).holds
        fails += not fast.holds
    assert fails == 0


def test_gca_verdicts_flag_invented_commands():
    x = Trace((Command("inc", 1, 1),), CC)
    y = Trace((Command("dec", 9, 9),), CC)
    verdicts = {v.property: v.holds for v in
                gca_instance_verdicts(1, {1: x}, {1: GcaResult(y, True)})}
    assert not verdicts["gca[1].validity"]
    assert not verdicts["gca[1].commitment"]


def test_gca_verdicts_flag_divergent_commits():
    a = Trace((Command("read", 1, 1),), CC)
    b = Trace((Command("inc", 2, 1),), CC)
    verdicts = {v.property: v.holds for v in
                gca_instance_verdicts(1, {1: a, 2: b}, {1: GcaResult(a, True), 2: GcaResult(b, True)})}
    assert not verdicts["gca[1].adoption"]
    assert not verdicts["gca[1].convergence"]
    assert verdicts["gca[1].validity"]


def test_commitment_is_vacuous_when_inputs_conflict():
    a = Trace((Command("read", 1, 1),), CC)
    b = Trace((Command("inc", 2, 1),), CC)
    e = Trace.empty(CC)
    (commit,) = [v for v in gca_instance_verdicts(1, {1: a, 2: b}, {1: GcaResult(e, False), 2: GcaResult(e, False)})
                 if v.property.endswith("commitment")]
    assert commit.holds and commit.detail["vacuous"]


def _fig1a():
    cfg = scenario.load_config(scenario.resolve_config("fig1a.cfuc"))
    return cfg, scenario.run_config(cfg, None)


def test_tampered_response_is_caught_by_both_routes():
    cfg, res = _fig1a()
    assert res.ok
    scenario.inject_fault(res.record, "tamper-response")
    verdicts, _ = scenario.evaluate(cfg, res.record)
    failed = {v.property for v in verdicts if not v.holds}
    assert failed == {"linearizability", "uc-responses"}


def test_shortened_commit_is_caught():
    cfg, res = _fig1a()
    scenario.inject_fault(res.record, "shorten-commit")
    verdicts, _ = scenario.evaluate(cfg, res.record)
    failed = {v.property for v in verdicts if not v.holds}
    assert "round-monotonicity" in failed
    assert any(f.endswith("common-prefix") for f in failed)


def test_response_cross_check_catches_a_swapped_value():
    wl = Workload({1: ["inc", "read"]})
    rec = run(SchedulePlan(policy="round-robin"), wl, WeakUC(SPEC), 1000, n=2)
    assert cross_check_uc_responses(rec, SPEC).holds
    k = max(i for i, e in enumerate(rec.history) if e.kind == "resp")
    rec.history[k] = rec.history[k]._replace(value=0)
    assert not cross_check_uc_responses(rec, SPEC).holds


def test_same_round_and_helping_checks_flag_tampering():
    wl = Workload({1: ["inc"], 2: ["dec"]})
    rec = run(SchedulePlan(seed=4), wl, CfUC(SPEC), 1000)
    assert check_same_round_commits(rec).holds and check_helping(rec).holds
    r, s, p, step = rec.committed_log[0]
    rec.committed_log.append((r, Trace.empty(CC), 2, step + 1))
    assert not check_same_round_commits(rec).holds
    prop = rec.proposals[0]
    prop["collected"] = prop["collected"] + (Command("read", 7, 7),)
    assert not check_helping(rec).holds


def test_round_monotonicity_detects_a_later_shorter_output():
    rec = run(SchedulePlan(seed=4), Workload({1: ["inc", "inc"]}), WeakUC(SPEC), 1000, n=1)
    assert check_round_monotonicity(rec).holds
    last = max(k for k in rec.gca_ledger if isinstance(k, int))
    rec.gca_ledger[last].outputs[1] = GcaResult(Trace.empty(CC), False)
    assert not check_round_monotonicity(rec).holds


def test_progress_needs_matching_plan():
    rec = run(SchedulePlan(seed=1), Workload({1: ["inc"]}), WeakUC(SPEC), 1000)
    with pytest.raises(ScenarioMismatch):
        check_progress(rec, "eventually-conflict-free", 100)
    with pytest.raises(ScenarioMismatch):
        check_progress(rec, "solo-suffix", 100)


@pytest.mark.parametrize("seed, strong, weak", [(0, False, True), (2, False, True), (1, True, True)])
def test_progress_hierarchy_examples(seed, strong, weak):
    cfg = scenario.load_config(scenario.resolve_config("fig1b.weakuc"))
    res = scenario.run_config(cfg, seed)
    assert progress_hierarchy(res.record, 20) == {"conflict-free": strong, "weak-conflict-free": weak}


def test_conflict_free_implies_weak_conflict_free():
    cfg = scenario.load_config(scenario.resolve_config("fig1b.weakuc"))
    for seed in range(100):
        rec = scenario.run_config(cfg, seed).record
        for budget in (10, 20, 30):
            h = progress_hierarchy(rec, budget)
            assert h["weak-conflict-free"] or not h["conflict-free"]
