"""Post-hoc checkers over execution records.

Every checker returns :class:`Verdict` objects; a failing verdict always
carries a concrete witness.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Any, NamedTuple

from cfuc.gca import GCA_STEPS
from cfuc.objects import SequentialSpec
from cfuc.sim import ExecutionRecord, HistoryEvent
from cfuc.traces import Trace, compatible, glb, is_prefix, ret_star

LINEARIZABILITY_BOUND = 10


class SearchBudgetExceeded(Exception):
    pass


class ScenarioMismatch(Exception):
    pass


@dataclass
class Verdict:
    property: str
    holds: bool
    witness: Any = None
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.holds and self.witness is None:
            raise ValueError(f"failed verdict {self.property!r} needs a witness")

    def __bool__(self) -> bool:
        return self.holds


# -- linearizability ----------------------------------------------------------


class Operation(NamedTuple):
    process: int
    op: Any
    inv: int
    resp: int | None
    value: Any


def operations_of(history: list[HistoryEvent]) -> list[Operation]:
    out: list[Operation] = []
    open_: dict[int, tuple] = {}
    for ev in history:
        if ev.kind == "inv":
            if ev.process in open_:
                raise ValueError(f"process {ev.process} invoked twice without a response")
            open_[ev.process] = (ev.op, ev.step_index)
        elif ev.kind == "resp":
            if ev.process not in open_:
                raise ValueError(f"response without invocation at step {ev.step_index}")
            op, inv = open_.pop(ev.process)
            out.append(Operation(ev.process, op, inv, ev.step_index, ev.value))
        else:
            raise ValueError(f"unknown event kind {ev.kind!r}")
    for p, (op, inv) in open_.items():
        out.append(Operation(p, op, inv, None, None))
    out.sort(key=lambda o: o.inv)
    return out


def _history(h: Any) -> list[HistoryEvent]:
    return h.history if isinstance(h, ExecutionRecord) else list(h)


def check_linearizable(
    history: Any, spec: SequentialSpec, max_ops: int = LINEARIZABILITY_BOUND
) -> Verdict:
    """Depth-first search for a legal sequential witness.

    Pending operations may be linearized (any response) or dropped.  States
    already explored for a given set of linearized operations are pruned.
    """
    ops = operations_of(_history(history))
    if len(ops) > max_ops:
        raise SearchBudgetExceeded(f"{len(ops)} operations exceed the bound {max_ops}")
    n = len(ops)
    complete_mask = sum(1 << k for k, o in enumerate(ops) if o.resp is not None)
    # must_precede[k]: operations that responded before ops[k] was invoked
    must_precede = [
        sum(1 << j for j, p in enumerate(ops) if p.resp is not None and p.resp < o.inv)
        for o in ops
    ]
    seen: set[tuple[int, Any]] = set()
    path: list[int] = []

    def dfs(done: int, state: Any) -> bool:
        if done & complete_mask == complete_mask:
            return True
        if (done, state) in seen:
            return False
        seen.add((done, state))
        for k in range(n):
            if done >> k & 1 or must_precede[k] & ~done:
                continue
            o = ops[k]
            resp, nxt = spec.transition(o.op, state)
            if o.resp is not None and resp != o.value:
                continue
            path.append(k)
            if dfs(done | 1 << k, nxt):
                return True
            path.pop()
        return False

    if dfs(0, spec.initial):
        return Verdict("linearizability", True, detail={"witness": [_fmt_op(ops[k]) for k in path]})
    return Verdict(
        "linearizability", False,
        witness={"history": [_fmt_op(o) for o in ops], "explored": len(seen)},
    )


def check_linearizable_bruteforce(history: Any, spec: SequentialSpec, max_ops: int = 8) -> Verdict:
    """Enumerate completions and permutations; an independent slow reference."""
    ops = operations_of(_history(history))
    if len(ops) > max_ops:
        raise SearchBudgetExceeded(f"{len(ops)} operations exceed the bound {max_ops}")
    done = [o for o in ops if o.resp is not None]
    pending = [o for o in ops if o.resp is None]
    for r in range(len(pending) + 1):
        for extra in itertools.combinations(pending, r):
            chosen = done + list(extra)
            for perm in itertools.permutations(chosen):
                if _legal(perm, spec):
                    return Verdict("linearizability", True,
                                   detail={"witness": [_fmt_op(o) for o in perm]})
    return Verdict("linearizability", False, witness={"history": [_fmt_op(o) for o in ops]})


def _legal(perm: tuple, spec: SequentialSpec) -> bool:
    pos = {id(o): k for k, o in enumerate(perm)}
    for a in perm:
        for b in perm:
            if a.resp is not None and a.resp < b.inv and pos[id(a)] > pos[id(b)]:
                return False
    q = spec.initial
    for o in perm:
        r, q = spec.transition(o.op, q)
        if o.resp is not None and r != o.value:
            return False
    return True


def _fmt_op(o: Operation) -> dict:
    return {"process": o.process, "op": str(o.op), "inv": o.inv,
            "resp": "pending" if o.resp is None else o.resp, "value": _jsonable(o.value)}


def _jsonable(v: Any) -> Any:
    if v is None or isinstance(v, (bool, int, float, str)):
        return v
    return str(v)


# -- GCA ----------------------------------------------------------------------

GCA_PROPERTIES = ("validity", "adoption", "commitment", "convergence", "common-prefix",
                  "weak-agreement")


def _union(counters: list[Counter]) -> Counter:
    out: Counter = Counter()
    for c in counters:
        out |= c
    return out


def gca_instance_verdicts(instance: Any, inputs: dict, outputs: dict) -> list[Verdict]:
    P, P_r = set(inputs), set(outputs)
    out = []
    tag = f"gca[{instance}]"

    allowed = _union([s.ops() for s in inputs.values()])
    bad = {i: str(res.trace) for i, res in outputs.items() if res.trace.ops() - allowed}
    out.append(Verdict(f"{tag}.validity", not bad, bad or None))

    bad = {}
    for i, ri in outputs.items():
        if ri.committed:
            for j, rj in outputs.items():
                if not is_prefix(ri.trace, rj.trace):
                    bad[f"{i}->{j}"] = (str(ri.trace), str(rj.trace))
    out.append(Verdict(f"{tag}.adoption", not bad, bad or None))

    hyp = P == P_r and compatible(inputs.values())
    if hyp:
        winners = [j for j, rj in outputs.items() if rj.committed and is_prefix(inputs[j], rj.trace)]
        out.append(Verdict(f"{tag}.commitment", bool(winners),
                           None if winners else {k: _fmt_res(v) for k, v in outputs.items()},
                           {"witness_process": winners[0] if winners else None}))
    else:
        out.append(Verdict(f"{tag}.commitment", True, detail={"vacuous": True}))

    ok = compatible([r.trace for r in outputs.values()])
    out.append(Verdict(f"{tag}.convergence", ok,
                       None if ok else {k: _fmt_res(v) for k, v in outputs.items()}))

    if inputs:
        base = glb(inputs.values())
        bad = {i: str(r.trace) for i, r in outputs.items() if not is_prefix(base, r.trace)}
    else:
        bad = {}
    out.append(Verdict(f"{tag}.common-prefix", not bad, bad or None))

    values = list(inputs.values())
    if values and all(v == values[0] for v in values):
        bad = {i: _fmt_res(r) for i, r in outputs.items() if not r.committed}
        out.append(Verdict(f"{tag}.weak-agreement", not bad, bad or None))
    else:
        out.append(Verdict(f"{tag}.weak-agreement", True, detail={"vacuous": True}))
    return out


def _fmt_res(r: Any) -> list:
    return [str(r.trace), bool(r.committed)]


def check_gca_properties(record: ExecutionRecord) -> list[Verdict]:
    out = []
    for instance, entry in record.gca_ledger.items():
        out.extend(gca_instance_verdicts(instance, entry.inputs, entry.outputs))
    return out


def check_gca_wait_freedom(record: ExecutionRecord) -> Verdict:
    """Each returned proposal took exactly four steps on its own A and B objects."""
    by_proc: dict[int, list] = {}
    for s in record.steps:
        by_proc.setdefault(s.process, []).append(s)
    bad = {}
    for instance, entry in record.gca_ledger.items():
        objs = {("A", instance), ("B", instance)}
        for i, (first, last) in entry.spans.items():
            mine = [s for s in by_proc.get(i, []) if first <= s.index <= last]
            on_objects = [s for s in mine if s.target[:2] in objs]
            if len(mine) != GCA_STEPS or len(on_objects) != GCA_STEPS:
                bad[f"{instance}/{i}"] = len(mine)
    return Verdict("gca.wait-freedom", not bad, bad or None)


# -- UC invariants ------------------------------------------------------------


def _round_outputs(record: ExecutionRecord) -> dict[int, list]:
    return {k: list(e.outputs.values()) for k, e in record.gca_ledger.items() if isinstance(k, int)}


def check_round_monotonicity(record: ExecutionRecord) -> Verdict:
    """A trace committed at round r prefixes every output of rounds >= r."""
    rounds = _round_outputs(record)
    for r, outs in sorted(rounds.items()):
        for res in outs:
            if not res.committed:
                continue
            for r2, outs2 in rounds.items():
                if r2 < r:
                    continue
                for res2 in outs2:
                    if not is_prefix(res.trace, res2.trace):
                        return Verdict("round-monotonicity", False,
                                       {"committed": [r, str(res.trace)],
                                        "later": [r2, str(res2.trace)]})
    return Verdict("round-monotonicity", True)


def check_same_round_commits(record: ExecutionRecord) -> Verdict:
    by_round: dict[int, Trace] = {}
    for r, s, p, _ in record.committed_log:
        if r in by_round and by_round[r] != s:
            return Verdict("same-round-commits", False, {"round": r, "traces": [str(by_round[r]), str(s)]})
        by_round.setdefault(r, s)
    return Verdict("same-round-commits", True)


def latest_committed(record: ExecutionRecord, empty: Trace | None = None) -> Trace | None:
    if not record.committed_log:
        return empty
    return max(record.committed_log, key=lambda e: e[0])[1]


def cross_check_uc_responses(record: ExecutionRecord, spec: SequentialSpec) -> Verdict:
    """Returned values equal their value in the latest committed trace, and some
    representative of that trace respects real-time order."""
    T = latest_committed(record, spec.empty_trace())
    ops = record.operations()
    for o in ops:
        if o["resp"] is None:
            continue
        cmd = o["tag"]
        if cmd not in T:
            return Verdict("uc-responses", False, {"missing": str(cmd), "latest": str(T)})
        expect = ret_star(cmd, T, spec)
        if expect != o["value"]:
            return Verdict("uc-responses", False,
                           {"command": str(cmd), "returned": _jsonable(o["value"]),
                            "expected": _jsonable(expect)})
    in_T = [o for o in ops if o["tag"] in T]
    graph: dict[Any, set] = {a: set() for a in T.letters}
    letters = T.letters
    for x in range(len(letters)):
        for y in range(x + 1, len(letters)):
            if T.conflicts.conflicts(letters[x], letters[y]):
                graph[letters[y]].add(letters[x])
    for a in in_T:
        for b in in_T:
            if a["resp"] is not None and a["resp"] < b["inv"]:
                graph[b["tag"]].add(a["tag"])
    try:
        order = list(TopologicalSorter(graph).static_order())
    except CycleError as exc:
        return Verdict("uc-responses", False, {"real-time cycle": [str(c) for c in exc.args[1]]})
    return Verdict("uc-responses", True, detail={"representative": [str(c) for c in order]})


def check_helping(record: ExecutionRecord) -> Verdict:
    """Every command collected from the announcement array is in the proposal."""
    for p in record.proposals:
        missing = [c for c in p["collected"] if c not in p["proposal"]]
        if missing:
            return Verdict("helping", False,
                           {"process": p["process"], "round": p["round"], "missing": list(map(str, missing))})
    return Verdict("helping", True)


# -- memory -------------------------------------------------------------------


def check_snapshot_containment(record: ExecutionRecord) -> Verdict:
    views: dict[tuple, list[tuple]] = {}
    for s in record.steps:
        if s.kind == "scan":
            views.setdefault(s.target, []).append(s.versions)
    for obj, vs in views.items():
        chain = sorted(vs, key=sum)
        for a, b in zip(chain, chain[1:]):
            if any(x > y for x, y in zip(a, b)):
                return Verdict("snapshot-containment", False, {"object": list(obj), "views": [a, b]})
    return Verdict("snapshot-containment", True, detail={"objects": len(views)})


def check_register_replay(record: ExecutionRecord) -> Verdict:
    """Register reads return the latest earlier write (or the initial value)."""
    last: dict[tuple, Any] = {}
    for s in record.steps:
        if s.kind == "write":
            last[s.target] = s.value
        elif s.kind == "read":
            expect = last.get(s.target, record.defaults.get(s.target[0]))
            if s.value != expect:
                return Verdict("register-replay", False,
                               {"step": s.index, "read": str(s.value), "expected": str(expect)})
    return Verdict("register-replay", True)


# -- progress -----------------------------------------------------------------

PROGRESS_CLASSES = ("eventually-conflict-free", "solo-suffix", "conflict-resolving",
                    "conflict-forgetting")


def _late(ops: list[dict], boundary: int, budget: int) -> list[dict]:
    """Operations live at or after ``boundary`` that missed their deadline."""
    late = []
    for o in ops:
        if o["resp"] is not None and o["resp"] < boundary:
            continue
        deadline = max(o["inv"], boundary) + budget
        if o["resp"] is None or o["resp"] > deadline:
            late.append(o)
    return late


def _per_process(record: ExecutionRecord) -> dict[int, list[dict]]:
    out: dict[int, list[dict]] = {p: [] for p in range(1, record.n + 1)}
    for o in record.operations():
        out[o["process"]].append(o)
    return out


def _fmt_late(ops: list[dict]) -> list:
    return [{"process": o["process"], "op": str(o["tag"] or o["op"]), "inv": o["inv"],
             "resp": "pending" if o["resp"] is None else o["resp"]} for o in ops]


def _after_boundary(record: ExecutionRecord, boundary: int, budget: int, everyone: bool) -> Verdict:
    per = _per_process(record)
    expected = record.expected_ops
    correct = [p for p in per if p not in record.crashed]
    status = {}
    for p in correct:
        late = _late(per[p], boundary, budget)
        unissued = expected.get(p, len(per[p])) - len(per[p])
        status[p] = (late, unissued)
    finished = [p for p, (late, un) in status.items() if not late and un == 0]
    detail = {"boundary": boundary, "budget": budget, "completed_processes": finished,
              "correct": correct}
    if everyone:
        failing = {p: s for p, s in status.items() if p not in finished}
        ok = not failing
    else:
        failing = status if not finished else {}
        ok = bool(finished) or not correct
    witness = None
    if not ok:
        witness = {str(p): {"late": _fmt_late(late), "unissued": un} for p, (late, un) in failing.items()}
    return ok, witness, detail


def check_progress(
    record: ExecutionRecord, scenario_class: str, budget: int, algorithm: str | None = None
) -> Verdict:
    algorithm = algorithm or record.algorithm
    plan = record.plan
    name = f"progress.{scenario_class}"
    if scenario_class == "eventually-conflict-free":
        if plan is None or plan.phase_boundary is None:
            raise ScenarioMismatch("eventually-conflict-free needs a phase boundary")
        if record.release_step is None:
            return Verdict(name, False, {"reason": "conflicting phase never drained",
                                         "steps": len(record.steps)})
        everyone = algorithm == "cf-uc"
        ok, witness, detail = _after_boundary(record, record.release_step, budget, everyone)
        detail["claim"] = "every correct process" if everyone else "some correct process"
        return Verdict(name, ok, witness, detail)

    if plan is None or not plan.solo_windows:
        raise ScenarioMismatch(f"{scenario_class} needs a solo window")
    windows = sorted(record.windows, key=lambda w: w["window"])
    if not windows:
        return Verdict(name, False, {"reason": "solo window never opened"})

    if scenario_class == "solo-suffix":
        per = _per_process(record)
        bad = []
        for w in windows:
            p = w["process"]
            if p in record.crashed:
                continue
            for o in per[p]:
                live = o["inv"] < w["end"] and (o["resp"] is None or o["resp"] >= w["start"])
                if not live:
                    continue
                solo_steps = sum(
                    1 for s in record.steps
                    if s.process == p and max(o["inv"], w["start"]) <= s.index
                    and (o["resp"] is None or s.index <= o["resp"])
                )
                if o["resp"] is None or o["resp"] >= w["end"] or solo_steps > budget:
                    bad.append({"window": w["window"], "op": str(o["tag"]), "solo_steps": solo_steps})
                break
        return Verdict(name, not bad, bad or None, {"windows": windows, "budget": budget})

    w = windows[0]
    intruders = sorted({s.process for s in record.steps
                        if w["start"] <= s.index < w["end"] and s.process != w["process"]})
    if intruders:
        return Verdict(name, False, {"reason": "steps by other processes inside the solo window",
                                     "processes": intruders, "window": w})
    need = 2 if scenario_class == "conflict-resolving" else 1
    if w["ops_completed"] < need:
        return Verdict(name, False, {"reason": f"solo extension completed {w['ops_completed']} of {need} operations",
                                     "window": w})
    if scenario_class == "conflict-forgetting" and not _solo_commit(record, w):
        return Verdict(name, False, {"reason": "no committed round with the solo process as sole participant",
                                     "window": w})
    if scenario_class == "conflict-resolving":
        ok, witness, detail = _after_boundary(record, w["end"], budget, everyone=True)
    elif scenario_class == "conflict-forgetting":
        ok, witness, detail = _after_boundary(record, w["end"], budget, everyone=False)
    else:
        raise ScenarioMismatch(f"unknown scenario class {scenario_class!r}")
    detail["window"] = w
    return Verdict(name, ok, witness, detail)


def _solo_commit(record: ExecutionRecord, w: dict) -> bool:
    """The solo process committed, inside the window, at a GCA instance that
    nobody else had touched by the window's end."""
    p = w["process"]
    touched: dict[Any, set] = {}
    for s in record.steps:
        if s.index < w["end"] and s.kind in ("update", "scan"):
            touched.setdefault(s.target[1], set()).add(s.process)
    for instance, entry in record.gca_ledger.items():
        span = entry.spans.get(p)
        if (span and w["start"] <= span[0] and span[1] < w["end"]
                and touched.get(instance) == {p} and entry.outputs[p].committed):
            return True
    return False


def progress_hierarchy(record: ExecutionRecord, budget: int) -> dict[str, bool]:
    """Evaluate the conflict-free and weak proxies on the same record."""
    strong = check_progress(record, "eventually-conflict-free", budget, "cf-uc").holds
    weak = check_progress(record, "eventually-conflict-free", budget, "weak-uc").holds
    return {"conflict-free": strong, "weak-conflict-free": weak}


# -- bundles ------------------------------------------------------------------

SAFETY_CHECKS = ("linearizability", "gca", "gca-wait-freedom", "monotonicity", "same-round",
                 "responses", "snapshot", "registers", "helping")


def safety_verdicts(
    record: ExecutionRecord, spec: SequentialSpec, checks=SAFETY_CHECKS,
    max_ops: int = LINEARIZABILITY_BOUND,
) -> list[Verdict]:
    out: list[Verdict] = []
    if "linearizability" in checks:
        out.append(check_linearizable(record, spec, max_ops))
    if "gca" in checks:
        out.extend(check_gca_properties(record))
    if "gca-wait-freedom" in checks:
        out.append(check_gca_wait_freedom(record))
    if "monotonicity" in checks:
        out.append(check_round_monotonicity(record))
    if "same-round" in checks:
        out.append(check_same_round_commits(record))
    if "responses" in checks:
        out.append(cross_check_uc_responses(record, spec))
    if "snapshot" in checks:
        out.append(check_snapshot_containment(record))
    if "registers" in checks:
        out.append(check_register_replay(record))
    if "helping" in checks:
        out.append(check_helping(record))
    return out
