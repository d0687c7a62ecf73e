"""Sequential object specifications and their conflict relations."""

from __future__ import annotations

from collections.abc import Callable, Hashable, Iterable
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from cfuc.traces import ConflictRelation, Trace

OK = "ok"


class Command(NamedTuple):
    """A uniquely tagged invocation ``(op, process, seq)``.

    Conflicts are inherited from ``op`` by :class:`ConflictRelation`.
    """

    op: Hashable
    process: int
    seq: int

    def __str__(self) -> str:
        return f"{self.op}@{self.process}.{self.seq}"


@dataclass(frozen=True)
class SequentialSpec:
    name: str
    initial: Any
    operations: tuple
    transition: Callable[[Any, Any], tuple[Any, Any]] = field(repr=False)
    conflicts: ConflictRelation = field(repr=False)
    states: str = ""

    def step(self, op: Any, state: Any) -> tuple[Any, Any]:
        return self.transition(op, state)

    def empty_trace(self) -> Trace:
        return Trace.empty(self.conflicts)


def _counter_transition(op: str, q: int) -> tuple[Any, int]:
    if op == "read":
        return q, q
    if op == "inc":
        return OK, q + 1
    if op == "dec":
        return OK, q - 1
    raise KeyError(op)


def counter_spec() -> SequentialSpec:
    return SequentialSpec(
        name="counter",
        initial=0,
        operations=("read", "inc", "dec"),
        transition=_counter_transition,
        conflicts=ConflictRelation([("read", "inc"), ("read", "dec")]),
        states="integers",
    )


def _updates_transition(op: str, q: int) -> tuple[Any, int]:
    if op == "read":
        raise KeyError(op)
    return _counter_transition(op, q)


def updates_only_counter_spec() -> SequentialSpec:
    return SequentialSpec(
        name="counter-updates-only",
        initial=0,
        operations=("inc", "dec"),
        transition=_updates_transition,
        conflicts=ConflictRelation(),
        states="integers",
    )


QUEUE_OPS = ("enq1", "enq2", "deq")


def _queue_transition(op: str, q: tuple) -> tuple[Any, tuple]:
    if op == "enq1":
        return OK, q + (1,)
    if op == "enq2":
        return OK, q + (2,)
    if op == "deq":
        if not q:
            return None, q
        return q[0], q[1:]
    raise KeyError(op)


def total_conflict_queue_spec() -> SequentialSpec:
    # every pair is declared conflicting, including each op with itself
    return SequentialSpec(
        name="total-conflict-queue",
        initial=(),
        operations=QUEUE_OPS,
        transition=_queue_transition,
        conflicts=ConflictRelation.total(QUEUE_OPS),
        states="finite sequences over {1,2}",
    )


def degenerate_specs() -> tuple[SequentialSpec, SequentialSpec]:
    """(total conflict relation, empty conflict relation)."""
    return total_conflict_queue_spec(), updates_only_counter_spec()


def _grow_set_transition(op: str, q: frozenset) -> tuple[Any, frozenset]:
    kind, _, elem = op.partition("_")
    if kind == "add":
        return OK, q | {elem}
    if kind == "has":
        return elem in q, q
    raise KeyError(op)


def grow_set_spec() -> SequentialSpec:
    return SequentialSpec(
        name="grow-set",
        initial=frozenset(),
        operations=("add_a", "add_b", "has_a", "has_b"),
        transition=_grow_set_transition,
        conflicts=ConflictRelation([("add_a", "has_a"), ("add_b", "has_b")]),
        states="subsets of {a,b}",
    )


def _register_transition(op: str, q: int) -> tuple[Any, int]:
    if op == "read":
        return q, q
    if op == "write0":
        return OK, 0
    if op == "write1":
        return OK, 1
    raise KeyError(op)


def register_spec() -> SequentialSpec:
    return SequentialSpec(
        name="register",
        initial=0,
        operations=("read", "write0", "write1"),
        transition=_register_transition,
        conflicts=ConflictRelation(
            [("read", "write0"), ("read", "write1"), ("write0", "write1")]
        ),
        states="{0,1}",
    )


SPECS: dict[str, Callable[[], SequentialSpec]] = {
    "counter": counter_spec,
    "counter-updates-only": updates_only_counter_spec,
    "total-conflict-queue": total_conflict_queue_spec,
    "grow-set": grow_set_spec,
    "register": register_spec,
}

STATE_WINDOWS: dict[str, list] = {
    "counter": list(range(-2, 3)),
    "counter-updates-only": list(range(-2, 3)),
    "total-conflict-queue": [(), (1,), (2,), (1, 2), (2, 1), (1, 1)],
    "grow-set": [frozenset(), frozenset("a"), frozenset("b"), frozenset("ab")],
    "register": [0, 1],
}


def get_spec(name: str) -> SequentialSpec:
    try:
        return SPECS[name]()
    except KeyError:
        raise KeyError(f"unknown object {name!r}; expected one of {sorted(SPECS)}") from None


def _commute_in(spec: SequentialSpec, a: Any, b: Any, q: Any) -> bool:
    ra, q1 = spec.transition(a, q)
    rb, qab = spec.transition(b, q1)
    rb2, q2 = spec.transition(b, q)
    ra2, qba = spec.transition(a, q2)
    return ra == ra2 and rb == rb2 and qab == qba


def derive_conflicts(spec: SequentialSpec, states: Iterable[Any]) -> ConflictRelation:
    """Pairs of operations that fail to commute in some listed state."""
    states = list(states)
    pairs = []
    ops_ = list(spec.operations)
    for x, a in enumerate(ops_):
        for b in ops_[x:]:
            if any(not _commute_in(spec, a, b, q) for q in states):
                pairs.append((a, b))
    return ConflictRelation(pairs)


def non_conflicting_subset(spec: SequentialSpec, candidates: Iterable[Any]) -> list:
    """Greedy set of ops that pairwise commute, themselves included."""
    chosen: list = []
    for op in candidates:
        if spec.conflicts.conflicts(op, op):
            continue
        if all(not spec.conflicts.conflicts(op, c) for c in chosen):
            chosen.append(op)
    return chosen
