"""Universal constructions over a chain of GCA instances.

:class:`WeakUC` follows the weakly conflict-free construction; :class:`CfUC`
adds the announcement array ``M`` and helping.  Shared state:

* ``("S", j)``: last committed ``(round, trace)`` of process ``j``
* ``("M", j)``: last command announced by ``j`` (cf-uc only)
* snapshot objects ``("A", r)``/``("B", r)``: GCA instance of round ``r``,
  created on first touch
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from typing import Any

from cfuc.gca import propose
from cfuc.objects import Command, SequentialSpec
from cfuc.sim import IDLE, Idle, Read, Write
from cfuc.traces import ConflictRelation, Trace, ret_star


class ReentrantInvocation(Exception):
    pass


@dataclass
class UcProcessState:
    r: int = 0
    seq: int = 0
    s: Trace | None = None
    c: bool = False
    pending: Command | None = None


def trace_of_set(commands: Iterable[Command], conflicts: ConflictRelation) -> Trace:
    ordered = sorted(set(commands), key=lambda c: (c.process, c.seq))
    return Trace(tuple(ordered), conflicts)


def max_committed(entries: Iterable[tuple[int, Trace]]) -> tuple[int, Trace]:
    """Largest round wins; ties go to the lowest process index."""
    best = None
    for e in entries:
        if best is None or e[0] > best[0]:
            best = e
    return best


def read_max_committed(ctx: Any):
    """n register reads of ``S``; ``yield from`` it."""
    seen = []
    for j in range(1, ctx.n + 1):
        seen.append((yield Read(("S", j))))
    return max_committed(seen)


class _Construction:
    name = ""

    def __init__(self, spec: SequentialSpec):
        self.spec = spec
        self.conflicts = spec.conflicts

    def register_defaults(self) -> dict:
        return {"S": (0, Trace.empty(self.conflicts)), "M": None}

    def program(self, ctx: Any):
        state = UcProcessState()
        while True:
            op = ctx.next_op()
            while isinstance(op, Idle):
                yield IDLE
                op = ctx.next_op()
            if op is None:
                return
            yield from self.invoke(ctx, state, op)

    def _begin(self, ctx: Any, state: UcProcessState, op: Any) -> Command:
        if state.pending is not None:
            raise ReentrantInvocation(f"process {ctx.pid} already has {state.pending}")
        state.seq += 1
        cmd = Command(op, ctx.pid, state.seq)
        state.pending = cmd
        ctx.invoke(op, cmd)
        return cmd

    def _finish(self, ctx: Any, state: UcProcessState, cmd: Command, trace: Trace) -> None:
        state.pending = None
        ctx.respond(ret_star(cmd, trace, self.spec), cmd.op, cmd)

    def _propose(self, ctx, state, cmd, base, collected, proposal):
        res = yield from propose(ctx, state.r, proposal)
        ctx.record.proposals.append(
            {"process": ctx.pid, "round": state.r, "cmd": cmd, "base": base,
             "collected": tuple(collected), "proposal": proposal,
             "output": res.trace, "committed": res.committed}
        )
        return res

    def _commit(self, ctx, state):
        yield Write(("S", ctx.pid), (state.r, state.s))
        ctx.record.committed_log.append((state.r, state.s, ctx.pid, ctx.last_step))


class WeakUC(_Construction):
    name = "weak-uc"

    def invoke(self, ctx: Any, state: UcProcessState, op: Any):
        state.c = False
        cmd = self._begin(ctx, state, op)
        state.r, state.s = yield from read_max_committed(ctx)
        while cmd not in state.s or not state.c:
            state.r += 1
            base = state.s
            if cmd not in state.s:
                state.s = state.s.append(cmd)
            res = yield from self._propose(ctx, state, cmd, base, (), state.s)
            state.s, state.c = res
        yield from self._commit(ctx, state)
        self._finish(ctx, state, cmd, state.s)

    def weak_invoke(self, ctx: Any, state: UcProcessState, op: Any):
        return self.invoke(ctx, state, op)


class CfUC(_Construction):
    name = "cf-uc"

    def invoke(self, ctx: Any, state: UcProcessState, op: Any):
        state.c = False
        cmd = self._begin(ctx, state, op)
        yield Write(("M", ctx.pid), cmd)
        r_seen, s_seen = yield from read_max_committed(ctx)
        # A helped process may leave the loop at a round above every committed
        # one; restarting below it would propose twice to the same one-shot GCA.
        if r_seen >= state.r or state.s is None:
            state.r, state.s = r_seen, s_seen
        u = Trace.empty(self.conflicts)
        while cmd not in u:
            state.r += 1
            collected = []
            for j in range(1, ctx.n + 1):
                m = yield Read(("M", j))
                if m is not None and m not in state.s and m not in collected:
                    collected.append(m)
            base = state.s
            proposal = base * trace_of_set(collected, self.conflicts)
            res = yield from self._propose(ctx, state, cmd, base, collected, proposal)
            state.s, state.c = res
            if state.c:
                yield from self._commit(ctx, state)
            _, u = yield from read_max_committed(ctx)
        self._finish(ctx, state, cmd, u)

    def cf_invoke(self, ctx: Any, state: UcProcessState, op: Any):
        return self.invoke(ctx, state, op)


ALGORITHMS = {"weak-uc": WeakUC, "cf-uc": CfUC}


def get_algorithm(name: str, spec: SequentialSpec) -> _Construction:
    try:
        return ALGORITHMS[name](spec)
    except KeyError:
        raise KeyError(f"unknown algorithm {name!r}; expected one of {sorted(ALGORITHMS)}") from None


def steps_per_round(n: int) -> int:
    """Upper bound on the memory steps of one loop iteration plus invocation overhead."""
    return 2 * n + 5
