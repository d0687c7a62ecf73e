"""Deterministic simulation of asynchronous shared memory.

Processes are generators that yield one shared-memory action per step and
receive the action's result.  The simulator owns every interleaving decision:
a :class:`SchedulePlan` fixes the policy, crashes, solo windows, holds and the
phase boundary, so a run is a pure function of its inputs.
"""

from __future__ import annotations

import random
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Any, NamedTuple

PRNG_ID = "python-random-MT19937"


class ExplorationBudgetExceeded(Exception):
    pass


# -- actions ------------------------------------------------------------------


class Read(NamedTuple):
    reg: tuple


class Write(NamedTuple):
    reg: tuple
    value: Any


class Update(NamedTuple):
    obj: tuple
    cell: int
    value: Any


class Scan(NamedTuple):
    obj: tuple


class Idle(NamedTuple):
    """Not a memory action: the process waits for the phase release."""


IDLE = Idle()


class Step(NamedTuple):
    index: int
    process: int
    kind: str
    target: tuple
    value: Any
    versions: tuple | None = None


class HistoryEvent(NamedTuple):
    kind: str  # "inv" | "resp"
    process: int
    op: Any
    value: Any
    step_index: int
    tag: Any = None  # command or other identifier of the operation instance


# -- memory -------------------------------------------------------------------


class Memory:
    """Atomic registers and atomic snapshot objects, created on first touch.

    Registers are addressed ``(array, index)``; unwritten cells read as the
    array's default.  Snapshot objects are addressed by any tuple and hold
    ``n`` cells initialised to ``None`` (⊥).
    """

    def __init__(self, n: int, defaults: dict[str, Any] | None = None):
        self.n = n
        self.defaults = dict(defaults or {})
        self.registers: dict[tuple, Any] = {}
        self.snapshots: dict[tuple, list] = {}
        self.versions: dict[tuple, list[int]] = {}

    def read(self, reg: tuple) -> Any:
        if reg in self.registers:
            return self.registers[reg]
        return self.defaults.get(reg[0])

    def write(self, reg: tuple, value: Any) -> None:
        self.registers[reg] = value

    def _snap(self, obj: tuple) -> list:
        cells = self.snapshots.get(obj)
        if cells is None:
            cells = self.snapshots[obj] = [None] * self.n
            self.versions[obj] = [0] * self.n
        return cells

    def update(self, obj: tuple, cell: int, value: Any) -> None:
        if not 1 <= cell <= self.n:
            raise ValueError(f"snapshot cell {cell} outside [1,{self.n}]")
        self._snap(obj)[cell - 1] = value
        self.versions[obj][cell - 1] += 1

    def scan(self, obj: tuple) -> tuple:
        return tuple(self._snap(obj))

    def scan_versions(self, obj: tuple) -> tuple:
        self._snap(obj)
        return tuple(self.versions[obj])


def snapshot_update(mem: Memory, obj: tuple, i: int, v: Any) -> None:
    mem.update(obj, i, v)


def snapshot_scan(mem: Memory, obj: tuple, i: int | None = None) -> tuple:
    return mem.scan(obj)


# -- plans --------------------------------------------------------------------


@dataclass(frozen=True)
class SoloWindow:
    """Only ``process`` is scheduled in ``[start, end)``.

    The window closes early once the process has completed ``ops``
    operations inside it (and, with ``solo_round``, has just returned from a
    GCA instance nobody else accessed), or when the process cannot step.
    """

    process: int
    start: int
    end: int
    ops: int | None = None
    solo_round: bool = False


@dataclass(frozen=True)
class Hold:
    """``process`` is not scheduled after ``after_steps`` own steps until
    solo window ``until_window`` has closed."""

    process: int
    after_steps: int
    until_window: int = 0


@dataclass(frozen=True)
class SchedulePlan:
    seed: int = 0
    policy: str | tuple = "random"
    crash_points: dict = field(default_factory=dict)
    solo_windows: tuple = ()
    holds: tuple = ()
    phase_boundary: int | None = None
    fairness_bound: int = 16

    def describe(self) -> dict:
        return {
            "seed": self.seed,
            "policy": list(self.policy) if isinstance(self.policy, tuple) else self.policy,
            "crash_points": {str(k): v for k, v in sorted(self.crash_points.items())},
            "solo_windows": [vars(w) for w in self.solo_windows],
            "holds": [vars(h) for h in self.holds],
            "phase_boundary": self.phase_boundary,
            "fairness_bound": self.fairness_bound,
            "prng": PRNG_ID,
        }


# -- workload -----------------------------------------------------------------


class Workload:
    """Per-process operation lists.

    ``before`` operations are issued immediately; ``after`` operations are
    released once the phase boundary has passed and every non-crashed process
    has finished its ``before`` list.
    """

    def __init__(self, before: dict[int, list], after: dict[int, list] | None = None):
        self.before = {p: list(v) for p, v in before.items()}
        self.after = {p: list(v) for p, v in (after or {}).items()}

    def processes(self) -> set[int]:
        return set(self.before) | set(self.after)

    def total_ops(self) -> int:
        return sum(map(len, self.before.values())) + sum(map(len, self.after.values()))

    def describe(self) -> dict:
        procs = sorted(self.processes())
        return {
            f"p{p}": {"before": list(map(str, self.before.get(p, []))),
                      "after": list(map(str, self.after.get(p, [])))}
            for p in procs
        }


# -- record -------------------------------------------------------------------


@dataclass
class GcaEntry:
    instance: Any
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    steps: dict = field(default_factory=dict)
    spans: dict = field(default_factory=dict)
    views: dict = field(default_factory=dict)


@dataclass
class ExecutionRecord:
    n: int
    steps: list = field(default_factory=list)
    history: list = field(default_factory=list)
    gca_ledger: dict = field(default_factory=dict)
    committed_log: list = field(default_factory=list)
    proposals: list = field(default_factory=list)
    crashed: dict = field(default_factory=dict)
    windows: list = field(default_factory=list)
    release_step: int | None = None
    truncated: bool = False
    quiescent: bool = False
    defaults: dict = field(default_factory=dict)
    plan: SchedulePlan | None = None
    algorithm: str = ""
    spec_name: str = ""
    expected_ops: dict = field(default_factory=dict)

    def gca(self, instance: Any) -> GcaEntry:
        entry = self.gca_ledger.get(instance)
        if entry is None:
            entry = self.gca_ledger[instance] = GcaEntry(instance)
        return entry

    def operations(self) -> list[dict]:
        """Invocations paired with their responses, in invocation order."""
        ops: list[dict] = []
        open_: dict[int, dict] = {}
        for ev in self.history:
            if ev.kind == "inv":
                op = {"process": ev.process, "op": ev.op, "tag": ev.tag,
                      "inv": ev.step_index, "resp": None, "value": None}
                ops.append(op)
                open_[ev.process] = op
            else:
                op = open_.pop(ev.process)
                op["resp"] = ev.step_index
                op["value"] = ev.value
        return ops

    def steps_by(self, p: int) -> int:
        return sum(1 for s in self.steps if s.process == p)


# -- processes ----------------------------------------------------------------


class ProcessContext:
    """What a step machine sees of the simulator besides memory actions."""

    def __init__(self, sim: Simulation, pid: int):
        self.sim = sim
        self.pid = pid
        self.n = sim.n
        self.record = sim.record
        self._pending_inv: tuple | None = None
        self.completed = 0
        self.last_gca: Any = None
        self.in_op = False
        self.before = list(sim.workload.before.get(pid, [])) if sim.workload else []
        self.after = list(sim.workload.after.get(pid, [])) if sim.workload else []

    # workload
    def next_op(self) -> Any:
        if self.before:
            return self.before.pop(0)
        if self.after:
            if self.sim.released:
                return self.after.pop(0)
            return IDLE
        return None

    # history
    def invoke(self, op: Any, tag: Any = None) -> None:
        self._pending_inv = (op, tag)
        self.in_op = True

    def _stamp(self, index: int) -> None:
        if self._pending_inv is not None:
            op, tag = self._pending_inv
            self.record.history.append(HistoryEvent("inv", self.pid, op, None, index, tag))
            self._pending_inv = None

    def respond(self, value: Any, op: Any = None, tag: Any = None) -> None:
        idx = self.sim.last_index
        self.record.history.append(HistoryEvent("resp", self.pid, op, value, idx, tag))
        self.in_op = False
        self.completed += 1

    @property
    def step(self) -> int:
        """Index of the step this process is about to take."""
        return self.sim.index

    @property
    def last_step(self) -> int:
        return self.sim.last_index


class _Proc:
    __slots__ = ("pid", "gen", "ctx", "pending", "status", "steps", "last_run")

    def __init__(self, pid: int, gen: Iterator, ctx: ProcessContext):
        self.pid = pid
        self.gen = gen
        self.ctx = ctx
        self.pending: Any = None
        self.status = "running"
        self.steps = 0
        self.last_run = -1


class Simulation:
    """Single-threaded interleaving of step machines over :class:`Memory`."""

    def __init__(
        self,
        n: int,
        algorithm: Any,
        plan: SchedulePlan | None = None,
        workload: Workload | None = None,
    ):
        self.n = n
        self.plan = plan or SchedulePlan()
        self.workload = workload
        self.memory = Memory(n, getattr(algorithm, "register_defaults", lambda: {})())
        self.record = ExecutionRecord(
            n=n, defaults=dict(self.memory.defaults), plan=self.plan,
            algorithm=getattr(algorithm, "name", type(algorithm).__name__),
            spec_name=getattr(getattr(algorithm, "spec", None), "name", ""),
        )
        if workload is not None:
            self.record.expected_ops = {
                p: len(workload.before.get(p, [])) + len(workload.after.get(p, []))
                for p in range(1, n + 1)
            }
        self.index = 0
        self.last_index = -1
        self.released = (
            workload is None or not any(workload.after.values()) or self.plan.phase_boundary is None
        )
        if self.released and workload is not None:
            self.record.release_step = 0
        self.rng = random.Random(self.plan.seed)
        self._rr = 0
        self._script = list(self.plan.policy) if isinstance(self.plan.policy, (tuple, list)) else None
        self._win = 0
        self._win_state: dict[int, dict] = {}
        self._closed: set[int] = set()
        self.procs: dict[int, _Proc] = {}
        for pid in range(1, n + 1):
            ctx = ProcessContext(self, pid)
            gen = algorithm.program(ctx)
            proc = _Proc(pid, gen, ctx)
            self.procs[pid] = proc
            if self.plan.crash_points.get(pid, None) == 0:
                proc.status = "crashed"
                self.record.crashed[pid] = 0
                continue
            self._advance(proc, None)

    # -- process plumbing --

    def _advance(self, proc: _Proc, result: Any) -> None:
        try:
            proc.pending = proc.gen.send(result) if proc.pending is not None else next(proc.gen)
        except StopIteration:
            proc.pending = None
            proc.status = "done"
            return
        if isinstance(proc.pending, Idle):
            proc.status = "idle"

    def _wake(self) -> None:
        for proc in self.procs.values():
            if proc.status == "idle" and self.released:
                proc.status = "running"
                self._advance(proc, None)

    def _maybe_release(self) -> None:
        if self.released:
            return
        for proc in self.procs.values():
            if proc.status == "crashed":
                continue
            if proc.ctx.before or proc.ctx.in_op:
                return
        boundary = self.plan.phase_boundary or 0
        if self.index >= boundary or not self._runnable_raw():
            self.released = True
            self.record.release_step = self.index
            self._wake()

    def _runnable_raw(self) -> list[int]:
        return [p.pid for p in self.procs.values() if p.status == "running"]

    # -- scheduling constraints --

    def _window_open(self, k: int) -> bool:
        if k in self._closed:
            return False
        w = self.plan.solo_windows[k]
        return self.index >= w.start

    def _close_window(self, k: int) -> None:
        if k in self._closed:
            return
        self._closed.add(k)
        st = self._win_state.get(k)
        start = st["start"] if st else self.index
        completed = self.procs[self.plan.solo_windows[k].process].ctx.completed
        base = st["completed0"] if st else completed
        self.record.windows.append(
            {"window": k, "process": self.plan.solo_windows[k].process,
             "start": start, "end": self.index, "ops_completed": completed - base}
        )

    def _update_windows(self) -> int | None:
        """Close finished windows; return the solo process of the active one."""
        for k, w in enumerate(self.plan.solo_windows):
            if k in self._closed or self.index < w.start:
                continue
            proc = self.procs[w.process]
            st = self._win_state.setdefault(k, {"start": self.index, "completed0": proc.ctx.completed})
            done = proc.ctx.completed - st["completed0"]
            finished = self.index >= w.end or proc.status != "running"
            if w.ops is not None and done >= w.ops:
                if not w.solo_round or self._sole_participant(w.process, proc.ctx.last_gca, st["start"]):
                    finished = True
            if finished:
                self._close_window(k)
                continue
            return w.process
        return None

    def _sole_participant(self, pid: int, instance: Any, since: int) -> bool:
        """``pid`` ran GCA ``instance`` entirely from step ``since`` on, alone."""
        if instance is None:
            return False
        entry = self.record.gca_ledger.get(instance)
        if entry is None or set(entry.inputs) != {pid}:
            return False
        return entry.spans[pid][0] >= since

    def _held(self, proc: _Proc) -> bool:
        for h in self.plan.holds:
            if h.process == proc.pid and proc.steps >= h.after_steps:
                if h.until_window not in self._closed:
                    return True
        return False

    def runnable(self) -> list[int]:
        self._maybe_release()
        solo = self._update_windows()
        ready = [p.pid for p in self.procs.values() if p.status == "running" and not self._held(p)]
        if solo is not None:
            return [solo] if solo in ready else []
        if not ready:
            # holds never block progress forever: release them if nobody else can move
            ready = self._runnable_raw()
        return ready

    def choose(self, ready: list[int]) -> int:
        if self._script is not None:
            while self._script:
                p = self._script.pop(0)
                if p in ready:
                    return p
            # script exhausted: continue round-robin
        policy = self.plan.policy
        if policy == "round-robin" or self._script is not None:
            for k in range(self.n):
                p = (self._rr + k) % self.n + 1
                if p in ready:
                    self._rr = p % self.n
                    return p
        if policy == "random":
            bound = self.plan.fairness_bound
            if bound and len(ready) > 1:
                starved = [p for p in ready if self.index - self.procs[p].last_run > bound]
                if starved:
                    return min(starved, key=lambda p: (self.procs[p].last_run, p))
            return ready[self.rng.randrange(len(ready))]
        raise ValueError(f"unknown policy {policy!r}")

    # -- execution --

    def step(self, pid: int) -> None:
        proc = self.procs[pid]
        if proc.status != "running":
            raise RuntimeError(f"process {pid} cannot step ({proc.status})")
        action = proc.pending
        idx = self.index
        proc.ctx._stamp(idx)
        mem = self.memory
        if isinstance(action, Read):
            result = mem.read(action.reg)
            self.record.steps.append(Step(idx, pid, "read", action.reg, result))
        elif isinstance(action, Write):
            mem.write(action.reg, action.value)
            result = None
            self.record.steps.append(Step(idx, pid, "write", action.reg, action.value))
        elif isinstance(action, Update):
            mem.update(action.obj, action.cell, action.value)
            result = None
            self.record.steps.append(
                Step(idx, pid, "update", action.obj + (action.cell,), action.value)
            )
        elif isinstance(action, Scan):
            result = mem.scan(action.obj)
            self.record.steps.append(
                Step(idx, pid, "scan", action.obj, result, mem.scan_versions(action.obj))
            )
        else:
            raise TypeError(f"process {pid} yielded {action!r}, not a memory action")
        self.index += 1
        self.last_index = idx
        proc.steps += 1
        proc.last_run = idx
        self._advance(proc, result)
        crash_at = self.plan.crash_points.get(pid)
        if crash_at is not None and proc.steps >= crash_at and proc.status == "running":
            proc.status = "crashed"
            self.record.crashed[pid] = self.index

    def run(self, max_steps: int) -> ExecutionRecord:
        if max_steps <= 0:
            raise ValueError("max_steps must be positive")
        while self.index < max_steps:
            ready = self.runnable()
            if not ready:
                break
            self.step(self.choose(ready))
        return self.finish()

    def finish(self) -> ExecutionRecord:
        self._maybe_release()
        self._update_windows()
        for k in range(len(self.plan.solo_windows)):
            if k not in self._closed and k in self._win_state:
                self._close_window(k)
        quiescent = not self.runnable()
        self.record.quiescent = quiescent
        self.record.truncated = not quiescent
        return self.record


def run(
    plan: SchedulePlan,
    workload: Workload | None,
    algorithm: Any,
    max_steps: int,
    n: int | None = None,
) -> ExecutionRecord:
    """Run ``algorithm`` under ``plan`` until quiescence or ``max_steps``."""
    if n is None:
        n = max(workload.processes()) if workload else algorithm.n
    return Simulation(n, algorithm, plan, workload).run(max_steps)


def exhaustive_interleavings(
    workload: Workload | None,
    algorithm: Any,
    depth: int,
    n: int | None = None,
    budget: int = 2_000_000,
    crash_points: dict | None = None,
    finish: int = 0,
) -> Iterator[ExecutionRecord]:
    """Yield one record per distinct interleaving of at most ``depth`` steps.

    Plain DFS over scheduler choices; each branch is re-executed from the
    initial state.  A branch still running at ``depth`` is continued for up
    to ``finish`` further steps, always scheduling the lowest-numbered
    runnable process (so each runs alone until it finishes), then yielded
    with ``truncated`` set if it is still not quiescent.
    """
    if n is None:
        n = max(workload.processes()) if workload else algorithm.n
    crash_points = dict(crash_points or {})

    def build(prefix: tuple) -> Simulation:
        plan = SchedulePlan(policy="round-robin", crash_points=crash_points, fairness_bound=0)
        sim = Simulation(n, algorithm, plan, workload)
        for p in prefix:
            sim.runnable()
            sim.step(p)
        return sim

    stack: list[tuple] = [()]
    produced = 0
    while stack:
        prefix = stack.pop()
        sim = build(prefix)
        path = list(prefix)
        while True:
            ready = sim.runnable()
            if not ready or len(path) >= depth:
                limit = sim.index + finish
                while ready and sim.index < limit:
                    sim.step(min(ready))
                    ready = sim.runnable()
                rec = sim.finish()
                rec.plan = SchedulePlan(policy=tuple(s.process for s in rec.steps),
                                        crash_points=crash_points, fairness_bound=0)
                produced += 1
                if produced > budget:
                    raise ExplorationBudgetExceeded(f"more than {budget} interleavings")
                yield rec
                break
            for p in reversed(ready[1:]):
                stack.append(tuple(path) + (p,))
            path.append(ready[0])
            sim.step(ready[0])
