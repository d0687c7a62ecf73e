"""Generalized commit-adopt over traces, built from two snapshot objects.

``None`` stands for ⊥ (an unwritten cell) throughout.  The ⊥ conventions:
compatibility and LUB ignore ⊥ entries (the LUB of nothing is ε), and the GLB
of a set containing ⊥ is ⊥.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from typing import Any, NamedTuple

from cfuc.sim import Scan, Update
from cfuc.traces import ConflictRelation, Trace, compatible, glb, is_prefix, lub

GCA_STEPS = 4


class DoubleProposal(Exception):
    pass


class GcaResult(NamedTuple):
    trace: Trace
    committed: bool


def comp_bot(S: Iterable[Trace | None]) -> bool:
    return compatible([x for x in S if x is not None])


def lub_bot(S: Iterable[Trace | None], conflicts: ConflictRelation) -> Trace:
    present = [x for x in S if x is not None]
    if not present:
        return Trace.empty(conflicts)
    return lub(present)


def glb_bot(S: Iterable[Trace | None]) -> Trace | None:
    S = list(S)
    if any(x is None for x in S):
        return None
    return glb(S)


def compat_projection(view: Sequence[Trace | None]) -> tuple[tuple, bool]:
    """Replace each entry by its GLB with every entry it is incompatible with.

    Returns the projected view and whether it equals the input view.
    """
    co = []
    for a_k in view:
        if a_k is None:
            co.append(None)
            continue
        clash = [a_j for a_j in view if a_j is not None and not comp_bot((a_j, a_k))]
        co.append(glb_bot([a_k, *clash]))
    co = tuple(co)
    return co, all(x == y for x, y in zip(view, co))


def decide(
    i: int, s_i: Trace, A_i: Sequence[Trace | None], B_i: Sequence[tuple | None]
) -> GcaResult:
    """Output computation of a proposer from its two views (1-based ``i``)."""
    flagged = [e[0] for e in B_i if e is not None and e[1]]
    if flagged:
        beta = glb(flagged)
    else:
        beta = B_i[i - 1][0]
    w = all(a == s_i for a in A_i if a is not None) and all(
        e[0] == s_i for e in B_i if e is not None
    )
    supported = all(
        B_i[k] is not None
        for k, a_k in enumerate(A_i)
        if a_k is not None and is_prefix(a_k, beta)
    )
    no_adopt_flag = not any(e is not None and not e[1] for e in B_i)
    return GcaResult(beta, w or (supported and no_adopt_flag))


def propose(ctx: Any, instance: Any, s_i: Trace):
    """Step machine for one proposal; exactly four memory steps.

    Use as ``result = yield from propose(ctx, instance, s)``.
    """
    i = ctx.pid
    entry = ctx.record.gca(instance)
    if i in entry.inputs:
        raise DoubleProposal(f"process {i} already proposed to GCA {instance!r}")
    entry.inputs[i] = s_i
    a_obj, b_obj = ("A", instance), ("B", instance)

    yield Update(a_obj, i, s_i)
    first = ctx.last_step
    A_i = yield Scan(a_obj)
    co, same = compat_projection(A_i)
    candidate = lub_bot(co, s_i.conflicts)
    yield Update(b_obj, i, (candidate, same))
    B_i = yield Scan(b_obj)
    res = decide(i, s_i, A_i, B_i)

    entry.outputs[i] = res
    entry.steps[i] = GCA_STEPS
    entry.spans[i] = (first, ctx.last_step)
    entry.views[i] = (A_i, B_i)
    ctx.last_gca = instance
    return res


class GcaHarness:
    """Algorithm adapter: each listed process proposes its input once."""

    name = "gca"

    def __init__(self, inputs: dict[int, Trace], instance: Any = 1):
        self.inputs = dict(inputs)
        self.instance = instance
        self.n = max(self.inputs) if self.inputs else 1

    def register_defaults(self) -> dict:
        return {}

    def program(self, ctx: Any):
        if ctx.pid in self.inputs:
            yield from propose(ctx, self.instance, self.inputs[ctx.pid])
