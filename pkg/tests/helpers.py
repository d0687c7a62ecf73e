"""Random workloads and inputs shared by several test modules."""

from __future__ import annotations

import random

from cfuc.gca import GcaHarness
from cfuc.objects import Command, SequentialSpec
from cfuc.sim import SchedulePlan, Workload, run
from cfuc.traces import Trace


def random_workload(rng: random.Random, spec: SequentialSpec, n: int, total: int) -> Workload:
    """``total`` operations spread over ``n`` processes (each gets at least one)."""
    per = {p: [rng.choice(spec.operations)] for p in range(1, n + 1)}
    for _ in range(total - n):
        per[rng.randint(1, n)].append(rng.choice(spec.operations))
    return Workload(per)


def random_gca_inputs(rng: random.Random, spec: SequentialSpec, n: int) -> dict[int, Trace]:
    """Inputs sharing a random base; sometimes all equal, sometimes conflicting."""
    conflicts = spec.conflicts
    seq = iter(range(1, 1000))

    def cmds(k):
        return [Command(rng.choice(spec.operations), rng.randint(1, n), next(seq)) for _ in range(k)]

    base = Trace(tuple(cmds(rng.randint(0, 2))), conflicts)
    if rng.random() < 0.15:
        return {p: base for p in range(1, n + 1)}
    out = {}
    for p in range(1, n + 1):
        out[p] = base * Trace(tuple(cmds(rng.randint(0, 2))), conflicts)
    return out


def run_gca(inputs: dict[int, Trace], seed: int, policy="random", crash_points=None):
    harness = GcaHarness(inputs)
    plan = SchedulePlan(seed=seed, policy=policy, crash_points=dict(crash_points or {}),
                        fairness_bound=0)
    return run(plan, None, harness, 10_000, n=max(inputs))
