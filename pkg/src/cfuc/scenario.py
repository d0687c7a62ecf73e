"""Scenario files, runs, reports and the exhaustive explorer front end.

A scenario is a TOML document::

    object = "counter"
    algorithm = "cf-uc"
    processes = 3
    progress = "eventually-conflict-free"   # optional

    [workload.p1]
    before = ["read"]
    after = ["inc", "dec"]

    [schedule]
    policy = "random"
    seed = 7
    phase_boundary = 40
    crash_points = { p1 = 5 }
    solo_windows = [{ process = 3, start = 30, end = 2000, ops = 2 }]
    holds = [{ process = 2, after_steps = 6 }]

    [budgets]
    max_steps = 20000

Integer schedule fields may instead be ``[lo, hi]`` ranges; they are drawn
from the run's seed so seeded variants of one file differ in timing.
"""

from __future__ import annotations

import json
import random
import re
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from cfuc import verify
from cfuc.objects import SPECS, get_spec
from cfuc.sim import (
    PRNG_ID,
    ExecutionRecord,
    Hold,
    SchedulePlan,
    SoloWindow,
    Workload,
    exhaustive_interleavings,
    run,
)
from cfuc.traces import Trace
from cfuc.uc import ALGORITHMS, get_algorithm, steps_per_round

SCHEMA = "cfuc-report/1"
DEFAULT_MAX_STEPS = 20_000
TIMING_KEYS = ("timing",)
BUNDLED = ("fig1a.cfuc", "fig1b.weakuc", "fig2a.cfuc", "fig2b.weakuc",
           "degenerate-total-conflict", "degenerate-no-conflict", "solo-suffix")

CHECKS = verify.SAFETY_CHECKS + ("progress",)
FAULTS = ("tamper-response", "shorten-commit")


class ConfigError(Exception):
    """Invalid scenario file; ``line`` is 1-based when known."""

    def __init__(self, message: str, path: str = "<config>", line: int | None = None):
        self.path, self.line, self.message = path, line, message
        where = f"{path}:{line}" if line else path
        super().__init__(f"{where}: {message}")


def default_progress_budget(n: int) -> int:
    return 200 * n * steps_per_round(n)


# -- loading ------------------------------------------------------------------


@dataclass
class ScenarioConfig:
    object: str
    algorithm: str
    processes: int
    workload: dict
    schedule: dict
    budgets: dict
    checks: tuple
    progress: str | None = None
    fault: str | None = None
    name: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    def echo(self) -> dict:
        return json.loads(json.dumps(self.raw, sort_keys=True, default=str))


def _line_of(text: str, dotted: str) -> int | None:
    """Line of ``dotted`` (``section.key``), falling back to its parent."""
    section = ""
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[+\s*([^\]]+?)\s*\]+", line)
        if m:
            section = m.group(1).strip()
            if section == dotted:
                return no
            continue
        m = re.match(r"\s*\"?([A-Za-z0-9_\-]+)\"?\s*=", line)
        if m and (f"{section}.{m.group(1)}" if section else m.group(1)) == dotted:
            return no
    if "." in dotted:
        return _line_of(text, dotted.rsplit(".", 1)[0])
    return None


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path))


def parse_config(text: str, path: str = "<config>") -> ScenarioConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        line = int(m.group(1)) if m else None
        if line is None and "end of document" in str(exc):
            line = max(len(text.splitlines()), 1)
        raise ConfigError(f"syntax error: {exc}", path, line) from None

    def bad(msg: str, key: str):
        raise ConfigError(msg, path, _line_of(text, key))

    known = {"object", "algorithm", "processes", "progress", "checks", "workload", "schedule",
             "budgets", "fault", "name", "description"}
    for k in raw:
        if k not in known:
            bad(f"unknown key {k!r}", k)
    for k in ("object", "algorithm", "processes"):
        if k not in raw:
            raise ConfigError(f"missing required key {k!r}", path, None)
    if raw["object"] not in SPECS:
        bad(f"unknown object {raw['object']!r}; expected one of {sorted(SPECS)}", "object")
    if raw["algorithm"] not in ALGORITHMS:
        bad(f"unknown algorithm {raw['algorithm']!r}; expected one of {sorted(ALGORITHMS)}",
            "algorithm")
    n = raw["processes"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        bad("processes must be an integer >= 1", "processes")
    progress = raw.get("progress")
    if progress is not None and progress not in verify.PROGRESS_CLASSES:
        bad(f"unknown progress class {progress!r}", "progress")
    checks = tuple(raw.get("checks", CHECKS if progress else verify.SAFETY_CHECKS))
    for c in checks:
        if c not in CHECKS:
            bad(f"unknown check {c!r}; expected a subset of {list(CHECKS)}", "checks")
    if "progress" in checks and progress is None:
        bad("check 'progress' needs a progress class", "checks")
    fault = raw.get("fault")
    if fault is not None and fault not in FAULTS:
        bad(f"unknown fault {fault!r}", "fault")

    spec = get_spec(raw["object"])
    workload = dict(raw.get("workload", {}))
    for key, val in workload.items():
        if key == "generator":
            _check_generator(val, spec, bad)
            continue
        m = re.fullmatch(r"p(\d+)", key)
        if not m or not 1 <= int(m.group(1)) <= n:
            bad(f"workload section {key!r} is not p1..p{n}", f"workload.{key}")
        if not isinstance(val, dict):
            bad(f"workload.{key} must be a table", f"workload.{key}")
        for phase, ops in val.items():
            if phase not in ("before", "after"):
                bad(f"unknown workload phase {phase!r}", f"workload.{key}.{phase}")
            for op in ops:
                if op not in spec.operations:
                    bad(f"operation {op!r} not in {raw['object']} {list(spec.operations)}",
                        f"workload.{key}.{phase}")

    sched = dict(raw.get("schedule", {}))
    allowed = {"policy", "seed", "crash_points", "solo_windows", "holds", "phase_boundary",
               "fairness_bound"}
    for k in sched:
        if k not in allowed:
            bad(f"unknown schedule key {k!r}", f"schedule.{k}")
    policy = sched.get("policy", "random")
    if not (policy in ("random", "round-robin") or isinstance(policy, list)):
        bad("policy must be 'random', 'round-robin' or a list of process ids", "schedule.policy")
    if isinstance(policy, list) and any(not isinstance(p, int) or not 1 <= p <= n for p in policy):
        bad("scripted policy names a process outside 1..n", "schedule.policy")
    for k, v in sched.get("crash_points", {}).items():
        m = re.fullmatch(r"p(\d+)", k)
        if not m or not 1 <= int(m.group(1)) <= n:
            bad(f"crash point for unknown process {k!r}", "schedule.crash_points")
        _check_int_or_range(v, "schedule.crash_points", bad)
    for w in sched.get("solo_windows", []):
        for k in w:
            if k not in ("process", "start", "end", "ops", "solo_round"):
                bad(f"unknown solo window key {k!r}", "schedule.solo_windows")
        if not 1 <= w.get("process", 0) <= n:
            bad("solo window process outside 1..n", "schedule.solo_windows")
        for k in ("start", "end"):
            if k not in w:
                bad(f"solo window needs {k!r}", "schedule.solo_windows")
            _check_int_or_range(w[k], "schedule.solo_windows", bad)
    for h in sched.get("holds", []):
        if not 1 <= h.get("process", 0) <= n:
            bad("hold process outside 1..n", "schedule.holds")
        _check_int_or_range(h.get("after_steps", 0), "schedule.holds", bad)

    budgets = dict(raw.get("budgets", {}))
    for k in budgets:
        if k not in ("max_steps", "progress_budget", "linearizability_ops"):
            bad(f"unknown budget {k!r}", f"budgets.{k}")
        if not isinstance(budgets[k], int) or budgets[k] <= 0:
            bad(f"budget {k} must be a positive integer", f"budgets.{k}")
    budgets.setdefault("max_steps", DEFAULT_MAX_STEPS)
    budgets.setdefault("progress_budget", default_progress_budget(n))
    budgets.setdefault("linearizability_ops", verify.LINEARIZABILITY_BOUND)
    pb = sched.get("phase_boundary")
    if pb is not None:
        _check_int_or_range(pb, "schedule.phase_boundary", bad)
        hi = pb[1] if isinstance(pb, list) else pb
        if hi > budgets["max_steps"]:
            bad("phase_boundary exceeds max_steps", "schedule.phase_boundary")
    if progress == "eventually-conflict-free" and pb is None:
        bad("eventually-conflict-free needs schedule.phase_boundary", "progress")
    if progress in ("solo-suffix", "conflict-resolving", "conflict-forgetting") and not sched.get("solo_windows"):
        bad(f"{progress} needs schedule.solo_windows", "progress")

    return ScenarioConfig(
        object=raw["object"], algorithm=raw["algorithm"], processes=n, workload=workload,
        schedule=sched, budgets=budgets, checks=checks, progress=progress, fault=fault,
        name=raw.get("name", Path(path).stem), raw=raw,
    )


def _check_int_or_range(v: Any, key: str, bad) -> None:
    if isinstance(v, bool):
        bad("expected an integer or [lo, hi]", key)
    if isinstance(v, int) and v >= 0:
        return
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, int) and x >= 0 for x in v) and v[0] <= v[1]:
        return
    bad("expected a non-negative integer or [lo, hi] range", key)


def _check_generator(g: Any, spec, bad) -> None:
    key = "workload.generator"
    if not isinstance(g, dict):
        bad("generator must be a table", key)
    for k in g:
        if k not in ("mix", "count", "conflict_free_after", "after_mix"):
            bad(f"unknown generator key {k!r}", f"{key}.{k}")
    for mk in ("mix", "after_mix"):
        for op, w in g.get(mk, {}).items():
            if op not in spec.operations:
                bad(f"generator op {op!r} not in {list(spec.operations)}", f"{key}.{mk}")
            if not isinstance(w, (int, float)) or w < 0:
                bad("generator weights must be non-negative numbers", f"{key}.{mk}")
    if not isinstance(g.get("count", 1), int) or g.get("count", 1) < 0:
        bad("generator count must be a non-negative integer", f"{key}.count")


# -- building -----------------------------------------------------------------


def _draw(v: Any, rng: random.Random) -> int:
    return rng.randint(v[0], v[1]) if isinstance(v, list) else v


def build_plan(cfg: ScenarioConfig, seed: int) -> SchedulePlan:
    s = cfg.schedule
    # separate stream from the scheduler's so timing draws do not shift choices
    rng = random.Random(f"plan/{seed}")
    policy = s.get("policy", "random")
    return SchedulePlan(
        seed=seed,
        policy=tuple(policy) if isinstance(policy, list) else policy,
        crash_points={int(k[1:]): _draw(v, rng) for k, v in sorted(s.get("crash_points", {}).items())},
        solo_windows=tuple(
            SoloWindow(w["process"], _draw(w["start"], rng), _draw(w["end"], rng),
                       w.get("ops"), w.get("solo_round", False))
            for w in s.get("solo_windows", [])
        ),
        holds=tuple(Hold(h["process"], _draw(h.get("after_steps", 0), rng), h.get("until_window", 0))
                    for h in s.get("holds", [])),
        phase_boundary=None if s.get("phase_boundary") is None else _draw(s["phase_boundary"], rng),
        fairness_bound=s.get("fairness_bound", 16),
    )


def build_workload(cfg: ScenarioConfig, seed: int) -> Workload:
    before: dict[int, list] = {}
    after: dict[int, list] = {}
    for key, val in cfg.workload.items():
        if key == "generator":
            continue
        p = int(key[1:])
        before[p] = list(val.get("before", []))
        after[p] = list(val.get("after", []))
    gen = cfg.workload.get("generator")
    if gen:
        rng = random.Random(f"workload/{seed}")
        spec = get_spec(cfg.object)
        mix = gen.get("mix") or {op: 1 for op in spec.operations}
        after_mix = gen.get("after_mix") or {
            op: w for op, w in mix.items() if not spec.conflicts.conflicts(op, op)
            and all(not spec.conflicts.conflicts(op, o) for o in mix if mix[o] and o != op
                    and not spec.conflicts.conflicts(o, o))
        }
        cut = gen.get("conflict_free_after")
        for p in range(1, cfg.processes + 1):
            if f"p{p}" in cfg.workload:
                continue
            ops_ = []
            for k in range(gen.get("count", 1)):
                pool = after_mix if cut is not None and k >= cut else mix
                names = sorted(pool)
                ops_.append(rng.choices(names, weights=[pool[o] for o in names])[0])
            if cut is None:
                before[p], after[p] = ops_, []
            else:
                before[p], after[p] = ops_[:cut], ops_[cut:]
    return Workload(before, after)


# -- running ------------------------------------------------------------------


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    seed: int
    record: ExecutionRecord
    verdicts: list
    report: dict

    @property
    def ok(self) -> bool:
        return all(v.holds for v in self.verdicts)


def simulate(cfg: ScenarioConfig, seed: int) -> ExecutionRecord:
    spec = get_spec(cfg.object)
    algo = get_algorithm(cfg.algorithm, spec)
    rec = run(build_plan(cfg, seed), build_workload(cfg, seed), algo,
              cfg.budgets["max_steps"], n=cfg.processes)
    if cfg.fault:
        inject_fault(rec, cfg.fault)
    return rec


def inject_fault(rec: ExecutionRecord, fault: str) -> None:
    """Corrupt a record in place; negative controls for the checkers."""
    if fault == "tamper-response":
        for k, ev in enumerate(rec.history):
            if ev.kind == "resp":
                bogus = ("tampered", ev.value)
                rec.history[k] = ev._replace(value=bogus)
                return
    elif fault == "shorten-commit":
        rounds = sorted(k for k in rec.gca_ledger if isinstance(k, int))
        for r in reversed(rounds):
            entry = rec.gca_ledger[r]
            for p, res in entry.outputs.items():
                if len(res.trace):
                    short = Trace(res.trace.letters[:-1], res.trace.conflicts)
                    entry.outputs[p] = res._replace(trace=short)
                    return
    else:
        raise ValueError(f"unknown fault {fault!r}")


def evaluate(cfg: ScenarioConfig, rec: ExecutionRecord) -> tuple[list[verify.Verdict], list[str]]:
    """Verdicts for the requested checks, plus the names of checks skipped."""
    spec = get_spec(cfg.object)
    safety = [c for c in cfg.checks if c != "progress"]
    skipped = []
    bound = cfg.budgets["linearizability_ops"]
    if "linearizability" in safety and len(rec.operations()) > bound:
        skipped.append(f"linearizability: {len(rec.operations())} operations exceed bound {bound}")
        safety.remove("linearizability")
    out = verify.safety_verdicts(rec, spec, tuple(safety), max_ops=bound)
    if "progress" in cfg.checks:
        out.append(progress_verdict(rec, cfg.progress, cfg.budgets["progress_budget"], cfg.algorithm))
    return out, skipped


def progress_verdict(rec: ExecutionRecord, cls: str, budget: int, algorithm: str) -> verify.Verdict:
    """Check at ``budget``; on failure retry once at four times the budget."""
    v = verify.check_progress(rec, cls, budget, algorithm)
    v.detail["budget"] = budget
    if v.holds:
        return v
    retry = verify.check_progress(rec, cls, 4 * budget, algorithm)
    retry.detail["budget"] = 4 * budget
    retry.detail["retried_from"] = budget
    return retry


def run_config(cfg: ScenarioConfig, seed: int | None = None) -> ScenarioResult:
    seed = cfg.schedule.get("seed", 0) if seed is None else seed
    t0 = time.perf_counter()
    rec = simulate(cfg, seed)
    verdicts, skipped = evaluate(cfg, rec)
    elapsed = time.perf_counter() - t0
    report = build_report(cfg, seed, rec, verdicts, elapsed)
    report["skipped_checks"] = skipped
    return ScenarioResult(cfg, seed, rec, verdicts, report)


def _trace_json(t: Trace | None) -> list[str] | None:
    return None if t is None else [str(x) for x in t.letters]


def build_report(cfg, seed, rec: ExecutionRecord, verdicts, elapsed: float = 0.0) -> dict:
    rounds: dict[Any, int] = {}
    for p in rec.proposals:
        rounds[p["cmd"]] = rounds.get(p["cmd"], 0) + 1
    ops = [
        {"process": o["process"], "op": str(o["op"]), "command": str(o["tag"]),
         "invocation_step": o["inv"],
         "response_step": "pending" if o["resp"] is None else o["resp"],
         "response": verify._jsonable(o["value"]) if o["resp"] is not None else None,
         "rounds": rounds.get(o["tag"], 0)}
        for o in rec.operations()
    ]
    progressing = []
    per = {}
    for o in rec.operations():
        per.setdefault(o["process"], []).append(o)
    for p in range(1, rec.n + 1):
        done = [o for o in per.get(p, []) if o["resp"] is not None]
        if p not in rec.crashed and len(done) == rec.expected_ops.get(p, 0) and done:
            progressing.append(p)
    return {
        "schema": SCHEMA,
        "scenario": cfg.name,
        "config": cfg.echo(),
        "seed": seed,
        "prng": PRNG_ID,
        "plan": rec.plan.describe() if rec.plan else None,
        "budgets": {**cfg.budgets, "steps_per_round": steps_per_round(cfg.processes),
                    "progress_budget_rule": "200 * n * (2n + 5) unless configured"},
        "operations": ops,
        "completed_processes": progressing,
        "committed_log": [
            {"round": r, "process": p, "step": step, "trace": _trace_json(s)}
            for r, s, p, step in rec.committed_log
        ],
        "crashed": {str(k): v for k, v in sorted(rec.crashed.items())},
        "solo_windows": rec.windows,
        "release_step": rec.release_step,
        "verdicts": [_verdict_json(v) for v in verdicts],
        "ok": all(v.holds for v in verdicts),
        "counts": {"steps": len(rec.steps), "operations": len(ops),
                   "completed": sum(1 for o in ops if o["response_step"] != "pending"),
                   "gca_instances": len(rec.gca_ledger), "quiescent": rec.quiescent},
        "timing": {"wall_clock_seconds": round(elapsed, 6)},
    }


def _verdict_json(v: verify.Verdict) -> dict:
    return json.loads(json.dumps(
        {"property": v.property, "holds": v.holds, "witness": v.witness, "detail": v.detail},
        default=str, sort_keys=True,
    ))


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=str) + "\n"


def strip_timing(report: dict) -> dict:
    return {k: v for k, v in report.items() if k not in TIMING_KEYS}


# -- exploration --------------------------------------------------------------


EXPLORE_CHECKS = ("linearizability", "gca", "gca-wait-freedom", "monotonicity", "snapshot",
                  "registers", "helping", "same-round")


def explore_config(cfg: ScenarioConfig, depth: int, budget: int = 2_000_000, finish: int = 0) -> dict:
    """Run the safety checkers on every interleaving up to ``depth`` steps.

    Phases are flattened and crash points from the file are kept; solo
    windows and holds do not apply because every schedule is enumerated.
    ``finish`` extra steps complete each branch one process at a time.
    """
    spec = get_spec(cfg.object)
    algo = get_algorithm(cfg.algorithm, spec)
    wl = build_workload(cfg, cfg.schedule.get("seed", 0))
    flat = Workload({p: wl.before.get(p, []) + wl.after.get(p, []) for p in range(1, cfg.processes + 1)})
    crash = {int(k[1:]): (v[0] if isinstance(v, list) else v)
             for k, v in cfg.schedule.get("crash_points", {}).items()}
    counts = {"interleavings": 0, "truncated": 0, "passed": 0, "failed": 0}
    first = None
    for rec in exhaustive_interleavings(flat, algo, depth, n=cfg.processes, budget=budget,
                                        crash_points=crash, finish=finish):
        if cfg.fault:
            inject_fault(rec, cfg.fault)
        counts["interleavings"] += 1
        counts["truncated"] += rec.truncated
        vs = verify.safety_verdicts(rec, spec, EXPLORE_CHECKS)
        bad = [v for v in vs if not v.holds]
        if bad:
            counts["failed"] += 1
            if first is None:
                first = {"schedule": [s.process for s in rec.steps],
                         "verdicts": [_verdict_json(v) for v in bad]}
        else:
            counts["passed"] += 1
    return {"schema": SCHEMA, "scenario": cfg.name, "config": cfg.echo(), "depth": depth,
            "finish": finish, "counts": counts, "first_counterexample": first, "ok": first is None}


# -- bundled scenarios --------------------------------------------------------


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled scenario {name!r}; expected one of {list(BUNDLED)}")
    return Path(str(resources.files("cfuc") / "scenarios" / f"{name}.toml"))


def resolve_config(arg: str) -> Path:
    """A path, or the name of a bundled scenario."""
    p = Path(arg)
    if p.exists() or arg not in BUNDLED:
        return p
    return bundled_path(arg)
