"""Exhaustive cross-check of the trace algebra against schedule enumeration.

The tables here never call the algebra: equivalence classes come from a
union-find over adjacent swaps, prefixes from cutting every member of a
class, and bounds from searching those prefix sets.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

from cfuc import traces as T
from cfuc.traces import ConflictRelation, oracle_representatives


class OracleTables:
    """Classes of every schedule up to ``max_len`` over ``alphabet``.

    A class is named by its least member.
    """

    def __init__(self, alphabet: Sequence[Any], conflicts: ConflictRelation, max_len: int):
        self.alphabet = tuple(sorted(alphabet))
        self.conflicts = conflicts
        self.max_len = max_len
        parent: dict[tuple, tuple] = {}

        def find(w):
            while parent[w] != w:
                parent[w] = parent[parent[w]]
                w = parent[w]
            return w

        self.words = [w for k in range(max_len + 1) for w in itertools.product(self.alphabet, repeat=k)]
        for w in self.words:
            parent[w] = w
        for w in self.words:
            for k in range(len(w) - 1):
                a, b = w[k], w[k + 1]
                if a != b and not conflicts.conflicts(a, b):
                    v = w[:k] + (b, a) + w[k + 2 :]
                    ra, rb = find(w), find(v)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
        groups: dict[tuple, list] = {}
        for w in self.words:
            groups.setdefault(find(w), []).append(w)
        self.members = {min(g): sorted(g) for g in groups.values()}
        self.rep = {w: min(g) for g in groups.values() for w in g}
        self.classes = sorted(self.members, key=lambda c: (len(c), c))
        self.prefixes = {
            c: {self.rep[w[:k]] for w in ms for k in range(len(w) + 1)}
            for c, ms in self.members.items()
        }
        self.upper: dict[tuple, set] = {c: set() for c in self.classes}
        for c, ps in self.prefixes.items():
            for p in ps:
                self.upper[p].add(c)

    def by_length(self, k: int) -> list[tuple]:
        return [c for c in self.classes if len(c) == k]

    def is_prefix(self, t: tuple, u: tuple) -> bool:
        return t in self.prefixes[u]

    def glb(self, group: Sequence[tuple]) -> tuple:
        common = set.intersection(*(self.prefixes[c] for c in group))
        best = max(common, key=len)
        if any(not self.is_prefix(c, best) for c in common):
            raise AssertionError(f"no greatest common prefix for {group}")
        return best

    def lub(self, group: Sequence[tuple]) -> tuple | None:
        """Least common extension, or None when the group has none in range."""
        common = set.intersection(*(self.upper[c] for c in group))
        if not common:
            return None
        best = min(common, key=len)
        if any(not self.is_prefix(best, c) for c in common):
            raise AssertionError(f"no least common extension for {group}")
        return best


@dataclass
class OracleReport:
    counts: dict = field(default_factory=dict)
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def fail(self, check: str, instance: Any, got: Any, expected: Any) -> None:
        self.mismatches.append({"check": check, "instance": instance, "got": got, "expected": expected})

    def tick(self, check: str, n: int = 1) -> None:
        self.counts[check] = self.counts.get(check, 0) + n


COUNTER_ALPHABET = ("read", "inc", "dec")
COUNTER_CONFLICTS = ConflictRelation([("read", "inc"), ("read", "dec")])


def run_oracle_suite(
    max_len: int,
    pair_total: int | None = None,
    set_size: int = 3,
    alphabet: Sequence[Any] = COUNTER_ALPHABET,
    conflicts: ConflictRelation = COUNTER_CONFLICTS,
    algebra: Any = T,
    stop_at: int = 20,
    progress: Callable[[str], None] | None = None,
) -> OracleReport:
    """Compare ``algebra`` against :class:`OracleTables`.

    Single schedules are checked up to ``max_len``; pairs and sets of up to
    ``set_size`` traces up to total length ``pair_total`` (default
    ``max_len``).  ``algebra`` is injectable so mutated builds can be fed in.
    """
    if max_len < 0:
        raise ValueError("max_len must be non-negative")
    pair_total = max_len if pair_total is None else pair_total
    tables = OracleTables(alphabet, conflicts, max(max_len, pair_total))
    rep = OracleReport()
    say = progress or (lambda _msg: None)

    def trace(c):
        return algebra.Trace(c, conflicts, _canon=True)

    def full() -> bool:
        return len(rep.mismatches) >= stop_at

    # single schedules
    for w in tables.words:
        if len(w) > max_len:
            continue
        rep.tick("normalize")
        got = algebra.normalize(w, conflicts).letters
        if got != tables.rep[w]:
            rep.fail("normalize", list(w), list(got), list(tables.rep[w]))
        if len(w) <= T.ORACLE_BOUND:
            rep.tick("representatives")
            reps = oracle_representatives(w, conflicts)
            if reps != set(tables.members[tables.rep[w]]):
                rep.fail("representatives", list(w), len(reps), len(tables.members[tables.rep[w]]))
        if full():
            return rep
    for k in range(max_len + 1):
        same_len = [w for w in tables.words if len(w) == k]
        for u, v in itertools.product(same_len, repeat=2):
            rep.tick("equivalent")
            got = algebra.equivalent(u, v, conflicts)
            expected = tables.rep[u] == tables.rep[v]
            if got != expected:
                rep.fail("equivalent", [list(u), list(v)], got, expected)
                if full():
                    return rep
    say(f"single schedules up to length {max_len}: ok={rep.ok}")

    # pairs and sets of classes by total length
    short = [c for c in tables.classes if len(c) <= pair_total]
    for size in range(1, set_size + 1):
        for group in _groups(short, size, pair_total):
            ts = [trace(c) for c in group]
            if size == 2:
                rep.tick("is_prefix", 2)
                for a, b in ((0, 1), (1, 0)):
                    got = algebra.is_prefix(ts[a], ts[b])
                    expected = tables.is_prefix(group[a], group[b])
                    if got != expected:
                        rep.fail("is_prefix", [list(group[a]), list(group[b])], got, expected)
            rep.tick("glb")
            got = algebra.glb(ts).letters
            expected = tables.glb(group)
            if got != expected:
                rep.fail("glb", [list(c) for c in group], list(got), list(expected))
            rep.tick("compatible")
            expected = tables.lub(group)
            got_c = algebra.compatible(ts)
            if got_c != (expected is not None):
                rep.fail("compatible", [list(c) for c in group], got_c, expected is not None)
            elif expected is not None:
                rep.tick("lub")
                got = algebra.lub(ts).letters
                if got != expected:
                    rep.fail("lub", [list(c) for c in group], list(got), list(expected))
            if full():
                return rep
        say(f"sets of size {size} up to total length {pair_total}: ok={rep.ok}")
    return rep


def _groups(classes: list[tuple], size: int, total: int):
    """Ordered pairs, or multisets of larger size, within the length budget."""
    if size == 2:
        for a in classes:
            for b in classes:
                if len(a) + len(b) <= total:
                    yield (a, b)
        return
    order = sorted(classes, key=lambda c: (len(c), c))

    def extend(start: int, left: int, budget: int, acc: tuple):
        if left == 0:
            yield acc
            return
        for k in range(start, len(order)):
            c = order[k]
            if len(c) * left > budget:
                break
            yield from extend(k, left - 1, budget - len(c), acc + (c,))

    yield from extend(0, size, total, ())
