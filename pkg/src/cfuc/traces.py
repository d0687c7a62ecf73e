"""Trace monoid over a conflict relation.

A trace is the class of schedules obtained by swapping adjacent occurrences
of non-conflicting letters.  Traces are stored by their lexicographically
least representative, so equality is plain tuple comparison.

Letters may be any hashable, mutually comparable values.  A letter that
carries an ``op`` attribute (such as :class:`cfuc.objects.Command`) conflicts
according to that op, which is how commands inherit the conflict relation of
their operations.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Hashable, Iterable, Sequence
from typing import Any

Letter = Hashable
Schedule = tuple


class TraceError(Exception):
    """Base class for trace algebra errors."""


class NotAPrefix(TraceError):
    pass


class Incompatible(TraceError):
    pass


class OccurrenceNotFound(TraceError):
    pass


class OracleBoundExceeded(TraceError):
    pass


class SpecError(TraceError):
    """A transition was undefined for some (operation, state) pair."""


def _key(letter: Any) -> Any:
    return getattr(letter, "op", letter)


class ConflictRelation:
    """Symmetric relation on operations.

    ``pairs`` may contain reflexive pairs ``(a, a)``; they have no effect on
    trace equivalence (two occurrences of the same letter keep their relative
    order in every schedule) but are meaningful for the progress definitions.
    """

    __slots__ = ("pairs", "_cache", "_hash")

    def __init__(self, pairs: Iterable[tuple[Any, Any]] = ()):
        self.pairs = frozenset(frozenset(p) for p in pairs)
        for p in self.pairs:
            if not 1 <= len(p) <= 2:
                raise ValueError(f"bad conflict pair {set(p)!r}")
        self._cache: dict[tuple[Any, Any], bool] = {}
        self._hash = hash(self.pairs)

    @classmethod
    def total(cls, ops: Iterable[Any]) -> ConflictRelation:
        ops = list(ops)
        return cls((a, b) for a in ops for b in ops)

    def conflicts(self, a: Any, b: Any) -> bool:
        try:
            return self._cache[a, b]
        except KeyError:
            pass
        ka, kb = _key(a), _key(b)
        res = frozenset((ka, kb)) in self.pairs
        self._cache[a, b] = res
        self._cache[b, a] = res
        return res

    def as_pairs(self) -> set[tuple[Any, Any]]:
        """All ordered pairs, for symmetry checks and display."""
        out = set()
        for p in self.pairs:
            items = sorted(p, key=repr)
            a, b = items[0], items[-1]
            out.add((a, b))
            out.add((b, a))
        return out

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, ConflictRelation):
            return NotImplemented
        return self.pairs == other.pairs

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        shown = sorted(tuple(sorted(map(str, p))) for p in self.pairs)
        return f"ConflictRelation({shown})"


def _canonical(letters: Sequence[Any], conflicts: ConflictRelation) -> tuple:
    """Lexicographically least schedule equivalent to ``letters``.

    Repeatedly emits the least letter whose first remaining occurrence has no
    remaining conflicting occurrence before it.
    """
    rest = list(letters)
    out = []
    while rest:
        best = None
        best_idx = -1
        seen: list[Any] = []
        for idx, a in enumerate(rest):
            if a in seen:
                continue
            if not any(conflicts.conflicts(b, a) for b in seen):
                if best_idx < 0 or a < best:
                    best, best_idx = a, idx
            seen.append(a)
        out.append(best)
        del rest[best_idx]
    return tuple(out)


class Trace:
    """Immutable trace value; ``letters`` is the canonical representative."""

    __slots__ = ("letters", "conflicts", "_ops")

    def __init__(self, letters: tuple, conflicts: ConflictRelation, *, _canon: bool = False):
        if not _canon:
            letters = _canonical(letters, conflicts)
        self.letters = letters
        self.conflicts = conflicts
        self._ops: Counter | None = None

    @classmethod
    def empty(cls, conflicts: ConflictRelation) -> Trace:
        return cls((), conflicts, _canon=True)

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __contains__(self, letter: Any) -> bool:
        return letter in self.letters

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return self.letters == other.letters and (
            self.conflicts is other.conflicts or self.conflicts == other.conflicts
        )

    def __hash__(self) -> int:
        return hash(self.letters)

    def __le__(self, other: Trace) -> bool:
        return is_prefix(self, other)

    def __mul__(self, other: Trace) -> Trace:
        return concat(self, other)

    def __repr__(self) -> str:
        if not self.letters:
            return "[ε]"
        return "[" + "·".join(map(str, self.letters)) + "]"

    def ops(self) -> Counter:
        if self._ops is None:
            self._ops = Counter(self.letters)
        return Counter(self._ops)

    def append(self, *letters: Any) -> Trace:
        return Trace(self.letters + tuple(letters), self.conflicts)


def normalize(s: Iterable[Any], conflicts: ConflictRelation) -> Trace:
    return Trace(tuple(s), conflicts)


def equivalent(s: Sequence[Any], t: Sequence[Any], conflicts: ConflictRelation) -> bool:
    return _canonical(s, conflicts) == _canonical(t, conflicts)


def _same_relation(traces: Iterable[Trace]) -> ConflictRelation:
    rel = None
    for t in traces:
        if rel is None:
            rel = t.conflicts
        elif t.conflicts is not rel and t.conflicts != rel:
            raise ValueError("traces over different conflict relations")
    if rel is None:
        raise ValueError("empty set of traces")
    return rel


def concat(t: Trace, u: Trace) -> Trace:
    rel = _same_relation((t, u))
    if not u.letters:
        return t
    if not t.letters:
        return u
    return Trace(t.letters + u.letters, rel)


def ops(t: Trace) -> Counter:
    return t.ops()


def _available(seq: Sequence[Any], conflicts: ConflictRelation) -> dict[Any, int]:
    """Letters whose first occurrence can be moved to the front, with its index."""
    avail: dict[Any, int] = {}
    seen: list[Any] = []
    for idx, a in enumerate(seq):
        if a in seen:
            continue
        if not any(conflicts.conflicts(b, a) for b in seen):
            avail[a] = idx
        seen.append(a)
    return avail


def _peel(seq: list, a: Any, conflicts: ConflictRelation) -> bool:
    """Remove ``a`` from the front of ``seq`` (modulo commutation) in place."""
    try:
        idx = seq.index(a)
    except ValueError:
        return False
    for b in seq[:idx]:
        if conflicts.conflicts(b, a):
            return False
    del seq[idx]
    return True


def _residual_letters(t: Trace, u: Trace) -> list | None:
    rest = list(u.letters)
    for a in t.letters:
        if not _peel(rest, a, u.conflicts):
            return None
    return rest


def is_prefix(t: Trace, u: Trace) -> bool:
    _same_relation((t, u))
    if len(t) > len(u):
        return False
    return _residual_letters(t, u) is not None


def residual(t: Trace, u: Trace) -> Trace:
    """The unique ``z`` with ``t · z = u``."""
    rel = _same_relation((t, u))
    rest = _residual_letters(t, u) if len(t) <= len(u) else None
    if rest is None:
        raise NotAPrefix(f"{t!r} is not a prefix of {u!r}")
    return Trace(tuple(rest), rel)


def glb(S: Iterable[Trace]) -> Trace:
    members = list(S)
    rel = _same_relation(members)
    if len(members) == 1:
        return members[0]
    seqs = [list(t.letters) for t in members]
    out = []
    while True:
        common = None
        for seq in seqs:
            avail = _available(seq, rel)
            common = set(avail) if common is None else common & set(avail)
            if not common:
                break
        if not common:
            break
        a = min(common)
        for seq in seqs:
            _peel(seq, a, rel)
        out.append(a)
    return Trace(tuple(out), rel)


def _lub2(x: Trace, y: Trace) -> Trace | None:
    rel = x.conflicts
    if is_prefix(x, y):
        return y
    if is_prefix(y, x):
        return x
    g = glb((x, y))
    xr = _residual_letters(g, x)
    yr = _residual_letters(g, y)
    if set(xr) & set(yr):
        return None
    for a in set(xr):
        for b in set(yr):
            if rel.conflicts(a, b):
                return None
    return Trace(g.letters + tuple(xr) + tuple(yr), rel)


def _fold_lub(members: list[Trace]) -> Trace | None:
    acc = members[0]
    for x in members[1:]:
        acc = _lub2(acc, x)
        if acc is None:
            return None
    return acc


def compatible(S: Iterable[Trace]) -> bool:
    members = list(S)
    if not members:
        return True
    _same_relation(members)
    return _fold_lub(members) is not None


def lub(S: Iterable[Trace]) -> Trace:
    members = list(S)
    _same_relation(members)
    res = _fold_lub(members)
    if res is None:
        raise Incompatible(f"no common extension for {members!r}")
    return res


def sigma_star(t: Trace | Sequence[Any], q0: Any, spec: Any) -> list[tuple[Any, Any]]:
    """Per-letter (response, state) pairs of ``t`` run from ``q0``."""
    letters = t.letters if isinstance(t, Trace) else tuple(t)
    out = []
    q = q0
    for a in letters:
        try:
            r, q = spec.transition(_key(a), q)
        except (KeyError, ValueError, TypeError) as exc:
            raise SpecError(f"transition undefined for {a!r} in state {q!r}") from exc
        out.append((r, q))
    return out


class OccurrenceRef(tuple):
    """The ``index``-th occurrence (1-based) of ``letter``."""

    def __new__(cls, letter: Any, index: int = 1):
        if index < 1:
            raise ValueError("occurrence index is 1-based")
        return super().__new__(cls, (letter, index))

    @property
    def letter(self) -> Any:
        return self[0]

    @property
    def index(self) -> int:
        return self[1]


def ret_star(occ: OccurrenceRef | Any, t: Trace | Sequence[Any], spec: Any) -> Any:
    if not isinstance(occ, OccurrenceRef):
        occ = OccurrenceRef(occ, 1)
    letters = t.letters if isinstance(t, Trace) else tuple(t)
    seen = 0
    pos = -1
    for k, a in enumerate(letters):
        if a == occ.letter:
            seen += 1
            if seen == occ.index:
                pos = k
                break
    if pos < 0:
        raise OccurrenceNotFound(f"{occ.letter!r}^({occ.index}) not in {letters!r}")
    return sigma_star(letters[: pos + 1], spec.initial, spec)[pos][0]


# -- brute-force ground truth -------------------------------------------------

ORACLE_BOUND = 8


def oracle_representatives(
    t: Trace | Sequence[Any], conflicts: ConflictRelation | None = None, bound: int = ORACLE_BOUND
) -> set[tuple]:
    """Every schedule reachable by swapping adjacent commuting occurrences."""
    if isinstance(t, Trace):
        conflicts = t.conflicts
        start = t.letters
    else:
        start = tuple(t)
    if conflicts is None:
        raise ValueError("a conflict relation is required for a raw schedule")
    if len(start) > bound:
        raise OracleBoundExceeded(f"length {len(start)} exceeds oracle bound {bound}")
    seen = {start}
    frontier = [start]
    while frontier:
        s = frontier.pop()
        for k in range(len(s) - 1):
            a, b = s[k], s[k + 1]
            if a != b and not conflicts.conflicts(a, b):
                swapped = s[:k] + (b, a) + s[k + 2 :]
                if swapped not in seen:
                    seen.add(swapped)
                    frontier.append(swapped)
    return seen
