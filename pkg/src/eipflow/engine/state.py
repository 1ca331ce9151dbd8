"""Shared and per-pattern state: claim-check store, message store,
aggregator and resequencer state, recipient journal.

Each container counts ``accesses`` so runtime probes can tell stateful
executors from stateless ones. All containers are internally locked.
"""

from __future__ import annotations

import logging
import math
import re
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable, Union

from eipflow import body as bt
from eipflow.body import Tree
from eipflow.engine.errors import (
    CorrelationError, DuplicateRecord, MissingSequenceNumber, NotFound, UnknownKey,
)
from eipflow.expr import EvalError, Expression, Functions, evaluate, evaluate_condition, parse
from eipflow.message import IdGenerator, IdProvider, Message, default_ids

log = logging.getLogger(__name__)


class _Counted:
    def __init__(self):
        self.accesses = 0
        self._lock = threading.RLock()

    def _touch(self):
        self.accesses += 1


# -- claim check ----------------------------------------------------------------------


@dataclass(frozen=True)
class ClaimEntry:
    payload: Tree | None
    path: str  # fully indexed path the payload was taken from
    position: int  # index among the parent's children
    body_type: str
    retained: bool


class ClaimCheckStore(_Counted):
    def __init__(self, name: str = "claims", seed: int = 0):
        super().__init__()
        self.name = name
        self._keys = IdGenerator(seed, prefix=name)
        self._entries: dict[str, ClaimEntry] = {}

    def put(self, entry: ClaimEntry) -> str:
        with self._lock:
            self._touch()
            key = self._keys()
            while key in self._entries:  # collision check
                key = self._keys()
            self._entries[key] = entry
            return key

    def take(self, key: str) -> ClaimEntry:
        with self._lock:
            self._touch()
            if key not in self._entries:
                raise UnknownKey(f"claim check {key!r} not in store {self.name!r}")
            return self._entries.pop(key)

    def peek(self, key: str) -> ClaimEntry | None:
        return self._entries.get(key)

    def __len__(self) -> int:
        return len(self._entries)

    def keys(self) -> list[str]:
        return sorted(self._entries)


# -- message store ----------------------------------------------------------------------


@dataclass(frozen=True)
class StoreRecord:
    message: Message
    stored_at: float
    tag: str

    @property
    def key(self) -> tuple[str, str]:
        return (self.message.id, self.tag)


class MessageStore(_Counted):
    """Insert-once records keyed by (message id, tag); shared across processes."""

    def __init__(self, name: str = "messages"):
        super().__init__()
        self.name = name
        self._records: dict[tuple[str, str], StoreRecord] = {}

    def persist(self, msg: Message, tag: str = "", now: float = 0.0) -> StoreRecord:
        with self._lock:
            self._touch()
            rec = StoreRecord(msg, now, tag)
            if rec.key in self._records:
                raise DuplicateRecord(f"{msg.id!r} already stored with tag {tag!r}")
            self._records[rec.key] = rec
            return rec

    def update(self, message_id: str, tag: str, snapshot: Message, now: float | None = None) -> StoreRecord:
        with self._lock:
            self._touch()
            old = self._records.get((message_id, tag))
            if old is None:
                raise NotFound(f"({message_id!r}, {tag!r})")
            rec = StoreRecord(snapshot, old.stored_at if now is None else now, tag)
            del self._records[(message_id, tag)]
            self._records[rec.key] = rec
            return rec

    def delete(self, message_id: str, tag: str = "") -> None:
        with self._lock:
            self._touch()
            if self._records.pop((message_id, tag), None) is None:
                raise NotFound(f"({message_id!r}, {tag!r})")

    def query(self, predicate: Callable[[StoreRecord], bool] | None = None) -> list[StoreRecord]:
        with self._lock:
            self._touch()
            return [r for r in self._records.values() if predicate is None or predicate(r)]

    def __len__(self) -> int:
        return len(self._records)


class Stores:
    """Named claim-check and message stores shared by every process of a run."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.claims: dict[str, ClaimCheckStore] = {}
        self.messages: dict[str, MessageStore] = {}

    def claim(self, name: str) -> ClaimCheckStore:
        if name not in self.claims:
            self.claims[name] = ClaimCheckStore(name, self.seed)
        return self.claims[name]

    def message(self, name: str) -> MessageStore:
        if name not in self.messages:
            self.messages[name] = MessageStore(name)
        return self.messages[name]

    @property
    def accesses(self) -> int:
        return sum(s.accesses for s in self.claims.values()) + sum(s.accesses for s in self.messages.values())


# -- recipient journal ------------------------------------------------------------------


class RecipientJournal(_Counted):
    """Per-message record of recipients already served (PersistentList mode)."""

    def __init__(self):
        super().__init__()
        self._sent: dict[str, list[str]] = {}

    def was_sent(self, message_id: str, recipient: str) -> bool:
        with self._lock:
            self._touch()
            return recipient in self._sent.get(message_id, ())

    def record(self, message_id: str, recipient: str) -> None:
        with self._lock:
            self._touch()
            self._sent.setdefault(message_id, []).append(recipient)

    def sent(self, message_id: str) -> list[str]:
        return list(self._sent.get(message_id, ()))


# -- aggregator ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WaitForAll:
    n: int


@dataclass(frozen=True)
class Timeout:
    d: float


@dataclass(frozen=True)
class FirstBest:
    predicate: Expression


@dataclass(frozen=True)
class TimeoutWithOverride:
    d: float
    predicate: Expression


Strategy = Union[WaitForAll, Timeout, FirstBest, TimeoutWithOverride]


@dataclass(frozen=True)
class Collect:
    root: str = "aggregate"


@dataclass(frozen=True)
class Condense:
    """Concatenate the nodes at ``path`` (inverse of an iterative split), or
    fold bodies with ``combine``."""

    path: str | None = None
    combine: Callable[[list[Message]], Tree] | None = None


@dataclass(frozen=True)
class SelectBest:
    ordering: Expression


Algorithm = Union[Collect, Condense, SelectBest]

_CALL = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$", re.S)


def _split_args(text: str) -> list[str]:
    # only the first comma separates: predicates may contain commas inside calls
    head, sep, rest = text.partition(",")
    return [head.strip(), rest.strip()] if sep else [head.strip()]


def parse_strategy(text: str) -> Strategy:
    """``wait_for_all(3)``, ``timeout(10)``, ``first_best(<expr>)``,
    ``timeout_with_override(10, <expr>)``."""
    m = _CALL.match(text or "")
    if not m:
        raise ValueError(f"bad completion strategy {text!r}")
    name, args = m.group(1).lower(), m.group(2)
    if name == "wait_for_all":
        return WaitForAll(int(args))
    if name == "timeout":
        return Timeout(float(args))
    if name == "first_best":
        return FirstBest(parse(args))
    if name == "timeout_with_override":
        d, pred = _split_args(args)
        return TimeoutWithOverride(float(d), parse(pred))
    raise ValueError(f"unknown completion strategy {name!r}")


def parse_algorithm(text: str | None) -> Algorithm:
    """``collect``, ``condense(/path)``, ``select_best(<expr>)``."""
    if not text or text.strip() == "collect":
        return Collect()
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"bad aggregation algorithm {text!r}")
    name, args = m.group(1).lower(), m.group(2).strip()
    if name == "collect":
        return Collect(args or "aggregate")
    if name == "condense":
        bt.parse_path(args)
        return Condense(path=args)
    if name == "select_best":
        return SelectBest(parse(args))
    raise ValueError(f"unknown aggregation algorithm {name!r}")


@dataclass
class OpenAggregate:
    key: str
    opened_at: float
    contributions: list[Message] = field(default_factory=list)
    deadline: float | None = None


@dataclass(frozen=True)
class Completed:
    key: str
    message: Message
    time: float
    reason: str  # all | predicate | timeout | manual


def condense_split(parts: list[Message], path: str) -> Tree:
    """Rebuild a body from iterative-split parts, each holding one node at ``path``.

    Part ``i`` was the original with every other hit removed, so the hit's
    original child index is its index in part ``i`` plus the number of
    earlier hits under the same parent.
    """
    skeleton = None
    placed: list[tuple[bt.Path, int, Tree]] = []
    for part in parts:
        hits = bt.locate(part.body, path)
        if len(hits) != 1:
            raise ValueError(f"part {part.id} has {len(hits)} nodes at {path}")
        full = hits[0]
        node = bt.select(part.body, full)[0]
        parent = bt.select(part.body, full.parent)[0]
        pos = next(i for i, c in enumerate(parent.children) if c is node)
        placed.append((full.parent, pos, node))
        if skeleton is None:
            skeleton = bt.remove(part.body, full)
    assert skeleton is not None
    before: dict[str, int] = {}
    for parent_path, pos, node in placed:
        k = str(parent_path)
        skeleton = bt.insert(skeleton, parent_path, node, pos + before.get(k, 0))
        before[k] = before.get(k, 0) + 1
    return skeleton


def _order_key(v):
    if isinstance(v, bool):
        return (0, int(v))
    if isinstance(v, (int, Decimal)):
        return (1, v)
    return (2, str(v))


class AggregatorState(_Counted):
    """Open aggregates per correlation key, plus the bounded closed-key set."""

    def __init__(self, strategy: Strategy, algorithm: Algorithm | None = None, *,
                 correlation: Expression | str | None = None, ids: IdProvider | None = None,
                 closed_horizon: float = math.inf, closed_cap: int = 10_000,
                 functions: Functions | None = None, body_type: str | None = None):
        super().__init__()
        self.strategy = strategy
        self.algorithm = algorithm or Collect()
        self.correlation = parse(correlation) if isinstance(correlation, str) else correlation
        self.ids = ids or default_ids()
        self.closed_horizon = closed_horizon
        self.closed_cap = closed_cap
        self.functions = functions
        self.body_type = body_type
        self.open: dict[str, OpenAggregate] = {}
        self.closed: OrderedDict[str, float] = OrderedDict()
        self.audit: list[tuple[float, str, str]] = []

    # correlation -----------------------------------------------------------------

    def key_of(self, msg: Message) -> str:
        if self.correlation is not None:
            try:
                return str(evaluate(self.correlation, msg, self.functions))
            except EvalError as exc:
                raise CorrelationError(f"no correlation key for {msg.id}: {exc}") from exc
        if msg.correlation_id is None:
            raise CorrelationError(f"message {msg.id} has no correlation id")
        return msg.correlation_id

    @property
    def _timed(self) -> float | None:
        s = self.strategy
        return s.d if isinstance(s, (Timeout, TimeoutWithOverride)) else None

    def open_key(self, key: str, now: float) -> OpenAggregate:
        """Open an aggregate before its first contribution (arms the timer now)."""
        with self._lock:
            self._touch()
            if key in self.closed:
                raise ValueError(f"key {key!r} is closed")
            if key not in self.open:
                d = self._timed
                self.open[key] = OpenAggregate(key, now, deadline=None if d is None else now + d)
            return self.open[key]

    # events ------------------------------------------------------------------------

    def offer(self, msg: Message, now: float) -> list[Completed]:
        """Add a contribution; returns the aggregate if this completes it."""
        with self._lock:
            self._touch()
            key = self.key_of(msg)
            self.purge(now)
            if key in self.closed:
                self.audit.append((now, key, f"late contribution {msg.id} discarded"))
                log.info("aggregator: key %s closed, discarding %s", key, msg.id)
                return []
            agg = self.open.get(key) or self.open_key(key, now)
            agg.contributions.append(msg)
            s = self.strategy
            if isinstance(s, WaitForAll) and len(agg.contributions) >= s.n:
                return [self._complete(key, now, "all")]
            if isinstance(s, (FirstBest, TimeoutWithOverride)):
                if evaluate_condition(s.predicate, msg, self.functions):
                    return [self._complete(key, now, "predicate")]
            return []

    def next_deadline(self) -> tuple[float, str] | None:
        timed = [(a.deadline, k) for k, a in self.open.items() if a.deadline is not None]
        return min(timed) if timed else None

    def on_timeout(self, key: str, now: float) -> list[Completed]:
        with self._lock:
            self._touch()
            agg = self.open.get(key)
            if agg is None or agg.deadline is None or now < agg.deadline:
                return []
            return [self._complete(key, agg.deadline, "timeout")]

    def advance(self, now: float) -> list[Completed]:
        """Fire every timer due at or before ``now``, in deadline order."""
        out = []
        while True:
            nxt = self.next_deadline()
            if nxt is None or nxt[0] > now:
                return out
            out.extend(self.on_timeout(nxt[1], nxt[0]))

    def complete(self, key: str, now: float) -> list[Completed]:
        """Manual completion hook (external event)."""
        with self._lock:
            self._touch()
            if key not in self.open:
                return []
            return [self._complete(key, now, "manual")]

    def _complete(self, key: str, now: float, reason: str) -> Completed:
        agg = self.open.pop(key)
        parts = agg.contributions
        body = self._combine(parts)
        body_type = self.body_type or (parts[0].body_type if parts else "untyped")
        msg = Message(self.ids(), body, body_type, correlation_id=key)
        self.closed[key] = now
        self.closed.move_to_end(key)
        self._enforce_cap()
        return Completed(key, msg, now, reason)

    def _combine(self, parts: list[Message]) -> Tree | None:
        alg = self.algorithm
        if not parts:
            return Tree(alg.root if isinstance(alg, Collect) else "aggregate")
        if isinstance(alg, Collect):
            return Tree(alg.root, None, tuple(p.body for p in parts if p.body is not None))
        if isinstance(alg, SelectBest):
            return max(parts, key=lambda p: _order_key(evaluate(alg.ordering, p, self.functions))).body
        ordered = sorted(parts, key=lambda p: (p.sequence_number is None, p.sequence_number or 0))
        if alg.combine is not None:
            return alg.combine(ordered)
        return condense_split(ordered, alg.path or "/")

    # closed keys ----------------------------------------------------------------------

    def purge(self, now: float) -> int:
        removed = 0
        for k in list(self.closed):
            if now - self.closed[k] > self.closed_horizon:
                del self.closed[k]
                removed += 1
        return removed + self._enforce_cap()

    def _enforce_cap(self) -> int:
        removed = 0
        while len(self.closed) > self.closed_cap:
            self.closed.popitem(last=False)
            removed += 1
        return removed


# -- resequencer -----------------------------------------------------------------------


@dataclass
class ResequencerState:
    buffer: dict[int, Message] = field(default_factory=dict)
    next_expected: int = 1


class Resequencer(_Counted):
    """Per-correlation-key reordering by sequence number.

    ``streaming`` emits every gap-free run starting at ``next_expected``;
    ``wait_for_n`` holds everything until 1..size are all present.
    """

    def __init__(self, mode: str = "streaming", size: int | None = None):
        super().__init__()
        if mode not in ("streaming", "wait_for_n"):
            raise ValueError(f"unknown resequencer mode {mode!r}")
        if mode == "wait_for_n" and not size:
            raise ValueError("wait_for_n needs a size")
        self.mode = mode
        self.size = size
        self.states: dict[str, ResequencerState] = {}
        self.audit: list[str] = []

    def offer(self, msg: Message) -> list[Message]:
        with self._lock:
            self._touch()
            if msg.sequence_number is None:
                raise MissingSequenceNumber(f"message {msg.id} has no sequence number")
            key = msg.correlation_id or ""
            st = self.states.setdefault(key, ResequencerState())
            n = msg.sequence_number
            if n < st.next_expected or n in st.buffer:
                self.audit.append(f"duplicate sequence {n} for {key!r} ({msg.id}) dropped")
                return []
            st.buffer[n] = msg
            if self.mode == "wait_for_n" and not all(i in st.buffer for i in range(st.next_expected, self.size + 1)):
                return []
            out = []
            while st.next_expected in st.buffer:
                out.append(st.buffer.pop(st.next_expected))
                st.next_expected += 1
            return out

    def buffered(self, key: str | None = None) -> int:
        if key is not None:
            return len(self.states.get(key, ResequencerState()).buffer)
        return sum(len(s.buffer) for s in self.states.values())
