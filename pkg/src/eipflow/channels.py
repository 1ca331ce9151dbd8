"""In-memory message channels with quality-of-service options.

Every channel keeps counters so that at any instant::

    sent == delivered + queued + dead_lettered + invalid + rejected

``queued`` includes leased (received but not yet acknowledged) messages.
A publish-subscribe send counts one ``sent`` per subscriber copy.
"""

from __future__ import annotations

import logging
import threading
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from eipflow.journal import Journal
from eipflow.message import IdProvider, Message, canonical_bytes, copy_with_new_id, from_bytes, message_size

log = logging.getLogger(__name__)


class ChannelKind(str, Enum):
    POINT_TO_POINT = "PointToPoint"
    PUBLISH_SUBSCRIBE = "PublishSubscribe"


class Mep(str, Enum):
    IN_ONLY = "InOnly"
    IN_OUT = "InOut"


class ChannelError(Exception):
    pass


class ChannelClosed(ChannelError):
    pass


class NoDeadLetterTarget(ChannelError):
    pass


class ConfigError(ChannelError):
    pass


class SendFailure(ChannelError):
    def __init__(self, channel: str, reason: str):
        super().__init__(f"{channel}: {reason}")
        self.channel = channel
        self.reason = reason


@dataclass(frozen=True)
class Redelivery:
    max_attempts: int = 1
    backoff: float = 0.0
    ack_timeout: float = 1.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")


@dataclass(frozen=True)
class ChannelConfig:
    kind: ChannelKind = ChannelKind.POINT_TO_POINT
    mep: Mep = Mep.IN_ONLY
    guaranteed_delivery: bool = False
    max_message_size: int | None = None
    datatype: str | None = None
    ttl: float | None = None
    dead_letter_target: str | None = None
    invalid_target: str | None = None
    redelivery: Redelivery | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        object.__setattr__(self, "mep", Mep(self.mep))
        if self.ttl is not None and not self.dead_letter_target:
            raise ConfigError("ttl requires a dead_letter_target")
        if self.redelivery is not None and not self.dead_letter_target:
            raise ConfigError("redelivery requires a dead_letter_target")


@dataclass(frozen=True)
class Accepted:
    message_ids: tuple[str, ...]

    ok = True


@dataclass(frozen=True)
class Rejected:
    reason: str  # TooLarge | WrongType | NoSubscribers
    detail: str = ""

    ok = False


class _EmptyType:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __bool__(self):
        return False

    def __repr__(self):
        return "Empty"


Empty = _EmptyType()


@dataclass
class Stats:
    sent: int = 0
    delivered: int = 0
    dead_lettered: int = 0
    invalid: int = 0
    rejected: int = 0


@dataclass
class _Entry:
    msg: Message
    enqueued_at: float
    attempts: int = 0
    available_at: float = 0.0
    consumer: str | None = None  # pub/sub owner, or current lease holder
    leased_at: float | None = None


@dataclass
class AckRecord:
    message_id: str
    consumer: str
    time: float


class Channel:
    def __init__(self, name: str, config: ChannelConfig | None = None, broker: "Broker | None" = None,
                 journal: Journal | None = None, ids: IdProvider | None = None):
        self.name = name
        self.config = config or ChannelConfig()
        self.broker = broker
        self.journal = journal
        self.ids = ids
        self.stats = Stats()
        self.closed = False
        self.acks: list[AckRecord] = []
        self._queue: deque[_Entry] = deque()  # P2P queue
        self._subs: dict[str, deque[_Entry]] = {}  # pub/sub per-subscriber queues
        self._leases: dict[str, _Entry] = {}
        self._lock = threading.RLock()
        if self.config.guaranteed_delivery and journal is None:
            raise ConfigError(f"channel {name!r}: guaranteed delivery needs a journal")

    # -- introspection -----------------------------------------------------

    @property
    def is_p2p(self) -> bool:
        return self.config.kind == ChannelKind.POINT_TO_POINT

    @property
    def queued(self) -> int:
        with self._lock:
            return len(self._queue) + sum(len(q) for q in self._subs.values()) + len(self._leases)

    def conserved(self) -> bool:
        s = self.stats
        return s.sent == s.delivered + self.queued + s.dead_lettered + s.invalid + s.rejected

    def peek_all(self) -> list[Message]:
        with self._lock:
            out = [e.msg for e in self._queue]
            for q in self._subs.values():
                out.extend(e.msg for e in q)
            return out

    # -- subscriptions -------------------------------------------------------

    def subscribe(self, consumer: str) -> None:
        with self._lock:
            self._subs.setdefault(consumer, deque())

    def unsubscribe(self, consumer: str, now: float = 0.0) -> list[Message]:
        """Drop a (non-durable) subscription; its pending copies are dead-lettered."""
        with self._lock:
            q = self._subs.pop(consumer, deque())
            leased = [e for e in self._leases.values() if e.consumer == consumer]
            for e in leased:
                del self._leases[e.msg.id]
            dropped = list(q) + leased
            for e in dropped:
                self._dead_letter(e, now, "unsubscribed")
            return [e.msg for e in dropped]

    @property
    def subscribers(self) -> list[str]:
        return sorted(self._subs)

    # -- send ------------------------------------------------------------------

    def check(self, msg: Message) -> Rejected | None:
        """Would ``msg`` be refused? Pure; used by transactional senders."""
        cfg = self.config
        if cfg.max_message_size is not None and message_size(msg) > cfg.max_message_size:
            return Rejected("TooLarge", f"{message_size(msg)} > {cfg.max_message_size}")
        if cfg.datatype is not None and msg.body_type != cfg.datatype:
            return Rejected("WrongType", f"{msg.body_type!r} != {cfg.datatype!r}")
        if not self.is_p2p and not self._subs:
            return Rejected("NoSubscribers")
        return None

    def send(self, msg: Message, now: float = 0.0) -> Accepted | Rejected:
        with self._lock:
            if self.closed:
                raise ChannelClosed(self.name)
            problem = self.check(msg)
            if problem is not None:
                self.stats.sent += 1
                if problem.reason == "WrongType" and self.config.invalid_target:
                    self.stats.invalid += 1
                    self._forward(self.config.invalid_target, msg, now)
                else:
                    self.stats.rejected += 1
                log.debug("%s rejected %s: %s", self.name, msg.id, problem.reason)
                return problem
            if self.is_p2p:
                self.stats.sent += 1
                self._enqueue(self._queue, msg, now)
                return Accepted((msg.id,))
            ids = []
            for consumer in sorted(self._subs):
                copy = copy_with_new_id(msg, self.ids)
                self.stats.sent += 1
                self._enqueue(self._subs[consumer], copy, now, consumer)
                ids.append(copy.id)
            return Accepted(tuple(ids))

    def _enqueue(self, q: deque, msg: Message, now: float, consumer: str | None = None) -> None:
        if self.journal is not None and self.config.guaranteed_delivery:
            self.journal.enqueue(self.name, msg.id, now, canonical_bytes(msg))
        q.append(_Entry(msg, now, available_at=now, consumer=consumer))

    def _forward(self, target: str, msg: Message, now: float) -> None:
        if self.broker is None:
            raise NoDeadLetterTarget(f"{self.name}: no broker to resolve {target!r}")
        self.broker.channel(target).send(msg, now)

    # -- receive / ack ----------------------------------------------------------

    def receive(self, consumer: str = "default", now: float = 0.0) -> Message | _EmptyType:
        with self._lock:
            if self.closed:
                raise ChannelClosed(self.name)
            self._reclaim(now)
            if self.is_p2p:
                q = self._queue
            else:
                if consumer not in self._subs:
                    raise ChannelError(f"{consumer!r} is not subscribed to {self.name!r}")
                q = self._subs[consumer]
            for i, e in enumerate(q):
                if e.available_at <= now:
                    del q[i]
                    break
            else:
                return Empty
            e.attempts += 1
            if self.config.redelivery is None:
                self._settle(e, consumer, now)
            else:
                e.leased_at = now
                e.consumer = consumer if self.is_p2p else e.consumer
                self._leases[e.msg.id] = e
            return e.msg

    def ack(self, message_id: str, consumer: str = "default", now: float = 0.0) -> bool:
        """Acknowledge a leased message; False if not leased by ``consumer``."""
        with self._lock:
            e = self._leases.get(message_id)
            if e is None or e.consumer != consumer:
                return False
            del self._leases[message_id]
            self._settle(e, consumer, now)
            return True

    def nack(self, message_id: str, consumer: str = "default", now: float = 0.0) -> bool:
        with self._lock:
            e = self._leases.get(message_id)
            if e is None or e.consumer != consumer:
                return False
            del self._leases[message_id]
            self._return(e, now)
            return True

    def _settle(self, e: _Entry, consumer: str, now: float) -> None:
        self.stats.delivered += 1
        self.acks.append(AckRecord(e.msg.id, consumer, now))
        if self.journal is not None and self.config.guaranteed_delivery:
            self.journal.ack(self.name, e.msg.id, now)

    def _return(self, e: _Entry, now: float) -> None:
        red = self.config.redelivery
        if e.attempts >= red.max_attempts:
            self._dead_letter(e, now, f"{e.attempts} delivery attempts")
            return
        e.leased_at = None
        e.available_at = now + red.backoff
        q = self._queue if self.is_p2p else self._subs.get(e.consumer)
        if q is None:
            self._dead_letter(e, now, "subscriber gone")
            return
        q.appendleft(e)

    def _reclaim(self, now: float) -> None:
        red = self.config.redelivery
        if red is None:
            return
        # reverse order so earlier leases end up nearer the head
        for mid, e in sorted(self._leases.items(), key=lambda kv: kv[1].leased_at, reverse=True):
            if e.leased_at + red.ack_timeout <= now:
                del self._leases[mid]
                self._return(e, now)

    def _dead_letter(self, e: _Entry, now: float, why: str) -> None:
        self.stats.dead_lettered += 1
        if self.journal is not None and self.config.guaranteed_delivery:
            self.journal.ack(self.name, e.msg.id, now)
        log.debug("%s dead-letters %s (%s)", self.name, e.msg.id, why)
        if self.config.dead_letter_target:
            self._forward(self.config.dead_letter_target, e.msg, now)

    # -- expiry -------------------------------------------------------------------

    def expire_sweep(self, now: float) -> list[Message]:
        """Move messages older than ttl (strictly) that nobody has taken to the DLC."""
        with self._lock:
            ttl = self.config.ttl
            if ttl is None:
                return []
            if not self.config.dead_letter_target:
                raise NoDeadLetterTarget(self.name)
            self._reclaim(now)
            expired: list[Message] = []
            queues = [self._queue] + [self._subs[k] for k in sorted(self._subs)]
            for q in queues:
                keep = deque()
                for e in q:
                    if now - e.enqueued_at > ttl:
                        expired.append(e.msg)
                        self._dead_letter(e, now, "expired")
                    else:
                        keep.append(e)
                q.clear()
                q.extend(keep)
            return expired

    # -- recovery -------------------------------------------------------------------

    def recover(self) -> int:
        """Rebuild the P2P queue from the journal's unacknowledged enqueues."""
        if self.journal is None:
            return 0
        with self._lock:
            pending = self.journal.pending(self.name)
            present = {e.msg.id for e in self._queue} | set(self._leases)
            n = 0
            for r in pending:
                if r.message_id in present:
                    continue
                self._queue.append(_Entry(from_bytes(r.payload), r.timestamp, available_at=r.timestamp))
                self.stats.sent += 1
                n += 1
            return n

    def close(self) -> None:
        self.closed = True


class Broker:
    """Registry of named channels; resolves dead-letter and invalid targets."""

    def __init__(self, ids: IdProvider | None = None, journal: Journal | None = None, items: Iterable[str] | None = None):
        self.ids = ids
        self.journal = journal
        self.items = set(items) if items is not None else None
        self.channels: dict[str, Channel] = {}

    def add(self, name: str, config: ChannelConfig | None = None) -> Channel:
        config = config or ChannelConfig()
        if config.datatype and self.items is not None and config.datatype not in self.items:
            raise ConfigError(f"channel {name!r}: datatype {config.datatype!r} does not resolve")
        ch = Channel(name, config, self, self.journal if config.guaranteed_delivery else None, self.ids)
        self.channels[name] = ch
        return ch

    def channel(self, name: str) -> Channel:
        if name not in self.channels:
            # targets referenced before declaration become plain P2P channels
            return self.add(name)
        return self.channels[name]

    def __contains__(self, name: str) -> bool:
        return name in self.channels

    def send(self, name: str, msg: Message, now: float = 0.0) -> Accepted | Rejected:
        return self.channel(name).send(msg, now)

    def validate_targets(self) -> list[str]:
        problems = []
        for name, ch in self.channels.items():
            for target in (ch.config.dead_letter_target, ch.config.invalid_target):
                if target and target not in self.channels:
                    problems.append(f"{name}: target {target!r} is not declared")
        return problems

    @contextmanager
    def transaction(self, now: float = 0.0):
        tx = Transaction(self, now)
        yield tx
        tx.commit()

    def conserved(self) -> bool:
        return all(ch.conserved() for ch in self.channels.values())


@dataclass
class Transaction:
    """All-or-nothing batch of sends: nothing is visible unless every send would be accepted."""

    broker: Broker
    now: float = 0.0
    staged: list[tuple[str, Message]] = field(default_factory=list)
    committed: bool = False

    def send(self, channel: str, msg: Message) -> None:
        self.staged.append((channel, msg))

    def fail(self, channel: str, reason: str) -> None:
        raise SendFailure(channel, reason)

    def commit(self) -> list[Accepted]:
        for name, msg in self.staged:
            ch = self.broker.channel(name)
            if ch.closed:
                raise SendFailure(name, "closed")
            problem = ch.check(msg)
            if problem is not None:
                raise SendFailure(name, problem.reason)
        out = [self.broker.channel(name).send(msg, self.now) for name, msg in self.staged]
        self.committed = True
        return out
