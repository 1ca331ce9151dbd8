"""Append-only journal for guaranteed-delivery channels.

Record layout (all integers big-endian)::

    u32  length of the rest of the record (kind .. crc)
    u8   kind: 1 = enqueue, 2 = ack
    u16  channel name length, then UTF-8 bytes
    u16  message id length, then UTF-8 bytes
    f64  logical timestamp
    u32  payload length, then payload (canonical message bytes; empty for ack)
    u32  CRC-32 over kind .. payload

A truncated or corrupt trailing record is a torn write and is ignored on
replay; corruption before the tail raises :class:`JournalCorrupt`.
"""

from __future__ import annotations

import os
import struct
import threading
import zlib
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path


class RecordKind(IntEnum):
    ENQUEUE = 1
    ACK = 2


class JournalCorrupt(Exception):
    pass


@dataclass(frozen=True)
class Record:
    kind: RecordKind
    channel: str
    message_id: str
    timestamp: float
    payload: bytes = b""


def encode(rec: Record) -> bytes:
    ch, mid = rec.channel.encode(), rec.message_id.encode()
    body = (struct.pack(">BH", int(rec.kind), len(ch)) + ch + struct.pack(">H", len(mid)) + mid
            + struct.pack(">dI", rec.timestamp, len(rec.payload)) + rec.payload)
    body += struct.pack(">I", zlib.crc32(body))
    return struct.pack(">I", len(body)) + body


def _decode_body(body: bytes) -> Record:
    crc = struct.unpack(">I", body[-4:])[0]
    data = body[:-4]
    if zlib.crc32(data) != crc:
        raise JournalCorrupt("crc mismatch")
    kind, n = struct.unpack_from(">BH", data, 0)
    pos = 3
    ch = data[pos:pos + n].decode()
    pos += n
    (m,) = struct.unpack_from(">H", data, pos)
    pos += 2
    mid = data[pos:pos + m].decode()
    pos += m
    ts, plen = struct.unpack_from(">dI", data, pos)
    pos += 12
    payload = data[pos:pos + plen]
    if len(payload) != plen or pos + plen != len(data):
        raise JournalCorrupt("payload length mismatch")
    return Record(RecordKind(kind), ch, mid, ts, payload)


def decode_all(blob: bytes) -> list[Record]:
    out, pos = [], 0
    while pos < len(blob):
        if pos + 4 > len(blob):
            break  # torn length prefix
        (n,) = struct.unpack_from(">I", blob, pos)
        end = pos + 4 + n
        if end > len(blob):
            break  # torn record
        try:
            out.append(_decode_body(blob[pos + 4:end]))
        except (JournalCorrupt, struct.error, ValueError, UnicodeDecodeError) as exc:
            if end == len(blob):
                break
            raise JournalCorrupt(f"bad record at offset {pos}: {exc}") from exc
        pos = end
    return out


class Journal:
    """File-backed journal; ``fsync`` forces every append to disk."""

    def __init__(self, path: str | os.PathLike, fsync: bool = False):
        self.path = Path(path)
        self.fsync = fsync
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "ab")

    def append(self, rec: Record) -> None:
        data = encode(rec)
        with self._lock:
            self._fh.write(data)
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())

    def enqueue(self, channel: str, message_id: str, timestamp: float, payload: bytes) -> None:
        self.append(Record(RecordKind.ENQUEUE, channel, message_id, timestamp, payload))

    def ack(self, channel: str, message_id: str, timestamp: float) -> None:
        self.append(Record(RecordKind.ACK, channel, message_id, timestamp))

    def records(self) -> list[Record]:
        with self._lock:
            self._fh.flush()
            return decode_all(self.path.read_bytes())

    def pending(self, channel: str | None = None) -> list[Record]:
        """Enqueue records without a matching ack, in journal order."""
        acked = set()
        recs = self.records()
        for r in recs:
            if r.kind == RecordKind.ACK:
                acked.add((r.channel, r.message_id))
        return [r for r in recs if r.kind == RecordKind.ENQUEUE and (r.channel, r.message_id) not in acked
                and (channel is None or r.channel == channel)]

    def close(self) -> None:
        with self._lock:
            self._fh.close()


class MemoryJournal(Journal):
    """Same record encoding, kept in a bytearray (tests and logical-clock runs)."""

    def __init__(self):  # noqa: D107 - no file
        self.fsync = False
        self._lock = threading.Lock()
        self.buffer = bytearray()

    def append(self, rec: Record) -> None:
        with self._lock:
            self.buffer += encode(rec)

    def records(self) -> list[Record]:
        with self._lock:
            return decode_all(bytes(self.buffer))

    def close(self) -> None:
        pass
