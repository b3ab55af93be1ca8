"""Driver contract: mutation vocabulary, batches, sessions.

A driver translates store-agnostic mutations into the command set of one
backing store. The cache layer and the network functions above it never see
anything store-specific; swapping stores is a config edit.

Mutation kinds and their payloads:

    set_blob(value)        whole-value write (blob bytes; counters use
                           ASCII-decimal bytes so string stores can parse)
    delete()               drop the structure
    incr(n)                add n to a counter (absent counts as 0)
    map_set(field, value)  write one map entry (CounterMap values are ints)
    map_del(field)         drop one map entry
    map_incr(field, n)     add n to one CounterMap entry (absent counts as 0)
    list_append(value)     append one element
    list_clear()           drop all elements
    set_add(value)         add one member
    set_del(value)         drop one member

Batches carry a per-session sequence number, stamped on first apply and
kept across retries so stores that track sequences can discard duplicates.

Snapshots returned by fetch are plain Python values: bytes for blobs, int
for counters, dict[bytes, bytes] for maps, dict[bytes, int] for counter
maps, list[bytes] for lists, set[bytes] for sets, and None when absent. An
empty collection reads back as None on every driver: stores that drop a
hash when its last field goes cannot tell the two apart, so no driver is
allowed to.
"""

from __future__ import annotations

import itertools
import threading
import time
from typing import ClassVar, NamedTuple

from ..errors import ConnectionLost
from ..keys import StoreKey

UNSET_SEQ = -1

KINDS = frozenset(
    {
        "set_blob",
        "delete",
        "incr",
        "map_set",
        "map_del",
        "map_incr",
        "list_append",
        "list_clear",
        "set_add",
        "set_del",
    }
)


class Mutation(NamedTuple):
    kind: str
    field: bytes | None = None
    value: object = None


def set_blob(value: bytes) -> Mutation:
    return Mutation("set_blob", None, value)


def delete() -> Mutation:
    return Mutation("delete")


def incr(n: int) -> Mutation:
    return Mutation("incr", None, n)


def map_set(field: bytes, value) -> Mutation:
    return Mutation("map_set", field, value)


def map_del(field: bytes) -> Mutation:
    return Mutation("map_del", field)


def map_incr(field: bytes, n: int) -> Mutation:
    return Mutation("map_incr", field, n)


def list_append(value: bytes) -> Mutation:
    return Mutation("list_append", None, value)


def list_clear() -> Mutation:
    return Mutation("list_clear")


def set_add(value: bytes) -> Mutation:
    return Mutation("set_add", None, value)


def set_del(value: bytes) -> Mutation:
    return Mutation("set_del", None, value)


class MutationBatch:
    """Ordered mutations addressed to rendered store keys."""

    __slots__ = ("seq", "items")

    def __init__(
        self,
        items: list[tuple[StoreKey, Mutation]] | None = None,
        seq: int = UNSET_SEQ,
    ):
        self.items = items if items is not None else []
        self.seq = seq

    def add(self, key: StoreKey, mutation: Mutation) -> None:
        self.items.append((key, mutation))

    def __len__(self) -> int:
        return len(self.items)

    def __bool__(self) -> bool:
        return bool(self.items)

    def __repr__(self) -> str:
        return f"MutationBatch(seq={self.seq}, items={len(self.items)})"


class DriverSession:
    """One connection-like context. Sequence numbers are per session.

    Callers may go through the bound helpers (session.apply(...)) or call
    the driver directly (driver.apply(session, ...)); both paths are the
    same code. inject_latency_us adds one synthetic round trip of delay to
    every apply/fetch/scan, which is how remote-store latency is modeled
    for in-process stores.
    """

    def __init__(self, driver: "Driver", session_id: int, inject_latency_us: int = 0):
        self.driver = driver
        self.session_id = session_id
        self.inject_latency_s = inject_latency_us / 1_000_000
        self.closed = False
        self._seq = itertools.count(1)

    def next_seq(self) -> int:
        return next(self._seq)

    def apply(self, batch: MutationBatch) -> None:
        self.driver.apply(self, batch)

    def fetch(self, key: StoreKey):
        return self.driver.fetch(self, key)

    def scan_prefix(self, nf_id: str, instance_id: str):
        return self.driver.scan_prefix(self, nf_id, instance_id)

    def close(self) -> None:
        if not self.closed:
            self.driver.close_session(self)
            self.closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class Driver:
    """Base class wiring sessions, latency injection, and seq stamping."""

    label: ClassVar[str] = ""

    def __init__(self):
        self._session_ids = itertools.count(1)
        self._lock = threading.Lock()

    def connect(self, *, inject_latency_us: int = 0) -> DriverSession:
        session = self._make_session(next(self._session_ids), inject_latency_us)
        return session

    def _make_session(self, session_id: int, inject_latency_us: int) -> DriverSession:
        return DriverSession(self, session_id, inject_latency_us)

    def apply(self, session: DriverSession, batch: MutationBatch) -> None:
        self._check_open(session)
        self._pause(session)
        if batch.seq == UNSET_SEQ:
            batch.seq = session.next_seq()
        self._apply(session, batch)

    def fetch(self, session: DriverSession, key: StoreKey):
        self._check_open(session)
        self._pause(session)
        return self._fetch(session, key)

    def scan_prefix(
        self, session: DriverSession, nf_id: str, instance_id: str
    ) -> list[tuple[StoreKey, object]]:
        self._check_open(session)
        self._pause(session)
        return self._scan(session, nf_id, instance_id)

    def wipe(self, session: DriverSession) -> None:
        """Drop every key. Test and bench plumbing, not part of NF flows."""
        self._check_open(session)
        self._wipe(session)

    def close_session(self, session: DriverSession) -> None:
        pass

    def close(self) -> None:
        pass

    @staticmethod
    def _pause(session: DriverSession) -> None:
        if session.inject_latency_s:
            time.sleep(session.inject_latency_s)

    @staticmethod
    def _check_open(session: DriverSession) -> None:
        if session.closed:
            raise ConnectionLost("session is closed")

    # Store-specific parts.

    def _apply(self, session: DriverSession, batch: MutationBatch) -> None:
        raise NotImplementedError

    def _fetch(self, session: DriverSession, key: StoreKey):
        raise NotImplementedError

    def _scan(self, session: DriverSession, nf_id: str, instance_id: str):
        raise NotImplementedError

    def _wipe(self, session: DriverSession) -> None:
        raise NotImplementedError
