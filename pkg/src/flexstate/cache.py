"""Per-core write-back cache and its background flusher.

One cache belongs to one worker (core). The worker reads and mutates local
structure state without talking to the store; every mutation also folds
into a small pending log. A flusher thread swaps the log out on a fixed
cadence and applies it to the store through the driver as one batch.
Folding keeps the batch proportional to the number of structures touched,
not the number of calls: a thousand add(1) calls between flushes leave one
incr(+1000).

Waiting calls (the non-_nowait forms) push just their own structure's
pending mutations out of band and return once the store acknowledged them.
If the flusher currently has a batch in flight (or retained after a
failure), the waiting call first waits for that batch so the store sees
one order per structure.

Locking: a single condition/lock pair guards the pending log, the dirty
list, and flush bookkeeping. Live values are only ever touched by the
owning worker thread, so reads take no lock at all.
"""

from __future__ import annotations

import base64
import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field

from .drivers.base import Driver, Mutation, MutationBatch
from .errors import (
    BackpressureSignal,
    ConnectionLost,
    IndexOutOfRange,
    Overflow,
    StoreUnavailable,
    TypeConflict,
)
from .keys import StoreKey, StructureType, build_key, check_structure_id
from .limits import INT64_MAX, INT64_MIN

DEFAULT_BACKPRESSURE_LIMIT = 2**20
RETRY_BASE_S = 0.001
RETRY_CAP_S = 0.100
SYNC_TIMEOUT_S = 5.0
CREATE_RETRIES = 3


def _check_int64(value: int) -> int:
    if not INT64_MIN <= value <= INT64_MAX:
        raise Overflow(f"{value} outside signed 64-bit range")
    return value


# Structure state. Mutators fold into the pending slot(s) and return the
# net change in pending-slot count; collect() drains the slots into a
# batch. The invariant throughout: replaying the pending slots on top of
# the store's current value yields exactly `live`.


class _CounterState:
    __slots__ = ("key", "live", "pend")
    stype = StructureType.COUNTER

    def __init__(self, key: StoreKey, snapshot):
        self.key = key
        self.live = snapshot  # int or None (absent)
        self.pend = None  # None | ("set", v) | ("incr", d) | ("del",)

    def set_value(self, value: int) -> int:
        _check_int64(value)
        delta = 0 if self.pend else 1
        self.pend = ("set", value)
        self.live = value
        return delta

    def add(self, n: int) -> int:
        value = _check_int64((self.live or 0) + n)
        p = self.pend
        if p is None:
            self.pend = ("incr", n)
            delta = 1
        else:
            if p[0] == "del":
                self.pend = ("set", value)
            else:
                self.pend = (p[0], p[1] + n)
            delta = 0
        self.live = value
        return delta

    def drop(self) -> int:
        delta = 0 if self.pend else 1
        self.pend = ("del",)
        self.live = None
        return delta

    def collect(self, batch: MutationBatch) -> int:
        p = self.pend
        if p is None:
            return 0
        if p[0] == "set":
            batch.add(self.key, Mutation("set_blob", None, b"%d" % p[1]))
        elif p[0] == "incr":
            batch.add(self.key, Mutation("incr", None, p[1]))
        else:
            batch.add(self.key, Mutation("delete"))
        self.pend = None
        return 1


class _NameValueState:
    __slots__ = ("key", "live", "pend")
    stype = StructureType.NAME_VALUE

    def __init__(self, key: StoreKey, snapshot):
        self.key = key
        self.live = snapshot  # bytes or None
        self.pend = None  # None | ("set", v) | ("del",)

    def set_value(self, value: bytes) -> int:
        delta = 0 if self.pend else 1
        self.pend = ("set", value)
        self.live = value
        return delta

    def drop(self) -> int:
        delta = 0 if self.pend else 1
        self.pend = ("del",)
        self.live = None
        return delta

    def collect(self, batch: MutationBatch) -> int:
        p = self.pend
        if p is None:
            return 0
        if p[0] == "set":
            batch.add(self.key, Mutation("set_blob", None, p[1]))
        else:
            batch.add(self.key, Mutation("delete"))
        self.pend = None
        return 1


class _MapState:
    __slots__ = ("key", "live", "pend", "reset")
    stype = StructureType.MAP

    def __init__(self, key: StoreKey, snapshot):
        self.key = key
        self.live: dict = dict(snapshot) if snapshot else {}
        self.pend: dict = {}  # field -> ("set", v) | ("del",)
        self.reset = False

    def _slots(self) -> int:
        return len(self.pend) + (1 if self.reset else 0)

    def insert(self, fieldname: bytes, value) -> int:
        delta = 0 if fieldname in self.pend else 1
        self.pend[fieldname] = ("set", value)
        self.live[fieldname] = value
        return delta

    def remove(self, fieldname: bytes) -> int:
        delta = 0 if fieldname in self.pend else 1
        self.pend[fieldname] = ("del",)
        self.live.pop(fieldname, None)
        return delta

    def drop(self) -> int:
        delta = 1 - self._slots()
        self.pend.clear()
        self.reset = True
        self.live.clear()
        return delta

    def collect(self, batch: MutationBatch) -> int:
        count = self._slots()
        if count == 0:
            return 0
        if self.reset:
            batch.add(self.key, Mutation("delete"))
            self.reset = False
        for fieldname, op in self.pend.items():
            if op[0] == "set":
                batch.add(self.key, Mutation("map_set", fieldname, op[1]))
            else:
                batch.add(self.key, Mutation("map_del", fieldname))
        self.pend.clear()
        return count


class _CounterMapState:
    __slots__ = ("key", "live", "pend", "reset")
    stype = StructureType.COUNTER_MAP

    def __init__(self, key: StoreKey, snapshot):
        self.key = key
        self.live: dict = dict(snapshot) if snapshot else {}
        self.pend: dict = {}  # field -> ("set", v) | ("incr", d) | ("del",)
        self.reset = False

    def _slots(self) -> int:
        return len(self.pend) + (1 if self.reset else 0)

    def add_to(self, fieldname: bytes, n: int) -> int:
        value = _check_int64(self.live.get(fieldname, 0) + n)
        p = self.pend.get(fieldname)
        if p is None:
            self.pend[fieldname] = ("incr", n)
            delta = 1
        else:
            if p[0] == "del":
                self.pend[fieldname] = ("set", value)
            else:
                self.pend[fieldname] = (p[0], p[1] + n)
            delta = 0
        self.live[fieldname] = value
        return delta

    def insert(self, fieldname: bytes, value: int) -> int:
        _check_int64(value)
        delta = 0 if fieldname in self.pend else 1
        self.pend[fieldname] = ("set", value)
        self.live[fieldname] = value
        return delta

    def remove(self, fieldname: bytes) -> int:
        delta = 0 if fieldname in self.pend else 1
        self.pend[fieldname] = ("del",)
        self.live.pop(fieldname, None)
        return delta

    def drop(self) -> int:
        delta = 1 - self._slots()
        self.pend.clear()
        self.reset = True
        self.live.clear()
        return delta

    def collect(self, batch: MutationBatch) -> int:
        count = self._slots()
        if count == 0:
            return 0
        if self.reset:
            batch.add(self.key, Mutation("delete"))
            self.reset = False
        for fieldname, op in self.pend.items():
            if op[0] == "set":
                batch.add(self.key, Mutation("map_set", fieldname, op[1]))
            elif op[0] == "incr":
                batch.add(self.key, Mutation("map_incr", fieldname, op[1]))
            else:
                batch.add(self.key, Mutation("map_del", fieldname))
        self.pend.clear()
        return count


class _ListState:
    __slots__ = ("key", "live", "appends", "reset")
    stype = StructureType.LIST

    def __init__(self, key: StoreKey, snapshot):
        self.key = key
        self.live: list = list(snapshot) if snapshot else []
        self.appends: list = []
        self.reset = False

    def push_back(self, value) -> int:
        self.appends.append(value)
        self.live.append(value)
        return 1

    def clear(self) -> int:
        delta = 1 - (len(self.appends) + (1 if self.reset else 0))
        self.appends.clear()
        self.reset = True
        self.live.clear()
        return delta

    def collect(self, batch: MutationBatch) -> int:
        count = len(self.appends) + (1 if self.reset else 0)
        if count == 0:
            return 0
        if self.reset:
            batch.add(self.key, Mutation("list_clear"))
            self.reset = False
        for value in self.appends:
            batch.add(self.key, Mutation("list_append", None, value))
        self.appends.clear()
        return count


class _SetState:
    __slots__ = ("key", "live", "pend")
    stype = StructureType.SET

    def __init__(self, key: StoreKey, snapshot):
        self.key = key
        self.live: set = set(snapshot) if snapshot else set()
        self.pend: dict = {}  # member -> "add" | "del"

    def insert(self, value: bytes) -> int:
        delta = 0 if value in self.pend else 1
        self.pend[value] = "add"
        self.live.add(value)
        return delta

    def remove(self, value: bytes) -> int:
        delta = 0 if value in self.pend else 1
        self.pend[value] = "del"
        self.live.discard(value)
        return delta

    def collect(self, batch: MutationBatch) -> int:
        count = len(self.pend)
        if count == 0:
            return 0
        for member, op in self.pend.items():
            kind = "set_add" if op == "add" else "set_del"
            batch.add(self.key, Mutation(kind, None, member))
        self.pend.clear()
        return count


_STATE_BY_TYPE = {
    StructureType.COUNTER: _CounterState,
    StructureType.NAME_VALUE: _NameValueState,
    StructureType.MAP: _MapState,
    StructureType.COUNTER_MAP: _CounterMapState,
    StructureType.LIST: _ListState,
    StructureType.SET: _SetState,
}


@dataclass
class FlushStats:
    ticks: int = 0
    empty_ticks: int = 0
    flushes_attempted: int = 0
    flushes_succeeded: int = 0
    mutations_flushed: int = 0
    retries: int = 0
    sync_flushes: int = 0
    drain_mutations: int = 0
    last_error: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)

    def merged_with(self, other: "FlushStats") -> "FlushStats":
        out = FlushStats(**self.__dict__)
        for key, value in other.__dict__.items():
            if isinstance(value, int):
                setattr(out, key, getattr(out, key) + value)
        if other.last_error:
            out.last_error = other.last_error
        return out


class CoreCache:
    """Write-back cache for the structures of one core."""

    def __init__(
        self,
        nf_id: str,
        instance_id: str,
        core_id: int,
        driver: Driver,
        *,
        flush_interval_us: int = 1000,
        inject_latency_us: int = 0,
        backpressure_limit: int = DEFAULT_BACKPRESSURE_LIMIT,
        start_flusher: bool = True,
    ):
        self.nf_id = nf_id
        self.instance_id = instance_id
        self.core_id = core_id
        self.driver = driver
        self.backpressure_limit = backpressure_limit

        self._registry: dict[str, object] = {}
        self._dirty: dict[object, None] = {}
        self._pending_total = 0
        self._cond = threading.Condition()

        # Flush bookkeeping, guarded by _cond.
        self._swap_counter = 0
        self._inflight_swap: int | None = None
        self._acked_swap = 0
        self._retained_len = 0

        self.worker_session = driver.connect(inject_latency_us=inject_latency_us)
        self.flusher_session = driver.connect(inject_latency_us=inject_latency_us)
        self.stats = FlushStats()
        self.flusher = Flusher(self, flush_interval_us)
        if start_flusher:
            self.flusher.start()

    # Structure lifecycle

    def create_structure(self, stype: StructureType, structure_id: str):
        check_structure_id(structure_id)
        with self._cond:
            existing = self._registry.get(structure_id)
            if existing is not None:
                if existing.stype is not stype:
                    raise TypeConflict(
                        f"id {structure_id!r} already open as {existing.stype.token}"
                    )
                return existing
        key = build_key(self.nf_id, self.instance_id, self.core_id, stype, structure_id)
        snapshot = self._fetch_with_retry(key)
        state = _STATE_BY_TYPE[stype](key, snapshot)
        with self._cond:
            raced = self._registry.setdefault(structure_id, state)
        return raced

    def _fetch_with_retry(self, key: StoreKey):
        delay = RETRY_BASE_S
        for attempt in range(CREATE_RETRIES):
            try:
                return self.worker_session.fetch(key)
            except ConnectionLost as exc:
                if attempt == CREATE_RETRIES - 1:
                    raise StoreUnavailable(f"cannot hydrate {key}: {exc}") from exc
                time.sleep(delay)
                delay = min(delay * 2, RETRY_CAP_S)

    # Mutation entry point used by the handles.

    def apply_op(self, state, method, *args, wait: bool = False):
        with self._cond:
            if (
                self._pending_total + self._retained_len
                >= self.backpressure_limit
            ):
                raise BackpressureSignal(
                    f"{self._pending_total + self._retained_len} pending mutations"
                )
            delta = method(state, *args)
            if delta:
                self._pending_total += delta
            self._dirty[state] = None
            if not wait:
                return
            batch = MutationBatch()
            self._pending_total -= state.collect(batch)
            self._dirty.pop(state, None)
            barrier = self._inflight_swap
        self._sync_apply(batch, barrier)

    def _sync_apply(self, batch: MutationBatch, barrier: int | None) -> None:
        deadline = time.monotonic() + SYNC_TIMEOUT_S
        if barrier is not None:
            with self._cond:
                while self._acked_swap < barrier:
                    remaining = deadline - time.monotonic()
                    if remaining <= 0:
                        raise StoreUnavailable(
                            "timed out waiting for in-flight flush"
                        )
                    self._cond.wait(remaining)
        if not batch:
            return
        delay = RETRY_BASE_S
        while True:
            try:
                self.worker_session.apply(batch)
                self.stats.sync_flushes += 1
                return
            except ConnectionLost as exc:
                if time.monotonic() + delay > deadline:
                    raise StoreUnavailable(f"waiting call failed: {exc}") from exc
                time.sleep(delay)
                delay = min(delay * 2, RETRY_CAP_S)

    # Flusher side.

    def take_pending(self) -> tuple[MutationBatch, int | None]:
        """Swap the pending log out as one batch. Called by the flusher."""
        with self._cond:
            if not self._dirty:
                return MutationBatch(), None
            batch = MutationBatch()
            taken = 0
            for state in self._dirty:
                taken += state.collect(batch)
            self._dirty.clear()
            self._pending_total -= taken
            if not batch:
                return batch, None
            self._swap_counter += 1
            self._inflight_swap = self._swap_counter
            return batch, self._swap_counter

    def note_flush_outcome(self, swap_id: int, ok: bool, retained_len: int) -> None:
        with self._cond:
            if ok:
                self._acked_swap = swap_id
                self._inflight_swap = None
                self._retained_len = 0
            else:
                self._retained_len = retained_len
            self._cond.notify_all()

    @property
    def pending_mutations(self) -> int:
        return self._pending_total

    # Shutdown.

    def drain(self, timeout_s: float = 10.0) -> FlushStats:
        """Stop the flusher, push everything left, close sessions."""
        self.flusher.stop()
        retained = self.flusher.retained_batch
        final, swap_id = self.take_pending()
        try:
            for batch in (retained, final):
                if batch:
                    self._drain_batch(batch, timeout_s)
                    self.stats.drain_mutations += len(batch)
            if swap_id is not None:
                self.note_flush_outcome(swap_id, True, 0)
        finally:
            self.worker_session.close()
            self.flusher_session.close()
        return self.stats

    def _drain_batch(self, batch: MutationBatch, timeout_s: float) -> None:
        deadline = time.monotonic() + timeout_s
        delay = RETRY_BASE_S
        while True:
            try:
                self.flusher_session.apply(batch)
                return
            except ConnectionLost as exc:
                self.stats.retries += 1
                self.stats.last_error = str(exc)
                if time.monotonic() + delay > deadline:
                    path = self._dump_batch(batch)
                    raise StoreUnavailable(
                        f"drain failed, mutations kept in {path}: {exc}"
                    ) from exc
                time.sleep(delay)
                delay = min(delay * 2, RETRY_CAP_S)

    def _dump_batch(self, batch: MutationBatch) -> str:
        def enc(value):
            if isinstance(value, bytes):
                return {"b64": base64.b64encode(value).decode("ascii")}
            return value

        rows = [
            {
                "key": key.render(),
                "kind": m.kind,
                "field": enc(m.field),
                "value": enc(m.value),
            }
            for key, m in batch.items
        ]
        fd, path = tempfile.mkstemp(
            prefix=f"flexstate-drain-{self.nf_id}-{self.core_id}-", suffix=".json"
        )
        with os.fdopen(fd, "w") as fh:
            json.dump(rows, fh, indent=1)
        return path

    def flush_now(self) -> None:
        """Run one flusher tick inline. Test hook."""
        self.flusher.tick_once()


class Flusher:
    """Fixed-cadence background flush thread.

    Deadlines advance by exactly one interval per tick, so a tick that
    starts late is followed by catch-up ticks and the long-run tick count
    tracks wall clock. After a store failure the failed batch is retained
    and retried with exponential backoff; the deadline is re-based on
    recovery instead of replaying the outage's missed ticks.
    """

    def __init__(self, cache: CoreCache, interval_us: int):
        self.cache = cache
        self.interval_s = interval_us / 1_000_000
        self.retained_batch: MutationBatch | None = None
        self._retained_swap: int | None = None
        self._backoff = RETRY_BASE_S
        self._stop = threading.Event()
        self._tick_lock = threading.Lock()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        thread = threading.Thread(
            target=self._run,
            name=f"flusher-core{self.cache.core_id}",
            daemon=True,
        )
        self._thread = thread
        thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None

    def _run(self) -> None:
        interval = self.interval_s
        deadline = time.monotonic() + interval
        while True:
            delay = deadline - time.monotonic()
            if delay > 0:
                if self._stop.wait(delay):
                    return
            elif self._stop.is_set():
                return
            deadline += interval
            if not self.tick_once():
                # Store down: back off, then resume a fresh cadence.
                if self._stop.wait(self._backoff):
                    return
                self._backoff = min(self._backoff * 2, RETRY_CAP_S)
                deadline = time.monotonic() + interval
            else:
                self._backoff = RETRY_BASE_S

    def tick_once(self) -> bool:
        """One cadence tick. Returns False when the store failed."""
        with self._tick_lock:
            cache = self.cache
            stats = cache.stats
            stats.ticks += 1
            if self.retained_batch is not None:
                if not self._try_apply(self.retained_batch, self._retained_swap):
                    return False
                self.retained_batch = None
                self._retained_swap = None
            batch, swap_id = cache.take_pending()
            if not batch:
                stats.empty_ticks += 1
                return True
            if not self._try_apply(batch, swap_id):
                self.retained_batch = batch
                self._retained_swap = swap_id
                return False
            return True

    def _try_apply(self, batch: MutationBatch, swap_id: int | None) -> bool:
        cache = self.cache
        stats = cache.stats
        stats.flushes_attempted += 1
        try:
            cache.flusher_session.apply(batch)
        except ConnectionLost as exc:
            stats.retries += 1
            stats.last_error = str(exc)
            cache.note_flush_outcome(swap_id, False, len(batch))
            return False
        stats.flushes_succeeded += 1
        stats.mutations_flushed += len(batch)
        cache.note_flush_outcome(swap_id, True, 0)
        return True
