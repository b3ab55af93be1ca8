"""In-process store with one flat key space.

Values live in a single dict keyed by the rendered store key. Value shapes
follow string-store conventions: counters are ASCII-decimal strings that
increments parse and rewrite, maps are field hashes, sets and lists are
native. Deleting the last entry of a collection deletes the key.

Batches are all-or-nothing for detectable failures: a validation pass runs
over the batch (tracking running counter values) before anything mutates,
so an overflow in item 7 leaves items 1..6 unapplied.
"""

from __future__ import annotations

import threading

from ..errors import Overflow, TypeConflict
from ..keys import StoreKey, StructureType, key_prefix, parse_key
from ..limits import INT64_MAX, INT64_MIN
from .base import Driver, DriverSession, Mutation, MutationBatch


def _as_int(raw: bytes) -> int:
    try:
        return int(raw)
    except ValueError:
        raise TypeConflict(f"value {raw!r} is not an integer") from None


def _check_int64(value: int) -> int:
    if not INT64_MIN <= value <= INT64_MAX:
        raise Overflow(f"{value} outside signed 64-bit range")
    return value


class FlatStore:
    """Dict-of-values engine. Callers must hold .lock around access."""

    def __init__(self):
        self._data: dict[str, object] = {}
        self.lock = threading.RLock()

    def _typed(self, key: str, want: type):
        cur = self._data.get(key)
        if cur is not None and not isinstance(cur, want):
            raise TypeConflict(f"key {key} holds {type(cur).__name__}")
        return cur

    def set(self, key: str, value: bytes) -> None:
        self._data[key] = value

    def get(self, key: str) -> bytes | None:
        return self._typed(key, bytes)

    def delete(self, key: str) -> int:
        return 0 if self._data.pop(key, None) is None else 1

    def incrby(self, key: str, n: int) -> int:
        cur = self._typed(key, bytes)
        value = _check_int64((0 if cur is None else _as_int(cur)) + n)
        self._data[key] = str(value).encode()
        return value

    def hset(self, key: str, field: bytes, value: bytes) -> None:
        cur = self._typed(key, dict)
        if cur is None:
            cur = self._data[key] = {}
        cur[field] = value

    def hget(self, key: str, field: bytes) -> bytes | None:
        cur = self._typed(key, dict)
        return None if cur is None else cur.get(field)

    def hdel(self, key: str, field: bytes) -> int:
        cur = self._typed(key, dict)
        if cur is None or field not in cur:
            return 0
        del cur[field]
        if not cur:
            del self._data[key]
        return 1

    def hincrby(self, key: str, field: bytes, n: int) -> int:
        cur = self._typed(key, dict)
        if cur is None:
            cur = self._data[key] = {}
        value = _check_int64(_as_int(cur.get(field, b"0")) + n)
        cur[field] = str(value).encode()
        return value

    def hgetall(self, key: str) -> dict[bytes, bytes]:
        cur = self._typed(key, dict)
        return {} if cur is None else dict(cur)

    def sadd(self, key: str, member: bytes) -> int:
        cur = self._typed(key, set)
        if cur is None:
            cur = self._data[key] = set()
        if member in cur:
            return 0
        cur.add(member)
        return 1

    def srem(self, key: str, member: bytes) -> int:
        cur = self._typed(key, set)
        if cur is None or member not in cur:
            return 0
        cur.discard(member)
        if not cur:
            del self._data[key]
        return 1

    def smembers(self, key: str) -> set[bytes]:
        cur = self._typed(key, set)
        return set() if cur is None else set(cur)

    def rpush(self, key: str, value: bytes) -> int:
        cur = self._typed(key, list)
        if cur is None:
            cur = self._data[key] = []
        cur.append(value)
        return len(cur)

    def lrange(self, key: str, start: int, stop: int) -> list[bytes]:
        cur = self._typed(key, list)
        if cur is None:
            return []
        if stop == -1:
            return list(cur[start:])
        return list(cur[start : stop + 1])

    def llen(self, key: str) -> int:
        cur = self._typed(key, list)
        return 0 if cur is None else len(cur)

    def keys(self, prefix: str) -> list[str]:
        return [k for k in self._data if k.startswith(prefix)]

    def items(self):
        return self._data.items()

    def flushall(self) -> None:
        self._data.clear()


class FlatKvsDriver(Driver):
    label = "flatkvs"

    def __init__(self):
        super().__init__()
        self._engine = FlatStore()
        self._applied: dict[int, int] = {}

    def _apply(self, session: DriverSession, batch: MutationBatch) -> None:
        engine = self._engine
        with engine.lock:
            if batch.seq <= self._applied.get(session.session_id, 0):
                return
            self._validate(batch)
            for key, m in batch.items:
                self._apply_one(key, m)
            self._applied[session.session_id] = batch.seq

    def _validate(self, batch: MutationBatch) -> None:
        # Track running counter values so an overflow anywhere in the batch
        # is raised before the first item mutates the store.
        engine = self._engine
        counters: dict[tuple, int] = {}

        def current(slot, raw):
            if slot in counters:
                return counters[slot]
            return 0 if raw is None else _as_int(raw)

        for key, m in batch.items:
            rendered = key.render()
            if m.kind == "incr":
                slot = (rendered, None)
                counters[slot] = _check_int64(
                    current(slot, engine._data.get(rendered)) + m.value
                )
            elif m.kind == "map_incr":
                slot = (rendered, m.field)
                stored = engine._data.get(rendered)
                raw = stored.get(m.field) if isinstance(stored, dict) else None
                counters[slot] = _check_int64(current(slot, raw) + m.value)
            elif m.kind == "set_blob" and key.structure_type is StructureType.COUNTER:
                counters[(rendered, None)] = _as_int(m.value)
            elif m.kind == "map_set" and key.structure_type is StructureType.COUNTER_MAP:
                counters[(rendered, m.field)] = int(m.value)
            elif m.kind == "delete":
                counters[(rendered, None)] = 0

    def _apply_one(self, key: StoreKey, m: Mutation) -> None:
        engine = self._engine
        rendered = key.render()
        kind = m.kind
        if kind == "incr":
            engine.incrby(rendered, m.value)
        elif kind == "map_set":
            value = m.value
            if key.structure_type is StructureType.COUNTER_MAP:
                value = str(value).encode()
            engine.hset(rendered, m.field, value)
        elif kind == "map_incr":
            engine.hincrby(rendered, m.field, m.value)
        elif kind == "map_del":
            engine.hdel(rendered, m.field)
        elif kind == "set_blob":
            engine.set(rendered, m.value)
        elif kind == "delete":
            engine.delete(rendered)
        elif kind == "list_append":
            engine.rpush(rendered, m.value)
        elif kind == "list_clear":
            engine.delete(rendered)
        elif kind == "set_add":
            engine.sadd(rendered, m.value)
        elif kind == "set_del":
            engine.srem(rendered, m.value)
        else:
            raise TypeConflict(f"unknown mutation kind {kind!r}")

    def _fetch(self, session: DriverSession, key: StoreKey):
        engine = self._engine
        rendered = key.render()
        stype = key.structure_type
        with engine.lock:
            if stype is StructureType.NAME_VALUE:
                return engine.get(rendered)
            if stype is StructureType.COUNTER:
                raw = engine.get(rendered)
                return None if raw is None else _as_int(raw)
            if stype is StructureType.MAP:
                h = engine.hgetall(rendered)
                return h or None
            if stype is StructureType.COUNTER_MAP:
                h = engine.hgetall(rendered)
                return {f: _as_int(v) for f, v in h.items()} or None
            if stype is StructureType.LIST:
                items = engine.lrange(rendered, 0, -1)
                return items or None
            if stype is StructureType.SET:
                members = engine.smembers(rendered)
                return members or None
        raise TypeConflict(f"unknown structure type {stype!r}")

    def _scan(self, session: DriverSession, nf_id: str, instance_id: str):
        prefix = key_prefix(nf_id, instance_id)
        engine = self._engine
        out = []
        with engine.lock:
            for rendered in sorted(engine.keys(prefix)):
                key = parse_key(rendered)
                out.append((key, self._fetch(session, key)))
        return out

    def _wipe(self, session: DriverSession) -> None:
        with self._engine.lock:
            self._engine.flushall()
            self._applied.clear()

    def dump(self) -> dict[str, object]:
        """Copy of the raw keyspace, for inspection and debugging."""
        with self._engine.lock:
            out: dict[str, object] = {}
            for key, value in self._engine.items():
                if isinstance(value, dict):
                    out[key] = dict(value)
                elif isinstance(value, set):
                    out[key] = set(value)
                elif isinstance(value, list):
                    out[key] = list(value)
                else:
                    out[key] = value
            return out
