"""In-process store organized as keyspaces and per-type tables.

Layout mirrors a wide-column store: one keyspace per (nf, instance, core)
named "nf@instance@core", one table per structure type inside it. Single
valued types keep rows (key1 -> value); collections expand to clustered
rows (key1, key2 -> value): map entries under their field, set members
under the member with an empty payload, list elements under their index.
Counters are integers updated in place; updating an absent counter row
creates it, so increments never need a prior insert.

Keyspaces and tables are created on first write. Batches run a validation
pass (counter overflow, in order) before any row changes.
"""

from __future__ import annotations

import threading

from ..errors import Overflow, TypeConflict
from ..keys import StoreKey, StructureType, check_token, parse_key
from ..limits import INT64_MAX, INT64_MIN
from .base import Driver, DriverSession, Mutation, MutationBatch

_SINGLE_ROW = (StructureType.NAME_VALUE, StructureType.COUNTER)


def _check_int64(value: int) -> int:
    if not INT64_MIN <= value <= INT64_MAX:
        raise Overflow(f"{value} outside signed 64-bit range")
    return value


def _as_int(raw) -> int:
    try:
        return int(raw)
    except (ValueError, TypeError):
        raise TypeConflict(f"value {raw!r} is not an integer") from None


class TableStore:
    """Nested dicts: keyspace -> table -> key1 [-> key2] -> value."""

    def __init__(self):
        self.keyspaces: dict[str, dict[str, dict]] = {}
        self.lock = threading.RLock()

    def table(self, keyspace: str, table: str, create: bool = False) -> dict | None:
        ks = self.keyspaces.get(keyspace)
        if ks is None:
            if not create:
                return None
            ks = self.keyspaces[keyspace] = {}
        t = ks.get(table)
        if t is None and create:
            t = ks[table] = {}
        return t

    def select(self, keyspace: str, table: str, key1: str):
        t = self.table(keyspace, table)
        return None if t is None else t.get(key1)

    def upsert(self, keyspace: str, table: str, key1: str, value) -> None:
        self.table(keyspace, table, create=True)[key1] = value

    def delete(self, keyspace: str, table: str, key1: str) -> None:
        t = self.table(keyspace, table)
        if t is not None:
            t.pop(key1, None)
            self._drop_if_empty(keyspace, table)

    def update_counter(self, keyspace: str, table: str, key1: str, n: int) -> int:
        t = self.table(keyspace, table, create=True)
        value = _check_int64(t.get(key1, 0) + n)
        t[key1] = value
        return value

    def upsert_cell(self, keyspace: str, table: str, key1: str, key2, value) -> None:
        t = self.table(keyspace, table, create=True)
        rows = t.get(key1)
        if rows is None:
            rows = t[key1] = {}
        rows[key2] = value

    def delete_cell(self, keyspace: str, table: str, key1: str, key2) -> None:
        t = self.table(keyspace, table)
        rows = None if t is None else t.get(key1)
        if rows is None:
            return
        rows.pop(key2, None)
        if not rows:
            t.pop(key1)
            self._drop_if_empty(keyspace, table)

    def update_cell_counter(
        self, keyspace: str, table: str, key1: str, key2, n: int
    ) -> int:
        t = self.table(keyspace, table, create=True)
        rows = t.get(key1)
        if rows is None:
            rows = t[key1] = {}
        value = _check_int64(rows.get(key2, 0) + n)
        rows[key2] = value
        return value

    def _drop_if_empty(self, keyspace: str, table: str) -> None:
        ks = self.keyspaces.get(keyspace)
        if ks is not None and table in ks and not ks[table]:
            del ks[table]
            if not ks:
                del self.keyspaces[keyspace]

    def wipe(self) -> None:
        self.keyspaces.clear()


def _keyspace_of(key: StoreKey) -> str:
    return f"{key.nf_id}@{key.instance_id}@{key.core_id}"


class TableStoreDriver(Driver):
    label = "tablestore"

    def __init__(self):
        super().__init__()
        self._engine = TableStore()
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
        engine = self._engine
        counters: dict[tuple, int] = {}

        def current(slot, stored):
            if slot in counters:
                return counters[slot]
            return 0 if stored is None else stored

        for key, m in batch.items:
            ks = _keyspace_of(key)
            token = key.structure_type.token
            if m.kind == "incr":
                slot = (ks, token, key.structure_id, None)
                counters[slot] = _check_int64(
                    current(slot, engine.select(ks, token, key.structure_id)) + m.value
                )
            elif m.kind == "map_incr":
                slot = (ks, token, key.structure_id, m.field)
                rows = engine.select(ks, token, key.structure_id)
                stored = rows.get(m.field) if isinstance(rows, dict) else None
                counters[slot] = _check_int64(current(slot, stored) + m.value)
            elif m.kind == "set_blob" and key.structure_type is StructureType.COUNTER:
                counters[(ks, token, key.structure_id, None)] = _as_int(m.value)
            elif m.kind == "map_set" and key.structure_type is StructureType.COUNTER_MAP:
                counters[(ks, token, key.structure_id, m.field)] = _as_int(m.value)
            elif m.kind == "delete":
                counters[(ks, token, key.structure_id, None)] = 0

    def _apply_one(self, key: StoreKey, m: Mutation) -> None:
        engine = self._engine
        ks = _keyspace_of(key)
        token = key.structure_type.token
        key1 = key.structure_id
        kind = m.kind
        if kind == "incr":
            engine.update_counter(ks, token, key1, m.value)
        elif kind == "map_set":
            value = m.value
            if key.structure_type is StructureType.COUNTER_MAP:
                value = _as_int(value)
            engine.upsert_cell(ks, token, key1, m.field, value)
        elif kind == "map_incr":
            engine.update_cell_counter(ks, token, key1, m.field, m.value)
        elif kind == "map_del":
            engine.delete_cell(ks, token, key1, m.field)
        elif kind == "set_blob":
            value = m.value
            if key.structure_type is StructureType.COUNTER:
                value = _as_int(value)
            engine.upsert(ks, token, key1, value)
        elif kind == "delete":
            engine.delete(ks, token, key1)
        elif kind == "list_append":
            rows = engine.select(ks, token, key1)
            index = 0 if rows is None else len(rows)
            engine.upsert_cell(ks, token, key1, index, m.value)
        elif kind == "list_clear":
            engine.delete(ks, token, key1)
        elif kind == "set_add":
            engine.upsert_cell(ks, token, key1, m.value, b"")
        elif kind == "set_del":
            engine.delete_cell(ks, token, key1, m.value)
        else:
            raise TypeConflict(f"unknown mutation kind {kind!r}")

    def _fetch(self, session: DriverSession, key: StoreKey):
        engine = self._engine
        with engine.lock:
            return self._snapshot(key)

    def _snapshot(self, key: StoreKey):
        engine = self._engine
        ks = _keyspace_of(key)
        stype = key.structure_type
        stored = engine.select(ks, stype.token, key.structure_id)
        if stored is None:
            return None
        if stype in _SINGLE_ROW:
            return stored
        if stype is StructureType.MAP or stype is StructureType.COUNTER_MAP:
            return dict(stored) or None
        if stype is StructureType.SET:
            return set(stored) or None
        if stype is StructureType.LIST:
            return [stored[i] for i in range(len(stored))] or None
        raise TypeConflict(f"unknown structure type {stype!r}")

    def _scan(self, session: DriverSession, nf_id: str, instance_id: str):
        check_token(nf_id, "nf id")
        check_token(instance_id, "instance id")
        engine = self._engine
        want = f"{nf_id}@{instance_id}@"
        out = []
        with engine.lock:
            for ks_name in engine.keyspaces:
                if not ks_name.startswith(want):
                    continue
                for token in engine.keyspaces[ks_name]:
                    for key1 in engine.keyspaces[ks_name][token]:
                        key = parse_key(f"{ks_name}@{token}@{key1}")
                        out.append((key, self._snapshot(key)))
        out.sort(key=lambda pair: pair[0].render())
        return out

    def _wipe(self, session: DriverSession) -> None:
        with self._engine.lock:
            self._engine.wipe()
            self._applied.clear()

    def dump(self) -> dict[str, dict[str, dict]]:
        """Copy of keyspaces and tables, for inspection and debugging."""
        with self._engine.lock:
            out: dict[str, dict[str, dict]] = {}
            for ks_name, tables in self._engine.keyspaces.items():
                out[ks_name] = {
                    t_name: {
                        k1: dict(rows) if isinstance(rows, dict) else rows
                        for k1, rows in table.items()
                    }
                    for t_name, table in tables.items()
                }
            return out
