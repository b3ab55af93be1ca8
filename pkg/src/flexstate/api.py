"""Public state API handed to network functions.

A StateContext belongs to one core. Structures opened through it are
backed by that core's write-back cache: reads are local, waiting mutations
(`set`, `add`, ...) return once the store acknowledged the write, and
`*_nowait` forms return immediately and ride the next background flush.

All values are bytes; counters and CounterMap entries are signed 64-bit
integers. Size limits: structure ids 128 B, map keys 1 KiB, elements
1 KiB, whole-value blobs 64 KiB. An absent counter (or CounterMap entry)
reads as 0; an entry explicitly written to 0 is still present, which
read_all()/has() can distinguish.
"""

from __future__ import annotations

from .cache import (
    CoreCache,
    _CounterMapState,
    _CounterState,
    _ListState,
    _MapState,
    _NameValueState,
    _SetState,
)
from .errors import IndexOutOfRange, KeyTooLarge, Overflow, ValueTooLarge
from .keys import StructureType
from .limits import (
    INT64_MAX,
    INT64_MIN,
    MAX_BLOB_BYTES,
    MAX_ELEMENT_BYTES,
    MAX_MAP_KEY_BYTES,
)


def _check_blob(value: bytes) -> bytes:
    if not isinstance(value, (bytes, bytearray)):
        raise TypeError(f"value must be bytes, not {type(value).__name__}")
    if len(value) > MAX_BLOB_BYTES:
        raise ValueTooLarge(f"blob of {len(value)} bytes exceeds {MAX_BLOB_BYTES}")
    return bytes(value)


def _check_element(value: bytes) -> bytes:
    if not isinstance(value, (bytes, bytearray)):
        raise TypeError(f"value must be bytes, not {type(value).__name__}")
    if len(value) > MAX_ELEMENT_BYTES:
        raise ValueTooLarge(
            f"element of {len(value)} bytes exceeds {MAX_ELEMENT_BYTES}"
        )
    return bytes(value)


def _check_map_key(key: bytes) -> bytes:
    if not isinstance(key, (bytes, bytearray)):
        raise TypeError(f"map key must be bytes, not {type(key).__name__}")
    if len(key) > MAX_MAP_KEY_BYTES:
        raise KeyTooLarge(f"map key of {len(key)} bytes exceeds {MAX_MAP_KEY_BYTES}")
    return bytes(key)


def _check_int(value: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise TypeError(f"expected int, not {type(value).__name__}")
    if not INT64_MIN <= value <= INT64_MAX:
        raise Overflow(f"{value} outside signed 64-bit range")
    return value


class _Handle:
    __slots__ = ("_cache", "_state")

    def __init__(self, cache: CoreCache, state):
        self._cache = cache
        self._state = state

    @property
    def structure_id(self) -> str:
        return self._state.key.structure_id

    @property
    def key(self):
        return self._state.key


class CounterHandle(_Handle):
    def read(self) -> int:
        live = self._state.live
        return 0 if live is None else live

    def exists(self) -> bool:
        return self._state.live is not None

    def set(self, value: int) -> None:
        self._cache.apply_op(self._state, _CounterState.set_value, _check_int(value), wait=True)

    def set_nowait(self, value: int) -> None:
        self._cache.apply_op(self._state, _CounterState.set_value, _check_int(value))

    def add(self, n: int = 1) -> None:
        self._cache.apply_op(self._state, _CounterState.add, _check_int(n), wait=True)

    def add_nowait(self, n: int = 1) -> None:
        self._cache.apply_op(self._state, _CounterState.add, _check_int(n))

    def delete(self) -> None:
        self._cache.apply_op(self._state, _CounterState.drop, wait=True)

    def delete_nowait(self) -> None:
        self._cache.apply_op(self._state, _CounterState.drop)


class NameValueHandle(_Handle):
    def get(self) -> bytes | None:
        return self._state.live

    def create(self, value: bytes) -> None:
        self._cache.apply_op(self._state, _NameValueState.set_value, _check_blob(value), wait=True)

    def create_nowait(self, value: bytes) -> None:
        self._cache.apply_op(self._state, _NameValueState.set_value, _check_blob(value))

    update = create
    update_nowait = create_nowait

    def delete(self) -> None:
        self._cache.apply_op(self._state, _NameValueState.drop, wait=True)

    def delete_nowait(self) -> None:
        self._cache.apply_op(self._state, _NameValueState.drop)


class MapHandle(_Handle):
    def get(self, key: bytes) -> bytes | None:
        return self._state.live.get(_check_map_key(key))

    def has(self, key: bytes) -> bool:
        return _check_map_key(key) in self._state.live

    def read_all(self) -> dict[bytes, bytes]:
        return dict(self._state.live)

    def size(self) -> int:
        return len(self._state.live)

    def insert(self, key: bytes, value: bytes) -> None:
        self._cache.apply_op(
            self._state, _MapState.insert, _check_map_key(key), _check_element(value), wait=True
        )

    def insert_nowait(self, key: bytes, value: bytes) -> None:
        self._cache.apply_op(
            self._state, _MapState.insert, _check_map_key(key), _check_element(value)
        )

    def remove(self, key: bytes) -> None:
        self._cache.apply_op(self._state, _MapState.remove, _check_map_key(key), wait=True)

    def remove_nowait(self, key: bytes) -> None:
        self._cache.apply_op(self._state, _MapState.remove, _check_map_key(key))

    def delete(self) -> None:
        self._cache.apply_op(self._state, _MapState.drop, wait=True)

    def delete_nowait(self) -> None:
        self._cache.apply_op(self._state, _MapState.drop)


class CounterMapHandle(_Handle):
    def get(self, key: bytes) -> int:
        return self._state.live.get(_check_map_key(key), 0)

    def has(self, key: bytes) -> bool:
        return _check_map_key(key) in self._state.live

    def read_all(self) -> dict[bytes, int]:
        return dict(self._state.live)

    def size(self) -> int:
        return len(self._state.live)

    def add_to(self, key: bytes, n: int) -> None:
        self._cache.apply_op(
            self._state, _CounterMapState.add_to, _check_map_key(key), _check_int(n), wait=True
        )

    def add_to_nowait(self, key: bytes, n: int) -> None:
        self._cache.apply_op(
            self._state, _CounterMapState.add_to, _check_map_key(key), _check_int(n)
        )

    def insert(self, key: bytes, value: int) -> None:
        self._cache.apply_op(
            self._state, _CounterMapState.insert, _check_map_key(key), _check_int(value), wait=True
        )

    def insert_nowait(self, key: bytes, value: int) -> None:
        self._cache.apply_op(
            self._state, _CounterMapState.insert, _check_map_key(key), _check_int(value)
        )

    def remove(self, key: bytes) -> None:
        self._cache.apply_op(self._state, _CounterMapState.remove, _check_map_key(key), wait=True)

    def remove_nowait(self, key: bytes) -> None:
        self._cache.apply_op(self._state, _CounterMapState.remove, _check_map_key(key))

    def delete(self) -> None:
        self._cache.apply_op(self._state, _CounterMapState.drop, wait=True)

    def delete_nowait(self) -> None:
        self._cache.apply_op(self._state, _CounterMapState.drop)


class ListHandle(_Handle):
    def read(self, index: int) -> bytes:
        try:
            if index < 0:
                raise IndexError
            return self._state.live[index]
        except IndexError:
            raise IndexOutOfRange(
                f"index {index} outside [0, {len(self._state.live)})"
            ) from None

    def length(self) -> int:
        return len(self._state.live)

    def read_all(self) -> list[bytes]:
        return list(self._state.live)

    def push_back(self, value: bytes) -> None:
        self._cache.apply_op(self._state, _ListState.push_back, _check_element(value), wait=True)

    def push_back_nowait(self, value: bytes) -> None:
        self._cache.apply_op(self._state, _ListState.push_back, _check_element(value))

    def clear(self) -> None:
        self._cache.apply_op(self._state, _ListState.clear, wait=True)

    def clear_nowait(self) -> None:
        self._cache.apply_op(self._state, _ListState.clear)


class SetHandle(_Handle):
    def contains(self, value: bytes) -> bool:
        return _check_element(value) in self._state.live

    def size(self) -> int:
        return len(self._state.live)

    def read_all(self) -> set[bytes]:
        return set(self._state.live)

    def insert(self, value: bytes) -> None:
        self._cache.apply_op(self._state, _SetState.insert, _check_element(value), wait=True)

    def insert_nowait(self, value: bytes) -> None:
        self._cache.apply_op(self._state, _SetState.insert, _check_element(value))

    def remove(self, value: bytes) -> None:
        self._cache.apply_op(self._state, _SetState.remove, _check_element(value), wait=True)

    def remove_nowait(self, value: bytes) -> None:
        self._cache.apply_op(self._state, _SetState.remove, _check_element(value))


_HANDLE_BY_TYPE = {
    StructureType.COUNTER: CounterHandle,
    StructureType.NAME_VALUE: NameValueHandle,
    StructureType.MAP: MapHandle,
    StructureType.COUNTER_MAP: CounterMapHandle,
    StructureType.LIST: ListHandle,
    StructureType.SET: SetHandle,
}


class StateContext:
    """Per-core entry point an NF uses to open structures."""

    def __init__(self, cache: CoreCache, n_cores: int = 1):
        self.cache = cache
        self.n_cores = n_cores

    @property
    def core_id(self) -> int:
        return self.cache.core_id

    @property
    def nf_id(self) -> str:
        return self.cache.nf_id

    @property
    def instance_id(self) -> str:
        return self.cache.instance_id

    def create_structure(self, stype: StructureType, structure_id: str):
        state = self.cache.create_structure(stype, structure_id)
        return _HANDLE_BY_TYPE[stype](self.cache, state)

    def create_counter(self, structure_id: str) -> CounterHandle:
        return self.create_structure(StructureType.COUNTER, structure_id)

    def create_name_value(self, structure_id: str) -> NameValueHandle:
        return self.create_structure(StructureType.NAME_VALUE, structure_id)

    def create_map(self, structure_id: str) -> MapHandle:
        return self.create_structure(StructureType.MAP, structure_id)

    def create_counter_map(self, structure_id: str) -> CounterMapHandle:
        return self.create_structure(StructureType.COUNTER_MAP, structure_id)

    def create_list(self, structure_id: str) -> ListHandle:
        return self.create_structure(StructureType.LIST, structure_id)

    def create_set(self, structure_id: str) -> SetHandle:
        return self.create_structure(StructureType.SET, structure_id)
