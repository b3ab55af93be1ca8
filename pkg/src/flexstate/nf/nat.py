"""Source NAT with per-core address chunks.

The external pool is a range of (address, port) pairs carved into
contiguous, disjoint chunks, one per core, so cores allocate without
coordinating. Each core keeps its bindings in a Map (packed 5-tuple ->
packed pair) and its allocation cursor in a Counter; both persist, so a
restarted core resumes after its previously allocated entries instead of
double-assigning them.
"""

from __future__ import annotations

import struct

from ..api import StateContext
from ..errors import BackpressureSignal, PoolExhausted
from ..runtime import Packet

BINDINGS_ID = "natBindings"
CURSOR_ID = "natCursor"

# 100.64.0.0/10, the address space reserved for exactly this kind of NAT.
EXTERNAL_BASE = 0x64400000

_FLOW = struct.Struct("!IIHHB")
_PAIR = struct.Struct("!IH")


def pool_entry(index: int) -> tuple[int, int]:
    """(address, port) of pool entry index; 65536 ports per address."""
    return EXTERNAL_BASE + (index >> 16), index & 0xFFFF


def chunk_bounds(pool_size: int, core_id: int, n_cores: int) -> tuple[int, int]:
    """(start, length) of a core's contiguous slice of the pool."""
    base, extra = divmod(pool_size, n_cores)
    start = core_id * base + min(core_id, extra)
    length = base + (1 if core_id < extra else 0)
    return start, length


class NatNF:
    name = "nat"

    def __init__(self, pool_size: int = 65536):
        if pool_size < 1:
            raise ValueError("pool_size must be at least 1")
        self.pool_size = pool_size
        self.bindings = None
        self.cursor = None
        self.chunk_start = 0
        self.chunk_len = 0
        self.exhausted_drops = 0
        self.stability_violations = 0
        self.backpressure_drops = 0
        self._assigned: dict[bytes, bytes] = {}

    def setup(self, ctx: StateContext) -> None:
        self.chunk_start, self.chunk_len = chunk_bounds(
            self.pool_size, ctx.core_id, ctx.n_cores
        )
        self.bindings = ctx.create_map(BINDINGS_ID)
        self.cursor = ctx.create_counter(CURSOR_ID)
        # Bindings that survived a previous run count as our own.
        self._assigned = dict(self.bindings.read_all())

    def _allocate(self) -> int:
        index = self.cursor.read()
        if index >= self.chunk_len:
            raise PoolExhausted(
                f"chunk of {self.chunk_len} entries fully allocated"
            )
        self.cursor.add_nowait(1)
        return self.chunk_start + index

    def handle(self, pkt: Packet, ctx: StateContext):
        flow_key = _FLOW.pack(*pkt[:5])
        pair = self.bindings.get(flow_key)
        if pair is None:
            try:
                entry = self._allocate()
            except PoolExhausted:
                self.exhausted_drops += 1
                return None
            except BackpressureSignal:
                self.backpressure_drops += 1
                return None
            pair = _PAIR.pack(*pool_entry(entry))
            try:
                self.bindings.insert_nowait(flow_key, pair)
            except BackpressureSignal:
                self.backpressure_drops += 1
                return None
            self._assigned[flow_key] = pair
        elif self._assigned.get(flow_key, pair) != pair:
            self.stability_violations += 1
        ext_ip, ext_port = _PAIR.unpack(pair)
        return Packet(
            ext_ip, pkt.dst_ip, ext_port, pkt.dst_port, pkt.proto, pkt.size
        )

    def summary(self) -> dict:
        return {
            "allocated": self.cursor.read(),
            "exhausted_drops": self.exhausted_drops,
            "stability_violations": self.stability_violations,
            "backpressure_drops": self.backpressure_drops,
            "chunk_start": self.chunk_start,
            "chunk_len": self.chunk_len,
        }

    def bindings_snapshot(self) -> dict[bytes, bytes]:
        return self.bindings.read_all()
