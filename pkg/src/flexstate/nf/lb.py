"""Least-loaded load balancer.

Flow affinity lives in a Map (packed 5-tuple -> server id); per-server
flow counts live in a CounterMap. A new flow goes to the server whose
local load counter is lowest, ties to the lowest index, and bumps that
counter exactly once. Every packet is forwarded, annotated with the chosen
server in the packet's meta field. Because each core balances its own
flow share against its own counters, per-core spread is tight by
construction and the global spread only widens by one flow per core.
"""

from __future__ import annotations

import struct

from ..api import StateContext
from ..errors import BackpressureSignal, EmptyServerList
from ..runtime import Packet

ASSIGN_ID = "flowServer"
LOAD_ID = "load"

_FLOW = struct.Struct("!IIHHB")


class LoadBalancerNF:
    name = "lb"

    def __init__(self, servers=4):
        if isinstance(servers, int):
            servers = [f"srv{i}" for i in range(servers)]
        if not servers:
            raise EmptyServerList("load balancer needs at least one server")
        self.server_ids = [
            s if isinstance(s, bytes) else s.encode("ascii") for s in servers
        ]
        self.assign = None
        self.load = None
        self.flows_assigned = 0
        self.backpressure_drops = 0

    def setup(self, ctx: StateContext) -> None:
        self.assign = ctx.create_map(ASSIGN_ID)
        self.load = ctx.create_counter_map(LOAD_ID)

    def _pick(self) -> bytes:
        get_load = self.load.get
        best = None
        best_load = None
        for server in self.server_ids:
            load = get_load(server)
            if best_load is None or load < best_load:
                best = server
                best_load = load
        return best

    def handle(self, pkt: Packet, ctx: StateContext):
        flow_key = _FLOW.pack(*pkt[:5])
        server = self.assign.get(flow_key)
        if server is None:
            server = self._pick()
            try:
                self.assign.insert_nowait(flow_key, server)
                self.load.add_to_nowait(server, 1)
            except BackpressureSignal:
                self.backpressure_drops += 1
                return None
            self.flows_assigned += 1
        return Packet(
            pkt.src_ip,
            pkt.dst_ip,
            pkt.src_port,
            pkt.dst_port,
            pkt.proto,
            pkt.size,
            server,
        )

    def summary(self) -> dict:
        return {
            "flows_assigned": self.flows_assigned,
            "backpressure_drops": self.backpressure_drops,
            "per_server": {
                server.decode("ascii"): count
                for server, count in sorted(self.load.read_all().items())
            },
        }
