"""Simulated multi-core packet runtime.

A dispatcher thread plays the NIC: it routes each packet to a core by a
deterministic hash of the 5-tuple (same flow, same core, always) and feeds
bounded per-core queues in chunks. Each core is an ordinary thread running
one NF instance over one StateContext. Two feeding modes:

  lossless (default): the dispatcher blocks when a queue is full; every
    packet offered is eventually processed. Used for closed-loop runs
    where exact packet accounting matters.
  timed (duration_s set): the dispatcher drops whole chunks when a queue
    is full and counts them; nothing ever blocks on a slow core.

Either way the books must balance: packets_in == processed + dropped.
"""

from __future__ import annotations

import json
import queue
import threading
import time
import traceback
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

from .api import StateContext
from .cache import CoreCache, FlushStats
from .config import FlexConfig
from .errors import StateError
from . import drivers

MIN_PACKET_SIZE = 54
DEFAULT_PACKET_SIZE = 64
DEFAULT_QUEUE_PACKETS = 65536
DEFAULT_CHUNK_PACKETS = 256

_M64 = (1 << 64) - 1


class Packet(NamedTuple):
    src_ip: int
    dst_ip: int
    src_port: int
    dst_port: int
    proto: int
    size: int = DEFAULT_PACKET_SIZE
    meta: object = None


def make_packet(
    src_ip: int,
    dst_ip: int,
    src_port: int,
    dst_port: int,
    proto: int,
    size: int = DEFAULT_PACKET_SIZE,
) -> Packet:
    """Validating constructor; the bare tuple is for trusted hot paths."""
    if not 0 <= src_ip <= 0xFFFFFFFF or not 0 <= dst_ip <= 0xFFFFFFFF:
        raise ValueError("ip addresses must fit in 32 bits")
    if not 0 <= src_port <= 0xFFFF or not 0 <= dst_port <= 0xFFFF:
        raise ValueError("ports must fit in 16 bits")
    if not 0 <= proto <= 0xFF:
        raise ValueError("protocol must fit in 8 bits")
    if size < MIN_PACKET_SIZE:
        raise ValueError(f"packet size {size} below minimum {MIN_PACKET_SIZE}")
    return Packet(src_ip, dst_ip, src_port, dst_port, proto, size)


def _mix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def rss_hash(flow: tuple, n_cores: int) -> int:
    """Deterministic, well-mixed 5-tuple to core mapping."""
    if n_cores < 1:
        raise ValueError("n_cores must be at least 1")
    src_ip, dst_ip, src_port, dst_port, proto = flow
    hi = (src_ip << 32) | dst_ip
    lo = (src_port << 24) | (dst_port << 8) | proto
    return _mix64(_mix64(hi) ^ lo) % n_cores


@dataclass
class CoreReport:
    core_id: int
    processed: int = 0
    forwarded: int = 0
    nf_dropped: int = 0
    queue_dropped: int = 0
    discarded_after_error: int = 0
    flush: dict = field(default_factory=dict)
    nf_summary: dict = field(default_factory=dict)


@dataclass
class RunReport:
    nf_name: str
    driver_label: str
    cores: int
    packets_in: int
    processed: int
    forwarded: int
    nf_dropped: int
    queue_dropped: int
    duration_s: float
    pps: float
    per_core: list[CoreReport]

    def conservation_ok(self) -> bool:
        return self.packets_in == self.processed + self.queue_dropped

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["per_core"] = [dict(c.__dict__) for c in self.per_core]
        return out

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)


class _Worker(threading.Thread):
    def __init__(
        self,
        pool: "WorkerPool",
        core_id: int,
        inbox: queue.Queue,
        nf_factory: Callable[[], object],
    ):
        super().__init__(name=f"worker-core{core_id}", daemon=True)
        self.pool = pool
        self.core_id = core_id
        self.inbox = inbox
        self.nf_factory = nf_factory
        self.nf = None
        self.cache: CoreCache | None = None
        self.processed = 0
        self.forwarded = 0
        self.nf_dropped = 0
        self.discarded = 0
        self.end_time = 0.0
        self.flush_stats: FlushStats | None = None
        self.error: str | None = None

    def run(self) -> None:
        pool = self.pool
        config = pool.config
        try:
            self.cache = CoreCache(
                config.nf_id,
                config.instance_id,
                self.core_id,
                pool.driver,
                flush_interval_us=config.flush_interval_us,
                inject_latency_us=pool.inject_latency_us,
            )
            ctx = StateContext(self.cache, pool.n_cores)
            self.nf = self.nf_factory()
            self.nf.setup(ctx)
            self._loop(ctx)
        except BaseException:
            self.error = traceback.format_exc()
            self._discard_until_sentinel()
        finally:
            self.end_time = time.perf_counter()
            if self.cache is not None:
                try:
                    self.flush_stats = self.cache.drain()
                except StateError as exc:
                    if self.error is None:
                        self.error = f"drain failed: {exc}"

    def _loop(self, ctx: StateContext) -> None:
        handle = self.nf.handle
        get = self.inbox.get
        processed = forwarded = nf_dropped = 0
        try:
            while True:
                chunk = get()
                if chunk is None:
                    break
                for pkt in chunk:
                    out = handle(pkt, ctx)
                    processed += 1
                    if out is None:
                        nf_dropped += 1
                    else:
                        forwarded += 1
        finally:
            self.processed = processed
            self.forwarded = forwarded
            self.nf_dropped = nf_dropped

    def _discard_until_sentinel(self) -> None:
        while True:
            try:
                chunk = self.inbox.get(timeout=5.0)
            except queue.Empty:
                return
            if chunk is None:
                return
            self.discarded += len(chunk)


class WorkerPool:
    """Dispatcher plus one worker thread per simulated core."""

    def __init__(
        self,
        config: FlexConfig,
        n_cores: int,
        driver=None,
        *,
        queue_packets: int = DEFAULT_QUEUE_PACKETS,
        chunk_packets: int = DEFAULT_CHUNK_PACKETS,
        inject_latency_us: int = 0,
    ):
        if n_cores < 1:
            raise ValueError("n_cores must be at least 1")
        self.config = config
        self.n_cores = n_cores
        self.driver = driver if driver is not None else drivers.from_config(config)
        self.chunk_packets = chunk_packets
        self.queue_chunks = max(1, queue_packets // chunk_packets)
        self.inject_latency_us = inject_latency_us
        self.workers: list[_Worker] = []

    def run(
        self,
        nf_factory: Callable[[], object],
        packets: Iterable[Packet],
        *,
        duration_s: float | None = None,
        nf_name: str = "nf",
    ) -> RunReport:
        n = self.n_cores
        inboxes = [queue.Queue(maxsize=self.queue_chunks) for _ in range(n)]
        self.workers = [
            _Worker(self, core, inboxes[core], nf_factory) for core in range(n)
        ]
        for w in self.workers:
            w.start()

        chunk_size = self.chunk_packets
        lossless = duration_s is None
        route: dict[tuple, int] = {}
        buffers: list[list] = [[] for _ in range(n)]
        queue_dropped = [0] * n
        packets_in = 0
        start = time.perf_counter()
        deadline = None if duration_s is None else start + duration_s

        for pkt in packets:
            flow = pkt[:5]
            core = route.get(flow)
            if core is None:
                core = route[flow] = rss_hash(flow, n)
            buf = buffers[core]
            buf.append(pkt)
            packets_in += 1
            if len(buf) >= chunk_size:
                buffers[core] = []
                if lossless:
                    inboxes[core].put(buf)
                else:
                    try:
                        inboxes[core].put_nowait(buf)
                    except queue.Full:
                        queue_dropped[core] += len(buf)
                if deadline is not None and time.perf_counter() >= deadline:
                    break

        for core, buf in enumerate(buffers):
            if buf:
                if lossless:
                    inboxes[core].put(buf)
                else:
                    try:
                        inboxes[core].put_nowait(buf)
                    except queue.Full:
                        queue_dropped[core] += len(buf)
        for core in range(n):
            inboxes[core].put(None)
        for w in self.workers:
            w.join()

        errors = [w.error for w in self.workers if w.error]
        if errors:
            raise RuntimeError(
                f"{len(errors)} worker(s) failed; first failure:\n{errors[0]}"
            )

        wall = max(w.end_time for w in self.workers) - start
        per_core = []
        for w in self.workers:
            per_core.append(
                CoreReport(
                    core_id=w.core_id,
                    processed=w.processed,
                    forwarded=w.forwarded,
                    nf_dropped=w.nf_dropped,
                    queue_dropped=queue_dropped[w.core_id] + w.discarded,
                    discarded_after_error=w.discarded,
                    flush=w.flush_stats.as_dict() if w.flush_stats else {},
                    nf_summary=self._summary_of(w.nf),
                )
            )
        processed = sum(w.processed for w in self.workers)
        report = RunReport(
            nf_name=nf_name,
            driver_label=getattr(self.driver, "label", "?"),
            cores=n,
            packets_in=packets_in,
            processed=processed,
            forwarded=sum(w.forwarded for w in self.workers),
            nf_dropped=sum(w.nf_dropped for w in self.workers),
            queue_dropped=sum(c.queue_dropped for c in per_core),
            duration_s=wall,
            pps=processed / wall if wall > 0 else 0.0,
            per_core=per_core,
        )
        return report

    @staticmethod
    def _summary_of(nf) -> dict:
        summary = getattr(nf, "summary", None)
        if summary is None:
            return {}
        try:
            return summary()
        except Exception:
            return {}
