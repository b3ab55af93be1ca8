"""Reference network functions.

An NF is any object with setup(ctx), handle(packet, ctx) -> Packet | None,
and optionally summary() -> dict. One instance runs per core; cross-core
results come from the read-side combiners, not shared objects.

This package deliberately never imports a driver: NFs see only the state
API, which is what makes them portable across stores.
"""

from __future__ import annotations

from typing import Callable

from .combine import (
    combine_counter_maps,
    combine_counters,
    merge_maps,
    per_core_counter_maps,
    per_core_counters,
)
from .counter import CounterAsyncNF, CounterSyncNF
from .lb import LoadBalancerNF
from .nat import NatNF

NF_REGISTRY: dict[str, type] = {
    CounterSyncNF.name: CounterSyncNF,
    CounterAsyncNF.name: CounterAsyncNF,
    NatNF.name: NatNF,
    LoadBalancerNF.name: LoadBalancerNF,
}


def known_nfs() -> frozenset[str]:
    return frozenset(NF_REGISTRY)


def make_nf_factory(name: str, **params) -> Callable[[], object]:
    cls = NF_REGISTRY.get(name)
    if cls is None:
        raise KeyError(f"unknown nf {name!r}; known: {sorted(NF_REGISTRY)}")
    cls(**params)  # fail fast on bad params, before threads spawn
    return lambda: cls(**params)


__all__ = [
    "NF_REGISTRY",
    "known_nfs",
    "make_nf_factory",
    "CounterSyncNF",
    "CounterAsyncNF",
    "NatNF",
    "LoadBalancerNF",
    "combine_counters",
    "combine_counter_maps",
    "merge_maps",
    "per_core_counters",
    "per_core_counter_maps",
]
