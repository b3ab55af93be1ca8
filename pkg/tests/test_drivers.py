"""Driver contract: translation shapes, snapshots, batching, retries."""

import time

import pytest

from flexstate.drivers import (
    MutationBatch,
    delete,
    from_config,
    incr,
    known_labels,
    list_append,
    list_clear,
    make_driver,
    map_del,
    map_incr,
    map_set,
    set_add,
    set_blob,
    set_del,
)
from flexstate.config import FlexConfig
from flexstate.drivers.base import UNSET_SEQ
from flexstate.drivers.resp import _encode_mutation
from flexstate.errors import (
    ConfigSyntaxError,
    ConnectionLost,
    Overflow,
    TypeConflict,
    UnknownDriver,
)
from flexstate.keys import StructureType, build_key

K_COUNTER = build_key("nf1", "ins1", 1, StructureType.COUNTER, "counter_id")
K_NV = build_key("nf1", "ins1", 1, StructureType.NAME_VALUE, "N")
K_MAP = build_key("nf1", "ins1", 1, StructureType.MAP, "M")
K_CMAP = build_key("nf1", "ins1", 1, StructureType.COUNTER_MAP, "cm")
K_LIST = build_key("nf1", "ins1", 1, StructureType.LIST, "L")
K_SET = build_key("nf1", "ins1", 1, StructureType.SET, "S")

ALL_TYPES_BATCH = [
    (K_COUNTER, set_blob(b"10")),
    (K_COUNTER, incr(-4)),
    (K_NV, set_blob(b"blob")),
    (K_MAP, map_set(b"k", b"v")),
    (K_CMAP, map_set(b"f", 7)),
    (K_CMAP, map_incr(b"f", -7)),
    (K_LIST, list_append(b"a")),
    (K_LIST, list_append(b"b")),
    (K_SET, set_add(b"m")),
]


def apply_items(session, items):
    batch = MutationBatch(list(items))
    session.apply(batch)
    return batch


@pytest.fixture(params=["flatkvs", "tablestore", "resp"])
def driver(request, mini_server):
    if request.param == "resp":
        drv = make_driver("resp", mini_server.endpoint)
    else:
        drv = make_driver(request.param)
    yield drv
    drv.close()


def test_fetch_snapshots_all_types(driver):
    with driver.connect() as s:
        apply_items(s, ALL_TYPES_BATCH)
        assert s.fetch(K_COUNTER) == 6
        assert s.fetch(K_NV) == b"blob"
        assert s.fetch(K_MAP) == {b"k": b"v"}
        assert s.fetch(K_CMAP) == {b"f": 0}  # zero is present, not absent
        assert s.fetch(K_LIST) == [b"a", b"b"]
        assert s.fetch(K_SET) == {b"m"}


def test_absent_reads_none(driver):
    with driver.connect() as s:
        for key in (K_COUNTER, K_NV, K_MAP, K_CMAP, K_LIST, K_SET):
            assert s.fetch(key) is None


def test_emptied_collections_read_none(driver):
    with driver.connect() as s:
        apply_items(s, ALL_TYPES_BATCH)
        apply_items(
            s,
            [
                (K_MAP, map_del(b"k")),
                (K_CMAP, map_del(b"f")),
                (K_LIST, list_clear()),
                (K_SET, set_del(b"m")),
                (K_NV, delete()),
                (K_COUNTER, delete()),
            ],
        )
        for key in (K_COUNTER, K_NV, K_MAP, K_CMAP, K_LIST, K_SET):
            assert s.fetch(key) is None


def test_counter_delete_then_incr_restarts_at_zero(driver):
    with driver.connect() as s:
        apply_items(s, [(K_COUNTER, incr(9)), (K_COUNTER, delete()), (K_COUNTER, incr(5))])
        assert s.fetch(K_COUNTER) == 5


def test_map_set_overwrites(driver):
    with driver.connect() as s:
        apply_items(s, [(K_MAP, map_set(b"k", b"v1")), (K_MAP, map_set(b"k", b"v2"))])
        assert s.fetch(K_MAP) == {b"k": b"v2"}


def test_list_clear_then_append(driver):
    with driver.connect() as s:
        apply_items(s, [(K_LIST, list_append(b"old"))])
        apply_items(s, [(K_LIST, list_clear()), (K_LIST, list_append(b"new"))])
        assert s.fetch(K_LIST) == [b"new"]


def test_scan_prefix_sorted_and_scoped(driver):
    other = build_key("nf2", "ins1", 0, StructureType.COUNTER, "c")
    with driver.connect() as s:
        apply_items(s, ALL_TYPES_BATCH + [(other, incr(1))])
        got = s.scan_prefix("nf1", "ins1")
        rendered = [key.render() for key, _ in got]
        assert rendered == sorted(rendered)
        assert all(r.startswith("nf1@ins1@") for r in rendered)
        assert len(got) == 6
        by_key = {key: value for key, value in got}
        assert by_key[K_COUNTER] == 6
        assert by_key[K_SET] == {b"m"}


def test_non_numeric_counter_value_is_type_conflict(driver):
    # In-process stores reject the write during validation; string stores
    # accept the SET and reject the arithmetic. Either way nothing corrupts.
    with pytest.raises(TypeConflict):
        with driver.connect() as s:
            apply_items(s, [(K_COUNTER, set_blob(b"abc"))])
            apply_items(s, [(K_COUNTER, incr(1))])


def test_counter_overflow_rejected(driver):
    with driver.connect() as s:
        apply_items(s, [(K_COUNTER, set_blob(b"%d" % (2**63 - 1)))])
        with pytest.raises(Overflow):
            apply_items(s, [(K_COUNTER, incr(1))])
        assert s.fetch(K_COUNTER) == 2**63 - 1


def test_wipe(driver):
    with driver.connect() as s:
        apply_items(s, ALL_TYPES_BATCH)
        driver.wipe(s)
        assert s.scan_prefix("nf1", "ins1") == []


def test_seq_stamped_once_and_preserved(driver):
    with driver.connect() as s:
        batch = MutationBatch([(K_COUNTER, incr(1))])
        assert batch.seq == UNSET_SEQ
        s.apply(batch)
        first = batch.seq
        assert first > 0
        s.apply(batch)  # retry of the same batch keeps its stamp
        assert batch.seq == first
        fresh = apply_items(s, [(K_COUNTER, incr(1))])
        assert fresh.seq > first


def test_closed_session_rejected(driver):
    s = driver.connect()
    s.close()
    with pytest.raises(ConnectionLost):
        s.fetch(K_COUNTER)


def test_session_ids_distinct(driver):
    a = driver.connect()
    b = driver.connect()
    assert a.session_id != b.session_id
    a.close()
    b.close()


# In-process stores track per-session sequence numbers, which turns flusher
# retries into exact-once application.
@pytest.fixture(params=["flatkvs", "tablestore"])
def local_driver(request):
    return make_driver(request.param)


def test_retry_of_applied_batch_is_noop(local_driver):
    with local_driver.connect() as s:
        batch = apply_items(s, [(K_COUNTER, incr(5))])
        s.apply(batch)
        s.apply(batch)
        assert s.fetch(K_COUNTER) == 5


def test_batch_is_atomic_under_validation_failure(local_driver):
    with local_driver.connect() as s:
        apply_items(s, [(K_COUNTER, set_blob(b"%d" % (2**63 - 2)))])
        bad = MutationBatch(
            [
                (K_NV, set_blob(b"should-not-land")),
                (K_COUNTER, incr(5)),  # overflows during validation
            ]
        )
        with pytest.raises(Overflow):
            s.apply(bad)
        assert s.fetch(K_NV) is None
        assert s.fetch(K_COUNTER) == 2**63 - 2


def test_validation_tracks_values_within_batch(local_driver):
    # set(MAX) then incr(-1) then incr(1) stays in range the whole way.
    with local_driver.connect() as s:
        apply_items(
            s,
            [
                (K_COUNTER, set_blob(b"%d" % (2**63 - 1))),
                (K_COUNTER, incr(-1)),
                (K_COUNTER, incr(1)),
            ],
        )
        assert s.fetch(K_COUNTER) == 2**63 - 1


def test_flat_physical_layout():
    drv = make_driver("flatkvs")
    with drv.connect() as s:
        apply_items(s, ALL_TYPES_BATCH)
    assert drv.dump() == {
        "nf1@ins1@1@Counter@counter_id": b"6",
        "nf1@ins1@1@Namevalue@N": b"blob",
        "nf1@ins1@1@Map@M": {b"k": b"v"},
        "nf1@ins1@1@Countermap@cm": {b"f": b"0"},
        "nf1@ins1@1@List@L": [b"a", b"b"],
        "nf1@ins1@1@Set@S": {b"m"},
    }


def test_table_physical_layout():
    drv = make_driver("tablestore")
    with drv.connect() as s:
        apply_items(s, ALL_TYPES_BATCH)
    assert drv.dump() == {
        "nf1@ins1@1": {
            "Counter": {"counter_id": 6},
            "Namevalue": {"N": b"blob"},
            "Map": {"M": {b"k": b"v"}},
            "Countermap": {"cm": {b"f": 0}},
            "List": {"L": {0: b"a", 1: b"b"}},
            "Set": {"S": {b"m": b""}},
        }
    }


def test_table_keyspace_per_core():
    drv = make_driver("tablestore")
    other_core = build_key("nf1", "ins1", 2, StructureType.COUNTER, "c")
    with drv.connect() as s:
        apply_items(s, [(K_COUNTER, incr(1)), (other_core, incr(2))])
    assert set(drv.dump()) == {"nf1@ins1@1", "nf1@ins1@2"}


def enc(key, m):
    return _encode_mutation(key.render().encode("ascii"), key.structure_type, m)


def test_resp_wire_translation_frozen():
    assert enc(K_COUNTER, incr(5)) == (
        b"*3\r\n$6\r\nINCRBY\r\n$29\r\nnf1@ins1@1@Counter@counter_id\r\n$1\r\n5\r\n"
    )
    assert enc(K_COUNTER, set_blob(b"10")) == (
        b"*3\r\n$3\r\nSET\r\n$29\r\nnf1@ins1@1@Counter@counter_id\r\n$2\r\n10\r\n"
    )
    assert enc(K_MAP, map_set(b"f", b"v")) == (
        b"*4\r\n$4\r\nHSET\r\n$16\r\nnf1@ins1@1@Map@M\r\n$1\r\nf\r\n$1\r\nv\r\n"
    )
    assert enc(K_CMAP, map_incr(b"f", -2)) == (
        b"*4\r\n$7\r\nHINCRBY\r\n$24\r\nnf1@ins1@1@Countermap@cm\r\n$1\r\nf\r\n$2\r\n-2\r\n"
    )
    assert enc(K_CMAP, map_set(b"f", 7)) == (
        b"*4\r\n$4\r\nHSET\r\n$24\r\nnf1@ins1@1@Countermap@cm\r\n$1\r\nf\r\n$1\r\n7\r\n"
    )
    assert enc(K_LIST, list_append(b"x")) == (
        b"*3\r\n$5\r\nRPUSH\r\n$17\r\nnf1@ins1@1@List@L\r\n$1\r\nx\r\n"
    )
    assert enc(K_LIST, list_clear()) == b"*2\r\n$3\r\nDEL\r\n$17\r\nnf1@ins1@1@List@L\r\n"
    assert enc(K_SET, set_add(b"m")) == (
        b"*3\r\n$4\r\nSADD\r\n$16\r\nnf1@ins1@1@Set@S\r\n$1\r\nm\r\n"
    )
    assert enc(K_SET, set_del(b"m")) == (
        b"*3\r\n$4\r\nSREM\r\n$16\r\nnf1@ins1@1@Set@S\r\n$1\r\nm\r\n"
    )
    assert enc(K_NV, delete()) == b"*2\r\n$3\r\nDEL\r\n$22\r\nnf1@ins1@1@Namevalue@N\r\n"
    assert enc(K_MAP, map_del(b"f")) == (
        b"*3\r\n$4\r\nHDEL\r\n$16\r\nnf1@ins1@1@Map@M\r\n$1\r\nf\r\n"
    )


def test_resp_reconnects_after_dropped_link(mini_server):
    drv = make_driver("resp", mini_server.endpoint)
    with drv.connect() as s:
        apply_items(s, [(K_COUNTER, incr(3))])
        mini_server.drop_connections()
        time.sleep(0.05)
        # First call after the drop fails; the session reconnects lazily.
        with pytest.raises(ConnectionLost):
            s.fetch(K_COUNTER)
        assert s.fetch(K_COUNTER) == 3
        assert s.reconnects >= 1


def test_resp_retry_resumes_at_reply_count(mini_server):
    # Retries replay only the commands the store never acknowledged. Seed
    # the ack ledger as if a previous attempt died after 4 replies.
    drv = make_driver("resp", mini_server.endpoint)
    with drv.connect() as s:
        batch = MutationBatch([(K_COUNTER, incr(1)) for _ in range(10)])
        batch.seq = s.next_seq()
        s.acked[batch.seq] = 4
        s.apply(batch)
        assert s.fetch(K_COUNTER) == 6
        assert batch.seq not in s.acked  # ledger entry retired on success


def test_resp_large_batch_pipelines(mini_server):
    drv = make_driver("resp", mini_server.endpoint)
    with drv.connect() as s:
        n = 2000  # several pipeline chunks
        apply_items(s, [(K_COUNTER, incr(1)) for _ in range(n)])
        assert s.fetch(K_COUNTER) == n


def test_registry():
    assert known_labels() == frozenset({"flatkvs", "tablestore", "resp"})
    with pytest.raises(UnknownDriver):
        make_driver("nosuch")
    with pytest.raises(ConfigSyntaxError):
        make_driver("flatkvs", "127.0.0.1:6379")
    with pytest.raises(ConfigSyntaxError):
        make_driver("resp", "local")


def test_from_config():
    cfg = FlexConfig(
        nf_id="a", instance_id="b", driver_label="tablestore", endpoint="local"
    )
    drv = from_config(cfg)
    assert drv.label == "tablestore"


def test_latency_injection_delays_apply():
    drv = make_driver("flatkvs")
    with drv.connect(inject_latency_us=20000) as s:
        t0 = time.monotonic()
        apply_items(s, [(K_COUNTER, incr(1))])
        assert time.monotonic() - t0 >= 0.02
