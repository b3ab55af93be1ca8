"""Driver speaking RESP2 to a networked store.

Each session owns one TCP connection. Batches are pipelined in chunks:
commands go out together, replies are read back in order, and every reply
consumed advances a per-batch acknowledgement count. When the connection
dies mid-batch the session remembers how many commands were acknowledged;
a retry of the same batch reconnects and resends only the unacknowledged
tail. A command whose reply was in flight when the connection died may be
applied twice; the protocol subset has no sequence numbers, so that window
cannot be closed from the client side.
"""

from __future__ import annotations

import socket

from ..config import parse_endpoint
from ..errors import (
    ConfigSyntaxError,
    ConnectionLost,
    Overflow,
    ProtocolError,
    TypeConflict,
)
from ..keys import StoreKey, StructureType, key_prefix, parse_key
from .base import Driver, DriverSession, Mutation, MutationBatch
from ..resp import protocol
from ..resp.protocol import RespError

_PIPELINE = 256
_CONNECT_TIMEOUT_S = 5.0


def _raise_reply(error: RespError):
    message = error.message
    if "WRONGTYPE" in message or "not an integer" in message:
        raise TypeConflict(message)
    if "overflow" in message:
        raise Overflow(message)
    raise ProtocolError(f"unexpected error reply: {message}")


def _encode_mutation(rendered: bytes, stype: StructureType, m: Mutation) -> bytes:
    kind = m.kind
    if kind == "incr":
        return protocol.encode_command(b"INCRBY", rendered, b"%d" % m.value)
    if kind == "map_set":
        value = m.value
        if stype is StructureType.COUNTER_MAP:
            value = b"%d" % value
        return protocol.encode_command(b"HSET", rendered, m.field, value)
    if kind == "map_incr":
        return protocol.encode_command(b"HINCRBY", rendered, m.field, b"%d" % m.value)
    if kind == "map_del":
        return protocol.encode_command(b"HDEL", rendered, m.field)
    if kind == "set_blob":
        return protocol.encode_command(b"SET", rendered, m.value)
    if kind == "delete":
        return protocol.encode_command(b"DEL", rendered)
    if kind == "list_append":
        return protocol.encode_command(b"RPUSH", rendered, m.value)
    if kind == "list_clear":
        return protocol.encode_command(b"DEL", rendered)
    if kind == "set_add":
        return protocol.encode_command(b"SADD", rendered, m.value)
    if kind == "set_del":
        return protocol.encode_command(b"SREM", rendered, m.value)
    raise ProtocolError(f"unknown mutation kind {kind!r}")


class RespSession(DriverSession):
    def __init__(self, driver, session_id, inject_latency_us, address):
        super().__init__(driver, session_id, inject_latency_us)
        self._address = address
        self._sock: socket.socket | None = None
        self._reader = None
        self.acked: dict[int, int] = {}
        self.reconnects = 0

    def ensure_connected(self) -> None:
        if self._sock is not None:
            return
        try:
            sock = socket.create_connection(self._address, timeout=_CONNECT_TIMEOUT_S)
        except OSError as exc:
            raise ConnectionLost(f"connect {self._address}: {exc}") from exc
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.settimeout(_CONNECT_TIMEOUT_S)
        self._sock = sock
        self._reader = sock.makefile("rb")
        self.reconnects += 1

    def drop_link(self) -> None:
        if self._reader is not None:
            try:
                self._reader.close()
            except OSError:
                pass
            self._reader = None
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def exchange(self, commands: list[bytes]) -> list:
        """Pipeline commands in chunks; return one reply per command."""
        self.ensure_connected()
        replies = []
        try:
            for start in range(0, len(commands), _PIPELINE):
                chunk = commands[start : start + _PIPELINE]
                self._sock.sendall(b"".join(chunk))
                for _ in chunk:
                    replies.append(protocol.read_reply(self._reader))
        except (OSError, ConnectionLost) as exc:
            self.drop_link()
            raise ConnectionLost(f"store connection failed: {exc}") from exc
        return replies

    def exchange_counted(self, commands: list[bytes], on_ack) -> None:
        """Like exchange, but report each consumed reply for resumption."""
        self.ensure_connected()
        try:
            for start in range(0, len(commands), _PIPELINE):
                chunk = commands[start : start + _PIPELINE]
                self._sock.sendall(b"".join(chunk))
                for _ in chunk:
                    reply = protocol.read_reply(self._reader)
                    if isinstance(reply, RespError):
                        _raise_reply(reply)
                    on_ack()
        except (OSError, ConnectionLost) as exc:
            self.drop_link()
            raise ConnectionLost(f"store connection failed: {exc}") from exc


class RespDriver(Driver):
    label = "resp"

    def __init__(self, endpoint: str):
        super().__init__()
        address = parse_endpoint(endpoint)
        if address is None:
            raise ConfigSyntaxError("resp driver needs a host:port endpoint")
        self._address = address
        self.endpoint = endpoint

    def _make_session(self, session_id: int, inject_latency_us: int) -> RespSession:
        return RespSession(self, session_id, inject_latency_us, self._address)

    def _apply(self, session: RespSession, batch: MutationBatch) -> None:
        commands = [
            _encode_mutation(key.render().encode("ascii"), key.structure_type, m)
            for key, m in batch.items
        ]
        skip = session.acked.get(batch.seq, 0)
        remaining = commands[skip:]

        def on_ack():
            session.acked[batch.seq] = session.acked.get(batch.seq, 0) + 1

        if remaining:
            session.exchange_counted(remaining, on_ack)
        session.acked.pop(batch.seq, None)

    def _fetch(self, session: RespSession, key: StoreKey):
        rendered = key.render().encode("ascii")
        reply = session.exchange([self._fetch_command(key, rendered)])[0]
        return self._decode_fetch(key.structure_type, reply)

    @staticmethod
    def _fetch_command(key: StoreKey, rendered: bytes) -> bytes:
        stype = key.structure_type
        if stype in (StructureType.NAME_VALUE, StructureType.COUNTER):
            return protocol.encode_command(b"GET", rendered)
        if stype in (StructureType.MAP, StructureType.COUNTER_MAP):
            return protocol.encode_command(b"HGETALL", rendered)
        if stype is StructureType.LIST:
            return protocol.encode_command(b"LRANGE", rendered, b"0", b"-1")
        return protocol.encode_command(b"SMEMBERS", rendered)

    @staticmethod
    def _decode_fetch(stype: StructureType, reply):
        if isinstance(reply, RespError):
            _raise_reply(reply)
        if stype is StructureType.NAME_VALUE:
            return reply
        if stype is StructureType.COUNTER:
            if reply is None:
                return None
            try:
                return int(reply)
            except ValueError:
                raise TypeConflict(f"counter value {reply!r} is not an integer") from None
        if stype is StructureType.MAP:
            pairs = dict(zip(reply[0::2], reply[1::2]))
            return pairs or None
        if stype is StructureType.COUNTER_MAP:
            pairs = {f: int(v) for f, v in zip(reply[0::2], reply[1::2])}
            return pairs or None
        if stype is StructureType.LIST:
            return list(reply) or None
        if stype is StructureType.SET:
            return set(reply) or None
        raise TypeConflict(f"unknown structure type {stype!r}")

    def _scan(self, session: RespSession, nf_id: str, instance_id: str):
        prefix = key_prefix(nf_id, instance_id).encode("ascii")
        reply = session.exchange(
            [protocol.encode_command(b"KEYS", prefix + b"*")]
        )[0]
        if isinstance(reply, RespError):
            _raise_reply(reply)
        keys = [parse_key(raw.decode("ascii")) for raw in reply]
        keys.sort(key=StoreKey.render)
        commands = [
            self._fetch_command(key, key.render().encode("ascii")) for key in keys
        ]
        replies = session.exchange(commands) if commands else []
        out = []
        for key, fetched in zip(keys, replies):
            out.append((key, self._decode_fetch(key.structure_type, fetched)))
        return out

    def _wipe(self, session: RespSession) -> None:
        reply = session.exchange([protocol.encode_command(b"FLUSHALL")])[0]
        if isinstance(reply, RespError):
            _raise_reply(reply)

    def close_session(self, session: RespSession) -> None:
        session.drop_link()
