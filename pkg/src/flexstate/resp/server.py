"""Bundled wire-compatible mini server.

Speaks the RESP2 subset the resp driver emits: SET GET DEL INCRBY HSET
HGET HDEL HINCRBY HGETALL SADD SREM SMEMBERS RPUSH LRANGE LLEN KEYS PING
FLUSHALL. One thread per connection; every command executes under a single
data lock, so individual commands are atomic and commands from one
pipelined batch apply in order.

Storage is this module's own (deliberately not shared with the in-process
drivers): a dict of typed values with string-store semantics, including
counters as ASCII strings, absent-means-zero increments, and dropping a
collection key when its last entry goes.
"""

from __future__ import annotations

import fnmatch
import socket
import threading

from ..errors import BindFailure
from ..limits import INT64_MAX, INT64_MIN
from . import protocol
from .protocol import ProtocolError

_WRONGTYPE = "WRONGTYPE Operation against a key holding the wrong kind of value"
_NOT_INT = "ERR value is not an integer or out of range"
_HASH_NOT_INT = "ERR hash value is not an integer"
_OVERFLOW = "ERR increment or decrement would overflow"


class _Reply(Exception):
    """Error reply raised from a handler; carries the wire message."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


def _int_arg(raw: bytes) -> int:
    try:
        return int(raw)
    except ValueError:
        raise _Reply(_NOT_INT) from None


class MiniRespServer:
    """Loopback store for tests and benchmarks. Not hardened for the open
    internet; it exists so the wire driver has a real socket to talk to."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self._host = host
        self._port = port
        self._db: dict[bytes, object] = {}
        self._data_lock = threading.Lock()
        self._listen_sock: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._conns: list[socket.socket] = []
        self._conns_lock = threading.Lock()
        self._stopping = threading.Event()

    # Lifecycle

    @property
    def port(self) -> int:
        if self._listen_sock is None:
            raise RuntimeError("server not started")
        return self._listen_sock.getsockname()[1]

    @property
    def endpoint(self) -> str:
        return f"{self._host}:{self.port}"

    def start(self) -> "MiniRespServer":
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((self._host, self._port))
        except OSError as exc:
            sock.close()
            raise BindFailure(f"cannot bind {self._host}:{self._port}: {exc}") from exc
        sock.listen(128)
        self._listen_sock = sock
        acceptor = threading.Thread(target=self._accept_loop, daemon=True)
        acceptor.start()
        self._threads.append(acceptor)
        return self

    def stop(self) -> None:
        self._stopping.set()
        if self._listen_sock is not None:
            try:
                # close() alone does not wake a thread parked in accept().
                self._listen_sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                self._listen_sock.close()
            except OSError:
                pass
        self.drop_connections()
        for t in self._threads:
            t.join(timeout=2.0)
        self._threads.clear()

    def drop_connections(self) -> None:
        """Abruptly close every client socket. Exercises client retry paths."""
        with self._conns_lock:
            conns, self._conns = self._conns, []
        for c in conns:
            try:
                c.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                c.close()
            except OSError:
                pass

    def __enter__(self) -> "MiniRespServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _accept_loop(self) -> None:
        assert self._listen_sock is not None
        while not self._stopping.is_set():
            try:
                conn, _addr = self._listen_sock.accept()
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._conns_lock:
                self._conns.append(conn)
            t = threading.Thread(target=self._serve, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _serve(self, conn: socket.socket) -> None:
        reader = conn.makefile("rb")
        try:
            while not self._stopping.is_set():
                try:
                    command = protocol.read_command(reader)
                except ProtocolError as exc:
                    try:
                        conn.sendall(protocol.encode_error(f"ERR Protocol error: {exc}"))
                    except OSError:
                        pass
                    return
                except Exception:
                    return
                if command is None:
                    return
                conn.sendall(self._dispatch(command))
        except OSError:
            pass
        finally:
            try:
                reader.close()
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass

    # Command execution

    def _dispatch(self, command: list[bytes]) -> bytes:
        name = command[0].upper().decode("ascii", "replace")
        handler = _HANDLERS.get(name)
        if handler is None:
            return protocol.encode_error(f"ERR unknown command '{name}'")
        lo, hi = _ARITY[name]
        argc = len(command) - 1
        if argc < lo or (hi is not None and argc > hi):
            return protocol.encode_error(
                f"ERR wrong number of arguments for '{name.lower()}' command"
            )
        with self._data_lock:
            try:
                return handler(self, command[1:])
            except _Reply as exc:
                return protocol.encode_error(exc.message)

    def _typed(self, key: bytes, want: type):
        value = self._db.get(key)
        if value is not None and not isinstance(value, want):
            raise _Reply(_WRONGTYPE)
        return value

    def _cmd_ping(self, args: list[bytes]) -> bytes:
        if args:
            return protocol.encode_bulk(args[0])
        return protocol.encode_simple(b"PONG")

    def _cmd_set(self, args: list[bytes]) -> bytes:
        self._db[args[0]] = args[1]
        return protocol.encode_simple(b"OK")

    def _cmd_get(self, args: list[bytes]) -> bytes:
        return protocol.encode_bulk(self._typed(args[0], bytes))

    def _cmd_del(self, args: list[bytes]) -> bytes:
        removed = 0
        for key in args:
            if self._db.pop(key, None) is not None:
                removed += 1
        return protocol.encode_integer(removed)

    def _cmd_incrby(self, args: list[bytes]) -> bytes:
        key, delta = args[0], _int_arg(args[1])
        raw = self._typed(key, bytes)
        if raw is None:
            current = 0
        else:
            try:
                current = int(raw)
            except ValueError:
                raise _Reply(_NOT_INT) from None
        value = current + delta
        if not INT64_MIN <= value <= INT64_MAX:
            raise _Reply(_OVERFLOW)
        self._db[key] = b"%d" % value
        return protocol.encode_integer(value)

    def _hash(self, key: bytes, create: bool) -> dict | None:
        value = self._typed(key, dict)
        if value is None and create:
            value = self._db[key] = {}
        return value

    def _cmd_hset(self, args: list[bytes]) -> bytes:
        h = self._hash(args[0], create=True)
        added = 0 if args[1] in h else 1
        h[args[1]] = args[2]
        return protocol.encode_integer(added)

    def _cmd_hget(self, args: list[bytes]) -> bytes:
        h = self._hash(args[0], create=False)
        return protocol.encode_bulk(None if h is None else h.get(args[1]))

    def _cmd_hdel(self, args: list[bytes]) -> bytes:
        key = args[0]
        h = self._hash(key, create=False)
        removed = 0
        if h is not None:
            for field in args[1:]:
                if field in h:
                    del h[field]
                    removed += 1
            if not h:
                del self._db[key]
        return protocol.encode_integer(removed)

    def _cmd_hincrby(self, args: list[bytes]) -> bytes:
        key, field, delta = args[0], args[1], _int_arg(args[2])
        h = self._hash(key, create=True)
        raw = h.get(field, b"0")
        try:
            current = int(raw)
        except ValueError:
            if not h:
                del self._db[key]
            raise _Reply(_HASH_NOT_INT) from None
        value = current + delta
        if not INT64_MIN <= value <= INT64_MAX:
            if not h:
                del self._db[key]
            raise _Reply(_OVERFLOW)
        h[field] = b"%d" % value
        return protocol.encode_integer(value)

    def _cmd_hgetall(self, args: list[bytes]) -> bytes:
        h = self._hash(args[0], create=False)
        flat: list[bytes] = []
        if h:
            for field, value in h.items():
                flat.append(field)
                flat.append(value)
        return protocol.encode_array(flat)

    def _set_value(self, key: bytes, create: bool) -> set | None:
        value = self._typed(key, set)
        if value is None and create:
            value = self._db[key] = set()
        return value

    def _cmd_sadd(self, args: list[bytes]) -> bytes:
        s = self._set_value(args[0], create=True)
        added = 0
        for member in args[1:]:
            if member not in s:
                s.add(member)
                added += 1
        return protocol.encode_integer(added)

    def _cmd_srem(self, args: list[bytes]) -> bytes:
        key = args[0]
        s = self._set_value(key, create=False)
        removed = 0
        if s is not None:
            for member in args[1:]:
                if member in s:
                    s.discard(member)
                    removed += 1
            if not s:
                del self._db[key]
        return protocol.encode_integer(removed)

    def _cmd_smembers(self, args: list[bytes]) -> bytes:
        s = self._set_value(args[0], create=False)
        return protocol.encode_array(sorted(s) if s else [])

    def _list(self, key: bytes, create: bool) -> list | None:
        value = self._typed(key, list)
        if value is None and create:
            value = self._db[key] = []
        return value

    def _cmd_rpush(self, args: list[bytes]) -> bytes:
        lst = self._list(args[0], create=True)
        lst.extend(args[1:])
        return protocol.encode_integer(len(lst))

    def _cmd_lrange(self, args: list[bytes]) -> bytes:
        lst = self._list(args[0], create=False)
        start, stop = _int_arg(args[1]), _int_arg(args[2])
        if lst is None:
            return protocol.encode_array([])
        n = len(lst)
        if start < 0:
            start = max(n + start, 0)
        if stop < 0:
            stop = n + stop
        if stop < 0 or start > stop:
            return protocol.encode_array([])
        return protocol.encode_array(lst[start : min(stop, n - 1) + 1])

    def _cmd_llen(self, args: list[bytes]) -> bytes:
        lst = self._list(args[0], create=False)
        return protocol.encode_integer(0 if lst is None else len(lst))

    def _cmd_keys(self, args: list[bytes]) -> bytes:
        pattern = args[0].decode("latin-1")
        matches = [
            k
            for k in self._db
            if fnmatch.fnmatchcase(k.decode("latin-1"), pattern)
        ]
        return protocol.encode_array(sorted(matches))

    def _cmd_flushall(self, args: list[bytes]) -> bytes:
        self._db.clear()
        return protocol.encode_simple(b"OK")


_HANDLERS = {
    "PING": MiniRespServer._cmd_ping,
    "SET": MiniRespServer._cmd_set,
    "GET": MiniRespServer._cmd_get,
    "DEL": MiniRespServer._cmd_del,
    "INCRBY": MiniRespServer._cmd_incrby,
    "HSET": MiniRespServer._cmd_hset,
    "HGET": MiniRespServer._cmd_hget,
    "HDEL": MiniRespServer._cmd_hdel,
    "HINCRBY": MiniRespServer._cmd_hincrby,
    "HGETALL": MiniRespServer._cmd_hgetall,
    "SADD": MiniRespServer._cmd_sadd,
    "SREM": MiniRespServer._cmd_srem,
    "SMEMBERS": MiniRespServer._cmd_smembers,
    "RPUSH": MiniRespServer._cmd_rpush,
    "LRANGE": MiniRespServer._cmd_lrange,
    "LLEN": MiniRespServer._cmd_llen,
    "KEYS": MiniRespServer._cmd_keys,
    "FLUSHALL": MiniRespServer._cmd_flushall,
}

# (minimum argument count, maximum or None for unbounded)
_ARITY = {
    "PING": (0, 1),
    "SET": (2, 2),
    "GET": (1, 1),
    "DEL": (1, None),
    "INCRBY": (2, 2),
    "HSET": (3, 3),
    "HGET": (2, 2),
    "HDEL": (2, None),
    "HINCRBY": (3, 3),
    "HGETALL": (1, 1),
    "SADD": (2, None),
    "SREM": (2, None),
    "SMEMBERS": (1, 1),
    "RPUSH": (2, None),
    "LRANGE": (3, 3),
    "LLEN": (1, 1),
    "KEYS": (1, 1),
    "FLUSHALL": (0, 0),
}
