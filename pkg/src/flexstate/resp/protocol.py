"""RESP2 wire encoding.

Commands travel client to server as arrays of bulk strings. Replies come
back as one of five frames, distinguished by their first byte:

    +simple string\r\n
    -error message\r\n
    :integer\r\n
    $<len>\r\n<bytes>\r\n     ($-1 is the nil bulk)
    *<count>\r\n<frames...>   (*-1 is the nil array)

Parsing is strict: CRLF line endings, exact declared lengths, no inline
commands. Anything else raises ProtocolError. EOF in the middle of a frame
raises ConnectionLost; EOF on a frame boundary is a clean close.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConnectionLost, ProtocolError

MAX_BULK = 64 * 1024 * 1024
MAX_ARRAY = 1024 * 1024

CRLF = b"\r\n"


@dataclass(frozen=True)
class RespError:
    """An error reply carried as a value, not raised."""

    message: str


def encode_command(*parts: bytes) -> bytes:
    """Encode one command as an array of bulk strings."""
    out = [b"*%d\r\n" % len(parts)]
    for part in parts:
        out.append(b"$%d\r\n" % len(part))
        out.append(part)
        out.append(CRLF)
    return b"".join(out)


def encode_simple(text: bytes) -> bytes:
    return b"+%s\r\n" % text


def encode_error(message: str) -> bytes:
    return b"-%s\r\n" % message.encode("ascii", "replace")


def encode_integer(value: int) -> bytes:
    return b":%d\r\n" % value


def encode_bulk(value: bytes | None) -> bytes:
    if value is None:
        return b"$-1\r\n"
    return b"$%d\r\n%s\r\n" % (len(value), value)


def encode_array(values: list[bytes | None] | None) -> bytes:
    if values is None:
        return b"*-1\r\n"
    return b"*%d\r\n" % len(values) + b"".join(encode_bulk(v) for v in values)


def _read_line(reader, *, at_boundary: bool = False) -> bytes | None:
    """One CRLF-terminated line without the terminator.

    Returns None for EOF exactly at a frame boundary when at_boundary is
    set; raises otherwise.
    """
    line = reader.readline()
    if not line:
        if at_boundary:
            return None
        raise ConnectionLost("connection closed mid-frame")
    if not line.endswith(b"\n"):
        # readline returns a partial line only when the stream ended.
        raise ConnectionLost("connection closed mid-line")
    if not line.endswith(b"\r\n"):
        raise ProtocolError(f"line without CRLF terminator: {line[:64]!r}")
    return line[:-2]


def _read_exact(reader, n: int) -> bytes:
    data = reader.read(n)
    if data is None or len(data) != n:
        raise ConnectionLost("connection closed mid-bulk")
    return data


def _parse_length(text: bytes, what: str, cap: int) -> int:
    try:
        n = int(text)
    except ValueError:
        raise ProtocolError(f"bad {what} length {text!r}") from None
    if n < -1 or n > cap:
        raise ProtocolError(f"{what} length {n} out of range")
    return n


def _read_bulk(reader, header: bytes) -> bytes | None:
    n = _parse_length(header, "bulk", MAX_BULK)
    if n == -1:
        return None
    data = _read_exact(reader, n)
    if _read_exact(reader, 2) != CRLF:
        raise ProtocolError("bulk payload not CRLF-terminated")
    return data


def read_reply(reader):
    """Parse one reply frame. Errors come back as RespError values."""
    line = _read_line(reader)
    kind, rest = line[:1], line[1:]
    if kind == b"+":
        return rest
    if kind == b"-":
        return RespError(rest.decode("ascii", "replace"))
    if kind == b":":
        try:
            return int(rest)
        except ValueError:
            raise ProtocolError(f"bad integer reply {rest!r}") from None
    if kind == b"$":
        return _read_bulk(reader, rest)
    if kind == b"*":
        n = _parse_length(rest, "array", MAX_ARRAY)
        if n == -1:
            return None
        return [read_reply(reader) for _ in range(n)]
    raise ProtocolError(f"unknown reply type {line[:16]!r}")


def read_command(reader) -> list[bytes] | None:
    """Parse one inbound command (array of bulk strings).

    Returns None when the peer closed the connection between commands.
    """
    line = _read_line(reader, at_boundary=True)
    if line is None:
        return None
    if line[:1] != b"*":
        raise ProtocolError(f"inline commands not accepted: {line[:64]!r}")
    count = _parse_length(line[1:], "array", MAX_ARRAY)
    if count < 1:
        raise ProtocolError("empty command array")
    parts = []
    for _ in range(count):
        header = _read_line(reader)
        if header[:1] != b"$":
            raise ProtocolError(f"command element is not a bulk string: {header!r}")
        part = _read_bulk(reader, header[1:])
        if part is None:
            raise ProtocolError("nil bulk inside a command")
        parts.append(part)
    return parts
