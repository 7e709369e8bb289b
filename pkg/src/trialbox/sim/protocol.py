"""Length-prefixed JSON framing shared by the PACS and clinical simulators.

Each frame is a 4-byte big-endian payload length followed by a UTF-8 JSON
body. Frames are independent per connection, so concurrent sessions never
interleave.
"""

from __future__ import annotations

import json
import socket
import struct

MAX_FRAME = 64 * 1024 * 1024


class ProtocolError(Exception):
    pass


def send_frame(sock: socket.socket, message: dict) -> None:
    body = json.dumps(message).encode("utf-8")
    sock.sendall(struct.pack(">I", len(body)) + body)


def recv_exact(sock: socket.socket, n: int) -> bytes | None:
    """Read exactly n bytes; None on clean EOF at a frame boundary."""
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            if got == 0:
                return None
            raise ProtocolError(f"connection closed mid-frame ({got}/{n} bytes)")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def recv_frame(sock: socket.socket) -> dict | None:
    header = recv_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME:
        raise ProtocolError(f"frame of {length} bytes exceeds limit")
    body = recv_exact(sock, length)
    if body is None:
        raise ProtocolError("connection closed before frame body")
    try:
        message = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"frame body is not JSON: {exc}") from exc
    if not isinstance(message, dict) or "type" not in message:
        raise ProtocolError("frame body must be an object with a 'type' field")
    return message


def request(address: tuple[str, int], message: dict, timeout: float = 10.0) -> dict:
    """One-shot request/response exchange."""
    with socket.create_connection(address, timeout=timeout) as sock:
        send_frame(sock, message)
        reply = recv_frame(sock)
    if reply is None:
        raise ProtocolError("peer closed connection without replying")
    return reply
