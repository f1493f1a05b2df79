"""Framed message transport over TCP sockets.

Frames are read by fixed-size header first, then exactly the advertised
payload plus the CRC trailer, so arbitrary write fragmentation on the
stream is invisible to the decoder. The server side runs one reader
thread per accepted connection, all feeding a single inbox queue; the
protocol state machine stays single-threaded.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading

from .codec import decode_message, encode_message
from .frame import DEFAULT_MAX_PAYLOAD, DecodeError, FRAME_MAGIC, FRAME_VERSION, HEADER_SIZE

DEFAULT_PORT = 7878

_HEADER = struct.Struct("<4sHBI")


class ConnectionClosed(RuntimeError):
    pass


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionClosed("peer closed mid-frame" if buf else "peer closed")
        buf.extend(chunk)
    return bytes(buf)


def send_message(sock: socket.socket, msg) -> None:
    sock.sendall(encode_message(msg))


def recv_message(sock: socket.socket, max_payload: int = DEFAULT_MAX_PAYLOAD):
    header = _recv_exact(sock, HEADER_SIZE)
    magic, version, _msg_type, length = _HEADER.unpack(header)
    if magic != FRAME_MAGIC:
        raise DecodeError("bad_magic", repr(magic))
    if version != FRAME_VERSION:
        raise DecodeError("unsupported_version", str(version))
    if length > max_payload:
        raise DecodeError("frame_too_large", f"{length} bytes exceeds cap {max_payload}")
    rest = _recv_exact(sock, length + 4)
    return decode_message(header + rest, max_payload=max_payload)


class TcpConnection:
    """Client-side blocking connection."""

    def __init__(self, sock: socket.socket) -> None:
        self._sock = sock

    def send(self, msg) -> None:
        send_message(self._sock, msg)

    def recv(self):
        return recv_message(self._sock)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def connect(host: str, port: int, timeout: float = 30.0) -> TcpConnection:
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.settimeout(None)
    return TcpConnection(sock)


class TcpServer:
    """Accepts up to `expected` connections; frames land in one inbox.

    Inbox items are (conn_id, message) or (conn_id, None) on disconnect.
    """

    def __init__(self, host: str, port: int, expected: int,
                 max_payload: int = DEFAULT_MAX_PAYLOAD) -> None:
        self._listener = socket.create_server((host, port))
        self._expected = expected
        self._max_payload = max_payload
        self.inbox: "queue.Queue[tuple[int, object]]" = queue.Queue()
        self._conns: dict[int, socket.socket] = {}
        self._lock = threading.Lock()
        self._accept_thread: threading.Thread | None = None
        self._stopping = False

    @property
    def port(self) -> int:
        return self._listener.getsockname()[1]

    def start(self) -> None:
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        for conn_id in range(self._expected):
            try:
                sock, _addr = self._listener.accept()
            except OSError:
                return  # listener closed during shutdown
            with self._lock:
                self._conns[conn_id] = sock
            reader = threading.Thread(target=self._read_loop, args=(conn_id, sock), daemon=True)
            reader.start()

    def _read_loop(self, conn_id: int, sock: socket.socket) -> None:
        while True:
            try:
                msg = recv_message(sock, max_payload=self._max_payload)
            except (ConnectionClosed, DecodeError, OSError):
                if not self._stopping:
                    self.inbox.put((conn_id, None))
                return
            self.inbox.put((conn_id, msg))

    def send(self, conn_id: int, msg) -> None:
        with self._lock:
            sock = self._conns.get(conn_id)
        if sock is None:
            raise ConnectionClosed(f"no connection {conn_id}")
        send_message(sock, msg)

    def close(self) -> None:
        self._stopping = True
        self._listener.close()
        with self._lock:
            socks = list(self._conns.values())
            self._conns.clear()
        for sock in socks:
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            sock.close()
