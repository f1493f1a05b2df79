"""In-process duplex message channel with optional fault injection.

Each endpoint owns a FIFO inbox fed by its peer; delivery order per link
is preserved. With a drop policy, each send consults a seeded stream and
a "dropped" message closes the link instead of delivering, which drives
the protocol's abort path deterministically. `encoded=True` routes every
message through the wire codec, exercising the byte path end to end.
"""

from __future__ import annotations

import queue
from typing import Optional

from ..rng import Rng
from .codec import decode_message, encode_message

_CLOSED = object()


class LinkClosedError(RuntimeError):
    """The peer endpoint is gone (closed or dropped the link)."""


class ChannelEndpoint:
    def __init__(self, encoded: bool = False) -> None:
        self._inbox: "queue.Queue[object]" = queue.Queue()
        self._peer: Optional["ChannelEndpoint"] = None
        self._closed = False
        self._encoded = encoded
        self._drop_rng: Rng | None = None
        self._drop_prob = 0.0

    def _attach(self, peer: "ChannelEndpoint") -> None:
        self._peer = peer

    def set_drop_policy(self, rng: Rng, drop_prob: float) -> None:
        self._drop_rng = rng
        self._drop_prob = drop_prob

    def send(self, msg) -> None:
        if self._closed or self._peer is None or self._peer._closed:
            raise LinkClosedError("send on a closed link")
        if self._drop_rng is not None and self._drop_rng.random() < self._drop_prob:
            self.close()
            return
        payload = encode_message(msg) if self._encoded else msg
        self._peer._inbox.put(payload)

    def recv(self, timeout: float | None = None):
        try:
            item = self._inbox.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no message within timeout") from None
        if item is _CLOSED:
            self._inbox.put(_CLOSED)  # keep the closed state observable
            raise LinkClosedError("peer closed the link")
        return decode_message(item) if self._encoded else item

    def poll(self):
        """Non-blocking receive; None when the inbox is empty."""
        try:
            item = self._inbox.get_nowait()
        except queue.Empty:
            return None
        if item is _CLOSED:
            self._inbox.put(_CLOSED)
            raise LinkClosedError("peer closed the link")
        return decode_message(item) if self._encoded else item

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            if self._peer is not None:
                self._peer._inbox.put(_CLOSED)


def channel_pair(encoded: bool = False) -> tuple[ChannelEndpoint, ChannelEndpoint]:
    a, b = ChannelEndpoint(encoded), ChannelEndpoint(encoded)
    a._attach(b)
    b._attach(a)
    return a, b
