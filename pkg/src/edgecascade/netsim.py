"""Virtual and real links between edge and cloud.

Virtual links never sleep: transfer cost is computed analytically as
rtt/2 + bytes/bandwidth and the request is handled in-process. Real links
speak length-prefixed frames over TCP with a client-side token bucket
pacing the uplink to the configured bandwidth.
"""

from __future__ import annotations

import socket
import struct
import time
from dataclasses import dataclass

from . import wire

KB = 1024.0

# Token bucket refill horizon; capacity = bandwidth * this.
BUCKET_WINDOW_S = 0.05

LEN_PREFIX = struct.Struct("<I")
MAX_FRAME_BYTES = 64 * 1024 * 1024


class ConnectionFailed(OSError):
    pass


class HandlerError(RuntimeError):
    """Cloud side answered with an error frame."""

    def __init__(self, code: int, frame: bytes):
        super().__init__(f"cloud error code {code}")
        self.code = code
        self.frame = frame


@dataclass(frozen=True)
class LinkSpec:
    bandwidth_bytes_per_s: float
    rtt_s: float = 0.0

    def __post_init__(self):
        if self.bandwidth_bytes_per_s <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth_bytes_per_s}")
        if self.rtt_s < 0:
            raise ValueError(f"rtt must be >= 0, got {self.rtt_s}")

    @classmethod
    def from_kbs(cls, bandwidth_kbs: float, rtt_s: float = 0.0) -> "LinkSpec":
        return cls(bandwidth_kbs * KB, rtt_s)


@dataclass(frozen=True)
class TransferReceipt:
    direction: str  # "up" or "down"
    nbytes: int
    transfer_time_s: float


def transfer_time(nbytes: int, link: LinkSpec) -> float:
    """One-way seconds for a payload: half an RTT plus serialization."""
    if nbytes < 0:
        raise ValueError(f"nbytes must be >= 0, got {nbytes}")
    return link.rtt_s / 2.0 + nbytes / link.bandwidth_bytes_per_s


def _error_from_response(resp: bytes) -> HandlerError | None:
    if wire.peek_kind(resp) != wire.KIND_ERROR:
        return None
    try:
        _task, _kind, t = wire.decode_frame(resp)
        code = wire.error_code(t)
    except wire.WireError:
        code = -1
    return HandlerError(code, resp)


class VirtualLink:
    """In-process round trip with analytic timing.

    handler: bytes -> bytes, normally a cloud service request handler.
    handler_time_s is the declared cloud compute budget reported per
    round trip; it is bookkeeping, not a sleep.
    """

    mode = "virtual"

    def __init__(self, spec: LinkSpec, handler, handler_time_s: float = 0.0):
        if handler_time_s < 0:
            raise ValueError("handler_time_s must be >= 0")
        self.spec = spec
        self.handler = handler
        self.handler_time_s = handler_time_s

    def send_recv(self, frame: bytes) -> tuple[bytes, TransferReceipt, TransferReceipt]:
        up = TransferReceipt("up", len(frame), transfer_time(len(frame), self.spec))
        resp = self.handler(frame)
        down = TransferReceipt("down", len(resp), transfer_time(len(resp), self.spec))
        err = _error_from_response(resp)
        if err is not None:
            raise err
        return resp, up, down

    def close(self) -> None:
        pass


def recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = sock.recv(min(remaining, 65536))
        if not chunk:
            raise ConnectionFailed(f"peer closed with {remaining} bytes outstanding")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def throttled_sendall(
    sock: socket.socket,
    data: bytes,
    bandwidth_bytes_per_s: float,
    bucket_window_s: float = BUCKET_WINDOW_S,
) -> None:
    """Pace writes with a token bucket (1 token = 1 byte).

    Bucket capacity is one window's worth of bandwidth, so short-term
    bursts stay bounded while long-run throughput converges on the cap.
    """
    capacity = max(1.0, bandwidth_bytes_per_s * bucket_window_s)
    tokens = capacity
    last = time.perf_counter()
    sent = 0
    view = memoryview(data)
    while sent < len(data):
        now = time.perf_counter()
        tokens = min(capacity, tokens + (now - last) * bandwidth_bytes_per_s)
        last = now
        if tokens < 1.0:
            time.sleep((1.0 - tokens) / bandwidth_bytes_per_s)
            continue
        n = min(int(tokens), len(data) - sent)
        sock.sendall(view[sent : sent + n])
        tokens -= n
        sent += n


class RealLink:
    """TCP client for the cloud service: u32-le length prefix, then frame.

    One request in flight at a time. Receipt times are measured wall
    clock; the downlink receipt necessarily includes server handling.
    """

    mode = "real"

    def __init__(self, host: str, port: int, spec: LinkSpec, timeout_s: float = 30.0):
        self.spec = spec
        self.handler_time_s = 0.0
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout_s)
        except OSError as e:
            raise ConnectionFailed(f"cannot reach {host}:{port}: {e}") from e
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def send_recv(self, frame: bytes) -> tuple[bytes, TransferReceipt, TransferReceipt]:
        payload = LEN_PREFIX.pack(len(frame)) + frame
        t0 = time.perf_counter()
        throttled_sendall(self._sock, payload, self.spec.bandwidth_bytes_per_s)
        t1 = time.perf_counter()
        (length,) = LEN_PREFIX.unpack(recv_exact(self._sock, LEN_PREFIX.size))
        if length > MAX_FRAME_BYTES:
            raise ConnectionFailed(f"peer announced absurd frame of {length} bytes")
        resp = recv_exact(self._sock, length)
        t2 = time.perf_counter()
        up = TransferReceipt("up", len(frame), t1 - t0)
        down = TransferReceipt("down", len(resp), t2 - t1)
        err = _error_from_response(resp)
        if err is not None:
            raise err
        return resp, up, down

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "RealLink":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
