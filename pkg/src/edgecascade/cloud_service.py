"""Cloud side of the cascade: full-depth encoding behind a tiny TCP protocol.

A request is one features frame; the response is either a hidden-states
frame or an error frame whose single payload byte is one of the wire
error codes (1 malformed, 2 failed validation, 3 bad version, 4 too large).
The same handler serves in-process virtual links and the TCP server.
"""

from __future__ import annotations

import socketserver
import threading
from dataclasses import dataclass

from . import wire
from .netsim import LEN_PREFIX, MAX_FRAME_BYTES, ConnectionFailed, recv_exact
from .tensors import DType
from .toymodel import ModelConfig, SplitModel, Task, build_split_model, encoder_forward

DEFAULT_MAX_PAYLOAD = 8 * 1024 * 1024


class BindFailed(OSError):
    pass


@dataclass
class ServiceConfig:
    model_configs: dict[Task, ModelConfig]
    host: str = "127.0.0.1"
    port: int = 0
    max_payload_bytes: int = DEFAULT_MAX_PAYLOAD

    def __post_init__(self):
        if not self.model_configs:
            raise ValueError("service needs at least one model config")
        for task, mc in self.model_configs.items():
            if mc.task is not task:
                raise ValueError(f"config under {task.name} is for {mc.task.name}")
            need = _max_request_bytes(mc)
            if need > self.max_payload_bytes:
                raise ValueError(
                    f"max_payload_bytes {self.max_payload_bytes} below the "
                    f"largest legal {task.name} request ({need} bytes)"
                )


def _max_request_bytes(mc: ModelConfig) -> int:
    rows = mc.enc_fixed_len if mc.task is Task.STT else mc.max_src_len
    return wire.frame_length(DType.FP32, (rows, mc.d_model))


class CloudService:
    """Stateless request handler over models built once at startup."""

    def __init__(self, cfg: ServiceConfig):
        self.cfg = cfg
        self.models: dict[Task, SplitModel] = {
            task: build_split_model(mc) for task, mc in cfg.model_configs.items()
        }

    def handle_request(self, frame: bytes) -> bytes:
        task_code = wire.peek_task(frame) or wire.TASK_STT
        if len(frame) > self.cfg.max_payload_bytes:
            return wire.encode_error_frame(task_code, wire.ERR_TOO_LARGE)
        try:
            task_code, kind, t = wire.decode_frame(frame)
        except wire.UnsupportedVersion:
            return wire.encode_error_frame(task_code, wire.ERR_VERSION)
        except wire.WireError:
            return wire.encode_error_frame(task_code, wire.ERR_MALFORMED)
        if kind != wire.KIND_FEATURES:
            return wire.encode_error_frame(task_code, wire.ERR_MALFORMED)

        task = Task(task_code)
        model = self.models.get(task)
        if model is None or not self._valid_features(model.config, t):
            return wire.encode_error_frame(task_code, wire.ERR_SHAPE)
        hs = encoder_forward(model, t, which="cloud")
        return wire.encode_frame(task_code, wire.KIND_HIDDEN_STATES, hs.tensor)

    @staticmethod
    def _valid_features(mc: ModelConfig, t) -> bool:
        if t.dtype is not DType.FP32 or t.ndim != 2 or t.shape[1] != mc.d_model:
            return False
        rows = t.shape[0]
        if mc.task is Task.STT:
            return rows == mc.enc_fixed_len
        return 1 <= rows <= mc.max_src_len


class _FrameHandler(socketserver.BaseRequestHandler):
    def handle(self):
        service: CloudService = self.server.cascade_service
        sock = self.request
        while True:
            try:
                head = recv_exact(sock, LEN_PREFIX.size)
            except ConnectionFailed:
                return
            (length,) = LEN_PREFIX.unpack(head)
            if length > MAX_FRAME_BYTES:
                return
            try:
                frame = recv_exact(sock, length)
            except ConnectionFailed:
                return
            try:
                resp = service.handle_request(frame)
            except Exception:
                resp = wire.encode_error_frame(
                    wire.peek_task(frame) or wire.TASK_STT, wire.ERR_MALFORMED
                )
            try:
                sock.sendall(LEN_PREFIX.pack(len(resp)) + resp)
            except OSError:
                return


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class CloudServer:
    """Threaded TCP wrapper; bind on construction, serve after start()."""

    def __init__(self, cfg: ServiceConfig):
        self.service = CloudService(cfg)
        try:
            self._server = _Server((cfg.host, cfg.port), _FrameHandler)
        except OSError as e:
            raise BindFailed(f"cannot bind {cfg.host}:{cfg.port}: {e}") from e
        self._server.cascade_service = self.service
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return host, port

    def start(self) -> "CloudServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def __enter__(self) -> "CloudServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve(cfg: ServiceConfig) -> None:
    """Blocking entry point for the CLI."""
    server = CloudServer(cfg)
    host, port = server.address
    print(f"cloud service listening on {host}:{port}", flush=True)
    try:
        server._server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server._server.server_close()
