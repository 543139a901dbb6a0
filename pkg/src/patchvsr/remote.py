"""Remote super-resolution backend: TCP client, the routing backend built on
it, and a mock server for tests and local runs."""

from __future__ import annotations

import socket
import socketserver
import threading

import numpy as np

from .detect import MovementLabel
from .imaging import bicubic_float, nearest_float, round_u8
from .protocol import (
    ERR_INTERNAL,
    ERR_UNSUPPORTED_SCALE,
    PatchPayload,
    ProtocolError,
    RemoteBackendError,
    SrError,
    SrRequest,
    SrResponse,
    decode_message,
    encode_error,
    encode_request,
    encode_response,
)
from .routing import DEFAULT_COST_WEIGHTS, BackendDescriptor


class RemoteClient:
    """One connection, one in-flight request at a time; responses are matched
    to requests by their echoed id."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.host = host
        self.port = port
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._stream = self._sock.makefile("rwb")
        self._next_id = 0

    def close(self):
        try:
            self._stream.close()
        finally:
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def super_resolve(self, patches: list[np.ndarray], frames_per_patch: int, scale: int):
        """Send stacked patch arrays (frames, h, w, c) uint8; returns the SR
        arrays (h*scale, w*scale, c) in request order."""
        payloads = []
        for stack in patches:
            frames, h, w, c = stack.shape
            if frames != frames_per_patch:
                raise ValueError(
                    f"stack carries {frames} frames, request says {frames_per_patch}"
                )
            payloads.append(PatchPayload(h, w, c, stack.tobytes()))
        request = SrRequest(self._next_id, scale, frames_per_patch, tuple(payloads))
        self._next_id += 1
        self._stream.write(encode_request(request))
        self._stream.flush()
        reply = decode_message(self._stream)
        if isinstance(reply, SrError):
            raise RemoteBackendError(reply.code, reply.message, reply.request_id)
        if not isinstance(reply, SrResponse):
            raise ProtocolError("server answered a request with another request")
        if reply.request_id != request.request_id:
            raise ProtocolError(
                f"response id {reply.request_id} does not match request {request.request_id}"
            )
        if len(reply.patches) != len(request.patches):
            raise ProtocolError(
                f"server returned {len(reply.patches)} patches for {len(request.patches)}"
            )
        outputs = []
        for sent, got in zip(request.patches, reply.patches):
            if got.height != sent.height * scale or got.width != sent.width * scale:
                raise ProtocolError(
                    f"response patch {got.width}x{got.height} is not {scale}x the request"
                )
            outputs.append(
                np.frombuffer(got.data, np.uint8).reshape(got.height, got.width, got.channels)
            )
        return outputs


class RemoteBackend:
    """Routing backend that ships each batch to a protocol server.

    Unlike the builtin resamplers this sends the label's full frame slice;
    what the server does with the temporal context is its business."""

    def __init__(
        self,
        label: MovementLabel,
        host: str,
        port: int,
        cost_weight: float | None = None,
        timeout: float = 30.0,
    ):
        weight = DEFAULT_COST_WEIGHTS[label.value] if cost_weight is None else cost_weight
        self.descriptor = BackendDescriptor(
            backend_id=f"remote-{label.value.lower()}@{host}:{port}",
            handles_label=label,
            frames_consumed=label.frames_consumed,
            cost_weight=weight,
            kind="remote",
        )
        self.host = host
        self.port = port
        self.timeout = timeout

    def upscale_batch(self, sequences, scale: int):
        stacks = [
            np.stack([patch.data for patch in seq], axis=0) for seq in sequences
        ]
        with RemoteClient(self.host, self.port, self.timeout) as client:
            return client.super_resolve(stacks, self.descriptor.frames_consumed, scale)


def remote_registry(host: str, port: int, cost_weights: dict | None = None):
    from .routing import BackendRegistry

    weights = dict(DEFAULT_COST_WEIGHTS)
    weights.update(cost_weights or {})
    registry = BackendRegistry()
    for label in MovementLabel:
        registry.register(RemoteBackend(label, host, port, weights[label.value]))
    return registry


def _apply_behavior(request: SrRequest, behavior: str, error_code: int | None) -> bytes:
    if behavior == "error":
        return encode_error(SrError(request.request_id, error_code or ERR_INTERNAL, "forced error"))
    if request.scale not in (1, 2, 4, 8):
        return encode_error(
            SrError(request.request_id, ERR_UNSUPPORTED_SCALE, f"scale {request.scale}")
        )
    out = []
    for patch in request.patches:
        stack = np.frombuffer(patch.data, np.uint8).reshape(
            request.frames_per_patch, patch.height, patch.width, patch.channels
        )
        center = stack[request.frames_per_patch // 2]
        if behavior == "bicubic":
            sr = round_u8(bicubic_float(center, float(request.scale)))
        elif behavior == "nearest":
            sr = nearest_float(center, float(request.scale)).copy()
        else:
            return encode_error(
                SrError(request.request_id, ERR_INTERNAL, f"unknown behavior {behavior}")
            )
        out.append(
            PatchPayload(sr.shape[0], sr.shape[1], sr.shape[2], sr.tobytes())
        )
    return encode_response(SrResponse(request.request_id, tuple(out)))


class _MockHandler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            try:
                message = decode_message(self.rfile)
            except ProtocolError:
                return  # bad magic or truncation: close the connection
            if not isinstance(message, SrRequest):
                return
            try:
                reply = _apply_behavior(
                    message, self.server.behavior, self.server.error_code
                )
            except Exception as exc:  # keep serving other connections
                reply = encode_error(SrError(message.request_id, ERR_INTERNAL, str(exc)))
            try:
                self.wfile.write(reply)
                self.wfile.flush()
            except OSError:
                return


class _MockServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class MockServerHandle:
    def __init__(self, server: _MockServer, thread: threading.Thread):
        self._server = server
        self._thread = thread

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def host(self) -> str:
        return self._server.server_address[0]

    def close(self):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def mock_server(
    port: int = 0,
    behavior: str = "bicubic",
    error_code: int | None = None,
    host: str = "127.0.0.1",
) -> MockServerHandle:
    """Serve the protocol on a background thread; port 0 picks a free one.

    behavior "bicubic" and "nearest" resample the center frame of each patch
    payload (single-image semantics); "error" answers every request with the
    given error code."""
    if behavior not in ("bicubic", "nearest", "error"):
        raise ValueError(f"unknown behavior {behavior!r}")
    server = _MockServer((host, port), _MockHandler)
    server.behavior = behavior
    server.error_code = error_code
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return MockServerHandle(server, thread)
