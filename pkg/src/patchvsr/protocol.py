"""Length-prefixed binary protocol for networked super-resolution backends.

One TCP connection, strict request/response alternation, little-endian
throughout.  Message layouts (see PROTOCOL.md for the byte-for-byte table):

  request:  magic "BSR1", u8 type=1, u64 request_id, u32 scale,
            u32 frames_per_patch, u32 patch_count, then per patch
            u32 h, u32 w, u32 c, u64 len, raw samples
            (len == h * w * c * frames_per_patch)
  response: magic, u8 type=2, u64 request_id, u32 patch_count, then per patch
            u32 h', u32 w', u32 c, u64 len, raw samples (h' = h*scale)
  error:    magic, u8 type=255, u64 request_id, u32 code, u32 msg_len,
            UTF-8 message
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

MAGIC = b"BSR1"
MSG_REQUEST = 1
MSG_RESPONSE = 2
MSG_ERROR = 255

ERR_MALFORMED = 1
ERR_UNSUPPORTED_SCALE = 2
ERR_INTERNAL = 3


class ProtocolError(Exception):
    """Wire-level failure: bad magic, truncated stream, or an inconsistent frame."""


class RemoteBackendError(Exception):
    """The server answered with an error frame."""

    def __init__(self, code: int, message: str, request_id: int):
        self.code = code
        self.message = message
        self.request_id = request_id
        super().__init__(f"backend error {code} for request {request_id}: {message}")


@dataclass(frozen=True)
class PatchPayload:
    height: int
    width: int
    channels: int
    data: bytes

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.channels < 1:
            raise ValueError("patch dimensions must be positive")


@dataclass(frozen=True)
class SrRequest:
    request_id: int
    scale: int
    frames_per_patch: int
    patches: tuple[PatchPayload, ...]

    def __post_init__(self):
        if self.frames_per_patch not in (1, 3, 5):
            raise ValueError(f"frames_per_patch must be 1, 3, or 5, got {self.frames_per_patch}")
        if self.scale < 1:
            raise ValueError("scale must be positive")
        if not self.patches:
            raise ValueError("request carries no patches")
        first = self.patches[0]
        for patch in self.patches:
            if (patch.height, patch.width, patch.channels) != (
                first.height,
                first.width,
                first.channels,
            ):
                raise ValueError("all patches in one request must share dimensions")
            expected = patch.height * patch.width * patch.channels * self.frames_per_patch
            if len(patch.data) != expected:
                raise ValueError(
                    f"patch payload is {len(patch.data)} bytes, expected {expected}"
                )


@dataclass(frozen=True)
class SrResponse:
    request_id: int
    patches: tuple[PatchPayload, ...]

    def __post_init__(self):
        for patch in self.patches:
            expected = patch.height * patch.width * patch.channels
            if len(patch.data) != expected:
                raise ValueError(
                    f"response payload is {len(patch.data)} bytes, expected {expected}"
                )


@dataclass(frozen=True)
class SrError:
    request_id: int
    code: int
    message: str


def _pack_patch(patch: PatchPayload) -> bytes:
    return (
        struct.pack("<IIIQ", patch.height, patch.width, patch.channels, len(patch.data))
        + patch.data
    )


def encode_request(request: SrRequest) -> bytes:
    head = MAGIC + struct.pack(
        "<BQIII",
        MSG_REQUEST,
        request.request_id,
        request.scale,
        request.frames_per_patch,
        len(request.patches),
    )
    return head + b"".join(_pack_patch(p) for p in request.patches)


def encode_response(response: SrResponse) -> bytes:
    head = MAGIC + struct.pack("<BQI", MSG_RESPONSE, response.request_id, len(response.patches))
    return head + b"".join(_pack_patch(p) for p in response.patches)


def encode_error(error: SrError) -> bytes:
    message = error.message.encode("utf-8")
    return (
        MAGIC
        + struct.pack("<BQII", MSG_ERROR, error.request_id, error.code, len(message))
        + message
    )


def _read_exact(stream, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = stream.read(remaining)
        if not chunk:
            raise ProtocolError(f"truncated stream: wanted {n} bytes, got {n - remaining}")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


MAX_PATCH_BYTES = 1 << 30  # refuses absurd length prefixes before allocating


def _read_patch(stream, frames: int) -> PatchPayload:
    h, w, c, length = struct.unpack("<IIIQ", _read_exact(stream, 20))
    if length > MAX_PATCH_BYTES:
        raise ProtocolError(f"patch payload of {length} bytes exceeds the limit")
    if h < 1 or w < 1 or c < 1 or length != h * w * c * frames:
        raise ProtocolError(
            f"inconsistent patch header: {h}x{w}x{c} x{frames} frames with {length} bytes"
        )
    return PatchPayload(h, w, c, _read_exact(stream, length))


def decode_message(stream):
    """Read one message from a stream with a read(n) method.

    Returns an SrRequest, SrResponse, or SrError; raises ProtocolError on a
    bad magic, truncation, or inconsistent framing."""
    magic = _read_exact(stream, 4)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    (msg_type,) = struct.unpack("<B", _read_exact(stream, 1))
    if msg_type == MSG_REQUEST:
        request_id, scale, frames, count = struct.unpack("<QIII", _read_exact(stream, 20))
        if frames not in (1, 3, 5):
            raise ProtocolError(f"frames_per_patch must be 1, 3, or 5, got {frames}")
        if count < 1:
            raise ProtocolError("request carries no patches")
        patches = tuple(_read_patch(stream, frames) for _ in range(count))
        try:
            return SrRequest(request_id, scale, frames, patches)
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc
    if msg_type == MSG_RESPONSE:
        request_id, count = struct.unpack("<QI", _read_exact(stream, 12))
        patches = tuple(_read_patch(stream, 1) for _ in range(count))
        return SrResponse(request_id, patches)
    if msg_type == MSG_ERROR:
        request_id, code, msg_len = struct.unpack("<QII", _read_exact(stream, 16))
        message = _read_exact(stream, msg_len).decode("utf-8", errors="replace")
        return SrError(request_id, code, message)
    raise ProtocolError(f"unknown message type {msg_type}")
