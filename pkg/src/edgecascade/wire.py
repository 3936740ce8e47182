"""Binary frame format for tensors crossing the edge/cloud link.

Layout, all little-endian:

    magic   4 bytes  b"CSC1"
    version u8
    task    u8       1=stt 2=tts
    kind    u8       1=features 2=hidden_states 3=error
    dtype   u8       1=fp32 2=int8
    ndim    u8
    _pad    3 bytes  reserved, must be zero
    dims    ndim * u32
    quant   f32 scale + i8 zero_point, int8 frames only
    payload row-major scalar bytes
    crc32   u32 over every preceding byte
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .tensors import DType, QuantParams, Tensor

MAGIC = b"CSC1"
VERSION = 1

TASK_STT = 1
TASK_TTS = 2

KIND_FEATURES = 1
KIND_HIDDEN_STATES = 2
KIND_ERROR = 3

DTYPE_CODE = {DType.FP32: 1, DType.INT8: 2}
CODE_DTYPE = {1: DType.FP32, 2: DType.INT8}
NP_DTYPE = {DType.FP32: np.dtype("<f4"), DType.INT8: np.dtype("i1")}

MAX_NDIM = 8
MAX_DIM = 2**32 - 1

# Error frame payload codes (single int8 value, shape [1]).
ERR_MALFORMED = 1
ERR_SHAPE = 2
ERR_VERSION = 3
ERR_TOO_LARGE = 4

_HEADER = struct.Struct("<4s5B3x")
_CRC = struct.Struct("<I")
_QUANT = struct.Struct("<fb")


class WireError(ValueError):
    """Base class for frame encode/decode failures."""


class BadMagic(WireError):
    pass


class UnsupportedVersion(WireError):
    pass


class CrcMismatch(WireError):
    pass


class Truncated(WireError):
    pass


class UnknownEnum(WireError):
    pass


class TooManyDims(WireError):
    pass


class DimOverflow(WireError):
    pass


class ShapeError(WireError):
    pass


def frame_length(dtype: DType, shape: tuple[int, ...]) -> int:
    """Exact frame size in bytes for a tensor of the given dtype and shape."""
    n = 1
    for d in shape:
        n *= d
    length = _HEADER.size + 4 * len(shape) + n * {DType.FP32: 4, DType.INT8: 1}[dtype]
    if dtype is DType.INT8:
        length += _QUANT.size
    return length + _CRC.size


def encode_frame(task: int, kind: int, t: Tensor) -> bytes:
    if task not in (TASK_STT, TASK_TTS):
        raise UnknownEnum(f"bad task code {task}")
    if kind not in (KIND_FEATURES, KIND_HIDDEN_STATES, KIND_ERROR):
        raise UnknownEnum(f"bad kind code {kind}")
    if t.ndim > MAX_NDIM:
        raise TooManyDims(f"ndim {t.ndim} exceeds {MAX_NDIM}")
    for d in t.shape:
        if d > MAX_DIM:
            raise DimOverflow(f"dim {d} does not fit in u32")

    parts = [_HEADER.pack(MAGIC, VERSION, task, kind, DTYPE_CODE[t.dtype], t.ndim)]
    parts.append(struct.pack(f"<{t.ndim}I", *t.shape))
    if t.dtype is DType.INT8:
        parts.append(_QUANT.pack(t.quant.scale, t.quant.zero_point))
    parts.append(np.ascontiguousarray(t.data, dtype=NP_DTYPE[t.dtype]).tobytes())
    body = b"".join(parts)
    return body + _CRC.pack(zlib.crc32(body))


def decode_frame(buf: bytes) -> tuple[int, int, Tensor]:
    """Returns (task, kind, tensor); raises a WireError subclass on any defect."""
    if len(buf) < _HEADER.size + _CRC.size:
        raise Truncated(f"frame too short: {len(buf)} bytes")
    magic, version, task, kind, dtype_code, ndim = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"version {version} not supported")
    if task not in (TASK_STT, TASK_TTS):
        raise UnknownEnum(f"bad task code {task}")
    if kind not in (KIND_FEATURES, KIND_HIDDEN_STATES, KIND_ERROR):
        raise UnknownEnum(f"bad kind code {kind}")
    if dtype_code not in CODE_DTYPE:
        raise UnknownEnum(f"bad dtype code {dtype_code}")
    if ndim > MAX_NDIM:
        raise TooManyDims(f"ndim {ndim} exceeds {MAX_NDIM}")
    dtype = CODE_DTYPE[dtype_code]

    offset = _HEADER.size
    dims_end = offset + 4 * ndim
    if len(buf) < dims_end + _CRC.size:
        raise Truncated("frame ends inside dims")
    shape = struct.unpack_from(f"<{ndim}I", buf, offset)

    n = 1
    for d in shape:
        n *= d
    expected = frame_length(dtype, shape)
    if len(buf) < expected:
        raise Truncated(f"expected {expected} bytes, got {len(buf)}")
    if len(buf) > expected:
        raise Truncated(f"trailing bytes: expected {expected}, got {len(buf)}")

    (crc_stored,) = _CRC.unpack_from(buf, expected - _CRC.size)
    if zlib.crc32(buf[: expected - _CRC.size]) != crc_stored:
        raise CrcMismatch("crc32 mismatch")

    offset = dims_end
    quant = None
    if dtype is DType.INT8:
        scale, zero_point = _QUANT.unpack_from(buf, offset)
        offset += _QUANT.size
        try:
            quant = QuantParams(float(scale), int(zero_point))
        except ValueError as e:
            raise UnknownEnum(f"bad quant params: {e}") from None
    payload = buf[offset : expected - _CRC.size]
    arr = np.frombuffer(payload, dtype=NP_DTYPE[dtype]).reshape(shape)
    return task, kind, Tensor(arr.copy(), quant)


def encode_error_frame(task: int, code: int) -> bytes:
    """Service-side failure report: kind=error, single int8 payload byte."""
    t = Tensor(np.array([code], dtype=np.int8), QuantParams(1.0, 0))
    return encode_frame(task, KIND_ERROR, t)


def error_code(t: Tensor) -> int:
    """Payload code of a decoded error frame tensor."""
    if t.shape != (1,):
        raise ShapeError(f"error frame payload must be shape (1,), got {t.shape}")
    return int(t.data[0])


def peek_kind(buf: bytes) -> int | None:
    """Kind byte of a frame without validating it; None when too short."""
    if len(buf) < _HEADER.size or buf[:4] != MAGIC:
        return None
    return buf[6]


def peek_task(buf: bytes) -> int | None:
    if len(buf) < _HEADER.size or buf[:4] != MAGIC:
        return None
    return buf[5]
