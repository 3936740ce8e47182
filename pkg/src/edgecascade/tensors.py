"""Minimal dense tensor with FP32/INT8 dtypes and per-tensor affine quantization."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class DType(Enum):
    FP32 = "fp32"
    INT8 = "int8"


ITEM_SIZE = {DType.FP32: 4, DType.INT8: 1}

# Floor applied to the scale of constant tensors so q = v/scale never divides by zero.
SCALE_FLOOR = 1e-8


class NonFinite(ValueError):
    """Tensor contains NaN or Inf."""


class MissingQuantParams(ValueError):
    """Dequantize called on a tensor without quantization parameters."""


class ShapeMismatch(ValueError):
    """Operand shapes are incompatible."""


@dataclass(frozen=True)
class QuantParams:
    """Affine map between int8 codes and real values: v = (q - zero_point) * scale.

    scale is kept at float32 precision; the wire format stores it as f32 and
    round trips must be bit-exact.
    """

    scale: float
    zero_point: int

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not -128 <= self.zero_point <= 127:
            raise ValueError(f"zero_point out of int8 range: {self.zero_point}")


@dataclass(frozen=True, eq=False)
class Tensor:
    """Immutable row-major tensor; FP32 plain or INT8 with quant params.

    0-d input is normalized to shape (1,); a lone scalar travels as a
    one-element vector.
    """

    data: np.ndarray
    quant: QuantParams | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data)
        if arr.dtype == np.float32:
            if self.quant is not None:
                raise ValueError("FP32 tensor must not carry quant params")
        elif arr.dtype == np.int8:
            if self.quant is None:
                raise MissingQuantParams("INT8 tensor requires quant params")
        else:
            raise TypeError(f"unsupported dtype {arr.dtype}; use float32 or int8")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def dtype(self) -> DType:
        return DType.FP32 if self.data.dtype == np.float32 else DType.INT8

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @classmethod
    def fp32(cls, values) -> "Tensor":
        return cls(np.asarray(values, dtype=np.float32))


def quantize_linear(t: Tensor) -> Tensor:
    """Per-tensor asymmetric affine quantization FP32 -> INT8.

    scale = (max - min) / 255 with the range widened to include zero so the
    zero point stays inside int8; constant tensors fall back to a symmetric
    scale with zero_point 0.
    """
    if t.dtype is not DType.FP32:
        raise TypeError("quantize_linear expects an FP32 tensor")
    vals = t.data
    if vals.size == 0:
        return Tensor(np.zeros(t.shape, np.int8), QuantParams(1.0, 0))
    if not np.isfinite(vals).all():
        raise NonFinite("cannot quantize tensor with NaN/Inf values")

    vmin = float(vals.min())
    vmax = float(vals.max())
    if vmax == vmin:
        scale = float(np.float32(max(abs(vmax), SCALE_FLOOR) / 127.0))
        zero_point = 0
    else:
        lo = min(vmin, 0.0)
        hi = max(vmax, 0.0)
        scale = float(np.float32((hi - lo) / 255.0))
        zero_point = int(np.clip(-128 - round(lo / scale), -128, 127))

    q = np.round(vals.astype(np.float64) / scale) + zero_point
    q = np.clip(q, -128, 127).astype(np.int8)
    return Tensor(q, QuantParams(scale, zero_point))


def dequantize(t: Tensor) -> Tensor:
    """INT8 -> FP32 via v = (q - zero_point) * scale; shape preserved."""
    if t.quant is None:
        raise MissingQuantParams("tensor has no quant params")
    q = t.data.astype(np.float32)
    v = (q - np.float32(t.quant.zero_point)) * np.float32(t.quant.scale)
    return Tensor(v.astype(np.float32))


def memory_bytes(t: Tensor) -> int:
    """Payload bytes of the scalar buffer (quant params excluded by definition)."""
    return t.size * ITEM_SIZE[t.dtype]
