"""Quantization type registry: ids, block geometry, support tiers."""
from __future__ import annotations

from enum import IntEnum


class QuantType(IntEnum):
    """Tensor data types as stored in GGUF, numbered per the ggml convention."""

    F32 = 0
    F16 = 1
    Q4_0 = 2
    Q4_1 = 3
    Q5_0 = 6
    Q5_1 = 7
    Q8_0 = 8
    Q8_1 = 9
    Q2_K = 10
    Q3_K = 11
    Q4_K = 12
    Q5_K = 13
    Q6_K = 14
    Q8_K = 15
    I8 = 24
    I16 = 25
    I32 = 26
    I64 = 27
    F64 = 28
    BF16 = 30


QK_K = 256  # super-block length shared by all K-quants

# (block_elems, block_bytes) for every id we can at least size-check.
QUANT_GEOMETRY: dict[QuantType, tuple[int, int]] = {
    QuantType.F32: (1, 4),
    QuantType.F16: (1, 2),
    QuantType.Q4_0: (32, 18),
    QuantType.Q4_1: (32, 20),
    QuantType.Q5_0: (32, 22),
    QuantType.Q5_1: (32, 24),
    QuantType.Q8_0: (32, 34),
    QuantType.Q8_1: (32, 36),
    QuantType.Q2_K: (QK_K, 84),
    QuantType.Q3_K: (QK_K, 110),
    QuantType.Q4_K: (QK_K, 144),
    QuantType.Q5_K: (QK_K, 176),
    QuantType.Q6_K: (QK_K, 210),
    QuantType.Q8_K: (QK_K, 292),
    QuantType.I8: (1, 1),
    QuantType.I16: (1, 2),
    QuantType.I32: (1, 4),
    QuantType.I64: (1, 8),
    QuantType.F64: (1, 8),
    QuantType.BF16: (1, 2),
}

# Types with full quantize + dequantize + fused-dot support.
CODEC_TYPES = frozenset(
    {
        QuantType.F32,
        QuantType.F16,
        QuantType.Q8_0,
        QuantType.Q2_K,
        QuantType.Q3_K,
        QuantType.Q4_K,
        QuantType.Q5_K,
        QuantType.Q6_K,
    }
)


class UnsupportedQuantType(Exception):
    """Raised when a codec operation is requested for a type we cannot decode."""

    def __init__(self, qtype: int | QuantType, op: str = "dequantize"):
        self.qtype = qtype
        name = QuantType(qtype).name if qtype in QuantType._value2member_map_ else f"id={int(qtype)}"
        super().__init__(f"cannot {op} tensor of type {name}")


class GeometryMismatch(Exception):
    """Byte/element counts do not line up with the type's block geometry."""


class NonFiniteInput(Exception):
    """NaN or Inf encountered where finite weights are required."""


def geometry(qtype: int | QuantType) -> tuple[int, int]:
    """Return (block_elems, block_bytes); raises UnsupportedQuantType for unknown ids."""
    try:
        return QUANT_GEOMETRY[QuantType(qtype)]
    except (ValueError, KeyError):
        raise UnsupportedQuantType(qtype, "size") from None


def known_type(qtype: int) -> bool:
    return qtype in QuantType._value2member_map_ and QuantType(qtype) in QUANT_GEOMETRY


def row_byte_size(qtype: int | QuantType, row_elems: int) -> int:
    """Exact byte size of one row of `row_elems` elements (no rounding slack)."""
    block_elems, block_bytes = geometry(qtype)
    if row_elems % block_elems != 0:
        raise GeometryMismatch(
            f"row length {row_elems} not a multiple of {QuantType(qtype).name} block size {block_elems}"
        )
    return row_elems // block_elems * block_bytes


def tensor_byte_size(qtype: int | QuantType, dims: tuple[int, ...]) -> int:
    """Byte size of a whole tensor; dims[0] is the contiguous (quantized) extent."""
    n = 1
    for d in dims:
        n *= d
    if not dims:
        return 0
    row = row_byte_size(qtype, dims[0])
    return row * (n // dims[0])
