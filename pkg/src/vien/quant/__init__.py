"""Quantized tensor codecs and kernels (GGUF-compatible block formats)."""
from .api import (
    dequantize_block,
    dequantize_blocks,
    dequantize_rows,
    dequantize_tensor,
    dot_q,
    kernel_backend,
    matmul_q,
    numba_available,
    set_kernel_backend,
)
from .fp16 import f16_to_f32, f32_to_f16
from .quantize import (
    QuantErrorStats,
    quant_error_report,
    quantize_block,
    quantize_blocks,
    quantize_tensor,
)
from .types import (
    CODEC_TYPES,
    QK_K,
    GeometryMismatch,
    NonFiniteInput,
    QuantType,
    UnsupportedQuantType,
    geometry,
    known_type,
    row_byte_size,
    tensor_byte_size,
)

__all__ = [
    "CODEC_TYPES",
    "GeometryMismatch",
    "NonFiniteInput",
    "QK_K",
    "QuantErrorStats",
    "QuantType",
    "UnsupportedQuantType",
    "dequantize_block",
    "dequantize_blocks",
    "dequantize_rows",
    "dequantize_tensor",
    "dot_q",
    "f16_to_f32",
    "f32_to_f16",
    "geometry",
    "kernel_backend",
    "known_type",
    "matmul_q",
    "numba_available",
    "quant_error_report",
    "quantize_block",
    "quantize_blocks",
    "quantize_tensor",
    "row_byte_size",
    "set_kernel_backend",
    "tensor_byte_size",
]
