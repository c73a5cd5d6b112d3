"""Backend dispatch for the quantized-tensor kernels.

Two interchangeable backends produce the same mathematical results:

* ``numba``: scalar kernels compiled with @njit, parallel over rows.
* ``numpy``: pure-vectorized fallback, always available.

Selection order: explicit set_kernel_backend() call, else the VIEN_KERNELS
environment variable (``auto``, ``numba``, ``numpy``), else ``auto`` (numba
when importable). Within one backend, results are bit-stable across runs and
thread counts; across backends, matmul results agree to float32 reduction
tolerance, not bit-for-bit.
"""
from __future__ import annotations

import importlib.util
import os

import numpy as np

from .numpy_kernels import DEQUANT_FNS
from .types import (
    CODEC_TYPES,
    GeometryMismatch,
    QuantType,
    UnsupportedQuantType,
    geometry,
    row_byte_size,
)

_VALID = ("auto", "numba", "numpy")
_BACKEND: str | None = None
_NB = None  # lazily imported vien.quant.numba_kernels


def numba_available() -> bool:
    return importlib.util.find_spec("numba") is not None


def _resolve(name: str) -> str:
    if name not in _VALID:
        raise ValueError(f"unknown kernel backend {name!r}, expected one of {_VALID}")
    if name == "auto":
        return "numba" if numba_available() else "numpy"
    if name == "numba" and not numba_available():
        raise RuntimeError("numba backend requested but numba is not installed")
    return name


def set_kernel_backend(name: str) -> str:
    """Select 'numba', 'numpy' or 'auto'; returns the resolved backend."""
    global _BACKEND
    _BACKEND = _resolve(name)
    return _BACKEND


def kernel_backend() -> str:
    global _BACKEND
    if _BACKEND is None:
        _BACKEND = _resolve(os.environ.get("VIEN_KERNELS", "auto"))
    return _BACKEND


def _nb():
    global _NB
    if _NB is None:
        from . import numba_kernels

        _NB = numba_kernels
    return _NB


def _check_codec(qtype: QuantType, op: str) -> QuantType:
    qtype = QuantType(qtype)
    if qtype not in CODEC_TYPES:
        raise UnsupportedQuantType(qtype, op)
    return qtype


def _as_blocks(data, qtype: QuantType) -> np.ndarray:
    """bytes or uint8 array -> (n_blocks, block_bytes) uint8 view."""
    _, block_bytes = geometry(qtype)
    arr = np.frombuffer(data, dtype=np.uint8) if isinstance(data, (bytes, bytearray, memoryview)) else np.asarray(data, dtype=np.uint8)
    arr = np.ascontiguousarray(arr).reshape(-1)
    if arr.size % block_bytes != 0:
        raise GeometryMismatch(
            f"{arr.size} bytes is not a whole number of {qtype.name} blocks ({block_bytes}B each)"
        )
    return arr.reshape(-1, block_bytes)


def dequantize_blocks(data, qtype: QuantType) -> np.ndarray:
    """Packed blocks -> (n_blocks, block_elems) float32."""
    qtype = _check_codec(qtype, "dequantize")
    blocks = _as_blocks(data, qtype)
    block_elems, _ = geometry(qtype)
    if kernel_backend() == "numba" and qtype not in (QuantType.F32, QuantType.F16):
        out = np.empty((blocks.shape[0], block_elems), dtype=np.float32)
        _nb().dequant_blocks(int(qtype), blocks, block_elems, out)
        return out
    return DEQUANT_FNS[qtype](blocks)


def dequantize_block(data, qtype: QuantType) -> np.ndarray:
    """Single block -> (block_elems,) float32."""
    return dequantize_blocks(data, qtype).reshape(-1)


def dequantize_tensor(data, qtype: QuantType, shape: tuple[int, ...]) -> np.ndarray:
    """Packed tensor payload -> float32 array of the given row-major shape.

    The last axis of ``shape`` is the quantized dimension.
    """
    qtype = _check_codec(qtype, "dequantize")
    block_elems, _ = geometry(qtype)
    if shape[-1] % block_elems != 0:
        raise GeometryMismatch(
            f"last dim {shape[-1]} not a multiple of {qtype.name} block size {block_elems}"
        )
    out = dequantize_blocks(data, qtype)
    expect = int(np.prod(shape))
    if out.size != expect:
        raise GeometryMismatch(f"payload holds {out.size} values, shape {shape} needs {expect}")
    return out.reshape(shape)


def dequantize_rows(data, qtype: QuantType, n_cols: int, idx) -> np.ndarray:
    """Gather + dequantize selected rows of a (n_rows, n_cols) quantized tensor."""
    qtype = _check_codec(qtype, "dequantize")
    block_elems, block_bytes = geometry(qtype)
    if n_cols % block_elems != 0:
        raise GeometryMismatch(f"{n_cols} cols not a multiple of {qtype.name} blocks")
    row_blocks = n_cols // block_elems
    row_bytes = row_blocks * block_bytes
    flat = _as_blocks(data, qtype).reshape(-1)
    idx = np.ascontiguousarray(np.asarray(idx, dtype=np.int64).reshape(-1))
    if idx.size and (idx.min() < 0 or (idx.max() + 1) * row_bytes > flat.size):
        raise IndexError("row index out of range")
    if kernel_backend() == "numba":
        out = np.empty((idx.size, n_cols), dtype=np.float32)
        _nb().dequant_rows(int(qtype), flat, row_blocks, block_bytes, block_elems, idx, out)
        return out
    rows = flat.reshape(-1, row_bytes)[idx]
    return DEQUANT_FNS[qtype](rows.reshape(-1, block_bytes)).reshape(idx.size, n_cols)


def matmul_q(data, qtype: QuantType, n_rows: int, n_cols: int, x: np.ndarray) -> np.ndarray:
    """x (seq, n_cols) float32 times the transposed quantized matrix -> (seq, n_rows)."""
    qtype = _check_codec(qtype, "matmul")
    block_elems, block_bytes = geometry(qtype)
    if n_cols % block_elems != 0:
        raise GeometryMismatch(f"{n_cols} cols not a multiple of {qtype.name} blocks")
    row_blocks = n_cols // block_elems
    flat = _as_blocks(data, qtype).reshape(-1)
    if flat.size != n_rows * row_blocks * block_bytes:
        raise GeometryMismatch(
            f"payload is {flat.size}B, expected {n_rows * row_blocks * block_bytes}B "
            f"for ({n_rows}, {n_cols}) {qtype.name}"
        )
    x = np.ascontiguousarray(x, dtype=np.float32)
    if x.ndim != 2 or x.shape[1] != n_cols:
        raise GeometryMismatch(f"expected x of shape (seq, {n_cols}), got {x.shape}")
    if kernel_backend() == "numba":
        y = np.empty((x.shape[0], n_rows), dtype=np.float32)
        _nb().matmul_rows(int(qtype), flat, n_rows, row_blocks, block_bytes, block_elems, x, y)
        return y
    # chunk rows to bound the dequantized working set
    y = np.empty((x.shape[0], n_rows), dtype=np.float32)
    row_bytes = row_blocks * block_bytes
    chunk = max(1, (1 << 22) // max(1, n_cols * 4))
    rows = flat.reshape(n_rows, row_bytes)
    for r0 in range(0, n_rows, chunk):
        r1 = min(n_rows, r0 + chunk)
        w = DEQUANT_FNS[qtype](rows[r0:r1].reshape(-1, block_bytes)).reshape(r1 - r0, n_cols)
        y[:, r0:r1] = x @ w.T
    return y


def dot_q(data, qtype: QuantType, x: np.ndarray) -> float:
    """Dot product of one quantized row with a float32 vector."""
    x = np.ascontiguousarray(x, dtype=np.float32).reshape(1, -1)
    return float(matmul_q(data, qtype, 1, x.shape[1], x)[0, 0])
