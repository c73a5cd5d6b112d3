"""Vectorized numpy dequantization, one function per block layout.

Every function takes a (n_blocks, block_bytes) uint8 array and returns
(n_blocks, block_elems) float32. These are the fallback path when numba is
disabled and the reference the fused numba kernels are checked against.

Block layouts (little-endian, f16 scales):
  Q8_0:  d f16 | 32 x int8
  Q2_K:  16 x (lo=scale hi=min nibbles) | 64B 2-bit quants | d f16 | dmin f16
  Q3_K:  32B high-bit mask | 64B 2-bit quants | 12B 6-bit scales | d f16
  Q4_K:  d f16 | dmin f16 | 12B packed 6-bit scales/mins | 128B 4-bit quants
  Q5_K:  d f16 | dmin f16 | 12B packed 6-bit scales/mins | 32B high bits | 128B low nibbles
  Q6_K:  128B low nibbles | 64B 2-bit highs | 16 x int8 scales | d f16
"""
from __future__ import annotations

import numpy as np

from .types import QK_K, QuantType

_SHIFT_04 = np.array([0, 4], dtype=np.uint8)
_SHIFT_0246 = np.array([0, 2, 4, 6], dtype=np.uint8)


def _f16(col: np.ndarray) -> np.ndarray:
    return col.view(np.float16).astype(np.float32)


def dequant_q8_0(blocks: np.ndarray) -> np.ndarray:
    d = _f16(blocks[:, :2])
    q = blocks[:, 2:].view(np.int8).astype(np.float32)
    return d * q


def unpack_scale_min_k4(scales: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unpack the 12-byte K-quant field into 8 six-bit scales and 8 six-bit mins."""
    n = scales.shape[0]
    s = scales.reshape(n, 3, 4)
    d, m, md = s[:, 0], s[:, 1], s[:, 2]
    sc = np.concatenate([d & 0x3F, (md & 0x0F) | ((d >> 6) << 4)], axis=-1)
    mn = np.concatenate([m & 0x3F, (md >> 4) | ((m >> 6) << 4)], axis=-1)
    return sc, mn


def dequant_q4_k(blocks: np.ndarray) -> np.ndarray:
    n = blocks.shape[0]
    d = _f16(blocks[:, 0:2])
    dmin = _f16(blocks[:, 2:4])
    sc, mn = unpack_scale_min_k4(blocks[:, 4:16])
    dl = (d * sc.astype(np.float32)).reshape(n, 8, 1)
    ml = (dmin * mn.astype(np.float32)).reshape(n, 8, 1)
    qs = blocks[:, 16:144].reshape(n, 4, 1, 32) >> _SHIFT_04.reshape(1, 1, 2, 1)
    qs = (qs & np.uint8(0x0F)).reshape(n, 8, 32).astype(np.float32)
    return (dl * qs - ml).reshape(n, QK_K)


def dequant_q5_k(blocks: np.ndarray) -> np.ndarray:
    n = blocks.shape[0]
    d = _f16(blocks[:, 0:2])
    dmin = _f16(blocks[:, 2:4])
    sc, mn = unpack_scale_min_k4(blocks[:, 4:16])
    dl = (d * sc.astype(np.float32)).reshape(n, 8, 1)
    ml = (dmin * mn.astype(np.float32)).reshape(n, 8, 1)
    qh = blocks[:, 16:48].reshape(n, 1, 1, 32) >> np.arange(8, dtype=np.uint8).reshape(1, 1, 8, 1)
    qh = (qh & np.uint8(1)).reshape(n, 8, 32)
    ql = blocks[:, 48:176].reshape(n, 4, 1, 32) >> _SHIFT_04.reshape(1, 1, 2, 1)
    ql = (ql & np.uint8(0x0F)).reshape(n, 8, 32)
    q = (ql | (qh << np.uint8(4))).astype(np.float32)
    return (dl * q - ml).reshape(n, QK_K)


def dequant_q6_k(blocks: np.ndarray) -> np.ndarray:
    n = blocks.shape[0]
    ql = blocks[:, 0:128]
    qh = blocks[:, 128:192]
    sc = blocks[:, 192:208].view(np.int8).astype(np.float32)
    d = _f16(blocks[:, 208:210])
    dl = (d * sc).reshape(n, 16, 1)
    lo = ql.reshape(n, 2, 1, 64) >> _SHIFT_04.reshape(1, 1, 2, 1)
    lo = (lo & np.uint8(0x0F)).reshape(n, 8, 32)
    hi = qh.reshape(n, 2, 1, 32) >> _SHIFT_0246.reshape(1, 1, 4, 1)
    hi = (hi & np.uint8(0x03)).reshape(n, 8, 32)
    q = ((lo | (hi << np.uint8(4))).astype(np.int8) - np.int8(32)).astype(np.float32)
    return (dl * q.reshape(n, 16, 16)).reshape(n, QK_K)


def dequant_q2_k(blocks: np.ndarray) -> np.ndarray:
    n = blocks.shape[0]
    scales = blocks[:, 0:16]
    qs = blocks[:, 16:80]
    d = _f16(blocks[:, 80:82])
    dmin = _f16(blocks[:, 82:84])
    dl = (d * (scales & 0x0F).astype(np.float32)).reshape(n, 16, 1)
    ml = (dmin * (scales >> 4).astype(np.float32)).reshape(n, 16, 1)
    q = qs.reshape(n, 2, 1, 32) >> _SHIFT_0246.reshape(1, 1, 4, 1)
    q = (q & np.uint8(3)).reshape(n, 16, 16).astype(np.float32)
    return (dl * q - ml).reshape(n, QK_K)


def unpack_scales_q3(raw: np.ndarray) -> np.ndarray:
    """12 packed bytes -> 16 signed 6-bit scales (int8, bias 32 removed)."""
    n = raw.shape[0]
    lo = raw[:, :8].reshape(n, 1, 8) >> _SHIFT_04.reshape(1, 2, 1)
    lo = (lo & np.uint8(0x0F)).reshape(n, 16)
    hi = raw[:, 8:12].reshape(n, 1, 4) >> _SHIFT_0246.reshape(1, 4, 1)
    hi = (hi & np.uint8(0x03)).reshape(n, 16)
    return (lo | (hi << np.uint8(4))).astype(np.int8) - np.int8(32)


def dequant_q3_k(blocks: np.ndarray) -> np.ndarray:
    n = blocks.shape[0]
    hmask = blocks[:, 0:32]
    qs = blocks[:, 32:96]
    scales = unpack_scales_q3(blocks[:, 96:108]).astype(np.float32)
    d = _f16(blocks[:, 108:110])
    dl = (d * scales).reshape(n, 16, 1)
    q = qs.reshape(n, 2, 1, 32) >> _SHIFT_0246.reshape(1, 1, 4, 1)
    q = (q & np.uint8(3)).reshape(n, 16, 16)
    hm = hmask.reshape(n, 1, 1, 32) >> np.arange(8, dtype=np.uint8).reshape(1, 1, 8, 1)
    # quants sit 4 lower unless the mask bit is set
    hm = ((hm & np.uint8(1)) ^ np.uint8(1)).reshape(n, 16, 16)
    q = (q.astype(np.int8) - (hm << np.uint8(2)).astype(np.int8)).astype(np.float32)
    return (dl * q).reshape(n, QK_K)


def dequant_f32(blocks: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(blocks).view(np.float32)


def dequant_f16(blocks: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(blocks).view(np.float16).astype(np.float32)


DEQUANT_FNS = {
    QuantType.F32: dequant_f32,
    QuantType.F16: dequant_f16,
    QuantType.Q8_0: dequant_q8_0,
    QuantType.Q2_K: dequant_q2_k,
    QuantType.Q3_K: dequant_q3_k,
    QuantType.Q4_K: dequant_q4_k,
    QuantType.Q5_K: dequant_q5_k,
    QuantType.Q6_K: dequant_q6_k,
}
