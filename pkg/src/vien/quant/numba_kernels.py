"""numba-compiled scalar kernels: block decode and fused dequant-matmul.

Import of this module requires numba; vien.quant.api guards it and falls back
to the numpy kernels. Each output row of the matmul is produced by exactly
one thread and accumulated in a fixed order (per-block float32 partial sums),
so results are bit-identical regardless of the numba thread count.

f16 scale fields are decoded arithmetically from their bit pattern instead
of through a lookup table: module-level array globals would defeat
@njit(cache=True). Byte fetches are cast through np.int64 before bit math:
numba keeps unsigned intermediates otherwise and unifies mixed
signed/unsigned branches to float64.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

# plain ints mirroring QuantType so the jitted switch stays literal-friendly
QT_F32 = 0
QT_F16 = 1
QT_Q8_0 = 8
QT_Q2_K = 10
QT_Q3_K = 11
QT_Q4_K = 12
QT_Q5_K = 13
QT_Q6_K = 14


@njit(cache=True, inline="always")
def _f16_val(lo, hi):
    bits = np.int64(lo) | (np.int64(hi) << 8)
    sign = -1.0 if bits & 0x8000 else 1.0
    e = (bits >> 10) & 0x1F
    m = bits & 0x3FF
    if e == 0:
        val = m * 5.960464477539063e-08  # 2**-24
    elif e == 31:
        val = np.inf if m == 0 else np.nan
    else:
        val = (1.0 + m * 0.0009765625) * 2.0 ** (e - 15)
    return np.float32(sign * val)


@njit(cache=True, inline="always")
def _f32_val(b0, b1, b2, b3):
    bits = np.int64(b0) | (np.int64(b1) << 8) | (np.int64(b2) << 16) | (np.int64(b3) << 24)
    sign = -1.0 if bits & 0x80000000 else 1.0
    e = (bits >> 23) & 0xFF
    m = bits & 0x7FFFFF
    if e == 0:
        val = m * 1.401298464324817e-45  # 2**-149
    elif e == 255:
        val = np.inf if m == 0 else np.nan
    else:
        val = (1.0 + m * 1.1920928955078125e-07) * 2.0 ** (e - 127)
    return np.float32(sign * val)


@njit(cache=True, inline="always")
def _i8(v):
    w = np.int64(v)
    return w - 256 if w > 127 else w


@njit(cache=True)
def _decode_q8_0(data, off, out, o0):
    d = _f16_val(data[off], data[off + 1])
    for j in range(32):
        out[o0 + j] = d * np.float32(_i8(data[off + 2 + j]))


@njit(cache=True)
def _decode_q4_k(data, off, out, o0):
    d = _f16_val(data[off], data[off + 1])
    dmin = _f16_val(data[off + 2], data[off + 3])
    so = off + 4
    qo = off + 16
    for g in range(8):
        if g < 4:
            sc = np.int64(data[so + g]) & 0x3F
            mn = np.int64(data[so + g + 4]) & 0x3F
        else:
            sc = (np.int64(data[so + g + 4]) & 0x0F) | ((np.int64(data[so + g - 4]) >> 6) << 4)
            mn = (np.int64(data[so + g + 4]) >> 4) | ((np.int64(data[so + g]) >> 6) << 4)
        dl = d * np.float32(sc)
        ml = dmin * np.float32(mn)
        shift = 4 * (g & 1)
        qbase = qo + (g // 2) * 32
        obase = o0 + g * 32
        for j in range(32):
            q = (np.int64(data[qbase + j]) >> shift) & 0x0F
            out[obase + j] = dl * np.float32(q) - ml


@njit(cache=True)
def _decode_q5_k(data, off, out, o0):
    d = _f16_val(data[off], data[off + 1])
    dmin = _f16_val(data[off + 2], data[off + 3])
    so = off + 4
    ho = off + 16
    qo = off + 48
    for g in range(8):
        if g < 4:
            sc = np.int64(data[so + g]) & 0x3F
            mn = np.int64(data[so + g + 4]) & 0x3F
        else:
            sc = (np.int64(data[so + g + 4]) & 0x0F) | ((np.int64(data[so + g - 4]) >> 6) << 4)
            mn = (np.int64(data[so + g + 4]) >> 4) | ((np.int64(data[so + g]) >> 6) << 4)
        dl = d * np.float32(sc)
        ml = dmin * np.float32(mn)
        shift = 4 * (g & 1)
        qbase = qo + (g // 2) * 32
        obase = o0 + g * 32
        for j in range(32):
            q = (np.int64(data[qbase + j]) >> shift) & 0x0F
            if (np.int64(data[ho + j]) >> g) & 1:
                q |= 0x10
            out[obase + j] = dl * np.float32(q) - ml


@njit(cache=True)
def _decode_q6_k(data, off, out, o0):
    d = _f16_val(data[off + 208], data[off + 209])
    for h in range(2):
        qlo = off + h * 64
        qho = off + 128 + h * 32
        sco = off + 192 + h * 8
        ob = o0 + h * 128
        for l in range(32):
            si = l // 16
            hbits = np.int64(data[qho + l])
            lo0 = np.int64(data[qlo + l])
            lo32 = np.int64(data[qlo + l + 32])
            q1 = ((lo0 & 0x0F) | (((hbits >> 0) & 3) << 4)) - 32
            q2 = ((lo32 & 0x0F) | (((hbits >> 2) & 3) << 4)) - 32
            q3 = ((lo0 >> 4) | (((hbits >> 4) & 3) << 4)) - 32
            q4 = ((lo32 >> 4) | (((hbits >> 6) & 3) << 4)) - 32
            out[ob + l] = d * np.float32(_i8(data[sco + si])) * np.float32(q1)
            out[ob + l + 32] = d * np.float32(_i8(data[sco + si + 2])) * np.float32(q2)
            out[ob + l + 64] = d * np.float32(_i8(data[sco + si + 4])) * np.float32(q3)
            out[ob + l + 96] = d * np.float32(_i8(data[sco + si + 6])) * np.float32(q4)


@njit(cache=True)
def _decode_q2_k(data, off, out, o0):
    d = _f16_val(data[off + 80], data[off + 81])
    dmin = _f16_val(data[off + 82], data[off + 83])
    for g in range(16):
        sc = np.int64(data[off + g])
        dl = d * np.float32(sc & 0x0F)
        ml = dmin * np.float32(sc >> 4)
        shift = 2 * ((g // 2) % 4)
        qbase = off + 16 + (g // 8) * 32 + (g % 2) * 16
        obase = o0 + g * 16
        for j in range(16):
            q = (np.int64(data[qbase + j]) >> shift) & 3
            out[obase + j] = dl * np.float32(q) - ml


@njit(cache=True)
def _decode_q3_k(data, off, out, o0):
    d = _f16_val(data[off + 108], data[off + 109])
    so = off + 96
    for g in range(16):
        if g < 8:
            lo = np.int64(data[so + g]) & 0x0F
        else:
            lo = np.int64(data[so + g - 8]) >> 4
        hi = (np.int64(data[so + 8 + g % 4]) >> (2 * (g // 4))) & 3
        sc = (lo | (hi << 4)) - 32
        dl = d * np.float32(sc)
        shift = 2 * ((g // 2) % 4)
        qbase = off + 32 + (g // 8) * 32 + (g % 2) * 16
        hbit = g // 2
        hbase = off + (g % 2) * 16
        obase = o0 + g * 16
        for j in range(16):
            q = (np.int64(data[qbase + j]) >> shift) & 3
            if not (np.int64(data[hbase + j]) >> hbit) & 1:
                q -= 4
            out[obase + j] = dl * np.float32(q)


@njit(cache=True)
def _decode_f16(data, off, out, o0, n):
    for j in range(n):
        out[o0 + j] = _f16_val(data[off + 2 * j], data[off + 2 * j + 1])


@njit(cache=True)
def _decode_f32(data, off, out, o0, n):
    for j in range(n):
        b = off + 4 * j
        out[o0 + j] = _f32_val(data[b], data[b + 1], data[b + 2], data[b + 3])


@njit(cache=True, inline="always")
def _decode_block(qt, data, off, out, o0):
    if qt == QT_Q8_0:
        _decode_q8_0(data, off, out, o0)
    elif qt == QT_Q4_K:
        _decode_q4_k(data, off, out, o0)
    elif qt == QT_Q6_K:
        _decode_q6_k(data, off, out, o0)
    elif qt == QT_Q5_K:
        _decode_q5_k(data, off, out, o0)
    elif qt == QT_Q3_K:
        _decode_q3_k(data, off, out, o0)
    elif qt == QT_Q2_K:
        _decode_q2_k(data, off, out, o0)
    elif qt == QT_F16:
        _decode_f16(data, off, out, o0, 1)
    else:
        _decode_f32(data, off, out, o0, 1)


@njit(cache=True, parallel=True)
def dequant_blocks(qt, blocks, block_elems, out):
    """(n, block_bytes) uint8 -> (n, block_elems) f32, one block per task."""
    n = blocks.shape[0]
    bb = blocks.shape[1]
    flat = blocks.reshape(n * bb)
    oflat = out.reshape(n * block_elems)
    if qt == QT_F16:
        for i in prange(n):
            _decode_f16(flat, i * bb, oflat, i * block_elems, block_elems)
    elif qt == QT_F32:
        for i in prange(n):
            _decode_f32(flat, i * bb, oflat, i * block_elems, block_elems)
    else:
        for i in prange(n):
            _decode_block(qt, flat, i * bb, oflat, i * block_elems)


@njit(cache=True, parallel=True)
def matmul_rows(qt, data, n_rows, row_blocks, block_bytes, block_elems, x, y):
    """y[s, r] = sum_c x[s, c] * dequant(row r)[c], one row per task.

    Accumulates a f32 partial sum per block, then adds partials in block
    order, so the result does not depend on the thread count.
    """
    row_bytes = row_blocks * block_bytes
    row_elems = row_blocks * block_elems
    n_seq = x.shape[0]
    for r in prange(n_rows):
        buf = np.empty(row_elems, dtype=np.float32)
        base = r * row_bytes
        if qt == QT_F16:
            _decode_f16(data, base, buf, 0, row_elems)
        elif qt == QT_F32:
            _decode_f32(data, base, buf, 0, row_elems)
        else:
            for b in range(row_blocks):
                _decode_block(qt, data, base + b * block_bytes, buf, b * block_elems)
        for s in range(n_seq):
            acc = np.float32(0.0)
            for b in range(row_blocks):
                part = np.float32(0.0)
                cb = b * block_elems
                for c in range(block_elems):
                    part += x[s, cb + c] * buf[cb + c]
                acc += part
            y[s, r] = acc


@njit(cache=True, parallel=True)
def dequant_rows(qt, data, row_blocks, block_bytes, block_elems, idx, out):
    """Dequantize the selected rows of a quantized 2-D tensor (gather)."""
    row_bytes = row_blocks * block_bytes
    for i in prange(idx.shape[0]):
        base = idx[i] * row_bytes
        if qt == QT_F16:
            _decode_f16(data, base, out[i], 0, row_blocks * block_elems)
        elif qt == QT_F32:
            _decode_f32(data, base, out[i], 0, row_blocks * block_elems)
        else:
            for b in range(row_blocks):
                _decode_block(qt, data, base + b * block_bytes, out[i], b * block_elems)
