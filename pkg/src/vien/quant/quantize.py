"""Block quantization for all supported types.

The K-quant encoders transcribe the reference ggml scale-search algorithms
(grid search over candidate inverse scales, least-squares refit per
sub-group) vectorized over blocks. Grid arithmetic stays in float32 like the
reference; reduction sums are carried in float64 so results do not depend on
numpy's pairwise-summation split points (documented deviation from the
reference's float32 accumulators; it changes at most 1-ulp rounding of the
fitted scales).

Quantization is the cold path (fixture generation and re-quantization), so
there is no numba variant; everything here is vectorized numpy.

Q8_0 stores its f16 scale rounded toward zero (reference rounds to nearest)
so that the documented per-block bound max|x - x_hat| <= absmax/254 holds
exactly; see quant_q8_0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fp16 import f16_to_f32, f32_to_f16
from .numpy_kernels import DEQUANT_FNS, unpack_scale_min_k4, unpack_scales_q3
from .types import (
    QK_K,
    GeometryMismatch,
    NonFiniteInput,
    QuantType,
    UnsupportedQuantType,
    geometry,
)

GROUP_MAX_EPS = 1e-15

_f32 = np.float32


def _rint(x: np.ndarray) -> np.ndarray:
    # round half to even, matching the reference nearest_int()
    return np.rint(x)


def _f16_bytes(values: np.ndarray) -> np.ndarray:
    """f32 (n,) -> nearest-f16 little-endian byte pairs (n, 2)."""
    return values.astype(np.float16).view(np.uint8).reshape(-1, 2)


def _f16_bytes_down(values: np.ndarray) -> np.ndarray:
    """f32 (n,) -> f16 rounded toward zero, as byte pairs (n, 2)."""
    h = values.astype(np.float16)
    over = h.astype(np.float32) > values
    h[over] = np.nextafter(h[over], np.float16(0))
    return h.view(np.uint8).reshape(-1, 2)


def _f16_roundtrip(values: np.ndarray) -> np.ndarray:
    """f32 values as they will read back after f16 storage."""
    return values.astype(np.float16).astype(np.float32)


# ---------------------------------------------------------------------------
# Q8_0
# ---------------------------------------------------------------------------

def quant_q8_0(values: np.ndarray) -> np.ndarray:
    nb = values.shape[0]
    amax = np.abs(values).max(axis=1)
    d = (amax / 127.0).astype(_f32)
    dbytes = _f16_bytes_down(d)
    dq = dbytes.view(np.float16).astype(np.float32).reshape(nb, 1)
    with np.errstate(divide="ignore"):
        inv = np.where(dq == 0, 0.0, 1.0 / dq).astype(_f32)
    scaled = values * inv
    # round half away from zero
    q = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    q = np.clip(q, -127, 127).astype(np.int8)
    return np.concatenate([dbytes, q.view(np.uint8)], axis=1)


# ---------------------------------------------------------------------------
# shared K-quant scale searches
# ---------------------------------------------------------------------------

def _make_qx_quants(x: np.ndarray, nmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Signed grid fit per group (weights x^2): returns (scale (G,), L (G,n) biased by +nmax)."""
    G, n = x.shape
    amax = np.abs(x).max(axis=1)
    imax = np.abs(x).argmax(axis=1)
    smax = np.take_along_axis(x, imax[:, None], axis=1)[:, 0]
    dead = amax < GROUP_MAX_EPS

    safe_max = np.where(dead, 1.0, smax).astype(_f32)
    iscale = (-nmax / safe_max).astype(_f32)
    L = np.clip(_rint(iscale[:, None] * x), -nmax, nmax - 1)
    w = (x.astype(np.float64)) ** 2
    xl = w * x.astype(np.float64)
    sumlx = (xl * L).sum(axis=1)
    suml2 = (w * L * L).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(suml2 > 0, sumlx / suml2, 0.0)
    best = scale * sumlx
    for step in range(-9, 10):
        if step == 0:
            continue
        isc = (-(nmax + 0.1 * step) / safe_max).astype(_f32)
        cand = np.clip(_rint(isc[:, None] * x), -nmax, nmax - 1)
        c_sumlx = (xl * cand).sum(axis=1)
        c_suml2 = (w * cand * cand).sum(axis=1)
        upd = (c_suml2 > 0) & (c_sumlx * c_sumlx > best * c_suml2)
        if upd.any():
            L[upd] = cand[upd]
            with np.errstate(divide="ignore", invalid="ignore"):
                new_scale = c_sumlx / c_suml2
            scale = np.where(upd, new_scale, scale)
            best = np.where(upd, scale * c_sumlx, best)
    scale = np.where(dead, 0.0, scale).astype(_f32)
    L = np.where(dead[:, None], 0, L + nmax).astype(np.uint8)
    return scale, L


def _make_qkx2_quants(
    x: np.ndarray,
    weights: np.ndarray,
    nmax: int,
    rmin: float,
    rdelta: float,
    nstep: int,
    use_mad: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Affine grid fit per group: returns (scale (G,), the_min (G,), L (G,n))."""
    G, n = x.shape
    xmin = np.minimum(x.min(axis=1), 0.0).astype(_f32)
    xmax = x.max(axis=1).astype(_f32)
    dead = xmax == xmin

    w64 = weights.astype(np.float64)
    x64 = x.astype(np.float64)
    sum_w = w64.sum(axis=1)
    sum_x = (w64 * x64).sum(axis=1)

    denom = np.where(dead, 1.0, xmax - xmin).astype(_f32)
    iscale = (nmax / denom).astype(_f32)
    scale = (1.0 / iscale).astype(_f32)
    L = np.clip(_rint(iscale[:, None] * (x - xmin[:, None])), 0, nmax).astype(np.uint8)
    diff = scale[:, None] * L + xmin[:, None] - x
    diff = np.abs(diff) if use_mad else diff * diff
    best_mad = (w64 * diff).sum(axis=1)

    cur_min = xmin.copy()
    cur_scale = np.where(dead, 0.0, scale).astype(_f32)

    for step in range(nstep + 1):
        isc = ((rmin + rdelta * step + nmax) / (xmax - cur_min + dead)).astype(_f32)
        laux = np.clip(_rint(isc[:, None] * (x - cur_min[:, None])), 0, nmax)
        wl = w64 * laux
        sum_l = wl.sum(axis=1)
        sum_l2 = (wl * laux).sum(axis=1)
        sum_xl = (wl * x64).sum(axis=1)
        D = sum_w * sum_l2 - sum_l * sum_l
        with np.errstate(divide="ignore", invalid="ignore"):
            this_scale = (sum_w * sum_xl - sum_x * sum_l) / D
            this_min = (sum_l2 * sum_x - sum_l * sum_xl) / D
            fix = this_min > 0
            this_min = np.where(fix, 0.0, this_min)
            this_scale = np.where(fix, sum_xl / sum_l2, this_scale)
        ts32 = this_scale.astype(_f32)
        tm32 = this_min.astype(_f32)
        diff = ts32[:, None] * laux + tm32[:, None] - x
        diff = np.abs(diff) if use_mad else diff * diff
        mad = (w64 * diff).sum(axis=1)
        upd = (D > 0) & (mad < best_mad) & ~dead
        if upd.any():
            L[upd] = laux[upd].astype(np.uint8)
            best_mad = np.where(upd, mad, best_mad)
            cur_scale = np.where(upd, ts32, cur_scale)
            cur_min = np.where(upd, tm32, cur_min)

    L[dead] = 0
    return cur_scale, -cur_min, L


def _make_q3_quants(x: np.ndarray, nmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Signed fit with per-element refinement sweeps; returns (scale, L biased +nmax)."""
    G, n = x.shape
    amax = np.abs(x).max(axis=1)
    imax = np.abs(x).argmax(axis=1)
    smax = np.take_along_axis(x, imax[:, None], axis=1)[:, 0]
    dead = amax < GROUP_MAX_EPS

    safe_max = np.where(dead, 1.0, smax).astype(_f32)
    iscale = (-nmax / safe_max).astype(_f32)
    L = np.clip(_rint(iscale[:, None] * x), -nmax, nmax - 1).astype(np.float64)
    w = x.astype(np.float64) ** 2
    x64 = x.astype(np.float64)
    sumlx = (w * x64 * L).sum(axis=1)
    suml2 = (w * L * L).sum(axis=1)
    for _ in range(5):
        changed = np.zeros(G, dtype=bool)
        for i in range(n):
            wi, xi, li = w[:, i], x64[:, i], L[:, i]
            slx = sumlx - wi * xi * li
            sl2 = suml2 - wi * li * li
            with np.errstate(divide="ignore", invalid="ignore"):
                cand = np.where(slx > 0, _rint((xi * sl2 / slx).astype(_f32)), li)
            cand = np.clip(cand, -nmax, nmax - 1)
            slx_new = slx + wi * xi * cand
            sl2_new = sl2 + wi * cand * cand
            upd = (
                (slx > 0)
                & (cand != li)
                & (sl2_new > 0)
                & (slx_new * slx_new * suml2 > sumlx * sumlx * sl2_new)
            )
            if upd.any():
                L[upd, i] = cand[upd]
                sumlx = np.where(upd, slx_new, sumlx)
                suml2 = np.where(upd, sl2_new, suml2)
                changed |= upd
        if not changed.any():
            break
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(suml2 > 0, sumlx / suml2, 0.0)
    scale = np.where(dead, 0.0, scale).astype(_f32)
    L = np.where(dead[:, None], 0, L + nmax).astype(np.uint8)
    return scale, L


# ---------------------------------------------------------------------------
# K-quant block encoders
# ---------------------------------------------------------------------------

def _pack_scale_min_k4(ls: np.ndarray, lm: np.ndarray) -> np.ndarray:
    """8 six-bit scales + 8 six-bit mins -> the 12-byte packed field."""
    nb = ls.shape[0]
    out = np.zeros((nb, 12), dtype=np.uint8)
    out[:, 0:4] = ls[:, 0:4] | ((ls[:, 4:8] >> 4) << 6)
    out[:, 4:8] = lm[:, 0:4] | ((lm[:, 4:8] >> 4) << 6)
    out[:, 8:12] = (ls[:, 4:8] & 0x0F) | ((lm[:, 4:8] & 0x0F) << 4)
    return out


def _pack_nibble_pairs(L: np.ndarray) -> np.ndarray:
    """(nb, n_chunks, 2, 32) low/high nibble halves -> (nb, n_chunks*32) bytes."""
    return (L[:, :, 0, :] | (L[:, :, 1, :] << 4)).reshape(L.shape[0], -1)


def quant_q4_k(values: np.ndarray) -> np.ndarray:
    nb = values.shape[0]
    x = values.reshape(nb * 8, 32)
    av = np.sqrt((x.astype(np.float64) ** 2).mean(axis=1)).astype(_f32)
    w = av[:, None] + np.abs(x)
    scale, the_min, L = _make_qkx2_quants(x, w, 15, -1.0, 0.1, 20, use_mad=False)
    scale = scale.reshape(nb, 8)
    the_min = the_min.reshape(nb, 8)
    L = L.reshape(nb, 8, 32)

    max_scale = scale.max(axis=1)
    max_min = the_min.max(axis=1)
    with np.errstate(divide="ignore"):
        inv_scale = np.where(max_scale > 0, 63.0 / max_scale, 0.0).astype(_f32)
        inv_min = np.where(max_min > 0, 63.0 / max_min, 0.0).astype(_f32)
    ls = np.clip(_rint(inv_scale[:, None] * scale), 0, 63).astype(np.uint8)
    lm = np.clip(_rint(inv_min[:, None] * the_min), 0, 63).astype(np.uint8)
    packed = _pack_scale_min_k4(ls, lm)
    dbytes = _f16_bytes((max_scale / 63.0).astype(_f32))
    dminbytes = _f16_bytes((max_min / 63.0).astype(_f32))

    sc, mn = unpack_scale_min_k4(packed)
    dg = f16_to_f32(dbytes.view(np.uint16)).reshape(nb, 1) * sc
    mg = f16_to_f32(dminbytes.view(np.uint16)).reshape(nb, 1) * mn
    x3 = values.reshape(nb, 8, 32)
    with np.errstate(divide="ignore", invalid="ignore"):
        req = np.clip(_rint((x3 + mg[:, :, None]) / dg[:, :, None]), 0, 15)
    live = (dg != 0)[:, :, None]
    L = np.where(live, req, L).astype(np.uint8)
    qs = _pack_nibble_pairs(L.reshape(nb, 4, 2, 32))
    return np.concatenate([dbytes, dminbytes, packed, qs], axis=1)


def quant_q5_k(values: np.ndarray) -> np.ndarray:
    nb = values.shape[0]
    x = values.reshape(nb * 8, 32)
    av = np.sqrt((x.astype(np.float64) ** 2).mean(axis=1)).astype(_f32)
    w = av[:, None] + np.abs(x)
    scale, the_min, L = _make_qkx2_quants(x, w, 31, -0.5, 0.1, 15, use_mad=False)
    scale = scale.reshape(nb, 8)
    the_min = the_min.reshape(nb, 8)
    L = L.reshape(nb, 8, 32)

    max_scale = scale.max(axis=1)
    max_min = the_min.max(axis=1)
    with np.errstate(divide="ignore"):
        inv_scale = np.where(max_scale > 0, 63.0 / max_scale, 0.0).astype(_f32)
        inv_min = np.where(max_min > 0, 63.0 / max_min, 0.0).astype(_f32)
    ls = np.clip(_rint(inv_scale[:, None] * scale), 0, 63).astype(np.uint8)
    lm = np.clip(_rint(inv_min[:, None] * the_min), 0, 63).astype(np.uint8)
    packed = _pack_scale_min_k4(ls, lm)
    dbytes = _f16_bytes((max_scale / 63.0).astype(_f32))
    dminbytes = _f16_bytes((max_min / 63.0).astype(_f32))

    sc, mn = unpack_scale_min_k4(packed)
    dg = f16_to_f32(dbytes.view(np.uint16)).reshape(nb, 1) * sc
    mg = f16_to_f32(dminbytes.view(np.uint16)).reshape(nb, 1) * mn
    x3 = values.reshape(nb, 8, 32)
    with np.errstate(divide="ignore", invalid="ignore"):
        req = np.clip(_rint((x3 + mg[:, :, None]) / dg[:, :, None]), 0, 31)
    live = (dg != 0)[:, :, None]
    L = np.where(live, req, L).astype(np.uint8)

    # low nibbles pack pairwise per 64-element span; the 5th bit goes to qh
    hi = (L >> 4).astype(np.uint8).reshape(nb, 4, 2, 32)
    lo = (L & 0x0F).reshape(nb, 4, 2, 32)
    qs = _pack_nibble_pairs(lo)
    shifts = (2 * np.arange(4, dtype=np.uint8))[None, :, None]
    qh_bits = (hi[:, :, 0, :] << shifts) | (hi[:, :, 1, :] << (shifts + 1))
    qh = np.bitwise_or.reduce(qh_bits, axis=1).astype(np.uint8)
    return np.concatenate([dbytes, dminbytes, packed, qh, qs], axis=1)


def quant_q6_k(values: np.ndarray) -> np.ndarray:
    nb = values.shape[0]
    x = values.reshape(nb * 16, 16)
    scale, L = _make_qx_quants(x, 32)
    scale = scale.reshape(nb, 16)
    L = L.reshape(nb, 16, 16)

    absmax = np.abs(scale).max(axis=1)
    iamax = np.abs(scale).argmax(axis=1)
    max_scale = np.take_along_axis(scale, iamax[:, None], axis=1)[:, 0]
    dead = absmax < GROUP_MAX_EPS

    safe = np.where(dead, 1.0, max_scale).astype(_f32)
    iscale = (-128.0 / safe).astype(_f32)
    dbytes = _f16_bytes((1.0 / iscale).astype(_f32))
    q_scales = np.minimum(127, _rint(iscale[:, None] * scale)).astype(np.int8)

    dg = f16_to_f32(dbytes.view(np.uint16)).reshape(nb, 1) * q_scales.astype(_f32)
    x3 = values.reshape(nb, 16, 16)
    with np.errstate(divide="ignore", invalid="ignore"):
        req = np.clip(_rint(x3 / dg[:, :, None]), -32, 31) + 32
    live = (dg != 0)[:, :, None]
    L = np.where(live, req, L).astype(np.uint8)

    half = L.reshape(nb, 2, 4, 32)  # two 128-element spans, four 32-slots each
    lo = half & 0x0F
    hi = half >> 4
    ql = np.concatenate(
        [lo[:, :, 0, :] | (lo[:, :, 2, :] << 4), lo[:, :, 1, :] | (lo[:, :, 3, :] << 4)],
        axis=2,
    ).reshape(nb, 128)
    qh = (
        hi[:, :, 0, :] | (hi[:, :, 1, :] << 2) | (hi[:, :, 2, :] << 4) | (hi[:, :, 3, :] << 6)
    ).reshape(nb, 64)
    out = np.concatenate([ql, qh, q_scales.view(np.uint8), dbytes], axis=1)
    out[dead] = 0
    return out


def quant_q2_k(values: np.ndarray) -> np.ndarray:
    nb = values.shape[0]
    x = values.reshape(nb * 16, 16)
    w = np.abs(x)
    scale, the_min, L = _make_qkx2_quants(x, w, 3, -0.5, 0.1, 15, use_mad=True)
    scale = scale.reshape(nb, 16)
    the_min = the_min.reshape(nb, 16)
    L = L.reshape(nb, 16, 16)

    max_scale = scale.max(axis=1)
    max_min = the_min.max(axis=1)
    with np.errstate(divide="ignore"):
        inv_scale = np.where(max_scale > 0, 15.0 / max_scale, 0.0).astype(_f32)
        inv_min = np.where(max_min > 0, 15.0 / max_min, 0.0).astype(_f32)
    ls = np.where(
        max_scale[:, None] > 0, np.clip(_rint(inv_scale[:, None] * scale), 0, 15), 0
    ).astype(np.uint8)
    lm = np.where(
        max_min[:, None] > 0, np.clip(_rint(inv_min[:, None] * the_min), 0, 15), 0
    ).astype(np.uint8)
    scales_bytes = ls | (lm << 4)
    dbytes = _f16_bytes(np.where(max_scale > 0, max_scale / 15.0, 0.0).astype(_f32))
    dminbytes = _f16_bytes(np.where(max_min > 0, max_min / 15.0, 0.0).astype(_f32))

    dg = f16_to_f32(dbytes.view(np.uint16)).reshape(nb, 1) * ls.astype(_f32)
    mg = f16_to_f32(dminbytes.view(np.uint16)).reshape(nb, 1) * lm.astype(_f32)
    x3 = values.reshape(nb, 16, 16)
    with np.errstate(divide="ignore", invalid="ignore"):
        req = np.clip(_rint((x3 + mg[:, :, None]) / dg[:, :, None]), 0, 3)
    live = (dg != 0)[:, :, None]
    L = np.where(live, req, L).astype(np.uint8)

    q4 = L.reshape(nb, 2, 4, 32)  # 128-element spans, 2-bit lanes
    qs = (
        q4[:, :, 0, :] | (q4[:, :, 1, :] << 2) | (q4[:, :, 2, :] << 4) | (q4[:, :, 3, :] << 6)
    ).reshape(nb, 64)
    return np.concatenate([scales_bytes, qs, dbytes, dminbytes], axis=1)


def quant_q3_k(values: np.ndarray) -> np.ndarray:
    nb = values.shape[0]
    x = values.reshape(nb * 16, 16)
    scale, L = _make_q3_quants(x, 4)
    scale = scale.reshape(nb, 16)
    L = L.reshape(nb, 16, 16).astype(np.int16)

    absmax = np.abs(scale).max(axis=1)
    iamax = np.abs(scale).argmax(axis=1)
    max_scale = np.take_along_axis(scale, iamax[:, None], axis=1)[:, 0]
    dead = max_scale == 0

    safe = np.where(dead, 1.0, max_scale).astype(_f32)
    iscale = (-32.0 / safe).astype(_f32)
    l6 = (np.clip(_rint(iscale[:, None] * scale), -32, 31) + 32).astype(np.uint8)
    l6[dead] = 0
    packed = np.zeros((nb, 12), dtype=np.uint8)
    packed[:, 0:8] = l6[:, 0:8] & 0x0F
    packed[:, 0:8] |= (l6[:, 8:16] & 0x0F) << 4
    hi = l6 >> 4  # 2 high bits of each 6-bit scale
    for j in range(16):
        packed[:, 8 + j % 4] |= hi[:, j] << (2 * (j // 4))
    dvals = np.where(dead, 0.0, 1.0 / iscale).astype(_f32)
    dbytes = _f16_bytes(dvals)

    sc = unpack_scales_q3(packed).astype(_f32)
    dg = f16_to_f32(dbytes.view(np.uint16)).reshape(nb, 1) * sc
    x3 = values.reshape(nb, 16, 16)
    with np.errstate(divide="ignore", invalid="ignore"):
        req = np.clip(_rint(x3 / dg[:, :, None]), -4, 3) + 4
    live = (dg != 0)[:, :, None]
    L = np.where(live, req, L).astype(np.uint8)

    flat = L.reshape(nb, QK_K)
    highbit = (flat > 3).astype(np.uint8)
    low = np.where(highbit.astype(bool), flat - 4, flat)
    # hmask: element j contributes bit (j // 32) of byte (j % 32)
    bits = highbit.reshape(nb, 8, 32) << np.arange(8, dtype=np.uint8)[None, :, None]
    hmask = np.bitwise_or.reduce(bits, axis=1).astype(np.uint8)
    q4 = low.reshape(nb, 2, 4, 32)
    qs = (
        q4[:, :, 0, :] | (q4[:, :, 1, :] << 2) | (q4[:, :, 2, :] << 4) | (q4[:, :, 3, :] << 6)
    ).reshape(nb, 64)
    return np.concatenate([hmask, qs, packed, dbytes], axis=1)


def quant_f32(values: np.ndarray) -> np.ndarray:
    return values.astype(np.float32).reshape(values.shape[0], -1).view(np.uint8)


def quant_f16(values: np.ndarray) -> np.ndarray:
    return values.astype(np.float16).reshape(values.shape[0], -1).view(np.uint8)


QUANT_FNS = {
    QuantType.F32: quant_f32,
    QuantType.F16: quant_f16,
    QuantType.Q8_0: quant_q8_0,
    QuantType.Q2_K: quant_q2_k,
    QuantType.Q3_K: quant_q3_k,
    QuantType.Q4_K: quant_q4_k,
    QuantType.Q5_K: quant_q5_k,
    QuantType.Q6_K: quant_q6_k,
}


def quantize_blocks(values: np.ndarray, qtype: QuantType) -> np.ndarray:
    """(n_blocks, block_elems) float32 -> (n_blocks, block_bytes) uint8."""
    block_elems, block_bytes = geometry(qtype)
    values = np.ascontiguousarray(values, dtype=np.float32)
    if values.ndim != 2 or values.shape[1] != block_elems:
        raise GeometryMismatch(
            f"expected (n, {block_elems}) input for {QuantType(qtype).name}, got {values.shape}"
        )
    if not np.isfinite(values).all():
        raise NonFiniteInput("NaN or Inf in values to quantize")
    fn = QUANT_FNS.get(QuantType(qtype))
    if fn is None:
        raise UnsupportedQuantType(qtype, "quantize")
    out = fn(values)
    assert out.shape == (values.shape[0], block_bytes)
    return out


def quantize_block(values: np.ndarray, qtype: QuantType) -> bytes:
    """Single-block convenience wrapper."""
    return quantize_blocks(np.asarray(values, dtype=np.float32).reshape(1, -1), qtype).tobytes()


def quantize_tensor(values: np.ndarray, qtype: QuantType) -> bytes:
    """Quantize a row-major array; the last axis is the quantized dimension."""
    block_elems, _ = geometry(qtype)
    arr = np.ascontiguousarray(values, dtype=np.float32)
    if arr.shape[-1] % block_elems != 0:
        raise GeometryMismatch(
            f"last dim {arr.shape[-1]} not a multiple of {QuantType(qtype).name} "
            f"block size {block_elems}"
        )
    return quantize_blocks(arr.reshape(-1, block_elems), qtype).tobytes()


# ---------------------------------------------------------------------------
# round-trip error statistics
# ---------------------------------------------------------------------------

@dataclass
class QuantErrorStats:
    qtype: QuantType
    rms_error: float
    max_abs_error: float
    bits_per_weight: float


def quant_error_report(values: np.ndarray, qtype: QuantType) -> QuantErrorStats:
    """Quantize-dequantize round trip error over a float32 array."""
    block_elems, block_bytes = geometry(qtype)
    arr = np.ascontiguousarray(values, dtype=np.float32).reshape(-1, block_elems)
    packed = quantize_blocks(arr, qtype)
    restored = DEQUANT_FNS[QuantType(qtype)](packed)
    err = (restored.astype(np.float64) - arr.astype(np.float64)).ravel()
    return QuantErrorStats(
        qtype=QuantType(qtype),
        rms_error=float(np.sqrt(np.mean(err * err))),
        max_abs_error=float(np.abs(err).max()) if err.size else 0.0,
        bits_per_weight=block_bytes * 8.0 / block_elems,
    )
