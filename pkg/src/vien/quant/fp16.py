"""IEEE 754 binary16 <-> binary32 conversion on raw bit patterns.

numpy's float16 is IEEE binary16 (subnormals, inf and NaN included), so the
conversions are reinterpret-casts plus an astype. Kept as named functions
because writer paths and tests talk about bit patterns, not arrays.
"""
from __future__ import annotations

import numpy as np


def f16_to_f32(bits: int | np.ndarray) -> np.float32 | np.ndarray:
    """Decode uint16 bit pattern(s) to float32. Total function; inf/NaN propagate."""
    arr = np.asarray(bits, dtype=np.uint16)
    out = arr.view(np.float16).astype(np.float32)
    return out if out.ndim else np.float32(out)


def f32_to_f16(value: float | np.ndarray) -> int | np.ndarray:
    """Encode float32 value(s) to uint16 bit pattern(s), round-to-nearest-even."""
    arr = np.asarray(value, dtype=np.float32)
    out = arr.astype(np.float16).view(np.uint16)
    return out if out.ndim else int(out)
