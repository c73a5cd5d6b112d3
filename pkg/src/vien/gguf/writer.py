"""GGUF writing, for test fixtures and re-quantized output.

parse(write(spec)) reproduces the spec field-for-field: metadata order,
tensor order, dims, qtypes, and payload bytes.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..quant.types import (
    GeometryMismatch,
    QuantType,
    UnsupportedQuantType,
    known_type,
    tensor_byte_size,
)
from .constants import (
    ALIGNMENT_KEY,
    DEFAULT_ALIGNMENT,
    MAGIC,
    SUPPORTED_VERSION,
    DuplicateTensorName,
    GgufValueType,
    MalformedMetadata,
)
from .reader import MetaValue, _SCALAR_FMT


@dataclass
class TensorSpec:
    """One tensor to write: dims in stored order (dims[0] = quantized extent)."""

    name: str
    dims: tuple[int, ...]
    qtype: QuantType
    payload: bytes


def _pack_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<Q", len(raw)) + raw


def _pack_value(mv: MetaValue) -> bytes:
    if mv.tag == GgufValueType.STRING:
        return _pack_string(mv.value)
    if mv.tag == GgufValueType.BOOL:
        return struct.pack("<B", 1 if mv.value else 0)
    if mv.tag == GgufValueType.ARRAY:
        out = [struct.pack("<IQ", int(mv.elem_tag), len(mv.value))]
        if mv.elem_tag == GgufValueType.STRING:
            out += [_pack_string(v) for v in mv.value]
        elif mv.elem_tag == GgufValueType.BOOL:
            out += [struct.pack("<B", 1 if v else 0) for v in mv.value]
        else:
            fmt = _SCALAR_FMT[mv.elem_tag]
            out += [struct.pack(fmt, v) for v in mv.value]
        return b"".join(out)
    return struct.pack(_SCALAR_FMT[mv.tag], mv.value)


def write(
    metadata: dict[str, MetaValue],
    tensors: list[TensorSpec],
    alignment: int = DEFAULT_ALIGNMENT,
) -> bytes:
    """Serialize a complete GGUF file and return its bytes."""
    if alignment <= 0:
        raise ValueError("alignment must be positive")

    metadata = dict(metadata)
    if alignment != DEFAULT_ALIGNMENT and ALIGNMENT_KEY not in metadata:
        metadata[ALIGNMENT_KEY] = MetaValue.u32(alignment)
    if ALIGNMENT_KEY in metadata:
        mv = metadata[ALIGNMENT_KEY]
        if mv.tag != GgufValueType.UINT32 or int(mv.value) != alignment:
            raise MalformedMetadata(
                f"{ALIGNMENT_KEY} metadata ({mv.value!r}) disagrees with alignment={alignment}"
            )

    seen = set()
    offsets = []
    pos = 0
    for t in tensors:
        if t.name in seen:
            raise DuplicateTensorName(f"tensor {t.name!r} appears twice")
        seen.add(t.name)
        if not known_type(t.qtype):
            raise UnsupportedQuantType(t.qtype, "write")
        expect = tensor_byte_size(QuantType(t.qtype), t.dims)
        if len(t.payload) != expect:
            raise GeometryMismatch(
                f"tensor {t.name!r}: payload is {len(t.payload)}B, dims {t.dims} with "
                f"{QuantType(t.qtype).name} needs {expect}B"
            )
        pos = (pos + alignment - 1) // alignment * alignment
        offsets.append(pos)
        pos += len(t.payload)

    head = [MAGIC, struct.pack("<IQQ", SUPPORTED_VERSION, len(tensors), len(metadata))]
    for key, mv in metadata.items():
        head.append(_pack_string(key))
        head.append(struct.pack("<I", int(mv.tag)))
        head.append(_pack_value(mv))
    for t, off in zip(tensors, offsets):
        head.append(_pack_string(t.name))
        head.append(struct.pack("<I", len(t.dims)))
        head.append(struct.pack(f"<{len(t.dims)}Q", *t.dims))
        head.append(struct.pack("<IQ", int(t.qtype), off))
    header = b"".join(head)

    data_offset = (len(header) + alignment - 1) // alignment * alignment
    parts = [header, b"\x00" * (data_offset - len(header))]
    pos = 0
    for t, off in zip(tensors, offsets):
        parts.append(b"\x00" * (off - pos))
        parts.append(bytes(t.payload))
        pos = off + len(t.payload)
    return b"".join(parts)


def tensor_spec_f32(name: str, array: np.ndarray) -> TensorSpec:
    """TensorSpec for a float32 array; dims are reversed numpy shape."""
    arr = np.ascontiguousarray(array, dtype=np.float32)
    return TensorSpec(
        name=name,
        dims=tuple(reversed(arr.shape)),
        qtype=QuantType.F32,
        payload=arr.tobytes(),
    )
