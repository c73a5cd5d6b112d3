"""GGUF parsing: header, typed metadata, tensor directory, zero-copy views.

parse() materializes the metadata and the tensor directory only; tensor
payload bytes are never touched (a file cut off right after the directory
still parses). Byte-range checks against the payload region happen in
tensor_view() and validate().
"""
from __future__ import annotations

import mmap
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..quant.types import QuantType, known_type, tensor_byte_size
from .constants import (
    ALIGNMENT_KEY,
    DEFAULT_ALIGNMENT,
    MAGIC,
    SUPPORTED_VERSION,
    DuplicateTensorName,
    GgufValueType,
    MalformedMetadata,
    NotFound,
    TruncatedFile,
    TypeMismatch,
    UnsupportedMagic,
    UnsupportedVersion,
)

_SCALAR_FMT = {
    GgufValueType.UINT8: "<B",
    GgufValueType.INT8: "<b",
    GgufValueType.UINT16: "<H",
    GgufValueType.INT16: "<h",
    GgufValueType.UINT32: "<I",
    GgufValueType.INT32: "<i",
    GgufValueType.FLOAT32: "<f",
    GgufValueType.UINT64: "<Q",
    GgufValueType.INT64: "<q",
    GgufValueType.FLOAT64: "<d",
}


@dataclass(frozen=True)
class MetaValue:
    """One metadata entry: a tagged scalar, string, or homogeneous array."""

    tag: GgufValueType
    value: object
    elem_tag: GgufValueType | None = None  # set iff tag == ARRAY

    @classmethod
    def of(cls, tag: GgufValueType, value, elem_tag: GgufValueType | None = None) -> "MetaValue":
        tag = GgufValueType(tag)
        if tag == GgufValueType.ARRAY:
            if elem_tag is None:
                raise ValueError("array MetaValue needs elem_tag")
            return cls(tag, list(value), GgufValueType(elem_tag))
        if elem_tag is not None:
            raise ValueError("elem_tag only valid for arrays")
        if tag == GgufValueType.BOOL:
            value = bool(value)
        elif tag == GgufValueType.STRING:
            value = str(value)
        elif tag in (GgufValueType.FLOAT32, GgufValueType.FLOAT64):
            value = float(value)
        else:
            value = int(value)
        return cls(tag, value)

    @classmethod
    def u32(cls, v) -> "MetaValue":
        return cls.of(GgufValueType.UINT32, v)

    @classmethod
    def i32(cls, v) -> "MetaValue":
        return cls.of(GgufValueType.INT32, v)

    @classmethod
    def u64(cls, v) -> "MetaValue":
        return cls.of(GgufValueType.UINT64, v)

    @classmethod
    def f32(cls, v) -> "MetaValue":
        return cls.of(GgufValueType.FLOAT32, v)

    @classmethod
    def boolean(cls, v) -> "MetaValue":
        return cls.of(GgufValueType.BOOL, v)

    @classmethod
    def string(cls, v) -> "MetaValue":
        return cls.of(GgufValueType.STRING, v)

    @classmethod
    def array(cls, elem_tag: GgufValueType, values) -> "MetaValue":
        return cls.of(GgufValueType.ARRAY, values, elem_tag)


@dataclass(frozen=True)
class TensorInfo:
    """Directory entry. dims are in stored order: dims[0] is the quantized
    (contiguous row) extent; the logical numpy shape is reversed(dims)."""

    name: str
    dims: tuple[int, ...]
    qtype: int  # QuantType when known; raw id preserved for opaque tensors
    offset: int  # bytes, relative to data_offset

    @property
    def known(self) -> bool:
        return known_type(self.qtype)

    @property
    def byte_size(self) -> int | None:
        """Exact payload size for known types, None for opaque ones."""
        return tensor_byte_size(QuantType(self.qtype), self.dims) if self.known else None

    @property
    def logical_shape(self) -> tuple[int, ...]:
        return tuple(reversed(self.dims))

    @property
    def n_elems(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n


@dataclass(frozen=True)
class TensorView:
    """Zero-copy handle on one tensor's packed payload bytes."""

    name: str
    qtype: int
    dims: tuple[int, ...]
    data: np.ndarray  # uint8 view into the parsed buffer

    @property
    def logical_shape(self) -> tuple[int, ...]:
        return tuple(reversed(self.dims))


@dataclass
class GgufFile:
    version: int
    alignment: int
    metadata: dict[str, MetaValue]
    tensors: list[TensorInfo]
    data_offset: int
    total_size: int
    _buf: np.ndarray = field(repr=False, default=None)
    _index: dict[str, TensorInfo] = field(repr=False, default_factory=dict)

    def tensor(self, name: str) -> TensorInfo:
        info = self._index.get(name)
        if info is None:
            raise NotFound(f"no tensor named {name!r}")
        return info


class _Cursor:
    def __init__(self, buf: np.ndarray):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if self.pos + n > self.buf.size:
            raise TruncatedFile(
                f"need {n} bytes at offset {self.pos}, file has {self.buf.size}"
            )
        out = memoryview(self.buf[self.pos : self.pos + n])
        self.pos += n
        return out

    def scalar(self, fmt: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))[0]

    def u32(self) -> int:
        return self.scalar("<I")

    def u64(self) -> int:
        return self.scalar("<Q")

    def string(self) -> str:
        n = self.u64()
        raw = self.take(n)
        try:
            return bytes(raw).decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedMetadata(f"invalid UTF-8 in string at offset {self.pos - n}: {e}")


def _read_value(cur: _Cursor, tag_id: int) -> MetaValue:
    try:
        tag = GgufValueType(tag_id)
    except ValueError:
        raise MalformedMetadata(f"unknown metadata value tag {tag_id}")
    if tag == GgufValueType.STRING:
        return MetaValue(tag, cur.string())
    if tag == GgufValueType.BOOL:
        return MetaValue(tag, cur.scalar("<B") != 0)
    if tag == GgufValueType.ARRAY:
        elem_id = cur.u32()
        try:
            elem_tag = GgufValueType(elem_id)
        except ValueError:
            raise MalformedMetadata(f"unknown array element tag {elem_id}")
        if elem_tag == GgufValueType.ARRAY:
            raise MalformedMetadata("nested arrays are not valid metadata")
        count = cur.u64()
        if elem_tag == GgufValueType.STRING:
            vals = [cur.string() for _ in range(count)]
        elif elem_tag == GgufValueType.BOOL:
            vals = [cur.scalar("<B") != 0 for _ in range(count)]
        else:
            fmt = _SCALAR_FMT[elem_tag]
            size = struct.calcsize(fmt)
            raw = cur.take(size * count)
            vals = [v[0] for v in struct.iter_unpack(fmt, raw)]
        return MetaValue(tag, vals, elem_tag)
    return MetaValue(tag, cur.scalar(_SCALAR_FMT[tag]))


def _as_buffer(source) -> np.ndarray:
    if isinstance(source, (str, Path)):
        with open(source, "rb") as f:
            mapped = mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)
        return np.frombuffer(mapped, dtype=np.uint8)
    if isinstance(source, (bytes, bytearray, memoryview)):
        return np.frombuffer(source, dtype=np.uint8)
    if isinstance(source, np.ndarray):
        return source.view(np.uint8).reshape(-1)
    raise TypeError(f"cannot read GGUF from {type(source).__name__}")


def parse(source) -> GgufFile:
    """Parse a GGUF file from a path, bytes, or uint8 array.

    Only the header, metadata, and tensor directory are read; payload bytes
    are left untouched (and may be absent or unmapped).
    """
    buf = _as_buffer(source)
    cur = _Cursor(buf)

    magic = bytes(cur.take(4))
    if magic != MAGIC:
        raise UnsupportedMagic(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = cur.u32()
    if version != SUPPORTED_VERSION:
        raise UnsupportedVersion(f"version {version} not supported (only {SUPPORTED_VERSION})")
    tensor_count = cur.u64()
    kv_count = cur.u64()

    metadata: dict[str, MetaValue] = {}
    for _ in range(kv_count):
        key = cur.string()
        tag_id = cur.u32()
        if key in metadata:
            raise MalformedMetadata(f"duplicate metadata key {key!r}")
        metadata[key] = _read_value(cur, tag_id)

    alignment = DEFAULT_ALIGNMENT
    if ALIGNMENT_KEY in metadata:
        align_val = metadata[ALIGNMENT_KEY]
        if align_val.tag != GgufValueType.UINT32 or align_val.value <= 0:
            raise MalformedMetadata(f"{ALIGNMENT_KEY} must be a positive uint32")
        alignment = int(align_val.value)

    tensors: list[TensorInfo] = []
    index: dict[str, TensorInfo] = {}
    for _ in range(tensor_count):
        name = cur.string()
        n_dims = cur.u32()
        if n_dims > 4:
            raise MalformedMetadata(f"tensor {name!r} declares {n_dims} dims (max 4)")
        dims = tuple(cur.u64() for _ in range(n_dims))
        qtype_id = cur.u32()
        offset = cur.u64()
        qtype = QuantType(qtype_id) if known_type(qtype_id) else qtype_id
        info = TensorInfo(name=name, dims=dims, qtype=qtype, offset=offset)
        if name in index:
            raise DuplicateTensorName(f"tensor {name!r} appears twice")
        index[name] = info
        tensors.append(info)

    data_offset = (cur.pos + alignment - 1) // alignment * alignment
    return GgufFile(
        version=version,
        alignment=alignment,
        metadata=metadata,
        tensors=tensors,
        data_offset=data_offset,
        total_size=buf.size,
        _buf=buf,
        _index=index,
    )


def metadata_get(file: GgufFile, key: str, expected: GgufValueType | None = None):
    """Return the unwrapped value for key; check the tag when given."""
    mv = file.metadata.get(key)
    if mv is None:
        raise NotFound(f"no metadata key {key!r}")
    if expected is not None and mv.tag != GgufValueType(expected):
        raise TypeMismatch(
            f"metadata key {key!r} has tag {mv.tag.name}, requested {GgufValueType(expected).name}"
        )
    return mv.value


def tensor_view(file: GgufFile, name: str) -> TensorView:
    """Zero-copy byte span for one tensor.

    For known quantization types the span length is exactly the size implied
    by dims and block geometry; opaque types get the bytes up to the next
    tensor (or the end of the file).
    """
    info = file.tensor(name)
    start = file.data_offset + info.offset
    size = info.byte_size
    if size is None:
        following = [t.offset for t in file.tensors if t.offset > info.offset]
        end = file.data_offset + min(following) if following else file.total_size
        size = max(0, end - start)
    if start + size > file.total_size:
        raise TruncatedFile(
            f"tensor {name!r} needs bytes [{start}, {start + size}), file has {file.total_size}"
        )
    return TensorView(
        name=info.name,
        qtype=info.qtype,
        dims=info.dims,
        data=file._buf[start : start + size],
    )
