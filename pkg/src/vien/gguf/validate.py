"""Structural validation of parsed GGUF files.

Problems are collected as report entries, never raised; validate() reads the
directory only and does not mutate the file.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..quant.types import QuantType, geometry, known_type
from .reader import GgufFile


@dataclass(frozen=True)
class Violation:
    code: str  # Overlap | Truncated | Misaligned | BlockSize
    subject: str  # tensor name or metadata key
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    tensor_count: int = 0
    metadata_count: int = 0
    file_bytes: int = 0
    declared_bytes: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(file: GgufFile) -> ValidationReport:
    report = ValidationReport(
        tensor_count=len(file.tensors),
        metadata_count=len(file.metadata),
        file_bytes=file.total_size,
        declared_bytes=file.data_offset,
    )

    def flag(code: str, subject: str, message: str) -> None:
        report.violations.append(Violation(code, subject, message))

    if file.data_offset % file.alignment != 0:
        flag("Misaligned", "<data region>", f"data_offset {file.data_offset} not a multiple of {file.alignment}")

    spans = []
    for t in file.tensors:
        if t.offset % file.alignment != 0:
            flag("Misaligned", t.name, f"offset {t.offset} not a multiple of {file.alignment}")
        if not known_type(t.qtype):
            continue  # opaque: no geometry to check
        qt = QuantType(t.qtype)
        block_elems, _ = geometry(qt)
        if t.dims and t.dims[0] % block_elems != 0:
            flag(
                "BlockSize",
                t.name,
                f"quantized extent {t.dims[0]} not a multiple of {qt.name} block size {block_elems}",
            )
            continue
        size = t.byte_size
        end = file.data_offset + t.offset + size
        report.declared_bytes = max(report.declared_bytes, end)
        if end > file.total_size:
            flag("Truncated", t.name, f"needs bytes up to {end}, file has {file.total_size}")
        spans.append((t.offset, t.offset + size, t.name))

    spans.sort()
    for (s0, e0, n0), (s1, e1, n1) in zip(spans, spans[1:]):
        if s1 < e0:
            flag("Overlap", n1, f"bytes [{s1}, {e1}) overlap {n0!r} [{s0}, {e0})")

    return report


def quant_histogram(file: GgufFile) -> dict:
    """Per-qtype tensor counts and byte totals, largest byte total first.

    Opaque qtypes appear under ``id=<n>`` with a byte total of 0 (their
    payload size is not derivable from the directory alone).
    """
    tally = {}
    for t in file.tensors:
        name = QuantType(t.qtype).name if t.known else f"id={t.qtype}"
        count, total = tally.get(name, (0, 0))
        tally[name] = (count + 1, total + (t.byte_size or 0))
    ordered = sorted(tally.items(), key=lambda kv: (-kv[1][1], kv[0]))
    return {name: {"tensors": count, "bytes": total} for name, (count, total) in ordered}


def dominant_qtype(file: GgufFile) -> str:
    """Name of the qtype holding the most bytes, or ``F32`` for empty files."""
    hist = quant_histogram(file)
    return next(iter(hist), "F32")
