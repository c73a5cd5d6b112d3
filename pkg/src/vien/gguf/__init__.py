"""GGUF model-file container: parse, inspect, validate, write."""
from .constants import (
    ALIGNMENT_KEY,
    DEFAULT_ALIGNMENT,
    MAGIC,
    SUPPORTED_VERSION,
    DuplicateTensorName,
    GgufError,
    GgufValueType,
    MalformedMetadata,
    NotFound,
    TruncatedFile,
    TypeMismatch,
    UnsupportedMagic,
    UnsupportedVersion,
)
from .reader import GgufFile, MetaValue, TensorInfo, TensorView, metadata_get, parse, tensor_view
from .validate import ValidationReport, Violation, dominant_qtype, quant_histogram, validate
from .writer import TensorSpec, tensor_spec_f32, write

__all__ = [
    "ALIGNMENT_KEY",
    "DEFAULT_ALIGNMENT",
    "MAGIC",
    "SUPPORTED_VERSION",
    "DuplicateTensorName",
    "GgufError",
    "GgufFile",
    "GgufValueType",
    "MalformedMetadata",
    "MetaValue",
    "NotFound",
    "TensorInfo",
    "TensorSpec",
    "TensorView",
    "TruncatedFile",
    "TypeMismatch",
    "UnsupportedMagic",
    "UnsupportedVersion",
    "ValidationReport",
    "Violation",
    "metadata_get",
    "parse",
    "tensor_spec_f32",
    "tensor_view",
    "validate",
    "quant_histogram",
    "dominant_qtype",
    "write",
]
