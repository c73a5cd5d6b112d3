"""GGUF binary format constants and error types."""
from __future__ import annotations

from enum import IntEnum

MAGIC = b"GGUF"
SUPPORTED_VERSION = 3
DEFAULT_ALIGNMENT = 32
ALIGNMENT_KEY = "general.alignment"


class GgufValueType(IntEnum):
    UINT8 = 0
    INT8 = 1
    UINT16 = 2
    INT16 = 3
    UINT32 = 4
    INT32 = 5
    FLOAT32 = 6
    BOOL = 7
    STRING = 8
    ARRAY = 9
    UINT64 = 10
    INT64 = 11
    FLOAT64 = 12


class GgufError(Exception):
    """Base for all GGUF container errors."""


class UnsupportedMagic(GgufError):
    pass


class UnsupportedVersion(GgufError):
    pass


class TruncatedFile(GgufError):
    pass


class MalformedMetadata(GgufError):
    pass


class DuplicateTensorName(GgufError):
    pass


class NotFound(GgufError, KeyError):
    pass


class TypeMismatch(GgufError, TypeError):
    pass
