"""Offline Vietnamese-English translation engine on quantized GGUF models."""

__version__ = "0.1.0"

__all__ = ["__version__"]
