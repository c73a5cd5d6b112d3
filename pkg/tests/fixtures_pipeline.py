"""Builder for a tiny end-to-end translatable model file.

Combines the random decoder weights from fixtures_model with the
committed 512-piece tokenizer fixture so sessions built from it exercise
the full pipeline: prompt building, encoding, generation, decoding.
"""

from __future__ import annotations

from fixtures_model import build_model_file
from fixtures_tokenizer import load_raw_vocab, vocab_metadata
from vien.gguf import MetaValue
from vien.quant import QuantType


def build_pipeline_file(
    seed: int = 0,
    n_layers: int = 2,
    embed_dim: int = 64,
    n_heads: int = 4,
    n_kv_heads: int = 2,
    ffn_hidden_dim: int = 128,
    context_len: int = 256,
    qtype: QuantType = QuantType.F32,
    chat_template: str | None = None,
) -> bytes:
    raw = load_raw_vocab()
    extra = vocab_metadata(raw)
    extra.pop("llama.vocab_size", None)
    if chat_template is not None:
        extra["tokenizer.chat_template"] = MetaValue.string(chat_template)
    blob, _, _ = build_model_file(
        seed=seed,
        n_layers=n_layers,
        embed_dim=embed_dim,
        n_heads=n_heads,
        n_kv_heads=n_kv_heads,
        ffn_hidden_dim=ffn_hidden_dim,
        vocab_size=len(raw["pieces"]),
        context_len=context_len,
        qtype=qtype,
        extra_meta=extra,
    )
    return blob
