"""Llama-architecture decoder over quantized weights with a KV cache.

The model is loaded lazily: :func:`load_model` resolves and shape-checks
every weight view but copies no payloads.  Matrix multiplies stream
through the quantized kernels; activations are float32 throughout, so
quantization affects storage only.  Small norm vectors are dequantized on
first use and cached per model.

Decoding conventions fixed here:

* Rotary positions rotate adjacent coordinate pairs ``(v[2j], v[2j+1])``
  by ``position * theta**(-2j/head_dim)``.
* Greedy sampling (temperature 0) is an exact argmax with ties broken
  toward the lowest token id.
* A stop token is consumed but neither passed to the sink nor included
  in the returned ids.
* On context exhaustion mid-generation the turn stops cleanly and is
  marked truncated (``stop_reason == "context_overflow"``); there is no
  sliding-window eviction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .gguf import GgufFile, GgufValueType, NotFound, TensorView, metadata_get, tensor_view
from .quant import (
    CODEC_TYPES,
    QuantType,
    UnsupportedQuantType,
    dequantize_blocks,
    dequantize_rows,
    matmul_q,
)

log = logging.getLogger(__name__)

ARCHITECTURE_KEY = "general.architecture"

KEY_BLOCK_COUNT = "llama.block_count"
KEY_EMBED_DIM = "llama.embedding_length"
KEY_HEAD_COUNT = "llama.attention.head_count"
KEY_HEAD_COUNT_KV = "llama.attention.head_count_kv"
KEY_FFN_DIM = "llama.feed_forward_length"
KEY_CONTEXT_LEN = "llama.context_length"
KEY_VOCAB_SIZE = "llama.vocab_size"
KEY_ROPE_THETA = "llama.rope.freq_base"
KEY_RMS_EPS = "llama.attention.layer_norm_rms_epsilon"
KEY_TOKENS = "tokenizer.ggml.tokens"

DEFAULT_ROPE_THETA = 10000.0
DEFAULT_RMS_EPS = 1e-5


class InferenceError(Exception):
    """Base class for inference-core errors."""


class UnsupportedArchitecture(InferenceError):
    """The file does not declare a loadable llama-architecture model."""


class MissingTensor(InferenceError):
    """A weight required by the declared configuration is absent."""


class ShapeMismatch(InferenceError):
    """A weight's dims disagree with the shape implied by the config."""


class LengthMismatch(InferenceError):
    """Two vectors that must match in length do not."""


class OddHeadDim(InferenceError):
    """Rotary positions require an even per-head dimension."""


class ContextOverflow(InferenceError):
    """The requested tokens do not fit in the remaining context window."""


class NonFiniteActivation(InferenceError):
    """An activation became NaN or infinite (indicates corrupt weights)."""


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters, read from model metadata."""

    n_layers: int
    embed_dim: int
    n_heads: int
    n_kv_heads: int
    ffn_hidden_dim: int
    vocab_size: int
    context_len: int
    rope_theta: float = DEFAULT_ROPE_THETA
    rmsnorm_eps: float = DEFAULT_RMS_EPS

    def __post_init__(self) -> None:
        extents = (
            self.n_layers,
            self.embed_dim,
            self.n_heads,
            self.n_kv_heads,
            self.ffn_hidden_dim,
            self.vocab_size,
            self.context_len,
        )
        if any(int(e) < 1 for e in extents):
            raise ShapeMismatch(f"all config extents must be positive, got {self}")
        if self.embed_dim % self.n_heads:
            raise ShapeMismatch(
                f"embed_dim {self.embed_dim} not divisible by "
                f"n_heads {self.n_heads}"
            )
        if self.n_heads % self.n_kv_heads:
            raise ShapeMismatch(
                f"n_heads {self.n_heads} not divisible by "
                f"n_kv_heads {self.n_kv_heads}"
            )

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.n_heads

    @property
    def kv_dim(self) -> int:
        return self.n_kv_heads * self.head_dim


@dataclass(frozen=True)
class LayerWeights:
    attn_norm: TensorView
    wq: TensorView
    wk: TensorView
    wv: TensorView
    wo: TensorView
    ffn_norm: TensorView
    w_gate: TensorView
    w_up: TensorView
    w_down: TensorView


@dataclass(frozen=True)
class Model:
    """Immutable, shareable weight handles plus the parsed config."""

    config: ModelConfig
    token_embd: TensorView
    layers: tuple
    output_norm: TensorView
    output: TensorView
    _vectors: dict = field(default_factory=dict, repr=False, compare=False)

    def norm_vector(self, view: TensorView) -> np.ndarray:
        """Dequantize a small 1-D weight, caching the result by name."""
        vec = self._vectors.get(view.name)
        if vec is None:
            vec = dequantize_blocks(view.data, view.qtype).reshape(-1)
            self._vectors[view.name] = vec
        return vec


class KvCache:
    """Per-layer key/value tensors for incremental decoding.

    Entries beyond ``filled_len`` are never read; a cache is single-writer
    (one generation at a time).
    """

    def __init__(self, config: ModelConfig):
        shape = (config.n_layers, config.n_kv_heads, config.context_len, config.head_dim)
        self.k = np.zeros(shape, dtype=np.float32)
        self.v = np.zeros(shape, dtype=np.float32)
        self.filled_len = 0
        self.context_len = config.context_len

    def reset(self) -> None:
        self.filled_len = 0


@dataclass(frozen=True)
class GenParams:
    """Decoding parameters; ``temperature`` 0 means greedy argmax."""

    max_new_tokens: int = 64
    temperature: float = 0.0
    stop_token_ids: frozenset = frozenset()
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        object.__setattr__(self, "stop_token_ids", frozenset(self.stop_token_ids))


@dataclass(frozen=True)
class GenerationResult:
    """Generated ids (stop token excluded) and why generation stopped."""

    ids: tuple
    stop_reason: str  # "stop_token" | "max_new_tokens" | "context_overflow"

    @property
    def truncated(self) -> bool:
        return self.stop_reason == "context_overflow"


def _meta(file: GgufFile, key: str, expected: GgufValueType):
    try:
        return metadata_get(file, key, expected)
    except NotFound:
        raise UnsupportedArchitecture(
            f"required metadata key {key!r} is missing"
        ) from None


def _meta_default(file: GgufFile, key: str, expected: GgufValueType, default: float) -> float:
    try:
        return float(metadata_get(file, key, expected))
    except NotFound:
        log.info("metadata key %s absent; defaulting to %s", key, default)
        return float(default)


def _vocab_size(file: GgufFile) -> int:
    try:
        return int(metadata_get(file, KEY_VOCAB_SIZE, GgufValueType.UINT32))
    except NotFound:
        pass
    try:
        return len(metadata_get(file, KEY_TOKENS, GgufValueType.ARRAY))
    except NotFound:
        raise UnsupportedArchitecture(
            f"neither {KEY_VOCAB_SIZE!r} nor {KEY_TOKENS!r} is present; "
            f"vocab size is undeclared"
        ) from None


def _weight(file: GgufFile, name: str, want_shape: tuple) -> TensorView:
    try:
        info = file.tensor(name)
    except NotFound:
        raise MissingTensor(f"tensor {name!r} is missing") from None
    qtype = info.qtype
    if not isinstance(qtype, QuantType) or qtype not in CODEC_TYPES:
        raise UnsupportedQuantType(qtype, f"load weight {name!r}")
    view = tensor_view(file, name)
    if view.logical_shape != tuple(want_shape):
        raise ShapeMismatch(
            f"tensor {name!r} has shape {view.logical_shape}, "
            f"config implies {tuple(want_shape)}"
        )
    return view


def load_model(file: GgufFile) -> Model:
    """Resolve config and weight views from a llama-architecture GGUF file.

    No weight payloads are copied; views point into the parsed buffer.

    Raises:
        UnsupportedArchitecture: architecture key absent or not "llama",
            or required config metadata missing.
        MissingTensor: a required weight is absent.
        ShapeMismatch: a weight or config extent disagrees with the config.
        UnsupportedQuantType: a weight uses a type without a codec.
    """
    try:
        arch = metadata_get(file, ARCHITECTURE_KEY, GgufValueType.STRING)
    except NotFound:
        raise UnsupportedArchitecture("file declares no architecture") from None
    if arch != "llama":
        raise UnsupportedArchitecture(f"architecture {arch!r} is not supported")

    config = ModelConfig(
        n_layers=int(_meta(file, KEY_BLOCK_COUNT, GgufValueType.UINT32)),
        embed_dim=int(_meta(file, KEY_EMBED_DIM, GgufValueType.UINT32)),
        n_heads=int(_meta(file, KEY_HEAD_COUNT, GgufValueType.UINT32)),
        n_kv_heads=int(_meta(file, KEY_HEAD_COUNT_KV, GgufValueType.UINT32)),
        ffn_hidden_dim=int(_meta(file, KEY_FFN_DIM, GgufValueType.UINT32)),
        vocab_size=_vocab_size(file),
        context_len=int(_meta(file, KEY_CONTEXT_LEN, GgufValueType.UINT32)),
        rope_theta=_meta_default(
            file, KEY_ROPE_THETA, GgufValueType.FLOAT32, DEFAULT_ROPE_THETA
        ),
        rmsnorm_eps=_meta_default(
            file, KEY_RMS_EPS, GgufValueType.FLOAT32, DEFAULT_RMS_EPS
        ),
    )

    d, kv, ffn, vocab = config.embed_dim, config.kv_dim, config.ffn_hidden_dim, config.vocab_size
    token_embd = _weight(file, "token_embd.weight", (vocab, d))
    layers = []
    for i in range(config.n_layers):
        prefix = f"blk.{i}."
        layers.append(
            LayerWeights(
                attn_norm=_weight(file, prefix + "attn_norm.weight", (d,)),
                wq=_weight(file, prefix + "attn_q.weight", (d, d)),
                wk=_weight(file, prefix + "attn_k.weight", (kv, d)),
                wv=_weight(file, prefix + "attn_v.weight", (kv, d)),
                wo=_weight(file, prefix + "attn_output.weight", (d, d)),
                ffn_norm=_weight(file, prefix + "ffn_norm.weight", (d,)),
                w_gate=_weight(file, prefix + "ffn_gate.weight", (ffn, d)),
                w_up=_weight(file, prefix + "ffn_up.weight", (ffn, d)),
                w_down=_weight(file, prefix + "ffn_down.weight", (d, ffn)),
            )
        )
    output_norm = _weight(file, "output_norm.weight", (d,))
    try:
        output = _weight(file, "output.weight", (vocab, d))
    except MissingTensor:
        # Tied embeddings: reuse the token embedding as the output head.
        log.info("output.weight absent; tying to token_embd.weight")
        output = token_embd

    return Model(
        config=config,
        token_embd=token_embd,
        layers=tuple(layers),
        output_norm=output_norm,
        output=output,
    )


def rms_norm(x: np.ndarray, w: np.ndarray, eps: float) -> np.ndarray:
    """Normalize ``x`` by its root mean square and scale by ``w``.

    Raises:
        LengthMismatch: ``x`` and ``w`` differ in length.
    """
    x = np.asarray(x, dtype=np.float32)
    w = np.asarray(w, dtype=np.float32)
    if x.shape[-1] != w.shape[-1] or w.ndim != 1:
        raise LengthMismatch(f"x has {x.shape[-1]} entries, w has {w.shape}")
    mean_sq = np.mean(np.square(x, dtype=np.float32), axis=-1, keepdims=True)
    return (x / np.sqrt(mean_sq + np.float32(eps))) * w


def rope_apply(vec: np.ndarray, position: int, theta: float) -> np.ndarray:
    """Rotate adjacent coordinate pairs of one head vector by position.

    Pair ``j`` rotates by angle ``position * theta**(-2j/head_dim)``.

    Raises:
        OddHeadDim: the vector length is odd.
    """
    vec = np.asarray(vec, dtype=np.float32)
    if vec.shape[-1] % 2:
        raise OddHeadDim(f"head dim {vec.shape[-1]} is odd")
    return _rope_rows(vec.reshape(1, 1, -1), np.array([position]), theta)[0, 0]


def _rope_rows(x: np.ndarray, positions: np.ndarray, theta: float) -> np.ndarray:
    """Apply rotary positions to ``x`` of shape (T, n_heads, head_dim)."""
    head_dim = x.shape[-1]
    j = np.arange(head_dim // 2, dtype=np.float64)
    inv_freq = theta ** (-2.0 * j / head_dim)
    angles = positions[:, None].astype(np.float64) * inv_freq[None, :]
    cos = np.cos(angles).astype(np.float32)[:, None, :]
    sin = np.sin(angles).astype(np.float32)[:, None, :]
    even = x[..., 0::2]
    odd = x[..., 1::2]
    out = np.empty_like(x)
    out[..., 0::2] = even * cos - odd * sin
    out[..., 1::2] = even * sin + odd * cos
    return out


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along ``axis``."""
    x = np.asarray(x, dtype=np.float32)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def _project(view: TensorView, x: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    return matmul_q(view.data, view.qtype, n_rows, n_cols, x)


def forward(
    model: Model,
    tokens,
    cache: KvCache,
    return_all: bool = False,
) -> np.ndarray:
    """Run the decoder over ``tokens``, advancing ``cache``.

    Returns float32 logits for the last position, or for every position
    when ``return_all`` is set (diagnostic use).

    Raises:
        ContextOverflow: the tokens do not fit in the remaining context.
        NonFiniteActivation: logits contain NaN or infinity.
    """
    cfg = model.config
    ids = [int(t) for t in tokens]
    if not ids:
        raise ValueError("tokens must not be empty")
    if any(not 0 <= t < cfg.vocab_size for t in ids):
        raise ValueError(f"token ids out of range for vocab {cfg.vocab_size}")
    pos0 = cache.filled_len
    n = len(ids)
    if pos0 + n > cfg.context_len:
        raise ContextOverflow(
            f"{pos0} cached + {n} new tokens exceeds context_len {cfg.context_len}"
        )

    positions = np.arange(pos0, pos0 + n)
    group = cfg.n_heads // cfg.n_kv_heads
    scale = np.float32(1.0 / np.sqrt(cfg.head_dim))

    x = dequantize_rows(
        model.token_embd.data, model.token_embd.qtype, cfg.embed_dim, ids
    )

    for li, layer in enumerate(model.layers):
        h = rms_norm(x, model.norm_vector(layer.attn_norm), cfg.rmsnorm_eps)
        q = _project(layer.wq, h, cfg.embed_dim, cfg.embed_dim)
        k = _project(layer.wk, h, cfg.kv_dim, cfg.embed_dim)
        v = _project(layer.wv, h, cfg.kv_dim, cfg.embed_dim)

        q = _rope_rows(q.reshape(n, cfg.n_heads, cfg.head_dim), positions, cfg.rope_theta)
        k = _rope_rows(k.reshape(n, cfg.n_kv_heads, cfg.head_dim), positions, cfg.rope_theta)
        v = v.reshape(n, cfg.n_kv_heads, cfg.head_dim)

        cache.k[li, :, pos0 : pos0 + n] = k.transpose(1, 0, 2)
        cache.v[li, :, pos0 : pos0 + n] = v.transpose(1, 0, 2)
        seen = pos0 + n
        keys = np.repeat(cache.k[li, :, :seen], group, axis=0)
        vals = np.repeat(cache.v[li, :, :seen], group, axis=0)

        scores = np.einsum("thd,hsd->hts", q, keys, dtype=np.float32) * scale
        causal = positions[:, None] >= np.arange(seen)[None, :]
        scores = np.where(causal[None, :, :], scores, np.float32(-np.inf))
        probs = softmax(scores, axis=-1)
        ctx = np.einsum("hts,hsd->thd", probs, vals, dtype=np.float32)

        attn_out = _project(
            layer.wo, ctx.reshape(n, cfg.embed_dim), cfg.embed_dim, cfg.embed_dim
        )
        x = x + attn_out

        h = rms_norm(x, model.norm_vector(layer.ffn_norm), cfg.rmsnorm_eps)
        gate = _project(layer.w_gate, h, cfg.ffn_hidden_dim, cfg.embed_dim)
        up = _project(layer.w_up, h, cfg.ffn_hidden_dim, cfg.embed_dim)
        act = (gate / (np.float32(1.0) + np.exp(-gate))) * up
        x = x + _project(layer.w_down, act, cfg.embed_dim, cfg.ffn_hidden_dim)

    cache.filled_len = pos0 + n

    final = rms_norm(x, model.norm_vector(model.output_norm), cfg.rmsnorm_eps)
    if not return_all:
        final = final[-1:]
    logits = _project(model.output, final, cfg.vocab_size, cfg.embed_dim)
    if not np.all(np.isfinite(logits)):
        raise NonFiniteActivation("logits contain NaN or infinity")
    return logits if return_all else logits[0]


def sample(logits: np.ndarray, params: GenParams, rng: Optional[np.random.Generator]) -> int:
    """Pick the next token id.

    Temperature 0 takes the argmax (ties break to the lowest id); positive
    temperatures draw from softmax(logits/temperature) using ``rng``.
    """
    logits = np.asarray(logits, dtype=np.float32)
    if params.temperature == 0:
        return int(np.argmax(logits))
    probs = softmax(logits / np.float32(params.temperature))
    return int(rng.choice(len(probs), p=probs / probs.sum()))


def generate(
    model: Model,
    prompt,
    params: GenParams,
    sink: Optional[Callable[[int], None]] = None,
) -> GenerationResult:
    """Decode from ``prompt``, emitting each kept token to ``sink``.

    Stops on a stop token (consumed, not emitted), on ``max_new_tokens``,
    or on context exhaustion (result marked truncated).

    Raises:
        ContextOverflow: the prompt itself does not fit in the context.
    """
    ids = [int(t) for t in prompt]
    if not ids:
        raise ValueError("prompt must not be empty")
    cfg = model.config
    if len(ids) >= cfg.context_len:
        raise ContextOverflow(
            f"prompt of {len(ids)} tokens needs at least one free position "
            f"in context_len {cfg.context_len}"
        )

    cache = KvCache(cfg)
    rng = np.random.default_rng(params.seed) if params.temperature > 0 else None
    logits = forward(model, ids, cache)

    out = []
    stop_reason = "max_new_tokens"
    for _ in range(params.max_new_tokens):
        tid = sample(logits, params, rng)
        if tid in params.stop_token_ids:
            stop_reason = "stop_token"
            break
        out.append(tid)
        if sink is not None:
            sink(tid)
        if len(out) == params.max_new_tokens:
            break
        if cache.filled_len >= cfg.context_len:
            stop_reason = "context_overflow"
            break
        logits = forward(model, [tid], cache)
    return GenerationResult(ids=tuple(out), stop_reason=stop_reason)
