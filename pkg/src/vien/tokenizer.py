"""Subword tokenizer compatible with Llama-family SentencePiece vocabularies.

The vocabulary is read from GGUF metadata (``tokenizer.ggml.*`` keys); no
external vocab files are consulted.  Encoding uses score-greedy bigram
merging over an initial character segmentation, with byte fallback for
anything the piece table cannot express, so ``encode`` is total over valid
UTF-8.  Input text is NFC-normalized before encoding (decomposed Vietnamese
diacritics would otherwise break round trips); decoded output is not
re-normalized.

Two conventions are fixed here so that recorded fixtures stay stable:

* Merge tie-breaking when scores are equal prefers the longer piece, then
  the lower token id, then the leftmost position.
* Only ``NORMAL`` and ``USER_DEFINED`` pieces participate in matching.
  Byte, control, and unknown pieces are addressable only by id, exactly as
  in the reference implementation, so literal text like ``"<0x41>"`` or
  ``"<s>"`` never collapses into a special token.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

from .gguf import GgufFile, GgufValueType, NotFound, TypeMismatch, metadata_get

SPACE_MARKER = "▁"

KEY_MODEL = "tokenizer.ggml.model"
KEY_TOKENS = "tokenizer.ggml.tokens"
KEY_SCORES = "tokenizer.ggml.scores"
KEY_TOKEN_TYPE = "tokenizer.ggml.token_type"
KEY_BOS_ID = "tokenizer.ggml.bos_token_id"
KEY_EOS_ID = "tokenizer.ggml.eos_token_id"
KEY_UNK_ID = "tokenizer.ggml.unknown_token_id"
KEY_PAD_ID = "tokenizer.ggml.padding_token_id"
KEY_ADD_SPACE_PREFIX = "tokenizer.ggml.add_space_prefix"
KEY_VOCAB_SIZE = "llama.vocab_size"


class TokenizerError(Exception):
    """Base class for tokenizer errors."""


class MissingTokenizerMetadata(TokenizerError):
    """A required tokenizer metadata entry is absent or uninterpretable."""


class VocabSizeMismatch(TokenizerError):
    """Vocabulary tables disagree in size, or a special id is out of range."""


class InvalidTokenId(TokenizerError):
    """A token id falls outside ``[0, vocab_size)``."""


class TokenType(IntEnum):
    """Token classes, using the numeric codes stored in GGUF metadata."""

    NORMAL = 1
    UNKNOWN = 2
    CONTROL = 3
    USER_DEFINED = 4
    UNUSED = 5
    BYTE = 6


_MATCHABLE = (TokenType.NORMAL, TokenType.USER_DEFINED)


@dataclass(frozen=True)
class Vocab:
    """Immutable piece table with scores, token types, and special ids.

    ``add_space_prefix`` records the vocabulary's leading-space convention:
    when true, a space is prepended to non-empty text before encoding and
    one leading space is stripped after decoding.
    """

    pieces: tuple
    scores: tuple
    token_types: tuple
    bos_id: int
    eos_id: int
    unk_id: int
    pad_id: Optional[int] = None
    add_space_prefix: bool = True
    piece_to_id: dict = field(default_factory=dict, repr=False, compare=False)
    byte_to_id: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        lookup = {}
        byte_map = {}
        for tid, piece in enumerate(self.pieces):
            ttype = self.token_types[tid]
            if ttype in _MATCHABLE and piece not in lookup:
                lookup[piece] = tid
            elif ttype == TokenType.BYTE:
                byte_map[_parse_byte_piece(piece, tid)] = tid
        object.__setattr__(self, "piece_to_id", lookup)
        object.__setattr__(self, "byte_to_id", byte_map)

    def __len__(self) -> int:
        return len(self.pieces)


def _parse_byte_piece(piece: str, tid: int) -> int:
    if len(piece) == 6 and piece.startswith("<0x") and piece.endswith(">"):
        try:
            return int(piece[3:5], 16)
        except ValueError:
            pass
    raise VocabSizeMismatch(
        f"token {tid} is typed as a byte token but its piece {piece!r} "
        f"is not of the form <0xNN>"
    )


def _require(file: GgufFile, key: str, expected: GgufValueType):
    try:
        return metadata_get(file, key, expected)
    except NotFound:
        raise MissingTokenizerMetadata(f"metadata key {key!r} is missing") from None
    except TypeMismatch as exc:
        raise MissingTokenizerMetadata(str(exc)) from None


def _optional(file: GgufFile, key: str, expected: GgufValueType, default):
    try:
        return metadata_get(file, key, expected)
    except NotFound:
        return default
    except TypeMismatch as exc:
        raise MissingTokenizerMetadata(str(exc)) from None


def _check_special(name: str, tid: int, size: int) -> int:
    tid = int(tid)
    if not 0 <= tid < size:
        raise VocabSizeMismatch(
            f"{name} id {tid} is out of range for vocab size {size}"
        )
    return tid


def load_vocab(file: GgufFile) -> Vocab:
    """Build a :class:`Vocab` from the tokenizer metadata of a GGUF file.

    Raises:
        MissingTokenizerMetadata: a required key is absent, has the wrong
            type, or declares an unsupported tokenizer family.
        VocabSizeMismatch: the scores or token-type arrays do not match the
            token list, a declared vocab size disagrees with the table, a
            special id is out of range, or byte fallback coverage is
            incomplete.
    """
    model = _require(file, KEY_MODEL, GgufValueType.STRING)
    if model != "llama":
        raise MissingTokenizerMetadata(
            f"tokenizer model {model!r} is not supported; expected 'llama'"
        )

    pieces = _require(file, KEY_TOKENS, GgufValueType.ARRAY)
    scores = _require(file, KEY_SCORES, GgufValueType.ARRAY)
    raw_types = _require(file, KEY_TOKEN_TYPE, GgufValueType.ARRAY)

    size = len(pieces)
    if len(scores) != size:
        raise VocabSizeMismatch(
            f"scores array has {len(scores)} entries for {size} tokens"
        )
    if len(raw_types) != size:
        raise VocabSizeMismatch(
            f"token_type array has {len(raw_types)} entries for {size} tokens"
        )

    declared = _optional(file, KEY_VOCAB_SIZE, GgufValueType.UINT32, None)
    if declared is not None and int(declared) != size:
        raise VocabSizeMismatch(
            f"metadata declares vocab size {int(declared)} but the token "
            f"list has {size} entries"
        )

    token_types = []
    for tid, code in enumerate(raw_types):
        try:
            token_types.append(TokenType(int(code)))
        except ValueError:
            raise MissingTokenizerMetadata(
                f"token {tid} has unrecognized token type code {int(code)}"
            ) from None

    bos_id = _check_special(
        "bos", _optional(file, KEY_BOS_ID, GgufValueType.UINT32, 1), size
    )
    eos_id = _check_special(
        "eos", _optional(file, KEY_EOS_ID, GgufValueType.UINT32, 2), size
    )
    unk_id = _check_special(
        "unk", _optional(file, KEY_UNK_ID, GgufValueType.UINT32, 0), size
    )
    pad_raw = _optional(file, KEY_PAD_ID, GgufValueType.UINT32, None)
    pad_id = None if pad_raw is None else _check_special("pad", pad_raw, size)

    vocab = Vocab(
        pieces=tuple(str(p) for p in pieces),
        scores=tuple(float(s) for s in scores),
        token_types=tuple(token_types),
        bos_id=bos_id,
        eos_id=eos_id,
        unk_id=unk_id,
        pad_id=pad_id,
        add_space_prefix=bool(
            _optional(file, KEY_ADD_SPACE_PREFIX, GgufValueType.BOOL, True)
        ),
    )

    if vocab.byte_to_id and len(vocab.byte_to_id) != 256:
        missing = sorted(set(range(256)) - set(vocab.byte_to_id))
        raise VocabSizeMismatch(
            f"byte fallback is enabled but {256 - len(vocab.byte_to_id)} byte "
            f"tokens are missing (first missing: 0x{missing[0]:02X})"
        )
    return vocab


def encode(vocab: Vocab, text: str, add_bos: bool = False) -> list:
    """Encode text into token ids.

    Text is NFC-normalized, the leading-space convention is applied, and
    spaces become the space marker.  Characters are then merged greedily:
    at each step the adjacent pair whose concatenation is a matchable piece
    with the highest score is joined (ties prefer the longer piece, then
    the lower id, then the leftmost position).  Symbols left without a
    piece fall back to byte tokens, so any valid UTF-8 input encodes.
    """
    ids = [vocab.bos_id] if add_bos else []
    if not text:
        return ids

    text = unicodedata.normalize("NFC", text)
    if vocab.add_space_prefix:
        text = " " + text
    text = text.replace(" ", SPACE_MARKER)

    symbols = list(text)
    lookup = vocab.piece_to_id
    scores = vocab.scores
    while len(symbols) > 1:
        best = None
        best_key = None
        for pos in range(len(symbols) - 1):
            merged = symbols[pos] + symbols[pos + 1]
            tid = lookup.get(merged)
            if tid is None:
                continue
            key = (scores[tid], len(merged), -tid)
            if best_key is None or key > best_key:
                best = pos
                best_key = key
        if best is None:
            break
        symbols[best : best + 2] = [symbols[best] + symbols[best + 1]]

    for sym in symbols:
        tid = lookup.get(sym)
        if tid is not None:
            ids.append(tid)
            continue
        if vocab.byte_to_id:
            for byte in sym.encode("utf-8"):
                ids.append(vocab.byte_to_id.get(byte, vocab.unk_id))
        else:
            ids.append(vocab.unk_id)
    return ids


def _check_id(vocab: Vocab, tid: int) -> int:
    tid = int(tid)
    if not 0 <= tid < len(vocab.pieces):
        raise InvalidTokenId(
            f"token id {tid} is out of range for vocab size {len(vocab.pieces)}"
        )
    return tid


def decode(vocab: Vocab, ids) -> str:
    """Decode token ids back into text.

    Space-marker pieces map to spaces, runs of byte tokens are assembled
    into UTF-8, control tokens render as empty, and one leading space is
    stripped when the vocabulary's leading-space convention added it.

    Raises:
        InvalidTokenId: an id falls outside the vocabulary.
    """
    parts = []
    pending = bytearray()

    def flush() -> None:
        if pending:
            parts.append(pending.decode("utf-8", errors="replace"))
            pending.clear()

    for raw in ids:
        tid = _check_id(vocab, raw)
        ttype = vocab.token_types[tid]
        if ttype == TokenType.BYTE:
            pending.append(_parse_byte_piece(vocab.pieces[tid], tid))
            continue
        flush()
        if ttype == TokenType.CONTROL:
            continue
        parts.append(vocab.pieces[tid].replace(SPACE_MARKER, " "))
    flush()

    out = "".join(parts)
    if vocab.add_space_prefix and out.startswith(" "):
        out = out[1:]
    return out


def token_to_piece(vocab: Vocab, tid: int, keep_space_marker: bool = False) -> str:
    """Render one token for display or streaming.

    Byte tokens render in their canonical ``<0xNN>`` form and control
    tokens render as their literal piece.  For other tokens the space
    marker is substituted with a space unless ``keep_space_marker`` is
    true, in which case it stays visible.

    Raises:
        InvalidTokenId: the id falls outside the vocabulary.
    """
    tid = _check_id(vocab, tid)
    piece = vocab.pieces[tid]
    ttype = vocab.token_types[tid]
    if ttype == TokenType.BYTE:
        return f"<0x{_parse_byte_piece(piece, tid):02X}>"
    if ttype == TokenType.CONTROL:
        return piece
    if keep_space_marker:
        return piece
    return piece.replace(SPACE_MARKER, " ")
