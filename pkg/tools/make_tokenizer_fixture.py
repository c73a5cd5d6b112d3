#!/usr/bin/env python3
"""Build the committed tokenizer fixtures under tests/data/.

Trains a small SentencePiece unigram vocabulary (byte fallback enabled,
identity normalization, dummy space prefix) on the deterministic corpus
from tests/corpus_text.py, then records reference id sequences for a set
of fixture sentences.  The recorded ids come from the SentencePiece
processor itself, so the test suite checks our encoder against an
independent implementation rather than against its own output.

The script refuses to write fixtures if our encoder disagrees with the
reference on any fixture sentence, and prints an agreement rate over a
larger sentence sweep for context.

Run once from the repository root:

    python3 tools/make_tokenizer_fixture.py
"""

from __future__ import annotations

import io
import json
import sys
import unicodedata
from pathlib import Path

import sentencepiece as spm

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))
sys.path.insert(0, str(ROOT / "src"))

from corpus_text import sentence_corpus, training_corpus  # noqa: E402

from vien import tokenizer as tok  # noqa: E402

DATA_DIR = ROOT / "tests" / "data"

FIXTURE_SENTENCES = [
    "Xin chào",
    "Xin chào, bạn có khỏe không?",
    "Tôi muốn học tiếng Việt.",
    "Cảm ơn bạn rất nhiều.",
    "Hôm nay trời đẹp quá!",
    "Hẹn gặp lại ngày mai nhé.",
    "Tiếng Việt có dấu",
    "Người Việt Nam ăn phở vào buổi sáng.",
    "Chúng ta đi chợ mua cà phê và bánh mì.",
    "Anh ấy đang làm việc ở Hà Nội.",
    "Trời mưa nên đường rất chậm.",
    "Em bé đói và mệt.",
    "hello world",
    "Hello, how are you?",
    "I would like a cup of coffee.",
    "Where is the nearest train station?",
    "The weather is beautiful today.",
    "See you again tomorrow.",
    "Thanks for your help!",
    "Good morning, my friend.",
    "She reads a new book every week.",
    "We learn vietnamese at school.",
    "xin chào hello world",
    "Tôi thích coffee và trà.",
    "Hanoi to Saigon is 1726 km.",
    "Gặp nhau lúc 9 giờ sáng nhé!",
    "Prices: 25000, 13.5, and 7%.",
    "a",
    "à",
    "đ",
    "  double  spaces  ",
    "MixedCASE Words Here",
    "dấu câu: chấm. phẩy, hỏi? than!",
    "quote 'single' and \"double\" marks",
    "em yêu chị ấy",
    "con mèo ngủ trên cây",
    "the quick brown fox jumps over the lazy dog",
    "số điện thoại của tôi là 0912345678",
]


def train_model() -> bytes:
    # A BPE-type model keeps the piece inventory merge-closed: every
    # multi-character piece is reachable through in-vocabulary merge steps,
    # and the reference encoder segments by exactly the same
    # highest-score-merge-first rule our encoder implements.  A unigram
    # model of this size leaves merge chains unreachable (its Viterbi
    # segmenter does not need intermediate pieces), so greedy encoders
    # systematically under-merge against it.
    buf = io.BytesIO()
    spm.SentencePieceTrainer.train(
        sentence_iterator=iter(training_corpus()),
        model_writer=buf,
        vocab_size=512,
        model_type="bpe",
        normalization_rule_name="identity",
        add_dummy_prefix=True,
        remove_extra_whitespaces=False,
        byte_fallback=True,
        character_coverage=1.0,
        minloglevel=2,
    )
    return buf.getvalue()


def extract_vocab(sp: spm.SentencePieceProcessor) -> dict:
    size = sp.get_piece_size()
    pieces = []
    scores = []
    types = []
    for i in range(size):
        pieces.append(sp.id_to_piece(i))
        scores.append(sp.get_score(i))
        if sp.is_unknown(i):
            types.append(int(tok.TokenType.UNKNOWN))
        elif sp.is_control(i):
            types.append(int(tok.TokenType.CONTROL))
        elif sp.is_byte(i):
            types.append(int(tok.TokenType.BYTE))
        else:
            types.append(int(tok.TokenType.NORMAL))
    pad = sp.pad_id()
    return {
        "pieces": pieces,
        "scores": scores,
        "token_types": types,
        "bos_id": sp.bos_id(),
        "eos_id": sp.eos_id(),
        "unk_id": sp.unk_id(),
        "pad_id": None if pad < 0 else pad,
        "add_space_prefix": True,
    }


def build_vocab(raw: dict) -> tok.Vocab:
    return tok.Vocab(
        pieces=tuple(raw["pieces"]),
        scores=tuple(raw["scores"]),
        token_types=tuple(tok.TokenType(t) for t in raw["token_types"]),
        bos_id=raw["bos_id"],
        eos_id=raw["eos_id"],
        unk_id=raw["unk_id"],
        pad_id=raw["pad_id"],
        add_space_prefix=raw["add_space_prefix"],
    )


def main() -> int:
    model = train_model()
    sp = spm.SentencePieceProcessor(model_proto=model)
    raw = extract_vocab(sp)
    vocab = build_vocab(raw)

    cases = []
    mismatched = []
    for text in FIXTURE_SENTENCES:
        text = unicodedata.normalize("NFC", text)
        ref = list(sp.encode(text, out_type=int))
        ours = tok.encode(vocab, text, add_bos=False)
        if ours != ref:
            mismatched.append((text, ref, ours))
        cases.append({"text": text, "ids": ref})

    sweep = sentence_corpus(1000, seed=11)
    agree = sum(
        1
        for s in sweep
        if tok.encode(vocab, s, add_bos=False) == list(sp.encode(s, out_type=int))
    )
    print(f"sweep agreement: {agree}/{len(sweep)} sentences")

    round_trip_bad = [
        s for s in sweep if tok.decode(vocab, tok.encode(vocab, s)) != s
    ]
    print(f"sweep round-trip failures: {len(round_trip_bad)}")

    if mismatched:
        for text, ref, ours in mismatched:
            print(f"MISMATCH {text!r}\n  reference: {ref}\n  ours:      {ours}")
        print(f"{len(mismatched)} fixture sentences disagree; fixtures not written")
        return 1

    DATA_DIR.mkdir(parents=True, exist_ok=True)
    (DATA_DIR / "tokenizer_vocab.json").write_text(
        json.dumps(raw, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    (DATA_DIR / "tokenizer_cases.json").write_text(
        json.dumps(cases, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(raw['pieces'])} pieces and {len(cases)} cases to {DATA_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
