"""Tests for corpus cleaning, BLEU, and benchmarking.

BLEU results are cross-checked against tests/oracle_bleu.py, an
independent plain-Python n-gram counter written before the library
implementation.
"""

import math
import random
import unicodedata

import pytest

from vien.evaluate import (
    ArchitectureMismatch,
    BleuReport,
    CleaningReport,
    CleaningRules,
    EmptyCorpus,
    LengthMismatch,
    ParallelPair,
    bench,
    bleu,
    clean_corpus,
    clean_corpus_file,
    compare_quants,
    load_pairs_tsv,
    save_pairs_tsv,
)
from vien.model import GenParams
from vien.pipeline import Direction, TranslationSession, session_from_file
from vien.quant.types import QuantType

from corpus_text import EN_WORDS, VI_WORDS, sentence_corpus
from fixtures_pipeline import build_pipeline_file
from oracle_bleu import ref_bleu


def pair(source, target):
    return ParallelPair(source=source, target=target)


class TestCleanCorpus:
    def test_byte_identical_duplicates_removed(self):
        pairs = [pair("hello world", "chào thế giới")] * 2
        kept, report = clean_corpus(pairs)
        assert len(kept) == 1
        assert report.duplicates == 1
        assert report.kept_count == 1
        assert report.input_count == 2

    def test_nfc_equivalent_pairs_deduplicate(self):
        # "chào" with precomposed à versus a + combining grave.
        precomposed = "chào"
        decomposed = "chào"
        assert precomposed != decomposed
        assert unicodedata.normalize("NFC", decomposed) == precomposed
        pairs = [pair(precomposed, "hello"), pair(decomposed, "hello")]
        kept, report = clean_corpus(pairs)
        assert len(kept) == 1
        assert report.duplicates == 1
        assert report.encoding_fixes == 1
        assert kept[0].source == precomposed

    def test_kept_pairs_are_nfc(self):
        kept, report = clean_corpus([pair("chào bạn", "hello")])
        assert kept[0].source == unicodedata.normalize("NFC", kept[0].source)
        assert report.encoding_fixes == 1
        assert report.kept_count == 1

    def test_ratio_outlier_removed(self):
        lopsided = pair("one", " ".join(["word"] * 40))
        kept, report = clean_corpus([lopsided, pair("a b", "c d")])
        assert len(kept) == 1
        assert kept[0].source == "a b"
        assert report.ratio_outliers == 1

    def test_ratio_window_boundaries_inclusive(self):
        # Exactly 3:1 and 1:3 sit inside the default window.
        kept, report = clean_corpus(
            [pair("a b c", "x"), pair("a", "x y z"), pair("a b c d", "x")]
        )
        assert len(kept) == 2
        assert report.ratio_outliers == 1

    def test_empty_sides_removed(self):
        pairs = [pair("", "target"), pair("source", "   "), pair("a", "b")]
        kept, report = clean_corpus(pairs)
        assert len(kept) == 1
        assert report.empties == 2

    def test_order_preserved(self):
        pairs = [pair(f"src {i}", f"tgt {i}") for i in range(20)]
        kept, _ = clean_corpus(pairs)
        assert [p.source for p in kept] == [p.source for p in pairs]

    def test_origin_carried_through(self):
        kept, _ = clean_corpus([ParallelPair("a", "b", origin="file.tsv:3")])
        assert kept[0].origin == "file.tsv:3"

    def test_idempotent(self):
        rng = random.Random(11)
        pairs = []
        for i in range(200):
            n_src = rng.randint(0, 8)
            n_tgt = rng.randint(0, 8)
            src = " ".join(rng.choice(VI_WORDS) for _ in range(n_src))
            tgt = " ".join(rng.choice(EN_WORDS) for _ in range(n_tgt))
            pairs.append(pair(src, tgt))
        pairs.extend(pairs[:30])  # guaranteed duplicates
        once, report_once = clean_corpus(pairs)
        twice, report_twice = clean_corpus(once)
        assert twice == once
        assert report_twice.duplicates == 0
        assert report_twice.empties == 0
        assert report_twice.ratio_outliers == 0
        assert report_twice.encoding_fixes == 0
        assert report_once.reconciled

    def test_counters_reconcile(self):
        rng = random.Random(5)
        pairs = []
        for _ in range(500):
            roll = rng.random()
            if roll < 0.1:
                pairs.append(pair("", "x"))
            elif roll < 0.2:
                pairs.append(pair("only one", " ".join(["w"] * 30)))
            elif roll < 0.3 and pairs:
                pairs.append(rng.choice(pairs))
            else:
                n = rng.randint(1, 6)
                pairs.append(
                    pair(
                        " ".join(rng.choice(VI_WORDS) for _ in range(n)),
                        " ".join(rng.choice(EN_WORDS) for _ in range(n)),
                    )
                )
        kept, report = clean_corpus(pairs)
        assert report.reconciled
        assert report.input_count == len(pairs)
        assert report.kept_count == len(kept)
        removed = report.duplicates + report.empties + report.ratio_outliers
        assert report.kept_count + removed == report.input_count

    def test_custom_ratio_rules(self):
        rules = CleaningRules(ratio_min=1.0, ratio_max=1.0)
        kept, report = clean_corpus(
            [pair("a b", "c d"), pair("a b c", "d e")], rules
        )
        assert len(kept) == 1
        assert report.ratio_outliers == 1


class TestTsvCorpus:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        pairs = [pair("xin chào", "hello"), pair("cảm ơn", "thank you")]
        save_pairs_tsv(path, pairs)
        loaded, malformed = load_pairs_tsv(path)
        assert malformed == 0
        assert [(p.source, p.target) for p in loaded] == [
            (p.source, p.target) for p in pairs
        ]

    def test_origin_records_line_numbers(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text("a\tb\nc\td\n", encoding="utf-8")
        loaded, _ = load_pairs_tsv(path)
        assert loaded[0].origin.endswith(":1")
        assert loaded[1].origin.endswith(":2")

    def test_malformed_lines_counted(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text(
            "good\tpair\n"
            "no tab here\n"
            "too\tmany\ttabs\n"
            "another\tgood\n",
            encoding="utf-8",
        )
        loaded, malformed = load_pairs_tsv(path)
        assert len(loaded) == 2
        assert malformed == 2

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text("a\tb\n\n\nc\td\n", encoding="utf-8")
        loaded, malformed = load_pairs_tsv(path)
        assert len(loaded) == 2
        assert malformed == 0

    def test_clean_corpus_file_reconciles_with_malformed(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text(
            "a b\tc d\n"
            "malformed line without tab\n"
            "a b\tc d\n"
            "\te\n",
            encoding="utf-8",
        )
        kept, report = clean_corpus_file(path)
        assert len(kept) == 1
        assert report.malformed == 1
        assert report.duplicates == 1
        assert report.empties == 1
        assert report.input_count == 4
        assert report.reconciled


def random_sentences(rng, count, words, max_len=12):
    out = []
    for _ in range(count):
        n = rng.randint(1, max_len)
        out.append(" ".join(rng.choice(words) for _ in range(n)))
    return out


class TestBleu:
    def test_identical_corpus_scores_one(self):
        hyps = sentence_corpus(25, seed=3)
        report = bleu(hyps, list(hyps))
        assert report.score == 1.0
        assert report.score_pct == 100.0
        assert report.brevity_penalty == 1.0
        assert report.precisions == (1.0, 1.0, 1.0, 1.0)

    def test_zero_overlap_scores_zero(self):
        report = bleu(["alpha beta gamma"], ["delta epsilon zeta"])
        assert report.score == 0.0
        assert report.precisions[0] == 0.0

    def test_clipping_example(self):
        # Degenerate repetition: "the" occurs twice in the reference, so
        # the clipped unigram count is 2 out of 7 hypothesis tokens.
        report = bleu(
            ["the the the the the the the"], ["the cat is on the mat"]
        )
        assert report.precisions[0] == pytest.approx(2.0 / 7.0)
        assert report.score == 0.0  # no bigram overlap, unsmoothed

    def test_brevity_penalty_formula(self):
        # hyp 2 tokens vs ref 4 tokens: bp = e^(1 - 4/2) = e^-1.
        report = bleu(["a b"], ["a b c d"])
        assert report.brevity_penalty == pytest.approx(math.exp(-1.0))
        assert report.hyp_len == 2
        assert report.ref_len == 4

    def test_long_hypothesis_bp_capped_at_one(self):
        report = bleu(["a b c d e f"], ["a b"])
        assert report.brevity_penalty == 1.0

    def test_permutation_invariance(self):
        rng = random.Random(17)
        hyps = random_sentences(rng, 30, EN_WORDS)
        refs = random_sentences(rng, 30, EN_WORDS)
        base = bleu(hyps, refs)
        for shuffle in range(20):
            order = list(range(len(hyps)))
            rng.shuffle(order)
            shuffled = bleu([hyps[i] for i in order], [refs[i] for i in order])
            assert shuffled.score == pytest.approx(base.score, abs=1e-12)
            assert shuffled.precisions == pytest.approx(base.precisions)
            assert shuffled.brevity_penalty == pytest.approx(
                base.brevity_penalty
            )

    @pytest.mark.parametrize("smoothing", ["none", "add-one"])
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_matches_reference_implementation(self, seed, smoothing):
        # Small word pools force n-gram overlap so precisions are
        # non-trivial; the oracle counts n-grams with plain dicts.
        rng = random.Random(seed)
        words = EN_WORDS[:12]
        hyps = random_sentences(rng, 20, words)
        refs = random_sentences(rng, 20, words)
        report = bleu(hyps, refs, smoothing=smoothing)
        ref_precisions, ref_bp, ref_score = ref_bleu(
            hyps, refs, smoothing=smoothing
        )
        assert report.precisions == pytest.approx(ref_precisions, abs=1e-12)
        assert report.brevity_penalty == pytest.approx(ref_bp, abs=1e-12)
        assert report.score == pytest.approx(ref_score, abs=1e-12)

    def test_vietnamese_text_uses_nfc_tokens(self):
        # Decomposed hypothesis matches precomposed reference after NFC.
        report = bleu(["xin chào"], ["xin chào"])
        assert report.score == 1.0

    def test_add_one_smoothing_nonzero_on_sparse_overlap(self):
        plain = bleu(["the cat sat"], ["the dog ran"])
        smoothed = bleu(["the cat sat"], ["the dog ran"], smoothing="add-one")
        assert plain.score == 0.0
        assert smoothed.score > 0.0
        assert smoothed.smoothing == "add-one"
        # Unigram precision is never smoothed.
        assert smoothed.precisions[0] == plain.precisions[0]

    def test_empty_hypothesis_strings_score_zero(self):
        report = bleu(["", ""], ["a b", "c d"])
        assert report.hyp_len == 0
        assert report.brevity_penalty == 0.0
        assert report.score == 0.0

    def test_short_sentences_skip_unavailable_orders(self):
        # Two-token sentences have no trigrams or 4-grams; the geometric
        # mean runs over the available orders only.
        report = bleu(["a b"], ["a b"])
        assert report.precisions[:2] == (1.0, 1.0)
        assert report.precisions[2:] == (0.0, 0.0)
        assert report.score == 1.0

    def test_length_mismatch_raises(self):
        with pytest.raises(LengthMismatch):
            bleu(["a"], ["a", "b"])

    def test_empty_corpus_raises(self):
        with pytest.raises(EmptyCorpus):
            bleu([], [])

    def test_unknown_smoothing_rejected(self):
        with pytest.raises(ValueError, match="smoothing"):
            bleu(["a"], ["a"], smoothing="exp")

    def test_report_scales_consistent(self):
        rng = random.Random(23)
        hyps = random_sentences(rng, 10, EN_WORDS[:15])
        refs = random_sentences(rng, 10, EN_WORDS[:15])
        report = bleu(hyps, refs, smoothing="add-one")
        assert report.score_pct == pytest.approx(report.score * 100.0)
        assert 0.0 <= report.score <= 1.0


@pytest.fixture(scope="module")
def bench_session():
    blob = build_pipeline_file(seed=9, n_layers=1, embed_dim=32,
                                     n_heads=2, n_kv_heads=1,
                                     ffn_hidden_dim=48)
    return session_from_file(
        blob, params=GenParams(max_new_tokens=4)
    )


class TestBench:
    def test_counting_contract(self, monkeypatch):
        # reps=3 on 10 prompts: exactly 30 timed generations after one
        # warm-up, 31 translate calls in total.
        calls = []

        class FakeTurn:
            generated_tokens = 2

        def fake_translate(session, text, on_fragment=None):
            calls.append(text)
            return FakeTurn()

        monkeypatch.setattr("vien.evaluate.translate", fake_translate)
        prompts = [f"prompt {i}" for i in range(10)]
        report = bench(object(), prompts, reps=3)
        assert len(calls) == 31
        assert calls[0] == prompts[0]  # warm-up uses the first prompt
        assert calls[1:] == prompts * 3
        assert len(report.sentence_ms) == 30
        assert report.generated_tokens == 60

    def test_real_session_smoke(self, bench_session):
        report = bench(bench_session, ["xin chào", "cảm ơn bạn"], reps=1)
        assert len(report.sentence_ms) == 2
        assert all(ms > 0 for ms in report.sentence_ms)
        assert report.tokens_per_sec > 0
        assert report.ms_per_sentence_p50 <= report.ms_per_sentence_p95
        assert report.ms_per_sentence_mean == pytest.approx(
            sum(report.sentence_ms) / 2
        )
        assert report.peak_resident_memory_bytes > 0
        assert len(report.prompt_set_id) == 12

    def test_prompt_set_id_depends_on_prompts(self, monkeypatch):
        class FakeTurn:
            generated_tokens = 1

        monkeypatch.setattr(
            "vien.evaluate.translate", lambda s, t, on_fragment=None: FakeTurn()
        )
        a = bench(object(), ["one", "two"], reps=1)
        b = bench(object(), ["one", "three"], reps=1)
        c = bench(object(), ["one", "two"], reps=1)
        assert a.prompt_set_id != b.prompt_set_id
        assert a.prompt_set_id == c.prompt_set_id

    def test_empty_prompts_rejected(self, bench_session):
        with pytest.raises(EmptyCorpus):
            bench(bench_session, [], reps=1)

    def test_bad_reps_rejected(self, bench_session):
        with pytest.raises(ValueError, match="reps"):
            bench(bench_session, ["x"], reps=0)


TOY_TESTSET = [
    ParallelPair("xin chào bạn", "hello friend"),
    ParallelPair("cảm ơn nhiều", "thank you very much"),
    ParallelPair("hẹn gặp lại", "see you again"),
]


class TestCompareQuants:
    def test_identity_comparison(self):
        blob = build_pipeline_file(seed=4, n_layers=1, embed_dim=32,
                                         n_heads=2, n_kv_heads=1,
                                         ffn_hidden_dim=48)
        report = compare_quants(
            blob, blob, TOY_TESTSET,
            params=GenParams(max_new_tokens=3),
        )
        assert report.size_a_bytes == report.size_b_bytes == len(blob)
        assert report.size_reduction_pct == 0.0
        assert report.bleu_delta == 0.0
        assert report.bleu_a == report.bleu_b
        assert report.n_sentences == 3

    def test_quantized_pair_comparison(self):
        # Same weights stored as Q8_0 and Q4_K; sizes must differ and the
        # BLEU delta must be a finite number from a real end-to-end run.
        common = dict(seed=4, n_layers=1, embed_dim=256, n_heads=2,
                      n_kv_heads=1, ffn_hidden_dim=256, context_len=256)
        blob_a = build_pipeline_file(qtype=QuantType.Q8_0, **common)
        blob_b = build_pipeline_file(qtype=QuantType.Q4_K, **common)
        report = compare_quants(
            blob_a, blob_b, TOY_TESTSET,
            direction=Direction.VI_TO_EN,
            params=GenParams(max_new_tokens=3),
        )
        assert report.size_a_bytes == len(blob_a)
        assert report.size_b_bytes == len(blob_b)
        assert report.size_b_bytes < report.size_a_bytes
        assert report.size_reduction_pct == pytest.approx(
            100.0 * (1.0 - len(blob_b) / len(blob_a))
        )
        assert 0.0 < report.size_reduction_pct < 100.0
        assert math.isfinite(report.bleu_delta)
        assert report.bleu_delta == pytest.approx(
            report.bleu_a - report.bleu_b
        )
        assert report.tokens_per_sec_a > 0
        assert report.tokens_per_sec_b > 0

    def test_architecture_mismatch_rejected(self):
        blob_a = build_pipeline_file(seed=4, n_layers=1, embed_dim=32,
                                           n_heads=2, n_kv_heads=1,
                                           ffn_hidden_dim=48)
        blob_b = build_pipeline_file(seed=4, n_layers=2, embed_dim=32,
                                           n_heads=2, n_kv_heads=1,
                                           ffn_hidden_dim=48)
        with pytest.raises(ArchitectureMismatch):
            compare_quants(blob_a, blob_b, TOY_TESTSET,
                           params=GenParams(max_new_tokens=2))

    def test_empty_testset_rejected(self):
        blob = build_pipeline_file(seed=4, n_layers=1, embed_dim=32,
                                         n_heads=2, n_kv_heads=1,
                                         ffn_hidden_dim=48)
        with pytest.raises(EmptyCorpus):
            compare_quants(blob, blob, [])
