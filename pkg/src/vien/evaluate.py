"""Corpus cleaning, BLEU scoring, and latency/size benchmarking.

Conventions fixed here:

* BLEU tokenizes on whitespace after NFC normalization; no
  language-specific segmentation (Vietnamese is space-delimited at the
  syllable level; word-segmented BLEU would score differently and is a
  documented limitation).
* Smoothing default is none (zero n-gram overlap scores 0); the optional
  ``"add-one"`` mode adds one to numerator and denominator of orders
  >= 2 for short-sentence evaluation.
* Reports carry the score on both the 0..1 and 0..100 scales since the
  community uses both conventions.
* Corpus files are UTF-8 TSV, ``source<TAB>target`` per line; lines
  without exactly one tab count as malformed removals.
* The length-ratio cleaning window defaults to 1/3..3 (source/target
  whitespace-token ratio), a standard corpus-cleaning practice.
"""

from __future__ import annotations

import hashlib
import math
import resource
import time
import unicodedata
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .model import GenParams
from .pipeline import Direction, TranslationSession, session_from_file, translate


class EvalError(Exception):
    """Base class for evaluation errors."""


class LengthMismatch(EvalError):
    """Hypothesis and reference lists differ in length."""


class EmptyCorpus(EvalError):
    """An operation requiring at least one entry received none."""


class ArchitectureMismatch(EvalError):
    """Two models being compared differ in architecture or vocabulary."""


@dataclass(frozen=True)
class ParallelPair:
    source: str
    target: str
    origin: str = ""


@dataclass(frozen=True)
class CleaningRules:
    ratio_min: float = 1.0 / 3.0
    ratio_max: float = 3.0


@dataclass(frozen=True)
class CleaningReport:
    """Counter reconciliation: kept + duplicates + empties +
    ratio_outliers + malformed = input_count; encoding_fixes counts
    repaired (re-normalized) pairs, not removals."""

    input_count: int
    kept_count: int
    duplicates: int = 0
    empties: int = 0
    ratio_outliers: int = 0
    encoding_fixes: int = 0
    malformed: int = 0

    @property
    def reconciled(self) -> bool:
        removed = self.duplicates + self.empties + self.ratio_outliers + self.malformed
        return self.kept_count + removed == self.input_count


def clean_corpus(pairs, rules: CleaningRules = CleaningRules()):
    """Normalize, deduplicate, and filter pairs; order is preserved.

    Returns ``(cleaned_pairs, CleaningReport)``.  Every input pair is
    kept or counted under exactly one removal counter, checked in the
    order: empty side, duplicate, length-ratio outlier.
    """
    pairs = list(pairs)
    seen = set()
    kept = []
    duplicates = empties = ratio_outliers = encoding_fixes = 0

    for pair in pairs:
        source = unicodedata.normalize("NFC", pair.source)
        target = unicodedata.normalize("NFC", pair.target)
        if source != pair.source or target != pair.target:
            encoding_fixes += 1
        if not source.strip() or not target.strip():
            empties += 1
            continue
        key = (source, target)
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        ratio = len(source.split()) / len(target.split())
        if not rules.ratio_min <= ratio <= rules.ratio_max:
            ratio_outliers += 1
            continue
        kept.append(ParallelPair(source, target, pair.origin))

    report = CleaningReport(
        input_count=len(pairs),
        kept_count=len(kept),
        duplicates=duplicates,
        empties=empties,
        ratio_outliers=ratio_outliers,
        encoding_fixes=encoding_fixes,
    )
    return kept, report


def load_pairs_tsv(path) -> tuple:
    """Read a source<TAB>target corpus; returns (pairs, malformed_count)."""
    pairs = []
    malformed = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                malformed += 1
                continue
            pairs.append(ParallelPair(parts[0], parts[1], f"{path}:{lineno}"))
    return pairs, malformed


def save_pairs_tsv(path, pairs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(f"{pair.source}\t{pair.target}\n")


def clean_corpus_file(path, rules: CleaningRules = CleaningRules()):
    """Clean a TSV corpus file; malformed lines count as removals."""
    pairs, malformed = load_pairs_tsv(path)
    kept, report = clean_corpus(pairs, rules)
    report = replace(
        report,
        input_count=report.input_count + malformed,
        malformed=malformed,
    )
    return kept, report


@dataclass(frozen=True)
class BleuReport:
    precisions: tuple  # p1..p_max_n, 0.0 where the order had no n-grams
    brevity_penalty: float
    score: float  # 0..1
    score_pct: float  # 0..100
    hyp_len: int
    ref_len: int
    smoothing: str


def _tokenize(text: str) -> list:
    return unicodedata.normalize("NFC", text).split()


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypotheses, references, max_n: int = 4, smoothing: str = "none") -> BleuReport:
    """Corpus-level BLEU with clipping and brevity penalty.

    Raises:
        LengthMismatch: list lengths differ.
        EmptyCorpus: the lists are empty.
        ValueError: unknown smoothing mode.
    """
    if smoothing not in ("none", "add-one"):
        raise ValueError(f"unknown smoothing mode {smoothing!r}")
    if len(hypotheses) != len(references):
        raise LengthMismatch(
            f"{len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise EmptyCorpus("no sentence pairs to score")

    clipped = [0] * max_n
    total = [0] * max_n
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_tokens = _tokenize(hyp)
        ref_tokens = _tokenize(ref)
        hyp_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, max_n + 1):
            hyp_counts = _ngrams(hyp_tokens, n)
            if not hyp_counts:
                continue
            ref_counts = _ngrams(ref_tokens, n)
            for gram, count in hyp_counts.items():
                clipped[n - 1] += min(count, ref_counts[gram])
                total[n - 1] += count

    precisions = []
    for n in range(max_n):
        num, den = clipped[n], total[n]
        if smoothing == "add-one" and n >= 1:
            num, den = num + 1, den + 1
        precisions.append(num / den if den else 0.0)

    if hyp_len == 0:
        bp = 0.0
        score = 0.0
    else:
        bp = min(1.0, math.exp(1.0 - ref_len / hyp_len))
        logs = []
        score = None
        for n in range(max_n):
            if total[n] == 0:
                continue
            if precisions[n] == 0.0:
                score = 0.0
                break
            logs.append(math.log(precisions[n]))
        if score is None:
            score = bp * math.exp(sum(logs) / len(logs)) if logs else 0.0

    return BleuReport(
        precisions=tuple(precisions),
        brevity_penalty=bp,
        score=score,
        score_pct=100.0 * score,
        hyp_len=hyp_len,
        ref_len=ref_len,
        smoothing=smoothing,
    )


@dataclass(frozen=True)
class BenchReport:
    tokens_per_sec: float
    ms_per_sentence_mean: float
    ms_per_sentence_p50: float
    ms_per_sentence_p95: float
    peak_resident_memory_bytes: int
    prompt_set_id: str
    sentence_ms: tuple
    generated_tokens: int


def _peak_rss_bytes() -> int:
    # ru_maxrss is KiB on Linux; the value is the process-lifetime peak,
    # reported informationally.
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024


def bench(session: TranslationSession, prompts, reps: int = 1) -> BenchReport:
    """Time greedy translation over ``prompts`` x ``reps``.

    One warm-up translation of the first prompt runs first and is
    excluded from the statistics; exactly ``len(prompts) * reps`` timed
    generations follow, strictly sequentially.
    """
    prompts = list(prompts)
    if not prompts:
        raise EmptyCorpus("no prompts to benchmark")
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")

    translate(session, prompts[0])  # warm-up, untimed

    timings = []
    generated = 0
    for _ in range(reps):
        for text in prompts:
            start = time.perf_counter()
            turn = translate(session, text)
            timings.append((time.perf_counter() - start) * 1000.0)
            generated += turn.generated_tokens

    arr = np.array(timings)
    total_seconds = float(arr.sum()) / 1000.0
    return BenchReport(
        tokens_per_sec=generated / total_seconds if total_seconds > 0 else 0.0,
        ms_per_sentence_mean=float(arr.mean()),
        ms_per_sentence_p50=float(np.percentile(arr, 50)),
        ms_per_sentence_p95=float(np.percentile(arr, 95)),
        peak_resident_memory_bytes=_peak_rss_bytes(),
        prompt_set_id=hashlib.sha256(
            "\n".join(prompts).encode("utf-8")
        ).hexdigest()[:12],
        sentence_ms=tuple(timings),
        generated_tokens=generated,
    )


@dataclass(frozen=True)
class ComparisonReport:
    size_a_bytes: int
    size_b_bytes: int
    size_reduction_pct: float
    tokens_per_sec_a: float
    tokens_per_sec_b: float
    speedup_pct: float
    bleu_a: float
    bleu_b: float
    bleu_delta: float
    n_sentences: int


def _file_bytes(source) -> int:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return len(source)
    import os

    return os.stat(source).st_size


def compare_quants(
    file_a,
    file_b,
    testset,
    direction: Direction = Direction.VI_TO_EN,
    params: Optional[GenParams] = None,
    reps: int = 1,
) -> ComparisonReport:
    """Compare two model files on size, speed, and BLEU over one test set.

    Raises:
        ArchitectureMismatch: configs or vocabularies differ.
        EmptyCorpus: the test set is empty.
    """
    testset = list(testset)
    if not testset:
        raise EmptyCorpus("empty test set")
    if params is None:
        params = GenParams(max_new_tokens=32)

    session_a = session_from_file(file_a, direction=direction, params=params)
    session_b = session_from_file(file_b, direction=direction, params=params)
    if session_a.model.config != session_b.model.config:
        raise ArchitectureMismatch(
            f"configs differ: {session_a.model.config} vs {session_b.model.config}"
        )
    if session_a.vocab.pieces != session_b.vocab.pieces:
        raise ArchitectureMismatch("vocabularies differ")

    sources = [pair.source for pair in testset]
    targets = [pair.target for pair in testset]

    bench_a = bench(session_a, sources, reps=reps)
    bench_b = bench(session_b, sources, reps=reps)

    outputs_a = [translate(session_a, text).output_text for text in sources]
    outputs_b = [translate(session_b, text).output_text for text in sources]
    bleu_a = bleu(outputs_a, targets, smoothing="add-one").score
    bleu_b = bleu(outputs_b, targets, smoothing="add-one").score

    size_a = _file_bytes(file_a)
    size_b = _file_bytes(file_b)
    ms_a = bench_a.ms_per_sentence_mean
    ms_b = bench_b.ms_per_sentence_mean
    return ComparisonReport(
        size_a_bytes=size_a,
        size_b_bytes=size_b,
        size_reduction_pct=100.0 * (1.0 - size_b / size_a),
        tokens_per_sec_a=bench_a.tokens_per_sec,
        tokens_per_sec_b=bench_b.tokens_per_sec,
        speedup_pct=100.0 * (ms_a - ms_b) / ms_a if ms_a > 0 else 0.0,
        bleu_a=bleu_a,
        bleu_b=bleu_b,
        bleu_delta=bleu_a - bleu_b,
        n_sentences=len(testset),
    )
