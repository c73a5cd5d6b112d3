"""Command-line entry points: inspect, translate, chat, bench, eval,
compare, serve.

Exit-code contract (stable, tested):

* ``inspect`` — 0 iff the file parses and validates; 1 otherwise.
* ``translate`` — 0 on success; 1 when the model fails to load; 2 on
  empty input; 3 on context overflow.
* ``bench``/``eval``/``compare`` — 0 on success, 1 on any input or load
  failure, 2 on empty input sets.
* ``serve`` — does not return under normal operation; 1 on config or
  load failure.

The model path argument defaults to the ``VIEN_MODEL`` environment
variable; commands that need a model fail with exit 1 when neither is
given.  Reports print as human-readable tables by default and as JSON
with ``--json`` (field names match docs/api.md and the report
dataclasses).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

from .evaluate import (
    CleaningRules,
    EmptyCorpus,
    LengthMismatch,
    bench,
    bleu,
    clean_corpus_file,
    compare_quants,
    load_pairs_tsv,
    save_pairs_tsv,
)
from .gguf import parse
from .gguf.constants import GgufValueType
from .gguf.validate import quant_histogram, validate
from .model import ContextOverflow, GenParams, InferenceError
from .pipeline import (
    Direction,
    EmptyInput,
    StreamScrubber,
    session_from_file,
    set_direction,
    translate,
)

MODEL_ENV_VAR = "VIEN_MODEL"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_EMPTY_INPUT = 2
EXIT_CONTEXT_OVERFLOW = 3


def _fail(message: str, code: int = EXIT_FAILURE) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _resolve_model(args) -> str:
    path = getattr(args, "model", None) or os.environ.get(MODEL_ENV_VAR)
    if not path:
        raise FileNotFoundError(
            f"no model given: pass a model path or set {MODEL_ENV_VAR}"
        )
    return path


def _load_session(args):
    path = _resolve_model(args)
    params = GenParams(
        max_new_tokens=args.max_new_tokens,
        temperature=args.temperature,
        seed=args.seed,
    )
    return session_from_file(path, direction=Direction.from_code(args.dir),
                             params=params)


def _emit(report, as_json: bool, table_lines) -> None:
    if as_json:
        print(json.dumps(dataclasses.asdict(report), indent=2))
    else:
        for line in table_lines:
            print(line)


def _meta_display(value) -> str:
    if value.tag == GgufValueType.ARRAY:
        return f"[{len(value.value)} x {value.elem_tag.name}]"
    if value.tag == GgufValueType.STRING and len(value.value) > 60:
        return repr(value.value[:57] + "...")
    return repr(value.value)


def cmd_inspect(args) -> int:
    try:
        path = _resolve_model(args)
        file = parse(path)
    except Exception as exc:
        return _fail(f"{type(exc).__name__}: {exc}")

    print(f"file: {path} ({file.total_size} bytes)")
    print(f"gguf version 3, alignment {file.alignment}, "
          f"data offset {file.data_offset}")
    print(f"metadata: {len(file.metadata)} entries")
    for key in sorted(file.metadata):
        print(f"  {key} = {_meta_display(file.metadata[key])}")
    print(f"tensors: {len(file.tensors)}")
    for name, row in quant_histogram(file).items():
        print(f"  {name:<6} {row['tensors']:>5} tensors  {row['bytes']:>14} bytes")

    report = validate(file)
    if report.ok:
        print("validation: OK")
        return EXIT_OK
    print(f"validation: FAILED ({len(report.violations)} problems)")
    for v in report.violations:
        print(f"  [{v.code}] {v.subject}: {v.message}")
    return EXIT_FAILURE


def _print_timing(turn) -> None:
    print(
        f"[{turn.direction.value}] {turn.total_ms:.1f} ms, "
        f"{turn.generated_tokens} tokens, "
        f"{turn.ms_per_generated_token:.1f} ms/token",
        file=sys.stderr,
    )


def cmd_translate(args) -> int:
    try:
        session = _load_session(args)
    except Exception as exc:
        return _fail(f"{type(exc).__name__}: {exc}")

    def one(text: str) -> int:
        try:
            turn = translate(session, text)
        except EmptyInput:
            return _fail("empty input", EXIT_EMPTY_INPUT)
        except ContextOverflow as exc:
            return _fail(f"context overflow: {exc}", EXIT_CONTEXT_OVERFLOW)
        print(turn.output_text)
        _print_timing(turn)
        return EXIT_OK

    if args.stdin:
        # Line mode keeps a 1:1 input/output mapping; blank lines pass
        # through as blank output lines without invoking the model.
        for line in sys.stdin:
            line = line.rstrip("\n")
            if not line.strip():
                print("")
                continue
            code = one(line)
            if code != EXIT_OK:
                return code
        return EXIT_OK
    if args.text is None:
        return _fail("pass --text or --stdin")
    return one(args.text)


CHAT_HELP = """commands:
  :dir     toggle translation direction
  :quit    leave the chat (also :exit, Ctrl-D)
anything else is translated; an empty line just re-prompts.
Ctrl-C during generation discards the partial turn."""


def chat_loop(session, in_stream, out_stream, err_stream) -> int:
    """REPL over explicit streams (unit-testable; cmd_chat wires stdio)."""

    def say(text=""):
        print(text, file=out_stream, flush=True)

    say(CHAT_HELP)
    while True:
        print(f"{session.direction.value}> ", end="", file=out_stream, flush=True)
        line = in_stream.readline()
        if not line:
            say()
            return EXIT_OK
        line = line.strip()
        if not line:
            continue
        if line in (":quit", ":exit"):
            return EXIT_OK
        if line == ":dir":
            set_direction(session, session.direction.toggled())
            say(f"direction is now {session.direction.value}")
            continue
        # Stream the cleaned translation, not raw decodes: the scrubber
        # withholds stop strings and collapses whitespace so the line
        # shown is exactly the turn's output text.
        scrubber = StreamScrubber(session.template)

        def show(frag: str) -> None:
            delta = scrubber.feed(frag)
            if delta:
                print(delta, end="", file=out_stream, flush=True)

        try:
            turn = translate(session, line, on_fragment=show)
        except KeyboardInterrupt:
            say("\n[interrupted, partial turn discarded]")
            continue
        except EmptyInput:
            continue
        except InferenceError as exc:
            say(f"\n[error: {type(exc).__name__}: {exc}]")
            continue
        print(scrubber.flush(turn.output_text), end="", file=out_stream, flush=True)
        say()
        print(
            f"  ({turn.total_ms:.0f} ms, {turn.generated_tokens} tokens)",
            file=err_stream, flush=True,
        )


def cmd_chat(args) -> int:
    try:
        session = _load_session(args)
    except Exception as exc:
        return _fail(f"{type(exc).__name__}: {exc}")
    try:
        return chat_loop(session, sys.stdin, sys.stdout, sys.stderr)
    except KeyboardInterrupt:
        print("", file=sys.stdout)
        return EXIT_OK


def _read_lines(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def cmd_bench(args) -> int:
    try:
        session = _load_session(args)
        prompts = _read_lines(args.prompts)
        report = bench(session, prompts, reps=args.reps)
    except EmptyCorpus as exc:
        return _fail(str(exc), EXIT_EMPTY_INPUT)
    except Exception as exc:
        return _fail(f"{type(exc).__name__}: {exc}")
    _emit(report, args.json, [
        f"prompts: {len(prompts)} x {args.reps} reps "
        f"(set {report.prompt_set_id})",
        f"tokens/sec:        {report.tokens_per_sec:.2f}",
        f"ms/sentence mean:  {report.ms_per_sentence_mean:.1f}",
        f"ms/sentence p50:   {report.ms_per_sentence_p50:.1f}",
        f"ms/sentence p95:   {report.ms_per_sentence_p95:.1f}",
        f"peak resident mem: {report.peak_resident_memory_bytes} bytes",
    ])
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.clean:
        try:
            kept, report = clean_corpus_file(
                args.clean,
                CleaningRules(ratio_min=args.ratio_min,
                              ratio_max=args.ratio_max),
            )
        except Exception as exc:
            return _fail(f"{type(exc).__name__}: {exc}")
        if args.out:
            save_pairs_tsv(args.out, kept)
        _emit(report, args.json, [
            f"input pairs:    {report.input_count}",
            f"kept:           {report.kept_count}",
            f"duplicates:     {report.duplicates}",
            f"empty sides:    {report.empties}",
            f"ratio outliers: {report.ratio_outliers}",
            f"malformed:      {report.malformed}",
            f"encoding fixes: {report.encoding_fixes}",
        ])
        return EXIT_OK

    if not (args.hyp and args.ref):
        return _fail("pass --hyp and --ref files, or --clean")
    try:
        hyps = _read_lines(args.hyp)
        refs = _read_lines(args.ref)
        report = bleu(hyps, refs, smoothing=args.smoothing)
    except (LengthMismatch, EmptyCorpus) as exc:
        return _fail(str(exc), EXIT_EMPTY_INPUT)
    except Exception as exc:
        return _fail(f"{type(exc).__name__}: {exc}")
    precisions = " ".join(f"{p:.4f}" for p in report.precisions)
    _emit(report, args.json, [
        f"sentences:       {len(hyps)}",
        f"BLEU:            {report.score:.4f} ({report.score_pct:.2f} on 0-100)",
        f"precisions:      {precisions}",
        f"brevity penalty: {report.brevity_penalty:.4f}",
        f"lengths:         hyp {report.hyp_len}, ref {report.ref_len}",
        f"smoothing:       {report.smoothing}",
    ])
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        testset, malformed = load_pairs_tsv(args.testset)
        if malformed:
            print(f"warning: {malformed} malformed testset lines skipped",
                  file=sys.stderr)
        params = GenParams(max_new_tokens=args.max_new_tokens,
                           temperature=args.temperature, seed=args.seed)
        report = compare_quants(
            args.model_a, args.model_b, testset,
            direction=Direction.from_code(args.dir),
            params=params, reps=args.reps,
        )
    except EmptyCorpus as exc:
        return _fail(str(exc), EXIT_EMPTY_INPUT)
    except Exception as exc:
        return _fail(f"{type(exc).__name__}: {exc}")
    _emit(report, args.json, [
        f"size A:         {report.size_a_bytes} bytes",
        f"size B:         {report.size_b_bytes} bytes",
        f"size reduction: {report.size_reduction_pct:.2f}%",
        f"tokens/sec:     A {report.tokens_per_sec_a:.2f}, "
        f"B {report.tokens_per_sec_b:.2f}",
        f"speedup:        {report.speedup_pct:.2f}%",
        f"BLEU:           A {report.bleu_a:.4f}, B {report.bleu_b:.4f}, "
        f"delta {report.bleu_delta:+.4f}",
        f"sentences:      {report.n_sentences}",
    ])
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import ServiceConfig, serve

    try:
        config = ServiceConfig(
            model_path=_resolve_model(args),
            host=args.host,
            port=args.port,
            direction=Direction.from_code(args.dir),
            max_new_tokens=args.max_new_tokens,
            temperature=args.temperature,
            seed=args.seed,
            allow_nonlocal=args.allow_nonlocal,
        )
        serve(config)
    except Exception as exc:
        return _fail(f"{type(exc).__name__}: {exc}")
    return EXIT_OK


def _add_model_arg(parser, positional=True):
    if positional:
        parser.add_argument(
            "model", nargs="?", default=None,
            help=f"GGUF model path (default: ${MODEL_ENV_VAR})",
        )


def _add_gen_args(parser, max_new_tokens=256):
    parser.add_argument("--dir", default="vi-en",
                        choices=[d.value for d in Direction],
                        help="translation direction")
    parser.add_argument("--max-new-tokens", type=int, default=max_new_tokens)
    parser.add_argument("--temperature", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vien",
        description="Offline Vietnamese-English translation engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="parse and validate a model file")
    _add_model_arg(p)
    p.set_defaults(fn=cmd_inspect)

    p = sub.add_parser("translate", help="translate one text or stdin lines")
    _add_model_arg(p)
    _add_gen_args(p)
    p.add_argument("--text", default=None, help="text to translate")
    p.add_argument("--stdin", action="store_true",
                   help="translate each stdin line, one output line each")
    p.set_defaults(fn=cmd_translate)

    p = sub.add_parser("chat", help="interactive translation REPL")
    _add_model_arg(p)
    _add_gen_args(p)
    p.set_defaults(fn=cmd_chat)

    p = sub.add_parser("bench", help="time translation over a prompt file")
    _add_model_arg(p)
    _add_gen_args(p, max_new_tokens=32)
    p.add_argument("--prompts", required=True,
                   help="text file, one prompt per line")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("eval", help="BLEU-score files or clean a TSV corpus")
    p.add_argument("--hyp", default=None, help="hypothesis file, one per line")
    p.add_argument("--ref", default=None, help="reference file, one per line")
    p.add_argument("--smoothing", default="none", choices=["none", "add-one"])
    p.add_argument("--clean", default=None, metavar="TSV",
                   help="clean this source<TAB>target corpus instead")
    p.add_argument("--out", default=None, help="write cleaned pairs here")
    p.add_argument("--ratio-min", type=float, default=1.0 / 3.0)
    p.add_argument("--ratio-max", type=float, default=3.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("compare", help="size/speed/BLEU of two model files")
    p.add_argument("model_a")
    p.add_argument("model_b")
    p.add_argument("--testset", required=True,
                   help="TSV testset: source<TAB>reference")
    _add_gen_args(p, max_new_tokens=32)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("serve", help="run the loopback HTTP/WS service")
    _add_model_arg(p)
    _add_gen_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8237)
    p.add_argument("--allow-nonlocal", action="store_true",
                   help="permit non-loopback binds and peers (off by default)")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
