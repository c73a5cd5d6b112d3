"""Translation pipeline: prompt building, generation, and postprocessing.

A session couples one loaded model, its vocabulary, a prompt template, a
direction, and decoding parameters.  ``translate`` runs the full path
(NFC-normalize, build prompt, encode with BOS, generate with streaming,
decode, postprocess) entirely in-process; nothing here can perform
network operations.

Defaults fixed in this repository (the model contract does not pin them):

* Decoding is greedy (temperature 0) with ``max_new_tokens`` 256.
* The built-in chat template follows the ``<|system|>/<|user|>/
  <|assistant|>`` turn format with ``</s>`` turn terminators; a chat
  template embedded in the model file takes precedence.
* The per-direction system instruction wording lives in
  ``SYSTEM_TEXT_FORMAT`` and is configuration, not code.

Streaming fragments are produced so that their concatenation equals
``tokenizer.decode`` of the generated ids exactly; runs of byte-fallback
tokens are therefore emitted per completed run, not per token.
"""

from __future__ import annotations

import re
import threading
import time
import unicodedata
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional

import jinja2

from .gguf import GgufFile, GgufValueType, NotFound, metadata_get, parse
from .model import GenParams, Model, generate, load_model
from .tokenizer import SPACE_MARKER, TokenType, Vocab, decode, encode, load_vocab

CHAT_TEMPLATE_KEY = "tokenizer.chat_template"

DEFAULT_CHAT_TEMPLATE = (
    "{% for message in messages %}"
    "{% if message['role'] == 'system' %}<|system|>\n{{ message['content'] }}</s>\n"
    "{% elif message['role'] == 'user' %}<|user|>\n{{ message['content'] }}</s>\n"
    "{% elif message['role'] == 'assistant' %}<|assistant|>\n{{ message['content'] }}</s>\n"
    "{% endif %}{% endfor %}"
    "{% if add_generation_prompt %}<|assistant|>\n{% endif %}"
)

DEFAULT_ROLE_MARKERS = ("<|system|>", "<|user|>", "<|assistant|>")

SYSTEM_TEXT_FORMAT = (
    "You are a translation engine. Translate the user's message from "
    "{source} to {target}. Reply with the {target} translation only."
)


class EmptyInput(Exception):
    """Source text is empty after trimming."""


class Direction(Enum):
    """Translation direction; values are the wire/CLI codes."""

    VI_TO_EN = "vi-en"
    EN_TO_VI = "en-vi"

    @property
    def source_lang(self) -> str:
        return "Vietnamese" if self is Direction.VI_TO_EN else "English"

    @property
    def target_lang(self) -> str:
        return "English" if self is Direction.VI_TO_EN else "Vietnamese"

    def toggled(self) -> "Direction":
        return Direction.EN_TO_VI if self is Direction.VI_TO_EN else Direction.VI_TO_EN

    @classmethod
    def from_code(cls, code: str) -> "Direction":
        try:
            return cls(code)
        except ValueError:
            raise ValueError(
                f"unknown direction {code!r}; expected one of "
                f"{[d.value for d in cls]}"
            ) from None


@lru_cache(maxsize=32)
def _compile(template_text: str) -> jinja2.Template:
    return jinja2.Environment(keep_trailing_newline=True).from_string(template_text)


@dataclass(frozen=True)
class PromptTemplate:
    """Chat formatting contract: turn template, header, and scrub lists."""

    system_text: str = SYSTEM_TEXT_FORMAT
    chat_template: str = DEFAULT_CHAT_TEMPLATE
    assistant_header: str = "<|assistant|>\n"
    stop_strings: tuple = ("</s>",)
    role_markers: tuple = DEFAULT_ROLE_MARKERS
    bos_piece: str = "<s>"
    eos_piece: str = "</s>"

    def render(self, system: str, user: str) -> str:
        rendered = _compile(self.chat_template).render(
            messages=[
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            add_generation_prompt=True,
            bos_token=self.bos_piece,
            eos_token=self.eos_piece,
        )
        if not rendered.endswith(self.assistant_header):
            raise ValueError(
                f"template rendering does not end with the assistant header "
                f"{self.assistant_header!r}"
            )
        return rendered


def _derived_assistant_header(template_text: str) -> str:
    """Header = suffix the template appends when asked to open a reply."""
    probe = [{"role": "user", "content": "probe"}]
    tpl = _compile(template_text)
    without = tpl.render(messages=probe, add_generation_prompt=False,
                         bos_token="<s>", eos_token="</s>")
    with_header = tpl.render(messages=probe, add_generation_prompt=True,
                             bos_token="<s>", eos_token="</s>")
    if with_header.startswith(without) and len(with_header) > len(without):
        return with_header[len(without):]
    return ""


def template_from_file(file: GgufFile, vocab: Optional[Vocab] = None) -> PromptTemplate:
    """Build the prompt template, preferring chat-template metadata.

    Role markers of the ``<|name|>`` form are harvested from the template
    text so postprocess can scrub them even for model-supplied formats.
    """
    eos_piece = "</s>"
    bos_piece = "<s>"
    if vocab is not None:
        eos_piece = vocab.pieces[vocab.eos_id]
        bos_piece = vocab.pieces[vocab.bos_id]
    try:
        template_text = metadata_get(file, CHAT_TEMPLATE_KEY, GgufValueType.STRING)
    except NotFound:
        return PromptTemplate(
            stop_strings=(eos_piece,), bos_piece=bos_piece, eos_piece=eos_piece
        )
    header = _derived_assistant_header(template_text)
    markers = tuple(
        sorted(set(re.findall(r"<\|[^|>]+\|>", template_text)) | set(DEFAULT_ROLE_MARKERS))
    )
    base = PromptTemplate()
    return PromptTemplate(
        chat_template=template_text,
        assistant_header=header or base.assistant_header,
        stop_strings=(eos_piece,),
        role_markers=markers,
        bos_piece=bos_piece,
        eos_piece=eos_piece,
    )


def build_prompt(template: PromptTemplate, direction: Direction, text: str) -> str:
    """Render the full prompt for one source sentence.

    Raises:
        EmptyInput: the text is empty or only whitespace.
    """
    if not text.strip():
        raise EmptyInput("source text is empty")
    system = template.system_text.format(
        source=direction.source_lang, target=direction.target_lang
    )
    return template.render(system, text)


def postprocess(raw: str, template: PromptTemplate) -> str:
    """Scrub stop strings and role markers, then normalize whitespace.

    Whitespace runs collapse to single spaces and the ends are trimmed;
    diacritics and all other characters pass through untouched.
    """
    out = raw
    for needle in (*template.stop_strings, *template.role_markers,
                   template.assistant_header.strip()):
        if needle:
            out = out.replace(needle, " ")
    return re.sub(r"\s+", " ", out).strip()


class StreamScrubber:
    """Re-emit a raw decode stream as increments of the postprocessed text.

    ``feed`` returns the part of ``postprocess(raw so far)`` that has
    become stable. A tail that could still grow into a stop string or
    role marker is withheld until the next fragment disambiguates it;
    trailing whitespace disappears under ``postprocess`` and re-emerges
    as a separator once more text arrives. ``flush`` hands out whatever
    of the final text is still unsent, so the concatenation of every
    returned chunk equals the final postprocessed text exactly.
    """

    def __init__(self, template: PromptTemplate):
        self._template = template
        self._needles = tuple(
            n for n in (*template.stop_strings, *template.role_markers,
                        template.assistant_header.strip()) if n)
        self._raw = ""
        self._sent = ""

    def feed(self, fragment: str) -> str:
        self._raw += fragment
        hold = 0
        for needle in self._needles:
            top = min(len(needle) - 1, len(self._raw))
            for k in range(top, hold, -1):
                if self._raw.endswith(needle[:k]):
                    hold = k
                    break
        safe = self._raw[: len(self._raw) - hold] if hold else self._raw
        return self._advance(postprocess(safe, self._template))

    def flush(self, final_text: str) -> str:
        return self._advance(final_text)

    def _advance(self, visible: str) -> str:
        if not visible.startswith(self._sent):
            return ""  # never retract streamed text; flush settles the turn
        delta = visible[len(self._sent):]
        self._sent = visible
        return delta


@dataclass(frozen=True)
class TranslationTurn:
    """One completed translation with its accounting fields."""

    direction: Direction
    source_text: str
    output_text: str
    prompt_tokens: int
    generated_tokens: int
    total_ms: float
    ms_per_generated_token: float
    truncated: bool


class SpeechAdapter:
    """Optional speech stage plug-in; the default pipeline is text-only.

    Adapters declare capabilities via ``has_stt``/``has_tts`` and attest
    locality with ``local_only``; an adapter declaring locality must not
    perform network operations.
    """

    has_stt = False
    has_tts = False
    local_only = True

    def speech_to_text(self, audio) -> str:
        raise NotImplementedError

    def text_to_speech(self, text: str) -> None:
        raise NotImplementedError


@dataclass
class TranslationSession:
    """One conversational session; concurrent translate calls serialize."""

    model: Model
    vocab: Vocab
    template: PromptTemplate = field(default_factory=PromptTemplate)
    direction: Direction = Direction.VI_TO_EN
    params: GenParams = field(default_factory=lambda: GenParams(max_new_tokens=256))
    speech_adapter: Optional[SpeechAdapter] = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


def session_from_file(source, direction: Direction = Direction.VI_TO_EN,
                      params: Optional[GenParams] = None) -> TranslationSession:
    """Load model, vocabulary, and template from one GGUF source."""
    file = parse(source)
    model = load_model(file)
    vocab = load_vocab(file)
    session = TranslationSession(
        model=model,
        vocab=vocab,
        template=template_from_file(file, vocab),
        direction=direction,
    )
    if params is not None:
        session.params = params
    return session


def set_direction(session: TranslationSession, direction: Direction) -> None:
    session.direction = direction


def register_speech_adapter(session: TranslationSession, adapter: SpeechAdapter) -> None:
    session.speech_adapter = adapter


class _FragmentStream:
    """Emit text fragments whose concatenation equals ``decode`` exactly.

    Byte-fallback tokens buffer until their run completes so each run is
    decoded with the same batch semantics ``decode`` uses.
    """

    def __init__(self, vocab: Vocab, emit: Optional[Callable[[str], None]]):
        self._vocab = vocab
        self._emit = emit
        self._run = bytearray()
        self._strip_pending = vocab.add_space_prefix
        self.text = ""

    def _out(self, fragment: str) -> None:
        if not fragment:
            return
        if self._strip_pending:
            self._strip_pending = False
            if fragment.startswith(" "):
                fragment = fragment[1:]
                if not fragment:
                    return
        self.text += fragment
        if self._emit is not None:
            self._emit(fragment)

    def _flush_run(self) -> None:
        if self._run:
            self._out(self._run.decode("utf-8", errors="replace"))
            self._run.clear()

    def push(self, tid: int) -> None:
        ttype = self._vocab.token_types[tid]
        if ttype == TokenType.BYTE:
            piece = self._vocab.pieces[tid]
            self._run.append(int(piece[3:5], 16))
            return
        self._flush_run()
        if ttype == TokenType.CONTROL:
            return
        self._out(self._vocab.pieces[tid].replace(SPACE_MARKER, " "))

    def finish(self) -> str:
        self._flush_run()
        return self.text


def translate(
    session: TranslationSession,
    text: str,
    on_fragment: Optional[Callable[[str], None]] = None,
) -> TranslationTurn:
    """Translate one sentence, streaming raw fragments to ``on_fragment``.

    Raises:
        EmptyInput: text is empty after trimming.
        ContextOverflow: the prompt does not fit the model context; raised
            before any fragment is emitted.
    """
    with session._lock:
        normalized = unicodedata.normalize("NFC", text)
        if not normalized.strip():
            raise EmptyInput("source text is empty")

        start = time.perf_counter()
        prompt = build_prompt(session.template, session.direction, normalized)
        prompt_ids = encode(session.vocab, prompt, add_bos=True)
        params = replace(
            session.params,
            stop_token_ids=frozenset(session.params.stop_token_ids)
            | {session.vocab.eos_id},
        )
        stream = _FragmentStream(session.vocab, on_fragment)
        result = generate(session.model, prompt_ids, params, sink=stream.push)
        stream.finish()

        raw = decode(session.vocab, list(result.ids))
        output = postprocess(raw, session.template)
        total_ms = (time.perf_counter() - start) * 1000.0
        per_token = total_ms / len(result.ids) if result.ids else 0.0

        turn = TranslationTurn(
            direction=session.direction,
            source_text=normalized,
            output_text=output,
            prompt_tokens=len(prompt_ids),
            generated_tokens=len(result.ids),
            total_ms=total_ms,
            ms_per_generated_token=per_token,
            truncated=result.truncated,
        )
    adapter = session.speech_adapter
    if adapter is not None and adapter.has_tts:
        adapter.text_to_speech(turn.output_text)
    return turn


def translate_speech(session: TranslationSession, audio) -> TranslationTurn:
    """Run speech input through the registered adapter, then translate."""
    adapter = session.speech_adapter
    if adapter is None or not adapter.has_stt:
        raise ValueError("no speech-to-text adapter registered")
    return translate(session, adapter.speech_to_text(audio))
