"""Exit-code and output contracts for every CLI command.

Commands run in-process through ``main(argv)``; model files are tiny
random-weight fixtures written to disk so path handling is exercised
for real.
"""

import io
import json

import pytest

from vien.cli import MODEL_ENV_VAR, chat_loop, main
from vien.model import GenParams
from vien.pipeline import session_from_file, translate

from fixtures_pipeline import build_pipeline_file


@pytest.fixture(scope="module")
def model_path(tmp_path_factory):
    blob = build_pipeline_file(seed=6, n_layers=1, embed_dim=32, n_heads=2,
                               n_kv_heads=1, ffn_hidden_dim=48,
                               context_len=256)
    path = tmp_path_factory.mktemp("models") / "tiny.gguf"
    path.write_bytes(blob)
    return str(path)


@pytest.fixture(scope="module")
def truncated_path(tmp_path_factory, model_path):
    blob = open(model_path, "rb").read()
    path = tmp_path_factory.mktemp("models") / "cut.gguf"
    path.write_bytes(blob[:-64])
    return str(path)


FAST = ["--max-new-tokens", "4"]


class TestInspect:
    def test_valid_file_exits_zero(self, model_path, capsys):
        assert main(["inspect", model_path]) == 0
        out = capsys.readouterr().out
        assert "validation: OK" in out
        assert "tensors:" in out
        assert "F32" in out
        assert "general.architecture" in out

    def test_truncated_file_names_violation(self, truncated_path, capsys):
        assert main(["inspect", truncated_path]) == 1
        out = capsys.readouterr().out
        assert "validation: FAILED" in out
        assert "Truncated" in out

    def test_garbage_file_exits_nonzero(self, tmp_path, capsys):
        path = tmp_path / "junk.gguf"
        path.write_bytes(b"not a model at all")
        assert main(["inspect", str(path)]) == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_file_exits_nonzero(self, capsys):
        assert main(["inspect", "/nonexistent/model.gguf"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_model_from_environment(self, model_path, monkeypatch):
        monkeypatch.setenv(MODEL_ENV_VAR, model_path)
        assert main(["inspect"]) == 0

    def test_no_model_anywhere_fails(self, monkeypatch, capsys):
        monkeypatch.delenv(MODEL_ENV_VAR, raising=False)
        assert main(["inspect"]) == 1
        assert MODEL_ENV_VAR in capsys.readouterr().err


class TestTranslate:
    def test_text_mode(self, model_path, capsys):
        code = main(["translate", model_path, "--dir", "vi-en",
                     "--text", "xin chào"] + FAST)
        captured = capsys.readouterr()
        assert code == 0
        assert captured.out.endswith("\n")
        assert "ms" in captured.err  # timing goes to stderr
        assert "vi-en" in captured.err

    def test_deterministic_output(self, model_path, capsys):
        argv = ["translate", model_path, "--text", "cảm ơn"] + FAST
        assert main(argv) == 0
        first = capsys.readouterr().out
        assert main(argv) == 0
        second = capsys.readouterr().out
        assert first == second

    def test_empty_text_exits_two(self, model_path, capsys):
        assert main(["translate", model_path, "--text", ""] + FAST) == 2
        assert "empty" in capsys.readouterr().err

    def test_whitespace_text_exits_two(self, model_path):
        assert main(["translate", model_path, "--text", "  \n "] + FAST) == 2

    def test_context_overflow_exits_three(self, model_path, capsys):
        long_text = "từ " * 400
        code = main(["translate", model_path, "--text", long_text] + FAST)
        assert code == 3
        assert "context" in capsys.readouterr().err.lower()

    def test_load_failure_exits_one(self, capsys):
        code = main(["translate", "/missing.gguf", "--text", "hi"] + FAST)
        assert code == 1

    def test_stdin_line_mode_order(self, model_path, capsys, monkeypatch):
        lines = ["xin chào", "cảm ơn", "tạm biệt"]
        monkeypatch.setattr("sys.stdin", io.StringIO("\n".join(lines) + "\n"))
        code = main(["translate", model_path, "--stdin"] + FAST)
        captured = capsys.readouterr()
        assert code == 0
        out_lines = captured.out.split("\n")[:-1]
        assert len(out_lines) == 3
        # Order check: each line matches an independent single run.
        session = session_from_file(
            model_path, params=GenParams(max_new_tokens=4)
        )
        expected = [translate(session, text).output_text for text in lines]
        assert out_lines == expected

    def test_stdin_blank_line_passthrough(self, model_path, capsys,
                                          monkeypatch):
        monkeypatch.setattr("sys.stdin", io.StringIO("xin chào\n\nhello\n"))
        assert main(["translate", model_path, "--stdin"] + FAST) == 0
        out_lines = capsys.readouterr().out.split("\n")[:-1]
        assert len(out_lines) == 3
        assert out_lines[1] == ""

    def test_requires_text_or_stdin(self, model_path, capsys):
        assert main(["translate", model_path] + FAST) == 1
        assert "--text" in capsys.readouterr().err


@pytest.fixture()
def chat_session(model_path):
    return session_from_file(model_path, params=GenParams(max_new_tokens=4))


def run_chat(session, script):
    out, err = io.StringIO(), io.StringIO()
    code = chat_loop(session, io.StringIO(script), out, err)
    return code, out.getvalue(), err.getvalue()


class TestChat:
    def test_translate_then_quit(self, chat_session):
        code, out, err = run_chat(chat_session, "xin chào\n:quit\n")
        assert code == 0
        assert "vi-en>" in out
        assert "tokens)" in err  # timing footer per turn

    def test_streamed_line_equals_turn_output(self, model_path, chat_session):
        code, out, _ = run_chat(chat_session, "xin chào\n:quit\n")
        assert code == 0
        shown = out.split("vi-en> ", 2)[1].split("\n", 1)[0]
        fresh = session_from_file(model_path, params=GenParams(max_new_tokens=4))
        assert shown == translate(fresh, "xin chào").output_text

    def test_direction_toggle_changes_prompt(self, chat_session):
        code, out, _ = run_chat(chat_session, ":dir\n:quit\n")
        assert code == 0
        assert "direction is now en-vi" in out
        assert "en-vi>" in out
        assert chat_session.direction.value == "en-vi"

    def test_empty_lines_do_not_invoke_model(self, chat_session, monkeypatch):
        calls = []
        monkeypatch.setattr(
            "vien.cli.translate",
            lambda *a, **k: calls.append(1) or (_ for _ in ()).throw(
                AssertionError("must not be called")
            ),
        )
        code, out, _ = run_chat(chat_session, "\n\n   \n:quit\n")
        assert code == 0
        assert calls == []
        assert out.count("vi-en>") == 4  # re-prompt after each blank line

    def test_interrupt_discards_partial_turn(self, chat_session, monkeypatch):
        def boom(*args, **kwargs):
            raise KeyboardInterrupt

        monkeypatch.setattr("vien.cli.translate", boom)
        code, out, _ = run_chat(chat_session, "dở dang\n:quit\n")
        assert code == 0
        assert "interrupted" in out
        assert out.count("vi-en>") == 2  # session continued after Ctrl-C

    def test_inference_error_keeps_session_alive(self, chat_session):
        long_text = "từ " * 400
        code, out, _ = run_chat(chat_session, long_text + "\n:quit\n")
        assert code == 0
        assert "error:" in out
        assert out.count("vi-en>") == 2

    def test_eof_exits_cleanly(self, chat_session):
        code, _, _ = run_chat(chat_session, "")
        assert code == 0


class TestBench:
    def test_table_and_json(self, model_path, tmp_path, capsys):
        prompts = tmp_path / "prompts.txt"
        prompts.write_text("xin chào\ncảm ơn\n", encoding="utf-8")
        code = main(["bench", model_path, "--prompts", str(prompts),
                     "--reps", "1"] + FAST)
        assert code == 0
        assert "tokens/sec" in capsys.readouterr().out

        code = main(["bench", model_path, "--prompts", str(prompts),
                     "--reps", "1", "--json"] + FAST)
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert len(report["sentence_ms"]) == 2
        assert report["tokens_per_sec"] > 0
        assert len(report["prompt_set_id"]) == 12

    def test_empty_prompt_file_exits_two(self, model_path, tmp_path):
        prompts = tmp_path / "empty.txt"
        prompts.write_text("\n\n", encoding="utf-8")
        code = main(["bench", model_path, "--prompts", str(prompts)] + FAST)
        assert code == 2

    def test_load_failure_exits_one(self, tmp_path):
        prompts = tmp_path / "prompts.txt"
        prompts.write_text("hi\n", encoding="utf-8")
        assert main(["bench", "/missing.gguf", "--prompts", str(prompts)]) == 1


class TestEval:
    def test_identical_files_score_one(self, tmp_path, capsys):
        text = "xin chào thế giới\ncảm ơn bạn nhiều\n"
        hyp = tmp_path / "hyp.txt"
        ref = tmp_path / "ref.txt"
        hyp.write_text(text, encoding="utf-8")
        ref.write_text(text, encoding="utf-8")
        code = main(["eval", "--hyp", str(hyp), "--ref", str(ref)])
        assert code == 0
        assert "1.0000" in capsys.readouterr().out

        code = main(["eval", "--hyp", str(hyp), "--ref", str(ref), "--json"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["score"] == 1.0
        assert report["score_pct"] == 100.0

    def test_length_mismatch_exits_two(self, tmp_path):
        hyp = tmp_path / "hyp.txt"
        ref = tmp_path / "ref.txt"
        hyp.write_text("one line\n", encoding="utf-8")
        ref.write_text("two\nlines\n", encoding="utf-8")
        assert main(["eval", "--hyp", str(hyp), "--ref", str(ref)]) == 2

    def test_smoothing_flag(self, tmp_path, capsys):
        hyp = tmp_path / "hyp.txt"
        ref = tmp_path / "ref.txt"
        hyp.write_text("the cat sat\n", encoding="utf-8")
        ref.write_text("the dog ran\n", encoding="utf-8")
        code = main(["eval", "--hyp", str(hyp), "--ref", str(ref),
                     "--smoothing", "add-one", "--json"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["smoothing"] == "add-one"
        assert report["score"] > 0

    def test_clean_mode(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.tsv"
        corpus.write_text(
            "xin chào\thello\n"
            "xin chào\thello\n"
            "malformed line\n"
            "one\t" + " ".join(["w"] * 30) + "\n",
            encoding="utf-8",
        )
        out_file = tmp_path / "clean.tsv"
        code = main(["eval", "--clean", str(corpus), "--out", str(out_file),
                     "--json"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["input_count"] == 4
        assert report["kept_count"] == 1
        assert report["duplicates"] == 1
        assert report["malformed"] == 1
        assert report["ratio_outliers"] == 1
        assert out_file.read_text(encoding="utf-8") == "xin chào\thello\n"

    def test_requires_inputs(self, capsys):
        assert main(["eval"]) == 1
        assert "--hyp" in capsys.readouterr().err


class TestCompare:
    def make_testset(self, tmp_path):
        path = tmp_path / "testset.tsv"
        path.write_text("xin chào\thello\ncảm ơn\tthank you\n",
                        encoding="utf-8")
        return str(path)

    def test_same_file_twice_zero_deltas(self, model_path, tmp_path, capsys):
        testset = self.make_testset(tmp_path)
        code = main(["compare", model_path, model_path, "--testset", testset,
                     "--max-new-tokens", "3", "--json"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["size_reduction_pct"] == 0.0
        assert report["bleu_delta"] == 0.0
        assert report["n_sentences"] == 2

    def test_table_output(self, model_path, tmp_path, capsys):
        testset = self.make_testset(tmp_path)
        code = main(["compare", model_path, model_path, "--testset", testset,
                     "--max-new-tokens", "3"])
        assert code == 0
        out = capsys.readouterr().out
        assert "size reduction: 0.00%" in out
        assert "delta +0.0000" in out

    def test_architecture_mismatch_exits_one(self, model_path, tmp_path,
                                             capsys):
        other = build_pipeline_file(seed=6, n_layers=2, embed_dim=32,
                                    n_heads=2, n_kv_heads=1,
                                    ffn_hidden_dim=48, context_len=256)
        other_path = tmp_path / "other.gguf"
        other_path.write_bytes(other)
        testset = self.make_testset(tmp_path)
        code = main(["compare", model_path, str(other_path),
                     "--testset", testset, "--max-new-tokens", "3"])
        assert code == 1
        assert "ArchitectureMismatch" in capsys.readouterr().err

    def test_empty_testset_exits_two(self, model_path, tmp_path, capsys):
        testset = tmp_path / "empty.tsv"
        testset.write_text("no tabs on this line\n", encoding="utf-8")
        code = main(["compare", model_path, model_path,
                     "--testset", str(testset), "--max-new-tokens", "3"])
        assert code == 2
        assert "malformed" in capsys.readouterr().err


class TestServe:
    def test_nonlocal_bind_without_flag_exits_one(self, model_path, capsys):
        code = main(["serve", model_path, "--host", "0.0.0.0"])
        assert code == 1
        assert "loopback" in capsys.readouterr().err
