"""End-to-end runs of the command line driver (in process)."""

import importlib.util
import json

import pytest

from storyeval_bridge.cli import main


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_objs(path):
    return [json.loads(ln) for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]


@pytest.fixture
def raw_input(tmp_path):
    path = tmp_path / "raw.jsonl"
    write_lines(
        path,
        [
            json.dumps({"prompt": "A knock at the door.", "story": "She opened it. Nobody was there."}),
            json.dumps({"prompt": "The last train left.", "story": "He ran anyway. The platform was empty."}),
        ],
    )
    return path


class TestUsage:
    def test_no_command_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_flag_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["annotate", "--input", "x", "--out", "y", "--frobnicate"])
        assert exc.value.code == 2


class TestAnnotateCommand:
    def test_writes_records_and_sidecars(self, tmp_path, raw_input, capsys):
        out = tmp_path / "annotated.jsonl"
        rc = main(["annotate", "--input", str(raw_input), "--out", str(out), "--backend", "rule"])
        assert rc == 0
        assert f"annotated 4 records (rule) -> {out}" in capsys.readouterr().out
        objs = read_objs(out)
        assert [o["id"] for o in objs] == [
            "human-00000", "human-00000#prompt", "human-00001", "human-00001#prompt",
        ]

    def test_sidecars_can_be_disabled(self, tmp_path, raw_input, capsys):
        out = tmp_path / "annotated.jsonl"
        rc = main([
            "annotate", "--input", str(raw_input), "--out", str(out),
            "--backend", "rule", "--no-prompt-sidecars", "--model-name", "crowd",
        ])
        assert rc == 0
        assert "annotated 2 records" in capsys.readouterr().out
        assert [o["id"] for o in read_objs(out)] == ["crowd-00000", "crowd-00001"]

    def test_malformed_input_fails_with_line_number(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"prompt": "p", "story": "s"}\n{oops\n', encoding="utf-8")
        rc = main(["annotate", "--input", str(bad), "--out", str(tmp_path / "o"), "--backend", "rule"])
        assert rc == 1
        assert "line 2" in capsys.readouterr().err

    @pytest.mark.skipif(
        importlib.util.find_spec("spacy") is not None, reason="spacy present"
    )
    def test_spacy_backend_without_spacy_fails_cleanly(self, tmp_path, raw_input, capsys):
        rc = main(["annotate", "--input", str(raw_input), "--out", str(tmp_path / "o")])
        assert rc == 1
        assert "not installed" in capsys.readouterr().err


class TestScoreCommand:
    def test_requires_an_output(self, tmp_path, tiny_model_dir, capsys):
        empty = tmp_path / "in.jsonl"
        empty.write_text("", encoding="utf-8")
        rc = main(["score", "--input", str(empty), "--model", str(tiny_model_dir)])
        assert rc == 1
        assert "nothing to do" in capsys.readouterr().err

    def test_swaps_require_scores_out(self, tmp_path, tiny_model_dir, capsys):
        empty = tmp_path / "in.jsonl"
        empty.write_text("", encoding="utf-8")
        rc = main([
            "score", "--input", str(empty), "--model", str(tiny_model_dir),
            "--traces-out", str(tmp_path / "t"), "--swaps",
        ])
        assert rc == 1
        assert "need --scores-out" in capsys.readouterr().err

    def test_traces_scores_and_candidates(self, tmp_path, raw_input, tiny_model_dir, capsys):
        annotated = tmp_path / "annotated.jsonl"
        main(["annotate", "--input", str(raw_input), "--out", str(annotated), "--backend", "rule"])
        cands = tmp_path / "cands.jsonl"
        write_lines(
            cands,
            [json.dumps({"key": "human-00000#prompt1", "prompt": "Wrong prompt.", "story": "She opened it."})],
        )
        traces = tmp_path / "traces.jsonl"
        scores = tmp_path / "scores.jsonl"
        rc = main([
            "score", "--input", str(annotated), "--model", str(tiny_model_dir),
            "--traces-out", str(traces), "--scores-out", str(scores),
            "--candidates", str(cands),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert f"traced 4 records -> {traces}" in out
        assert f"wrote 3 scores -> {scores}" in out

        traced = read_objs(traces)
        assert [o["id"] for o in traced] == [
            "human-00000", "human-00000#prompt", "human-00001", "human-00001#prompt",
        ]
        assert all("trace" in o for o in traced if not o["id"].endswith("#prompt"))
        assert all("trace" not in o for o in traced if o["id"].endswith("#prompt"))
        score_keys = {o["key"] for o in read_objs(scores)}
        assert score_keys == {"human-00000#orig", "human-00001#orig", "human-00000#prompt1"}
        assert all(o["logp"] <= 0.0 for o in read_objs(scores))


class TestGenerateCommand:
    def test_samples_stories(self, tmp_path, tiny_model_dir, capsys):
        prompts = tmp_path / "prompts.txt"
        write_lines(prompts, ["the old sea", "a dog ran"])
        out = tmp_path / "gen.jsonl"
        rc = main([
            "generate", "--model", str(tiny_model_dir), "--prompts", str(prompts),
            "--out", str(out), "--k", "8", "--seed", "3", "--target-words", "5",
            "--model-name", "tiny",
        ])
        assert rc == 0
        assert f"generated 2 stories at k=8 -> {out}" in capsys.readouterr().out
        objs = read_objs(out)
        assert [o["id"] for o in objs] == ["tiny-k8-00000", "tiny-k8-00001"]
        assert all(len(o["tokens"]) == 5 for o in objs)
        assert all(o["k"] == 8 for o in objs)

    def test_k_beyond_vocabulary_is_rejected(self, tmp_path, tiny_model_dir, capsys):
        prompts = tmp_path / "prompts.txt"
        write_lines(prompts, ["a day"])
        rc = main([
            "generate", "--model", str(tiny_model_dir), "--prompts", str(prompts),
            "--out", str(tmp_path / "o"), "--k", "1000",
        ])
        assert rc == 1
        assert "exceeds the model vocabulary" in capsys.readouterr().err


class TestFilterCommand:
    def test_drops_overlong_pairs(self, tmp_path, tiny_model_dir, capsys):
        short = json.dumps({"prompt": "the cat", "story": "sat ."})
        long = json.dumps({"prompt": "the cat", "story": " ".join(["unmerged"] * 40)})
        src = tmp_path / "src.jsonl"
        write_lines(src, [short, long])
        out = tmp_path / "kept.jsonl"
        rc = main([
            "filter", "--input", str(src), "--out", str(out),
            "--model", str(tiny_model_dir), "--max-context", "64",
        ])
        assert rc == 0
        assert f"kept 1, dropped 1 over 64 subwords -> {out}" in capsys.readouterr().out
        assert out.read_text(encoding="utf-8") == short + "\n"
