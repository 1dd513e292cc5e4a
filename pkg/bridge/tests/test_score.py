"""Teacher-forced scoring against the tiny local checkpoint."""

import math

import pytest

from storyeval_bridge import BridgeError
from storyeval_bridge.score import ContextOverflow, Scorer, run_scoring, score_candidates


def record(rid, prompt, story, sent_bounds=None):
    tokens = story.split()
    obj = {"id": rid, "model": "m", "prompt": prompt, "story": story, "tokens": tokens}
    if sent_bounds is not None:
        obj["sent_bounds"] = sent_bounds
    return obj


class TestScoreText:
    def test_empty_continuation_scores_zero(self, tiny_scorer):
        value = tiny_scorer.score_text("any prompt at all", "")
        assert value == 0.0
        assert isinstance(value, float)

    def test_scores_are_negative_totals(self, tiny_scorer):
        value = tiny_scorer.score_text("the old sea", "a cat sat by the door .")
        assert value < 0.0

    def test_deterministic(self, tiny_scorer):
        args = ("the dog ran", "it was night . she sat .")
        assert tiny_scorer.score_text(*args) == tiny_scorer.score_text(*args)

    def test_matches_trace_total(self, tiny_scorer):
        prompt = "the light"
        tokens = "an old hand held the door .".split()
        trace = tiny_scorer.teacher_forced_trace(prompt, tokens)
        total = tiny_scorer.score_text(prompt, " ".join(tokens))
        assert math.isclose(total, sum(trace["sub_logp"]), rel_tol=0, abs_tol=1e-9)

    def test_longer_continuation_scores_lower(self, tiny_scorer):
        short = tiny_scorer.score_text("the day", "a cat")
        long = tiny_scorer.score_text("the day", "a cat sat by the sea at night")
        assert long < short


class TestTeacherForcedTrace:
    def test_wire_shape(self, tiny_scorer):
        tokens = "the old cat sat by the sea .".split()
        trace = tiny_scorer.teacher_forced_trace("it was a day", tokens)
        assert set(trace) == {"sub_logp", "word_ix", "vocab_size"}
        assert len(trace["sub_logp"]) == len(trace["word_ix"])
        assert trace["vocab_size"] == tiny_scorer.vocab_size
        assert all(v <= 0.0 for v in trace["sub_logp"])

    @pytest.mark.parametrize(
        "story",
        [
            "the cat sat .",
            "an unmerged xylophone word appears here .",
            "tiny !",
            "one",
            "the café door , was open ; truly .",
        ],
    )
    def test_alignment_covers_every_word_once_in_order(self, tiny_scorer, story):
        tokens = story.split()
        trace = tiny_scorer.teacher_forced_trace("a prompt", tokens)
        ix = trace["word_ix"]
        assert sorted(set(ix)) == list(range(len(tokens)))
        assert all(b >= a for a, b in zip(ix, ix[1:]))

    def test_empty_prompt_alignment(self, tiny_scorer):
        tokens = "the dog ran at night".split()
        trace = tiny_scorer.teacher_forced_trace("", tokens)
        assert sorted(set(trace["word_ix"])) == list(range(5))

    def test_matches_runtime_loss(self, tiny_scorer):
        """Summed subword log-probs re-derive the model's own reported loss."""
        import torch

        tokens = "the dog ran at night and the cat sat by the door .".split()
        trace = tiny_scorer.teacher_forced_trace("", tokens)
        ids = [256] + tiny_scorer.tokenizer(
            " ".join(tokens), add_special_tokens=False
        )["input_ids"]
        batch = torch.tensor([ids])
        with torch.no_grad():
            loss = float(tiny_scorer.model(batch, labels=batch).loss)
        ours = -sum(trace["sub_logp"]) / len(trace["sub_logp"])
        assert math.exp(ours) == pytest.approx(math.exp(loss), rel=0.005)
        assert ours == pytest.approx(loss, rel=1e-5)

    def test_overflow_raises(self, tiny_model_dir):
        from storyeval_bridge.score import load_model

        tokenizer, model = load_model(str(tiny_model_dir))
        tight = Scorer(tokenizer, model, max_context=8)
        with pytest.raises(ContextOverflow):
            tight.teacher_forced_trace("a prompt", "far too many words to fit".split())


class TestRunScoring:
    def test_traces_attached_and_originals_scored(self, tiny_scorer):
        objs = [record("r0", "the sea", "a dog ran ."), record("r1", "", "night fell .")]
        out = run_scoring(tiny_scorer, iter(objs), traces=True, orig_scores=True)
        assert [o["id"] for o in out.traced] == ["r0", "r1"]
        assert all("trace" in o for o in out.traced)
        assert set(out.scores) == {"r0#orig", "r1#orig"}
        assert out.scores["r0#orig"] == tiny_scorer.score_text("the sea", "a dog ran .")
        assert out.skipped == []

    def test_source_fields_preserved(self, tiny_scorer):
        obj = record("r0", "p", "a cat .")
        obj["annos"] = [{"t": t, "lemma": t, "pos": "NOUN", "ent": "O"} for t in obj["tokens"]]
        out = run_scoring(tiny_scorer, iter([obj]), traces=True)
        traced = out.traced[0]
        assert traced["annos"] == obj["annos"]
        assert traced["tokens"] == obj["tokens"]

    def test_sidecars_pass_through_untouched(self, tiny_scorer):
        sidecar = record("r0#prompt", "", "the prompt text")
        out = run_scoring(tiny_scorer, iter([sidecar]), traces=True, orig_scores=True)
        assert out.traced == [sidecar]
        assert "trace" not in out.traced[0]
        assert out.scores == {}

    def test_overflowing_record_flagged_and_skipped(self, tiny_model_dir):
        from storyeval_bridge.score import load_model

        tokenizer, model = load_model(str(tiny_model_dir))
        tight = Scorer(tokenizer, model, max_context=24)
        objs = [
            record("fits", "", "the cat sat ."),
            record("overflows", "", " ".join(["word"] * 50)),
            record("fits2", "", "a dog ran ."),
        ]
        out = run_scoring(tight, iter(objs), traces=True)
        assert [o["id"] for o in out.traced] == ["fits", "fits2"]
        assert out.skipped == ["overflows"]

    def test_tokens_fall_back_to_story_split(self, tiny_scorer):
        obj = {"id": "r", "model": "m", "prompt": "p", "story": "no token field here"}
        out = run_scoring(tiny_scorer, iter([obj]), traces=True)
        assert sorted(set(out.traced[0]["trace"]["word_ix"])) == list(range(4))


class TestSwapScoring:
    def fifteen_sentence_record(self):
        sentences = [f"s{i} w{i} ." for i in range(15)]
        story = " ".join(sentences)
        bounds = [[3 * i, 3 * i + 3] for i in range(15)]
        return record("swap-me", "the prompt", story, sent_bounds=bounds)

    def test_keys_cover_all_fourteen_swaps(self, tiny_scorer):
        out = run_scoring(
            tiny_scorer, iter([self.fifteen_sentence_record()]),
            traces=False, orig_scores=True, swaps=True,
        )
        expected = {"swap-me#orig"} | {f"swap-me#swap{i}" for i in range(1, 15)}
        assert set(out.scores) == expected

    def test_swap_i_exchanges_sentences_i_minus_one_and_i(self, tiny_scorer):
        obj = self.fifteen_sentence_record()
        out = run_scoring(tiny_scorer, iter([obj]), traces=False, orig_scores=True, swaps=True)
        sentences = [obj["tokens"][a:b] for a, b in obj["sent_bounds"]]
        swapped = list(sentences)
        swapped[2], swapped[3] = swapped[3], swapped[2]
        flat = " ".join(t for s in swapped for t in s)
        direct = tiny_scorer.score_text("the prompt", flat)
        assert out.scores["swap-me#swap3"] == direct

    def test_orig_scores_first_fifteen_sentences_only(self, tiny_scorer):
        obj = self.fifteen_sentence_record()
        extra = obj["story"] + " and an extra sixteenth sentence ."
        obj16 = record("swap-me", "the prompt", extra,
                       sent_bounds=obj["sent_bounds"] + [[45, 51]])
        out = run_scoring(tiny_scorer, iter([obj16]), traces=False, orig_scores=True, swaps=True)
        first15 = " ".join(obj16["tokens"][:45])
        assert out.scores["swap-me#orig"] == tiny_scorer.score_text("the prompt", first15)

    def test_short_records_get_no_swap_keys(self, tiny_scorer):
        short = record("short", "p", "one . two .", sent_bounds=[[0, 2], [2, 4]])
        out = run_scoring(tiny_scorer, iter([short]), traces=False, orig_scores=True, swaps=True)
        assert out.scores == {}


class TestCandidates:
    def test_triples_scored_under_their_own_prompts(self, tiny_scorer):
        cands = [
            {"key": "r0#prompt1", "prompt": "wrong prompt", "story": "a cat sat ."},
            {"key": "r0#prompt2", "prompt": "other prompt", "story": "a cat sat ."},
        ]
        out = score_candidates(tiny_scorer, iter(cands))
        assert set(out.scores) == {"r0#prompt1", "r0#prompt2"}
        assert out.scores["r0#prompt1"] == tiny_scorer.score_text("wrong prompt", "a cat sat .")
        assert out.scores["r0#prompt1"] != out.scores["r0#prompt2"]

    def test_missing_fields_rejected(self, tiny_scorer):
        with pytest.raises(BridgeError, match="lacks key/story"):
            score_candidates(tiny_scorer, iter([{"prompt": "p"}]))


class TestModelLoading:
    def test_bad_path_raises_bridge_error(self):
        from storyeval_bridge.score import load_model

        with pytest.raises(BridgeError, match="could not load model"):
            load_model("/nonexistent/checkpoint/path")
