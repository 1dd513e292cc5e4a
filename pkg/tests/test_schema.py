import json

import pytest

from storyeval import schema
from storyeval.schema import ValidationError

import helpers


def minimal_dict(**overrides):
    obj = {
        "id": "r1",
        "model": "human",
        "prompt": "a prompt .",
        "story": "One two three .",
        "tokens": ["One", "two", "three", "."],
        "sent_bounds": [[0, 4]],
    }
    obj.update(overrides)
    return obj


class TestValidation:
    def test_identity_case(self):
        rec = schema.record_from_dict(minimal_dict())
        assert rec.id == "r1"
        assert rec.model == "human"
        assert rec.tokens == ("One", "two", "three", ".")
        assert rec.sent_bounds == ((0, 4),)
        assert rec.k is None
        assert rec.annotations is None
        assert rec.trace is None

    def test_bounds_gap_message(self):
        obj = minimal_dict(
            tokens=["a", "b", "c", "d", "e"], sent_bounds=[[0, 2], [3, 5]]
        )
        with pytest.raises(ValidationError, match="sentence bounds do not cover tokens"):
            schema.record_from_dict(obj)

    def test_bounds_must_reach_end(self):
        obj = minimal_dict(sent_bounds=[[0, 3]])
        with pytest.raises(ValidationError, match="sentence bounds do not cover tokens"):
            schema.record_from_dict(obj)

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError, match="unknown field"):
            schema.record_from_dict(minimal_dict(extra=1))

    def test_k_must_be_positive_int(self):
        with pytest.raises(ValidationError):
            schema.record_from_dict(minimal_dict(k=0))
        with pytest.raises(ValidationError):
            schema.record_from_dict(minimal_dict(k=True))
        with pytest.raises(ValidationError):
            schema.record_from_dict(minimal_dict(k="5"))

    def test_k_within_vocab_size(self):
        trace = {"sub_logp": [-1.0], "word_ix": [0], "vocab_size": 10}
        assert schema.record_from_dict(minimal_dict(k=10, trace=trace)).k == 10
        with pytest.raises(ValidationError, match="vocab_size"):
            schema.record_from_dict(minimal_dict(k=11, trace=trace))

    def test_annos_length_mismatch(self):
        annos = [{"t": "One", "lemma": "one", "pos": "NUM"}]
        with pytest.raises(ValidationError, match="length"):
            schema.record_from_dict(minimal_dict(annos=annos))

    def test_bad_pos_tag(self):
        annos = [{"t": t, "lemma": t.lower(), "pos": "NOUNS"} for t in ["One", "two", "three", "."]]
        with pytest.raises(ValidationError, match="UPOS"):
            schema.record_from_dict(minimal_dict(annos=annos))

    def test_bad_ent_label(self):
        annos = [
            {"t": t, "lemma": t.lower(), "pos": "NOUN", "ent": "X-LOC"}
            for t in ["One", "two", "three", "."]
        ]
        with pytest.raises(ValidationError, match="entity"):
            schema.record_from_dict(minimal_dict(annos=annos))

    def test_ent_defaults_to_outside(self):
        annos = [{"t": t, "lemma": t.lower(), "pos": "NOUN"} for t in ["One", "two", "three", "."]]
        rec = schema.record_from_dict(minimal_dict(annos=annos))
        assert all(a.ent == "O" for a in rec.annotations)

    def test_trace_positive_logp_rejected(self):
        trace = {"sub_logp": [0.5], "word_ix": [0], "vocab_size": 10}
        with pytest.raises(ValidationError, match="<= 0"):
            schema.record_from_dict(minimal_dict(trace=trace))

    def test_trace_word_ix_must_be_nondecreasing(self):
        trace = {"sub_logp": [-1.0, -1.0], "word_ix": [1, 0], "vocab_size": 10}
        with pytest.raises(ValidationError, match="nondecreasing"):
            schema.record_from_dict(minimal_dict(trace=trace))

    def test_trace_word_ix_in_range(self):
        trace = {"sub_logp": [-1.0], "word_ix": [4], "vocab_size": 10}
        with pytest.raises(ValidationError, match="outside"):
            schema.record_from_dict(minimal_dict(trace=trace))

    def test_tokens_fallback(self):
        obj = minimal_dict()
        del obj["tokens"], obj["sent_bounds"]
        rec = schema.record_from_dict(obj)
        assert rec.tokens == ("One", "two", "three", ".")
        assert rec.sent_bounds == ((0, 4),)


class TestIO:
    def test_error_carries_line_number(self, tmp_path):
        path = tmp_path / "r.jsonl"
        good = json.dumps(minimal_dict())
        bad = json.dumps(minimal_dict(sent_bounds=[[0, 2]]))
        path.write_text(good + "\n" + bad + "\n")
        with pytest.raises(ValidationError, match="line 2"):
            list(schema.load_records(path))

    def test_skip_invalid_counts(self, tmp_path):
        path = tmp_path / "r.jsonl"
        lines = [json.dumps(minimal_dict()), "{broken", json.dumps(minimal_dict(id="r2"))]
        path.write_text("\n".join(lines) + "\n")
        counts = {}
        records = list(schema.load_records(path, skip_invalid=True, counts=counts))
        assert [r.id for r in records] == ["r1", "r2"]
        assert counts == {"loaded": 2, "skipped_invalid": 1}

    def test_thousand_record_round_trip(self, tmp_path):
        # fixture built by an independent serializer: hand-assembled dicts
        path = tmp_path / "big.jsonl"
        with open(path, "w") as fh:
            for i in range(1000):
                rec = helpers.make_record(i)
                obj = {
                    "id": rec.id, "model": rec.model, "k": rec.k,
                    "prompt": rec.prompt_text, "story": rec.story_text,
                    "tokens": list(rec.tokens),
                    "sent_bounds": [list(b) for b in rec.sent_bounds],
                    "annos": [
                        {"t": a.surface, "lemma": a.lemma, "pos": a.pos, "ent": a.ent}
                        for a in rec.annotations
                    ],
                    "trace": {
                        "sub_logp": list(rec.trace.sub_logp),
                        "word_ix": list(rec.trace.word_ix),
                        "vocab_size": rec.trace.vocab_size,
                    },
                }
                fh.write(json.dumps(obj) + "\n")
        loaded = list(schema.load_records(path))
        assert len(loaded) == 1000
        assert loaded[3] == helpers.make_record(3)
        assert [r.id for r in loaded] == [f"rec-{i}" for i in range(1000)]

    def test_dump_omits_absent_fields(self):
        rec = helpers.make_record(1, with_annos=False, with_trace=False, k=None)
        obj = schema.record_to_dict(rec)
        assert "annos" not in obj
        assert "trace" not in obj
        assert "k" not in obj

    def test_write_then_load_identity(self, tmp_path):
        records = [helpers.make_record(i) for i in range(20)]
        path = tmp_path / "out.jsonl"
        assert schema.write_records(path, records) == 20
        assert list(schema.load_records(path)) == records


class TestSidecars:
    def test_sidecar_detection(self):
        rec = helpers.make_record(2)
        side = schema.EvalRecord(
            id=rec.id + "#prompt", model=rec.model, prompt_text="", story_text=rec.prompt_text,
            tokens=rec.tokens, sent_bounds=rec.sent_bounds,
        )
        assert side.is_prompt_sidecar()
        assert side.base_id() == rec.id
        assert not rec.is_prompt_sidecar()
        assert rec.base_id() == rec.id


class TestHumanBaseline:
    def build(self, n_sentences, model="human", seed=0):
        return helpers.make_record(seed, n_sentences=n_sentences, model=model, k=None)

    def test_truncates_to_exact_length(self):
        long = self.build(40)
        assert len(long.tokens) > 150
        counts = {}
        out = list(schema.build_human_baseline([long], counts=counts))
        assert len(out) == 1
        kept = out[0]
        assert len(kept.tokens) == 150
        assert kept.tokens == long.tokens[:150]
        assert kept.story_text == " ".join(long.tokens[:150])
        assert counts == {"kept": 1}

    def test_partial_final_sentence_keeps_truncated_range(self):
        long = self.build(40)
        kept = next(iter(schema.build_human_baseline([long])))
        assert kept.sent_bounds[-1][1] == 150
        starts = [s for s, _ in kept.sent_bounds]
        assert starts[0] == 0
        for (_, e), (s, _) in zip(kept.sent_bounds, kept.sent_bounds[1:]):
            assert e == s

    def test_annotations_and_trace_cut_consistently(self):
        long = self.build(40)
        kept = next(iter(schema.build_human_baseline([long])))
        assert len(kept.annotations) == 150
        assert all(w < 150 for w in kept.trace.word_ix)
        expected_subwords = sum(1 for w in long.trace.word_ix if w < 150)
        assert len(kept.trace.sub_logp) == expected_subwords

    def test_short_and_nonhuman_dropped_with_counts(self):
        counts = {}
        records = [self.build(3), self.build(40), self.build(40, model="fusion")]
        out = list(schema.build_human_baseline(records, counts=counts))
        assert len(out) == 1
        assert counts == {"dropped_short": 1, "kept": 1, "dropped_nonhuman": 1}

    def test_truncated_record_revalidates(self):
        kept = next(iter(schema.build_human_baseline([self.build(40)])))
        obj = schema.record_to_dict(kept)
        assert schema.record_from_dict(obj) == kept
