import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rolecast.corpus import (
    CorpusError,
    FrameAnnotation,
    FrameElementAnn,
    Sentence,
    SkippedRecord,
    Span,
    SplitManifest,
    corpus_stats,
    load_jsonl,
    load_split_manifest,
    parse_fulltext_doc,
    split_corpus,
    write_jsonl,
)

FULLTEXT_XML = b"""<?xml version="1.0" encoding="UTF-8"?>
<fullTextAnnotation xmlns="http://framenet.icsi.berkeley.edu">
 <header>
  <corpus name="Test"><document name="DocOne"/></corpus>
 </header>
 <sentence ID="500">
  <text>Fenn declined the offer to buy with a bemused wave of his hand.</text>
  <annotationSet ID="1" status="UNANN">
   <layer name="PENN" rank="1"><label start="0" end="3" name="NNP"/></layer>
  </annotationSet>
  <annotationSet ID="2" luName="decline.v" frameName="Respond_to_proposal" status="MANUAL">
   <layer name="Target" rank="1"><label start="5" end="12" name="Target"/></layer>
   <layer name="FE" rank="1">
    <label start="0" end="3" name="Speaker"/>
    <label start="14" end="29" name="Proposed_action"/>
    <label start="31" end="61" name="Co_timed_event"/>
    <label itype="DNI" name="Interlocutor"/>
   </layer>
   <layer name="GF" rank="1"><label start="0" end="3" name="Ext"/></layer>
  </annotationSet>
 </sentence>
</fullTextAnnotation>
"""


class TestParseFulltext:
    def test_single_annotated_sentence(self):
        sentences = parse_fulltext_doc(FULLTEXT_XML)
        assert len(sentences) == 1
        s = sentences[0]
        assert s.doc_id == "Test__DocOne"
        assert len(s.annotations) == 1
        ann = s.annotations[0]
        assert ann.frame_name == "Respond_to_proposal"
        assert ann.lexical_unit == "decline.v"
        assert ann.trigger.text == "declined"
        spanned = ann.spanned_elements()
        assert [e.role_name for e in spanned] == ["Speaker", "Proposed_action", "Co_timed_event"]
        assert spanned[0].span.text == "Fenn"
        assert spanned[1].span.text == "the offer to buy"
        ni = [e for e in ann.elements if e.null_instantiation]
        assert len(ni) == 1 and ni[0].null_instantiation == "DNI"
        assert ni[0].role_name == "Interlocutor"

    def test_span_texts_match_sentence(self):
        for s in parse_fulltext_doc(FULLTEXT_XML):
            for a in s.annotations:
                assert a.trigger.text == s.text[a.trigger.start : a.trigger.end]
                for e in a.spanned_elements():
                    assert e.span.text == s.text[e.span.start : e.span.end]

    def test_no_annotation_sets(self):
        xml = (
            b'<fullTextAnnotation xmlns="http://framenet.icsi.berkeley.edu">'
            b"<sentence ID=\"1\"><text>Nothing here.</text></sentence>"
            b"</fullTextAnnotation>"
        )
        sentences = parse_fulltext_doc(xml)
        assert len(sentences) == 1
        assert sentences[0].annotations == ()

    def test_malformed_xml_reports_byte_offset(self):
        with pytest.raises(CorpusError, match="byte offset"):
            parse_fulltext_doc(b"<fullTextAnnotation><sentence>")

    def test_bad_offsets_skip_record_and_count(self):
        bad = FULLTEXT_XML.replace(b'start="14" end="29"', b'start="140" end="290"')
        skipped: list[SkippedRecord] = []
        sentences = parse_fulltext_doc(bad, skipped=skipped)
        assert len(skipped) == 1
        assert skipped[0].sentence_id == "500"
        assert sentences[0].annotations == ()  # the record is dropped, parsing continues

    def test_discontinuous_element_merged(self):
        xml = FULLTEXT_XML.replace(
            b'<label start="31" end="61" name="Co_timed_event"/>',
            b'<label start="31" end="44" name="Co_timed_event"/>'
            b'<label start="51" end="61" name="Co_timed_event"/>',
        )
        ann = parse_fulltext_doc(xml)[0].annotations[0]
        merged = [e for e in ann.elements if e.merged]
        assert len(merged) == 1
        assert merged[0].span.start == 31 and merged[0].span.end == 62

    def test_deterministic(self):
        assert parse_fulltext_doc(FULLTEXT_XML) == parse_fulltext_doc(FULLTEXT_XML)


def _tiny_corpus():
    text = "alpha verb beta."
    return [
        Sentence(
            sentence_id="s1",
            doc_id="d1",
            text=text,
            annotations=(
                FrameAnnotation(
                    frame_name="F1",
                    lexical_unit="verb.v",
                    trigger=Span(6, 10, "verb"),
                    elements=(
                        FrameElementAnn(role_name="A", span=Span(0, 5, "alpha")),
                        FrameElementAnn(role_name="B", span=Span(11, 15, "beta")),
                        FrameElementAnn(role_name="C", null_instantiation="INI"),
                    ),
                ),
            ),
        ),
        Sentence(sentence_id="s2", doc_id="d1", text="bare sentence", annotations=()),
        Sentence(
            sentence_id="s3",
            doc_id="d2",
            text=text,
            annotations=(
                FrameAnnotation(
                    frame_name="F2",
                    lexical_unit="verb.v",
                    trigger=Span(6, 10, "verb"),
                    elements=(FrameElementAnn(role_name="X", span=Span(0, 5, "alpha")),),
                ),
                FrameAnnotation(
                    frame_name="F1",
                    lexical_unit="verb.v",
                    trigger=Span(6, 10, "verb"),
                    elements=(FrameElementAnn(role_name="A", span=Span(11, 15, "beta")),),
                ),
            ),
        ),
    ]


class TestJsonlRoundTrip:
    def test_empty(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl([], path)
        assert path.read_text() == ""
        assert load_jsonl(path) == []

    def test_three_sentences(self, tmp_path):
        corpus = _tiny_corpus()
        path = tmp_path / "c.jsonl"
        write_jsonl(corpus, path)
        assert load_jsonl(path) == corpus

    def test_annotation_order_preserved(self, tmp_path):
        corpus = _tiny_corpus()
        path = tmp_path / "c.jsonl"
        write_jsonl(corpus, path)
        loaded = load_jsonl(path)
        assert [a.frame_name for a in loaded[2].annotations] == ["F2", "F1"]

    def test_schema_violation_reports_line_and_field(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"doc_id":"d","sentence_id":"s"}\n')
        with pytest.raises(CorpusError, match="line 1.*text"):
            load_jsonl(path)

    def test_offset_violation_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        obj = {
            "doc_id": "d", "sentence_id": "s", "text": "short",
            "annotations": [{"frame": "F", "lexical_unit": "x.v",
                             "trigger": {"start": 0, "end": 99}, "elements": []}],
        }
        path.write_text(json.dumps(obj) + "\n")
        with pytest.raises(CorpusError):
            load_jsonl(path)

    def test_duplicate_sentence_id_rejected(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        line = json.dumps({"doc_id": "d", "sentence_id": "s", "text": "x",
                           "annotations": []})
        path.write_text(line + "\n" + line + "\n")
        with pytest.raises(CorpusError, match="duplicate"):
            load_jsonl(path)


@st.composite
def corpora(draw):
    words = st.sampled_from(["rook", "pawn", "castle", "queen", "board", "move"])
    sentences = []
    n = draw(st.integers(min_value=0, max_value =5))
    for i in range(n):
        tokens = draw(st.lists(words, min_size=3, max_size=6))
        text = " ".join(tokens)
        offsets = []
        pos = 0
        for tok in tokens:
            offsets.append((pos, pos + len(tok)))
            pos += len(tok) + 1
        trigger_idx = draw(st.integers(min_value=0, max_value=len(tokens) - 1))
        element_idxs = draw(
            st.lists(
                st.integers(min_value=0, max_value=len(tokens) - 1),
                max_size=3, unique=True,
            )
        )
        elements = [
            FrameElementAnn(
                role_name=f"R{j}",
                span=Span(offsets[k][0], offsets[k][1], tokens[k]),
            )
            for j, k in enumerate(element_idxs)
        ]
        if draw(st.booleans()):
            elements.append(
                FrameElementAnn(
                    role_name="NI_role",
                    null_instantiation=draw(st.sampled_from(["DNI", "INI", "CNI"])),
                )
            )
        sentences.append(
            Sentence(
                sentence_id=f"s{i}",
                doc_id=draw(st.sampled_from(["da", "db"])),
                text=text,
                annotations=(
                    FrameAnnotation(
                        frame_name=draw(st.sampled_from(["Fa", "Fb"])),
                        lexical_unit="w.v",
                        trigger=Span(offsets[trigger_idx][0], offsets[trigger_idx][1],
                                     tokens[trigger_idx]),
                        elements=tuple(elements),
                    ),
                ),
            )
        )
    return sentences


class TestRoundTripProperty:
    @settings(max_examples=50, deadline=None)
    @given(corpus=corpora())
    def test_load_write_identity(self, corpus):
        import tempfile
        from pathlib import Path

        with tempfile.TemporaryDirectory() as d:
            path = Path(d) / "c.jsonl"
            write_jsonl(corpus, path)
            assert load_jsonl(path) == corpus


class TestSplit:
    def test_partition(self):
        corpus = _tiny_corpus()
        manifest = SplitManifest(train_docs=("d1",), dev_docs=("d2",), test_docs=())
        train, dev, test = split_corpus(corpus, manifest)
        assert len(train) == 2 and len(dev) == 1 and len(test) == 0
        ids = [s.sentence_id for s in train + dev + test]
        assert sorted(ids) == sorted(s.sentence_id for s in corpus)

    def test_all_in_train(self):
        corpus = _tiny_corpus()
        manifest = SplitManifest(train_docs=("d1", "d2"), dev_docs=(), test_docs=())
        train, dev, test = split_corpus(corpus, manifest)
        assert len(train) == 3 and dev == [] and test == []

    def test_missing_doc_names_document(self):
        manifest = SplitManifest(train_docs=("d1",), dev_docs=(), test_docs=())
        with pytest.raises(CorpusError, match="d2"):
            split_corpus(_tiny_corpus(), manifest)

    def test_overlapping_manifest_rejected(self):
        with pytest.raises(CorpusError, match="overlap"):
            SplitManifest(train_docs=("d1",), dev_docs=("d1",), test_docs=())

    def test_order_preserved_within_split(self):
        corpus = _tiny_corpus()
        manifest = SplitManifest(train_docs=("d1", "d2"), dev_docs=(), test_docs=())
        train, _, _ = split_corpus(corpus, manifest)
        assert [s.sentence_id for s in train] == ["s1", "s2", "s3"]

    def test_rest_manifest(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"train": "rest", "dev": ["d2"], "test": []}))
        manifest = load_split_manifest(path, corpus_docs=["d1", "d2"])
        assert manifest.train_docs == ("d1",)
        with pytest.raises(CorpusError, match="rest"):
            load_split_manifest(path)


class TestStats:
    def test_synthetic_counts(self):
        corpus = _tiny_corpus()
        stats = corpus_stats(corpus)
        assert stats == {
            "n_sentences": 3,
            "n_sentences_annotated": 2,
            "n_distinct_frames": 2,
            "n_docs": 2,
            "n_annotations": 3,
            "n_spanned_elements": 4,
        }

    def test_empty(self):
        stats = corpus_stats([])
        assert all(v == 0 for v in stats.values())

    def test_five_frames(self, synthetic_corpus):
        assert corpus_stats(synthetic_corpus)["n_distinct_frames"] == 5
