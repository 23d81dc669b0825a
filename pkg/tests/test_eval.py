import numpy as np
import pytest

from rolecast.corpus import FrameAnnotation, FrameElementAnn, Sentence, Span
from rolecast.embed import build_deterministic_store
from rolecast.evaluation import (
    BaselineParams,
    EvalError,
    baseline_direct,
    binary_metrics,
    notr_report,
    src_metrics,
)
from rolecast.instances import collect_pairs
from rolecast.trainer import BatchSource
from rolecast.transfer import TargetResult


class TestBinaryMetrics:
    def test_all_correct(self):
        report = binary_metrics([0, 1, 1, 0], [0, 1, 1, 0])
        assert report["accuracy"] == 100.0
        for cls in (0, 1):
            c = report[f"class_{cls}"]
            assert c["precision"] == c["recall"] == c["f1"] == 100.0

    def test_hand_computed_confusion(self):
        # positive class: TP=2, FP=1, FN=1, TN=6
        preds = [1, 1, 1, 0] + [0] * 6
        gold = [1, 1, 0, 1] + [0] * 6
        report = binary_metrics(preds, gold)
        pos = report["class_1"]
        assert pos["precision"] == pytest.approx(66.6667, abs=1e-3)
        assert pos["recall"] == pytest.approx(66.6667, abs=1e-3)
        assert report["accuracy"] == pytest.approx(80.0)
        neg = report["class_0"]
        assert neg["precision"] == pytest.approx(6 / 7 * 100, abs=1e-9)
        assert neg["recall"] == pytest.approx(6 / 7 * 100, abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(EvalError, match="empty"):
            binary_metrics([], [])

    def test_length_mismatch(self):
        with pytest.raises(EvalError):
            binary_metrics([0], [0, 1])


class TestSrcMetrics:
    def test_identical_sequences(self):
        m = src_metrics(["A", "B", "A"], ["A", "B", "A"])
        for key in ("accuracy", "precision", "recall", "f1"):
            assert m[key] == pytest.approx(100.0)

    def test_weighted_precision_hand_oracle(self):
        # supports {A: 3, B: 1}; per-class precision {A: 100, B: 0}
        gold = ["A", "A", "A", "B"]
        predicted = ["A", "A", "A", "C"]
        m = src_metrics(predicted, gold)
        assert m["precision"] == pytest.approx(75.0)
        assert m["accuracy"] == pytest.approx(75.0)
        assert m["recall"] == pytest.approx(m["accuracy"])  # micro == weighted recall

    def test_none_counts_as_error(self):
        m = src_metrics(["A", None], ["A", "B"])
        assert m["accuracy"] == pytest.approx(50.0)
        assert m["n_unclassifiable"] == 1

    def test_order_insensitive(self):
        a = src_metrics(["A", "B", "C"], ["A", "B", "B"])
        b = src_metrics(["B", "C", "A"], ["B", "B", "A"])
        assert a["accuracy"] == b["accuracy"] and a["f1"] == b["f1"]

    def test_empty_rejected(self):
        with pytest.raises(EvalError):
            src_metrics([], [])


def _result(frame, gold, predicted, n=0):
    return TargetResult(
        doc_id="d", sentence_id=f"s{n}", frame=frame, element_start=0, element_end=1,
        gold_role=gold, predicted_role=predicted, unclassifiable=predicted is None,
    )


def _dev_sentence(frame, roles):
    text = "x " + " ".join("y" * 3 for _ in roles)
    elements = []
    pos = 2
    for r in roles:
        elements.append(FrameElementAnn(role_name=r, span=Span(pos, pos + 3, "yyy")))
        pos += 4
    return Sentence(
        sentence_id=f"dev_{frame}", doc_id="devdoc", text=text,
        annotations=(
            FrameAnnotation(frame_name=frame, lexical_unit="x.v",
                            trigger=Span(0, 1, "x"), elements=tuple(elements)),
        ),
    )


class TestNotrReport:
    def test_full_coverage_empty_subgroups(self):
        results = [_result("F1", "A", "A"), _result("F2", "B", "B")]
        dev = [_dev_sentence("F1", ["A"]), _dev_sentence("F2", ["B"])]
        report = notr_report(results, dev)
        assert report["unseen_frame"]["n"] == 0
        assert report["unseen_frame"]["accuracy"] is None
        assert report["unseen_role"]["n"] == 0

    def test_planted_unseen_frame(self):
        results = [
            _result("F1", "A", "A", 0),
            _result("F1", "A", "A", 1),
            _result("F9", "Z", "Q", 2),  # frame absent from dev, misclassified
            _result("F9", "Z", "Z", 3),
        ]
        dev = [_dev_sentence("F1", ["A"])]
        report = notr_report(results, dev)
        assert report["overall"]["accuracy"] == pytest.approx(75.0)
        assert report["unseen_frame"]["n"] == 2
        assert report["unseen_frame"]["accuracy"] == pytest.approx(50.0)
        assert report["unseen_frame"]["delta_vs_overall"] == pytest.approx(-25.0)

    def test_unseen_role_with_seen_frame(self):
        results = [
            _result("F1", "A", "A", 0),
            _result("F1", "B", "A", 1),  # role B never in dev
        ]
        dev = [_dev_sentence("F1", ["A"])]
        report = notr_report(results, dev)
        assert report["unseen_frame"]["n"] == 0
        assert report["unseen_role"]["n"] == 1
        assert report["unseen_role"]["accuracy"] == pytest.approx(0.0)


def _one_hot_corpus(n_docs=6, per_doc=10):
    """Element surface text equals the role name: one embedding per role."""
    frames = {"Fa": ["r1", "r2", "r3"], "Fb": ["r4", "r5", "r6"]}
    sentences = []
    idx = 0
    for d in range(n_docs):
        for i in range(per_doc):
            frame = list(frames)[idx % 2]
            roles = frames[frame]
            r1, r2 = roles[idx % 3], roles[(idx + 1) % 3]
            tokens = [r1, "verb", r2]
            text = " ".join(tokens)
            offs = []
            pos = 0
            for t in tokens:
                offs.append((pos, pos + len(t)))
                pos += len(t) + 1
            sentences.append(
                Sentence(
                    sentence_id=f"s{idx}", doc_id=f"doc{d}", text=text,
                    annotations=(
                        FrameAnnotation(
                            frame_name=frame, lexical_unit="verb.v",
                            trigger=Span(offs[1][0], offs[1][1], "verb"),
                            elements=(
                                FrameElementAnn(role_name=r1,
                                                span=Span(offs[0][0], offs[0][1], r1)),
                                FrameElementAnn(role_name=r2,
                                                span=Span(offs[2][0], offs[2][1], r2)),
                            ),
                        ),
                    ),
                )
            )
            idx += 1
    return sentences


class TestBaselineDirect:
    def test_one_hot_features_near_perfect(self):
        corpus = _one_hot_corpus()
        train = [s for s in corpus if s.doc_id not in ("doc4", "doc5")]
        test = [s for s in corpus if s.doc_id in ("doc4", "doc5")]
        store = build_deterministic_store([corpus], dim=32, seed=0)
        train_table, test_table = collect_pairs(train), collect_pairs(test)
        result = baseline_direct(
            train_table.pairs, test_table.pairs,
            BatchSource(store, train_table), BatchSource(store, test_table),
            features="element",
            params=BaselineParams(epochs=100, seed=0),
        )
        assert result["accuracy"] >= 95.0

    def test_predicate_element_features(self, synthetic_splits, synthetic_store):
        train_table = collect_pairs(synthetic_splits["train"])
        test_table = collect_pairs(synthetic_splits["test"])
        result = baseline_direct(
            train_table.pairs, test_table.pairs,
            BatchSource(synthetic_store, train_table),
            BatchSource(synthetic_store, test_table),
            features="predicate_element",
        )
        assert result["n_classes"] == 20
        assert 0.0 <= result["accuracy"] <= 100.0

    def test_empty_train_rejected(self, synthetic_splits, synthetic_store):
        table = collect_pairs(synthetic_splits["test"])
        source = BatchSource(synthetic_store, table)
        with pytest.raises(EvalError, match="empty"):
            baseline_direct([], table.pairs, source, source)
