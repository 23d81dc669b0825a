import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rolecast.embed import (
    EmbeddingStore,
    MissingKeyError,
    SpanKey,
    StoreError,
    build_deterministic_store,
    build_instance_vector,
    deterministic_embed,
    lookup,
    store_read,
    store_write,
)
from rolecast.instances import PredicateArgumentPair


def _key(n: int) -> SpanKey:
    return SpanKey("doc", "sent", n, n + 1)


class TestSpanKey:
    def test_canonical_form(self):
        assert SpanKey("d", "s", 3, 9).canonical() == "d|s|3|9"

    def test_parse_inverse(self):
        key = SpanKey("doc_01", "s0042", 10, 25)
        assert SpanKey.parse(key.canonical()) == key

    def test_pipe_rejected(self):
        with pytest.raises(StoreError):
            SpanKey("a|b", "s", 0, 1)


class TestStoreRoundTrip:
    def test_empty_store(self, tmp_path):
        store = EmbeddingStore(dim=64)
        path = tmp_path / "e.aemb"
        store_write(store, path)
        loaded = store_read(path)
        assert loaded.dim == 64 and len(loaded) == 0

    def test_two_entries_byte_identical(self, tmp_path):
        store = EmbeddingStore(dim=3)
        store.put(_key(0), np.array([1.0, 2.0, 3.0], dtype=np.float32))
        store.put(_key(5), np.array([-1.5, 0.25, 9.0], dtype=np.float32))
        p1, p2 = tmp_path / "a.aemb", tmp_path / "b.aemb"
        store_write(store, p1)
        store_write(store_read(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_vectors_survive(self, tmp_path):
        store = EmbeddingStore(dim=4)
        vec = np.array([0.1, -0.2, 0.3, 7.0], dtype=np.float32)
        store.put(_key(1), vec)
        path = tmp_path / "s.aemb"
        store_write(store, path)
        np.testing.assert_array_equal(lookup(store_read(path), _key(1)), vec)

    def test_dim_header(self, tmp_path):
        store = EmbeddingStore(dim=768)
        store.put(_key(0), np.zeros(768, dtype=np.float32))
        path = tmp_path / "s.aemb"
        store_write(store, path)
        assert store_read(path).dim == 768

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.aemb"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(StoreError, match="magic"):
            store_read(path)

    def test_truncated(self, tmp_path):
        store = EmbeddingStore(dim=8)
        store.put(_key(0), np.ones(8, dtype=np.float32))
        path = tmp_path / "s.aemb"
        store_write(store, path)
        (tmp_path / "t.aemb").write_bytes(path.read_bytes()[:-5])
        with pytest.raises(StoreError, match="truncated"):
            store_read(tmp_path / "t.aemb")


class TestDeterministicEmbed:
    def test_repeatable(self):
        a = deterministic_embed("tree", 64, 0)
        b = deterministic_embed("tree", 64, 0)
        np.testing.assert_array_equal(a, b)

    def test_distinct_texts_distinct_vectors(self):
        a = deterministic_embed("tree", 64, 0)
        b = deterministic_embed("leaf", 64, 0)
        cos = float(np.dot(a, b))
        assert cos < 1.0 - 1e-3

    def test_unit_norm(self):
        for text in ("tree", "a", "", "long string with many words"):
            vec = deterministic_embed(text, 17, 3)
            assert abs(np.linalg.norm(vec.astype(np.float64)) - 1.0) < 1e-6

    def test_seed_changes_vector(self):
        a = deterministic_embed("tree", 64, 0)
        b = deterministic_embed("tree", 64, 1)
        assert not np.array_equal(a, b)

    def test_known_value_frozen(self):
        # frozen expected prefix: guards the defined-hash construction against
        # accidental changes that would silently invalidate stored files
        vec = deterministic_embed("tree", 4, 0)
        np.testing.assert_allclose(
            vec, [0.7727155, -0.32384622, 0.5162263, -0.1776085], atol=1e-7
        )

    @settings(max_examples=50, deadline=None)
    @given(text=st.text(max_size=30), dim=st.integers(min_value=1, max_value=96),
           seed=st.integers(min_value=-(2**40), max_value=2**40))
    def test_properties_hold_everywhere(self, text, dim, seed):
        vec = deterministic_embed(text, dim, seed)
        assert vec.shape == (dim,) and vec.dtype == np.float32
        assert abs(np.linalg.norm(vec.astype(np.float64)) - 1.0) < 1e-6
        np.testing.assert_array_equal(vec, deterministic_embed(text, dim, seed))


class TestLookup:
    def test_present(self):
        store = EmbeddingStore(dim=2)
        vec = np.array([1.0, 2.0], dtype=np.float32)
        store.put(_key(0), vec)
        np.testing.assert_array_equal(lookup(store, _key(0)), vec)

    def test_absent_names_key(self):
        store = EmbeddingStore(dim=2)
        with pytest.raises(MissingKeyError, match=r"doc\|sent\|9\|10"):
            lookup(store, _key(9))

    def test_built_store_has_matching_dim(self, synthetic_splits, synthetic_store):
        s = synthetic_splits["train"][0]
        ann = s.annotations[0]
        key = SpanKey(s.doc_id, s.sentence_id, ann.trigger.start, ann.trigger.end)
        assert lookup(synthetic_store, key).shape == (synthetic_store.dim,)

    def test_returned_vector_read_only(self):
        store = EmbeddingStore(dim=2)
        store.put(_key(0), np.array([1.0, 2.0], dtype=np.float32))
        vec = lookup(store, _key(0))
        with pytest.raises(ValueError):
            vec[0] = 5.0


def _pair(pid, pred_key, elem_key):
    return PredicateArgumentPair(
        pair_id=pid, frame_name="F", predicate_key=pred_key, element_key=elem_key,
        role_name="R",
    )


class TestInstanceVector:
    def _store(self, dim=2):
        store = EmbeddingStore(dim=dim)
        for i in range(8):
            store.put(_key(i), np.full(dim, float(i), dtype=np.float32))
        return store

    def test_concatenation_order(self):
        store = self._store()
        src = _pair(0, _key(0), _key(1))
        tgt = _pair(1, _key(2), _key(3))
        vec = build_instance_vector(store, src, tgt)
        np.testing.assert_array_equal(vec, [0, 0, 1, 1, 2, 2, 3, 3])

    def test_swap_changes_vector(self):
        store = self._store()
        src = _pair(0, _key(0), _key(1))
        tgt = _pair(1, _key(2), _key(3))
        a = build_instance_vector(store, src, tgt)
        b = build_instance_vector(store, tgt, src)
        assert not np.array_equal(a, b)

    def test_width_4dim(self, synthetic_store, synthetic_splits):
        from rolecast.instances import collect_pairs

        pairs = collect_pairs(synthetic_splits["train"]).pairs
        vec = build_instance_vector(synthetic_store, pairs[0], pairs[1])
        assert vec.shape == (4 * synthetic_store.dim,)

    def test_prefix_independent_of_target(self):
        store = self._store()
        src = _pair(0, _key(0), _key(1))
        t1 = _pair(1, _key(2), _key(3))
        t2 = _pair(2, _key(4), _key(5))
        a = build_instance_vector(store, src, t1)
        b = build_instance_vector(store, src, t2)
        np.testing.assert_array_equal(a[: 2 * store.dim], b[: 2 * store.dim])

    def test_missing_key_propagates(self):
        store = self._store()
        src = _pair(0, _key(0), SpanKey("doc", "sent", 99, 100))
        tgt = _pair(1, _key(2), _key(3))
        with pytest.raises(MissingKeyError):
            build_instance_vector(store, src, tgt)


class TestBuildDeterministicStore:
    def test_covers_all_spans(self, synthetic_corpus):
        store = build_deterministic_store([synthetic_corpus], dim=16, seed=0)
        for s in synthetic_corpus:
            for a in s.annotations:
                assert SpanKey(s.doc_id, s.sentence_id, a.trigger.start, a.trigger.end) in store
                for e in a.spanned_elements():
                    assert SpanKey(s.doc_id, s.sentence_id, e.span.start, e.span.end) in store

    def test_same_text_same_vector(self, synthetic_corpus):
        # the deterministic embedder keys on surface text only
        store = build_deterministic_store([synthetic_corpus], dim=16, seed=0)
        by_text = {}
        for s in synthetic_corpus:
            for a in s.annotations:
                for e in a.spanned_elements():
                    key = SpanKey(s.doc_id, s.sentence_id, e.span.start, e.span.end)
                    vec = lookup(store, key)
                    if e.span.text in by_text:
                        np.testing.assert_array_equal(vec, by_text[e.span.text])
                    by_text[e.span.text] = vec
