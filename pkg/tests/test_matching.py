"""Catalog building, descriptions, cosine similarity, and top-k queues."""

from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from buglift.gateway import EmbeddingVector, LlmGateway
from buglift.matching import (
    ApiRecord,
    EmbeddingDb,
    MatchingError,
    SimilarApiQueue,
    build_catalog,
    cosine_similarity,
    describe_api,
    load_catalog,
    save_catalog,
    similar_queue,
)
from tests.conftest import ScriptedChatProvider


class StubCatalogHarness:
    """Catalog payloads for a stub library: 12 callables across 3 modules."""

    def __init__(self) -> None:
        self.payloads = [
            {
                "qualified_name": f"stublib.{module}.{name}",
                "module_path": f"stublib.{module}",
                "params": [{"name": "x", "kind": "positional_or_keyword", "has_default": False}],
                "doc_text": doc,
            }
            for module, names in (
                ("core", ["alpha", "beta", "gamma", "delta"]),
                ("ops", ["fold", "unfold", "scan", "merge"]),
                ("util", ["pack", "unpack", "probe", "clone"]),
            )
            for name, doc in ((n, f"Does {n}.") for n in names)
        ]
        # One callable without documentation is allowed.
        self.payloads[3]["doc_text"] = ""

    def catalog(self, library_ref: str) -> list[dict]:
        return [dict(p) for p in self.payloads]


def vec(*values: float) -> EmbeddingVector:
    return EmbeddingVector.of(values, "test-model")


class TestBuildCatalog:
    def test_stub_library_yields_12_records(self):
        records = build_catalog(StubCatalogHarness(), "stublib")
        assert len(records) == 12

    def test_empty_doc_text_allowed(self):
        records = build_catalog(StubCatalogHarness(), "stublib")
        assert any(r.doc_text == "" for r in records)

    def test_rescan_identical(self):
        harness = StubCatalogHarness()
        assert build_catalog(harness, "stublib") == build_catalog(harness, "stublib")

    def test_duplicates_collapsed(self):
        harness = StubCatalogHarness()
        harness.payloads.append(dict(harness.payloads[0]))
        assert len(build_catalog(harness, "stublib")) == 12

    def test_catalog_round_trip(self, tmp_path):
        records = build_catalog(StubCatalogHarness(), "stublib")
        path = save_catalog(records, tmp_path / "catalog.jsonl")
        assert load_catalog(path) == records


class TestDescribeApi:
    RECORD = ApiRecord(
        qualified_name="stublib.ops.fold",
        module_path="stublib.ops",
        signature_params=(("x", "positional_or_keyword", False),),
        doc_text="Folds a sequence of numbers into an accumulated value.",
    )

    def test_cassette_backed_description_is_fixed(self):
        gateway = LlmGateway(
            chat_provider=ScriptedChatProvider(
                lambda m, p: "Accepts a numeric sequence; reduces it by iterated accumulation."
            )
        )
        first = describe_api(self.RECORD, gateway, mode="record")
        replayed = describe_api(self.RECORD, LlmGateway(cassette=gateway.cassette), mode="replay")
        assert replayed == first

    def test_description_mentions_inputs_and_operation(self):
        gateway = LlmGateway(
            chat_provider=ScriptedChatProvider(
                lambda m, p: "Accepts a numeric sequence; reduces it by iterated accumulation."
            )
        )
        description = describe_api(self.RECORD, gateway, mode="record")
        assert "sequence" in description.description_text
        assert "accumulation" in description.description_text

    def test_empty_output_exhausts_asks(self):
        gateway = LlmGateway(chat_provider=ScriptedChatProvider(lambda m, p: "   "))
        with pytest.raises(MatchingError, match="empty description"):
            describe_api(self.RECORD, gateway, mode="record")


class TestCosine:
    def test_identity(self):
        assert cosine_similarity(vec(1, 0, 0), vec(1, 0, 0)) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity(vec(1, 0), vec(0, 1)) == 0.0

    def test_matches_direct_formula(self):
        import random

        rng = random.Random(7)
        for _ in range(50):
            u = vec(*(rng.uniform(-1, 1) for _ in range(8)))
            v = vec(*(rng.uniform(-1, 1) for _ in range(8)))
            dot = sum(a * b for a, b in zip(u.values, v.values))
            norm_u = math.sqrt(sum(a * a for a in u.values))
            norm_v = math.sqrt(sum(b * b for b in v.values))
            assert cosine_similarity(u, v) == pytest.approx(
                dot / (norm_u * norm_v), abs=1e-12
            )

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="zero vector"):
            cosine_similarity(vec(0, 0), vec(1, 0))

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            cosine_similarity(vec(1, 0), vec(1, 0, 0))

    @given(
        st.lists(
            st.floats(min_value=-1e3, max_value=1e3).filter(lambda v: abs(v) > 1e-6),
            min_size=2,
            max_size=16,
        ),
        st.floats(min_value=1e-3, max_value=1e3),
    )
    def test_symmetry_and_scale_invariance(self, values, alpha):
        u = vec(*values)
        v = vec(*(x + 1.0 for x in values))
        assert cosine_similarity(u, v) == cosine_similarity(v, u)
        scaled = vec(*(alpha * x for x in values))
        assert cosine_similarity(scaled, v) == pytest.approx(
            cosine_similarity(u, v), abs=1e-9
        )


class TestSimilarQueue:
    def make_db(self) -> EmbeddingDb:
        db = EmbeddingDb()
        db.add("lib.a1", vec(1.0, 0.0))
        db.add("lib.a2", vec(1.0, 1.0))
        db.add("lib.a3", vec(0.0, 1.0))
        db.add("lib.a4", vec(-1.0, 1.0))
        db.add("lib.a5", vec(-1.0, 0.0))
        return db

    def test_exact_anchor_ranks_first(self):
        queue = similar_queue(vec(1.0, 0.0), self.make_db(), k=5)
        assert queue.entries[0] == ("lib.a1", 1.0)

    def test_k_larger_than_catalog(self):
        queue = similar_queue(vec(1.0, 0.0), self.make_db(), k=50)
        assert len(queue.entries) == 5

    def test_hand_computed_ordering(self):
        # Independent brute-force oracle: pure-python cosines, same tie-break.
        db = self.make_db()
        anchor = vec(1.0, 0.0)

        def brute_cos(v: EmbeddingVector) -> float:
            dot = sum(a * b for a, b in zip(anchor.values, v.values))
            nv = math.sqrt(sum(b * b for b in v.values))
            return dot / nv

        expected = sorted(
            ((name, brute_cos(db.get(name))) for name in db.names()),
            key=lambda item: (-item[1], item[0]),
        )
        queue = similar_queue(anchor, db, k=5)
        assert queue.names() == [name for name, _ in expected]
        for (got_name, got_score), (want_name, want_score) in zip(queue.entries, expected):
            assert got_score == pytest.approx(want_score, abs=1e-12)

    def test_ties_break_lexicographically(self):
        db = EmbeddingDb()
        db.add("lib.zeta", vec(1.0, 0.0))
        db.add("lib.alpha", vec(2.0, 0.0))  # same direction, same cosine
        queue = similar_queue(vec(1.0, 0.0), db, k=2)
        assert queue.names() == ["lib.alpha", "lib.zeta"]

    def test_empty_db_rejected(self):
        with pytest.raises(MatchingError, match="empty"):
            similar_queue(vec(1.0, 0.0), EmbeddingDb(), k=3)

    @given(
        st.lists(
            st.lists(
                st.floats(min_value=-1.0, max_value=1.0),
                min_size=3,
                max_size=3,
            ).filter(lambda v: any(abs(x) > 1e-6 for x in v)),
            min_size=1,
            max_size=12,
        )
    )
    def test_queue_scores_non_increasing_on_random_dbs(self, vectors):
        db = EmbeddingDb()
        for i, values in enumerate(vectors):
            db.add(f"lib.api_{i:02d}", vec(*values))
        queue = similar_queue(vec(0.3, -0.7, 0.2), db, k=8)
        scores = [score for _, score in queue.entries]
        assert all(a >= b for a, b in zip(scores, scores[1:]))
        assert len(queue.entries) == min(8, len(vectors))

    def test_queue_invariants(self):
        with pytest.raises(ValueError, match="non-increasing"):
            SimilarApiQueue(anchor_api="a", entries=(("x", 0.1), ("y", 0.9)), capacity=5)
        with pytest.raises(ValueError, match="capacity"):
            SimilarApiQueue(anchor_api="a", entries=(("x", 0.9), ("y", 0.1)), capacity=1)


class TestEmbeddingDb:
    def test_save_load_round_trip(self, tmp_path):
        db = EmbeddingDb()
        db.add("lib.a", vec(0.25, -0.5))
        db.add("lib.b", vec(1.0, 2.0))
        db.save(tmp_path / "embeddings.jsonl")
        loaded = EmbeddingDb.load(tmp_path / "embeddings.jsonl")
        assert loaded.names() == db.names()
        assert loaded.get("lib.a") == db.get("lib.a")

    def test_missing_name_raises(self):
        with pytest.raises(MatchingError, match="lib.nope"):
            EmbeddingDb().get("lib.nope")
