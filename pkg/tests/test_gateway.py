"""Gateway behavior: record/replay identity, pricing, ledger exactness."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from buglift import templates
from buglift.gateway import (
    BudgetExceededError,
    Cassette,
    CassetteEntry,
    CassetteFormatError,
    CassetteMissError,
    CostLedger,
    GatewaySettings,
    LlmGateway,
    LlmRequest,
    ModelPrice,
    ProviderError,
    call_cost,
    cassette_key,
    load_cassette,
)
from tests.conftest import BasisEmbeddingProvider, ScriptedChatProvider


def make_request(prompt: str = "describe torch.add", template_id: str = "api_analysis"):
    return LlmRequest(
        template_id=template_id,
        rendered_prompt=prompt,
        model_id="gpt-4o-mini",
        temperature=0.0,
        max_tokens=256,
    )


class TestRequestValidation:
    def test_empty_prompt_rejected(self):
        with pytest.raises(ValueError):
            make_request(prompt="")

    def test_unknown_template_rejected(self):
        with pytest.raises(ValueError):
            make_request(template_id="no_such_slot")

    def test_temperature_range(self):
        with pytest.raises(ValueError):
            LlmRequest("api_analysis", "p", "m", temperature=2.5)


class TestPricing:
    def test_linear_pricing_formula(self):
        # 1000 in + 500 out at 1.0 / 4.0 per million tokens.
        price = ModelPrice.per_mtok("1.0", "4.0")
        assert call_cost(1000, 500, price) == Fraction(3, 1000)
        assert float(call_cost(1000, 500, price)) == 0.003

    def test_zero_tokens_cost_zero(self):
        assert call_cost(0, 0, ModelPrice.per_mtok("1.0", "4.0")) == 0

    def test_negative_tokens_rejected(self):
        with pytest.raises(ValueError):
            call_cost(-1, 0, ModelPrice.per_mtok("1.0", "4.0"))


class TestLedger:
    def test_four_component_totals(self):
        # One entry per pipeline component; grand total must be exact.
        ledger = CostLedger()
        ledger.add("pattern_extraction", "o3-mini", "42.16")
        ledger.add("api_matching", "gpt-4o-mini", "0.32")
        ledger.add("fuzzing", "gpt-4o-mini", "27.60")
        ledger.add("validation", "gpt-4.1-mini", "18.99")
        assert ledger.grand_total() == Fraction("89.07")
        totals = ledger.component_totals()
        assert totals["pattern_extraction"] == Fraction("42.16")
        assert sum(totals.values(), Fraction(0)) == ledger.grand_total()

    @given(
        st.lists(
            st.tuples(
                st.sampled_from(["a", "b", "c"]),
                st.integers(min_value=0, max_value=10**6),
                st.integers(min_value=0, max_value=10**6),
            ),
            max_size=40,
        )
    )
    def test_grand_total_is_exact_sum(self, rows):
        price = ModelPrice.per_mtok("0.15", "0.60")
        ledger = CostLedger()
        expected = Fraction(0)
        for component, pt, ct in rows:
            cost = call_cost(pt, ct, price)
            ledger.add(component, "m", cost, pt, ct)
            expected += cost
        assert ledger.grand_total() == expected
        assert sum(ledger.component_totals().values(), Fraction(0)) == expected


class TestCassette:
    def test_empty_file_empty_map(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert len(load_cassette(path)) == 0

    def test_two_entries(self, tmp_path):
        cassette = Cassette(path=tmp_path / "c.jsonl")
        cassette.put("k1", CassetteEntry("m", "hello", 3, 1))
        cassette.put("k2", CassetteEntry("m", "world", 4, 2))
        assert len(load_cassette(cassette.path)) == 2

    def test_record_then_load_round_trip(self, tmp_path):
        cassette = Cassette(path=tmp_path / "c.jsonl")
        entries = {
            cassette_key("api_analysis", f"prompt {i}", epoch): CassetteEntry(
                "m", f"text {i}/{epoch}", i, epoch
            )
            for i in range(3)
            for epoch in range(2)
        }
        for key, entry in entries.items():
            cassette.put(key, entry)
        loaded = load_cassette(cassette.path)
        assert loaded.items() == entries

    def test_duplicate_key_rejected(self, tmp_path):
        line = (
            '{"key": "k", "model_id": "m", "text": "t",'
            ' "prompt_tokens": 1, "completion_tokens": 1}'
        )
        path = tmp_path / "dup.jsonl"
        path.write_text(line + "\n" + line + "\n")
        with pytest.raises(CassetteFormatError, match="duplicate key"):
            load_cassette(path)

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("not json\n")
        with pytest.raises(CassetteFormatError, match="invalid JSON"):
            load_cassette(path)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "field.jsonl"
        path.write_text('{"key": "k", "model_id": "m", "text": "t"}\n')
        with pytest.raises(CassetteFormatError, match="missing fields"):
            load_cassette(path)


class TestCompleteModes:
    def test_record_then_replay_identity(self, echo_gateway):
        request = make_request()
        recorded = echo_gateway.complete(request, mode="record")
        replayed = echo_gateway.complete(request, mode="replay")
        assert replayed.text == recorded.text
        assert replayed.prompt_tokens == recorded.prompt_tokens
        assert replayed.completion_tokens == recorded.completion_tokens

    def test_replay_is_referentially_transparent(self, echo_gateway):
        request = make_request()
        echo_gateway.complete(request, mode="record")
        first = echo_gateway.complete(request, mode="replay")
        second = echo_gateway.complete(request, mode="replay")
        assert first.text == second.text

    def test_replay_miss_raises(self, echo_gateway):
        with pytest.raises(CassetteMissError):
            echo_gateway.complete(make_request(), mode="replay")

    def test_epoch_distinguishes_recordings(self):
        # Repeated validation prompts keep distinct answers per epoch.
        answers = iter(["first answer", "second answer"])
        gateway = LlmGateway(
            chat_provider=ScriptedChatProvider(lambda m, p: next(answers)),
        )
        request = make_request("same prompt", template_id="same_bug_pattern")
        gateway.complete(request, mode="record", epoch=0)
        gateway.complete(request, mode="record", epoch=1)
        assert gateway.complete(request, mode="replay", epoch=0).text == "first answer"
        assert gateway.complete(request, mode="replay", epoch=1).text == "second answer"

    def test_each_call_appends_ledger_entry(self, echo_gateway):
        request = make_request()
        echo_gateway.complete(request, mode="record")
        echo_gateway.complete(request, mode="replay")
        assert len(echo_gateway.ledger.entries) == 2
        assert all(
            entry.component == templates.API_MATCHING
            for entry in echo_gateway.ledger.entries
        )

    def test_budget_exceeded_halts(self):
        gateway = LlmGateway(
            settings=GatewaySettings(budget_units=Fraction(0)),
            chat_provider=ScriptedChatProvider(lambda m, p: "x"),
        )
        with pytest.raises(BudgetExceededError):
            gateway.complete(make_request(), mode="live")

    def test_retry_then_success(self):
        attempts = {"n": 0}

        class FlakyProvider:
            def complete(self, model_id, prompt, temperature, max_tokens):
                attempts["n"] += 1
                if attempts["n"] < 3:
                    raise ProviderError("transient")
                return "made it", 2, 2

        gateway = LlmGateway(
            settings=GatewaySettings(retry_attempts=3, retry_base_seconds=0.0),
            chat_provider=FlakyProvider(),
        )
        assert gateway.complete(make_request(), mode="live").text == "made it"
        assert attempts["n"] == 3

    def test_retries_exhausted(self):
        class DownProvider:
            def complete(self, model_id, prompt, temperature, max_tokens):
                raise ProviderError("down")

        gateway = LlmGateway(
            settings=GatewaySettings(retry_attempts=2, retry_base_seconds=0.0),
            chat_provider=DownProvider(),
        )
        with pytest.raises(ProviderError, match="after 2 attempts"):
            gateway.complete(make_request(), mode="live")


class TestConcurrency:
    def test_parallel_record_calls_are_safe(self):
        from concurrent.futures import ThreadPoolExecutor

        gateway = LlmGateway(
            settings=GatewaySettings(max_in_flight=4),
            chat_provider=ScriptedChatProvider(lambda m, p: f"echo:{p}"),
        )

        def one(i: int):
            request = make_request(prompt=f"prompt {i}")
            return gateway.complete(request, mode="record")

        with ThreadPoolExecutor(max_workers=8) as pool:
            responses = list(pool.map(one, range(100)))
        assert len(responses) == 100
        assert len(gateway.ledger.entries) == 100
        assert len(gateway.cassette) == 100
        # Ledger total is the exact sum regardless of interleaving.
        assert gateway.ledger.grand_total() == sum(
            (e.cost for e in gateway.ledger.entries), Fraction(0)
        )

    def test_missing_api_key_is_provider_error(self, monkeypatch):
        from buglift.gateway import OpenAiCompatProvider

        monkeypatch.delenv("NO_SUCH_KEY_VAR", raising=False)
        provider = OpenAiCompatProvider("https://example.invalid", "NO_SUCH_KEY_VAR")
        with pytest.raises(ProviderError, match="NO_SUCH_KEY_VAR"):
            provider.complete("m", "p", 0.0, 10)


class TestEmbed:
    def test_batch_arity_and_dims(self, echo_gateway):
        vectors = echo_gateway.embed(["alpha", "beta", "gamma"], mode="record")
        assert len(vectors) == 3
        assert len({v.dim for v in vectors}) == 1

    def test_replay_bit_identical(self, echo_gateway):
        first = echo_gateway.embed(["alpha"], mode="record")[0]
        second = echo_gateway.embed(["alpha"], mode="replay")[0]
        third = echo_gateway.embed(["alpha"], mode="replay")[0]
        assert first.values == second.values == third.values

    def test_basis_vectors_orthogonal(self, echo_gateway):
        # Independent oracle: plain dot product over the fixture vectors.
        u, v = echo_gateway.embed(["one text", "another text"], mode="record")
        dot = sum(a * b for a, b in zip(u.values, v.values))
        assert dot == 0.0

    def test_empty_batch_rejected(self, echo_gateway):
        with pytest.raises(ValueError):
            echo_gateway.embed([], mode="record")
        with pytest.raises(ValueError):
            echo_gateway.embed(["ok", ""], mode="record")

    def test_ragged_batch_is_internal_error(self):
        class RaggedProvider:
            def embed(self, model_id, texts):
                return [[1.0, 0.0], [1.0, 0.0, 0.0]], [1, 1]

        from buglift.gateway import GatewayError

        gateway = LlmGateway(embedding_provider=RaggedProvider())
        with pytest.raises(GatewayError, match="dimension mismatch"):
            gateway.embed(["a", "b"], mode="live")


class TestCassetteConflicts:
    def test_conflicting_rerecord_rejected(self):
        cassette = Cassette()
        cassette.put("k", CassetteEntry("m", "first", 1, 1))
        cassette.put("k", CassetteEntry("m", "first", 1, 1))  # identical is fine
        with pytest.raises(CassetteFormatError, match="conflicting"):
            cassette.put("k", CassetteEntry("m", "different", 1, 1))


class TestTemperatureRouting:
    def test_validation_pins_zero_generation_uses_default(self):
        seen = {}

        class TempSpyProvider:
            def complete(self, model_id, prompt, temperature, max_tokens):
                seen[prompt] = temperature
                return "SAME_PATTERN: yes", 1, 1

        gateway = LlmGateway(chat_provider=TempSpyProvider())
        gateway.complete_template(
            "same_bug_pattern",
            {
                "original_api": "a", "original_context": "c", "original_oracle": "o",
                "original_program": "p", "original_trace": "t",
                "transferred_api": "a2", "transferred_context": "c2",
                "transferred_oracle": "o2", "transferred_program": "p2",
                "transferred_trace": "t2",
            },
            mode="live",
        )
        gateway.complete_template(
            "api_analysis",
            {
                "qualified_name": "lib.f", "module_path": "lib",
                "signature": "()", "doc_text": "d",
            },
            mode="live",
        )
        temps = list(seen.values())
        assert temps[0] == 0.0  # validation prompt
        assert temps[1] == 1.0  # generation-side default
