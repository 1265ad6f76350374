"""Shared test doubles: scripted providers standing in for live LLM APIs."""

from __future__ import annotations

from typing import Callable, Sequence

import pytest

from buglift.gateway import Cassette, CostLedger, GatewaySettings, LlmGateway


class ScriptedChatProvider:
    """Chat provider answering from a prompt -> text function."""

    def __init__(self, respond: Callable[[str, str], str]) -> None:
        self._respond = respond
        self.calls: list[str] = []

    def complete(
        self, model_id: str, prompt: str, temperature: float, max_tokens: int
    ) -> tuple[str, int, int]:
        self.calls.append(prompt)
        text = self._respond(model_id, prompt)
        return text, len(prompt.split()), len(text.split())


class BasisEmbeddingProvider:
    """Maps each distinct text to the next unit basis vector.

    Distinct texts are exactly orthogonal, repeated texts identical; handy
    for forcing known cosine similarities.
    """

    def __init__(self, dim: int = 8) -> None:
        self.dim = dim
        self._index: dict[str, int] = {}

    def embed(
        self, model_id: str, texts: Sequence[str]
    ) -> tuple[list[list[float]], list[int]]:
        vectors = []
        for text in texts:
            idx = self._index.setdefault(text, len(self._index))
            if idx >= self.dim:
                raise ValueError("basis exhausted; raise dim")
            vec = [0.0] * self.dim
            vec[idx] = 1.0
            vectors.append(vec)
        return vectors, [len(t.split()) for t in texts]


@pytest.fixture
def echo_gateway() -> LlmGateway:
    """Gateway whose chat provider echoes a canned acknowledgement."""
    return LlmGateway(
        settings=GatewaySettings(),
        chat_provider=ScriptedChatProvider(lambda model, prompt: f"ok:{len(prompt)}"),
        embedding_provider=BasisEmbeddingProvider(),
        cassette=Cassette(),
        ledger=CostLedger(),
    )
