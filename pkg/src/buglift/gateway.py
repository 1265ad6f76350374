"""Uniform access to chat-completion and embedding providers.

Supports three modes per call: ``live`` (hit the provider), ``record``
(hit the provider and persist the response), ``replay`` (serve the
persisted response byte-identically, no network). Every call appends to a
cost ledger whose sums are exact: costs are carried as rationals, never
accumulated in floats.

Cassette keys are ``(template_id, SHA-256 of the rendered prompt, epoch)``;
content hashes stay stable when prompt numbering drifts, and the epoch index
lets repeated validation prompts record distinct answers per epoch.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Literal, Protocol, Sequence

from buglift import templates

Mode = Literal["live", "record", "replay"]

TOKENS_PER_PRICE_UNIT = 10**6  # prices are quoted per million tokens


class GatewayError(Exception):
    """Base class for gateway failures."""


class CassetteMissError(GatewayError):
    """Replay requested for a key the cassette does not contain."""


class CassetteFormatError(GatewayError):
    """Cassette file is malformed or contains duplicate keys."""


class ProviderError(GatewayError):
    """Provider call failed after bounded retries."""


class BudgetExceededError(GatewayError):
    """Cost budget reached; the campaign must halt gracefully."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LlmRequest:
    """One chat-completion request, bound to a registered template slot."""

    template_id: str
    rendered_prompt: str
    model_id: str
    temperature: float = 0.0
    max_tokens: int = 4096

    def __post_init__(self) -> None:
        if not self.rendered_prompt:
            raise ValueError("rendered_prompt must be non-empty")
        if not templates.is_registered(self.template_id):
            raise ValueError(f"unregistered template_id {self.template_id!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class LlmResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    cost_units: float


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-length embedding; dim is identical for all vectors of a model."""

    values: tuple[float, ...]
    model_id: str
    dim: int

    def __post_init__(self) -> None:
        if len(self.values) != self.dim:
            raise ValueError(
                f"embedding length {len(self.values)} != declared dim {self.dim}"
            )

    @classmethod
    def of(cls, values: Sequence[float], model_id: str) -> "EmbeddingVector":
        vals = tuple(float(v) for v in values)
        return cls(values=vals, model_id=model_id, dim=len(vals))


@dataclass(frozen=True)
class ModelPrice:
    """Prices per million tokens, held as exact rationals."""

    input_per_mtok: Fraction
    output_per_mtok: Fraction

    @classmethod
    def per_mtok(cls, input_price: str | float, output_price: str | float) -> "ModelPrice":
        return cls(Fraction(str(input_price)), Fraction(str(output_price)))


def call_cost(prompt_tokens: int, completion_tokens: int, price: ModelPrice) -> Fraction:
    """Exact cost of one call: linear in token counts."""
    if prompt_tokens < 0 or completion_tokens < 0:
        raise ValueError("token counts must be non-negative")
    return (
        Fraction(prompt_tokens) * price.input_per_mtok
        + Fraction(completion_tokens) * price.output_per_mtok
    ) / TOKENS_PER_PRICE_UNIT


@dataclass(frozen=True)
class LedgerEntry:
    component: str
    model_id: str
    cost: Fraction
    prompt_tokens: int
    completion_tokens: int


class CostLedger:
    """Append-only cost ledger; appends are serialized, sums are exact."""

    def __init__(self) -> None:
        self._entries: list[LedgerEntry] = []
        self._lock = threading.Lock()

    def add(
        self,
        component: str,
        model_id: str,
        cost: Fraction | str | float,
        prompt_tokens: int = 0,
        completion_tokens: int = 0,
    ) -> LedgerEntry:
        entry = LedgerEntry(
            component=component,
            model_id=model_id,
            cost=Fraction(str(cost)) if not isinstance(cost, Fraction) else cost,
            prompt_tokens=prompt_tokens,
            completion_tokens=completion_tokens,
        )
        with self._lock:
            self._entries.append(entry)
        return entry

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    def component_totals(self) -> dict[str, Fraction]:
        totals: dict[str, Fraction] = {}
        for entry in self.entries:
            totals[entry.component] = totals.get(entry.component, Fraction(0)) + entry.cost
        return totals

    def grand_total(self) -> Fraction:
        return sum((entry.cost for entry in self.entries), Fraction(0))

    def grand_total_units(self) -> float:
        return float(self.grand_total())


# ---------------------------------------------------------------------------
# Cassettes
# ---------------------------------------------------------------------------

EMBEDDING_TEMPLATE_ID = templates.EMBEDDING.template_id


def cassette_key(template_id: str, rendered_prompt: str, epoch: int = 0) -> str:
    digest = hashlib.sha256(rendered_prompt.encode("utf-8")).hexdigest()
    return f"{template_id}:{digest}:{epoch}"


@dataclass(frozen=True)
class CassetteEntry:
    model_id: str
    text: str
    prompt_tokens: int
    completion_tokens: int


class Cassette:
    """In-memory key -> recorded response map with JSONL persistence."""

    FIELDS = ("key", "model_id", "text", "prompt_tokens", "completion_tokens")

    def __init__(self, path: Path | None = None) -> None:
        self.path = path
        self._entries: dict[str, CassetteEntry] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> CassetteEntry:
        try:
            return self._entries[key]
        except KeyError:
            raise CassetteMissError(f"no cassette entry for key {key}") from None

    def put(self, key: str, entry: CassetteEntry, persist: bool = True) -> None:
        with self._lock:
            existing = self._entries.get(key)
            if existing is not None:
                if existing != entry:
                    raise CassetteFormatError(
                        f"conflicting re-record for key {key}"
                    )
                return
            self._entries[key] = entry
            if persist and self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(self._encode(key, entry) + "\n")

    @staticmethod
    def _encode(key: str, entry: CassetteEntry) -> str:
        return json.dumps(
            {
                "key": key,
                "model_id": entry.model_id,
                "text": entry.text,
                "prompt_tokens": entry.prompt_tokens,
                "completion_tokens": entry.completion_tokens,
            },
            ensure_ascii=False,
        )

    def save(self, path: Path | None = None) -> Path:
        target = path or self.path
        if target is None:
            raise ValueError("no cassette path to save to")
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", encoding="utf-8") as handle:
            for key, entry in self._entries.items():
                handle.write(self._encode(key, entry) + "\n")
        return target

    def items(self) -> dict[str, CassetteEntry]:
        return dict(self._entries)


def load_cassette(path: Path | str) -> Cassette:
    """Load a line-delimited JSON cassette; keys must be unique."""
    path = Path(path)
    cassette = Cassette(path=path)
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CassetteFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            missing = [f for f in Cassette.FIELDS if f not in raw]
            if missing:
                raise CassetteFormatError(
                    f"{path}:{lineno}: missing fields {missing}"
                )
            key = raw["key"]
            if key in cassette:
                raise CassetteFormatError(f"{path}:{lineno}: duplicate key {key}")
            cassette.put(
                key,
                CassetteEntry(
                    model_id=raw["model_id"],
                    text=raw["text"],
                    prompt_tokens=int(raw["prompt_tokens"]),
                    completion_tokens=int(raw["completion_tokens"]),
                ),
                persist=False,
            )
    return cassette


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------


class ChatProvider(Protocol):
    def complete(
        self, model_id: str, prompt: str, temperature: float, max_tokens: int
    ) -> tuple[str, int, int]:
        """Return (text, prompt_tokens, completion_tokens)."""
        ...


class EmbeddingProvider(Protocol):
    def embed(
        self, model_id: str, texts: Sequence[str]
    ) -> tuple[list[list[float]], list[int]]:
        """Return (vectors, per-text token counts), same order as input."""
        ...


class OpenAiCompatProvider:
    """Minimal OpenAI-compatible HTTP provider for chat and embeddings.

    Credentials come from the environment variable named in the gateway
    settings; never from code or config files.
    """

    def __init__(self, base_url: str, api_key_env: str, timeout_seconds: float = 120.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout_seconds = timeout_seconds

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise ProviderError(f"environment variable {self.api_key_env} is not set")
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def _post(self, endpoint: str, payload: dict) -> dict:
        import requests

        try:
            response = requests.post(
                f"{self.base_url}{endpoint}",
                headers=self._headers(),
                json=payload,
                timeout=self.timeout_seconds,
            )
        except Exception as exc:
            raise ProviderError(f"request to {endpoint} failed: {exc}") from exc
        if response.status_code != 200:
            raise ProviderError(
                f"{endpoint} returned {response.status_code}: {response.text[:200]}"
            )
        return response.json()

    def complete(
        self, model_id: str, prompt: str, temperature: float, max_tokens: int
    ) -> tuple[str, int, int]:
        body = self._post(
            "/chat/completions",
            {
                "model": model_id,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": temperature,
                "max_tokens": max_tokens,
            },
        )
        usage = body.get("usage", {})
        return (
            body["choices"][0]["message"]["content"] or "",
            int(usage.get("prompt_tokens", 0)),
            int(usage.get("completion_tokens", 0)),
        )

    def embed(
        self, model_id: str, texts: Sequence[str]
    ) -> tuple[list[list[float]], list[int]]:
        body = self._post("/embeddings", {"model": model_id, "input": list(texts)})
        data = sorted(body["data"], key=lambda item: item["index"])
        vectors = [[float(v) for v in item["embedding"]] for item in data]
        total = int(body.get("usage", {}).get("prompt_tokens", 0))
        # The API reports batch-level usage only; attribute evenly.
        share, remainder = divmod(total, max(len(texts), 1))
        counts = [share + (1 if i < remainder else 0) for i in range(len(texts))]
        return vectors, counts


# ---------------------------------------------------------------------------
# Gateway
# ---------------------------------------------------------------------------


@dataclass
class GatewaySettings:
    """Model routing, prices, temperatures, budget, and retry policy."""

    models: dict[str, str] = field(
        default_factory=lambda: {
            templates.PATTERN_EXTRACTION: "o3-mini",
            templates.API_MATCHING: "gpt-4o-mini",
            templates.FUZZING: "gpt-4o-mini",
            templates.VALIDATION: "gpt-4.1-mini",
        }
    )
    embedding_model: str = "text-embedding-3-small"
    prices: dict[str, ModelPrice] = field(
        default_factory=lambda: {
            "o3-mini": ModelPrice.per_mtok("1.10", "4.40"),
            "gpt-4o-mini": ModelPrice.per_mtok("0.15", "0.60"),
            "gpt-4.1-mini": ModelPrice.per_mtok("0.40", "1.60"),
            "text-embedding-3-small": ModelPrice.per_mtok("0.02", "0"),
        }
    )
    # Validation prompts pin temperature 0 for maximal determinism; the
    # generation-side default stands in for the provider default.
    temperature_validation: float = 0.0
    temperature_generation: float = 1.0
    max_tokens: int = 4096
    budget_units: Fraction | None = None
    retry_attempts: int = 3
    retry_base_seconds: float = 0.5
    max_in_flight: int = 4
    api_key_env: str = "BUGLIFT_API_KEY"
    base_url: str = "https://api.openai.com/v1"

    def model_for(self, component: str) -> str:
        try:
            return self.models[component]
        except KeyError:
            raise KeyError(f"no model routed for component {component!r}") from None

    def price_for(self, model_id: str) -> ModelPrice:
        try:
            return self.prices[model_id]
        except KeyError:
            raise KeyError(f"no price configured for model {model_id!r}") from None

    def temperature_for(self, component: str) -> float:
        if component == templates.VALIDATION:
            return self.temperature_validation
        return self.temperature_generation


class LlmGateway:
    """Chat + embedding access with record/replay, retry, and cost ledger."""

    def __init__(
        self,
        settings: GatewaySettings | None = None,
        chat_provider: ChatProvider | None = None,
        embedding_provider: EmbeddingProvider | None = None,
        cassette: Cassette | None = None,
        ledger: CostLedger | None = None,
    ) -> None:
        self.settings = settings or GatewaySettings()
        self._chat = chat_provider
        self._embed = embedding_provider
        self.cassette = cassette if cassette is not None else Cassette()
        self.ledger = ledger if ledger is not None else CostLedger()
        self._in_flight = threading.BoundedSemaphore(self.settings.max_in_flight)
        self._dims: dict[str, int] = {}

    # -- internals ----------------------------------------------------------

    def _default_chat_provider(self) -> ChatProvider:
        if self._chat is None:
            self._chat = OpenAiCompatProvider(
                self.settings.base_url, self.settings.api_key_env
            )
        return self._chat

    def _default_embedding_provider(self) -> EmbeddingProvider:
        if self._embed is None:
            provider = OpenAiCompatProvider(
                self.settings.base_url, self.settings.api_key_env
            )
            self._embed = provider
        return self._embed

    def _check_budget(self) -> None:
        budget = self.settings.budget_units
        if budget is not None and self.ledger.grand_total() >= budget:
            raise BudgetExceededError(
                f"cost budget {float(budget):.6f} reached "
                f"(spent {self.ledger.grand_total_units():.6f})"
            )

    def _with_retry(self, call):
        attempts = max(1, self.settings.retry_attempts)
        last_error: Exception | None = None
        for attempt in range(attempts):
            try:
                with self._in_flight:
                    return call()
            except ProviderError as exc:
                last_error = exc
                if attempt + 1 < attempts:
                    time.sleep(self.settings.retry_base_seconds * (2**attempt))
        raise ProviderError(f"provider failed after {attempts} attempts: {last_error}")

    def _account(
        self, component: str, model_id: str, prompt_tokens: int, completion_tokens: int
    ) -> Fraction:
        cost = call_cost(prompt_tokens, completion_tokens, self.settings.price_for(model_id))
        self.ledger.add(component, model_id, cost, prompt_tokens, completion_tokens)
        return cost

    # -- operations ----------------------------------------------------------

    def complete(self, request: LlmRequest, mode: Mode, epoch: int = 0) -> LlmResponse:
        """Run one chat completion; in replay mode the recorded text is
        returned byte-identically and no provider is contacted."""
        self._check_budget()
        key = cassette_key(request.template_id, request.rendered_prompt, epoch)
        component = templates.component_of(request.template_id)

        if mode == "replay":
            entry = self.cassette.get(key)
            text, pt, ct = entry.text, entry.prompt_tokens, entry.completion_tokens
        else:
            provider = self._default_chat_provider()
            text, pt, ct = self._with_retry(
                lambda: provider.complete(
                    request.model_id,
                    request.rendered_prompt,
                    request.temperature,
                    request.max_tokens,
                )
            )
            if mode == "record":
                self.cassette.put(
                    key, CassetteEntry(request.model_id, text, pt, ct)
                )

        cost = self._account(component, request.model_id, pt, ct)
        return LlmResponse(
            text=text, prompt_tokens=pt, completion_tokens=ct, cost_units=float(cost)
        )

    def complete_template(
        self,
        template_id: str,
        fields: dict[str, str],
        mode: Mode,
        epoch: int = 0,
        temperature: float | None = None,
        max_tokens: int | None = None,
    ) -> LlmResponse:
        """Render a registered template and complete it with the model routed
        for the template's component."""
        template = templates.get_template(template_id)
        request = LlmRequest(
            template_id=template_id,
            rendered_prompt=template.render(**fields),
            model_id=self.settings.model_for(template.component),
            temperature=(
                temperature
                if temperature is not None
                else self.settings.temperature_for(template.component)
            ),
            max_tokens=max_tokens or self.settings.max_tokens,
        )
        return self.complete(request, mode, epoch=epoch)

    def embed(self, texts: Sequence[str], mode: Mode, epoch: int = 0) -> list[EmbeddingVector]:
        """Embed a batch; one vector per input, in order, all the same dim."""
        if not texts:
            raise ValueError("texts must be non-empty")
        if any(not t for t in texts):
            raise ValueError("every text must be non-empty")
        self._check_budget()

        model_id = self.settings.embedding_model
        keys = [cassette_key(EMBEDDING_TEMPLATE_ID, text, epoch) for text in texts]

        if mode == "replay":
            raw_vectors: list[list[float]] = []
            counts: list[int] = []
            for key in keys:
                entry = self.cassette.get(key)
                raw_vectors.append([float(v) for v in json.loads(entry.text)])
                counts.append(entry.prompt_tokens)
        else:
            provider = self._default_embedding_provider()
            raw_vectors, counts = self._with_retry(lambda: provider.embed(model_id, texts))
            if len(raw_vectors) != len(texts):
                raise GatewayError(
                    f"provider returned {len(raw_vectors)} vectors for {len(texts)} texts"
                )
            if mode == "record":
                for key, vector, count in zip(keys, raw_vectors, counts):
                    self.cassette.put(
                        key,
                        CassetteEntry(
                            model_id=model_id,
                            text=json.dumps(vector),
                            prompt_tokens=count,
                            completion_tokens=0,
                        ),
                    )

        vectors = [EmbeddingVector.of(values, model_id) for values in raw_vectors]
        expected_dim = self._dims.setdefault(model_id, vectors[0].dim)
        for vector in vectors:
            if vector.dim != expected_dim:
                raise GatewayError(
                    f"dimension mismatch for model {model_id}: "
                    f"{vector.dim} != {expected_dim}"
                )
        self._account(
            templates.API_MATCHING, model_id, sum(counts), 0
        )
        return vectors
