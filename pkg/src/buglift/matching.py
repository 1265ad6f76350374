"""API catalog, functional descriptions, and embedding-based similarity.

The catalog is populated by the execution harness (which can import the
target library); descriptions are LLM-distilled, context-free summaries of
what each API does. Descriptions are embedded into fixed-dimension vectors
and queried by exact cosine scan; catalogs stay small enough (tens of
thousands of APIs) that approximate indexes would be pointless ceremony.

Queue ordering is total and deterministic: ties break lexicographically on
the qualified name, so campaigns are reproducible run-over-run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from buglift.gateway import EmbeddingVector, LlmGateway, Mode

DEFAULT_QUEUE_DEPTH = 1000
MAX_DESCRIBE_ASKS = 3


class MatchingError(Exception):
    pass


@dataclass(frozen=True)
class ApiRecord:
    qualified_name: str
    module_path: str
    signature_params: tuple[tuple[str, str, bool], ...] = ()
    doc_text: str = ""

    def signature_text(self) -> str:
        if not self.signature_params:
            return "(no declared parameters)"
        parts = []
        for name, kind, has_default in self.signature_params:
            suffix = "=..." if has_default else ""
            parts.append(f"{name}:{kind}{suffix}")
        return ", ".join(parts)


@dataclass(frozen=True)
class FunctionalDescription:
    api: str
    description_text: str

    def __post_init__(self) -> None:
        if not self.description_text.strip():
            raise ValueError("description_text must be non-empty")


@dataclass(frozen=True)
class SimilarApiQueue:
    """Rank-ordered (api, cosine score) list anchored at one API."""

    anchor_api: str
    entries: tuple[tuple[str, float], ...]
    capacity: int

    def __post_init__(self) -> None:
        if len(self.entries) > self.capacity:
            raise ValueError("queue longer than its capacity")
        scores = [score for _, score in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("queue scores must be non-increasing")

    def names(self) -> list[str]:
        return [api for api, _ in self.entries]


class CatalogHarness(Protocol):
    """The slice of the harness interface the matcher needs."""

    def catalog(self, library_ref: str) -> list[dict]: ...


def build_catalog(harness: CatalogHarness, library_ref: str) -> list[ApiRecord]:
    """Scan the target library through the harness; deduplicated,
    deterministically ordered."""
    records: dict[str, ApiRecord] = {}
    for payload in harness.catalog(library_ref):
        record = ApiRecord(
            qualified_name=payload["qualified_name"],
            module_path=payload.get("module_path", ""),
            signature_params=tuple(
                (p["name"], p.get("kind", ""), bool(p.get("has_default", False)))
                for p in payload.get("params", [])
            ),
            doc_text=payload.get("doc_text", ""),
        )
        records.setdefault(record.qualified_name, record)
    return [records[name] for name in sorted(records)]


def describe_api(
    record: ApiRecord, gateway: LlmGateway, mode: Mode = "replay"
) -> FunctionalDescription:
    """Distill a context-free functional description of one API."""
    fields = {
        "qualified_name": record.qualified_name,
        "module_path": record.module_path,
        "signature": record.signature_text(),
        "doc_text": record.doc_text or "(no documentation)",
    }
    text = ""
    for ask in range(MAX_DESCRIBE_ASKS):
        text = gateway.complete_template(
            "api_analysis", fields, mode=mode, epoch=ask
        ).text.strip()
        if text:
            return FunctionalDescription(api=record.qualified_name, description_text=text)
    raise MatchingError(
        f"empty description for {record.qualified_name} after {MAX_DESCRIBE_ASKS} asks"
    )


def cosine_similarity(u: EmbeddingVector, v: EmbeddingVector) -> float:
    if u.dim != v.dim:
        raise ValueError(f"dimension mismatch: {u.dim} != {v.dim}")
    a = np.asarray(u.values, dtype=np.float64)
    b = np.asarray(v.values, dtype=np.float64)
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity undefined for the zero vector")
    return float(np.dot(a, b) / (norm_a * norm_b))


class EmbeddingDb:
    """In-memory qualified_name -> embedding map with JSONL persistence."""

    def __init__(self) -> None:
        self._vectors: dict[str, EmbeddingVector] = {}

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, name: str) -> bool:
        return name in self._vectors

    def add(self, name: str, vector: EmbeddingVector) -> None:
        self._vectors[name] = vector

    def get(self, name: str) -> EmbeddingVector:
        try:
            return self._vectors[name]
        except KeyError:
            raise MatchingError(f"no embedding stored for {name!r}") from None

    def names(self) -> list[str]:
        return sorted(self._vectors)

    def save(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as handle:
            for name in self.names():
                vector = self._vectors[name]
                handle.write(
                    json.dumps(
                        {
                            "qualified_name": name,
                            "model_id": vector.model_id,
                            "values": list(vector.values),
                        }
                    )
                    + "\n"
                )
        return path

    @classmethod
    def load(cls, path: Path | str) -> "EmbeddingDb":
        db = cls()
        with Path(path).open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                raw = json.loads(line)
                db.add(
                    raw["qualified_name"],
                    EmbeddingVector.of(raw["values"], raw["model_id"]),
                )
        return db


def similar_queue(
    anchor_embedding: EmbeddingVector,
    db: EmbeddingDb,
    k: int = DEFAULT_QUEUE_DEPTH,
    anchor_api: str = "",
) -> SimilarApiQueue:
    """Top-k catalog entries by cosine similarity to the anchor embedding.

    Ties break lexicographically on the qualified name. The anchor API may
    itself appear (at rank 1 with score 1.0 when its own embedding is
    queried); excluding it from fuzz targets is the campaign's job.
    """
    if len(db) == 0:
        raise MatchingError("embedding database is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = [
        (name, cosine_similarity(anchor_embedding, db.get(name))) for name in db.names()
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return SimilarApiQueue(
        anchor_api=anchor_api, entries=tuple(scored[:k]), capacity=k
    )


class ApiMatcher:
    """Catalog plus embedding database behind one query surface.

    Campaigns anchor the main queue at the pattern's bug API and expansion
    queries at each newly found buggy API, always using the API's own
    catalog embedding.
    """

    def __init__(self, catalog: Sequence[ApiRecord], db: EmbeddingDb) -> None:
        self.records = {record.qualified_name: record for record in catalog}
        self.db = db

    def has_embedding(self, api: str) -> bool:
        return api in self.db

    def record_for(self, api: str) -> ApiRecord:
        return self.records.get(api) or ApiRecord(qualified_name=api, module_path="")

    def queue_for(self, api: str, k: int) -> SimilarApiQueue:
        return similar_queue(self.db.get(api), self.db, k=k, anchor_api=api)


def build_embedding_db(
    catalog: Sequence[ApiRecord], gateway: LlmGateway, mode: Mode = "replay"
) -> tuple[EmbeddingDb, list[FunctionalDescription]]:
    """Describe every cataloged API and embed the descriptions."""
    descriptions = [describe_api(record, gateway, mode=mode) for record in catalog]
    db = EmbeddingDb()
    if descriptions:
        vectors = gateway.embed([d.description_text for d in descriptions], mode=mode)
        for description, vector in zip(descriptions, vectors):
            db.add(description.api, vector)
    return db, descriptions


# ---------------------------------------------------------------------------
# Catalog persistence
# ---------------------------------------------------------------------------


def save_catalog(records: Sequence[ApiRecord], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(
                json.dumps(
                    {
                        "qualified_name": record.qualified_name,
                        "module_path": record.module_path,
                        "params": [
                            {"name": n, "kind": k, "has_default": d}
                            for n, k, d in record.signature_params
                        ],
                        "doc_text": record.doc_text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return path


def load_catalog(path: Path | str) -> list[ApiRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            records.append(
                ApiRecord(
                    qualified_name=raw["qualified_name"],
                    module_path=raw.get("module_path", ""),
                    signature_params=tuple(
                        (p["name"], p.get("kind", ""), bool(p.get("has_default", False)))
                        for p in raw.get("params", [])
                    ),
                    doc_text=raw.get("doc_text", ""),
                )
            )
    return records
