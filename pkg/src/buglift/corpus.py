"""Issue/PR corpus: fetch, persist, and select fix-linked issues.

Records are stored as line-delimited JSON (issues.jsonl / prs.jsonl),
append-friendly and diff-able. Linkage between issues and fixing PRs is
resolved from explicit link fields and fix-keyword mentions in either
direction; an issue only counts as fixed when a linked PR is actually
present in the corpus.

Offline fixture mode is first-class: a fixture directory with the same JSON
shapes substitutes for the hosting service, so every test runs without
network.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Protocol

FIX_KEYWORD_RE = re.compile(
    r"\b(?:fix(?:es|ed)?|close(?:s|d)?|resolve(?:s|d)?)\b"
    r"(?:\s+(?:by|in|via|with))?[:\s]*#(\d+)",
    re.IGNORECASE,
)


class CorpusError(Exception):
    pass


class CorpusFormatError(CorpusError):
    """Persisted record line is malformed or violates a corpus invariant."""


class RateLimitError(CorpusError):
    """Service throttled the fetch; carries a cursor to resume from."""

    def __init__(self, message: str, cursor: int) -> None:
        super().__init__(message)
        self.cursor = cursor


@dataclass(frozen=True)
class IssueRecord:
    repo: str
    number: int
    title: str = ""
    body: str = ""
    labels: tuple[str, ...] = ()
    comments: tuple[tuple[str, str], ...] = ()
    linked_pr_numbers: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.number <= 0:
            raise ValueError("issue number must be positive")
        deduped = tuple(sorted(set(self.linked_pr_numbers)))
        if deduped != self.linked_pr_numbers:
            object.__setattr__(self, "linked_pr_numbers", deduped)

    @property
    def key(self) -> tuple[str, int]:
        return (self.repo, self.number)


@dataclass(frozen=True)
class PullRequestRecord:
    repo: str
    number: int
    title: str = ""
    description: str = ""
    diff_text: str = ""
    changed_files: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.number <= 0:
            raise ValueError("PR number must be positive")
        if not self.diff_text and self.changed_files:
            raise ValueError(
                f"PR {self.repo}#{self.number}: empty diff with non-empty changed_files"
            )

    @property
    def key(self) -> tuple[str, int]:
        return (self.repo, self.number)


@dataclass
class Corpus:
    issues: dict[tuple[str, int], IssueRecord] = field(default_factory=dict)
    prs: dict[tuple[str, int], PullRequestRecord] = field(default_factory=dict)

    def upsert_issue(self, record: IssueRecord) -> None:
        self.issues[record.key] = record

    def upsert_pr(self, record: PullRequestRecord) -> None:
        self.prs[record.key] = record

    def sorted_issues(self) -> list[IssueRecord]:
        return [self.issues[k] for k in sorted(self.issues)]

    def sorted_prs(self) -> list[PullRequestRecord]:
        return [self.prs[k] for k in sorted(self.prs)]


# ---------------------------------------------------------------------------
# Service clients
# ---------------------------------------------------------------------------


class ServiceClient(Protocol):
    """Minimal REST-shaped reads against a code-hosting service."""

    def list_issues(self, repo: str) -> Iterable[dict]: ...

    def list_pulls(self, repo: str) -> Iterable[dict]: ...


class FixtureClient:
    """Reads the service JSON shapes from a local directory.

    Layout: ``<root>/issues/*.json`` and ``<root>/prs/*.json``, one record
    per file.
    """

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)

    @staticmethod
    def _load_dir(directory: Path) -> list[dict]:
        if not directory.is_dir():
            return []
        records = []
        for path in sorted(directory.glob("*.json")):
            records.append(json.loads(path.read_text(encoding="utf-8")))
        return records

    def list_issues(self, repo: str) -> list[dict]:
        return [r for r in self._load_dir(self.root / "issues") if r.get("repo", repo) == repo]

    def list_pulls(self, repo: str) -> list[dict]:
        return [r for r in self._load_dir(self.root / "prs") if r.get("repo", repo) == repo]


class RestClient:
    """Paged REST reads with a bearer token from the environment.

    Raises RateLimitError with the page cursor when the service throttles,
    so a re-run can resume instead of starting over.
    """

    def __init__(
        self,
        base_url: str = "https://api.github.com",
        token_env: str = "BUGLIFT_SERVICE_TOKEN",
        per_page: int = 100,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.token_env = token_env
        self.per_page = per_page

    def _get(self, path: str, page: int) -> list[dict]:
        import os

        import requests

        headers = {"Accept": "application/vnd.github+json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        response = requests.get(
            f"{self.base_url}{path}",
            headers=headers,
            params={"state": "all", "per_page": self.per_page, "page": page},
            timeout=60,
        )
        if response.status_code in (403, 429):
            raise RateLimitError(f"rate limited at page {page}", cursor=page)
        response.raise_for_status()
        return response.json()

    def _paged(self, path: str, start_page: int = 1) -> Iterable[dict]:
        page = start_page
        while True:
            batch = self._get(path, page)
            if not batch:
                return
            yield from batch
            page += 1

    def list_issues(self, repo: str) -> Iterable[dict]:
        for raw in self._paged(f"/repos/{repo}/issues"):
            if "pull_request" in raw:
                continue
            yield {
                "repo": repo,
                "number": raw["number"],
                "title": raw.get("title", ""),
                "body": raw.get("body") or "",
                "labels": [l["name"] for l in raw.get("labels", [])],
                "comments": [],
            }

    def list_pulls(self, repo: str) -> Iterable[dict]:
        for raw in self._paged(f"/repos/{repo}/pulls"):
            yield {
                "repo": repo,
                "number": raw["number"],
                "title": raw.get("title", ""),
                "description": raw.get("body") or "",
                "diff_text": "",
                "changed_files": [],
            }


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def _fix_links(*texts: str) -> set[int]:
    found: set[int] = set()
    for text in texts:
        for match in FIX_KEYWORD_RE.finditer(text or ""):
            found.add(int(match.group(1)))
    return found


def _issue_from_raw(repo: str, raw: dict) -> IssueRecord:
    return IssueRecord(
        repo=raw.get("repo", repo),
        number=int(raw["number"]),
        title=raw.get("title", ""),
        body=raw.get("body", ""),
        labels=tuple(raw.get("labels", [])),
        comments=tuple(
            (c.get("author", ""), c.get("text", "")) for c in raw.get("comments", [])
        ),
        linked_pr_numbers=tuple(int(n) for n in raw.get("linked_pr_numbers", [])),
    )


def _pr_from_raw(repo: str, raw: dict) -> PullRequestRecord:
    return PullRequestRecord(
        repo=raw.get("repo", repo),
        number=int(raw["number"]),
        title=raw.get("title", ""),
        description=raw.get("description", ""),
        diff_text=raw.get("diff_text", ""),
        changed_files=tuple(raw.get("changed_files", [])),
    )


def resolve_links(corpus: Corpus) -> None:
    """Attach fix-keyword links in both directions, in place."""
    # Issue side: fix-keyword mentions in body or comments claim a PR.
    for key, issue in list(corpus.issues.items()):
        claimed = set(issue.linked_pr_numbers)
        claimed |= _fix_links(issue.body, *(text for _, text in issue.comments))
        claimed.discard(issue.number)
        corpus.issues[key] = replace(issue, linked_pr_numbers=tuple(sorted(claimed)))
    # PR side: "fixes #N" in a PR links the PR back onto issue N.
    for pr in corpus.prs.values():
        for issue_number in _fix_links(pr.title, pr.description):
            issue_key = (pr.repo, issue_number)
            issue = corpus.issues.get(issue_key)
            if issue is None:
                continue
            linked = tuple(sorted(set(issue.linked_pr_numbers) | {pr.number}))
            corpus.issues[issue_key] = replace(issue, linked_pr_numbers=linked)


def ingest_repo(
    repo: str, fetcher: ServiceClient, store_dir: Path | str | None = None
) -> Corpus:
    """Fetch all records for one repo; idempotent by (repo, number)."""
    corpus = Corpus()
    if store_dir is not None:
        store_path = Path(store_dir)
        if (store_path / "issues.jsonl").exists() or (store_path / "prs.jsonl").exists():
            corpus = load_corpus(store_path)
    for raw in fetcher.list_issues(repo):
        corpus.upsert_issue(_issue_from_raw(repo, raw))
    for raw in fetcher.list_pulls(repo):
        corpus.upsert_pr(_pr_from_raw(repo, raw))
    resolve_links(corpus)
    if store_dir is not None:
        store_corpus(corpus, store_dir)
    return corpus


def select_fixed_issues(corpus: Corpus) -> list[tuple[IssueRecord, PullRequestRecord]]:
    """Issues whose linked PRs resolve to present records, paired with the
    most recent (highest-numbered) linked PR; one pair per issue."""
    pairs = []
    for issue in corpus.sorted_issues():
        present = [
            n for n in issue.linked_pr_numbers if (issue.repo, n) in corpus.prs
        ]
        if not present:
            continue
        pairs.append((issue, corpus.prs[(issue.repo, max(present))]))
    return pairs


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _issue_to_json(issue: IssueRecord) -> dict:
    return {
        "repo": issue.repo,
        "number": issue.number,
        "title": issue.title,
        "body": issue.body,
        "labels": list(issue.labels),
        "comments": [{"author": a, "text": t} for a, t in issue.comments],
        "linked_pr_numbers": list(issue.linked_pr_numbers),
    }


def _pr_to_json(pr: PullRequestRecord) -> dict:
    return {
        "repo": pr.repo,
        "number": pr.number,
        "title": pr.title,
        "description": pr.description,
        "diff_text": pr.diff_text,
        "changed_files": list(pr.changed_files),
    }


def store_corpus(corpus: Corpus, store_dir: Path | str) -> Path:
    store_path = Path(store_dir)
    store_path.mkdir(parents=True, exist_ok=True)
    with (store_path / "issues.jsonl").open("w", encoding="utf-8") as handle:
        for issue in corpus.sorted_issues():
            handle.write(json.dumps(_issue_to_json(issue), ensure_ascii=False) + "\n")
    with (store_path / "prs.jsonl").open("w", encoding="utf-8") as handle:
        for pr in corpus.sorted_prs():
            handle.write(json.dumps(_pr_to_json(pr), ensure_ascii=False) + "\n")
    return store_path


def _read_jsonl(path: Path) -> Iterable[tuple[int, dict]]:
    if not path.exists():
        return
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc


def load_corpus(store_dir: Path | str) -> Corpus:
    store_path = Path(store_dir)
    corpus = Corpus()
    for lineno, raw in _read_jsonl(store_path / "issues.jsonl"):
        record = _issue_from_raw(raw.get("repo", ""), raw)
        if record.key in corpus.issues:
            raise CorpusFormatError(
                f"issues.jsonl:{lineno}: duplicate issue key {record.key}"
            )
        corpus.upsert_issue(record)
    for lineno, raw in _read_jsonl(store_path / "prs.jsonl"):
        record = _pr_from_raw(raw.get("repo", ""), raw)
        if record.key in corpus.prs:
            raise CorpusFormatError(
                f"prs.jsonl:{lineno}: duplicate PR key {record.key}"
            )
        corpus.upsert_pr(record)
    return corpus
