"""Command-line entry points.

Subcommands: ingest, catalog, describe, embed, pilot, fuzz, validate,
report, resume. Exit codes: 0 success, 1 findings present (CI gate),
2 operational error.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

from buglift import corpus as corpus_mod
from buglift import pilot as pilot_mod
from buglift.campaign import resume_campaign, run_campaign
from buglift.config import AppConfig, load_config
from buglift.gateway import Cassette, EmbeddingVector, LlmGateway, load_cassette
from buglift.harness import ExecutionResult, SubprocessHarness
from buglift.matching import (
    ApiMatcher,
    EmbeddingDb,
    build_catalog,
    build_embedding_db,
    describe_api,
    load_catalog,
    save_catalog,
)
from buglift.patterns import extract_pattern, load_patterns, save_patterns
from buglift.reporting import emit_report
from buglift.validation.pipeline import ValidationConfig, Validator, verdict_to_json

LOGGER = logging.getLogger("buglift.cli")

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="buglift",
        description="Transfer-then-verify fuzzing for library APIs.",
    )
    parser.add_argument("--config", type=Path, help="TOML config file")
    parser.add_argument("--replay", type=Path, help="cassette file or directory to replay")
    parser.add_argument("--record", action="store_true", help="record provider answers")
    parser.add_argument("--budget", type=float, help="cost cap in currency units")
    parser.add_argument("--window", type=int, help="campaign window size")
    parser.add_argument("--out", type=Path, default=Path("buglift-out"), help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="fetch issue/PR records into a corpus store")
    p.add_argument("--repo", required=True)
    p.add_argument("--fixture", type=Path, help="offline fixture directory")

    p = sub.add_parser("catalog", help="scan the target library through the harness")
    p.add_argument("--library", required=True)

    p = sub.add_parser("describe", help="distill functional descriptions for a catalog")
    p.add_argument("--catalog", type=Path, required=True)

    p = sub.add_parser("embed", help="describe and embed a catalog into an embedding db")
    p.add_argument("--catalog", type=Path, required=True)

    p = sub.add_parser("pilot", help="pairwise similarity analysis over issue triplets")
    p.add_argument("--triplets", type=Path, help="triplets.jsonl with three vectors per issue")
    p.add_argument("--synthetic", type=int, help="generate N random triplets instead")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("extract", help="extract bug patterns from fix-linked issues")
    p.add_argument("--corpus", type=Path, required=True)

    p = sub.add_parser("fuzz", help="run transfer campaigns for extracted patterns")
    p.add_argument("--patterns", type=Path, required=True)
    p.add_argument("--catalog", type=Path, required=True)
    p.add_argument("--embeddings", type=Path, required=True)
    p.add_argument("--corpus", type=Path)

    p = sub.add_parser("validate", help="re-validate one recorded candidate artifact")
    p.add_argument("--artifact", type=Path, required=True)
    p.add_argument("--patterns", type=Path, required=True)
    p.add_argument("--corpus", type=Path)

    p = sub.add_parser("report", help="emit report.md and findings.jsonl for a campaign dir")
    p.add_argument("--campaign", type=Path, required=True)

    p = sub.add_parser("resume", help="resume an interrupted campaign from its snapshot")
    p.add_argument("--snapshot", type=Path, required=True)
    p.add_argument("--catalog", type=Path, required=True)
    p.add_argument("--embeddings", type=Path, required=True)
    p.add_argument("--corpus", type=Path)
    return parser


# ---------------------------------------------------------------------------
# Wiring helpers
# ---------------------------------------------------------------------------


def _load_app_config(args) -> AppConfig:
    if args.config:
        return load_config(args.config)
    return AppConfig()


def _resolve_mode(args) -> str:
    if args.record:
        return "record"
    if args.replay:
        return "replay"
    return "live"


def _cassette_path(args) -> Path | None:
    if args.replay:
        path = Path(args.replay)
        return path / "cassette.jsonl" if path.is_dir() else path
    if args.record:
        return Path(args.out) / "cassette.jsonl"
    return None


def _gateway(args, config: AppConfig) -> LlmGateway:
    path = _cassette_path(args)
    cassette = None
    if path is not None and path.exists():
        cassette = load_cassette(path)
        cassette.path = path
    elif path is not None:
        cassette = Cassette(path=path)
    gateway = LlmGateway(settings=config.gateway, cassette=cassette)
    if args.budget is not None:
        from fractions import Fraction

        gateway.settings.budget_units = Fraction(str(args.budget))
    return gateway


def _campaign_config(args, config: AppConfig, mode: str):
    from buglift.campaign import CampaignConfig

    base = config.campaign
    return CampaignConfig(
        window_size=args.window or base.window_size,
        queue_depth=base.queue_depth,
        expansion_count=base.expansion_count,
        repeats=base.repeats,
        timeout_seconds=base.timeout_seconds,
        max_tests_per_pattern=base.max_tests_per_pattern,
        budget_units=args.budget if args.budget is not None else base.budget_units,
        mode=mode,
        parallelism=config.harness.parallelism,
    )


def _matcher(args) -> ApiMatcher:
    return ApiMatcher(load_catalog(args.catalog), EmbeddingDb.load(args.embeddings))


def _issues(args) -> dict:
    if getattr(args, "corpus", None):
        return dict(corpus_mod.load_corpus(args.corpus).issues)
    return {}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args, config: AppConfig) -> int:
    fetcher = (
        corpus_mod.FixtureClient(args.fixture)
        if args.fixture
        else corpus_mod.RestClient()
    )
    store = Path(args.out) / "corpus"
    result = corpus_mod.ingest_repo(args.repo, fetcher, store_dir=store)
    pairs = corpus_mod.select_fixed_issues(result)
    print(
        f"ingested {len(result.issues)} issues / {len(result.prs)} PRs into {store}; "
        f"{len(pairs)} fix-linked pairs"
    )
    return EXIT_OK


def cmd_catalog(args, config: AppConfig) -> int:
    with SubprocessHarness(config.harness.command) as harness:
        records = build_catalog(harness, args.library)
    path = save_catalog(records, Path(args.out) / "catalog.jsonl")
    print(f"cataloged {len(records)} APIs into {path}")
    return EXIT_OK


def cmd_describe(args, config: AppConfig) -> int:
    mode = _resolve_mode(args)
    gateway = _gateway(args, config)
    records = load_catalog(args.catalog)
    out = Path(args.out) / "descriptions.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as handle:
        for record in records:
            description = describe_api(record, gateway, mode=mode)
            handle.write(
                json.dumps(
                    {"api": description.api, "description": description.description_text},
                    ensure_ascii=False,
                )
                + "\n"
            )
    print(f"described {len(records)} APIs into {out}")
    return EXIT_OK


def cmd_embed(args, config: AppConfig) -> int:
    mode = _resolve_mode(args)
    gateway = _gateway(args, config)
    records = load_catalog(args.catalog)
    db, _ = build_embedding_db(records, gateway, mode=mode)
    path = db.save(Path(args.out) / "embeddings.jsonl")
    print(f"embedded {len(db)} APIs into {path}")
    return EXIT_OK


def _load_triplets(path: Path) -> list[pilot_mod.PilotTriplet]:
    triplets = []
    with path.open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            triplets.append(
                pilot_mod.PilotTriplet(
                    issue_ref=raw["issue_ref"],
                    v_func=EmbeddingVector.of(raw["v_func"], "triplet"),
                    v_context=EmbeddingVector.of(raw["v_context"], "triplet"),
                    v_oracle=EmbeddingVector.of(raw["v_oracle"], "triplet"),
                )
            )
    return triplets


def _synthetic_triplets(n: int, seed: int) -> list[pilot_mod.PilotTriplet]:
    import math

    rng = random.Random(seed)

    def unit(dim: int = 8) -> EmbeddingVector:
        values = [rng.uniform(0.05, 1.0) for _ in range(dim)]
        norm = math.sqrt(sum(v * v for v in values))
        return EmbeddingVector.of([v / norm for v in values], "synthetic")

    return [
        pilot_mod.PilotTriplet(f"synthetic#{i}", unit(), unit(), unit()) for i in range(n)
    ]


def cmd_pilot(args, config: AppConfig) -> int:
    if args.triplets:
        triplets = _load_triplets(args.triplets)
    elif args.synthetic:
        triplets = _synthetic_triplets(args.synthetic, args.seed)
    else:
        raise SystemExit("pilot requires --triplets or --synthetic")
    result = pilot_mod.pilot_analysis(triplets)
    out = Path(args.out)
    pilot_mod.write_pairs_csv(result, out / "pairs.csv")
    pilot_mod.write_summary_json(result, out / "summary.json")
    print(
        f"{len(result.pairs)} pairs, r={result.pearson_r:.3f}, "
        f"p={result.p_value:.3g} -> {out / 'summary.json'}"
    )
    return EXIT_OK


def cmd_extract(args, config: AppConfig) -> int:
    mode = _resolve_mode(args)
    gateway = _gateway(args, config)
    store = corpus_mod.load_corpus(args.corpus)
    pairs = corpus_mod.select_fixed_issues(store)
    patterns = [extract_pattern(issue, pr, gateway, mode=mode) for issue, pr in pairs]
    path = save_patterns(patterns, Path(args.out) / "patterns.jsonl")
    print(f"extracted {len(patterns)} patterns into {path}")
    return EXIT_OK


def cmd_fuzz(args, config: AppConfig) -> int:
    mode = _resolve_mode(args)
    gateway = _gateway(args, config)
    matcher = _matcher(args)
    campaign_config = _campaign_config(args, config, mode)
    validator = Validator(
        gateway,
        ValidationConfig(repeats=campaign_config.repeats, mode=mode),
        issues=_issues(args),
    )
    total_findings = 0
    out_root = Path(args.out)
    with SubprocessHarness(config.harness.command) as harness:
        for pattern in load_patterns(args.patterns):
            campaign_dir = out_root / f"{pattern.source_issue[0].replace('/', '__')}__{pattern.source_issue[1]}"
            state = run_campaign(
                pattern,
                matcher,
                gateway,
                harness,
                validator,
                campaign_config,
                out_dir=campaign_dir,
            )
            total_findings += len(state.findings)
            print(
                f"{pattern.bug_api}: {state.tests_generated} tests, "
                f"{len(state.findings)} findings, halt={state.halt_reason}"
            )
    print(f"total findings: {total_findings}; spent {gateway.ledger.grand_total_units():.4f}")
    return EXIT_FINDINGS if total_findings else EXIT_OK


def cmd_validate(args, config: AppConfig) -> int:
    mode = _resolve_mode(args)
    gateway = _gateway(args, config)
    artifact = json.loads(Path(args.artifact).read_text(encoding="utf-8"))
    patterns = {p.source_issue: p for p in load_patterns(args.patterns)}
    from buglift.campaign import _test_from_json  # artifact schema owner

    test = _test_from_json(artifact["test"])
    pattern = patterns.get(test.source_issue)
    if pattern is None:
        raise SystemExit(f"no pattern for source issue {test.source_issue}")
    execution = ExecutionResult.from_payload(artifact["execution"])
    validator = Validator(
        gateway, ValidationConfig(mode=mode), issues=_issues(args)
    )
    verdict = validator.validate(pattern, test, execution)
    print(json.dumps(verdict_to_json(verdict), indent=2))
    return EXIT_OK


def cmd_report(args, config: AppConfig) -> int:
    output = emit_report(args.campaign, out_dir=args.out)
    print(f"report: {output.report_path}")
    print(f"findings: {output.findings_path} ({len(output.records)} records)")
    for error in output.errors:
        print(f"corrupt artifact: {error}", file=sys.stderr)
    return EXIT_FINDINGS if output.records else EXIT_OK


def cmd_resume(args, config: AppConfig) -> int:
    mode = _resolve_mode(args)
    gateway = _gateway(args, config)
    matcher = _matcher(args)
    validator = Validator(gateway, ValidationConfig(mode=mode), issues=_issues(args))
    # The snapshot's own config governs the resumed run; an explicitly
    # supplied config (or --budget) may raise the operational caps.
    overrides = {}
    if args.config:
        overrides["max_tests_per_pattern"] = config.campaign.max_tests_per_pattern
    if args.budget is not None:
        overrides["budget_units"] = args.budget
    with SubprocessHarness(config.harness.command) as harness:
        state = resume_campaign(
            args.snapshot,
            matcher,
            gateway,
            harness,
            validator,
            out_dir=args.out,
            **overrides,
        )
    print(
        f"resumed: {state.tests_generated} tests, {len(state.findings)} findings, "
        f"halt={state.halt_reason}"
    )
    return EXIT_FINDINGS if state.findings else EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "catalog": cmd_catalog,
    "describe": cmd_describe,
    "embed": cmd_embed,
    "pilot": cmd_pilot,
    "extract": cmd_extract,
    "fuzz": cmd_fuzz,
    "validate": cmd_validate,
    "report": cmd_report,
    "resume": cmd_resume,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_app_config(args)
        return COMMANDS[args.command](args, config)
    except SystemExit:
        raise
    except Exception as exc:
        LOGGER.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
