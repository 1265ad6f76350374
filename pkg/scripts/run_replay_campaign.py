#!/usr/bin/env python3
"""Record and replay the synthetic end-to-end campaign, then report.

Runs the built-in scenario (36-API stub catalog, one seeded silent bug and
one seeded crash) twice: once recording a cassette, once replaying it with
a fresh gateway. Writes the campaign snapshot, per-test artifacts, and the
markdown report.

Usage: python scripts/run_replay_campaign.py --out campaign-out
"""

from __future__ import annotations

import argparse
from pathlib import Path

from buglift import demo
from buglift.campaign import CampaignConfig, run_campaign
from buglift.gateway import Cassette, load_cassette
from buglift.reporting import emit_report


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("campaign-out"))
    parser.add_argument("--window", type=int, default=10)
    args = parser.parse_args()

    cassette_path = args.out / "cassette.jsonl"
    gateway, matcher, harness, validator = demo.build_demo_runtime(
        "record", Cassette(path=cassette_path)
    )
    run_campaign(
        demo.DEMO_PATTERN,
        matcher,
        gateway,
        harness,
        validator,
        CampaignConfig(window_size=args.window, mode="record"),
    )
    print(f"recorded cassette: {cassette_path} ({len(gateway.cassette)} entries)")

    gateway, matcher, harness, validator = demo.build_demo_runtime(
        "replay", load_cassette(cassette_path)
    )
    state = run_campaign(
        demo.DEMO_PATTERN,
        matcher,
        gateway,
        harness,
        validator,
        CampaignConfig(window_size=args.window, mode="replay"),
        out_dir=args.out / "campaign",
    )
    print(
        f"replayed: {state.tests_generated} tests over {state.round} rounds, "
        f"{len(state.findings)} findings, halt={state.halt_reason}"
    )
    for finding in state.findings:
        print(f"  finding: {finding.target_api} [{finding.bug_category}]")
    print(f"llm spend (replay-accounted): {gateway.ledger.grand_total_units():.6f}")

    output = emit_report(args.out / "campaign", out_dir=args.out)
    print(f"report: {output.report_path}")


if __name__ == "__main__":
    main()
