"""TOML configuration: model routing, campaign knobs, harness launch."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from buglift.campaign import CampaignConfig
from buglift.gateway import GatewaySettings, ModelPrice


@dataclass
class HarnessSettings:
    command: list[str] = field(
        default_factory=lambda: [sys.executable, "-m", "apiharness"]
    )
    parallelism: int = 1


@dataclass
class AppConfig:
    gateway: GatewaySettings = field(default_factory=GatewaySettings)
    campaign: CampaignConfig = field(default_factory=CampaignConfig)
    harness: HarnessSettings = field(default_factory=HarnessSettings)


def load_config(path: Path | str) -> AppConfig:
    raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))

    gateway = GatewaySettings()
    models = raw.get("models", {})
    for component in list(gateway.models):
        if component in models:
            gateway.models[component] = models[component]
    if "embedding" in models:
        gateway.embedding_model = models["embedding"]
    for model_id, prices in models.get("prices", {}).items():
        gateway.prices[model_id] = ModelPrice.per_mtok(
            str(prices.get("input", "0")), str(prices.get("output", "0"))
        )
    gw = raw.get("gateway", {})
    gateway.api_key_env = gw.get("api_key_env", gateway.api_key_env)
    gateway.base_url = gw.get("base_url", gateway.base_url)
    gateway.temperature_validation = gw.get(
        "temperature_validation", gateway.temperature_validation
    )
    gateway.temperature_generation = gw.get(
        "temperature_generation", gateway.temperature_generation
    )
    gateway.retry_attempts = gw.get("retry_attempts", gateway.retry_attempts)
    gateway.max_in_flight = gw.get("max_in_flight", gateway.max_in_flight)
    if "budget" in gw:
        gateway.budget_units = Fraction(str(gw["budget"]))

    defaults = CampaignConfig()
    camp = raw.get("campaign", {})
    campaign = CampaignConfig(
        window_size=camp.get("window_size", defaults.window_size),
        queue_depth=camp.get("queue_depth", defaults.queue_depth),
        expansion_count=camp.get("expansion_count", defaults.expansion_count),
        repeats=camp.get("repeats", defaults.repeats),
        timeout_seconds=camp.get("timeout_seconds", defaults.timeout_seconds),
        max_tests_per_pattern=camp.get(
            "max_tests_per_pattern", defaults.max_tests_per_pattern
        ),
        budget_units=camp.get("budget", defaults.budget_units),
        mode=camp.get("mode", defaults.mode),
    )

    harness_defaults = HarnessSettings()
    har = raw.get("harness", {})
    harness = HarnessSettings(
        command=list(har.get("command", harness_defaults.command)),
        parallelism=har.get("parallelism", harness_defaults.parallelism),
    )
    return AppConfig(gateway=gateway, campaign=campaign, harness=harness)
