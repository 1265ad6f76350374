"""Pairwise similarity analysis over issue triplets.

Each historical issue is summarized as three embeddings: the bug API's
functional description, the triggering context, and the oracle design. For
every ordered pair of issues the x coordinate averages the functional and
context similarities, the y coordinate is the oracle-design similarity.
The analysis reports all pairs, mean y within 0.05-wide x bins, and the
Pearson correlation with a two-sided t-test p-value.

Text-embedding cosines land in [0, 1] in practice; should a negative
average ever appear it clamps into the lowest bin, keeping every pair in
exactly one bin.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from scipy import stats

from buglift.gateway import EmbeddingVector
from buglift.matching import cosine_similarity

BIN_WIDTH = 0.05
MAX_BIN_INDEX = 20  # bins cover the [0, 1] similarity range


class PearsonUndefinedError(ValueError):
    """Pearson correlation is undefined when x or y is constant."""


@dataclass(frozen=True)
class PilotTriplet:
    issue_ref: str
    v_func: EmbeddingVector
    v_context: EmbeddingVector
    v_oracle: EmbeddingVector


@dataclass(frozen=True)
class PilotResult:
    pairs: tuple[tuple[float, float], ...]
    binned_means: tuple[tuple[float, float, int], ...]
    pearson_r: float
    p_value: float


def pearson(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Pearson r and two-sided p via the t-distribution with n-2 dof."""
    n = len(xs)
    if n != len(ys):
        raise ValueError("x and y must have equal length")
    if n < 3:
        raise ValueError("need at least 3 points")
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    sxx = math.fsum((x - mean_x) ** 2 for x in xs)
    syy = math.fsum((y - mean_y) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        raise PearsonUndefinedError("constant x or y: Pearson correlation undefined")
    sxy = math.fsum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    r = sxy / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(stats.t.sf(abs(t), df=n - 2))
    return r, p


def bin_index(x: float) -> int:
    clamped = min(max(x, 0.0), 1.0)
    return min(int(clamped / BIN_WIDTH), MAX_BIN_INDEX)


def pilot_analysis(triplets: Sequence[PilotTriplet]) -> PilotResult:
    """All-ordered-pairs similarity comparison: n triplets yield n*(n-1)
    (x, y) pairs."""
    if len(triplets) < 3:
        raise ValueError("need at least 3 triplets")
    pairs: list[tuple[float, float]] = []
    for i, left in enumerate(triplets):
        for j, right in enumerate(triplets):
            if i == j:
                continue
            x = 0.5 * cosine_similarity(left.v_func, right.v_func) + 0.5 * cosine_similarity(
                left.v_context, right.v_context
            )
            y = cosine_similarity(left.v_oracle, right.v_oracle)
            pairs.append((x, y))

    by_bin: dict[int, list[float]] = {}
    for x, y in pairs:
        by_bin.setdefault(bin_index(x), []).append(y)
    binned = tuple(
        (idx * BIN_WIDTH, math.fsum(ys) / len(ys), len(ys))
        for idx, ys in sorted(by_bin.items())
    )

    r, p = pearson([x for x, _ in pairs], [y for _, y in pairs])
    return PilotResult(pairs=tuple(pairs), binned_means=binned, pearson_r=r, p_value=p)


def write_pairs_csv(result: PilotResult, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x", "y"])
        writer.writerows(result.pairs)
    return path


def write_summary_json(result: PilotResult, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "pearson_r": result.pearson_r,
        "p_value": result.p_value,
        "pair_count": len(result.pairs),
        "bin_width": BIN_WIDTH,
        "bins": [
            {"bin_low": low, "mean_y": mean, "count": count}
            for low, mean, count in result.binned_means
        ],
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path
