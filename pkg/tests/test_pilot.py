"""Pilot similarity analysis: pair counts, binning, Pearson inference."""

from __future__ import annotations

import math
import random

import pytest

from buglift.gateway import EmbeddingVector
from buglift.pilot import (
    BIN_WIDTH,
    PearsonUndefinedError,
    PilotTriplet,
    pearson,
    pilot_analysis,
    write_pairs_csv,
    write_summary_json,
)


def unit_vector(rng: random.Random, dim: int = 6) -> EmbeddingVector:
    # Positive components keep cosines in [0, 1], like real text embeddings.
    values = [rng.uniform(0.05, 1.0) for _ in range(dim)]
    norm = math.sqrt(sum(v * v for v in values))
    return EmbeddingVector.of([v / norm for v in values], "test-model")


def random_triplets(n: int, seed: int = 11) -> list[PilotTriplet]:
    rng = random.Random(seed)
    return [
        PilotTriplet(
            issue_ref=f"demo/lib#{i}",
            v_func=unit_vector(rng),
            v_context=unit_vector(rng),
            v_oracle=unit_vector(rng),
        )
        for i in range(n)
    ]


def reference_pearson(xs, ys):
    """Textbook formula, written independently of the implementation."""
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    den = math.sqrt(sum((x - mx) ** 2 for x in xs)) * math.sqrt(
        sum((y - my) ** 2 for y in ys)
    )
    return num / den


class TestPairGeneration:
    def test_100_triplets_yield_9900_pairs(self):
        result = pilot_analysis(random_triplets(100))
        assert len(result.pairs) == 9900

    def test_ordered_pair_count_formula(self):
        for n in (3, 5, 12):
            assert len(pilot_analysis(random_triplets(n)).pairs) == n * (n - 1)

    def test_too_few_triplets_rejected(self):
        with pytest.raises(ValueError, match="at least 3"):
            pilot_analysis(random_triplets(2))


class TestPearson:
    def test_y_equals_x_gives_r_one(self):
        xs = [0.1, 0.25, 0.4, 0.7, 0.95]
        r, p = pearson(xs, list(xs))
        assert r == 1.0
        assert p == 0.0

    def test_perfect_negative(self):
        xs = [1.0, 2.0, 3.0, 4.0]
        r, _ = pearson(xs, [-x for x in xs])
        assert r == -1.0

    def test_constant_data_undefined(self):
        with pytest.raises(PearsonUndefinedError):
            pearson([1.0, 1.0, 1.0], [0.1, 0.2, 0.3])
        with pytest.raises(PearsonUndefinedError):
            pearson([0.1, 0.2, 0.3], [2.0, 2.0, 2.0])

    def test_matches_direct_formula_on_hand_datasets(self):
        rng = random.Random(3)
        datasets = [
            ([1, 2, 3, 4, 5], [2, 4, 5, 4, 5]),
            ([0.1, 0.5, 0.9], [0.3, 0.2, 0.8]),
        ] + [
            (
                [rng.uniform(0, 1) for _ in range(8)],
                [rng.uniform(0, 1) for _ in range(8)],
            )
            for _ in range(8)
        ]
        assert len(datasets) == 10
        for xs, ys in datasets:
            r, _ = pearson(xs, ys)
            assert r == pytest.approx(reference_pearson(xs, ys), abs=1e-9)

    def test_p_value_direction(self):
        # Strong correlation on many points: p must be far below 0.05.
        xs = [i / 50 for i in range(50)]
        ys = [x + 0.01 * math.sin(7 * x) for x in xs]
        r, p = pearson(xs, ys)
        assert r > 0.99
        assert p < 1e-10


class TestPilotEndToEnd:
    def test_identical_vectors_give_r_one(self):
        # One vector reused for all three roles makes y equal x exactly.
        rng = random.Random(23)
        triplets = []
        for i in range(10):
            v = unit_vector(rng)
            triplets.append(PilotTriplet(f"ref#{i}", v, v, v))
        result = pilot_analysis(triplets)
        assert result.pearson_r == 1.0
        assert all(x == y for x, y in result.pairs)

    def test_every_pair_in_exactly_one_bin(self):
        result = pilot_analysis(random_triplets(30))
        assert sum(count for _, _, count in result.binned_means) == len(result.pairs)
        assert len(result.binned_means) <= 21

    def test_bin_lows_are_multiples_of_width(self):
        result = pilot_analysis(random_triplets(30))
        for low, _, _ in result.binned_means:
            ratio = low / BIN_WIDTH
            assert abs(ratio - round(ratio)) < 1e-9

    def test_binned_means_match_brute_force(self):
        result = pilot_analysis(random_triplets(20))
        for low, mean, count in result.binned_means:
            members = [
                y
                for x, y in result.pairs
                if low <= min(max(x, 0.0), 1.0) < low + BIN_WIDTH
                or (low == 1.0 and min(max(x, 0.0), 1.0) == 1.0)
            ]
            assert len(members) == count
            assert mean == pytest.approx(sum(members) / len(members), abs=1e-9)

    def test_outputs_written(self, tmp_path):
        result = pilot_analysis(random_triplets(5))
        pairs_path = write_pairs_csv(result, tmp_path / "pairs.csv")
        summary_path = write_summary_json(result, tmp_path / "summary.json")
        assert pairs_path.read_text().startswith("x,y")
        assert len(pairs_path.read_text().strip().splitlines()) == 1 + len(result.pairs)
        import json

        summary = json.loads(summary_path.read_text())
        assert summary["pair_count"] == 20
        assert summary["bin_width"] == BIN_WIDTH
