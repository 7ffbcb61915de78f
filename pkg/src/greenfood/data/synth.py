"""Synthetic interaction corpora with planted per-user green affinity.

Each item gets a latent taste vector, a popularity offset and raw indicator
values; each user gets a taste vector and one affinity weight per
indicator. A user's items are drawn without replacement (Gumbel top-k) from
the logit::

    taste_scale * <t_u, t_i> / sqrt(k) + sum_j a_uj * green_scale * (z_ij - 0.5) + b_i

where ``z_ij`` is the item's greener-is-higher value of indicator j in [0, 1].
"""
from __future__ import annotations

import csv
import json
from math import erf, sqrt
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .corpus import Direction

GREENREC_LIKE = {
    "eis": (Direction.LOWER_GREENER, 40.0, 140.0),
    "nis": (Direction.HIGHER_GREENER, 20.0, 60.0),
    "hmi": (Direction.HIGHER_GREENER, 20.0, 60.0),
}


class SynthConfigError(ValueError):
    pass


@dataclass
class SynthConfig:
    users: int = 500
    items: int = 2000
    n: int = 3
    min_len: int = 20
    max_len: int = 40
    taste_dim: int = 8
    taste_scale: float = 3.0
    popularity_std: float = 0.5
    green_scale: float = 4.0
    # Share of users that carry a green affinity; the rest get affinity 0.
    green_fraction: float = 1.0
    affinity_mean: float = 0.5
    affinity_std: float = 0.5
    # Correlation between indicator greenness draws (0 = independent).
    indicator_correlation: float = 0.0
    names: Optional[list] = None
    directions: Optional[list] = None
    ranges: Optional[list] = None

    def resolved_indicators(self) -> list:
        """(name, direction, lo, hi) per indicator."""
        if self.names is None and self.n == 3:
            names = list(GREENREC_LIKE)
        else:
            names = list(self.names) if self.names else [f"g{j + 1}" for j in range(self.n)]
        if len(names) != self.n:
            raise SynthConfigError(f"{len(names)} names for n={self.n} indicators")
        out = []
        for j, name in enumerate(names):
            d_default, lo, hi = GREENREC_LIKE.get(name, (Direction.HIGHER_GREENER, 0.0, 100.0))
            d = Direction(self.directions[j]) if self.directions else d_default
            if self.ranges:
                lo, hi = self.ranges[j]
            out.append((name, d, float(lo), float(hi)))
        return out

    def validate(self) -> None:
        if self.users < 50 or self.items < 100:
            raise SynthConfigError("synthetic corpus needs at least 50 users and 100 items")
        if self.n < 0:
            raise SynthConfigError("n must be >= 0")
        if not 3 <= self.min_len <= self.max_len:
            raise SynthConfigError("need 3 <= min_len <= max_len")
        if self.max_len > self.items:
            raise SynthConfigError(
                f"infeasible: max_len={self.max_len} interactions per user but only {self.items} items")
        if not 0.0 <= self.green_fraction <= 1.0:
            raise SynthConfigError("green_fraction must be in [0, 1]")
        if not -1.0 < self.indicator_correlation < 1.0:
            raise SynthConfigError("indicator_correlation must be in (-1, 1)")


@dataclass
class SyntheticCorpus:
    interactions: np.ndarray  # (rows, 3): user_id, item_id, timestamp
    indicators: np.ndarray  # (items, n) raw values; row k is item id k + 1
    greenness: np.ndarray  # (items, n) greener-is-higher values in [0, 1]
    affinity: np.ndarray  # (users, n)
    popularity: np.ndarray
    specs: list  # (name, direction, lo, hi)
    metadata: dict = field(default_factory=dict)

    def write(self, out_dir) -> dict:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "interactions": out_dir / "interactions.csv",
            "indicators": out_dir / "indicators.csv",
            "spec": out_dir / "indicators.spec.json",
            "metadata": out_dir / "metadata.json",
        }
        with open(paths["interactions"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["user_id", "item_id", "timestamp"])
            w.writerows(self.interactions.tolist())
        with open(paths["indicators"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["item_id"] + [s[0] for s in self.specs])
            for k, row in enumerate(self.indicators):
                w.writerow([k + 1] + [repr(float(x)) for x in row])
        with open(paths["spec"], "w", encoding="utf-8") as fh:
            json.dump({s[0]: s[1].value for s in self.specs}, fh, indent=2)
        with open(paths["metadata"], "w", encoding="utf-8") as fh:
            json.dump(self.metadata, fh, indent=2, sort_keys=True)
        return {k: str(v) for k, v in paths.items()}


def synth_generate(config: SynthConfig, seed: int) -> SyntheticCorpus:
    config.validate()
    rng = np.random.default_rng([int(seed), 0x5EED])
    specs = config.resolved_indicators()
    n, k = config.n, config.taste_dim

    if n:
        cov = np.full((n, n), config.indicator_correlation) + (1 - config.indicator_correlation) * np.eye(n)
        latent = rng.multivariate_normal(np.zeros(n), cov, size=config.items)
        # Normal CDF keeps draws correlated but uniform on [0, 1].
        greenness = 0.5 * (1.0 + np.vectorize(erf)(latent / sqrt(2.0)))
    else:
        greenness = np.zeros((config.items, 0))
    raw = np.empty_like(greenness)
    for j, (_, direction, lo, hi) in enumerate(specs):
        g = greenness[:, j]
        raw[:, j] = lo + (1.0 - g if direction is Direction.LOWER_GREENER else g) * (hi - lo)
    raw = np.round(raw, 4)
    # Keep greenness consistent with the rounded raw values.
    for j, (_, direction, lo, hi) in enumerate(specs):
        frac = (raw[:, j] - lo) / (hi - lo)
        greenness[:, j] = 1.0 - frac if direction is Direction.LOWER_GREENER else frac

    item_taste = rng.normal(size=(config.items, k))
    popularity = rng.normal(scale=config.popularity_std, size=config.items)
    user_taste = rng.normal(size=(config.users, k))
    green_user = rng.random(config.users) < config.green_fraction
    affinity = config.affinity_mean + config.affinity_std * rng.normal(size=(config.users, n))
    affinity[~green_user] = 0.0

    lengths = rng.integers(config.min_len, config.max_len + 1, size=config.users)
    logits = (config.taste_scale * user_taste @ item_taste.T / np.sqrt(k)
              + config.green_scale * affinity @ (greenness - 0.5).T
              + popularity[None, :])
    rows = []
    for u in range(config.users):
        gumbel = rng.gumbel(size=config.items)
        picked = np.argsort(-(logits[u] + gumbel), kind="stable")[: lengths[u]]
        picked = rng.permutation(picked)
        start = int(rng.integers(1_600_000_000, 1_700_000_000))
        stamps = start + np.cumsum(rng.integers(60, 3 * 86_400, size=picked.size))
        rows.extend((u + 1, int(i) + 1, int(t)) for i, t in zip(picked, stamps))
    interactions = np.array(rows, dtype=np.int64)

    cfg = asdict(config)
    metadata = {
        "generator": "greenfood.synth",
        "seed": int(seed),
        "config": cfg,
        "indicators": [{"name": s[0], "direction": s[1].value, "low": s[2], "high": s[3]} for s in specs],
        "affinity": affinity.tolist(),
        "green_user": green_user.tolist(),
    }
    return SyntheticCorpus(interactions, raw, greenness, affinity, popularity, specs, metadata)
