"""Corpus ingestion, leave-one-out sequences, indicator normalization, user profiles."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_MIN_INTERACTIONS = 10


class CorpusError(ValueError):
    pass


class Direction(str, Enum):
    HIGHER_GREENER = "higher"
    LOWER_GREENER = "lower"


DEFAULT_DIRECTIONS = {
    "eis": Direction.LOWER_GREENER,
    "nis": Direction.HIGHER_GREENER,
    "hmi": Direction.HIGHER_GREENER,
}


@dataclass(frozen=True)
class IndicatorSpec:
    name: str
    direction: Direction
    observed_min: float = math.nan
    observed_max: float = math.nan

    @property
    def lower_is_greener(self) -> bool:
        return self.direction is Direction.LOWER_GREENER


@dataclass
class InteractionLog:
    """Filtered interactions with dense internal ids.

    Users are indexed ``0..v-1`` and items ``1..|I|``; item 0 is padding.
    ``indicators[item]`` holds the raw values, row 0 is all zeros.
    """

    users: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray
    line_order: np.ndarray
    user_ids: list
    item_ids: list
    indicators: np.ndarray
    specs: list

    @property
    def num_users(self) -> int:
        return len(self.user_ids)

    @property
    def num_items(self) -> int:
        return len(self.item_ids) - 1

    @property
    def num_interactions(self) -> int:
        return int(self.users.size)

    @property
    def n(self) -> int:
        return len(self.specs)

    def counts(self) -> dict:
        return {"users": self.num_users, "items": self.num_items,
                "interactions": self.num_interactions}


@dataclass
class UserSequence:
    user: int
    user_id: str
    items: np.ndarray
    indicators: np.ndarray  # raw values, shape (w, n), aligned with items

    @property
    def length(self) -> int:
        return int(self.items.size)

    @property
    def train_items(self) -> np.ndarray:
        return self.items[:-2]

    @property
    def train_indicators(self) -> np.ndarray:
        return self.indicators[:-2]

    @property
    def valid_item(self) -> int:
        return int(self.items[-2])

    @property
    def test_item(self) -> int:
        return int(self.items[-1])


def _sort_key(raw: str):
    try:
        return (0, int(raw), raw)
    except ValueError:
        return (1, 0, raw)


def _read_rows(path: Path, expected_first: str):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CorpusError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if not header or header[0] != expected_first:
            raise CorpusError(f"{path}:1: header must start with {expected_first!r}, got {header}")
        rows = [(reader.line_num, row) for row in reader if row]
    if not rows:
        raise CorpusError(f"{path}: no data rows")
    return header, rows


def read_indicator_specs(names: Sequence[str], spec_path: Optional[Path]) -> list:
    """Directions come from a sidecar JSON ``{name: "higher"|"lower"}`` or the defaults."""
    given = {}
    if spec_path is not None and Path(spec_path).exists():
        with open(spec_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        given = raw.get("directions", raw)
    specs = []
    for name in names:
        if name in given:
            try:
                direction = Direction(given[name])
            except ValueError:
                raise CorpusError(f"{spec_path}: bad direction {given[name]!r} for {name!r}") from None
        elif name.lower() in DEFAULT_DIRECTIONS:
            direction = DEFAULT_DIRECTIONS[name.lower()]
        else:
            raise CorpusError(f"indicator column {name!r} has no direction; supply a spec file")
        specs.append(IndicatorSpec(name, direction))
    return specs


def sidecar_spec_path(indicators_path: Path) -> Path:
    p = Path(indicators_path)
    return p.with_name(p.stem + ".spec.json")


def kcore_filter(users: np.ndarray, items: np.ndarray, k: int) -> np.ndarray:
    """Boolean keep-mask after repeatedly dropping users/items with < k interactions."""
    keep = np.ones(users.size, dtype=bool)
    while True:
        u_counts = np.bincount(users[keep], minlength=users.max(initial=0) + 1)
        i_counts = np.bincount(items[keep], minlength=items.max(initial=0) + 1)
        ok = keep & (u_counts[users] >= k) & (i_counts[items] >= k)
        if ok.sum() == keep.sum():
            return ok
        keep = ok


def load_corpus(
    interactions_path,
    indicators_path,
    min_interactions: int = DEFAULT_MIN_INTERACTIONS,
    spec_path=None,
) -> InteractionLog:
    interactions_path = Path(interactions_path)
    indicators_path = Path(indicators_path)
    header, rows = _read_rows(interactions_path, "user_id")
    if header != ["user_id", "item_id", "timestamp"]:
        raise CorpusError(f"{interactions_path}:1: expected header user_id,item_id,timestamp")
    raw_users, raw_items, stamps = [], [], []
    for line, row in rows:
        if len(row) != 3:
            raise CorpusError(f"{interactions_path}:{line}: expected 3 fields, got {len(row)}")
        try:
            ts = int(row[2])
        except ValueError:
            raise CorpusError(f"{interactions_path}:{line}: timestamp {row[2]!r} is not an integer") from None
        raw_users.append(row[0].strip())
        raw_items.append(row[1].strip())
        stamps.append(ts)

    ind_header, ind_rows = _read_rows(indicators_path, "item_id")
    names = ind_header[1:]
    if not names:
        raise CorpusError(f"{indicators_path}:1: no indicator columns")
    specs = read_indicator_specs(names, Path(spec_path) if spec_path else sidecar_spec_path(indicators_path))
    values = {}
    for line, row in ind_rows:
        if len(row) != len(ind_header):
            raise CorpusError(f"{indicators_path}:{line}: expected {len(ind_header)} fields, got {len(row)}")
        try:
            vec = [float(x) for x in row[1:]]
        except ValueError:
            raise CorpusError(f"{indicators_path}:{line}: non-numeric indicator value") from None
        if not all(math.isfinite(x) for x in vec):
            raise CorpusError(f"{indicators_path}:{line}: non-finite indicator value")
        if any(x < 0 for x in vec):
            raise CorpusError(f"{indicators_path}:{line}: negative indicator value (bins need g >= 0)")
        values[row[0].strip()] = vec

    missing = sorted(set(raw_items) - values.keys(), key=_sort_key)
    if missing:
        shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
        raise CorpusError(f"{len(missing)} interacted items have no indicator row: {shown}")

    u_vocab = {u: i for i, u in enumerate(sorted(set(raw_users), key=_sort_key))}
    i_vocab = {it: i for i, it in enumerate(sorted(set(raw_items), key=_sort_key))}
    u = np.fromiter((u_vocab[x] for x in raw_users), dtype=np.int64, count=len(raw_users))
    it = np.fromiter((i_vocab[x] for x in raw_items), dtype=np.int64, count=len(raw_items))
    keep = kcore_filter(u, it, min_interactions)
    if not keep.any():
        raise CorpusError(f"no interactions survive the {min_interactions}-core filter")

    u_names = np.array(sorted(u_vocab, key=u_vocab.get), dtype=object)
    i_names = np.array(sorted(i_vocab, key=i_vocab.get), dtype=object)
    kept_u = np.unique(u[keep])
    kept_i = np.unique(it[keep])
    u_map = np.full(len(u_vocab), -1, dtype=np.int64)
    u_map[kept_u] = np.arange(kept_u.size)
    i_map = np.full(len(i_vocab), -1, dtype=np.int64)
    i_map[kept_i] = np.arange(1, kept_i.size + 1)

    item_ids = [None] + list(i_names[kept_i])
    table = np.zeros((len(item_ids), len(names)))
    for idx, name in enumerate(item_ids[1:], start=1):
        table[idx] = values[name]
    result = InteractionLog(
        users=u_map[u[keep]],
        items=i_map[it[keep]],
        timestamps=np.asarray(stamps, dtype=np.int64)[keep],
        line_order=np.flatnonzero(keep),
        user_ids=list(u_names[kept_u]),
        item_ids=item_ids,
        indicators=table,
        specs=specs,
    )
    log.info("loaded corpus: %s", result.counts())
    return result


def build_sequences(log_: InteractionLog) -> list:
    """Chronological per-user sequences; equal timestamps keep file order."""
    order = np.lexsort((log_.line_order, log_.timestamps, log_.users))
    users = log_.users[order]
    items = log_.items[order]
    bounds = np.flatnonzero(np.diff(users)) + 1
    sequences, short = [], 0
    for chunk_users, chunk_items in zip(np.split(users, bounds), np.split(items, bounds)):
        if chunk_items.size < 3:
            short += 1
            continue
        user = int(chunk_users[0])
        sequences.append(UserSequence(user, log_.user_ids[user], chunk_items.copy(),
                                      log_.indicators[chunk_items]))
    if short:
        log.warning("excluded %d users with fewer than 3 interactions", short)
    return sequences


@dataclass
class NormalizedView:
    specs: list
    sequences: list = field(default_factory=list)  # normalized (w, n) arrays, aligned with input

    def apply(self, raw: np.ndarray) -> np.ndarray:
        return normalize_values(raw, self.specs)


def fit_specs(sequences: Sequence[UserSequence], specs: Sequence[IndicatorSpec]) -> list:
    """Record min/max of each indicator over training-prefix items."""
    train = [s.train_indicators for s in sequences if s.train_indicators.size]
    stacked = np.concatenate(train, axis=0) if train else np.zeros((0, len(specs)))
    out = []
    for j, spec in enumerate(specs):
        col = stacked[:, j]
        lo, hi = (float(col.min()), float(col.max())) if col.size else (0.0, 0.0)
        out.append(replace(spec, observed_min=lo, observed_max=hi))
    return out


def normalize_values(raw: np.ndarray, specs: Sequence[IndicatorSpec]) -> np.ndarray:
    """Map raw values to [0, 1] with 1 the greenest; constant columns map to 0.5."""
    raw = np.asarray(raw, dtype=np.float64)
    out = np.empty_like(raw)
    for j, spec in enumerate(specs):
        lo, hi = spec.observed_min, spec.observed_max
        col = raw[..., j]
        if not hi > lo:
            out[..., j] = 0.5
        elif spec.lower_is_greener:
            out[..., j] = (hi - col) / (hi - lo)
        else:
            out[..., j] = (col - lo) / (hi - lo)
    return np.clip(out, 0.0, 1.0)


def normalize_indicators(sequences: Sequence[UserSequence], specs: Sequence[IndicatorSpec]) -> NormalizedView:
    fitted = fit_specs(sequences, specs)
    return NormalizedView(fitted, [normalize_values(s.indicators, fitted) for s in sequences])


@dataclass
class ProfileRow:
    user_id: str
    mean: float
    variance: float


def user_green_profile(sequences: Sequence[UserSequence], specs: Sequence[IndicatorSpec],
                       normalized: Optional[NormalizedView] = None) -> dict:
    """Per indicator: (user, mean, population variance) over the training prefix,
    sorted ascending by mean (ties by user id)."""
    out = {}
    for j, spec in enumerate(specs):
        rows = []
        for k, s in enumerate(sequences):
            vals = (normalized.sequences[k][:-2, j] if normalized is not None
                    else s.train_indicators[:, j])
            rows.append(ProfileRow(s.user_id, float(vals.mean()), float(vals.var())))
        rows.sort(key=lambda r: (r.mean, _sort_key(str(r.user_id))))
        out[spec.name] = rows
    return out


def write_corpus(log_: InteractionLog, out_dir) -> None:
    """Write the filtered log back in the two-file input format plus a spec sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    order = np.argsort(log_.line_order, kind="stable")
    with open(out_dir / "interactions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "item_id", "timestamp"])
        for k in order:
            w.writerow([log_.user_ids[log_.users[k]], log_.item_ids[log_.items[k]], int(log_.timestamps[k])])
    with open(out_dir / "indicators.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["item_id"] + [s.name for s in log_.specs])
        for idx in range(1, len(log_.item_ids)):
            w.writerow([log_.item_ids[idx]] + [repr(float(x)) for x in log_.indicators[idx]])
    with open(out_dir / "indicators.spec.json", "w", encoding="utf-8") as fh:
        json.dump({s.name: s.direction.value for s in log_.specs}, fh, indent=2)


@dataclass
class Corpus:
    """Filtered log, its sequences, fitted indicator specs and per-item tables."""

    log: InteractionLog
    sequences: list
    specs: list
    raw_table: np.ndarray  # (num_items + 1, n)
    normalized_table: np.ndarray  # (num_items + 1, n), greener-is-higher in [0, 1]

    @classmethod
    def from_log(cls, log_: InteractionLog) -> "Corpus":
        sequences = build_sequences(log_)
        if not sequences:
            raise CorpusError("no user has the 3 interactions a leave-one-out split needs")
        specs = fit_specs(sequences, log_.specs)
        table = normalize_values(log_.indicators, specs)
        table[0] = 0.0
        return cls(log_, sequences, specs, log_.indicators, table)

    @property
    def num_items(self) -> int:
        return self.log.num_items

    @property
    def num_users(self) -> int:
        return self.log.num_users

    @property
    def n(self) -> int:
        return len(self.specs)

    def train_normalized(self) -> list:
        return [self.normalized_table[s.train_items] for s in self.sequences]

    def max_train_value(self) -> float:
        """Largest raw indicator value over training prefixes (sizes the bin table)."""
        return max((s.observed_max for s in self.specs), default=0.0)
