"""Full-catalog ranking, HR/NDCG and mean-indicator metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ..data.corpus import Corpus
from ..model import ModelConfig, forward, indicator_bins, make_batch, score_all

DEFAULT_CUTOFFS = (5, 10, 20)
EVAL_CHUNK = 256


def rank_all(scores: np.ndarray, exclude: Iterable[int] = ()) -> np.ndarray:
    """Item ids 1..len(scores)-1 minus ``exclude``, by descending score, ties by id."""
    ids = np.arange(1, len(scores))
    excl = np.fromiter(exclude, dtype=np.int64)
    if excl.size:
        ids = ids[~np.isin(ids, excl)]
    return ids[np.lexsort((ids, -np.asarray(scores)[ids]))]


def target_rank(scores: np.ndarray, blocked: np.ndarray, target: int) -> int:
    """1-based rank ``rank_all`` would give ``target``; 0 if it is excluded."""
    if blocked[target]:
        return 0
    s = scores[target]
    ids = np.arange(scores.size)
    ahead = ~blocked & ((scores > s) | ((scores == s) & (ids < target)))
    return int(ahead.sum()) + 1


def top_n(scores: np.ndarray, blocked: np.ndarray, n: int) -> np.ndarray:
    """The first ``n`` entries of ``rank_all`` without sorting the whole catalog."""
    avail = np.flatnonzero(~blocked)
    n = min(n, avail.size)
    if n == 0:
        return avail[:0]
    vals = scores[avail]
    kth = np.partition(vals, vals.size - n)[vals.size - n]
    cand = avail[vals >= kth]
    return cand[np.lexsort((cand, -scores[cand]))][:n]


def hr_ndcg_from_ranks(ranks: np.ndarray, n: int) -> tuple:
    """``ranks`` are 1-based; 0 marks a target that cannot be hit."""
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        raise ValueError("no users to evaluate")
    hit = (ranks >= 1) & (ranks <= n)
    gains = np.zeros(ranks.shape)
    gains[hit] = 1.0 / np.log2(ranks[hit] + 1.0)
    return float(hit.mean()), float(gains.mean())


def hr_ndcg_at_n(rankings: Sequence[np.ndarray], targets: Sequence[int], n: int) -> tuple:
    if len(rankings) != len(targets):
        raise ValueError(f"{len(targets)} targets but {len(rankings)} rankings")
    ranks = []
    for ranking, t in zip(rankings, targets):
        if ranking is None:
            raise ValueError("user is missing a ranking")
        pos = np.flatnonzero(np.asarray(ranking) == t)
        ranks.append(int(pos[0]) + 1 if pos.size else 0)
    return hr_ndcg_from_ranks(np.array(ranks), n)


def mean_indicator_at_n(rankings: Sequence[np.ndarray], table: np.ndarray, n: int) -> np.ndarray:
    """Mean over users of the mean indicator value of each user's top-n items."""
    per_user = [table[np.asarray(r)[:n]].mean(axis=0) for r in rankings]
    return np.mean(per_user, axis=0)


@dataclass
class CutoffMetrics:
    hr: float
    ndcg: float
    indicators: dict = field(default_factory=dict)  # raw means by name
    greenness: dict = field(default_factory=dict)  # normalized (greener = higher) means by name

    @property
    def mean_greenness(self) -> float:
        return float(np.mean(list(self.greenness.values()))) if self.greenness else float("nan")


@dataclass
class EvalReport:
    split: str
    cutoffs: dict  # N -> CutoffMetrics
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "metadata": self.metadata,
            "cutoffs": {str(k): {"hr": m.hr, "ndcg": m.ndcg, "indicators": m.indicators,
                                 "greenness": m.greenness} for k, m in sorted(self.cutoffs.items())},
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "EvalReport":
        cutoffs = {int(k): CutoffMetrics(v["hr"], v["ndcg"], dict(v["indicators"]), dict(v["greenness"]))
                   for k, v in raw["cutoffs"].items()}
        return cls(raw["split"], cutoffs, dict(raw.get("metadata", {})))


def eval_contexts(corpus: Corpus, split: str) -> tuple:
    """(contexts, targets) for the validation or test split."""
    if split == "valid":
        return [s.train_items for s in corpus.sequences], [s.valid_item for s in corpus.sequences]
    if split == "test":
        return [s.items[:-1] for s in corpus.sequences], [s.test_item for s in corpus.sequences]
    raise ValueError(f"unknown split {split!r}")


def evaluate(
    params: dict,
    config: ModelConfig,
    corpus: Corpus,
    split: str = "test",
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
    metadata: Optional[dict] = None,
) -> EvalReport:
    """Rank the full catalog (minus training-prefix items) for every user."""
    cutoffs = sorted(set(int(c) for c in cutoffs))
    item_bins = corpus_item_bins(corpus, config)
    contexts, targets = eval_contexts(corpus, split)
    users = np.array([s.user for s in corpus.sequences], dtype=np.int64)
    top = max(cutoffs)
    ranks = np.zeros(len(targets), dtype=np.int64)
    tops = []
    for start in range(0, len(targets), EVAL_CHUNK):
        stop = min(start + EVAL_CHUNK, len(targets))
        batch = make_batch(contexts[start:stop], item_bins, config)
        out = forward(params, batch, config)
        scores = score_all(out, users[start:stop], params, item_bins)
        for row, k in enumerate(range(start, stop)):
            blocked = np.zeros(scores.shape[1], dtype=bool)
            blocked[0] = True
            blocked[corpus.sequences[k].train_items] = True
            ranks[k] = target_rank(scores[row], blocked, targets[k])
            tops.append(top_n(scores[row], blocked, top))
    result = {}
    for n in cutoffs:
        hr, ndcg = hr_ndcg_from_ranks(ranks, n)
        raw = mean_indicator_at_n(tops, corpus.raw_table, n) if corpus.n else np.zeros(0)
        norm = mean_indicator_at_n(tops, corpus.normalized_table, n) if corpus.n else np.zeros(0)
        result[n] = CutoffMetrics(
            hr, ndcg,
            {s.name: float(v) for s, v in zip(corpus.specs, raw)},
            {s.name: float(v) for s, v in zip(corpus.specs, norm)},
        )
    return EvalReport(split, result, dict(metadata or {}))


def corpus_item_bins(corpus: Corpus, config: ModelConfig) -> np.ndarray:
    if not corpus.n:
        return np.zeros((corpus.num_items + 1, 0), dtype=np.int64)
    return indicator_bins(corpus.raw_table, config.delta, config.num_bins)
