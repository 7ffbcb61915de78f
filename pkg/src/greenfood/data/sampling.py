from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .corpus import UserSequence

NORMAL = "normal"
GREEN_POSITIVE = "green_positive"
GREEN_NEGATIVE = "green_negative"


@dataclass(frozen=True)
class TrainingPair:
    """``first``/``second`` are (i+, i-) for normal pairs, (i1, i2) for green pairs."""

    user: int
    kind: str
    first: int
    second: int


@dataclass
class TrainingBatch:
    seq_index: np.ndarray  # index into the sequence list, one per sampled user
    users: np.ndarray
    contexts: list  # item-id arrays fed to the model, one per sampled user
    pairs: list


def make_rng(seed_or_rng: Union[int, np.random.Generator]) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def sample_uninteracted(rng: np.random.Generator, seen: set, num_items: int, k: int = 1) -> list:
    """``k`` distinct items drawn uniformly from ``1..num_items`` minus ``seen``."""
    if num_items - len(seen) < k:
        raise ValueError("not enough uninteracted items to sample from")
    picked: list = []
    while len(picked) < k:
        c = int(rng.integers(1, num_items + 1))
        if c not in seen and c not in picked:
            picked.append(c)
    return picked


def sample_batch(
    sequences: Sequence[UserSequence],
    batch_size: int,
    rng,
    num_items: int,
    green_pairs_per_step: int = 2,
) -> TrainingBatch:
    """Sample users without replacement and draw their training pairs.

    Each user contributes one normal pair (the item following a random cut of
    the training prefix against an uninteracted item), plus green pairs split
    between the interacted side and the uninteracted side. The model context
    for the user is the prefix before the cut.
    """
    rng = make_rng(rng)
    if batch_size > len(sequences):
        raise ValueError(f"batch_size {batch_size} exceeds user count {len(sequences)}")
    chosen = rng.choice(len(sequences), size=batch_size, replace=False)
    n_pos_side = green_pairs_per_step // 2
    n_neg_side = green_pairs_per_step - n_pos_side
    contexts, pairs = [], []
    for k in chosen:
        seq = sequences[k]
        train = seq.train_items
        seen = set(seq.items.tolist())
        if train.size >= 2:
            cut = int(rng.integers(1, train.size))
            context, positive = train[:cut], int(train[cut])
        else:
            context, positive = train, int(train[0])
        contexts.append(context)
        neg = sample_uninteracted(rng, seen, num_items)[0]
        pairs.append(TrainingPair(seq.user, NORMAL, positive, neg))

        distinct = np.unique(train)
        for _ in range(n_pos_side):
            if distinct.size < 2:
                break
            a, b = rng.choice(distinct, size=2, replace=False)
            pairs.append(TrainingPair(seq.user, GREEN_POSITIVE, int(a), int(b)))
        for _ in range(n_neg_side):
            a, b = sample_uninteracted(rng, seen, num_items, 2)
            pairs.append(TrainingPair(seq.user, GREEN_NEGATIVE, a, b))
    return TrainingBatch(
        seq_index=np.asarray(chosen),
        users=np.array([sequences[k].user for k in chosen], dtype=np.int64),
        contexts=contexts,
        pairs=pairs,
    )
