from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .. import losses as L
from ..data.corpus import Corpus
from ..data.sampling import GREEN_NEGATIVE, GREEN_POSITIVE, NORMAL, sample_batch
from ..model import (
    ModelConfig,
    bins_needed,
    forward,
    init_params,
    make_batch,
    project_P,
    score_candidates,
)
from ..numcore import Adam, Tape, Tensor, backward, ops
from .metrics import DEFAULT_CUTOFFS, EvalReport, corpus_item_bins, evaluate

log = logging.getLogger(__name__)

# Named sub-streams derived from the run seed.
STREAM_INIT = 1
STREAM_SAMPLING = 2


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 50
    patience: int = 10
    l2: float = 0.0
    seed: int = 0
    eval_cutoffs: tuple = DEFAULT_CUTOFFS
    green_pairs_per_step: int = 2

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.green_pairs_per_step < 0:
            raise ValueError("green_pairs_per_step must be >= 0")


@dataclass
class EpochLog:
    epoch: int
    loss: float
    normal_loss: float
    green_loss: float
    valid_hr10: float
    valid_ndcg10: float


@dataclass
class TrainResult:
    config: ModelConfig
    params: dict
    history: list = field(default_factory=list)
    best_epoch: int = 0
    valid_report: Optional[EvalReport] = None
    test_report: Optional[EvalReport] = None


def model_config_for(corpus: Corpus, **hyper) -> ModelConfig:
    """Size tables from the corpus: items, users, indicator count and bins."""
    delta = float(hyper.get("delta", 5.0))
    return ModelConfig(
        num_items=corpus.num_items,
        num_users=corpus.num_users,
        n=corpus.n,
        num_bins=bins_needed(corpus.max_train_value(), delta) if corpus.n else 1,
        **hyper,
    )


def _candidates(batch, k_green: int) -> tuple:
    """Per-user candidate matrix [i+, i-, green pairs...] and the green pair slots.

    Users within a batch are distinct, so each pair maps to its user's row.
    """
    width = 2 + 2 * k_green
    cand = np.ones((len(batch.users), width), dtype=np.int64)
    row_of = {int(u): r for r, u in enumerate(batch.users)}
    fill = np.full(len(batch.users), 2)
    green = []  # (row, col1, col2, item1, item2)
    for p in batch.pairs:
        r = row_of[p.user]
        if p.kind == NORMAL:
            cand[r, 0], cand[r, 1] = p.first, p.second
        elif p.kind in (GREEN_POSITIVE, GREEN_NEGATIVE):
            c = fill[r]
            cand[r, c], cand[r, c + 1] = p.first, p.second
            fill[r] += 2
            green.append((r, c, c + 1, p.first, p.second))
    return cand, np.array(green, dtype=np.int64).reshape(-1, 5)


class Trainer:
    """Owns parameters, optimizer and RNG streams for one training run."""

    def __init__(self, corpus: Corpus, model_config: ModelConfig, loss_config: L.GreenLossConfig,
                 train_config: TrainConfig):
        train_config.validate()
        loss_config.validate(corpus.n)
        self.corpus = corpus
        self.mcfg = model_config
        self.lcfg = loss_config
        self.tcfg = train_config
        seed = int(train_config.seed)
        self.init_rng = np.random.default_rng([seed, STREAM_INIT])
        self.sample_rng = np.random.default_rng([seed, STREAM_SAMPLING])
        self.params = init_params(model_config, self.init_rng, corpus.train_normalized(),
                                  [s.user for s in corpus.sequences])
        self.optimizer = Adam(self.params, lr=train_config.learning_rate, l2=train_config.l2)
        self.item_bins = corpus_item_bins(corpus, model_config)
        self.step_count = 0

    def loss_components(self, batch) -> tuple:
        """Build (total, normal, green) on the active tape for one sampled batch."""
        corpus = self.corpus
        k_green = self.tcfg.green_pairs_per_step
        sb = make_batch(batch.contexts, self.item_bins, self.mcfg)
        out = forward(self.params, sb, self.mcfg)
        cand, green = _candidates(batch, k_green)
        scores = score_candidates(out, batch.users, cand, self.params, self.item_bins)
        normal = L.normal_loss(ops.getitem(scores, (slice(None), 0)), ops.getitem(scores, (slice(None), 1)))
        green_loss = None
        if corpus.n and self.lcfg.alpha < 1.0 and green.shape[0]:
            rows, c1, c2, i1, i2 = green.T
            y1 = ops.getitem(scores, (rows, c1))
            y2 = ops.getitem(scores, (rows, c2))
            if self.lcfg.raw_green_deltas:
                deltas = L.green_delta(corpus.raw_table[i1], corpus.raw_table[i2],
                                       self.lcfg.lower_is_greener, raw=True)
            else:
                deltas = L.green_delta(corpus.normalized_table[i1], corpus.normalized_table[i2])
            if self.lcfg.mode == L.PRIORITIZED:
                gate = L.validity_gate(corpus.raw_table[i1], corpus.raw_table[i2], self.lcfg)
                green_loss = L.prioritized_green_loss(y1, y2, deltas, gate)
            else:
                green_loss = L.nonprioritized_green_loss(y1, y2, deltas)
        total = L.total_loss(normal, green_loss, self.lcfg.alpha)
        return total, normal, green_loss

    def step(self) -> tuple:
        batch_size = min(self.tcfg.batch_size, len(self.corpus.sequences))
        batch = sample_batch(self.corpus.sequences, batch_size, self.sample_rng, self.corpus.num_items,
                             self.tcfg.green_pairs_per_step)
        with Tape() as tape:
            total, normal, green = self.loss_components(batch)
        parts = (float(total.value), float(normal.value), float(green.value) if green is not None else 0.0)
        if not all(math.isfinite(x) for x in parts):
            raise TrainingError(f"non-finite loss at step {self.step_count}: "
                                f"total={parts[0]} normal={parts[1]} green={parts[2]}")
        backward(total, tape)
        self.params["item_table"].grad[0] = 0.0
        self.optimizer.step()
        self.params["item_table"].value[0] = 0.0
        if self.params["P"].requires_grad:
            project_P(self.params["P"].value)
        self.step_count += 1
        return parts

    def run_epoch(self) -> tuple:
        steps = math.ceil(len(self.corpus.sequences) / min(self.tcfg.batch_size, len(self.corpus.sequences)))
        acc = np.zeros(3)
        for _ in range(steps):
            acc += self.step()
        return tuple(float(x) for x in acc / steps)

    def snapshot(self) -> dict:
        return {k: p.value.copy() for k, p in self.params.items()}

    def restore(self, snap: dict) -> None:
        for k, v in snap.items():
            self.params[k].value = v.copy()


def train(
    corpus: Corpus,
    model_config: ModelConfig,
    loss_config: L.GreenLossConfig,
    train_config: TrainConfig,
    on_epoch: Optional[Callable[[EpochLog], None]] = None,
) -> TrainResult:
    """Train with early stopping on validation NDCG@10; keep the best epoch's parameters."""
    trainer = Trainer(corpus, model_config, loss_config, train_config)
    history = []
    best, best_epoch, best_snap = -1.0, 0, trainer.snapshot()
    for epoch in range(1, train_config.max_epochs + 1):
        loss, normal, green = trainer.run_epoch()
        valid = evaluate(trainer.params, model_config, corpus, "valid", (10,))
        entry = EpochLog(epoch, loss, normal, green, valid.cutoffs[10].hr, valid.cutoffs[10].ndcg)
        history.append(entry)
        log.info("epoch %d loss=%.5f valid_ndcg@10=%.5f", epoch, loss, entry.valid_ndcg10)
        if on_epoch is not None:
            on_epoch(entry)
        if entry.valid_ndcg10 > best:
            best, best_epoch, best_snap = entry.valid_ndcg10, epoch, trainer.snapshot()
        elif epoch - best_epoch >= train_config.patience:
            break
    trainer.restore(best_snap)
    meta = {"seed": train_config.seed, "epoch": best_epoch}
    cutoffs = train_config.eval_cutoffs
    return TrainResult(
        config=model_config,
        params=trainer.params,
        history=history,
        best_epoch=best_epoch,
        valid_report=evaluate(trainer.params, model_config, corpus, "valid", cutoffs, meta),
        test_report=evaluate(trainer.params, model_config, corpus, "test", cutoffs, meta),
    )


def history_rows(history) -> list:
    return [asdict(h) for h in history]
