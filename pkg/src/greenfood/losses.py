"""Pairwise ranking losses: BPR-style normal loss and the two green losses.

Green deltas default to normalized greener-is-higher values, so the
direction fold for lower-is-greener indicators already happened during
normalization. Threshold gates always compare raw values.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data.corpus import Direction, IndicatorSpec
from .numcore import Tensor, ops

NON_PRIORITIZED = "nonprioritized"
PRIORITIZED = "prioritized"

# Plausible raw ranges for thresholds of the standard indicators.
BETA_RANGES = {"eis": (70.0, 120.0), "nis": (30.0, 50.0), "hmi": (30.0, 50.0)}


class LossConfigError(ValueError):
    pass


class ContractViolation(ValueError):
    pass


@dataclass
class GreenLossConfig:
    alpha: float = 0.9
    mode: str = NON_PRIORITIZED
    priority: list = field(default_factory=list)  # indicator indices, highest priority first
    beta: list = field(default_factory=list)  # raw-scale thresholds, by indicator index
    lower_is_greener: list = field(default_factory=list)
    raw_green_deltas: bool = False
    all_pass_zero: bool = False

    def validate(self, n: Optional[int] = None) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise LossConfigError(f"alpha={self.alpha} outside [0, 1]")
        if self.mode not in (NON_PRIORITIZED, PRIORITIZED):
            raise LossConfigError(f"unknown green loss mode {self.mode!r}")
        n = len(self.lower_is_greener) if n is None else n
        if self.mode == PRIORITIZED:
            if sorted(self.priority) != list(range(n)):
                raise LossConfigError(f"priority {self.priority} is not a permutation of {n} indicators")
            if len(self.beta) != n:
                raise LossConfigError(f"need {n} thresholds, got {len(self.beta)}")

    @classmethod
    def from_names(cls, specs: Sequence[IndicatorSpec], alpha: float = 0.9, mode: str = NON_PRIORITIZED,
                   priority: Sequence[str] = (), beta: Optional[dict] = None, **flags) -> "GreenLossConfig":
        names = [s.name for s in specs]
        unknown = [p for p in priority if p not in names]
        if unknown:
            raise LossConfigError(f"priority names {unknown} not among indicators {names}")
        beta = beta or {}
        missing = [nm for nm in names if nm not in beta]
        if mode == PRIORITIZED and missing:
            raise LossConfigError(f"missing beta for {missing}")
        cfg = cls(
            alpha=alpha,
            mode=mode,
            priority=[names.index(p) for p in priority] if priority else list(range(len(names))),
            beta=[float(beta[nm]) if nm in beta else float("nan") for nm in names],
            lower_is_greener=[s.direction is Direction.LOWER_GREENER for s in specs],
            **flags,
        )
        cfg.validate(len(names))
        return cfg


def normal_loss(pos: Tensor, neg: Tensor) -> Tensor:
    """Batch mean of ``-log sigmoid(y+ - y-)``."""
    if pos.size == 0:
        raise ValueError("normal_loss needs at least one pair")
    return ops.neg(ops.mean(ops.log_sigmoid(ops.sub(pos, neg))))


def green_delta(first: np.ndarray, second: np.ndarray, lower_is_greener: Optional[Sequence[bool]] = None,
                raw: bool = False) -> np.ndarray:
    """Signed per-indicator gap, positive when the first item is greener.

    On normalized values this is a plain difference. With ``raw=True`` the
    difference is flipped for lower-is-greener indicators.
    """
    delta = np.asarray(first, dtype=np.float64) - np.asarray(second, dtype=np.float64)
    if raw and lower_is_greener is not None:
        delta = np.where(np.asarray(lower_is_greener), -delta, delta)
    return delta


def passes_threshold(first: np.ndarray, second: np.ndarray, beta: np.ndarray,
                     lower_is_greener: np.ndarray) -> np.ndarray:
    """Both items at least as green as the threshold, per indicator (raw values)."""
    hi = np.maximum(first, second) <= beta
    lo = np.minimum(first, second) >= beta
    return np.where(lower_is_greener, hi, lo)


def validity_gate(first_raw: np.ndarray, second_raw: np.ndarray, config: GreenLossConfig) -> np.ndarray:
    """D(j) for one pair or a batch of pairs (..., n) -> (..., n) of 0/1.

    The first indicator in priority order whose threshold fails is active.
    When every threshold passes the lowest-priority indicator is active,
    unless ``all_pass_zero`` restores the all-zero behaviour.
    """
    first_raw = np.asarray(first_raw, dtype=np.float64)
    second_raw = np.asarray(second_raw, dtype=np.float64)
    order = np.asarray(config.priority)
    ok = passes_threshold(first_raw, second_raw, np.asarray(config.beta), np.asarray(config.lower_is_greener))
    ok_ranked = ok[..., order]
    fails = ~ok_ranked
    any_fail = fails.any(axis=-1)
    first_fail = np.argmax(fails, axis=-1)
    chosen_rank = np.where(any_fail, first_fail, len(order) - 1)
    gate = np.zeros(ok.shape, dtype=np.int64)
    idx = order[chosen_rank]
    np.put_along_axis(gate, idx[..., None], 1, axis=-1)
    if config.all_pass_zero:
        gate = gate * any_fail[..., None]
    return gate


def _green_terms(y1: Tensor, y2: Tensor, deltas: np.ndarray) -> Tensor:
    """(P, n) tensor of log sigmoid(delta_j * (y1 - y2))."""
    gap = ops.reshape(ops.sub(y1, y2), (-1, 1))
    return ops.log_sigmoid(ops.mul(gap, np.asarray(deltas, dtype=np.float64)))


def nonprioritized_green_loss(y1: Tensor, y2: Tensor, deltas: np.ndarray) -> Tensor:
    """Mean over pairs of ``-sum_j log sigmoid(delta_j (y1 - y2))``."""
    if y1.size == 0:
        raise ValueError("green loss needs at least one pair")
    terms = _green_terms(y1, y2, deltas)
    return ops.neg(ops.mul(ops.sum(terms), 1.0 / y1.size))


def prioritized_green_loss(y1: Tensor, y2: Tensor, deltas: np.ndarray, gate: np.ndarray) -> Tensor:
    """Like the non-prioritized loss but each term is multiplied by D(j)."""
    if y1.size == 0:
        raise ValueError("green loss needs at least one pair")
    terms = _green_terms(y1, y2, deltas)
    return ops.neg(ops.mul(ops.sum(ops.mul(terms, np.asarray(gate, dtype=np.float64))), 1.0 / y1.size))


def total_loss(normal: Tensor, green: Optional[Tensor], alpha: float) -> Tensor:
    if not 0.0 <= alpha <= 1.0:
        raise LossConfigError(f"alpha={alpha} outside [0, 1]")
    if green is None or alpha == 1.0:
        return normal if alpha == 1.0 else ops.mul(normal, alpha)
    if alpha == 0.0:
        return green
    return ops.add(ops.mul(normal, alpha), ops.mul(green, 1.0 - alpha))


def check_same_side(pairs, interacted: dict) -> None:
    """Raise if a green pair mixes interacted and uninteracted items.

    ``interacted`` maps user -> set of interacted item ids.
    """
    for p in pairs:
        if p.kind == "normal":
            continue
        seen = interacted[p.user]
        if (p.first in seen) != (p.second in seen):
            raise ContractViolation(f"green pair ({p.first}, {p.second}) for user {p.user} crosses sides")


def priority_orders(n: int) -> list:
    return [list(p) for p in itertools.permutations(range(n))]
