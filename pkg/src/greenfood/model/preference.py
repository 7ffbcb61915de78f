"""Initialization and simplex projection of the user preference matrix P."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .config import P_VARIANTS

P_EPSILON = 1e-3


def _normalize_rows(p: np.ndarray) -> np.ndarray:
    return p / p.sum(axis=1, keepdims=True)


def _mean_var_row(normalized: np.ndarray, eps: float) -> np.ndarray:
    """[1, mu_1*var_1 + eps, ..., mu_n*var_n + eps] for a (w, n) block."""
    mu = normalized.mean(axis=0)
    var = normalized.var(axis=0)
    return np.concatenate([[1.0], mu * var + eps])


def init_P(
    variant: str,
    num_users: int,
    n: int,
    train_normalized: Optional[Sequence] = None,
    users: Optional[Sequence[int]] = None,
    rng: Optional[np.random.Generator] = None,
    eps: float = P_EPSILON,
) -> tuple:
    """Return ``(P, trainable)``.

    ``train_normalized[k]`` is the (w_k, n) normalized indicator block of
    the training prefix of user ``users[k]``. Shared variants (``PN``,
    ``PN_rand``) return a single row that every user indexes.
    """
    c = n + 1
    if variant not in P_VARIANTS:
        raise ValueError(f"unknown P variant {variant!r}; expected one of {P_VARIANTS}")
    if variant == "Pone":
        return np.full((num_users, c), 1.0 / c), False
    if variant in ("PN_rand", "P_rand"):
        if rng is None:
            raise ValueError(f"{variant} needs an rng")
        rows = 1 if variant == "PN_rand" else num_users
        return _normalize_rows(rng.uniform(size=(rows, c))), True
    if train_normalized is None:
        raise ValueError(f"{variant} needs training-prefix indicator statistics")
    if variant == "PN":
        pooled = np.concatenate([np.asarray(b).reshape(-1, n) for b in train_normalized], axis=0)
        return _normalize_rows(_mean_var_row(pooled, eps)[None, :]), True
    # P_grape: users without a sequence keep the zero-variance row.
    p = np.tile(np.concatenate([[1.0], np.full(n, eps)]), (num_users, 1))
    for u, block in zip(users, train_normalized):
        p[u] = _mean_var_row(np.asarray(block).reshape(-1, n), eps)
    return _normalize_rows(p), True


def project_P(p: np.ndarray, tol: float = 1e-12) -> None:
    """Clamp negatives and renormalize rows in place; untouched if already on the simplex."""
    neg = p < 0
    if neg.any():
        p[neg] = 0.0
    sums = p.sum(axis=1)
    bad = np.abs(sums - 1.0) > tol
    if not bad.any():
        return
    zero = bad & (sums <= 0)
    p[zero] = 1.0 / p.shape[1]
    fix = bad & ~zero
    p[fix] = p[fix] / sums[fix, None]
