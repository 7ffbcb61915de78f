"""Item/indicator embeddings, stacked integrated-attention layers and the P-weighted head.

Channels are the item sequence ``i`` plus one sequence per indicator
``g1..gn``. Each layer projects every channel per head, builds self- and
cross-attention matrices, fuses them with a learned softmax weighting plus a
sigmoid gate, applies the causal/padding mask and the target channel's
values, then merges heads through ``W_x`` and a two-layer FFN.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..numcore import Tensor, ops
from .config import ModelConfig
from .preference import init_P


@dataclass
class SequenceBatch:
    items: np.ndarray  # (B, w_max) item ids, left padded with 0
    bins: np.ndarray  # (B, w_max, n) indicator bins
    valid: np.ndarray  # (B, w_max) bool

    @property
    def size(self) -> int:
        return self.items.shape[0]


@dataclass
class ForwardOutput:
    finals: list  # per channel, (B, d) Tensor at the last position
    layers: list  # per channel, (B, w_max, d) Tensor after the last layer


def indicator_bins(raw: np.ndarray, delta: float, num_bins: int) -> np.ndarray:
    """Bin ``floor(g / delta)``, clamped to the table's top bin."""
    raw = np.asarray(raw, dtype=np.float64)
    if (raw < 0).any():
        raise ValueError("indicator values must be >= 0 to be binned")
    return np.minimum(np.floor(raw / delta).astype(np.int64), num_bins - 1)


def bins_needed(max_value: float, delta: float) -> int:
    return int(np.floor(max_value / delta)) + 1


def make_batch(contexts: Sequence[np.ndarray], item_bins: np.ndarray, config: ModelConfig) -> SequenceBatch:
    """Truncate each context to its last ``w_max`` items and left-pad with 0."""
    b, w = len(contexts), config.w_max
    items = np.zeros((b, w), dtype=np.int64)
    for k, ctx in enumerate(contexts):
        ctx = np.asarray(ctx, dtype=np.int64)[-w:]
        if ctx.size:
            items[k, w - ctx.size:] = ctx
    return SequenceBatch(items, item_bins[items], items != 0)


def attention_mask(valid: np.ndarray) -> np.ndarray:
    """(B, 1, w, w): causal, real keys only; padded queries see just themselves."""
    w = valid.shape[1]
    causal = np.tril(np.ones((w, w), dtype=bool))
    allowed = causal[None] & valid[:, None, :]
    allowed |= np.eye(w, dtype=bool)[None] & ~valid[:, :, None]
    return allowed[:, None]


def item_pairs(channels: Sequence[str]) -> list:
    """Self pairs first, then ordered cross pairs."""
    return [(x, x) for x in channels] + [(x, y) for x in channels for y in channels if x != y]


def init_params(
    config: ModelConfig,
    rng: np.random.Generator,
    train_normalized: Optional[Sequence] = None,
    users: Optional[Sequence[int]] = None,
) -> dict:
    d, h = config.d, config.ffn_hidden
    scale = 1.0 / np.sqrt(d)

    def param(name, value, trainable=True):
        return name, Tensor(value, requires_grad=trainable, name=name)

    out = []
    table = rng.normal(scale=scale, size=(config.num_items + 1, d))
    table[0] = 0.0
    out.append(param("item_table", table))
    if config.n:
        out.append(param("indicator_table", rng.normal(scale=scale, size=(config.num_bins, d))))
    chans = config.channels
    for layer in range(config.layers):
        pre = f"sia{layer}"
        for x in chans:
            for kind in ("q", "k", "v"):
                out.append(param(f"{pre}.{x}.{kind}", rng.normal(scale=scale, size=(d, d))))
        if config.per_pair_projections:
            for x, y in item_pairs(chans)[len(chans):]:
                out.append(param(f"{pre}.{x}>{y}.q", rng.normal(scale=scale, size=(d, d))))
                out.append(param(f"{pre}.{x}>{y}.k", rng.normal(scale=scale, size=(d, d))))
        out.append(param(f"{pre}.r_item", np.zeros(len(chans) ** 2)))
        out.append(param(f"{pre}.gate_item.w", np.ones((config.heads, 1, 1))))
        out.append(param(f"{pre}.gate_item.b", np.zeros((config.heads, 1, 1))))
        if config.n:
            out.append(param(f"{pre}.r_green", np.zeros(config.n ** 2)))
            out.append(param(f"{pre}.gate_green.w", np.ones((config.heads, 1, 1))))
            out.append(param(f"{pre}.gate_green.b", np.zeros((config.heads, 1, 1))))
        for x in chans:
            out.append(param(f"{pre}.{x}.out", rng.normal(scale=scale, size=(d, d))))
            out.append(param(f"{pre}.{x}.ffn1.w", rng.normal(scale=scale, size=(d, h))))
            out.append(param(f"{pre}.{x}.ffn1.b", np.zeros(h)))
            out.append(param(f"{pre}.{x}.ffn2.w", rng.normal(scale=1.0 / np.sqrt(h), size=(h, d))))
            out.append(param(f"{pre}.{x}.ffn2.b", np.zeros(d)))
    p, trainable = init_P(config.p_variant, config.num_users, config.n, train_normalized, users, rng)
    out.append(param("P", p, trainable))
    return dict(out)


def embed_sequences(params: dict, batch: SequenceBatch, config: ModelConfig) -> list:
    """One (B, w_max, d) tensor per channel; padded rows are zero."""
    keep = batch.valid[..., None].astype(np.float64)
    embs = [ops.embedding_lookup(params["item_table"], batch.items)]
    for j in range(config.n):
        embs.append(ops.mul(ops.embedding_lookup(params["indicator_table"], batch.bins[..., j]), keep))
    return embs


def _split_heads(x: Tensor, config: ModelConfig) -> Tensor:
    b, w, _ = x.shape
    return ops.transpose(ops.reshape(x, (b, w, config.heads, config.head_dim)), (0, 2, 1, 3))


def _merge_heads(x: Tensor, config: ModelConfig) -> Tensor:
    b, _, w, _ = x.shape
    return ops.reshape(ops.transpose(x, (0, 2, 1, 3)), (b, w, config.d))


def fuse(r: Tensor, matrices: Sequence[Tensor], gate_w: Tensor, gate_b: Tensor) -> Tensor:
    """softmax(r)-weighted sum of attention matrices, then ``sigmoid(F*w + b) * F``."""
    weights = ops.softmax(r)
    k = len(matrices)
    stacked = ops.stack(matrices, axis=0)
    fused = ops.sum(ops.mul(stacked, ops.reshape(weights, (k,) + (1,) * (stacked.ndim - 1))), axis=0)
    gate = ops.sigmoid(ops.add(ops.mul(fused, gate_w), gate_b))
    return ops.mul(gate, fused)


def _ffn(x: Tensor, params: dict, pre: str) -> Tensor:
    hidden = ops.relu(ops.add(ops.matmul(x, params[f"{pre}.ffn1.w"]), params[f"{pre}.ffn1.b"]))
    return ops.add(ops.matmul(hidden, params[f"{pre}.ffn2.w"]), params[f"{pre}.ffn2.b"])


def attention_matrices(embs: Sequence[Tensor], params: dict, layer: int, config: ModelConfig) -> tuple:
    """Return ``({(x, y): A_xy}, {x: V_x})`` for one layer, heads split."""
    pre = f"sia{layer}"
    chans = config.channels
    q = {x: _split_heads(ops.matmul(e, params[f"{pre}.{x}.q"]), config) for x, e in zip(chans, embs)}
    k = {x: _split_heads(ops.matmul(e, params[f"{pre}.{x}.k"]), config) for x, e in zip(chans, embs)}
    v = {x: _split_heads(ops.matmul(e, params[f"{pre}.{x}.v"]), config) for x, e in zip(chans, embs)}
    by_name = dict(zip(chans, embs))
    scale = 1.0 / np.sqrt(config.head_dim) if config.attention_scaling else None
    mats = {}
    for x, y in item_pairs(chans):
        if x != y and config.per_pair_projections:
            qx = _split_heads(ops.matmul(by_name[x], params[f"{pre}.{x}>{y}.q"]), config)
            ky = _split_heads(ops.matmul(by_name[y], params[f"{pre}.{x}>{y}.k"]), config)
        else:
            qx, ky = q[x], k[y]
        a = ops.matmul(qx, ops.swap_last(ky))
        mats[(x, y)] = ops.mul(a, scale) if scale is not None else a
    return mats, v


def sia_forward(embs: Sequence[Tensor], params: dict, layer: int, config: ModelConfig,
                batch: SequenceBatch) -> list:
    pre = f"sia{layer}"
    chans = config.channels
    mask = attention_mask(batch.valid)
    mats, values = attention_matrices(embs, params, layer, config)

    fused_item = fuse(params[f"{pre}.r_item"], [mats[p] for p in item_pairs(chans)],
                      params[f"{pre}.gate_item.w"], params[f"{pre}.gate_item.b"])
    probs = {"i": ops.masked_softmax(fused_item, mask)}
    if config.n:
        fused_green = fuse(params[f"{pre}.r_green"], [mats[p] for p in item_pairs(chans[1:])],
                           params[f"{pre}.gate_green.w"], params[f"{pre}.gate_green.b"])
        green_probs = ops.masked_softmax(fused_green, mask)
        for x in chans[1:]:
            probs[x] = green_probs

    keep = batch.valid[..., None].astype(np.float64)
    out = []
    for x, e in zip(chans, embs):
        merged = _merge_heads(ops.matmul(probs[x], values[x]), config)
        y = _ffn(ops.matmul(merged, params[f"{pre}.{x}.out"]), params, f"{pre}.{x}")
        if config.residual:
            y = ops.add(e, y)
        out.append(ops.mul(y, keep))
    return out


def forward(params: dict, batch: SequenceBatch, config: ModelConfig) -> ForwardOutput:
    embs = embed_sequences(params, batch, config)
    for layer in range(config.layers):
        embs = sia_forward(embs, params, layer, config, batch)
    last = (slice(None), -1, slice(None))
    return ForwardOutput([ops.getitem(e, last) for e in embs], embs)


def p_rows(params: dict, users: np.ndarray) -> np.ndarray:
    users = np.asarray(users, dtype=np.int64)
    return np.zeros_like(users) if params["P"].shape[0] == 1 else users


def score_candidates(out: ForwardOutput, users: np.ndarray, candidates: np.ndarray, params: dict,
                     item_bins: np.ndarray) -> Tensor:
    """Scores (B, K): per-channel affinities with the candidate's embeddings, weighted by P[u]."""
    candidates = np.asarray(candidates, dtype=np.int64)
    affinities = [ops.sum(ops.mul(ops.reshape(out.finals[0], (-1, 1, out.finals[0].shape[-1])),
                                  ops.embedding_lookup(params["item_table"], candidates)), axis=-1)]
    for j, e in enumerate(out.finals[1:]):
        emb = ops.embedding_lookup(params["indicator_table"], item_bins[candidates, j])
        affinities.append(ops.sum(ops.mul(ops.reshape(e, (-1, 1, e.shape[-1])), emb), axis=-1))
    stacked = ops.stack(affinities, axis=-1)
    weights = ops.embedding_lookup(params["P"], p_rows(params, users))
    return ops.sum(ops.mul(stacked, ops.reshape(weights, (weights.shape[0], 1, -1))), axis=-1)


def score_all(out: ForwardOutput, users: np.ndarray, params: dict, item_bins: np.ndarray) -> np.ndarray:
    """Scores (B, num_items + 1) for every catalog item; column 0 is padding."""
    finals = [f.value for f in out.finals]
    pu = params["P"].value[p_rows(params, users)]
    scores = pu[:, :1] * (finals[0] @ params["item_table"].value.T)
    if len(finals) > 1:
        table_t = params["indicator_table"].value.T
        for j, e in enumerate(finals[1:]):
            scores = scores + pu[:, j + 1:j + 2] * (e @ table_t)[:, item_bins[:, j]]
    return scores
