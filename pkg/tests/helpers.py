"""Shared builders for model-level tests."""
import numpy as np

from greenfood import losses as L
from greenfood.model import ModelConfig, forward, init_params, make_batch, score_candidates
from greenfood.numcore import ops


def tiny_model(n=2, d=4, heads=2, w_max=3, num_items=6, num_users=3, num_bins=4, p_variant="P_rand",
               seed=0, **kw):
    """Config, params and a per-item bin table for a hand-sized model."""
    config = ModelConfig(num_items=num_items, num_users=num_users, n=n, num_bins=num_bins, d=d, heads=heads,
                         w_max=w_max, p_variant=p_variant, **kw)
    rng = np.random.default_rng(seed)
    params = init_params(config, rng)
    # break the symmetric initial values so every block has a non-trivial gradient
    for name, p in params.items():
        if name.endswith((".b", "r_item", "r_green")) or ".gate_" in name:
            p.value = p.value + rng.normal(scale=0.3, size=p.value.shape)
    item_bins = rng.integers(0, num_bins, size=(num_items + 1, n))
    item_bins[0] = 0
    return config, params, item_bins


def tiny_loss(config, params, item_bins, contexts, users, candidates, deltas=None):
    """Closure building normal loss plus a green loss over the candidate columns."""
    users = np.asarray(users)
    candidates = np.asarray(candidates)

    def loss():
        batch = make_batch(contexts, item_bins, config)
        out = forward(params, batch, config)
        scores = score_candidates(out, users, candidates, params, item_bins)
        total = L.normal_loss(ops.getitem(scores, (slice(None), 0)), ops.getitem(scores, (slice(None), 1)))
        if deltas is not None:
            green = L.nonprioritized_green_loss(ops.getitem(scores, (slice(None), 2)),
                                                ops.getitem(scores, (slice(None), 3)), deltas)
            total = L.total_loss(total, green, 0.6)
        return total

    return loss


def np_single_channel(x, params, config, valid):
    """Plain-numpy single-channel layer: masked gated self-attention, W_out, FFN."""
    pre = "sia0.i"
    b, w, d = x.shape
    m, dh = config.heads, config.head_dim

    def heads(t):
        return t.reshape(b, w, m, dh).transpose(0, 2, 1, 3)

    q, k, v = (heads(x @ params[f"{pre}.{s}"].value) for s in ("q", "k", "v"))
    a = q @ k.transpose(0, 1, 3, 2)
    if config.attention_scaling:
        a = a / np.sqrt(dh)
    gw, gb = params["sia0.gate_item.w"].value, params["sia0.gate_item.b"].value
    fused = a / (1.0 + np.exp(-(a * gw + gb)))
    allowed = np.tril(np.ones((w, w), dtype=bool))[None] & valid[:, None, :]
    allowed |= np.eye(w, dtype=bool)[None] & ~valid[:, :, None]
    logits = np.where(allowed[:, None], fused, -np.inf)
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    probs = e / e.sum(axis=-1, keepdims=True)
    merged = (probs @ v).transpose(0, 2, 1, 3).reshape(b, w, d)
    y = merged @ params[f"{pre}.out"].value
    hidden = np.maximum(y @ params[f"{pre}.ffn1.w"].value + params[f"{pre}.ffn1.b"].value, 0.0)
    y = hidden @ params[f"{pre}.ffn2.w"].value + params[f"{pre}.ffn2.b"].value
    return y * valid[..., None]
