"""Masked multi-head self-attention with an analytic backward pass.

The pre-softmax map is multiplicative: A = (Q K^T * M) / sqrt(d_head).
Zero mask entries therefore pin scores to 0 (softmax still assigns them
exp(0) weight) rather than pruning pairs the way additive -inf masking
would. With M all-ones the layer reduces to plain attention through the
identical arithmetic path.

Block layout per layer: per-head attention, concatenation, output
projection, residual connection (skipped when input and output widths
differ, which can only happen at layer 1), then parameter-free layer
normalization. There is no feed-forward sublayer. The mask is a constant
with respect to gradients.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .graphs import Graph
from .masks import MASK_MODES, build_mask
from .spectral import NumericalError

LN_EPS = 1e-5

CHECKPOINT_FORMAT = "sfgt-checkpoint-v1"


@dataclass(frozen=True)
class ModelConfig:
    """Shapes, depth, mask mode, and init seed of a classifier model."""

    feature_dim: int
    hidden_dim: int
    head_dim: int
    heads: int
    layers: int
    num_classes: int
    mask_mode: str = "full"
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.feature_dim, self.hidden_dim, self.head_dim, self.heads, self.num_classes) < 1:
            raise ValueError("all dimensions must be >= 1")
        if self.layers < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers}")
        if self.heads * self.head_dim != self.hidden_dim:
            raise ValueError(
                f"heads * head_dim must equal hidden_dim "
                f"({self.heads} * {self.head_dim} != {self.hidden_dim})"
            )
        if self.mask_mode not in MASK_MODES:
            raise ValueError(f"mask_mode must be one of {MASK_MODES}, got {self.mask_mode!r}")

    def layer_input_dim(self, layer: int) -> int:
        return self.feature_dim if layer == 0 else self.hidden_dim


@dataclass
class LayerParams:
    """Per-head projections and the output projection of one layer."""

    w_q: list[np.ndarray]
    w_k: list[np.ndarray]
    w_v: list[np.ndarray]
    w_o: np.ndarray


@dataclass
class AttentionParams:
    """All trainable arrays: attention layers plus the classifier head."""

    layers: list[LayerParams]
    w_cls: np.ndarray
    b_cls: np.ndarray


def named_arrays(params: AttentionParams) -> list[tuple[str, np.ndarray]]:
    """(name, array) pairs in a fixed, documented order; the order defines
    checkpoint field order and the finite-difference sweep order."""
    pairs: list[tuple[str, np.ndarray]] = []
    for l, layer in enumerate(params.layers):
        for h in range(len(layer.w_q)):
            pairs.append((f"layer{l}.head{h}.w_q", layer.w_q[h]))
            pairs.append((f"layer{l}.head{h}.w_k", layer.w_k[h]))
            pairs.append((f"layer{l}.head{h}.w_v", layer.w_v[h]))
        pairs.append((f"layer{l}.w_o", layer.w_o))
    pairs.append(("classifier.weight", params.w_cls))
    pairs.append(("classifier.bias", params.b_cls))
    return pairs


def map_arrays(fn, *params: AttentionParams) -> AttentionParams:
    """Apply ``fn`` elementwise across structurally identical parameter
    records, producing a new record."""
    first = params[0]
    layers = []
    for l, layer in enumerate(first.layers):
        layers.append(
            LayerParams(
                w_q=[fn(*(p.layers[l].w_q[h] for p in params)) for h in range(len(layer.w_q))],
                w_k=[fn(*(p.layers[l].w_k[h] for p in params)) for h in range(len(layer.w_k))],
                w_v=[fn(*(p.layers[l].w_v[h] for p in params)) for h in range(len(layer.w_v))],
                w_o=fn(*(p.layers[l].w_o for p in params)),
            )
        )
    return AttentionParams(
        layers=layers,
        w_cls=fn(*(p.w_cls for p in params)),
        b_cls=fn(*(p.b_cls for p in params)),
    )


def zeros_like_params(params: AttentionParams) -> AttentionParams:
    return map_arrays(np.zeros_like, params)


def add_scaled(params: AttentionParams, delta: AttentionParams, scale: float) -> AttentionParams:
    """params + scale * delta, as a new record (gradient-descent step)."""
    return map_arrays(lambda a, b: a + scale * b, params, delta)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(cfg: ModelConfig) -> AttentionParams:
    """Glorot-uniform weights (entries in [-a, a], a = sqrt(6/(fan_in +
    fan_out))), zero classifier bias; deterministic for a fixed seed."""
    rng = np.random.default_rng(cfg.seed)
    layers = []
    for l in range(cfg.layers):
        d_in = cfg.layer_input_dim(l)
        layers.append(
            LayerParams(
                w_q=[_glorot(rng, d_in, cfg.head_dim) for _ in range(cfg.heads)],
                w_k=[_glorot(rng, d_in, cfg.head_dim) for _ in range(cfg.heads)],
                w_v=[_glorot(rng, d_in, cfg.head_dim) for _ in range(cfg.heads)],
                w_o=_glorot(rng, cfg.heads * cfg.head_dim, cfg.hidden_dim),
            )
        )
    return AttentionParams(
        layers=layers,
        w_cls=_glorot(rng, cfg.hidden_dim, cfg.num_classes),
        b_cls=np.zeros(cfg.num_classes),
    )


def project_qkv(
    x: np.ndarray, params: AttentionParams, layer: int, head: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Plain projections Q = X W_Q, K = X W_K, V = X W_V (no bias)."""
    x = np.asarray(x, dtype=np.float64)
    lp = params.layers[layer]
    if x.ndim != 2 or x.shape[1] != lp.w_q[head].shape[0]:
        raise ValueError(
            f"layer {layer} expects n x {lp.w_q[head].shape[0]} input, got {x.shape}"
        )
    return x @ lp.w_q[head], x @ lp.w_k[head], x @ lp.w_v[head]


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def attention_scores(q: np.ndarray, k: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Pre-softmax map (Q K^T * M) / sqrt(d_head); a zero mask entry pins
    the score to exactly 0."""
    return (q @ k.T) * mask / np.sqrt(q.shape[1])


def masked_attention_forward(
    q: np.ndarray, k: np.ndarray, v: np.ndarray, mask: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Single-head masked attention.

    Rows of :func:`attention_scores` are softmax-normalized with per-row
    max subtraction. Returns (output, attention map); every attention row
    sums to 1.
    """
    q, k, v, mask = (np.asarray(a, dtype=np.float64) for a in (q, k, v, mask))
    n, d_head = q.shape
    if k.shape != (n, d_head) or v.shape[0] != n or mask.shape != (n, n):
        raise ValueError(
            f"inconsistent shapes: q={q.shape} k={k.shape} v={v.shape} mask={mask.shape}"
        )
    for name, a in (("q", q), ("k", k), ("v", v), ("mask", mask)):
        if not np.all(np.isfinite(a)):
            raise NumericalError(f"non-finite entries in {name}")
    if np.any(mask < 0):
        raise ValueError("mask entries must be nonnegative")
    attn = _softmax_rows(attention_scores(q, k, mask))
    return attn @ v, attn


def _layer_forward(x: np.ndarray, lp: LayerParams, mask: np.ndarray) -> tuple[np.ndarray, dict]:
    heads = len(lp.w_q)
    qs, ks, vs, attns, outs = [], [], [], [], []
    for h in range(heads):
        q, k, v = x @ lp.w_q[h], x @ lp.w_k[h], x @ lp.w_v[h]
        out, attn = masked_attention_forward(q, k, v, mask)
        qs.append(q)
        ks.append(k)
        vs.append(v)
        attns.append(attn)
        outs.append(out)
    concat = np.concatenate(outs, axis=1)
    proj = concat @ lp.w_o
    residual = proj.shape == x.shape
    pre_norm = proj + x if residual else proj
    mu = pre_norm.mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(pre_norm.var(axis=1, keepdims=True) + LN_EPS)
    normed = (pre_norm - mu) * inv_std
    cache = {
        "x": x,
        "q": qs,
        "k": ks,
        "v": vs,
        "attn": attns,
        "concat": concat,
        "residual": residual,
        "inv_std": inv_std,
        "normed": normed,
        "mask": mask,
    }
    return normed, cache


def multi_head_forward(
    x: np.ndarray, params: AttentionParams, layer: int, mask: np.ndarray
) -> np.ndarray:
    """One attention block: heads, concat, W_O, residual (when widths
    match), layer normalization. The mask is shared across heads."""
    x = np.asarray(x, dtype=np.float64)
    out, _ = _layer_forward(x, params.layers[layer], np.asarray(mask, dtype=np.float64))
    return out


def forward_with_mask(
    x: np.ndarray, mask: np.ndarray, params: AttentionParams, cfg: ModelConfig
) -> tuple[np.ndarray, dict]:
    """Full forward pass given a precomputed mask; returns (logits, cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (x.shape[0], cfg.feature_dim):
        raise ValueError(f"expected n x {cfg.feature_dim} features, got {x.shape}")
    mask = np.asarray(mask, dtype=np.float64)
    hidden = x
    layer_caches = []
    for l in range(cfg.layers):
        hidden, cache = _layer_forward(hidden, params.layers[l], mask)
        layer_caches.append(cache)
    pool = hidden.mean(axis=0)
    logits = pool @ params.w_cls + params.b_cls
    return logits, {"layers": layer_caches, "pool": pool, "logits": logits, "n": x.shape[0]}


def model_forward(
    g: Graph, x: np.ndarray, params: AttentionParams, cfg: ModelConfig
) -> np.ndarray:
    """Class logits for one graph; the mask comes from cfg.mask_mode and
    the input features, then stays fixed across the layer stack."""
    mask = build_mask(g, x, cfg.mask_mode)
    logits, _ = forward_with_mask(x, mask, params, cfg)
    return logits


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def cross_entropy(logits: np.ndarray, target: int) -> float:
    """Stable -log softmax(logits)[target]."""
    shifted = logits - logits.max()
    return float(np.log(np.sum(np.exp(shifted))) - shifted[target])


def _layer_backward(
    d_out: np.ndarray, lp: LayerParams, cache: dict, grads: LayerParams
) -> np.ndarray:
    # layer norm (no affine): dr = inv_std * (g - mean(g) - y * mean(g * y))
    y = cache["normed"]
    d_pre = cache["inv_std"] * (
        d_out
        - d_out.mean(axis=1, keepdims=True)
        - y * (d_out * y).mean(axis=1, keepdims=True)
    )
    x = cache["x"]
    d_x = d_pre.copy() if cache["residual"] else np.zeros_like(x)
    grads.w_o += cache["concat"].T @ d_pre
    d_concat = d_pre @ lp.w_o.T
    heads = len(lp.w_q)
    d_head = lp.w_q[0].shape[1]
    scale = 1.0 / np.sqrt(d_head)
    for h in range(heads):
        d_ho = d_concat[:, h * d_head : (h + 1) * d_head]
        attn = cache["attn"][h]
        d_attn = d_ho @ cache["v"][h].T
        d_v = attn.T @ d_ho
        d_scores = attn * (d_attn - np.sum(d_attn * attn, axis=1, keepdims=True))
        d_qk = d_scores * cache["mask"] * scale
        d_q = d_qk @ cache["k"][h]
        d_k = d_qk.T @ cache["q"][h]
        grads.w_q[h] += x.T @ d_q
        grads.w_k[h] += x.T @ d_k
        grads.w_v[h] += x.T @ d_v
        d_x += d_q @ lp.w_q[h].T + d_k @ lp.w_k[h].T + d_v @ lp.w_v[h].T
    return d_x


def backward_from_cache(
    cache: dict, params: AttentionParams, cfg: ModelConfig, target: int
) -> AttentionParams:
    """Analytic cross-entropy gradients for every parameter, given the
    cache of :func:`forward_with_mask`. The mask is treated as constant."""
    grads = zeros_like_params(params)
    d_logits = softmax(cache["logits"])
    d_logits[target] -= 1.0
    grads.w_cls += np.outer(cache["pool"], d_logits)
    grads.b_cls += d_logits
    n = cache["n"]
    d_hidden = np.tile((params.w_cls @ d_logits) / n, (n, 1))
    for l in range(cfg.layers - 1, -1, -1):
        d_hidden = _layer_backward(d_hidden, params.layers[l], cache["layers"][l], grads.layers[l])
    return grads


def backward(
    g: Graph, x: np.ndarray, params: AttentionParams, cfg: ModelConfig, target: int
) -> AttentionParams:
    """Forward plus analytic backward for one graph and target class."""
    mask = build_mask(g, x, cfg.mask_mode)
    _, cache = forward_with_mask(x, mask, params, cfg)
    return backward_from_cache(cache, params, cfg, target)


def loss_and_gradients(
    x: np.ndarray, mask: np.ndarray, params: AttentionParams, cfg: ModelConfig, target: int
) -> tuple[float, AttentionParams]:
    """Cross-entropy loss and its gradients for a precomputed mask."""
    logits, cache = forward_with_mask(x, mask, params, cfg)
    return cross_entropy(logits, target), backward_from_cache(cache, params, cfg, target)


def save_checkpoint(params: AttentionParams, cfg: ModelConfig, path: str | Path) -> None:
    """Single JSON document of named arrays with shape headers, in the
    deterministic :func:`named_arrays` order."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": asdict(cfg),
        "arrays": {
            name: {"shape": list(a.shape), "data": [float(v) for v in a.ravel()]}
            for name, a in named_arrays(params)
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[AttentionParams, ModelConfig]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
    cfg = ModelConfig(**doc["config"])
    params = init_params(cfg)
    for name, arr in named_arrays(params):
        entry = doc["arrays"][name]
        data = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if data.shape != arr.shape:
            raise ValueError(f"checkpoint array {name} has shape {data.shape}, expected {arr.shape}")
        arr[...] = data
    return params, cfg
