"""Gated multimodal fusion transformer with hand-written backpropagation.

Forward path: per-sentence gated fusion of text/audio features into a
2048-d token, sinusoidal positional encoding, a stack of encoder layers
with divided time/space attention, then a 750-d head on the last time
step. Training is plain MSE + Adam; gradients are exact reverse-mode,
validated against finite differences in float64 mode.

Two ablation variants are wired in as config flags: plain
concatenation+projection instead of the fusion gate, and a single
standard self-attention per layer instead of the divided pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import trmf

OUTPUT_DIM = 750


class NonFiniteError(FloatingPointError):
    pass


@dataclass
class ModelConfig:
    d_text: int = 768
    d_audio: int = 512
    d_model: int = 2048
    n_layers: int = 6
    n_heads: int = 1
    d_ff: int = 0  # 0 -> 2 * d_model
    window: int = 8
    out_dim: int = OUTPUT_DIM
    ablate_fusion: bool = False
    ablate_divided_attention: bool = False

    def __post_init__(self):
        if self.d_model % 2 != 0:
            raise ValueError("d_model must be even (fusion duplicates halves)")
        if self.d_model % self.n_heads != 0:
            raise ValueError("n_heads must divide d_model")
        if self.d_ff == 0:
            self.d_ff = 2 * self.d_model

    @property
    def d_proj(self) -> int:
        return self.d_model // 2


@dataclass
class FeatureWindow:
    """Oldest-to-newest rows of per-sentence text/audio features."""

    text: np.ndarray
    audio: np.ndarray

    def __post_init__(self):
        self.text = np.atleast_2d(np.asarray(self.text))
        self.audio = np.atleast_2d(np.asarray(self.audio))
        if self.text.shape[0] != self.audio.shape[0]:
            raise ValueError("text and audio windows must share the row count")

    @property
    def size(self) -> int:
        return self.text.shape[0]

    @staticmethod
    def zeros(cfg: ModelConfig, dtype=np.float32) -> "FeatureWindow":
        return FeatureWindow(
            np.zeros((cfg.window, cfg.d_text), dtype=dtype),
            np.zeros((cfg.window, cfg.d_audio), dtype=dtype),
        )


def slide_window(window: FeatureWindow, t_new: np.ndarray, a_new: np.ndarray) -> FeatureWindow:
    """Drop the oldest row, append the new pair as newest."""
    t_new = np.asarray(t_new).reshape(1, -1)
    a_new = np.asarray(a_new).reshape(1, -1)
    if t_new.shape[1] != window.text.shape[1] or a_new.shape[1] != window.audio.shape[1]:
        raise ValueError("new feature dimensions do not match the window")
    return FeatureWindow(
        np.concatenate([window.text[1:], t_new], axis=0),
        np.concatenate([window.audio[1:], a_new], axis=0),
    )


# ---------------------------------------------------------------------------
# parameters


def init_params(cfg: ModelConfig, seed: int = 0, dtype=np.float32) -> dict[str, np.ndarray]:
    """Seeded Gaussian init, std 1/sqrt(fan_in); layer norms at identity."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    dtype = np.dtype(dtype)

    def dense(name: str, fan_in: int, fan_out: int) -> None:
        # draw directly in the target dtype: the full-size model is ~1.3 GB
        # in float32 and must not pass through a float64 transient
        w = rng.standard_normal((fan_in, fan_out), dtype=dtype)
        w /= math.sqrt(fan_in)
        params[f"{name}_w"] = w
        params[f"{name}_b"] = np.zeros(fan_out, dtype=dtype)

    d, p = cfg.d_model, cfg.d_proj
    dense("fusion.text", cfg.d_text, p)
    dense("fusion.audio", cfg.d_audio, p)
    if cfg.ablate_fusion:
        dense("fusion.concat", 2 * p, d)
    else:
        dense("fusion.gate", 2 * p, 2)

    for layer in range(cfg.n_layers):
        pre = f"layers.{layer}"
        for nm in ("wq", "wk", "wv", "wo"):
            dense(f"{pre}.time.{nm}", d, d)
        if not cfg.ablate_divided_attention:
            proj = rng.standard_normal((d, d), dtype=dtype)
            proj /= math.sqrt(d)
            params[f"{pre}.space.proj"] = proj
            for nm in ("wq", "wk", "wv", "wo"):
                dense(f"{pre}.space.{nm}", d, d)
        params[f"{pre}.ln1.gamma"] = np.ones(d, dtype=dtype)
        params[f"{pre}.ln1.beta"] = np.zeros(d, dtype=dtype)
        dense(f"{pre}.ffn.up", d, cfg.d_ff)
        dense(f"{pre}.ffn.down", cfg.d_ff, d)
        params[f"{pre}.ln2.gamma"] = np.ones(d, dtype=dtype)
        params[f"{pre}.ln2.beta"] = np.zeros(d, dtype=dtype)

    dense("head", d, cfg.out_dim)
    return params


# ---------------------------------------------------------------------------
# building blocks

_LN_EPS = 1e-5


def positional_encode(seq: np.ndarray) -> np.ndarray:
    """Add standard sinusoidal encoding; positions counted from 0."""
    seq = np.asarray(seq)
    t, d = seq.shape[-2], seq.shape[-1]
    return seq + _positional_table(t, d, seq.dtype)


def _positional_table(t: int, d: int, dtype) -> np.ndarray:
    pos = np.arange(t, dtype=np.float64)[:, None]
    i = np.arange(0, d, 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, i / d)
    pe = np.zeros((t, d), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles[:, : pe[:, 1::2].shape[1]])
    return pe.astype(dtype)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, s, d = x.shape
    return x.reshape(b, s, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, s, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, s, h * dh)


def _attention_fwd(params, prefix, x, heads, cache):
    q = x @ params[f"{prefix}.wq_w"] + params[f"{prefix}.wq_b"]
    k = x @ params[f"{prefix}.wk_w"] + params[f"{prefix}.wk_b"]
    v = x @ params[f"{prefix}.wv_w"] + params[f"{prefix}.wv_b"]
    qh, kh, vh = (_split_heads(t, heads) for t in (q, k, v))
    scale = 1.0 / math.sqrt(qh.shape[-1])
    logits = (qh @ kh.transpose(0, 1, 3, 2)) * scale
    attn = _softmax(logits)
    ctx = _merge_heads(attn @ vh)
    out = ctx @ params[f"{prefix}.wo_w"] + params[f"{prefix}.wo_b"]
    if cache is not None:
        cache[prefix] = (x, qh, kh, vh, attn, ctx, scale)
    return out


def _attention_bwd(params, prefix, d_out, heads, cache, grads):
    x, qh, kh, vh, attn, ctx, scale = cache[prefix]
    grads[f"{prefix}.wo_w"] = ctx.reshape(-1, ctx.shape[-1]).T @ d_out.reshape(-1, d_out.shape[-1])
    grads[f"{prefix}.wo_b"] = d_out.sum(axis=(0, 1))
    d_ctx = _split_heads(d_out @ params[f"{prefix}.wo_w"].T, heads)

    d_attn = d_ctx @ vh.transpose(0, 1, 3, 2)
    d_vh = attn.transpose(0, 1, 3, 2) @ d_ctx
    # softmax backward, rows over the last axis
    d_logits = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True))
    d_qh = (d_logits @ kh) * scale
    d_kh = (d_logits.transpose(0, 1, 3, 2) @ qh) * scale

    d_x = np.zeros_like(x)
    flat_x = x.reshape(-1, x.shape[-1])
    for name, dh in (("wq", d_qh), ("wk", d_kh), ("wv", d_vh)):
        d_flat = _merge_heads(dh).reshape(-1, x.shape[-1])
        grads[f"{prefix}.{name}_w"] = flat_x.T @ d_flat
        grads[f"{prefix}.{name}_b"] = d_flat.sum(axis=0)
        d_x += (d_flat @ params[f"{prefix}.{name}_w"].T).reshape(x.shape)
    return d_x


def _layernorm_fwd(params, prefix, x, cache):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv
    out = xhat * params[f"{prefix}.gamma"] + params[f"{prefix}.beta"]
    if cache is not None:
        cache[prefix] = (xhat, inv)
    return out


def _layernorm_bwd(params, prefix, d_out, cache, grads):
    xhat, inv = cache[prefix]
    grads[f"{prefix}.gamma"] = (d_out * xhat).sum(axis=tuple(range(d_out.ndim - 1)))
    grads[f"{prefix}.beta"] = d_out.sum(axis=tuple(range(d_out.ndim - 1)))
    d_xhat = d_out * params[f"{prefix}.gamma"]
    mean_d = d_xhat.mean(axis=-1, keepdims=True)
    mean_dx = (d_xhat * xhat).mean(axis=-1, keepdims=True)
    return inv * (d_xhat - mean_d - xhat * mean_dx)


def _dense_fwd(params, name, x):
    return x @ params[f"{name}_w"] + params[f"{name}_b"]


def _dense_bwd(params, name, x, d_out, grads):
    flat_x = x.reshape(-1, x.shape[-1])
    flat_d = d_out.reshape(-1, d_out.shape[-1])
    grads[f"{name}_w"] = flat_x.T @ flat_d
    grads[f"{name}_b"] = flat_d.sum(axis=0)
    return (flat_d @ params[f"{name}_w"].T).reshape(x.shape)


# ---------------------------------------------------------------------------
# fusion


def fuse_modalities(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    t_feat: np.ndarray,
    a_feat: np.ndarray,
) -> np.ndarray:
    """Gate-fused 2048-d embedding for one (text, audio) pair."""
    out = _fusion_fwd(params, cfg, np.atleast_2d(t_feat), np.atleast_2d(a_feat), None)
    return out[0]


def _fusion_fwd(params, cfg, t_flat, a_flat, cache):
    """t_flat [M, d_text], a_flat [M, d_audio] -> [M, d_model]."""
    t_proj = _dense_fwd(params, "fusion.text", t_flat)
    a_proj = _dense_fwd(params, "fusion.audio", a_flat)
    concat = np.concatenate([t_proj, a_proj], axis=-1)
    if cfg.ablate_fusion:
        out = _dense_fwd(params, "fusion.concat", concat)
        if cache is not None:
            cache["fusion"] = (t_flat, a_flat, concat)
        return out
    gates = 1.0 / (1.0 + np.exp(-_dense_fwd(params, "fusion.gate", concat)))
    fused = gates[:, :1] * t_proj + gates[:, 1:] * a_proj
    out = np.concatenate([fused, fused], axis=-1)
    if cache is not None:
        cache["fusion"] = (t_flat, a_flat, t_proj, a_proj, concat, gates)
    return out


def _fusion_bwd(params, cfg, d_out, cache, grads):
    if cfg.ablate_fusion:
        t_flat, a_flat, concat = cache["fusion"]
        d_concat = _dense_bwd(params, "fusion.concat", concat, d_out, grads)
    else:
        t_flat, a_flat, t_proj, a_proj, concat, gates = cache["fusion"]
        p = cfg.d_proj
        d_fused = d_out[:, :p] + d_out[:, p:]
        d_gt = (d_fused * t_proj).sum(axis=-1, keepdims=True)
        d_ga = (d_fused * a_proj).sum(axis=-1, keepdims=True)
        d_tp = gates[:, :1] * d_fused
        d_ap = gates[:, 1:] * d_fused
        d_z = np.concatenate([d_gt, d_ga], axis=-1) * gates * (1.0 - gates)
        d_concat = _dense_bwd(params, "fusion.gate", concat, d_z, grads)
        d_concat = d_concat.copy()
        d_concat[:, :p] += d_tp
        d_concat[:, p:] += d_ap
    p = cfg.d_proj
    d_t = _dense_bwd(params, "fusion.text", t_flat, d_concat[:, :p], grads)
    d_a = _dense_bwd(params, "fusion.audio", a_flat, d_concat[:, p:], grads)
    return d_t, d_a


# ---------------------------------------------------------------------------
# encoder layers


def time_attention(params: dict, cfg: ModelConfig, layer: int, x: np.ndarray) -> np.ndarray:
    """Residual self-attention over the sequence axis (no normalization)."""
    return x + _attention_fwd(params, f"layers.{layer}.time", x, cfg.n_heads, None)


def space_attention(params: dict, cfg: ModelConfig, layer: int, x: np.ndarray) -> np.ndarray:
    """Feature-transformed attention wrapped in LayerNorm."""
    xs = x @ params[f"layers.{layer}.space.proj"]
    attended = _attention_fwd(params, f"layers.{layer}.space", xs, cfg.n_heads, None)
    return _layernorm_fwd(params, f"layers.{layer}.ln1", xs + attended, None)


def _layer_fwd(params, cfg, layer, x, cache):
    pre = f"layers.{layer}"
    if cfg.ablate_divided_attention:
        # single standard self-attention block
        x1 = _layernorm_fwd(
            params, f"{pre}.ln1", x + _attention_fwd(params, f"{pre}.time", x, cfg.n_heads, cache),
            cache,
        )
    else:
        xt = x + _attention_fwd(params, f"{pre}.time", x, cfg.n_heads, cache)
        xs = xt @ params[f"{pre}.space.proj"]
        if cache is not None:
            cache[f"{pre}.space_in"] = xt
        attended = _attention_fwd(params, f"{pre}.space", xs, cfg.n_heads, cache)
        x1 = _layernorm_fwd(params, f"{pre}.ln1", xs + attended, cache)

    hidden = _dense_fwd(params, f"{pre}.ffn.up", x1)
    relu = np.maximum(hidden, 0.0)
    ff = _dense_fwd(params, f"{pre}.ffn.down", relu)
    if cache is not None:
        cache[f"{pre}.ffn"] = (x1, hidden, relu)
    return _layernorm_fwd(params, f"{pre}.ln2", x1 + ff, cache)


def _layer_bwd(params, cfg, layer, d_out, cache, grads):
    pre = f"layers.{layer}"
    x1, hidden, relu = cache[f"{pre}.ffn"]
    d_sum = _layernorm_bwd(params, f"{pre}.ln2", d_out, cache, grads)
    d_relu = _dense_bwd(params, f"{pre}.ffn.down", relu, d_sum, grads)
    d_hidden = d_relu * (hidden > 0.0)
    d_x1 = d_sum + _dense_bwd(params, f"{pre}.ffn.up", x1, d_hidden, grads)

    if cfg.ablate_divided_attention:
        d_res = _layernorm_bwd(params, f"{pre}.ln1", d_x1, cache, grads)
        return d_res + _attention_bwd(params, f"{pre}.time", d_res, cfg.n_heads, cache, grads)

    d_res = _layernorm_bwd(params, f"{pre}.ln1", d_x1, cache, grads)
    d_xs = d_res + _attention_bwd(params, f"{pre}.space", d_res, cfg.n_heads, cache, grads)
    xt = cache[f"{pre}.space_in"]
    flat_xt = xt.reshape(-1, xt.shape[-1])
    grads[f"{pre}.space.proj"] = flat_xt.T @ d_xs.reshape(-1, d_xs.shape[-1])
    d_xt = (d_xs.reshape(-1, d_xs.shape[-1]) @ params[f"{pre}.space.proj"].T).reshape(xt.shape)
    return d_xt + _attention_bwd(params, f"{pre}.time", d_xt, cfg.n_heads, cache, grads)


# ---------------------------------------------------------------------------
# full model


def forward_batch(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    text: np.ndarray,
    audio: np.ndarray,
    cache: dict | None = None,
    check_finite: bool = False,
) -> np.ndarray:
    """text [B, N, d_text] + audio [B, N, d_audio] -> predictions [B, out_dim]."""
    b, n = text.shape[0], text.shape[1]
    fused = _fusion_fwd(
        params, cfg, text.reshape(b * n, -1), audio.reshape(b * n, -1), cache
    ).reshape(b, n, cfg.d_model)
    x = positional_encode(fused)
    if check_finite and not np.isfinite(x).all():
        raise NonFiniteError("non-finite values after fusion/positional encoding")
    for layer in range(cfg.n_layers):
        x = _layer_fwd(params, cfg, layer, x, cache)
        if check_finite and not np.isfinite(x).all():
            raise NonFiniteError(f"non-finite values in encoder layer {layer}")
    last = x[:, -1, :]
    if cache is not None:
        cache["last_in"] = last
        cache["shape"] = (b, n)
    return _dense_fwd(params, "head", last)


def forward(
    params: dict[str, np.ndarray], cfg: ModelConfig, window: FeatureWindow
) -> np.ndarray:
    """Predict the next 750-d action feature from a full window."""
    if window.size != cfg.window:
        raise ValueError(f"window has {window.size} rows, model expects {cfg.window}")
    dtype = params["head_w"].dtype
    out = forward_batch(
        params,
        cfg,
        window.text[None].astype(dtype, copy=False),
        window.audio[None].astype(dtype, copy=False),
        check_finite=True,
    )
    return out[0]


def backward_batch(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    cache: dict,
    d_pred: np.ndarray,
) -> dict[str, np.ndarray]:
    """Exact gradients for every parameter tensor; pair with forward_batch."""
    grads: dict[str, np.ndarray] = {}
    b, n = cache["shape"]
    d_last = _dense_bwd(params, "head", cache["last_in"], d_pred, grads)
    d_x = np.zeros((b, n, cfg.d_model), dtype=d_pred.dtype)
    d_x[:, -1, :] = d_last
    for layer in reversed(range(cfg.n_layers)):
        d_x = _layer_bwd(params, cfg, layer, d_x, cache, grads)
    # positional encoding is additive: gradient passes through unchanged
    _fusion_bwd(params, cfg, d_x.reshape(b * n, -1), cache, grads)
    return grads


def backward(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    window: FeatureWindow,
    target: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact gradients for a single (window, target) pair."""
    dtype = params["head_w"].dtype
    cache: dict = {}
    pred = forward_batch(
        params,
        cfg,
        window.text[None].astype(dtype, copy=False),
        window.audio[None].astype(dtype, copy=False),
        cache,
    )
    loss, d_pred = mse_loss(pred, np.asarray(target)[None].astype(dtype, copy=False))
    grads = backward_batch(params, cfg, cache, d_pred)
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient for tensor {name}")
    return loss, grads


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Batch-mean squared L2 error and its gradient w.r.t. pred."""
    pred = np.atleast_2d(pred)
    target = np.atleast_2d(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    batch = pred.shape[0]
    diff = pred - target
    loss = float((diff**2).sum() / batch)
    return loss, 2.0 * diff / batch


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    decay: float = 0.999
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    def decay_epoch(self) -> None:
        self.learning_rate *= self.decay


def adam_step(
    state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update, in place on `params`."""
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for name, g in grads.items():
        m = state.first_moment.get(name)
        if m is None:
            m = np.zeros_like(params[name])
            state.first_moment[name] = m
            state.second_moment[name] = np.zeros_like(params[name])
        v = state.second_moment[name]
        g = g.astype(params[name].dtype, copy=False)
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        params[name] -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 256
    learning_rate: float = 1e-4
    decay: float = 0.999
    seed: int = 0
    max_steps: int = 0  # 0 -> no cap


def train(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    dataset: list[tuple[FeatureWindow, np.ndarray]],
    tcfg: TrainConfig,
) -> tuple[dict[str, np.ndarray], dict[str, list[float]]]:
    """Mini-batch Adam on MSE; deterministic under tcfg.seed.

    Returns the trained params and a trace with per-step and per-epoch
    mean losses.
    """
    if not dataset:
        raise ValueError("training dataset is empty")
    dtype = params["head_w"].dtype
    text = np.stack([w.text for w, _ in dataset]).astype(dtype)
    audio = np.stack([w.audio for w, _ in dataset]).astype(dtype)
    targets = np.stack([np.asarray(t) for _, t in dataset]).astype(dtype)

    state = AdamState(learning_rate=tcfg.learning_rate, decay=tcfg.decay)
    rng = np.random.default_rng(tcfg.seed)
    step_loss: list[float] = []
    epoch_loss: list[float] = []
    steps = 0
    for _ in range(tcfg.epochs):
        order = rng.permutation(len(dataset))
        losses = []
        for start in range(0, len(dataset), tcfg.batch_size):
            idx = order[start : start + tcfg.batch_size]
            cache: dict = {}
            pred = forward_batch(params, cfg, text[idx], audio[idx], cache)
            loss, d_pred = mse_loss(pred, targets[idx])
            grads = backward_batch(params, cfg, cache, d_pred)
            adam_step(state, params, grads)
            losses.append(loss)
            step_loss.append(loss)
            steps += 1
            if tcfg.max_steps and steps >= tcfg.max_steps:
                break
        epoch_loss.append(float(np.mean(losses)))
        state.decay_epoch()
        if tcfg.max_steps and steps >= tcfg.max_steps:
            break
    return params, {"step_loss": step_loss, "epoch_loss": epoch_loss}


# ---------------------------------------------------------------------------
# checkpointing (TRMF modality 4)

_CONFIG_FIELDS = (
    "d_text", "d_audio", "d_model", "n_layers", "n_heads", "d_ff", "window",
    "out_dim", "ablate_fusion", "ablate_divided_attention",
)


def save_checkpoint(
    path,
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    adam: AdamState | None = None,
) -> None:
    tensors: dict[str, np.ndarray] = {}
    for name in _CONFIG_FIELDS:
        tensors[f"config.{name}"] = np.array(float(getattr(cfg, name)))
    tensors.update(params)
    if adam is not None:
        tensors["adam.step_count"] = np.array(float(adam.step_count))
        tensors["adam.learning_rate"] = np.array(adam.learning_rate)
        for name, m in adam.first_moment.items():
            tensors[f"adam.m.{name}"] = m
            tensors[f"adam.v.{name}"] = adam.second_moment[name]
    trmf.write_tensors(path, tensors)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], ModelConfig, AdamState | None]:
    tensors = trmf.read_tensors(path)
    kwargs = {}
    for name in _CONFIG_FIELDS:
        value = float(tensors.pop(f"config.{name}"))
        kwargs[name] = bool(value) if name.startswith("ablate_") else int(value)
    cfg = ModelConfig(**kwargs)

    adam = None
    if "adam.step_count" in tensors:
        adam = AdamState(
            learning_rate=float(tensors.pop("adam.learning_rate")),
            step_count=int(float(tensors.pop("adam.step_count"))),
        )
        for name in [k for k in tensors if k.startswith("adam.m.")]:
            pname = name[len("adam.m."):]
            adam.first_moment[pname] = tensors.pop(name)
            adam.second_moment[pname] = tensors.pop(f"adam.v.{pname}")
    return tensors, cfg, adam
