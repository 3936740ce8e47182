"""Seeded toy encoder-decoder transformer split between edge and cloud.

The edge holds prenet + a truncated encoder + the full decoder + postnet;
the cloud holds an independently initialized full-depth encoder. All
parameters are drawn from one seeded stream, uniform in [-a, a] with
a = 1/sqrt(d_model), in a fixed order, so builds are reproducible down to
the bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .audio import TTS_FRAME_HOP, TTS_SAMPLE_RATE, MelSpec
from .tensors import ShapeMismatch, Tensor, quantize_linear

BOS = 0
EOS = 0

LN_EPS = 1e-5


class Task(IntEnum):
    STT = 1
    TTS = 2


class InvalidConfig(ValueError):
    pass


class InputTooLong(ValueError):
    pass


class TokenOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    task: Task
    n_enc_layers_full: int
    n_enc_layers_edge: int
    n_dec_layers: int
    n_mel: int
    d_model: int = 64
    n_heads: int = 4
    vocab_size: int = 128
    max_src_len: int = 512
    max_tgt_len: int = 128
    enc_fixed_len: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.d_model <= 0 or self.d_model % self.n_heads != 0:
            raise InvalidConfig(f"d_model {self.d_model} not divisible by {self.n_heads} heads")
        if not 1 <= self.n_enc_layers_edge <= self.n_enc_layers_full:
            raise InvalidConfig(
                f"edge layers {self.n_enc_layers_edge} must lie in [1, {self.n_enc_layers_full}]"
            )
        if self.n_dec_layers < 1:
            raise InvalidConfig("need at least one decoder layer")
        if self.n_mel < 1 or self.vocab_size < 2:
            raise InvalidConfig("n_mel must be >= 1 and vocab_size >= 2")
        if self.max_src_len < 1 or self.max_tgt_len < 1:
            raise InvalidConfig("sequence length caps must be >= 1")
        if self.task is Task.STT and (self.enc_fixed_len is None or self.enc_fixed_len < 1):
            raise InvalidConfig("stt config requires enc_fixed_len >= 1")

    @property
    def d_ff(self) -> int:
        return 4 * self.d_model

    @classmethod
    def from_mapping(cls, m: dict) -> "ModelConfig":
        known = {
            "task": lambda s: Task[str(s).upper()],
            "n_enc_layers_full": int,
            "n_enc_layers_edge": int,
            "n_dec_layers": int,
            "n_mel": int,
            "d_model": int,
            "n_heads": int,
            "vocab_size": int,
            "max_src_len": int,
            "max_tgt_len": int,
            "enc_fixed_len": int,
            "seed": int,
        }
        kwargs = {}
        for key, raw in m.items():
            if key not in known:
                raise InvalidConfig(f"unknown model config key {key!r}")
            try:
                kwargs[key] = known[key](raw)
            except (ValueError, KeyError):
                raise InvalidConfig(f"bad value for {key}: {raw!r}") from None
        return cls(**kwargs)


@dataclass(frozen=True)
class HiddenStates:
    """Encoder output [T, d_model] tagged with where it was computed."""

    tensor: Tensor
    origin: str  # "edge" or "cloud"


@dataclass(frozen=True)
class DecodeResult:
    task: Task
    n_steps: int
    tokens: list[int] | None = None
    step_logprobs: np.ndarray | None = None
    mel: MelSpec | None = None
    stop_probs: np.ndarray | None = None


@dataclass(frozen=True)
class SplitModel:
    config: ModelConfig
    edge_params: dict[str, Tensor]
    cloud_params: dict[str, Tensor]
    edge_quantized: dict[str, Tensor] | None = field(default=None, compare=False)


def _enc_layer_shapes(prefix: str, d: int, d_ff: int):
    yield f"{prefix}.ln1.g", (d,)
    yield f"{prefix}.ln1.b", (d,)
    for name in ("wq", "wk", "wv", "wo"):
        yield f"{prefix}.attn.{name}", (d, d)
        yield f"{prefix}.attn.b{name[1]}", (d,)
    yield f"{prefix}.ln2.g", (d,)
    yield f"{prefix}.ln2.b", (d,)
    yield f"{prefix}.ff.w1", (d, d_ff)
    yield f"{prefix}.ff.b1", (d_ff,)
    yield f"{prefix}.ff.w2", (d_ff, d)
    yield f"{prefix}.ff.b2", (d,)


def _dec_layer_shapes(prefix: str, d: int, d_ff: int):
    yield f"{prefix}.ln1.g", (d,)
    yield f"{prefix}.ln1.b", (d,)
    for name in ("wq", "wk", "wv", "wo"):
        yield f"{prefix}.self.{name}", (d, d)
        yield f"{prefix}.self.b{name[1]}", (d,)
    yield f"{prefix}.ln2.g", (d,)
    yield f"{prefix}.ln2.b", (d,)
    for name in ("wq", "wk", "wv", "wo"):
        yield f"{prefix}.cross.{name}", (d, d)
        yield f"{prefix}.cross.b{name[1]}", (d,)
    yield f"{prefix}.ln3.g", (d,)
    yield f"{prefix}.ln3.b", (d,)
    yield f"{prefix}.ff.w1", (d, d_ff)
    yield f"{prefix}.ff.b1", (d_ff,)
    yield f"{prefix}.ff.w2", (d_ff, d)
    yield f"{prefix}.ff.b2", (d,)


def _encoder_shapes(n_layers: int, d: int, d_ff: int):
    for i in range(n_layers):
        yield from _enc_layer_shapes(f"enc.{i}", d, d_ff)
    yield "enc.final_ln.g", (d,)
    yield "enc.final_ln.b", (d,)


def param_shapes(cfg: ModelConfig) -> tuple[list, list]:
    """(edge, cloud) lists of (name, shape) in draw order."""
    d, d_ff = cfg.d_model, cfg.d_ff
    edge = []
    if cfg.task is Task.STT:
        edge.append(("prenet.proj.w", (cfg.n_mel, d)))
        edge.append(("prenet.proj.b", (d,)))
    else:
        edge.append(("prenet.embed.w", (cfg.vocab_size, d)))
    edge.extend(_encoder_shapes(cfg.n_enc_layers_edge, d, d_ff))
    if cfg.task is Task.STT:
        edge.append(("dec.embed.w", (cfg.vocab_size, d)))
    else:
        edge.append(("dec.prenet.w", (cfg.n_mel, d)))
        edge.append(("dec.prenet.b", (d,)))
    for i in range(cfg.n_dec_layers):
        edge.extend(_dec_layer_shapes(f"dec.{i}", d, d_ff))
    edge.append(("dec.final_ln.g", (d,)))
    edge.append(("dec.final_ln.b", (d,)))
    if cfg.task is Task.STT:
        edge.append(("postnet.out.w", (d, cfg.vocab_size)))
        edge.append(("postnet.out.b", (cfg.vocab_size,)))
    else:
        edge.append(("postnet.mel.w", (d, cfg.n_mel)))
        edge.append(("postnet.mel.b", (cfg.n_mel,)))
        edge.append(("postnet.stop.w", (d,)))
        edge.append(("postnet.stop.b", (1,)))
    cloud = list(_encoder_shapes(cfg.n_enc_layers_full, d, d_ff))
    return edge, cloud


def build_split_model(cfg: ModelConfig) -> SplitModel:
    """Draw edge params first, then cloud params, from one seeded stream."""
    rng = np.random.default_rng(cfg.seed)
    a = 1.0 / math.sqrt(cfg.d_model)
    edge_shapes, cloud_shapes = param_shapes(cfg)

    def draw(shapes):
        return {
            name: Tensor(rng.uniform(-a, a, shape).astype(np.float32))
            for name, shape in shapes
        }

    return SplitModel(cfg, draw(edge_shapes), draw(cloud_shapes))


def param_count(model: SplitModel, part: str = "edge") -> int:
    """Scalar parameter totals; "full" is the uncompressed single-site model
    (prenet + full-depth encoder + decoder + postnet)."""
    edge_total = sum(t.size for t in model.edge_params.values())
    cloud_total = sum(t.size for t in model.cloud_params.values())
    edge_enc = sum(
        t.size for name, t in model.edge_params.items() if name.startswith("enc.")
    )
    if part == "edge":
        return edge_total
    if part == "cloud":
        return cloud_total
    if part == "full":
        return edge_total - edge_enc + cloud_total
    raise ValueError(f"unknown part {part!r}")


def quantize_edge(model: SplitModel) -> SplitModel:
    quantized = {name: quantize_linear(t) for name, t in model.edge_params.items()}
    return replace(model, edge_quantized=quantized)


def positional_encoding(n: int, d: int) -> np.ndarray:
    pos = np.arange(n, dtype=np.float64)[:, None]
    dim = np.arange(0, d, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, dim / d)
    pe = np.zeros((n, d), dtype=np.float64)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe.astype(np.float32)


def _ln(x: np.ndarray, p: dict, prefix: str) -> np.ndarray:
    g = p[f"{prefix}.g"].data
    b = p[f"{prefix}.b"].data
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + LN_EPS) * g + b


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _attn(q_in, kv_in, p, prefix, n_heads, causal):
    """Multi-head attention; returns (output [Tq, d], weights [H, Tq, Tk])."""
    if kv_in is None:
        kv_in = q_in
    d = q_in.shape[-1]
    dh = d // n_heads
    q = q_in @ p[f"{prefix}.wq"].data + p[f"{prefix}.bq"].data
    k = kv_in @ p[f"{prefix}.wk"].data + p[f"{prefix}.bk"].data
    v = kv_in @ p[f"{prefix}.wv"].data + p[f"{prefix}.bv"].data
    tq, tk = q.shape[0], k.shape[0]
    q = q.reshape(tq, n_heads, dh).transpose(1, 0, 2)
    k = k.reshape(tk, n_heads, dh).transpose(1, 0, 2)
    v = v.reshape(tk, n_heads, dh).transpose(1, 0, 2)
    scores = q @ k.transpose(0, 2, 1) / np.float32(math.sqrt(dh))
    if causal:
        mask = np.triu(np.full((tq, tk), -np.inf, dtype=np.float32), k=1)
        scores = scores + mask
    weights = _softmax(scores)
    out = (weights @ v).transpose(1, 0, 2).reshape(tq, d)
    return out @ p[f"{prefix}.wo"].data + p[f"{prefix}.bo"].data, weights


def _ff(x, p, prefix):
    h = np.maximum(x @ p[f"{prefix}.w1"].data + p[f"{prefix}.b1"].data, 0.0)
    return h @ p[f"{prefix}.w2"].data + p[f"{prefix}.b2"].data


def prenet_forward(model: SplitModel, raw) -> Tensor:
    """Raw input -> encoder features [T', d_model].

    STT: linear mel projection, stride-2 downsample, then pad/truncate to
    enc_fixed_len so escalation payloads have one fixed size.
    TTS: embedding lookup plus sinusoidal position encoding.
    """
    cfg = model.config
    p = model.edge_params
    if cfg.task is Task.STT:
        if not isinstance(raw, MelSpec):
            raise TypeError("stt prenet expects a MelSpec")
        if raw.n_mel != cfg.n_mel:
            raise ShapeMismatch(f"expected {cfg.n_mel} mel bins, got {raw.n_mel}")
        if raw.n_frames > cfg.max_src_len:
            raise InputTooLong(f"{raw.n_frames} mel frames > cap {cfg.max_src_len}")
        x = raw.frames @ p["prenet.proj.w"].data + p["prenet.proj.b"].data
        x = x[::2]
        fixed = cfg.enc_fixed_len
        if x.shape[0] >= fixed:
            x = x[:fixed]
        else:
            pad = np.zeros((fixed - x.shape[0], cfg.d_model), dtype=np.float32)
            x = np.concatenate([x, pad], axis=0)
        return Tensor(np.ascontiguousarray(x, dtype=np.float32))

    ids = np.asarray(raw, dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise ValueError("tts prenet expects a non-empty 1-d token sequence")
    if ids.size > cfg.max_src_len:
        raise InputTooLong(f"{ids.size} tokens > cap {cfg.max_src_len}")
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise TokenOutOfRange(f"token ids must lie in [0, {cfg.vocab_size})")
    x = p["prenet.embed.w"].data[ids] + positional_encoding(ids.size, cfg.d_model)
    return Tensor(x.astype(np.float32))


def encoder_forward(model: SplitModel, features: Tensor, which: str = "edge", return_attn: bool = False):
    """Pre-norm self-attention stack; "edge" runs the truncated encoder,
    "cloud" the independent full-depth one. With return_attn, also returns
    per-layer attention weights [n_heads, T, T]."""
    cfg = model.config
    if which == "edge":
        p, n_layers = model.edge_params, cfg.n_enc_layers_edge
    elif which == "cloud":
        p, n_layers = model.cloud_params, cfg.n_enc_layers_full
    else:
        raise ValueError(f"unknown encoder {which!r}")
    if features.ndim != 2 or features.shape[1] != cfg.d_model:
        raise ShapeMismatch(f"features must be [T, {cfg.d_model}], got {features.shape}")
    if features.shape[0] < 1:
        raise ShapeMismatch("features must have at least one row")

    x = features.data.astype(np.float32)
    attn_maps = []
    for i in range(n_layers):
        a, w = _attn(_ln(x, p, f"enc.{i}.ln1"), None, p, f"enc.{i}.attn", cfg.n_heads, False)
        attn_maps.append(w)
        x = x + a
        x = x + _ff(_ln(x, p, f"enc.{i}.ln2"), p, f"enc.{i}.ff")
    x = _ln(x, p, "enc.final_ln")
    hs = HiddenStates(Tensor(x.astype(np.float32)), origin=which)
    return (hs, attn_maps) if return_attn else hs


def _decoder_stack(x, memory, p, cfg):
    for i in range(cfg.n_dec_layers):
        a, _ = _attn(_ln(x, p, f"dec.{i}.ln1"), None, p, f"dec.{i}.self", cfg.n_heads, True)
        x = x + a
        a, _ = _attn(_ln(x, p, f"dec.{i}.ln2"), memory, p, f"dec.{i}.cross", cfg.n_heads, False)
        x = x + a
        x = x + _ff(_ln(x, p, f"dec.{i}.ln3"), p, f"dec.{i}.ff")
    return _ln(x, p, "dec.final_ln")


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max()
    return logits - (m + np.log(np.exp(logits - m).sum()))


def decoder_greedy(model: SplitModel, hidden: HiddenStates, max_steps: int | None = None, min_frames: int = 8) -> DecodeResult:
    """Greedy autoregressive decode against the given encoder memory.

    STT emits tokens until EOS (token 0) or the step cap; returned tokens
    exclude BOS/EOS while step_logprobs covers every executed step. TTS
    emits mel frames until the stop head fires (past min_frames) or the cap.
    The full prefix is recomputed each step, so a run capped at t steps
    reproduces the first t steps of a longer run exactly.
    """
    cfg = model.config
    p = model.edge_params
    memory = hidden.tensor.data
    if max_steps is None:
        max_steps = cfg.max_tgt_len
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")

    if cfg.task is Task.STT:
        prev = [BOS]
        tokens: list[int] = []
        logps: list[float] = []
        for _ in range(max_steps):
            x = p["dec.embed.w"].data[np.asarray(prev)] + positional_encoding(len(prev), cfg.d_model)
            h = _decoder_stack(x.astype(np.float32), memory, p, cfg)
            logits = h[-1] @ p["postnet.out.w"].data + p["postnet.out.b"].data
            tok = int(np.argmax(logits))
            logps.append(float(_log_softmax(logits)[tok]))
            if tok == EOS:
                break
            tokens.append(tok)
            prev.append(tok)
        return DecodeResult(
            task=Task.STT,
            n_steps=len(logps),
            tokens=tokens,
            step_logprobs=np.asarray(logps, dtype=np.float32),
        )

    frames = [np.zeros(cfg.n_mel, dtype=np.float32)]
    stops: list[float] = []
    for step in range(max_steps):
        x = np.stack(frames) @ p["dec.prenet.w"].data + p["dec.prenet.b"].data
        x = x + positional_encoding(len(frames), cfg.d_model)
        h = _decoder_stack(x.astype(np.float32), memory, p, cfg)
        nxt = h[-1] @ p["postnet.mel.w"].data + p["postnet.mel.b"].data
        stop_logit = float(h[-1] @ p["postnet.stop.w"].data + p["postnet.stop.b"].data[0])
        stop_p = 1.0 / (1.0 + math.exp(-stop_logit))
        frames.append(nxt.astype(np.float32))
        stops.append(stop_p)
        if step + 1 >= min_frames and stop_p > 0.5:
            break
    mel = np.stack(frames[1:])
    return DecodeResult(
        task=Task.TTS,
        n_steps=len(stops),
        mel=MelSpec(mel, TTS_FRAME_HOP, TTS_SAMPLE_RATE),
        stop_probs=np.asarray(stops, dtype=np.float32),
    )
