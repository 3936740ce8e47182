"""End-to-end STT and TTS runs with gate-controlled escalation.

cpu_time_s on a trace is measured edge compute (prenet, encoder, decode,
and for TTS the vocoder; the re-decode after escalation counts too). In
virtual mode the wall clock is the exact identity

    wall = cpu + cloud + transfer

with cloud the declared handler budget and transfer the analytic link
cost; a real link reports measured elapsed time instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from . import wire
from .audio import Waveform, estimate_snr, griffin_lim, log_mel, synth_wave
from .gating import GateConfig, GateDecision, stt_gate, tts_gate
from .netsim import ConnectionFailed, HandlerError, LinkSpec, transfer_time
from .toymodel import (
    HiddenStates,
    SplitModel,
    Task,
    decoder_greedy,
    encoder_forward,
    prenet_forward,
)

STT_SAMPLE_RATE = 16000
STT_N_FFT = 400
STT_HOP = 160

GL_ITERS = 8

# Bench fixtures: a 12-character utterance and a 270-character paragraph.
SHORT_TEXT = "Hello there!"
LONG_TEXT = (
    "The quick measurements arrive long before the audio itself has finished "
    "playing, so the desk unit keeps a small ring of pending frames and drains "
    "it whenever the uplink clears. Nothing about the plan is clever; it "
    "simply never lets the radio sit idle while work remains."
)


def text_to_tokens(text: str, vocab_size: int = 128) -> list[int]:
    """One token per character, folded into [1, vocab); 0 stays reserved."""
    return [(ord(c) % (vocab_size - 1)) + 1 for c in text]


def tokens_to_text(tokens) -> str:
    return " ".join(str(int(t)) for t in tokens)


def make_fixture_wave(duration_s: float, seed: int = 0) -> Waveform:
    """Synthetic speech stand-in: two tones plus a little seeded noise."""
    return synth_wave(
        [(220.0, 0.5), (880.0, 0.3)],
        duration_s,
        STT_SAMPLE_RATE,
        noise_sigma=0.05,
        seed=seed,
    )


@dataclass(frozen=True)
class RunTrace:
    task: Task
    escalated: bool
    degraded: bool
    gate: GateDecision
    cpu_time_s: float
    cloud_time_s: float
    transfer_time_s: float
    wall_time_s: float
    uplink_bytes: int
    downlink_bytes: int
    n_output: int
    output_audio_s: float | None = None


def _escalate(model: SplitModel, feats, link):
    """Returns (hidden, up_receipt, down_receipt) or None when the cloud
    is unreachable or answered with an error."""
    frame = wire.encode_frame(int(model.config.task), wire.KIND_FEATURES, feats)
    try:
        resp, up, down = link.send_recv(frame)
    except (ConnectionFailed, HandlerError):
        return None
    _task, _kind, t = wire.decode_frame(resp)
    return HiddenStates(t, "cloud"), up, down


def _wall(link, escalated: bool, start: float, cpu: float, cloud: float, transfer: float) -> float:
    if link is not None and getattr(link, "mode", "virtual") == "real" and escalated:
        return time.perf_counter() - start
    return cpu + cloud + transfer


def run_stt(
    w: Waveform,
    model: SplitModel,
    gate_cfg: GateConfig = GateConfig(),
    link=None,
    force_escalate: bool | None = None,
) -> tuple[list[int], RunTrace]:
    if model.config.task is not Task.STT:
        raise ValueError("run_stt needs an stt model")
    start = time.perf_counter()
    mel = log_mel(w, STT_N_FFT, STT_HOP, model.config.n_mel)
    feats = prenet_forward(model, mel)
    hidden = encoder_forward(model, feats, "edge")
    dec = decoder_greedy(model, hidden)
    cpu = time.perf_counter() - start

    gate = stt_gate(dec.step_logprobs, gate_cfg)
    want = gate.escalate if force_escalate is None else force_escalate
    escalated = False
    degraded = False
    up_bytes = down_bytes = 0
    transfer = 0.0
    cloud = 0.0
    if want:
        routed = _escalate(model, feats, link) if link is not None else None
        if routed is None:
            degraded = True
        else:
            cloud_hidden, up, down = routed
            t1 = time.perf_counter()
            dec = decoder_greedy(model, cloud_hidden)
            cpu += time.perf_counter() - t1
            escalated = True
            up_bytes, down_bytes = up.nbytes, down.nbytes
            transfer = up.transfer_time_s + down.transfer_time_s
            cloud = getattr(link, "handler_time_s", 0.0)

    trace = RunTrace(
        task=Task.STT,
        escalated=escalated,
        degraded=degraded,
        gate=gate,
        cpu_time_s=cpu,
        cloud_time_s=cloud,
        transfer_time_s=transfer,
        wall_time_s=_wall(link, escalated, start, cpu, cloud, transfer),
        uplink_bytes=up_bytes,
        downlink_bytes=down_bytes,
        n_output=len(dec.tokens),
    )
    return list(dec.tokens), trace


def run_tts(
    text_or_tokens,
    model: SplitModel,
    gate_cfg: GateConfig = GateConfig(),
    link=None,
    force_escalate: bool | None = None,
) -> tuple[Waveform, RunTrace]:
    if model.config.task is not Task.TTS:
        raise ValueError("run_tts needs a tts model")
    tokens = (
        text_to_tokens(text_or_tokens, model.config.vocab_size)
        if isinstance(text_or_tokens, str)
        else list(text_or_tokens)
    )
    start = time.perf_counter()
    feats = prenet_forward(model, tokens)
    hidden = encoder_forward(model, feats, "edge")
    dec = decoder_greedy(model, hidden)
    wav = griffin_lim(dec.mel, GL_ITERS)
    cpu = time.perf_counter() - start

    gate = tts_gate(estimate_snr(wav), gate_cfg)
    want = gate.escalate if force_escalate is None else force_escalate
    escalated = False
    degraded = False
    up_bytes = down_bytes = 0
    transfer = 0.0
    cloud = 0.0
    if want:
        routed = _escalate(model, feats, link) if link is not None else None
        if routed is None:
            degraded = True
        else:
            cloud_hidden, up, down = routed
            t1 = time.perf_counter()
            dec = decoder_greedy(model, cloud_hidden)
            wav = griffin_lim(dec.mel, GL_ITERS)
            cpu += time.perf_counter() - t1
            escalated = True
            up_bytes, down_bytes = up.nbytes, down.nbytes
            transfer = up.transfer_time_s + down.transfer_time_s
            cloud = getattr(link, "handler_time_s", 0.0)

    trace = RunTrace(
        task=Task.TTS,
        escalated=escalated,
        degraded=degraded,
        gate=gate,
        cpu_time_s=cpu,
        cloud_time_s=cloud,
        transfer_time_s=transfer,
        wall_time_s=_wall(link, escalated, start, cpu, cloud, transfer),
        uplink_bytes=up_bytes,
        downlink_bytes=down_bytes,
        n_output=dec.mel.n_frames,
        output_audio_s=wav.duration_s,
    )
    return wav, trace


@dataclass(frozen=True)
class SweepRow:
    bandwidth_kbs: float
    cpu_time_s: float
    wall_time_s: float
    transfer_time_s: float
    uplink_bytes: int
    downlink_bytes: int


def sweep_bandwidth(
    model: SplitModel,
    input_,
    bandwidths_kbs,
    handler,
    rtt_s: float = 0.0,
) -> list[SweepRow]:
    """Escalated-run wall time across link speeds.

    The edge stage runs once; every row reuses the same measured cpu time
    and the same request/response byte counts, so only the analytic
    transfer term varies between rows.
    """
    cfg = model.config
    start = time.perf_counter()
    if cfg.task is Task.STT:
        mel = log_mel(input_, STT_N_FFT, STT_HOP, cfg.n_mel)
        feats = prenet_forward(model, mel)
    else:
        tokens = (
            text_to_tokens(input_, cfg.vocab_size) if isinstance(input_, str) else list(input_)
        )
        feats = prenet_forward(model, tokens)
    hidden = encoder_forward(model, feats, "edge")
    dec = decoder_greedy(model, hidden)
    if cfg.task is Task.TTS:
        griffin_lim(dec.mel, GL_ITERS)
    cpu = time.perf_counter() - start

    frame = wire.encode_frame(int(cfg.task), wire.KIND_FEATURES, feats)
    resp = handler(frame)
    if wire.peek_kind(resp) == wire.KIND_ERROR:
        raise HandlerError(-1, resp)
    _task, _kind, t = wire.decode_frame(resp)

    t1 = time.perf_counter()
    dec = decoder_greedy(model, HiddenStates(t, "cloud"))
    if cfg.task is Task.TTS:
        griffin_lim(dec.mel, GL_ITERS)
    cpu += time.perf_counter() - t1

    rows = []
    for kbs in bandwidths_kbs:
        link = LinkSpec.from_kbs(kbs, rtt_s)
        tr = transfer_time(len(frame), link) + transfer_time(len(resp), link)
        rows.append(
            SweepRow(
                bandwidth_kbs=float(kbs),
                cpu_time_s=cpu,
                wall_time_s=cpu + 0.0 + tr,
                transfer_time_s=tr,
                uplink_bytes=len(frame),
                downlink_bytes=len(resp),
            )
        )
    return rows
