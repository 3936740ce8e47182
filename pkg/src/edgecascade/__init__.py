"""Desk-scale edge-cloud cascaded speech inference with deployment analytics."""

from .audio import MelSpec, Waveform, estimate_snr, griffin_lim, log_mel, mse_loss, synth_wave, wer
from .costmodel import (
    DeploymentSpec,
    ReferenceTimings,
    cpu_time,
    edge_fraction_pct,
    edge_memory_requirement,
    overall_usage_pct,
    predict_wall_time,
)
from .gating import GateConfig, GateDecision, Verdict, stt_gate, tts_gate
from .netsim import LinkSpec, RealLink, TransferReceipt, VirtualLink, transfer_time
from .pipeline import RunTrace, run_stt, run_tts, sweep_bandwidth
from .tensors import DType, QuantParams, Tensor, dequantize, memory_bytes, quantize_linear
from .toymodel import (
    ModelConfig,
    SplitModel,
    Task,
    build_split_model,
    decoder_greedy,
    encoder_forward,
    param_count,
    prenet_forward,
    quantize_edge,
)
from .wire import decode_frame, encode_frame

__version__ = "0.1.0"

__all__ = [
    "DType",
    "DeploymentSpec",
    "GateConfig",
    "GateDecision",
    "LinkSpec",
    "MelSpec",
    "ModelConfig",
    "QuantParams",
    "RealLink",
    "ReferenceTimings",
    "RunTrace",
    "SplitModel",
    "Task",
    "Tensor",
    "TransferReceipt",
    "Verdict",
    "VirtualLink",
    "Waveform",
    "build_split_model",
    "cpu_time",
    "decode_frame",
    "decoder_greedy",
    "dequantize",
    "edge_fraction_pct",
    "edge_memory_requirement",
    "encode_frame",
    "encoder_forward",
    "estimate_snr",
    "griffin_lim",
    "log_mel",
    "memory_bytes",
    "mse_loss",
    "overall_usage_pct",
    "param_count",
    "predict_wall_time",
    "prenet_forward",
    "quantize_edge",
    "quantize_linear",
    "run_stt",
    "run_tts",
    "stt_gate",
    "sweep_bandwidth",
    "synth_wave",
    "transfer_time",
    "tts_gate",
    "wer",
]
