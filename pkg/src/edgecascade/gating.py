"""Quality gates deciding whether an edge result is good enough to keep."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class Verdict(Enum):
    PASS = "pass"
    ESCALATE = "escalate"


class EmptySequence(ValueError):
    """Gate called with no per-step scores."""


@dataclass(frozen=True)
class GateConfig:
    """Escalation thresholds; metric >= threshold keeps the edge result."""

    stt_logprob_threshold: float = -2.0
    tts_snr_db_threshold: float = 10.0


@dataclass(frozen=True)
class GateDecision:
    verdict: Verdict
    metric: float
    threshold: float

    @property
    def escalate(self) -> bool:
        return self.verdict is Verdict.ESCALATE


def _decide(metric: float, threshold: float) -> GateDecision:
    if math.isnan(metric):
        raise ValueError("gate metric is NaN")
    verdict = Verdict.PASS if metric >= threshold else Verdict.ESCALATE
    return GateDecision(verdict, metric, threshold)


def stt_gate(step_logprobs: np.ndarray, cfg: GateConfig) -> GateDecision:
    """Mean chosen-token log-probability over all decode steps.

    A mean exactly on the threshold passes. -inf (possible when a chosen
    token had probability that underflowed) always escalates.
    """
    lp = np.asarray(step_logprobs, dtype=np.float64)
    if lp.size == 0:
        raise EmptySequence("no decode steps to score")
    return _decide(float(lp.mean()), cfg.stt_logprob_threshold)


def tts_gate(snr_db: float, cfg: GateConfig) -> GateDecision:
    """SNR of the synthesized audio in dB; -inf (silent output) escalates."""
    return _decide(float(snr_db), cfg.tts_snr_db_threshold)
