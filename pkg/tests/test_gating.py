import math

import numpy as np
import pytest

from edgecascade.gating import EmptySequence, GateConfig, Verdict, stt_gate, tts_gate


def test_stt_gate_passes_on_confident_steps():
    cfg = GateConfig(stt_logprob_threshold=-2.0)
    d = stt_gate([-0.5, -1.0, -0.1], cfg)
    assert d.verdict is Verdict.PASS
    assert not d.escalate
    assert abs(d.metric - (-0.5 - 1.0 - 0.1) / 3) <= 1e-12
    assert d.threshold == -2.0


def test_stt_gate_escalates_below_threshold():
    d = stt_gate([-3.0, -4.0], GateConfig(stt_logprob_threshold=-2.0))
    assert d.verdict is Verdict.ESCALATE
    assert d.escalate


def test_gate_tie_passes():
    d = stt_gate([-2.0, -2.0], GateConfig(stt_logprob_threshold=-2.0))
    assert d.verdict is Verdict.PASS


def test_stt_gate_accepts_ndarray_and_uses_float64_mean():
    vals = np.float32([-1.1, -1.3, -0.9])
    d = stt_gate(vals, GateConfig())
    assert d.metric == float(np.mean(vals.astype(np.float64)))


def test_stt_gate_empty_sequence():
    with pytest.raises(EmptySequence):
        stt_gate([], GateConfig())


def test_gate_minus_inf_escalates():
    d = tts_gate(float("-inf"), GateConfig(tts_snr_db_threshold=10.0))
    assert d.verdict is Verdict.ESCALATE


def test_gate_nan_raises():
    with pytest.raises(ValueError):
        tts_gate(float("nan"), GateConfig())
    with pytest.raises(ValueError):
        stt_gate([-1.0, math.nan], GateConfig())


def test_tts_gate_threshold_comparison():
    cfg = GateConfig(tts_snr_db_threshold=10.0)
    assert tts_gate(12.5, cfg).verdict is Verdict.PASS
    assert tts_gate(10.0, cfg).verdict is Verdict.PASS
    assert tts_gate(9.99, cfg).verdict is Verdict.ESCALATE
