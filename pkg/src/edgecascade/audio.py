"""Waveform synthesis, log-mel analysis, Griffin-Lim resynthesis and metrics.

Everything here is plain numpy and deterministic: no random phase init,
no dithering. The TTS-side constants are shared by the decoder (which
stamps them onto the mel specs it emits) and by the vocoder path.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .tensors import ShapeMismatch

TTS_SAMPLE_RATE = 16000
TTS_FRAME_HOP = 256
TTS_N_FFT = 1024

LOG_MEL_FLOOR = 1e-10


class AliasedFrequency(ValueError):
    """Requested component at or above Nyquist."""


class TooShort(ValueError):
    """Signal shorter than one analysis frame."""


class EmptyReference(ValueError):
    """WER reference has no tokens."""


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.samples, dtype=np.float32)
        if arr.ndim != 1:
            raise ValueError(f"waveform must be 1-d, got shape {arr.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"bad sample rate {self.sample_rate}")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class MelSpec:
    """Log-mel frames, shape [n_frames, n_mel]."""

    frames: np.ndarray
    frame_hop: int
    sample_rate: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.frames, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"mel frames must be 2-d, got shape {arr.shape}")
        if self.frame_hop <= 0 or self.sample_rate <= 0:
            raise ValueError("frame_hop and sample_rate must be positive")
        arr.flags.writeable = False
        object.__setattr__(self, "frames", arr)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_mel(self) -> int:
        return self.frames.shape[1]


def synth_wave(
    components: list[tuple[float, float]],
    duration_s: float,
    sample_rate: int = 16000,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> Waveform:
    """Sum of sines plus optional seeded gaussian noise.

    components: (frequency_hz, amplitude) pairs; every frequency must sit
    strictly below Nyquist.
    """
    if duration_s <= 0:
        raise ValueError(f"duration must be positive, got {duration_s}")
    for freq, _amp in components:
        if freq >= sample_rate / 2:
            raise AliasedFrequency(f"{freq} Hz >= Nyquist ({sample_rate / 2} Hz)")
    n = int(round(duration_s * sample_rate))
    t = np.arange(n, dtype=np.float64) / sample_rate
    x = np.zeros(n, dtype=np.float64)
    for freq, amp in components:
        x += amp * np.sin(2.0 * np.pi * freq * t)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        x += rng.normal(0.0, noise_sigma, n)
    return Waveform(x.astype(np.float32), sample_rate)


def mel_scale(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int, n_mel: int) -> np.ndarray:
    """Triangular filters on the mel scale, shape [n_mel, n_fft//2 + 1].

    Filter i rises over [f_i, f_{i+1}] and falls over [f_{i+1}, f_{i+2}]
    with the f's spaced uniformly in mel between 0 and Nyquist.
    """
    n_bins = n_fft // 2 + 1
    bin_hz = np.linspace(0.0, sample_rate / 2.0, n_bins)
    anchors = mel_to_hz(np.linspace(0.0, mel_scale(sample_rate / 2.0), n_mel + 2))
    fb = np.zeros((n_mel, n_bins), dtype=np.float64)
    for i in range(n_mel):
        left, center, right = anchors[i], anchors[i + 1], anchors[i + 2]
        up = (bin_hz - left) / max(center - left, 1e-12)
        down = (right - bin_hz) / max(right - center, 1e-12)
        fb[i] = np.clip(np.minimum(up, down), 0.0, None)
    return fb.astype(np.float32)


def _frame(x: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    n_frames = (len(x) - n_fft) // hop + 1
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def _stft_mag(x: np.ndarray, n_fft: int, hop: int, window: np.ndarray) -> np.ndarray:
    frames = _frame(x, n_fft, hop) * window[None, :]
    return np.abs(np.fft.rfft(frames, axis=1))


def log_mel(w: Waveform, n_fft: int, hop: int, n_mel: int) -> MelSpec:
    """Hann-windowed magnitude STFT through a mel filterbank, then log.

    Frame count is floor((len - n_fft)/hop) + 1; the tail that does not
    fill a frame is dropped.
    """
    x = w.samples.astype(np.float64)
    if len(x) < n_fft:
        raise TooShort(f"need at least {n_fft} samples, got {len(x)}")
    window = np.hanning(n_fft)
    mag = _stft_mag(x, n_fft, hop, window)
    fb = mel_filterbank(w.sample_rate, n_fft, n_mel).astype(np.float64)
    mel = mag @ fb.T
    out = np.log(mel + LOG_MEL_FLOOR)
    return MelSpec(out.astype(np.float32), hop, w.sample_rate)


def _istft(spec: np.ndarray, n_fft: int, hop: int, window: np.ndarray) -> np.ndarray:
    n_frames = spec.shape[0]
    out_len = (n_frames - 1) * hop + n_fft
    y = np.zeros(out_len, dtype=np.float64)
    wsum = np.zeros(out_len, dtype=np.float64)
    frames = np.fft.irfft(spec, n=n_fft, axis=1)
    for i in range(n_frames):
        start = i * hop
        y[start : start + n_fft] += frames[i] * window
        wsum[start : start + n_fft] += window * window
    return y / np.maximum(wsum, 1e-8)


def griffin_lim(m: MelSpec, iters: int = 8, n_fft: int | None = None) -> Waveform:
    """Deterministic Griffin-Lim vocoder for log-mel input.

    Mel energies are mapped back to linear magnitudes with the filterbank
    pseudo-inverse; phase starts at zero and is refined for `iters` rounds.
    Output length is (n_frames - 1) * hop + n_fft.
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    if n_fft is None:
        n_fft = 4 * m.frame_hop
    hop = m.frame_hop
    fb = mel_filterbank(m.sample_rate, n_fft, m.n_mel).astype(np.float64)
    mel_mag = np.maximum(np.exp(m.frames.astype(np.float64)) - LOG_MEL_FLOOR, 0.0)
    lin_mag = np.clip(mel_mag @ np.linalg.pinv(fb).T, 0.0, None)

    window = np.hanning(n_fft)
    phase = np.zeros_like(lin_mag)
    x = np.zeros((lin_mag.shape[0] - 1) * hop + n_fft)
    for it in range(iters):
        x = _istft(lin_mag * np.exp(1j * phase), n_fft, hop, window)
        if it < iters - 1:
            phase = np.angle(np.fft.rfft(_frame(x, n_fft, hop) * window[None, :], axis=1))
    peak = np.max(np.abs(x))
    if peak > 1.0:
        x = x / peak
    return Waveform(x.astype(np.float32), m.sample_rate)


def estimate_snr(w: Waveform) -> float:
    """Frame-power SNR in dB with the noise floor taken from the quietest decile.

    25 ms frames with a 10 ms hop; noise power is the mean over the
    max(1, n_frames // 10) lowest-power frames, signal power the mean over
    all frames. Returns -inf for an all-zero signal.
    """
    frame_len = int(round(0.025 * w.sample_rate))
    hop = int(round(0.010 * w.sample_rate))
    x = w.samples.astype(np.float64)
    if len(x) < frame_len:
        raise TooShort(f"need at least {frame_len} samples, got {len(x)}")
    frames = _frame(x, frame_len, hop)
    powers = np.mean(frames * frames, axis=1)
    k = max(1, len(powers) // 10)
    noise = float(np.mean(np.sort(powers)[:k]))
    signal = float(np.mean(powers))
    if signal <= 0.0:
        return float("-inf")
    return 10.0 * np.log10(signal / max(noise, 1e-12))


def _tokens(seq) -> list:
    if isinstance(seq, str):
        return seq.split()
    return list(seq)


def wer(reference, hypothesis) -> float:
    """Word error rate in percent: 100 * levenshtein / len(reference).

    Strings are tokenized on whitespace; any other sequence is compared
    element-wise. Substitution, insertion and deletion all cost 1.
    """
    ref = _tokens(reference)
    hyp = _tokens(hypothesis)
    if not ref:
        raise EmptyReference("reference must contain at least one token")
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, start=1):
        cur = [i] + [0] * len(hyp)
        for j, h in enumerate(hyp, start=1):
            cost = 0 if r == h else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return 100.0 * prev[-1] / len(ref)


def mse_loss(pred, target) -> float:
    """Mean squared error over all elements; shapes must match exactly."""
    a = pred.frames if isinstance(pred, MelSpec) else np.asarray(pred)
    b = target.frames if isinstance(target, MelSpec) else np.asarray(target)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shape {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(diff * diff))


def write_wav(path, w: Waveform) -> None:
    """Mono 16-bit PCM little-endian; samples clipped to [-1, 1]."""
    x = np.clip(w.samples, -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(w.sample_rate)
        f.writeframes(pcm.tobytes())


def read_wav(path) -> Waveform:
    with wave.open(str(path), "rb") as f:
        if f.getnchannels() != 1:
            raise ValueError(f"expected mono wav, got {f.getnchannels()} channels")
        if f.getsampwidth() != 2:
            raise ValueError(f"expected 16-bit wav, got {8 * f.getsampwidth()}-bit")
        raw = f.readframes(f.getnframes())
        rate = f.getframerate()
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform((pcm / 32767.0).astype(np.float32), rate)
