"""Deployment arithmetic: INT8 memory footprints and inverse-clock CPU times.

Numbers here are analytic, anchored to reference measurements taken on a
1.7 GHz device; nothing in this module runs the toy model.
"""

from __future__ import annotations

from dataclasses import dataclass

from .netsim import LinkSpec, transfer_time
from .toymodel import Task

MB = 1024 * 1024
INT8_RATIO = 0.25

REF_CLOCK_GHZ = 1.7


class NonPositiveClock(ValueError):
    pass


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class DeploymentSpec:
    """FP32 sizes of a real deployment's edge slice and full model.

    reported_quantized_mb carries the upstream deployment's own INT8 figure
    when it disagrees with plain ratio arithmetic; see quantized_note.
    """

    name: str
    edge_fp32_bytes: int
    full_fp32_bytes: int
    reported_quantized_mb: float | None = None

    def __post_init__(self):
        if self.edge_fp32_bytes <= 0:
            raise InvalidSpec(f"{self.name}: edge size must be positive")
        if self.full_fp32_bytes < self.edge_fp32_bytes:
            raise InvalidSpec(f"{self.name}: full model smaller than its edge slice")

    @classmethod
    def from_mb(
        cls,
        name: str,
        edge_mb: float,
        edge_fraction_pct: float,
        reported_quantized_mb: float | None = None,
    ) -> "DeploymentSpec":
        edge = int(round(edge_mb * MB))
        full = int(round(edge * 100.0 / edge_fraction_pct))
        return cls(name, edge, full, reported_quantized_mb)


def edge_memory_requirement(spec: DeploymentSpec) -> float:
    """Bytes the INT8 edge slice occupies (4x smaller than FP32)."""
    return spec.edge_fp32_bytes * INT8_RATIO


def edge_fraction_pct(spec: DeploymentSpec) -> float:
    return 100.0 * spec.edge_fp32_bytes / spec.full_fp32_bytes


def overall_usage_pct(spec: DeploymentSpec) -> float:
    """Quantized edge slice as a percentage of the FP32 full model."""
    return 100.0 * edge_memory_requirement(spec) / spec.full_fp32_bytes


def quantized_note(spec: DeploymentSpec) -> str | None:
    """Annotation when ratio arithmetic disagrees with the reported figure."""
    if spec.reported_quantized_mb is None:
        return None
    computed = edge_memory_requirement(spec) / MB
    if abs(computed - spec.reported_quantized_mb) <= 0.01:
        return None
    return (
        f"int8 arithmetic gives {computed:.2f} MB; "
        f"reported figure is {spec.reported_quantized_mb:g} MB"
    )


SPEECHT5 = DeploymentSpec.from_mb("speecht5", 226.0, 38.0, reported_quantized_mb=57.0)
WHISPER = DeploymentSpec.from_mb("whisper", 567.0, 56.0, reported_quantized_mb=149.0)
BUNDLED_SPECS = (SPEECHT5, WHISPER)


def memory_table(specs=BUNDLED_SPECS) -> list[dict]:
    rows = []
    for spec in specs:
        rows.append(
            {
                "name": spec.name,
                "edge_fp32_mb": spec.edge_fp32_bytes / MB,
                "full_fp32_mb": spec.full_fp32_bytes / MB,
                "edge_int8_mb": edge_memory_requirement(spec) / MB,
                "edge_fraction_pct": edge_fraction_pct(spec),
                "overall_usage_pct": overall_usage_pct(spec),
                "note": quantized_note(spec) or "",
            }
        )
    return rows


@dataclass(frozen=True)
class ReferenceTimings:
    """(input_length, seconds) anchors measured at ref_clock_ghz.

    TTS lengths are characters of input text; STT lengths are seconds of
    input audio.
    """

    ref_clock_ghz: float = REF_CLOCK_GHZ
    tts_points: tuple = ((12.0, 0.5), (270.0, 8.9))
    stt_points: tuple = ((1.0, 2.97), (19.0, 3.92))

    def __post_init__(self):
        if self.ref_clock_ghz <= 0:
            raise NonPositiveClock(f"reference clock {self.ref_clock_ghz}")
        for pts in (self.tts_points, self.stt_points):
            if len(pts) < 2:
                raise InvalidSpec("need at least two timing anchors per task")
            lengths = [x for x, _ in pts]
            if any(b <= a for a, b in zip(lengths, lengths[1:])):
                raise InvalidSpec("timing anchor lengths must be strictly increasing")

    def points(self, task: Task) -> tuple:
        return self.tts_points if task is Task.TTS else self.stt_points


DEFAULT_TIMINGS = ReferenceTimings()


def _piecewise(x: float, pts) -> float:
    """Linear interpolation between anchors; end segments extend outward."""
    if x <= pts[0][0]:
        (x0, y0), (x1, y1) = pts[0], pts[1]
    elif x >= pts[-1][0]:
        (x0, y0), (x1, y1) = pts[-2], pts[-1]
    else:
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if x0 <= x <= x1:
                break
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0)


def cpu_time(
    clock_ghz: float,
    task: Task,
    input_length: float,
    ref: ReferenceTimings = DEFAULT_TIMINGS,
) -> float:
    """Predicted on-device seconds: anchor time scaled by ref_clock / clock.

    cpu_time(f) * f is constant in f, the inverse-clock model.
    """
    if clock_ghz <= 0:
        raise NonPositiveClock(f"clock must be positive, got {clock_ghz}")
    t_ref = _piecewise(float(input_length), ref.points(task))
    return t_ref * (ref.ref_clock_ghz / clock_ghz)


def predict_wall_time(
    cpu_s: float,
    escalated: bool,
    uplink_bytes: int,
    downlink_bytes: int,
    link: LinkSpec | None = None,
    cloud_s: float = 0.0,
) -> float:
    """Serial wall-clock decomposition: edge compute, then the round trip."""
    if not escalated:
        return cpu_s
    if link is None:
        raise ValueError("escalated prediction needs a link spec")
    return cpu_s + cloud_s + transfer_time(uplink_bytes, link) + transfer_time(downlink_bytes, link)
