"""Device fleet analytics: which devices can hold the edge slice and which
can hit a deadline, weighted by market share."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .costmodel import DEFAULT_TIMINGS, ReferenceTimings, cpu_time
from .toymodel import Task

FLEET_HEADER = ["model", "share", "memory_mb", "cpu_ghz"]


class FleetFormatError(ValueError):
    pass


class EmptyFleet(ValueError):
    pass


class BadEdges(ValueError):
    pass


@dataclass(frozen=True)
class DeviceRecord:
    model: str
    share: float
    memory_mb: float
    clock_ghz: float


@dataclass(frozen=True)
class Fleet:
    records: tuple[DeviceRecord, ...]

    def __post_init__(self):
        if not self.records:
            raise EmptyFleet("fleet has no devices")

    def __len__(self) -> int:
        return len(self.records)

    def total_share(self) -> float:
        return float(sum(r.share for r in self.records))


def load_fleet(path, normalize: bool = True) -> Fleet:
    """Parse a fleet CSV; shares are renormalized to sum to 1 by default.

    Malformed rows raise FleetFormatError naming the line and field.
    """
    path = Path(path)
    with path.open(newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFleet(f"{path}: empty file") from None
        if header != FLEET_HEADER:
            raise FleetFormatError(
                f"{path}: header must be {','.join(FLEET_HEADER)}, got {','.join(header)}"
            )
        records = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(FLEET_HEADER):
                raise FleetFormatError(f"{path}:{line_no}: expected 4 fields, got {len(row)}")
            name = row[0].strip()
            if not name:
                raise FleetFormatError(f"{path}:{line_no}: empty model name")
            values = {}
            for field_name, raw in zip(FLEET_HEADER[1:], row[1:]):
                try:
                    values[field_name] = float(raw)
                except ValueError:
                    raise FleetFormatError(
                        f"{path}:{line_no}: bad {field_name} value {raw!r}"
                    ) from None
            if values["share"] < 0:
                raise FleetFormatError(f"{path}:{line_no}: negative share")
            if values["memory_mb"] <= 0:
                raise FleetFormatError(f"{path}:{line_no}: memory_mb must be positive")
            if values["cpu_ghz"] <= 0:
                raise FleetFormatError(f"{path}:{line_no}: cpu_ghz must be positive")
            records.append(
                DeviceRecord(name, values["share"], values["memory_mb"], values["cpu_ghz"])
            )
    if not records:
        raise EmptyFleet(f"{path}: no device rows")
    total = sum(r.share for r in records)
    if total <= 0:
        raise EmptyFleet(f"{path}: total share is zero")
    if normalize:
        records = [
            DeviceRecord(r.model, r.share / total, r.memory_mb, r.clock_ghz) for r in records
        ]
    return Fleet(tuple(records))


def _weights(fleet: Fleet, weighted: bool) -> np.ndarray:
    if weighted:
        w = np.array([r.share for r in fleet.records], dtype=np.float64)
        return w / w.sum()
    return np.full(len(fleet), 1.0 / len(fleet))


def memory_shortfall_fraction(fleet: Fleet, required_mb: float, weighted: bool = True) -> float:
    """Share of devices whose memory is strictly below the requirement."""
    if required_mb < 0:
        raise ValueError(f"required_mb must be >= 0, got {required_mb}")
    w = _weights(fleet, weighted)
    below = np.array([r.memory_mb < required_mb for r in fleet.records])
    return float(w[below].sum())


def feasibility_fraction(
    fleet: Fleet,
    task: Task,
    input_length: float,
    t_max_s: float,
    ref: ReferenceTimings = DEFAULT_TIMINGS,
    weighted: bool = True,
) -> float:
    """Share of devices that finish within t_max_s under the inverse-clock
    model; a device exactly on the deadline counts as feasible."""
    if t_max_s <= 0:
        raise ValueError(f"t_max_s must be positive, got {t_max_s}")
    w = _weights(fleet, weighted)
    ok = np.array(
        [cpu_time(r.clock_ghz, task, input_length, ref) <= t_max_s for r in fleet.records]
    )
    return float(w[ok].sum())


def share_below_clock(fleet: Fleet, clock_ghz: float, weighted: bool = True) -> float:
    w = _weights(fleet, weighted)
    below = np.array([r.clock_ghz < clock_ghz for r in fleet.records])
    return float(w[below].sum())


def clock_histogram(fleet: Fleet, bin_edges, weighted: bool = True) -> list[tuple[float, float, float]]:
    """Share-weighted clock mass per bin: [lo, hi) except the last bin,
    which also includes its upper edge."""
    edges = [float(e) for e in bin_edges]
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise BadEdges(f"bin edges must be strictly increasing, got {edges}")
    w = _weights(fleet, weighted)
    clocks = np.array([r.clock_ghz for r in fleet.records])
    rows = []
    for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
        if i == len(edges) - 2:
            mask = (clocks >= lo) & (clocks <= hi)
        else:
            mask = (clocks >= lo) & (clocks < hi)
        rows.append((lo, hi, float(w[mask].sum())))
    return rows


def emit_report(
    fleet: Fleet,
    out_dir,
    mem_required_mb: float = 149.0,
    task: Task = Task.TTS,
    input_length: float = 12.0,
    ref: ReferenceTimings = DEFAULT_TIMINGS,
    weighted: bool = True,
    bin_edges=(0.5, 1.0, 1.5, 2.0, 2.5, 3.0),
) -> dict[str, Path]:
    """Write the fleet report: CSV tables and their matplotlib figures.

    Same fleet and arguments give byte-identical files. Returns the paths
    keyed by artifact name.
    """
    from . import reports

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    ref_deadline = cpu_time(ref.ref_clock_ghz, task, input_length, ref)
    shortfall = memory_shortfall_fraction(fleet, mem_required_mb, weighted)
    below_ref = share_below_clock(fleet, ref.ref_clock_ghz, weighted)
    feas_ref = feasibility_fraction(fleet, task, input_length, ref_deadline, ref, weighted)

    summary_rows = [
        ("devices", float(len(fleet))),
        ("weighted", 1.0 if weighted else 0.0),
        ("mem_required_mb", mem_required_mb),
        ("memory_shortfall_fraction", shortfall),
        ("ref_clock_ghz", ref.ref_clock_ghz),
        ("share_below_ref_clock", below_ref),
        ("ref_deadline_s", ref_deadline),
        ("feasibility_at_ref_deadline", feas_ref),
    ]
    paths["summary"] = reports.write_csv(out / "summary.csv", ["metric", "value"], summary_rows)

    w = _weights(fleet, weighted)
    order = np.argsort([r.memory_mb for r in fleet.records], kind="stable")
    cdf_rows = []
    cum = 0.0
    for idx in order:
        cum += float(w[idx])
        cdf_rows.append((fleet.records[idx].memory_mb, cum))
    paths["memory_cdf"] = reports.write_csv(
        out / "memory_cdf.csv", ["memory_mb", "cumulative_share"], cdf_rows
    )

    hist_rows = clock_histogram(fleet, bin_edges, weighted)
    paths["clock_hist"] = reports.write_csv(
        out / "clock_hist.csv", ["lo_ghz", "hi_ghz", "share"], hist_rows
    )

    scales = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0, 4.0]
    feas_rows = [
        (s * ref_deadline, feasibility_fraction(fleet, task, input_length, s * ref_deadline, ref, weighted))
        for s in scales
    ]
    paths["feasibility"] = reports.write_csv(
        out / "feasibility.csv", ["t_max_s", "feasible_share"], feas_rows
    )

    paths["memory_cdf_fig"] = reports.render_memory_cdf(
        cdf_rows, mem_required_mb, out / "memory_cdf.svg"
    )
    paths["clock_hist_fig"] = reports.render_clock_hist(
        hist_rows, ref.ref_clock_ghz, out / "clock_hist.svg"
    )
    paths["feasibility_fig"] = reports.render_feasibility(
        feas_rows, ref_deadline, out / "feasibility.svg"
    )
    return paths
