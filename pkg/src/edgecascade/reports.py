"""Delimited output and matplotlib figures, both byte-deterministic.

SVG is the figure format: with a fixed hashsalt and the Date metadata
suppressed, matplotlib produces identical bytes for identical inputs,
which makes report regressions diffable.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

matplotlib.rcParams["svg.hashsalt"] = "edgecascade"
matplotlib.rcParams["figure.figsize"] = (6.4, 4.0)
matplotlib.rcParams["axes.grid"] = True
matplotlib.rcParams["grid.alpha"] = 0.3


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int,)):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_csv(path, header, rows) -> Path:
    """Fixed column order, floats as %.6f, LF newlines."""
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", newline="\n")
    return path


def save_figure(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def render_sweep_figure(rows, path) -> Path:
    """Wall/cpu/transfer time against link bandwidth, log2 x-axis."""
    bw = [r.bandwidth_kbs for r in rows]
    fig, ax = plt.subplots()
    ax.plot(bw, [r.wall_time_s for r in rows], marker="o", label="wall")
    ax.plot(bw, [r.transfer_time_s for r in rows], marker="s", label="transfer")
    ax.plot(bw, [r.cpu_time_s for r in rows], marker="^", label="edge cpu")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("link bandwidth (KB/s)")
    ax.set_ylabel("seconds")
    ax.set_title("escalated run time vs bandwidth")
    ax.legend()
    return save_figure(fig, path)


def render_memory_cdf(cdf_rows, required_mb: float, path) -> Path:
    mem = [m for m, _ in cdf_rows]
    cum = [c for _, c in cdf_rows]
    fig, ax = plt.subplots()
    ax.step(mem, cum, where="post")
    ax.axvline(required_mb, color="tab:red", linestyle="--", label=f"required {required_mb:g} MB")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("device memory (MB)")
    ax.set_ylabel("cumulative market share")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("fleet memory distribution")
    ax.legend()
    return save_figure(fig, path)


def render_clock_hist(hist_rows, ref_clock_ghz: float, path) -> Path:
    fig, ax = plt.subplots()
    lefts = [lo for lo, _hi, _s in hist_rows]
    widths = [hi - lo for lo, hi, _s in hist_rows]
    shares = [s for _lo, _hi, s in hist_rows]
    ax.bar(lefts, shares, width=widths, align="edge", edgecolor="black", linewidth=0.5)
    ax.axvline(ref_clock_ghz, color="tab:red", linestyle="--", label=f"reference {ref_clock_ghz:g} GHz")
    ax.set_xlabel("cpu clock (GHz)")
    ax.set_ylabel("market share")
    ax.set_title("fleet clock distribution")
    ax.legend()
    return save_figure(fig, path)


def render_feasibility(feas_rows, ref_deadline_s: float, path) -> Path:
    fig, ax = plt.subplots()
    ax.plot([t for t, _ in feas_rows], [s for _, s in feas_rows], marker="o")
    ax.axvline(ref_deadline_s, color="tab:red", linestyle="--", label=f"ref deadline {ref_deadline_s:g} s")
    ax.set_xlabel("deadline (s)")
    ax.set_ylabel("feasible market share")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("deadline feasibility")
    ax.legend()
    return save_figure(fig, path)
