"""Command line front end: run the cascade, serve the cloud side, and
produce the deployment-analysis reports."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import config as cfgmod
from . import costmodel, fleet as fleetmod, pipeline, reports
from .cloud_service import CloudService, ServiceConfig, serve
from .costmodel import MB, DeploymentSpec
from .netsim import ConnectionFailed, HandlerError, RealLink, VirtualLink
from .pipeline import LONG_TEXT, run_stt, run_tts, sweep_bandwidth
from .toymodel import Task, build_split_model, param_count

DEFAULT_BANDWIDTHS = "64,128,256,512,1024,2048,4096"

TRACE_COLUMNS = [
    "task",
    "escalated",
    "degraded",
    "gate_verdict",
    "gate_metric",
    "gate_threshold",
    "cpu_time_s",
    "cloud_time_s",
    "transfer_time_s",
    "wall_time_s",
    "uplink_bytes",
    "downlink_bytes",
    "n_output",
]


def _addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host, int(port)


def _bandwidth_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad bandwidth list {text!r}") from None
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("bandwidths must be positive")
    return values


def _load_config(args) -> dict[str, str]:
    cfg = cfgmod.load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg["stt.seed"] = str(args.seed)
        cfg["tts.seed"] = str(args.seed)
    return cfg


def _gate_config(cfg, args):
    gc = cfgmod.gate_config(cfg)
    if getattr(args, "stt_threshold", None) is not None:
        gc = replace(gc, stt_logprob_threshold=args.stt_threshold)
    if getattr(args, "tts_threshold", None) is not None:
        gc = replace(gc, tts_snr_db_threshold=args.tts_threshold)
    return gc


def _make_link(cfg, args, task: Task):
    spec = cfgmod.link_spec(cfg, bandwidth_kbs=args.virtual_bandwidth_kbs, rtt_s=args.rtt_s)
    if args.cloud_addr is not None:
        host, port = args.cloud_addr
        return RealLink(host, port, spec)
    mc = cfgmod.model_config(cfg, task)
    sec = cfgmod.section(cfg, "service")
    max_payload = int(sec.get("max_payload_bytes", 8 * MB))
    service = CloudService(
        ServiceConfig(model_configs={task: mc}, max_payload_bytes=max_payload)
    )
    return VirtualLink(spec, service.handle_request)


def _print_trace(trace) -> None:
    gate = trace.gate
    print(
        f"gate: {gate.verdict.value} "
        f"(metric {gate.metric:.4f} vs threshold {gate.threshold:.4f})"
    )
    if trace.escalated:
        route = "escalated to cloud"
    elif trace.degraded:
        route = "wanted cloud, kept edge result (cloud unavailable)"
    else:
        route = "edge only"
    print(f"route: {route}")
    print(
        f"cpu {trace.cpu_time_s:.4f} s | cloud {trace.cloud_time_s:.4f} s | "
        f"transfer {trace.transfer_time_s:.4f} s | wall {trace.wall_time_s:.4f} s"
    )
    print(f"uplink {trace.uplink_bytes} B | downlink {trace.downlink_bytes} B")


def _write_trace(trace, path) -> None:
    row = [
        trace.task.name.lower(),
        int(trace.escalated),
        int(trace.degraded),
        trace.gate.verdict.value,
        trace.gate.metric,
        trace.gate.threshold,
        trace.cpu_time_s,
        trace.cloud_time_s,
        trace.transfer_time_s,
        trace.wall_time_s,
        trace.uplink_bytes,
        trace.downlink_bytes,
        trace.n_output,
    ]
    reports.write_csv(path, TRACE_COLUMNS, [row])
    print(f"trace written to {path}")


def _cmd_stt(args) -> int:
    from .audio import read_wav

    cfg = _load_config(args)
    model = build_split_model(cfgmod.model_config(cfg, Task.STT))
    gate = _gate_config(cfg, args)
    wav = read_wav(args.infile) if args.infile else pipeline.make_fixture_wave(1.9)
    link = _make_link(cfg, args, Task.STT)
    try:
        tokens, trace = run_stt(
            wav, model, gate, link, force_escalate=True if args.force_escalate else None
        )
    finally:
        link.close()
    print(f"transcript: {pipeline.tokens_to_text(tokens) or '<empty>'}")
    _print_trace(trace)
    if args.out:
        _write_trace(trace, args.out)
    return 0


def _cmd_tts(args) -> int:
    from .audio import write_wav

    cfg = _load_config(args)
    model = build_split_model(cfgmod.model_config(cfg, Task.TTS))
    gate = _gate_config(cfg, args)
    link = _make_link(cfg, args, Task.TTS)
    try:
        wav, trace = run_tts(
            args.text, model, gate, link, force_escalate=True if args.force_escalate else None
        )
    finally:
        link.close()
    write_wav(args.out_wav, wav)
    print(f"audio: {wav.duration_s:.3f} s ({trace.n_output} mel frames) -> {args.out_wav}")
    _print_trace(trace)
    if args.out:
        _write_trace(trace, args.out)
    return 0


def _cmd_serve(args) -> int:
    cfg = _load_config(args)
    host, port = args.listen if args.listen else (None, None)
    serve(cfgmod.service_config(cfg, host=host, port=port))
    return 0


def _cmd_sweep(args) -> int:
    from .audio import read_wav

    cfg = _load_config(args)
    task = Task[args.task.upper()]
    model = build_split_model(cfgmod.model_config(cfg, task))
    service = CloudService(
        ServiceConfig(model_configs={task: model.config})
    )
    if task is Task.STT:
        input_ = read_wav(args.infile) if args.infile else pipeline.make_fixture_wave(1.9)
    else:
        input_ = args.text
    rows = sweep_bandwidth(model, input_, args.bandwidths, service.handle_request, args.rtt_s)
    out = Path(args.out)
    reports.write_csv(
        out,
        ["bandwidth_kbs", "cpu_time_s", "wall_time_s", "transfer_time_s", "uplink_bytes", "downlink_bytes"],
        [
            (r.bandwidth_kbs, r.cpu_time_s, r.wall_time_s, r.transfer_time_s, r.uplink_bytes, r.downlink_bytes)
            for r in rows
        ],
    )
    fig_path = reports.render_sweep_figure(rows, out.with_suffix(".svg"))
    for r in rows:
        print(
            f"{r.bandwidth_kbs:8.0f} KB/s  wall {r.wall_time_s:8.4f} s  "
            f"transfer {r.transfer_time_s:8.4f} s  cpu {r.cpu_time_s:.4f} s"
        )
    print(f"sweep written to {out} and {fig_path}")
    return 0


def _cmd_quantize(args) -> int:
    cfg = _load_config(args)
    specs = list(cfgmod.deployment_specs(cfg))
    for task in (Task.STT, Task.TTS):
        model = build_split_model(cfgmod.model_config(cfg, task))
        specs.append(
            DeploymentSpec(
                f"toy-{task.name.lower()}",
                edge_fp32_bytes=4 * param_count(model, "edge"),
                full_fp32_bytes=4 * param_count(model, "full"),
            )
        )
    rows = costmodel.memory_table(specs)
    header = [
        "name",
        "edge_fp32_mb",
        "full_fp32_mb",
        "edge_int8_mb",
        "edge_fraction_pct",
        "overall_usage_pct",
        "note",
    ]
    print(
        f"{'name':<10} {'edge MB':>9} {'full MB':>9} {'int8 MB':>9} "
        f"{'edge %':>7} {'overall %':>9}"
    )
    for row in rows:
        print(
            f"{row['name']:<10} {row['edge_fp32_mb']:>9.2f} {row['full_fp32_mb']:>9.2f} "
            f"{row['edge_int8_mb']:>9.2f} {row['edge_fraction_pct']:>7.2f} "
            f"{row['overall_usage_pct']:>9.2f}"
        )
    for row in rows:
        if row["note"]:
            print(f"note [{row['name']}]: {row['note']}")
    if args.out:
        reports.write_csv(args.out, header, [[r[k] for k in header] for r in rows])
        print(f"table written to {args.out}")
    return 0


def _cmd_fleet(args) -> int:
    cfg = _load_config(args)
    timings = cfgmod.reference_timings(cfg)
    if args.data is not None:
        fl = fleetmod.load_fleet(args.data)
    else:
        ref = resources.files("edgecascade").joinpath("data/device_fleet.csv")
        with resources.as_file(ref) as p:
            fl = fleetmod.load_fleet(p)
    task = Task[args.task.upper()]
    weighted = not args.unweighted
    paths = fleetmod.emit_report(
        fl,
        args.report_dir,
        mem_required_mb=args.mem_req,
        task=task,
        input_length=args.input_length,
        ref=timings,
        weighted=weighted,
    )
    deadline = (
        args.t_max
        if args.t_max is not None
        else costmodel.cpu_time(timings.ref_clock_ghz, task, args.input_length, timings)
    )
    shortfall = fleetmod.memory_shortfall_fraction(fl, args.mem_req, weighted)
    below = fleetmod.share_below_clock(fl, timings.ref_clock_ghz, weighted)
    feas = fleetmod.feasibility_fraction(fl, task, args.input_length, deadline, timings, weighted)
    print(f"devices: {len(fl)} (weighted by share: {weighted})")
    print(f"memory shortfall at {args.mem_req:g} MB: {shortfall:.4f}")
    print(f"share below {timings.ref_clock_ghz:g} GHz: {below:.4f}")
    print(f"feasible within {deadline:.3f} s: {feas:.4f}")
    for name in sorted(paths):
        print(f"wrote {paths[name]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgecascade",
        description="Edge-cloud cascaded speech inference and deployment analytics.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="key = value config file")
    common.add_argument("--seed", type=int, default=None, help="override model seeds")

    linkish = argparse.ArgumentParser(add_help=False)
    linkish.add_argument(
        "--cloud-addr", type=_addr, default=None, metavar="HOST:PORT",
        help="use a real cloud service instead of the in-process virtual link",
    )
    linkish.add_argument(
        "--virtual-bandwidth-kbs", type=float, default=None, metavar="KBS",
        help="virtual link bandwidth in KB/s (default from config)",
    )
    linkish.add_argument("--rtt-s", type=float, default=None, help="link round-trip time")
    linkish.add_argument(
        "--force-escalate", action="store_true",
        help="escalate to the cloud regardless of the gate verdict",
    )
    linkish.add_argument("--out", default=None, help="write the run trace CSV here")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stt", parents=[common, linkish], help="speech to text")
    p.add_argument("--in", dest="infile", default=None, help="mono 16-bit wav (default: bundled fixture)")
    p.add_argument("--stt-threshold", type=float, default=None, help="mean log-prob gate threshold")
    p.set_defaults(func=_cmd_stt)

    p = sub.add_parser("tts", parents=[common, linkish], help="text to speech")
    p.add_argument("--text", default=LONG_TEXT, help="input text")
    p.add_argument("--out-wav", default="tts_out.wav", help="output wav path")
    p.add_argument("--tts-threshold", type=float, default=None, help="SNR gate threshold in dB")
    p.set_defaults(func=_cmd_tts)

    p = sub.add_parser("serve", parents=[common], help="run the cloud encoder service")
    p.add_argument("--listen", type=_addr, default=None, metavar="HOST:PORT")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("sweep", parents=[common], help="wall time across link bandwidths")
    p.add_argument("--task", choices=["stt", "tts"], default="tts")
    p.add_argument("--text", default=LONG_TEXT, help="tts input text")
    p.add_argument("--in", dest="infile", default=None, help="stt input wav")
    p.add_argument(
        "--bandwidths", type=_bandwidth_list, default=_bandwidth_list(DEFAULT_BANDWIDTHS),
        metavar="K1,K2,...", help=f"KB/s values (default {DEFAULT_BANDWIDTHS})",
    )
    p.add_argument("--rtt-s", type=float, default=0.0)
    p.add_argument("--out", default="sweep.csv", help="output CSV (figure goes next to it)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("quantize", parents=[common], help="INT8 memory arithmetic table")
    p.add_argument("--out", default=None, help="write the table CSV here")
    p.set_defaults(func=_cmd_quantize)

    p = sub.add_parser("fleet", parents=[common], help="device fleet feasibility report")
    p.add_argument("--data", default=None, help="fleet CSV (default: bundled synthetic fleet)")
    p.add_argument("--report-dir", default="fleet_report", help="output directory")
    p.add_argument("--mem-req", type=float, default=149.0, help="edge memory requirement in MB")
    p.add_argument("--task", choices=["stt", "tts"], default="tts")
    p.add_argument("--input-length", type=float, default=12.0, help="deadline anchor input length")
    p.add_argument(
        "--t-max", type=float, default=None,
        help="deadline in seconds (default: reference-clock time for the input length)",
    )
    p.add_argument("--unweighted", action="store_true", help="ignore market share weights")
    p.set_defaults(func=_cmd_fleet)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConnectionFailed, HandlerError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (cfgmod.ConfigError, fleetmod.FleetFormatError, fleetmod.EmptyFleet, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
