"""Acceptance suite: one test per shipped guarantee, one printed verdict each.

Each test prints a single "criterion N: PASS/FAIL" line (bypassing pytest
capture so the verdicts survive in piped logs) and then asserts, so a red
run still names the criterion that broke.
"""

import socketserver
import sys
import threading
import time

import numpy as np
import pytest

from edgecascade import wire
from edgecascade.audio import MelSpec, log_mel, mse_loss, wer
from edgecascade.cloud_service import CloudServer, CloudService, ServiceConfig
from edgecascade.config import gate_config, load_config, model_config, service_config
from edgecascade.costmodel import (
    MB,
    SPEECHT5,
    WHISPER,
    edge_memory_requirement,
    cpu_time,
    overall_usage_pct,
    quantized_note,
)
from edgecascade.fleet import (
    DeviceRecord,
    Fleet,
    feasibility_fraction,
    load_fleet,
    memory_shortfall_fraction,
    share_below_clock,
)
from edgecascade.gating import GateConfig
from edgecascade.netsim import (
    LEN_PREFIX,
    LinkSpec,
    RealLink,
    VirtualLink,
    recv_exact,
)
from edgecascade.pipeline import (
    LONG_TEXT,
    SHORT_TEXT,
    make_fixture_wave,
    run_stt,
    run_tts,
    sweep_bandwidth,
)
from edgecascade.tensors import DType, Tensor, dequantize, quantize_linear
from edgecascade.toymodel import (
    ModelConfig,
    Task,
    build_split_model,
    decoder_greedy,
    encoder_forward,
    param_count,
    prenet_forward,
)

PASS_GATES = GateConfig(stt_logprob_threshold=-1e9, tts_snr_db_threshold=-1e9)
ESCALATE_GATES = GateConfig(stt_logprob_threshold=1.0, tts_snr_db_threshold=1e9)


def _verdict(capsys, n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    with capsys.disabled():
        print(line, flush=True)
    assert ok, line


@pytest.fixture(scope="module")
def cfg():
    return load_config()


@pytest.fixture(scope="module")
def stt_model(cfg):
    return build_split_model(model_config(cfg, Task.STT))


@pytest.fixture(scope="module")
def tts_model(cfg):
    return build_split_model(model_config(cfg, Task.TTS))


@pytest.fixture(scope="module")
def service(cfg):
    return CloudService(service_config(cfg))


def _vlink(service, kbs=512.0):
    return VirtualLink(LinkSpec.from_kbs(kbs), service.handle_request)


def test_criterion_1_quantization_memory_arithmetic(capsys):
    small = edge_memory_requirement(SPEECHT5) / MB
    large = edge_memory_requirement(WHISPER) / MB
    note = quantized_note(WHISPER)
    ok = (
        abs(small - 56.5) <= 0.5
        and abs(large - 141.75) <= 1e-9
        and note is not None
        and "149" in note
        and abs(overall_usage_pct(SPEECHT5) - 9.5) <= 0.2
        and abs(overall_usage_pct(WHISPER) - 14.0) <= 1.0
    )
    _verdict(
        capsys, 1, ok,
        f"int8 {small:.2f}/{large:.2f} MB, overall "
        f"{overall_usage_pct(SPEECHT5):.2f}%/{overall_usage_pct(WHISPER):.2f}%, "
        f"annotation={'yes' if note else 'no'}",
    )


def test_criterion_2_inverse_clock_law(capsys):
    clocks = (0.5, 1.0, 1.7, 3.4)
    spreads = []
    for task, length in ((Task.TTS, 12.0), (Task.TTS, 270.0), (Task.STT, 1.0), (Task.STT, 19.0)):
        products = [cpu_time(f, task, length) * f for f in clocks]
        spreads.append(max(products) - min(products))
    short_tts = cpu_time(1.0, Task.TTS, 12.0)
    delta = cpu_time(1.7, Task.STT, 19.0) - cpu_time(1.7, Task.STT, 1.0)
    ok = (
        all(s <= 1e-15 for s in spreads)
        and abs(short_tts - 0.85) <= 1e-9
        and short_tts < 1.0
        and abs(delta - 0.95) <= 1e-9
        and abs(delta - 0.9) <= 0.1
    )
    _verdict(
        capsys, 2, ok,
        f"product spread max {max(spreads):.2e}, tts(1GHz,12ch)={short_tts:.4f} s, "
        f"stt delta {delta:.4f} s",
    )


def test_criterion_3_fixed_payload_law(capsys, stt_model, tts_model, service):
    _, short = run_stt(make_fixture_wave(0.1), stt_model, ESCALATE_GATES, _vlink(service))
    _, long = run_stt(make_fixture_wave(1.9), stt_model, ESCALATE_GATES, _vlink(service))
    same_payload = (
        short.escalated and long.escalated
        and short.uplink_bytes == long.uplink_bytes
        and short.downlink_bytes == long.downlink_bytes
    )
    wall_diff = long.wall_time_s - short.wall_time_s
    cpu_diff = long.cpu_time_s - short.cpu_time_s
    virtual_identity = abs(wall_diff - cpu_diff) <= 1e-12

    affine = True
    for text in (SHORT_TEXT, LONG_TEXT):
        _, trace = run_tts(text, tts_model, ESCALATE_GATES, _vlink(service))
        d_model = tts_model.config.d_model
        affine = affine and trace.uplink_bytes == 24 + len(text) * d_model * 4
    ok = same_payload and virtual_identity and affine
    _verdict(
        capsys, 3, ok,
        f"stt payload {short.uplink_bytes}/{short.downlink_bytes} B both durations, "
        f"|wall diff - cpu diff| = {abs(wall_diff - cpu_diff):.2e}, tts affine "
        f"{'holds' if affine else 'broken'}",
    )


def test_criterion_4_bandwidth_sweep_shape(capsys, tts_model, service):
    start = time.perf_counter()
    bws = [64.0, 128.0, 256.0, 512.0, 1024.0, 2048.0, 4096.0]
    rows = sweep_bandwidth(tts_model, LONG_TEXT, bws, service.handle_request)
    elapsed = time.perf_counter() - start
    walls = [r.wall_time_s for r in rows]
    decreasing = all(a > b for a, b in zip(walls, walls[1:]))
    transfer_dominates = all(
        r.transfer_time_s > 0.5 * r.wall_time_s for r in rows if r.bandwidth_kbs <= 512.0
    )
    cpu_invariant = len({r.cpu_time_s for r in rows}) == 1
    ok = decreasing and transfer_dominates and cpu_invariant and elapsed < 10.0
    _verdict(
        capsys, 4, ok,
        f"wall {walls[0]:.3f}..{walls[-1]:.3f} s decreasing={decreasing}, "
        f"transfer>50% at slow links={transfer_dominates}, cpu invariant={cpu_invariant}, "
        f"ran in {elapsed:.2f} s",
    )


class _DrainReply(socketserver.BaseRequestHandler):
    def handle(self):
        try:
            while True:
                (length,) = LEN_PREFIX.unpack(recv_exact(self.request, LEN_PREFIX.size))
                recv_exact(self.request, length)
                self.request.sendall(
                    LEN_PREFIX.pack(len(self.server.reply)) + self.server.reply
                )
        except OSError:
            return


def test_criterion_5_cascade_correctness(capsys, stt_model, tts_model, service, cfg):
    calls = []

    def counting(frame):
        calls.append(len(frame))
        return service.handle_request(frame)

    # gate passes: identical output to an edge-only run, nothing on the wire
    w = make_fixture_wave(1.9)
    link = VirtualLink(LinkSpec.from_kbs(512.0), counting)
    passed_tokens, passed = run_stt(w, stt_model, PASS_GATES, link)
    edge_tokens, edge = run_stt(w, stt_model, PASS_GATES)
    wav_linked, _ = run_tts(SHORT_TEXT, tts_model, PASS_GATES, link)
    wav_edge, _ = run_tts(SHORT_TEXT, tts_model, PASS_GATES)
    pass_identical = (
        passed_tokens == edge_tokens
        and not passed.escalated
        and passed.uplink_bytes == 0
        and passed.downlink_bytes == 0
        and not calls
        and np.array_equal(wav_linked.samples, wav_edge.samples)
    )

    # served responses match in-process cloud encoding byte for byte
    feats = prenet_forward(stt_model, log_mel(w, 400, 160, stt_model.config.n_mel))
    request = wire.encode_frame(wire.TASK_STT, wire.KIND_FEATURES, feats)
    local_hidden = encoder_forward(service.models[Task.STT], feats, which="cloud")
    expected = wire.encode_frame(wire.TASK_STT, wire.KIND_HIDDEN_STATES, local_hidden.tensor)
    with CloudServer(service_config(cfg, port=0)) as server:
        host, port = server.address
        with RealLink(host, port, LinkSpec.from_kbs(8192.0)) as rlink:
            served, _, _ = rlink.send_recv(request)
    service_identical = served == expected == service.handle_request(request)

    # wire round trips are bit-exact; every single-byte corruption is caught
    rng = np.random.default_rng(55)
    round_trip = True
    for dtype in (DType.FP32, DType.INT8):
        for shape in ((1,), (3, 5), (2, 4, 8), (64, 64)):
            values = rng.normal(0, 2, shape).astype(np.float32)
            t = Tensor(values) if dtype is DType.FP32 else quantize_linear(Tensor(values))
            for task, kind in ((wire.TASK_STT, wire.KIND_FEATURES), (wire.TASK_TTS, wire.KIND_HIDDEN_STATES)):
                frame = wire.encode_frame(task, kind, t)
                task2, kind2, back = wire.decode_frame(frame)
                round_trip = round_trip and (task2, kind2) == (task, kind)
                round_trip = round_trip and np.array_equal(back.data, t.data)
                round_trip = round_trip and wire.encode_frame(task2, kind2, back) == frame

    probe = wire.encode_frame(wire.TASK_STT, wire.KIND_FEATURES,
                              Tensor(rng.normal(size=(3, 4)).astype(np.float32)))
    corruption_caught = True
    for i in range(len(probe)):
        mutated = bytearray(probe)
        mutated[i] ^= 0x01
        try:
            wire.decode_frame(bytes(mutated))
            corruption_caught = False
        except wire.WireError:
            pass

    ok = pass_identical and service_identical and round_trip and corruption_caught
    _verdict(
        capsys, 5, ok,
        f"gate-pass identical={pass_identical}, service bytes identical={service_identical}, "
        f"round trips exact={round_trip}, {len(probe)}/{len(probe)} corruptions caught="
        f"{corruption_caught}",
    )


def test_criterion_6_model_properties(capsys, cfg, stt_model, tts_model):
    # causal prefix: a capped decode is a bit-exact prefix of the full decode
    prefix_holds = True
    for seed in range(20):
        small_stt = ModelConfig(
            task=Task.STT, n_enc_layers_full=3, n_enc_layers_edge=1, n_dec_layers=1,
            n_mel=16, max_tgt_len=10, enc_fixed_len=8, seed=seed,
        )
        small_tts = ModelConfig(
            task=Task.TTS, n_enc_layers_full=3, n_enc_layers_edge=1, n_dec_layers=1,
            n_mel=12, max_tgt_len=12, seed=seed,
        )
        rng = np.random.default_rng(seed)
        m = build_split_model(small_stt)
        mel = MelSpec(rng.normal(0, 1, (24, 16)).astype(np.float32), 160, 16000)
        hidden = encoder_forward(m, prenet_forward(m, mel))
        full = decoder_greedy(m, hidden)
        for k in range(1, full.n_steps + 1):
            part = decoder_greedy(m, hidden, max_steps=k)
            prefix_holds = prefix_holds and part.tokens == full.tokens[: len(part.tokens)]
            prefix_holds = prefix_holds and np.array_equal(
                part.step_logprobs, full.step_logprobs[: part.n_steps]
            )
        m = build_split_model(small_tts)
        hidden = encoder_forward(m, prenet_forward(m, list(rng.integers(1, 128, size=6))))
        full = decoder_greedy(m, hidden)
        for k in range(1, full.n_steps + 1):
            part = decoder_greedy(m, hidden, max_steps=k)
            prefix_holds = prefix_holds and np.array_equal(
                part.mel.frames, full.mel.frames[: part.n_steps]
            )

    # attention rows are distributions on both encoder splits
    rng = np.random.default_rng(3)
    feats = Tensor(rng.normal(0, 0.5, (64, 64)).astype(np.float32))
    rows_ok = True
    for which in ("edge", "cloud"):
        _, maps = encoder_forward(stt_model, feats, which=which, return_attn=True)
        for m_ in maps:
            rows_ok = rows_ok and bool(np.all(np.abs(m_.sum(axis=-1) - 1.0) <= 1e-5))

    # same-seed rebuilds are bit-identical
    rebuilt = build_split_model(stt_model.config)
    identical = all(
        np.array_equal(stt_model.edge_params[k].data, rebuilt.edge_params[k].data)
        for k in stt_model.edge_params
    ) and all(
        np.array_equal(stt_model.cloud_params[k].data, rebuilt.cloud_params[k].data)
        for k in stt_model.cloud_params
    )

    stt_frac = param_count(stt_model, "edge") / param_count(stt_model, "full")
    tts_frac = param_count(tts_model, "edge") / param_count(tts_model, "full")
    fractions_ok = abs(stt_frac - 0.56) <= 0.02 and abs(tts_frac - 0.38) <= 0.02

    ok = prefix_holds and rows_ok and identical and fractions_ok
    _verdict(
        capsys, 6, ok,
        f"prefix(20 seeds)={prefix_holds}, attn rows={rows_ok}, rebuild identical={identical}, "
        f"edge fractions {stt_frac:.3f}/{tts_frac:.3f}",
    )


def _edit_distance(ref, hyp):
    n, m = len(ref), len(hyp)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            d[i, j] = min(d[i - 1, j] + 1, d[i, j - 1] + 1, d[i - 1, j - 1] + cost)
    return int(d[n, m])


def test_criterion_7_metric_oracles(capsys):
    rng = np.random.default_rng(1234)
    wer_exact = True
    for _ in range(500):
        ref = list(rng.integers(0, 6, size=int(rng.integers(1, 15))))
        hyp = list(rng.integers(0, 6, size=int(rng.integers(0, 15))))
        wer_exact = wer_exact and wer(ref, hyp) == 100.0 * _edit_distance(ref, hyp) / len(ref)
    example = wer("how is it going", "how is it")

    mse_exact = True
    for _ in range(50):
        shape = (int(rng.integers(1, 9)), int(rng.integers(1, 9)))
        a, b = rng.normal(size=shape), rng.normal(size=shape)
        naive = sum(
            (a[i, j] - b[i, j]) ** 2 for i in range(shape[0]) for j in range(shape[1])
        ) / (shape[0] * shape[1])
        mse_exact = mse_exact and abs(mse_loss(a, b) - naive) <= 1e-12

    quant_ok = True
    worst = 0.0
    for seed in range(100):
        r = np.random.default_rng(seed)
        shape = tuple(r.integers(1, 12, size=r.integers(1, 4)))
        scale_mag = 10.0 ** r.uniform(-3, 2)
        values = (r.normal(0, scale_mag, shape)).astype(np.float32)
        if seed % 7 == 0:
            values = np.abs(values)
        q = quantize_linear(Tensor(values))
        err = float(np.abs(dequantize(q).data - values).max())
        bound = q.quant.scale / 2 + 1e-6
        worst = max(worst, err - bound)
        quant_ok = quant_ok and err <= bound

    ok = wer_exact and example == 25.0 and mse_exact and quant_ok
    _verdict(
        capsys, 7, ok,
        f"wer oracle 500/500 exact={wer_exact}, example={example:.1f}, "
        f"mse<=1e-12={mse_exact}, quant bound slack {worst:.2e}",
    )


def test_criterion_8_fleet_analytics(capsys):
    from importlib import resources

    start = time.perf_counter()
    with resources.as_file(resources.files("edgecascade") / "data/device_fleet.csv") as p:
        fleet = load_fleet(p)
    shortfall = memory_shortfall_fraction(fleet, 149.0)
    below = share_below_clock(fleet, 1.7)
    deadline = cpu_time(1.7, Task.TTS, 12.0)
    feasible = feasibility_fraction(fleet, Task.TTS, 12.0, deadline)

    monotone = True
    rng = np.random.default_rng(99)
    for _ in range(20):
        n = int(rng.integers(2, 25))
        recs = tuple(
            DeviceRecord(f"d{i}", float(rng.uniform(0.01, 1)), float(rng.uniform(32, 2048)),
                         float(rng.uniform(0.4, 3.2)))
            for i in range(n)
        )
        total = sum(r.share for r in recs)
        f = Fleet(tuple(DeviceRecord(r.model, r.share / total, r.memory_mb, r.clock_ghz)
                        for r in recs))
        mems = sorted(rng.uniform(16, 4096, size=4))
        shorts = [memory_shortfall_fraction(f, m) for m in mems]
        monotone = monotone and all(x <= y + 1e-12 for x, y in zip(shorts, shorts[1:]))
        ts = sorted(rng.uniform(0.05, 20.0, size=4))
        feas = [feasibility_fraction(f, Task.STT, 3.0, t) for t in ts]
        monotone = monotone and all(x <= y + 1e-12 for x, y in zip(feas, feas[1:]))
    elapsed = time.perf_counter() - start

    ok = (
        abs(shortfall - 0.04) <= 0.005
        and abs(below - 0.80) <= 0.01
        and abs(feasible - 0.20) <= 0.01
        and monotone
        and elapsed < 5.0
    )
    _verdict(
        capsys, 8, ok,
        f"shortfall {shortfall:.4f}, below-ref {below:.4f}, feasible {feasible:.4f}, "
        f"monotone={monotone}, ran in {elapsed:.2f} s",
    )


@pytest.mark.timed
def test_criterion_9_real_link_throughput(capsys):
    cap = 512.0 * 1024
    rng = np.random.default_rng(0)
    payload = Tensor(rng.normal(size=(8192, 64)).astype(np.float32))  # 2 MiB
    frame = wire.encode_frame(wire.TASK_STT, wire.KIND_FEATURES, payload)

    class _Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    srv = _Server(("127.0.0.1", 0), _DrainReply)
    srv.reply = wire.encode_frame(
        wire.TASK_STT, wire.KIND_HIDDEN_STATES,
        Tensor(np.zeros((1, 1), dtype=np.float32)),
    )
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    try:
        host, port = srv.server_address[:2]
        with RealLink(host, port, LinkSpec(cap)) as link:
            _, up, _ = link.send_recv(frame)
    finally:
        srv.shutdown()
        srv.server_close()
    throughput = up.nbytes / up.transfer_time_s
    ok = 0.85 * cap <= throughput <= 1.15 * cap
    _verdict(
        capsys, 9, ok,
        f"{up.nbytes} B in {up.transfer_time_s:.2f} s = {throughput / 1024:.1f} KB/s "
        f"against a 512 KB/s cap",
    )
