import csv

import pytest

from edgecascade.cli import TRACE_COLUMNS, main
from edgecascade.cloud_service import CloudServer
from edgecascade.config import load_config, service_config


def _read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


SMALL_CFG = """
stt.task = stt
stt.n_enc_layers_full = 3
stt.n_enc_layers_edge = 1
stt.n_dec_layers = 1
stt.n_mel = 16
stt.max_tgt_len = 8
stt.enc_fixed_len = 8
stt.seed = 7
tts.task = tts
tts.n_enc_layers_full = 3
tts.n_enc_layers_edge = 1
tts.n_dec_layers = 1
tts.n_mel = 12
tts.max_tgt_len = 12
tts.seed = 11
"""


@pytest.fixture()
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL_CFG)
    return str(p)


def test_stt_forced_escalation_writes_trace(tmp_path, small_cfg, capsys):
    out = tmp_path / "trace.csv"
    rc = main(["stt", "--config", small_cfg, "--force-escalate", "--out", str(out)])
    assert rc == 0
    rows = _read_csv(out)
    assert rows[0] == TRACE_COLUMNS
    record = dict(zip(rows[0], rows[1]))
    assert record["task"] == "stt"
    assert record["escalated"] == "1"
    assert int(record["uplink_bytes"]) > 0
    assert "escalated to cloud" in capsys.readouterr().out


def test_tts_run_writes_wav(tmp_path, small_cfg, capsys):
    wav = tmp_path / "out.wav"
    rc = main([
        "tts", "--config", small_cfg, "--text", "short cli check",
        "--out-wav", str(wav), "--tts-threshold=-1e9",
    ])
    assert rc == 0
    assert wav.exists() and wav.stat().st_size > 44
    assert "edge only" in capsys.readouterr().out


def test_stt_against_real_service(tmp_path, small_cfg):
    cfg = load_config(small_cfg)
    with CloudServer(service_config(cfg, port=0)) as server:
        host, port = server.address
        out = tmp_path / "trace.csv"
        rc = main([
            "stt", "--config", small_cfg, "--force-escalate",
            "--cloud-addr", f"{host}:{port}", "--out", str(out),
        ])
    assert rc == 0
    record = dict(zip(*_read_csv(out)))
    assert record["escalated"] == "1"


def test_cloud_unreachable_is_exit_1(small_cfg, capsys):
    rc = main([
        "stt", "--config", small_cfg, "--force-escalate",
        "--cloud-addr", "127.0.0.1:1",
    ])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_sweep_writes_table_and_figure(tmp_path, small_cfg, capsys):
    out = tmp_path / "sweep.csv"
    rc = main([
        "sweep", "--config", small_cfg, "--task", "tts", "--text", "sweep target",
        "--bandwidths", "64,256,1024", "--out", str(out),
    ])
    assert rc == 0
    rows = _read_csv(out)
    assert rows[0] == ["bandwidth_kbs", "cpu_time_s", "wall_time_s",
                       "transfer_time_s", "uplink_bytes", "downlink_bytes"]
    assert len(rows) == 4
    walls = [float(r[2]) for r in rows[1:]]
    assert walls[0] > walls[1] > walls[2]
    fig = out.with_suffix(".svg")
    assert fig.exists() and fig.read_bytes().startswith(b"<?xml")


def test_quantize_table(tmp_path, capsys):
    out = tmp_path / "memory.csv"
    rc = main(["quantize", "--out", str(out)])
    assert rc == 0
    printed = capsys.readouterr().out
    for name in ("speecht5", "whisper", "toy-stt", "toy-tts"):
        assert name in printed
    assert "note [speecht5]" in printed and "note [whisper]" in printed
    rows = _read_csv(out)
    table = {r[0]: dict(zip(rows[0], r)) for r in rows[1:]}
    assert float(table["speecht5"]["edge_int8_mb"]) == 56.5
    assert float(table["whisper"]["edge_int8_mb"]) == 141.75


def test_fleet_report_command(tmp_path, capsys):
    report = tmp_path / "report"
    rc = main(["fleet", "--report-dir", str(report)])
    assert rc == 0
    for name in ("summary.csv", "memory_cdf.csv", "clock_hist.csv",
                 "feasibility.csv", "memory_cdf.svg", "clock_hist.svg", "feasibility.svg"):
        assert (report / name).exists(), name
    printed = capsys.readouterr().out
    assert "memory shortfall at 149 MB: 0.0400" in printed
    assert "share below 1.7 GHz: 0.8000" in printed
    assert "feasible within 0.500 s: 0.2000" in printed


def test_fleet_t_max_override(tmp_path, capsys):
    rc = main(["fleet", "--report-dir", str(tmp_path / "r"), "--t-max", "100.0"])
    assert rc == 0
    assert "feasible within 100.000 s: 1.0000" in capsys.readouterr().out


def test_fleet_bad_data_is_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("model,share,memory_mb,cpu_ghz\nx,0.5,not_a_number,1.0\n")
    rc = main(["fleet", "--data", str(bad), "--report-dir", str(tmp_path / "r")])
    assert rc == 2
    assert "bad memory_mb" in capsys.readouterr().err


def test_missing_config_is_exit_2(tmp_path, capsys):
    rc = main(["quantize", "--config", str(tmp_path / "absent.cfg")])
    assert rc == 2
