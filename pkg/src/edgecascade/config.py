"""Plain "key = value" config files, with dotted prefixes as sections.

One file configures everything: stt.* and tts.* hold the two model
configs, gate.* the escalation thresholds, link.* the virtual link and
service.* the cloud endpoint. A bundled default file ships in the
package data.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .cloud_service import ServiceConfig
from .costmodel import BUNDLED_SPECS, DEFAULT_TIMINGS, DeploymentSpec, ReferenceTimings
from .gating import GateConfig
from .netsim import LinkSpec
from .toymodel import ModelConfig, Task


class ConfigError(ValueError):
    pass


def parse_kv_text(text: str, origin: str = "<string>") -> dict[str, str]:
    """One key = value per line; blank lines and # comments are skipped."""
    out: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{line_no}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{origin}:{line_no}: empty key")
        if key in out:
            raise ConfigError(f"{origin}:{line_no}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_kv_file(path) -> dict[str, str]:
    path = Path(path)
    return parse_kv_text(path.read_text(), origin=str(path))


def section(mapping: dict[str, str], prefix: str) -> dict[str, str]:
    """Keys under "prefix." with the prefix stripped."""
    dot = prefix + "."
    return {k[len(dot):]: v for k, v in mapping.items() if k.startswith(dot)}


def bundled_text(name: str) -> str:
    return resources.files("edgecascade").joinpath(f"data/{name}").read_text()


def load_config(path=None) -> dict[str, str]:
    """The parsed config mapping; None loads the bundled defaults."""
    if path is None:
        return parse_kv_text(bundled_text("default.cfg"), origin="bundled default.cfg")
    return parse_kv_file(path)


def model_config(cfg: dict[str, str], task: Task) -> ModelConfig:
    name = "stt" if task is Task.STT else "tts"
    sec = section(cfg, name)
    if not sec:
        raise ConfigError(f"config has no {name}.* section")
    return ModelConfig.from_mapping(sec)


def gate_config(cfg: dict[str, str]) -> GateConfig:
    sec = section(cfg, "gate")
    known = {"stt_logprob_threshold", "tts_snr_db_threshold"}
    unknown = set(sec) - known
    if unknown:
        raise ConfigError(f"unknown gate keys: {sorted(unknown)}")
    kwargs = {}
    for key, raw in sec.items():
        try:
            kwargs[key] = float(raw)
        except ValueError:
            raise ConfigError(f"bad gate.{key} value {raw!r}") from None
    return GateConfig(**kwargs)


def link_spec(cfg: dict[str, str], bandwidth_kbs: float | None = None, rtt_s: float | None = None) -> LinkSpec:
    sec = section(cfg, "link")
    try:
        kbs = bandwidth_kbs if bandwidth_kbs is not None else float(sec.get("bandwidth_kbs", 1024.0))
        rtt = rtt_s if rtt_s is not None else float(sec.get("rtt_s", 0.0))
    except ValueError as e:
        raise ConfigError(f"bad link.* value: {e}") from None
    return LinkSpec.from_kbs(kbs, rtt)


def _parse_points(raw: str, key: str) -> tuple:
    """"12:0.5, 270:8.9" -> ((12.0, 0.5), (270.0, 8.9))."""
    points = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        length, sep, seconds = part.partition(":")
        if not sep:
            raise ConfigError(f"bad {key} entry {part!r}, expected length:seconds")
        try:
            points.append((float(length), float(seconds)))
        except ValueError:
            raise ConfigError(f"bad {key} entry {part!r}") from None
    if len(points) < 2:
        raise ConfigError(f"{key} needs at least two length:seconds points")
    return tuple(points)


def reference_timings(cfg: dict[str, str]) -> ReferenceTimings:
    """timings.* section; absent keys fall back to the bundled anchors."""
    sec = section(cfg, "timings")
    if not sec:
        return DEFAULT_TIMINGS
    known = {"ref_clock_ghz", "tts_points", "stt_points"}
    unknown = set(sec) - known
    if unknown:
        raise ConfigError(f"unknown timings keys: {sorted(unknown)}")
    kwargs = {}
    if "ref_clock_ghz" in sec:
        try:
            kwargs["ref_clock_ghz"] = float(sec["ref_clock_ghz"])
        except ValueError:
            raise ConfigError(f"bad timings.ref_clock_ghz {sec['ref_clock_ghz']!r}") from None
    for key in ("tts_points", "stt_points"):
        if key in sec:
            kwargs[key] = _parse_points(sec[key], f"timings.{key}")
    return ReferenceTimings(**kwargs)


def deployment_specs(cfg: dict[str, str]) -> tuple[DeploymentSpec, ...]:
    """deploy.<name>.* sections; absent, the bundled specs apply.

    Each spec needs edge_mb and edge_fraction_pct, plus an optional
    reported_quantized_mb.
    """
    sec = section(cfg, "deploy")
    if not sec:
        return BUNDLED_SPECS
    grouped: dict[str, dict[str, str]] = {}
    for key, value in sec.items():
        name, dot, field_name = key.partition(".")
        if not dot:
            raise ConfigError(f"deploy keys look like deploy.<name>.<field>, got deploy.{key}")
        grouped.setdefault(name, {})[field_name] = value
    specs = []
    for name, fields in grouped.items():
        unknown = set(fields) - {"edge_mb", "edge_fraction_pct", "reported_quantized_mb"}
        if unknown:
            raise ConfigError(f"unknown deploy.{name} keys: {sorted(unknown)}")
        try:
            specs.append(
                DeploymentSpec.from_mb(
                    name,
                    edge_mb=float(fields["edge_mb"]),
                    edge_fraction_pct=float(fields["edge_fraction_pct"]),
                    reported_quantized_mb=(
                        float(fields["reported_quantized_mb"])
                        if "reported_quantized_mb" in fields
                        else None
                    ),
                )
            )
        except KeyError as e:
            raise ConfigError(f"deploy.{name} is missing {e.args[0]}") from None
        except ValueError as e:
            raise ConfigError(f"bad deploy.{name} value: {e}") from None
    return tuple(specs)


def service_config(cfg: dict[str, str], host: str | None = None, port: int | None = None) -> ServiceConfig:
    sec = section(cfg, "service")
    try:
        resolved_host = host if host is not None else sec.get("host", "127.0.0.1")
        resolved_port = port if port is not None else int(sec.get("port", 0))
        max_payload = int(sec.get("max_payload_bytes", 8 * 1024 * 1024))
    except ValueError as e:
        raise ConfigError(f"bad service.* value: {e}") from None
    return ServiceConfig(
        model_configs={
            Task.STT: model_config(cfg, Task.STT),
            Task.TTS: model_config(cfg, Task.TTS),
        },
        host=resolved_host,
        port=resolved_port,
        max_payload_bytes=max_payload,
    )
