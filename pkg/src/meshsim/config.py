"""Scenario configuration: line-oriented `key = value` text with `#`
comments, validated exhaustively so a typo can never silently change an
experiment.  Every invalid line is reported with its line number; parsing
either returns a complete config or raises with the full error list.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

VALID_RTS_MODES = ("symmetric", "literal")
VALID_TRAFFIC_CLASSES = ("qos", "delay_tolerant")
VALID_PROTOCOLS = ("aodv_hop", "corciar", "both")
NAMED_CHANNEL_PLANS = ("orthogonal", "overlapping", "pcl")

_TOPOLOGY_RE = re.compile(r"^(chain|random)\((\d+)(?:\s*,\s*(\d+))?\)$|^mesh8$")
_EXPLICIT_PLAN_RE = re.compile(r"^\d+(?:\s*,\s*\d+)*(?:\s*;\s*\d+(?:\s*,\s*\d+)*)*$")


class ConfigError(ValueError):
    def __init__(self, errors: List[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class TopologySpec:
    kind: str                      # "chain" | "random" | "mesh8"
    n: int = 0
    placement_seed: Optional[int] = None

    def label(self) -> str:
        if self.kind == "mesh8":
            return "mesh8"
        if self.kind == "random" and self.placement_seed is not None:
            return f"random({self.n},{self.placement_seed})"
        return f"{self.kind}({self.n})"


@dataclass(frozen=True)
class ScenarioConfig:
    topology: TopologySpec = TopologySpec(kind="chain", n=6)
    radios_per_node: int = 2
    channel_plan: str = "orthogonal"
    rts_mode: str = "symmetric"
    traffic_class: str = "qos"
    protocol: str = "both"
    sim_time_s: float = 100.0
    packet_size_bytes: int = 1000
    data_rate_bps: float = 1_000_000.0
    alpha: float = 0.5
    delta: float = 0.125
    theta: float = 0.1
    window: int = 4
    queue_capacity: int = 50
    flows: Tuple[Tuple[int, int], ...] = ()   # empty means automatic selection
    seed: int = 1
    jammer_channel: Optional[int] = None
    jammer_x: float = 0.0
    jammer_y: float = 0.0
    jammer_on_s: float = 0.080
    jammer_off_s: float = 0.010


def _parse_topology(value: str, lineno: int, errors: List[str]) -> Optional[TopologySpec]:
    m = _TOPOLOGY_RE.match(value.strip())
    if not m:
        errors.append(f"line {lineno}: topology must be chain(n), random(n[, seed]), "
                      f"or mesh8, got {value!r}")
        return None
    if value.strip() == "mesh8":
        return TopologySpec(kind="mesh8", n=8)
    kind, n_text, seed_text = m.group(1), m.group(2), m.group(3)
    n = int(n_text)
    if n < 2:
        errors.append(f"line {lineno}: topology needs at least 2 nodes, got {n}")
        return None
    if kind == "chain" and seed_text is not None:
        errors.append(f"line {lineno}: chain(n) takes no seed argument")
        return None
    return TopologySpec(kind=kind, n=n,
                        placement_seed=int(seed_text) if seed_text else None)


def _parse_flows(value: str, lineno: int, errors: List[str]):
    value = value.strip()
    if value == "auto":
        return ()
    flows = []
    for part in value.split(","):
        part = part.strip()
        m = re.match(r"^(\d+)\s*>\s*(\d+)$", part)
        if not m:
            errors.append(f"line {lineno}: flow {part!r} must look like src>dst")
            return None
        src, dst = int(m.group(1)), int(m.group(2))
        if src == dst:
            errors.append(f"line {lineno}: flow source {src} equals its destination")
            return None
        flows.append((src, dst))
    return tuple(flows)


def _parse_channel_plan(value: str, lineno: int, errors: List[str]) -> Optional[str]:
    value = value.strip()
    if value in NAMED_CHANNEL_PLANS:
        return value
    if not _EXPLICIT_PLAN_RE.match(value):
        errors.append(f"line {lineno}: channel_plan must be one of "
                      f"{'/'.join(NAMED_CHANNEL_PLANS)} or an explicit "
                      f"semicolon-separated per-node list like 1,6;6,11")
        return None
    for group in value.split(";"):
        for ch_text in group.split(","):
            ch = int(ch_text)
            if not 1 <= ch <= 11:
                errors.append(f"line {lineno}: channel {ch} outside 1..11")
                return None
    return re.sub(r"\s+", "", value)


def _int_field(raw, lineno, key, errors, minimum=None, maximum=None):
    try:
        if re.match(r"^[+-]?\d+$", raw.strip()) is None:
            raise ValueError
        value = int(raw)
    except ValueError:
        errors.append(f"line {lineno}: {key} must be an integer, got {raw!r}")
        return None
    if minimum is not None and value < minimum:
        errors.append(f"line {lineno}: {key} must be >= {minimum}, got {value}")
        return None
    if maximum is not None and value > maximum:
        errors.append(f"line {lineno}: {key} must be <= {maximum}, got {value}")
        return None
    return value


def _float_field(raw, lineno, key, errors, unit=""):
    try:
        value = float(raw)
    except ValueError:
        errors.append(f"line {lineno}: {key} must be a number{unit}, got {raw!r}")
        return None
    return value


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate; raises ConfigError carrying every problem found."""
    errors: List[str] = []
    updates = {}
    seen = {}

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected key = value, got {raw_line.strip()!r}")
            continue
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in seen:
            errors.append(f"line {lineno}: duplicate key {key} (first set on line {seen[key]})")
            continue
        seen[key] = lineno

        if key == "topology":
            spec = _parse_topology(raw, lineno, errors)
            if spec is not None:
                updates["topology"] = spec
        elif key == "radios_per_node":
            v = _int_field(raw, lineno, key, errors, minimum=1, maximum=11)
            if v is not None:
                updates[key] = v
        elif key == "channel_plan":
            v = _parse_channel_plan(raw, lineno, errors)
            if v is not None:
                updates[key] = v
        elif key == "rts_mode":
            if raw not in VALID_RTS_MODES:
                errors.append(f"line {lineno}: rts_mode must be one of {VALID_RTS_MODES}")
            else:
                updates[key] = raw
        elif key == "traffic_class":
            if raw not in VALID_TRAFFIC_CLASSES:
                errors.append(f"line {lineno}: traffic_class must be one of {VALID_TRAFFIC_CLASSES}")
            else:
                updates[key] = raw
        elif key == "protocol":
            if raw not in VALID_PROTOCOLS:
                errors.append(f"line {lineno}: protocol must be one of {VALID_PROTOCOLS}")
            else:
                updates[key] = raw
        elif key == "sim_time_s":
            v = _float_field(raw, lineno, key, errors, unit=" (seconds)")
            if v is not None:
                if v < 0:
                    errors.append(f"line {lineno}: sim_time_s must be >= 0 seconds")
                else:
                    updates[key] = v
        elif key == "packet_size_bytes":
            v = _int_field(raw, lineno, key, errors, minimum=1)
            if v is not None:
                updates[key] = v
        elif key == "data_rate_bps":
            v = _float_field(raw, lineno, key, errors, unit=" (bits/second)")
            if v is not None:
                if v <= 0:
                    errors.append(f"line {lineno}: data_rate_bps must be positive")
                else:
                    updates[key] = v
        elif key == "alpha":
            v = _float_field(raw, lineno, key, errors)
            if v is not None:
                if not 0.0 <= v <= 1.0:
                    errors.append(f"line {lineno}: alpha must be in [0,1]")
                else:
                    updates[key] = v
        elif key == "delta":
            v = _float_field(raw, lineno, key, errors)
            if v is not None:
                if not 0.0 < v < 1.0:
                    errors.append(f"line {lineno}: delta must be in (0,1)")
                else:
                    updates[key] = v
        elif key == "theta":
            v = _float_field(raw, lineno, key, errors)
            if v is not None:
                if not 0.0 <= v <= 1.0:
                    errors.append(f"line {lineno}: theta must be in [0,1]")
                else:
                    updates[key] = v
        elif key == "window":
            v = _int_field(raw, lineno, key, errors, minimum=1)
            if v is not None:
                updates[key] = v
        elif key == "queue_capacity":
            v = _int_field(raw, lineno, key, errors, minimum=1)
            if v is not None:
                updates[key] = v
        elif key == "flows":
            v = _parse_flows(raw, lineno, errors)
            if v is not None:
                updates[key] = v
        elif key == "seed":
            v = _int_field(raw, lineno, key, errors, minimum=0)
            if v is not None:
                updates[key] = v
        elif key == "jammer_channel":
            if raw == "none":
                updates[key] = None
            else:
                v = _int_field(raw, lineno, key, errors, minimum=1, maximum=11)
                if v is not None:
                    updates[key] = v
        elif key in ("jammer_x", "jammer_y"):
            v = _float_field(raw, lineno, key, errors, unit=" (meters)")
            if v is not None:
                updates[key] = v
        elif key in ("jammer_on_s", "jammer_off_s"):
            v = _float_field(raw, lineno, key, errors, unit=" (seconds)")
            if v is not None:
                if v <= 0:
                    errors.append(f"line {lineno}: {key} must be positive seconds")
                else:
                    updates[key] = v
        else:
            errors.append(f"line {lineno}: unknown key {key!r}")

    if errors:
        raise ConfigError(errors)
    return replace(ScenarioConfig(), **updates)


def serialize(config: ScenarioConfig) -> str:
    """Canonical text form; parse_config(serialize(c)) == c."""
    flows = "auto" if not config.flows else ", ".join(f"{s}>{d}" for s, d in config.flows)
    lines = [
        f"topology = {config.topology.label()}",
        f"radios_per_node = {config.radios_per_node}",
        f"channel_plan = {config.channel_plan}",
        f"rts_mode = {config.rts_mode}",
        f"traffic_class = {config.traffic_class}",
        f"protocol = {config.protocol}",
        f"sim_time_s = {config.sim_time_s!r}",
        f"packet_size_bytes = {config.packet_size_bytes}",
        f"data_rate_bps = {config.data_rate_bps!r}",
        f"alpha = {config.alpha!r}",
        f"delta = {config.delta!r}",
        f"theta = {config.theta!r}",
        f"window = {config.window}",
        f"queue_capacity = {config.queue_capacity}",
        f"flows = {flows}",
        f"seed = {config.seed}",
    ]
    if config.jammer_channel is not None:
        lines += [
            f"jammer_channel = {config.jammer_channel}",
            f"jammer_x = {config.jammer_x!r}",
            f"jammer_y = {config.jammer_y!r}",
            f"jammer_on_s = {config.jammer_on_s!r}",
            f"jammer_off_s = {config.jammer_off_s!r}",
        ]
    return "\n".join(lines) + "\n"
