"""Scenario configuration: a flat declarative description of one experiment,
loadable from JSON or TOML, plus the shipped presets.
"""

from __future__ import annotations

import dataclasses
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .node import NodeMode


class ConfigError(ValueError):
    """Invalid scenario input; the message names the offending key."""


@dataclass
class AimdParams:
    update_period_s: float = 0.1
    # additive step per tick = alpha_fraction * guaranteed rate of the node
    alpha_fraction: float = 0.01
    beta: float = 0.7
    # own-queue length that counts as congestion; flat across reputation
    # classes on purpose (queue-length statistics are class-invariant at
    # equal load, so this gives every node the same backoff hazard)
    congestion_threshold: int = 3
    # after a decrease the rate holds for this many drain times of the
    # threshold backlog (threshold / guaranteed rate)
    backoff_cooldown_factor: float = 2.0
    floor_fraction: float = 0.5


def _default_attack_modes() -> list[str]:
    """Node-mode mixture for the 20-node attack scenarios.

    Node ids are reputation ranks (0 = highest). The malicious node sits at a
    mid-reputation rank; best-effort issuers occupy the remaining top ranks,
    content issuers the middle, inactive nodes the tail. The sizeable content
    share keeps honest load steady, which keeps the attacker's overload backed
    up in queues instead of being absorbed by slack.
    """
    modes = ["best_effort"] * 10 + ["content:0.75"] * 8 + ["inactive"] * 2
    modes[5] = "malicious-placeholder"
    return modes


@dataclass
class ScenarioConfig:
    name: str = "custom"
    n: int = 20
    degree: int = 4
    duration_s: float = 800.0
    runs: int = 10
    seed: int = 1
    nu: float = 20.0
    cw_threshold: int = 25
    pct_threshold_s: float = 25.0
    bfs_horizon_s: float = 80.0
    max_inbox: int = 200
    k_parents: int = 2
    zipf_exponent: float = 0.9
    delay_min_s: float = 0.05
    delay_max_s: float = 0.15
    per_message_delays: bool = False
    pct_enabled: bool = True
    mode_assignment: list[str] = field(default_factory=lambda: ["best_effort"] * 20)
    aimd: AimdParams = field(default_factory=AimdParams)
    metrics_sample_period_s: float = 1.0
    rate_window_s: float = 10.0

    def validate(self) -> None:
        positive = ["n", "degree", "runs", "nu", "cw_threshold",
                    "pct_threshold_s", "bfs_horizon_s", "max_inbox", "k_parents",
                    "metrics_sample_period_s", "rate_window_s"]
        for key in positive:
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive, got {getattr(self, key)}")
        if self.duration_s < 0:
            raise ConfigError(f"duration_s must be >= 0, got {self.duration_s}")
        if not 1 <= self.k_parents <= 8:
            raise ConfigError(f"k_parents must be in 1..8, got {self.k_parents}")
        if self.degree >= self.n:
            raise ConfigError(f"degree {self.degree} must be below n {self.n}")
        if (self.n * self.degree) % 2 != 0:
            raise ConfigError(f"n*degree must be even, got {self.n}*{self.degree}")
        if not 0 < self.delay_min_s <= self.delay_max_s:
            raise ConfigError(
                f"delay bounds must satisfy 0 < min <= max, got "
                f"[{self.delay_min_s}, {self.delay_max_s}]")
        if len(self.mode_assignment) != self.n:
            raise ConfigError(
                f"mode_assignment has {len(self.mode_assignment)} entries for n={self.n}")
        if self.zipf_exponent < 0:
            raise ConfigError(f"zipf_exponent must be >= 0, got {self.zipf_exponent}")
        for i, text in enumerate(self.mode_assignment):
            try:
                NodeMode.parse(text)
            except ValueError as exc:
                raise ConfigError(f"mode_assignment.{i}: {exc}") from exc
        aimd = self.aimd
        if not 0 < aimd.beta < 1:
            raise ConfigError(f"aimd.beta must be in (0,1), got {aimd.beta}")
        if aimd.update_period_s <= 0 or aimd.alpha_fraction <= 0:
            raise ConfigError("aimd.update_period_s and aimd.alpha_fraction must be positive")
        if aimd.congestion_threshold < 1:
            raise ConfigError(f"aimd.congestion_threshold must be >= 1, got "
                              f"{aimd.congestion_threshold}")
        if aimd.backoff_cooldown_factor < 0:
            raise ConfigError(f"aimd.backoff_cooldown_factor must be >= 0, got "
                              f"{aimd.backoff_cooldown_factor}")
        if not 0 < aimd.floor_fraction <= 1:
            raise ConfigError(f"aimd.floor_fraction must be in (0,1], got {aimd.floor_fraction}")

    def modes(self) -> list[NodeMode]:
        return [NodeMode.parse(t) for t in self.mode_assignment]

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        data = dict(data)
        aimd_data = data.pop("aimd", {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")
        aimd_known = {f.name for f in dataclasses.fields(AimdParams)}
        aimd_unknown = set(aimd_data) - aimd_known
        if aimd_unknown:
            raise ConfigError(f"unknown config key 'aimd.{sorted(aimd_unknown)[0]}'")
        cfg = cls(**data, aimd=AimdParams(**aimd_data)) if aimd_data else cls(**data)
        return cfg


def preset(name: str) -> ScenarioConfig:
    """Shipped Table-style scenarios. Attack presets place one malicious node
    at reputation rank 6 of 20."""
    base = dict(n=20, degree=4, duration_s=800.0, runs=10, seed=6, nu=20.0,
                cw_threshold=25, pct_threshold_s=25.0, bfs_horizon_s=80.0,
                max_inbox=200, k_parents=2, zipf_exponent=0.9,
                delay_min_s=0.05, delay_max_s=0.15)
    if name == "honest_baseline":
        return ScenarioConfig(name=name, mode_assignment=["best_effort"] * 20, **base)
    if name == "a1_spammer":
        modes = _default_attack_modes()
        modes[5] = "spammer:2.6"
        return ScenarioConfig(name=name, mode_assignment=modes, **base)
    if name == "a2_multirate":
        modes = _default_attack_modes()
        modes[5] = "multirate"
        return ScenarioConfig(name=name, mode_assignment=modes, **base)
    if name == "a3_no_pct":
        modes = _default_attack_modes()
        modes[5] = "multirate"
        return ScenarioConfig(name=name, mode_assignment=modes,
                              pct_enabled=False, **base)
    raise ConfigError(f"unknown preset {name!r}")


PRESET_NAMES = ("honest_baseline", "a1_spammer", "a2_multirate", "a3_no_pct")


def load_config(path: str | Path) -> ScenarioConfig:
    """Read a scenario from JSON or TOML. A run_meta.json (with its `config`
    envelope) is accepted as-is, which makes runs reproducible from their own
    output."""
    path = Path(path)
    try:
        if path.suffix == ".toml":
            data = tomllib.loads(path.read_text())
        else:
            data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return ScenarioConfig.from_dict(data)


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: ScenarioConfig, assignments: list[str]) -> ScenarioConfig:
    """Apply `--set key=value` pairs; dotted keys reach AIMD fields and
    individual mode_assignment slots (e.g. mode_assignment.5=spammer:12)."""
    for text in assignments:
        key, sep, raw = text.partition("=")
        if not sep:
            raise ConfigError(f"override {text!r} is not key=value")
        value = _parse_value(raw)
        parts = key.split(".")
        if parts[0] == "aimd" and len(parts) == 2:
            if not hasattr(cfg.aimd, parts[1]):
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg.aimd, parts[1], value)
        elif parts[0] == "mode_assignment" and len(parts) == 2:
            try:
                idx = int(parts[1])
                cfg.mode_assignment[idx] = str(value)
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"bad mode_assignment override {key!r}: {exc}") from exc
        elif len(parts) == 1 and hasattr(cfg, key) and key != "aimd":
            current = getattr(cfg, key)
            if key == "mode_assignment":
                if not isinstance(value, list):
                    raise ConfigError("mode_assignment override must be a JSON list")
                cfg.mode_assignment = [str(v) for v in value]
            elif isinstance(current, bool):
                if isinstance(value, bool):
                    setattr(cfg, key, value)
                elif str(value).lower() in ("true", "false", "1", "0"):
                    setattr(cfg, key, str(value).lower() in ("true", "1"))
                else:
                    raise ConfigError(f"{key} expects a boolean, got {raw!r}")
            elif isinstance(current, int) and not isinstance(current, bool):
                setattr(cfg, key, int(value))
            elif isinstance(current, float):
                setattr(cfg, key, float(value))
            else:
                setattr(cfg, key, value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return cfg
