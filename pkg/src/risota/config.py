"""Experiment configuration: nested dataclasses loaded from JSON.

An empty JSON object yields the default setup (10 users, 45 RIS elements,
915 MHz, PL = 4, 5 dBi PS/RIS gains, 0 dBi user gain, 20 dB uplink and 30 dB
downlink transmit SNR, CSI error variance 0.1 of the uplink noise).
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union, get_args, get_origin, get_type_hints

from .bounds import BoundInputs
from .channel import ChannelConfig, GeometryConfig
from .phase import ScaConfig

VARIANTS = ("proposed", "noiseless_downlink", "static_phase", "perfect_csi")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class PowerConfig:
    p_up: Union[float, tuple] = 1.0
    p_down: float = 1.0
    beta_u: float = 1.0
    # None switches the corresponding channel noise off.
    uplink_snr_db: Optional[float] = 20.0
    downlink_snr_db: Optional[float] = 30.0


@dataclass(frozen=True)
class LearningConfig:
    eta: float = 0.01
    tau_max: int = 10
    rounds: int = 500
    tau_schedule: str = "dynamic"
    # Fixed-tau schedule: every user runs this many steps when feasible.
    fixed_tau: Optional[int] = None
    G: Union[float, str] = "auto"
    G_safety: float = 1.5
    G_samples: int = 200
    cancel_window: int = 5
    # Training loss is tracked on a fixed random subset of this size (None = all).
    train_eval_samples: Optional[int] = 2000


@dataclass(frozen=True)
class DataConfig:
    source: str = "mnist"
    # IDX paths; None selects the bundled 10k-digit MNIST subset.
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None
    n_classes: int = 10
    per_class: int = 200
    test_per_class: int = 100
    n_features: int = 20
    separation: float = 4.0


@dataclass(frozen=True)
class BoundConfig:
    L: float = 1.0
    sigma2_sgd: float = 1.0
    F_star: Optional[float] = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs"
    metrics: str = "metrics.csv"
    diagnostics: str = "diagnostics.json"
    manifest: str = "manifest.json"
    transport_log: Optional[str] = None
    sca_trace: Optional[str] = None


@dataclass(frozen=True)
class ExperimentConfig:
    topology: GeometryConfig = field(default_factory=GeometryConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    power: PowerConfig = field(default_factory=PowerConfig)
    learning: LearningConfig = field(default_factory=LearningConfig)
    sca: ScaConfig = field(default_factory=ScaConfig)
    data: DataConfig = field(default_factory=DataConfig)
    bounds: BoundConfig = field(default_factory=BoundConfig)
    variant: str = "proposed"
    seed: int = 0
    # Seed for user placement; None reuses ``seed``.
    topology_seed: Optional[int] = None
    workers: int = 1
    # "current": design the phase on this round's CSI; "stale": on the previous round's.
    phase_csi: str = "current"
    output: OutputConfig = field(default_factory=OutputConfig)

    def replace(self, **changes) -> "ExperimentConfig":
        """``dataclasses.replace`` that also accepts dotted keys like ``topology.n_elements``."""
        nested = {}
        flat = {}
        for key, value in changes.items():
            head, _, rest = key.partition(".") if "." in key else (key, "", "")
            if rest:
                nested.setdefault(head, {})[rest] = value
            else:
                flat[key] = value
        for head, sub in nested.items():
            flat[head] = dataclasses.replace(getattr(self, head), **sub)
        new = dataclasses.replace(self, **flat)
        validate(new)
        return new

    def bound_inputs(self, G: float) -> BoundInputs:
        return BoundInputs(self.bounds.L, self.bounds.sigma2_sgd, G, self.bounds.F_star)


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(value, hint, path):
    origin = get_origin(hint)
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError(path, f"expected an object, got {type(value).__name__}")
        return _build(hint, value, path)
    if origin is Union:
        errors = []
        for option in get_args(hint):
            if option is type(None):
                if value is None:
                    return None
                continue
            try:
                return _coerce(value, option, path)
            except ConfigError as exc:
                errors.append(str(exc))
        raise ConfigError(path, f"invalid value {value!r}")
    if hint is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, "expected a list")
        return tuple(tuple(v) if isinstance(v, list) else v for v in value)
    if hint is float:
        if not _is_number(value):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if hint is int:
        if not (isinstance(value, int) and not isinstance(value, bool)):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    return value


def _build(cls, raw: dict, prefix: str = ""):
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in names:
            raise ConfigError(path, "unknown key")
        kwargs[key] = _coerce(value, hints[key], path)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(prefix, str(exc)) from exc


def _require(cond, path, message):
    if not cond:
        raise ConfigError(path, message)


def validate(cfg: ExperimentConfig) -> None:
    t = cfg.topology
    _require(t.n_users >= 1, "topology.n_users", "must be >= 1")
    _require(t.n_elements >= 1, "topology.n_elements", "must be >= 1")
    _require(t.carrier_hz > 0, "topology.carrier_hz", "must be positive")
    for name in ("ps_position", "ris_position"):
        _require(len(getattr(t, name)) == 3, f"topology.{name}", "must have 3 coordinates")
    for name in ("x_range", "y_range"):
        lo, hi = getattr(t, name)
        _require(lo <= hi, f"topology.{name}", "must be ordered (low, high)")
    if t.user_positions is not None:
        _require(len(t.user_positions) == t.n_users, "topology.user_positions",
                 "must list one position per user")

    c = cfg.channel
    _require(c.path_loss_exponent > 0, "channel.path_loss_exponent", "must be positive")
    _require(c.csi_error_ratio >= 0, "channel.csi_error_ratio", "must be nonnegative")

    p = cfg.power
    p_up = p.p_up if isinstance(p.p_up, tuple) else (p.p_up,)
    _require(all(_is_number(v) and v > 0 for v in p_up), "power.p_up", "must be positive")
    if isinstance(p.p_up, tuple):
        _require(len(p_up) == t.n_users, "power.p_up", "must list one budget per user")
    _require(p.p_down > 0, "power.p_down", "must be positive")
    _require(p.beta_u > 0, "power.beta_u", "must be positive")

    lc = cfg.learning
    _require(lc.eta >= 0, "learning.eta", "must be nonnegative")
    _require(lc.tau_max >= 1, "learning.tau_max", "must be >= 1")
    _require(lc.rounds >= 1, "learning.rounds", "must be >= 1")
    _require(lc.tau_schedule in ("dynamic", "fixed"), "learning.tau_schedule",
             "must be 'dynamic' or 'fixed'")
    if lc.fixed_tau is not None:
        _require(1 <= lc.fixed_tau <= lc.tau_max, "learning.fixed_tau", "must be in [1, tau_max]")
    _require(lc.G == "auto" or (_is_number(lc.G) and lc.G > 0), "learning.G",
             "must be positive or 'auto'")
    _require(lc.G_safety > 0, "learning.G_safety", "must be positive")
    _require(lc.cancel_window >= 1, "learning.cancel_window", "must be >= 1")

    d = cfg.data
    _require(d.source in ("mnist", "synthetic"), "data.source", "must be 'mnist' or 'synthetic'")
    _require(d.n_classes >= 2, "data.n_classes", "must be >= 2")

    _require(cfg.bounds.L > 0, "bounds.L", "must be positive")
    _require(cfg.bounds.sigma2_sgd >= 0, "bounds.sigma2_sgd", "must be nonnegative")

    _require(cfg.variant in VARIANTS, "variant", f"must be one of {', '.join(VARIANTS)}")
    _require(cfg.seed >= 0, "seed", "must be nonnegative")
    _require(cfg.workers >= 1, "workers", "must be >= 1")
    _require(cfg.phase_csi in ("current", "stale"), "phase_csi", "must be 'current' or 'stale'")


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("", "configuration must be a JSON object")
    cfg = _build(ExperimentConfig, raw)
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = dataclasses.asdict(cfg)

    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        return v

    return clean(out)
