"""Scenario configuration: nested dataclasses, TOML files and dotted overrides.

A config file has one table per section, with keys named after the
dataclass fields, e.g.

    [dynamics]
    sigma_wind = 0.2

    [federation]
    n0 = 50

Overrides use the same names: ``dynamics.sigma_wind=0.2``.
"""

from dataclasses import asdict, dataclass, field, fields, replace
import types
import typing

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .basis import BasisSpec
from .channel import ChannelParams
from .cost import CostParams, PowerParams, SafetyParams
from .dynamics import DynamicsParams
from .federation import FlConfig
from .fpk import FpkHyper, MfQuadrature
from .hjb import HjbHyper


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SwarmParams:
    n_agents: int = 25
    center: tuple = (150.0, 100.0)
    spacing: float = 1.4142135623730951
    max_steps: int = 3000
    comm_range: float = 100.0
    # velocity damping gain of the hold action after arrival [1/s]
    stop_gain: float = 1.0
    # agent chunks run in a thread pool when > 1; results do not change
    workers: int = 1

    def __post_init__(self):
        if self.n_agents < 1 or self.max_steps < 1:
            raise ValueError("n_agents and max_steps must be at least 1")
        if self.spacing <= 0 or self.workers < 1:
            raise ValueError("spacing must be positive and workers at least 1")


@dataclass(frozen=True)
class OfflineParams:
    cruise_speed: float = 5.0
    accel: float = 0.5


@dataclass(frozen=True)
class Config:
    swarm: SwarmParams = field(default_factory=SwarmParams)
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    cost: CostParams = field(default_factory=CostParams)
    power: PowerParams = field(default_factory=PowerParams)
    safety: SafetyParams = field(default_factory=SafetyParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    federation: FlConfig = field(default_factory=FlConfig)
    hjb: HjbHyper = field(default_factory=HjbHyper)
    fpk: FpkHyper = field(default_factory=FpkHyper)
    basis_h: BasisSpec = field(default_factory=lambda: BasisSpec(scale=(100.0, 100.0, 10.0, 10.0)))
    basis_f: BasisSpec = field(default_factory=lambda: BasisSpec(scale=(100.0, 100.0, 10.0, 10.0)))
    quadrature: MfQuadrature = field(default_factory=MfQuadrature)
    offline: OfflineParams = field(default_factory=OfflineParams)

    def to_dict(self):
        return asdict(self)


def _is_optional(tp):
    args = typing.get_args(tp)
    return (isinstance(tp, types.UnionType) or typing.get_origin(tp) is typing.Union) \
        and type(None) in args


def _coerce(key, value, tp, default):
    if _is_optional(tp):
        if value is None or (isinstance(value, str) and value.lower() in ("none", "null")):
            return None
        inner = [a for a in typing.get_args(tp) if a is not type(None)][0]
        return _coerce(key, value, inner, default)
    if tp is bool:
        if isinstance(value, bool):
            return value
    elif tp is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif tp is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif tp is str:
        if isinstance(value, str):
            return value
    elif tp is tuple:
        if isinstance(value, (list, tuple)):
            if isinstance(default, tuple) and len(value) != len(default):
                raise ConfigError(f"{key}: expected {len(default)} entries, got {len(value)}")
            try:
                return tuple(float(v) for v in value)
            except (TypeError, ValueError):
                pass
    raise ConfigError(f"{key}: value {value!r} does not match type {getattr(tp, '__name__', tp)}")


def _build(cls, section, data):
    if not isinstance(data, dict):
        raise ConfigError(f"[{section}] must be a table")
    ftypes = {f.name: f for f in fields(cls)}
    hints = typing.get_type_hints(cls)
    base = cls()
    kwargs = {}
    for key, value in data.items():
        if key not in ftypes:
            raise ConfigError(f"unknown key {section}.{key}")
        kwargs[key] = _coerce(f"{section}.{key}", value, hints[key], getattr(base, key))
    return kwargs


def from_dict(data, base=None):
    """Apply a nested mapping of section -> {key: value} on top of base."""
    cfg = base or Config()
    sections = {f.name for f in fields(Config)}
    for sec, values in data.items():
        if sec not in sections:
            raise ConfigError(f"unknown section {sec!r}")
        current = getattr(cfg, sec)
        kwargs = _build(type(current), sec, values)
        try:
            cfg = replace(cfg, **{sec: replace(current, **kwargs)})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{sec}] {exc}") from None
    return cfg


def load(path=None, overrides=()):
    """Load a TOML file (optional) and apply key=value overrides."""
    data = {}
    if path is not None:
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
    cfg = from_dict(data)
    return apply_overrides(cfg, overrides)


def parse_value(raw):
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def apply_overrides(cfg, overrides):
    nested = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key {key!r} must be section.field")
        nested.setdefault(parts[0], {})[parts[1]] = parse_value(raw.strip())
    return from_dict(nested, cfg)

