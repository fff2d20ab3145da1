"""The six coordination benchmark environments, registered by name."""

from __future__ import annotations

import dataclasses
from typing import Any, Mapping

from ..errors import ConfigError
from .aloha import AlohaConfig, AlohaEnv, aloha_step
from .base import MultiAgentEnv, StepResult
from .disperse import DisperseConfig, DisperseEnv, disperse_step
from .gather import GatherConfig, GatherEnv, gather_step
from .hallway import HallwayConfig, HallwayEnv, hallway_step
from .pursuit import PursuitConfig, PursuitEnv, pursuit_step
from .sensor import SensorConfig, SensorEnv, sensor_step

REGISTRY: dict[str, tuple[type, type]] = {
    "aloha": (AlohaConfig, AlohaEnv),
    "pursuit": (PursuitConfig, PursuitEnv),
    "hallway": (HallwayConfig, HallwayEnv),
    "sensor": (SensorConfig, SensorEnv),
    "gather": (GatherConfig, GatherEnv),
    "disperse": (DisperseConfig, DisperseEnv),
}

_TUPLE_FIELDS = {"group_sizes", "chain_lengths", "goals"}


def env_config(name: str, params: Mapping[str, Any] | None = None):
    """Build the config dataclass for ``name``; unknown keys raise :class:`ConfigError`."""
    if name not in REGISTRY:
        raise ConfigError(f"unknown environment {name!r}; expected one of {sorted(REGISTRY)}")
    cls = REGISTRY[name][0]
    params = dict(params or {})
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(params) - known
    if unknown:
        raise ConfigError(f"unknown {name} config keys: {sorted(unknown)}")
    for k in _TUPLE_FIELDS & set(params):
        v = params[k]
        if v is not None:
            params[k] = tuple(tuple(x) if isinstance(x, (list, tuple)) else x for x in v)
    try:
        return cls(**params)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {name} config: {e}") from e


def make_env(name: str, params: Mapping[str, Any] | None = None) -> MultiAgentEnv:
    cfg = env_config(name, params)
    return REGISTRY[name][1](cfg)


def config_to_dict(cfg) -> dict[str, Any]:
    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = [list(x) if isinstance(x, tuple) else x for x in v]
        out[f.name] = v
    return out


__all__ = [
    "REGISTRY",
    "MultiAgentEnv",
    "StepResult",
    "env_config",
    "make_env",
    "config_to_dict",
    "aloha_step",
    "pursuit_step",
    "hallway_step",
    "sensor_step",
    "gather_step",
    "disperse_step",
    "AlohaConfig",
    "PursuitConfig",
    "HallwayConfig",
    "SensorConfig",
    "GatherConfig",
    "DisperseConfig",
]
