"""Run configuration: a TOML file with dotted section keys."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

VELOCITY_PRESETS = ("zero", "taylor-green")
DIRECTOR_PRESETS = ("quenched", "uniform", "file")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class RunConfig:
    n: int = 32
    dt: float = 1e-3
    t_end: float = 0.1
    snapshot_every: float = 1e-2
    sigma: float = 0.1
    mollifier_kind: str = "bump-kernel"
    noise_enabled: bool = True
    delta: float = 1.0
    decay_s: float = 2.0
    kmax: int | None = None
    seed: int = 0
    noise_amplitude: float = 1.0
    wavevectors: tuple | None = None
    velocity_preset: str = "taylor-green"
    velocity_amplitude: float = 1.0
    director_preset: str = "quenched"
    director_amplitude: float = 1.0
    director_file: str | None = None
    eps0: float = 0.05
    eps1: float = 0.1
    M: float = 10.0
    tol_mp: float = 1e-3
    out_dir: str | None = None

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def snapshot_stride(self) -> int:
        return int(round(self.snapshot_every / self.dt))


# dotted key -> (field name, expected kind)
KEYS = {
    "grid.n": ("n", "int"),
    "time.dt": ("dt", "float"),
    "time.t_end": ("t_end", "float"),
    "time.snapshot_every": ("snapshot_every", "float"),
    "mollifier.sigma": ("sigma", "float"),
    "mollifier.kind": ("mollifier_kind", "str"),
    "noise.enabled": ("noise_enabled", "bool"),
    "noise.delta": ("delta", "float"),
    "noise.decay_s": ("decay_s", "float"),
    "noise.kmax": ("kmax", "int"),
    "noise.seed": ("seed", "int"),
    "noise.amplitude": ("noise_amplitude", "float"),
    "noise.wavevectors": ("wavevectors", "vectors"),
    "init.velocity_preset": ("velocity_preset", "str"),
    "init.velocity_amplitude": ("velocity_amplitude", "float"),
    "init.director_preset": ("director_preset", "str"),
    "init.director_amplitude": ("director_amplitude", "float"),
    "init.director_file": ("director_file", "str"),
    "thresholds.eps0": ("eps0", "float"),
    "thresholds.eps1": ("eps1", "float"),
    "thresholds.M": ("M", "float"),
    "thresholds.tol_mp": ("tol_mp", "float"),
    "output.dir": ("out_dir", "str"),
}


def _flatten(table: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in table.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _coerce(key: str, kind: str, value):
    if kind == "vectors":
        ok = isinstance(value, list) and all(
            isinstance(k, list) and len(k) == 3
            and all(isinstance(c, int) and not isinstance(c, bool) for c in k) for k in value)
        if not ok:
            raise ConfigError(f"config key '{key}' must be a list of integer triples")
        return tuple(tuple(k) for k in value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"config key '{key}' must be a boolean")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key '{key}' must be an integer")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key '{key}' must be a number")
        if not math.isfinite(value):
            raise ConfigError(f"config key '{key}' must be finite")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"config key '{key}' must be a string")
    return value


def config_from_mapping(table: dict) -> RunConfig:
    values = {}
    for key, value in _flatten(table).items():
        if key not in KEYS:
            raise ConfigError(f"unknown config key '{key}'")
        name, kind = KEYS[key]
        values[name] = _coerce(key, kind, value)
    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file '{path}': {exc.strerror}") from exc
    try:
        table = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config file '{path}' is not valid TOML: {exc}") from exc
    return config_from_mapping(table)


def validate(cfg: RunConfig) -> None:
    if cfg.n < 8 or cfg.n % 2:
        raise ConfigError("config key 'grid.n' must be an even integer >= 8")
    if not cfg.dt > 0:
        raise ConfigError("config key 'time.dt' must be > 0")
    if cfg.t_end < 0 or (0 < cfg.t_end < cfg.dt * (1 - 1e-12)):
        raise ConfigError("config key 'time.t_end' must be 0 or >= time.dt")
    if abs(cfg.steps * cfg.dt - cfg.t_end) > 1e-9 * max(1.0, cfg.t_end):
        raise ConfigError("config key 'time.t_end' must be a whole number of time.dt steps")
    stride = cfg.snapshot_every / cfg.dt
    if not cfg.snapshot_every > 0 or round(stride) < 1 or abs(stride - round(stride)) > 1e-9 * stride:
        raise ConfigError("config key 'time.snapshot_every' must be a positive multiple of time.dt")
    if not cfg.sigma > 0:
        raise ConfigError("config key 'mollifier.sigma' must be > 0")
    if cfg.mollifier_kind not in ("bump-kernel", "gaussian-multiplier"):
        raise ConfigError("config key 'mollifier.kind' must be 'bump-kernel' or 'gaussian-multiplier'")
    if cfg.mollifier_kind == "bump-kernel" and cfg.sigma > math.pi:
        raise ConfigError("config key 'mollifier.sigma' must be <= pi for the bump kernel")
    if cfg.delta < 0:
        raise ConfigError("config key 'noise.delta' must be >= 0")
    if cfg.decay_s < 0:
        raise ConfigError("config key 'noise.decay_s' must be >= 0")
    if cfg.kmax is not None and not 0 <= cfg.kmax <= cfg.n // 3:
        raise ConfigError("config key 'noise.kmax' must lie in [0, grid.n // 3]")
    if cfg.wavevectors is not None:
        for k in cfg.wavevectors:
            if k == (0, 0, 0) or max(abs(c) for c in k) > cfg.n / 3:
                raise ConfigError("config key 'noise.wavevectors' entries must be nonzero and within grid.n / 3")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("config key 'noise.seed' must be a 64-bit unsigned integer")
    if cfg.noise_amplitude < 0:
        raise ConfigError("config key 'noise.amplitude' must be >= 0")
    if cfg.velocity_preset not in VELOCITY_PRESETS:
        raise ConfigError("config key 'init.velocity_preset' must be 'zero' or 'taylor-green'")
    if cfg.director_preset not in DIRECTOR_PRESETS:
        raise ConfigError("config key 'init.director_preset' must be 'quenched', 'uniform' or 'file'")
    if cfg.director_preset == "file" and not cfg.director_file:
        raise ConfigError("config key 'init.director_file' is required when init.director_preset = 'file'")
    for key, value in (("thresholds.eps0", cfg.eps0), ("thresholds.eps1", cfg.eps1),
                       ("thresholds.M", cfg.M)):
        if not value > 0:
            raise ConfigError(f"config key '{key}' must be > 0")
    if cfg.tol_mp < 0:
        raise ConfigError("config key 'thresholds.tol_mp' must be >= 0")


def config_to_toml(cfg: RunConfig) -> str:
    """Canonical TOML text for a config (used to record the recipe next to a run)."""
    reverse = {name: key for key, (name, _) in KEYS.items()}
    sections: dict[str, list[str]] = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        section, key = reverse[f.name].split(".")
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, tuple):
            text = "[" + ", ".join("[" + ", ".join(str(c) for c in k) + "]" for k in value) + "]"
        elif isinstance(value, str):
            text = '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
        else:
            text = repr(value)
        sections.setdefault(section, []).append(f"{key} = {text}")
    return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in sections.items())
