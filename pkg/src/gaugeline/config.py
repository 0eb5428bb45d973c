"""Flat ``key = value`` run configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import units
from .dynamics import Background, OmegaGridSpec
from .errors import ConfigError
from .potentials import ALL_GAUGES, Gauge, SystemConfig, TimeGridSpec

# Parameters that may appear as sweep axes; all are plain floats.
SWEEPABLE = ("N", "beta", "l_nm", "Y_over_l", "span_Y", "electron_mass_eV", "transit_ns", "t_f_ns")


@dataclass(frozen=True)
class RunConfig:
    N: float = 1e12
    beta: float = 0.1
    l_nm: float = 6.33
    Y_over_l: float = 1e6
    span_Y: float = 100.0
    electron_mass_eV: float = units.ELECTRON_MASS
    cluster_charge_sign: int = 1
    transit_ns: float | None = None
    gauge: tuple[Gauge, ...] = ALL_GAUGES
    background: tuple[Background, ...] = (Background.MULTIPOLAR_B,)
    t_f_ns: float | None = None
    omega_half_width_per_s: float = 2 * math.pi * 3e9
    omega_points: int = 24001
    omega_insert_half_width_per_s: float = 2 * math.pi * 150e6
    omega_insert_factor: int = 10
    omega_center_per_s: float | None = None
    time_coarse_points: int = 4001
    time_refine_factor: int = 100
    time_refine_half_width_Y: float = 5.0
    verify_resolution: bool = False
    berry_correction: bool = False
    oracle_grid: bool = True
    oracle_hdot: bool = True
    oracle_modes: bool = True
    output_dir: str | None = None
    workers: int = 1
    sweep: tuple[tuple[str, tuple[float, ...]], ...] = field(default=())

    def __post_init__(self):
        try:
            self.system
            self.time_spec
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.workers < 1:
            raise ConfigError("workers must be >= 1", key="workers")
        if self.omega_points < 3 or self.omega_half_width_per_s <= 0:
            raise ConfigError("omega grid needs >= 3 points and a positive half width", key="omega_points")
        if self.omega_insert_factor < 1 or self.omega_insert_half_width_per_s < 0:
            raise ConfigError("invalid omega insert", key="omega_insert_factor")
        if self.t_f_ns is not None and not self.t_f_ns > 0:
            raise ConfigError("t_f_ns must be positive", key="t_f_ns")
        if self.berry_correction:
            raise ConfigError("berry_correction = on is not supported: no external vector potential "
                              "model is available", key="berry_correction")
        if not self.gauge or not self.background:
            raise ConfigError("gauge and background lists must be non-empty")
        for name, values in self.sweep:
            if name not in SWEEPABLE:
                raise ConfigError(f"sweep axis {name!r} is not a sweepable parameter", key=f"sweep.{name}")
            if not values:
                raise ConfigError("empty sweep axis", key=f"sweep.{name}")

    @property
    def system(self) -> SystemConfig:
        return SystemConfig(N=self.N, beta=self.beta, l=self.l_nm, Y_over_l=self.Y_over_l, span_Y=self.span_Y,
                            electron_mass=self.electron_mass_eV, cluster_charge_sign=self.cluster_charge_sign,
                            transit_ns=self.transit_ns)

    @property
    def time_spec(self) -> TimeGridSpec:
        return TimeGridSpec(self.time_coarse_points, self.time_refine_factor, self.time_refine_half_width_Y)

    @property
    def omega_spec(self) -> OmegaGridSpec:
        return OmegaGridSpec(self.omega_half_width_per_s, self.omega_points, self.omega_insert_half_width_per_s,
                             self.omega_insert_factor, self.omega_center_per_s)

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def items(self) -> dict[str, object]:
        """Effective configuration as sidecar-ready text values."""
        out: dict[str, object] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "sweep":
                for name, values in v:
                    out[f"sweep.{name}"] = ",".join(repr(float(x)) for x in values)
                continue
            if isinstance(v, tuple):
                v = ",".join(x.value for x in v)
            elif isinstance(v, bool):
                v = "on" if v else "off"
            elif v is None:
                v = "none"
            out[f.name] = v
        return out


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_OPTIONAL_FLOATS = {"transit_ns", "t_f_ns", "omega_center_per_s"}
_INTS = {"cluster_charge_sign", "omega_points", "omega_insert_factor", "time_coarse_points",
         "time_refine_factor", "workers"}
_BOOLS = {"verify_resolution", "berry_correction", "oracle_grid", "oracle_hdot", "oracle_modes"}
_TRUE = {"on", "true", "yes", "1"}
_FALSE = {"off", "false", "no", "0"}


def _parse_float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {text!r}")
    return v


def _parse_value(key: str, text: str):
    if key in _OPTIONAL_FLOATS:
        return None if text.lower() in ("none", "") else _parse_float(text)
    if key in _INTS:
        f = _parse_float(text)
        if f != int(f):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(f)
    if key in _BOOLS:
        t = text.lower()
        if t in _TRUE:
            return True
        if t in _FALSE:
            return False
        raise ValueError(f"expected on/off, got {text!r}")
    if key == "gauge":
        return tuple(Gauge.parse(s) for s in text.split(",") if s.strip())
    if key == "background":
        return tuple(Background.parse(s) for s in text.split(",") if s.strip())
    if key == "output_dir":
        return text
    return _parse_float(text)


def parse_config_text(text: str) -> RunConfig:
    values: dict[str, object] = {}
    sweep: dict[str, tuple[float, ...]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, _, val = (s.strip() for s in line.partition("="))
        if key in values or key in {f"sweep.{k}" for k in sweep}:
            raise ConfigError("duplicate key", line=lineno, key=key)
        try:
            if key.startswith("sweep."):
                name = key[len("sweep."):]
                if name not in SWEEPABLE:
                    raise ValueError(f"sweep axis {name!r} is not a sweepable parameter")
                sweep[name] = tuple(_parse_float(s) for s in val.split(",") if s.strip())
            elif key in _FIELD_TYPES and key != "sweep":
                values[key] = _parse_value(key, val)
            else:
                raise ValueError("unknown key")
        except ValueError as exc:
            raise ConfigError(str(exc), line=lineno, key=key) from None
    try:
        return RunConfig(**values, sweep=tuple(sweep.items()))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def parse_config(path) -> RunConfig:
    """Read a config file; absent keys take their defaults."""
    return parse_config_text(Path(path).read_text())

