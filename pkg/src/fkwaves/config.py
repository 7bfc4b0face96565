"""Run-config document: a single JSON object with a strict schema.

Unknown keys are rejected with their path; every numeric field must be
finite.  parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

from .errors import ConfigError
from .model import (
    ModelDescriptor,
    ShiftStencil,
    classical_fk,
    cubic_bistable,
    make_model,
)

_BOUNDARIES = ("fixed_front", "helical")
_INIT_STYLES = ("step", "tanh", "linear_slope")
_WAVE_METHODS = ("auto", "newton", "pseudotime", "stationary")
_SWEEP_PARAMS = ("L", "m0", "b_param", "d")
_MODEL_KINDS = ("classical_fk", "cubic_bistable")


@dataclass(frozen=True)
class ModelBlock:
    kind: str = "classical_fk"
    L: float = 0.0
    d: float = 1.0
    kappa: float = 1.0
    b_param: float = 0.25
    m0: float = 0.005
    shifts: Optional[tuple] = None


@dataclass(frozen=True)
class LatticeBlock:
    M: int = 400
    T: float = 200.0
    dt: Optional[float] = None
    boundary: str = "fixed_front"
    init_style: str = "step"


@dataclass(frozen=True)
class WaveBlock:
    z_min: Optional[float] = None
    z_max: Optional[float] = None
    h: Optional[float] = None
    phase_level: Optional[float] = None
    tol: float = 1e-10
    max_iter: int = 40
    method: str = "auto"


@dataclass(frozen=True)
class SweepBlock:
    param: str = "L"
    start: float = 0.0
    stop: float = 0.3
    step: float = 0.01
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    model: ModelBlock = ModelBlock()
    lattice: LatticeBlock = LatticeBlock()
    wave: WaveBlock = WaveBlock()
    sweep: Optional[SweepBlock] = None
    seed: int = 0

    def to_dict(self) -> dict:
        out = {
            "model": asdict(self.model),
            "lattice": asdict(self.lattice),
            "wave": asdict(self.wave),
            "seed": self.seed,
        }
        if self.model.shifts is not None:
            out["model"]["shifts"] = list(self.model.shifts)
        if self.sweep is not None:
            out["sweep"] = asdict(self.sweep)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _check_number(value, path, integer=False, optional=False):
    if value is None:
        if optional:
            return None
        raise ConfigError("value required", path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path)
    if not math.isfinite(value):
        raise ConfigError("value must be finite", path)
    if integer:
        if float(value) != int(value):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return int(value)
    return float(value)


def _check_choice(value, path, choices):
    if value not in choices:
        raise ConfigError(f"expected one of {choices}, got {value!r}", path)
    return value


def _parse_block(cls, data, path, parsers):
    if not isinstance(data, dict):
        raise ConfigError("expected an object", path)
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError("unknown key", f"{path}.{key}")
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = parsers[key](value, f"{path}.{key}")
    return cls(**kwargs)


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    known = {"model", "lattice", "wave", "sweep", "seed"}
    for key in data:
        if key not in known:
            raise ConfigError("unknown key", key)

    model = _parse_block(ModelBlock, data.get("model", {}), "model", {
        "kind": lambda v, p: _check_choice(v, p, _MODEL_KINDS),
        "L": _check_number,
        "d": _check_number,
        "kappa": _check_number,
        "b_param": _check_number,
        "m0": _check_number,
        "shifts": _parse_shifts,
    })
    lat = _parse_block(LatticeBlock, data.get("lattice", {}), "lattice", {
        "M": lambda v, p: _check_number(v, p, integer=True),
        "T": _check_number,
        "dt": lambda v, p: _check_number(v, p, optional=True),
        "boundary": lambda v, p: _check_choice(v, p, _BOUNDARIES),
        "init_style": lambda v, p: _check_choice(v, p, _INIT_STYLES),
    })
    wav = _parse_block(WaveBlock, data.get("wave", {}), "wave", {
        "z_min": lambda v, p: _check_number(v, p, optional=True),
        "z_max": lambda v, p: _check_number(v, p, optional=True),
        "h": lambda v, p: _check_number(v, p, optional=True),
        "phase_level": lambda v, p: _check_number(v, p, optional=True),
        "tol": _check_number,
        "max_iter": lambda v, p: _check_number(v, p, integer=True),
        "method": lambda v, p: _check_choice(v, p, _WAVE_METHODS),
    })
    sweep = None
    if "sweep" in data and data["sweep"] is not None:
        sweep = _parse_block(SweepBlock, data["sweep"], "sweep", {
            "param": lambda v, p: _check_choice(v, p, _SWEEP_PARAMS),
            "start": _check_number,
            "stop": _check_number,
            "step": _check_number,
            "workers": lambda v, p: _check_number(v, p, integer=True),
        })
        if sweep.step <= 0.0:
            raise ConfigError("step must be positive", "sweep.step")
        if sweep.workers < 1:
            raise ConfigError("workers must be >= 1", "sweep.workers")
    seed = _check_number(data.get("seed", 0), "seed", integer=True)

    if model.m0 <= 0.0:
        raise ConfigError("m0 must be positive", "model.m0")
    if lat.M < 6:
        raise ConfigError("M must be at least 6", "lattice.M")
    if lat.T <= 0.0:
        raise ConfigError("T must be positive", "lattice.T")
    return RunConfig(model=model, lattice=lat, wave=wav, sweep=sweep, seed=seed)


def _parse_shifts(value, path):
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or len(value) < 2:
        raise ConfigError("shifts must be a list of at least 2 numbers", path)
    return tuple(_check_number(v, f"{path}[{i}]") for i, v in enumerate(value))


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}")
    return parse_config(data)


def build_model(cfg: RunConfig, check: bool = True) -> ModelDescriptor:
    mb = cfg.model
    if mb.kind == "classical_fk":
        nl = classical_fk(L=mb.L)
    else:
        nl = cubic_bistable(d=mb.d, kappa=mb.kappa, b_param=mb.b_param)
    stencil = ShiftStencil(mb.shifts) if mb.shifts is not None else None
    return make_model(nl, m0=mb.m0, stencil=stencil, check=check)
