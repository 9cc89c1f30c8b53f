"""Flat key-value experiment configuration with dotted sections."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .geometry import PhysParams
from .grid import StripGrid

_DEFAULTS = {
    "params.eps": 0.5,
    "params.beta": 0.5,
    "params.mu": 0.01,
    "params.delta": 0.0,
    "params.g": 1.0,
    "params.rho_bar": 1.0,
    "limits.h_min": 0.1,
    "limits.h_max": 10.0,
    "limits.c_star": 0.1,
    "limits.norm_factor": 10.0,
    "grid.d": 1,
    "grid.n_x": 128,
    "grid.n_r": 32,
    "grid.length": 6.283185307179586,
    "bathymetry.preset": "flat",
    "bathymetry.amplitude": 0.3,
    "bathymetry.path": "",
    "initial.recipe": "rest",
    "initial.eta0_amplitude": 0.0,
    "initial.eta0_mode": 1,
    "initial.sw_v_amplitude": 0.0,
    "initial.shear_amp": 0.0,
    "initial.rho_amp": 0.0,
    "initial.psi_amplitude": 0.0,
    "initial.psi_mode": 1,
    "initial.seed": 20260809,
    "scheme.kind": "direct",
    "scheme.iota1": 0.0,
    "scheme.iota2": 0.0,
    "scheme.iota3": 0.0,
    "run.T": 1.0,
    "run.dt": 0.0,
    "run.cfl": 0.4,
    "run.cadence": 10,
    "run.s": 4.0,
    "run.s0": 2.0,
    "output.dir": "out",
    "output.format": "npz",
    "output.debug_solver": 0,
    "sweep.axis": "",
    "sweep.values": (),
    "sweep.delta_tracks_mu": False,
    "rate.min": 0.0,
    "rate.max": 10.0,
}

_PRESETS = ("flat", "cosine", "gaussian", "file")
_RECIPES = ("rest", "streamfunction", "well_prepared")
_SCHEMES = ("direct", "mollified")


def _coerce(key: str, raw: str):
    default = _DEFAULTS[key]
    raw = raw.strip()
    if isinstance(default, tuple):
        if not raw:
            return ()
        return tuple(float(v) for v in raw.replace(",", " ").split())
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(float(raw))
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    values = dict(_DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (p.strip() for p in body.split("=", 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    return values


@dataclass
class ExperimentConfig:
    values: dict
    text: str = ""
    problems: list = field(default_factory=list)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        text = Path(path).read_text()
        return cls(parse_config_text(text), text)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls(parse_config_text(text), text)

    def __getitem__(self, key):
        return self.values[key]

    def validate(self) -> list:
        """Collect violations; empty list means the config is runnable."""
        v = self.values
        problems = []
        if v["bathymetry.preset"] not in _PRESETS:
            problems.append(f"unknown bathymetry preset {v['bathymetry.preset']!r}")
        if v["bathymetry.preset"] == "file" and not v["bathymetry.path"]:
            problems.append("bathymetry.preset=file needs bathymetry.path")
        if v["initial.recipe"] not in _RECIPES:
            problems.append(f"unknown initial recipe {v['initial.recipe']!r}")
        if v["scheme.kind"] not in _SCHEMES:
            problems.append(f"unknown scheme {v['scheme.kind']!r}")
        if v["run.T"] <= 0:
            problems.append("run.T must be positive")
        if v["sweep.axis"] and v["sweep.axis"] not in ("mu", "iota3", "log_horizon"):
            problems.append(f"unknown sweep axis {v['sweep.axis']!r}")
        if v["sweep.axis"]:
            if len(v["sweep.values"]) < 3:
                problems.append("sweep needs at least three values")
            if any(val <= 0 for val in v["sweep.values"]):
                problems.append("sweep values must be positive")
        if v["initial.recipe"] == "well_prepared" and v["params.delta"] > v["params.mu"]:
            problems.append(
                "well-prepared runs require weak density variations (delta <= mu)"
            )
        try:
            self.grid()
        except ValueError as exc:
            problems.append(str(exc))
        try:
            self.params()
        except ValueError as exc:
            problems.append(str(exc))
        self.problems = problems
        return problems

    def grid(self) -> StripGrid:
        v = self.values
        return StripGrid(n_x=v["grid.n_x"], n_r=v["grid.n_r"], length=v["grid.length"], d=v["grid.d"])

    def params(self, mu: float | None = None, delta: float | None = None) -> PhysParams:
        v = self.values
        return PhysParams(
            eps=v["params.eps"],
            beta=v["params.beta"],
            mu=v["params.mu"] if mu is None else mu,
            delta=v["params.delta"] if delta is None else delta,
            g=v["params.g"],
            rho_bar=v["params.rho_bar"],
            h_min=v["limits.h_min"],
            h_max=v["limits.h_max"],
            c_star=v["limits.c_star"],
        )

    def dump(self) -> str:
        return "\n".join(f"{k} = {self.values[k]}" for k in sorted(self.values))
