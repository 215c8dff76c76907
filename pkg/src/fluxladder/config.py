"""Experiment configuration: versioned JSON schema with dot-path overrides.

A config file fully determines one CLI run; every dataset the CLI writes
embeds the resolved config and the engine version so that results regenerate
from the file alone.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .model import DriveSpec, LadderSpec
from .steady import SolverConfig

CONFIG_SCHEMA_VERSION = 1
SWEEP_AXES = ("phi", "nbar1", "nbar_av")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=dict)

    # ---- constructors -------------------------------------------------

    @staticmethod
    def load(path, overrides=()) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return ExperimentConfig.from_dict(raw, overrides)

    @staticmethod
    def from_dict(raw: dict, overrides=()) -> "ExperimentConfig":
        raw = copy.deepcopy(raw)
        for item in overrides:
            _apply_override(raw, item)
        version = raw.get("schema_version", CONFIG_SCHEMA_VERSION)
        if version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema_version {version}")
        raw.setdefault("schema_version", CONFIG_SCHEMA_VERSION)
        cfg = ExperimentConfig(raw=raw)
        cfg.validate()
        return cfg

    # ---- sections ------------------------------------------------------

    def model_spec(self, phi: float | None = None) -> LadderSpec:
        m = self.raw.get("model", {})
        try:
            return LadderSpec(
                L=int(m["L"]),
                K=float(m.get("K_over_J", 1.0)),
                phi=float(m["phi"] if phi is None else phi),
                J=1.0,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad model section: {exc}") from exc

    def drive_spec(self, nbar1=None, nbar_av=None) -> DriveSpec:
        d = dict(self.raw.get("drive", {}))
        gamma = float(d.get("Gamma_over_J", 1.0))
        if nbar_av is not None:
            delta = float(d["delta_nbar"])
            d = {"nbar1": nbar_av + delta / 2.0, "nbarL": nbar_av - delta / 2.0}
        elif "nbar_av" in d:
            delta = float(d.get("delta_nbar", 0.0))
            d = {"nbar1": float(d["nbar_av"]) + delta / 2.0,
                 "nbarL": float(d["nbar_av"]) - delta / 2.0}
        if nbar1 is not None:
            d["nbar1"] = nbar1
        try:
            return DriveSpec(Gamma=gamma, nbar1=float(d["nbar1"]), nbarL=float(d["nbarL"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad drive section: {exc}") from exc

    def solver_config(self) -> SolverConfig:
        s = dict(self.raw.get("solver", {}))
        try:
            return SolverConfig(**s)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad solver section: {exc}") from exc

    def sweep_axis(self) -> str:
        sweep = self.raw.get("sweep")
        if not sweep:
            raise ConfigError("config has no sweep section")
        axis = sweep.get("axis")
        if axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
        return axis

    def sweep_grid(self) -> np.ndarray:
        sweep = self.raw.get("sweep")
        if not sweep:
            raise ConfigError("config has no sweep section")
        grid = sweep.get("grid")
        if isinstance(grid, dict):
            num = int(grid["num"])
            start = float(grid["start"])
            if "stop_exclusive" in grid:
                values = start + (float(grid["stop_exclusive"]) - start) * np.arange(num) / num
            else:
                values = np.linspace(start, float(grid["stop"]), num)
        elif isinstance(grid, list):
            values = np.asarray([float(v) for v in grid])
        else:
            raise ConfigError("sweep.grid must be a list or {start, stop|stop_exclusive, num}")
        if len(values) < 1 or np.any(np.diff(values) <= 0):
            raise ConfigError("sweep grid must be non-empty and strictly increasing")
        return values

    def output_dir(self) -> str:
        return self.raw.get("output", {}).get("directory", ".")

    def basename(self, default: str) -> str:
        return self.raw.get("output", {}).get("basename", default)

    # ---- validation and identity ---------------------------------------

    def validate(self):
        if "model" in self.raw:
            self.model_spec(phi=self.raw["model"].get("phi", 0.0))
        if "drive" in self.raw:
            drv = self.drive_spec()
            for name, val in (("nbar1", drv.nbar1), ("nbarL", drv.nbarL)):
                if not 0.0 <= val <= 1.0:
                    raise ConfigError(f"{name}={val} outside [0, 1]")
        if "solver" in self.raw:
            self.solver_config()
        if "sweep" in self.raw:
            axis = self.sweep_axis()
            grid = self.sweep_grid()
            if axis in ("nbar1", "nbar_av"):
                if grid.min() < 0.0 or grid.max() > 1.0:
                    raise ConfigError(f"{axis} grid must stay inside [0, 1]")

    def digest(self) -> str:
        """Stable hash of the resolved config (identifies completed runs)."""
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _apply_override(raw: dict, item: str):
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form path.to.key=value")
    path, value = item.split("=", 1)
    keys = path.split(".")
    node = raw
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {path!r} crosses a non-object")
    node[keys[-1]] = _parse_value(value)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        lowered = text.lower()
        if lowered in ("pi", "2pi", "pi/2", "pi/4", "2pi/3"):
            return {"pi": math.pi, "2pi": 2 * math.pi, "pi/2": math.pi / 2,
                    "pi/4": math.pi / 4, "2pi/3": 2 * math.pi / 3}[lowered]
        return text
