"""YAML run configuration.

A config mirrors the parameter tables of a link design::

    link:
      z: 100            # link length (m)
      aA: 80            # main laser power-area product (W m^2)
      area: 1.0e-4      # receiver area (m^2), optional
      sigma_sum: 2      # sigma_t^2 + sigma_p^2, split evenly; or give both:
      # sigma_t: 1.0
      # sigma_p: 1.0
      w_z: 4.33         # main beam width (m), optional
    thresholds: {eta: 1, gamma_th: 1, xi: 0.1}
    beacons:
      aA: 80            # defaults to link.aA
      w_z: 4
      centers: [[1, 1], [-1, 1], [-1, -1], [1, -1]]
    noise: {sigma_n: 0.01}
    search: {region: [-1, 1, -1, 1], step: 0.01}
    simulation: {trials: 10000, seed: 0, steps: 100000}
    sweep:
      curve: expected_outage
      parameter: aA
      values: [40, 80, 160]
      w_z: {start: 0.1, stop: 7.0, num: 50}
    error_bound: {points: [[0, 0], [1, 0]]}

Errors name the offending field and, when it exists in the file, its line.
"""
from __future__ import annotations

import copy
import math
import os
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .harness import DEFAULT_TRIALS, SWEEP_PARAMETERS, ExperimentConfig
from .link_design import DesignThresholds
from .stochastic import MobilitySpec, NoiseSpec, PointingSpec
from .tracking import BeaconArray, GridSearchConfig

__all__ = ["ConfigError", "Config", "load_config", "resolve_config_path", "CONFIG_DIR_ENV"]

#: Environment variable naming a directory searched for relative config paths.
CONFIG_DIR_ENV = "OMCTRACK_CONFIG_DIR"

_MISSING = object()


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


def _line_map(node, prefix=(), out=None) -> dict[tuple, int]:
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            path = prefix + (key.value,)
            out[path] = value.start_mark.line + 1
            _line_map(value, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, value in enumerate(node.value):
            out[prefix + (i,)] = value.start_mark.line + 1
            _line_map(value, prefix + (i,), out)
    return out


class Config:
    """Parsed config with typed, diagnosable field access."""

    def __init__(self, data: dict, source: str = "<config>", lines: dict | None = None):
        if not isinstance(data, dict):
            raise ConfigError(f"{source}: top level must be a mapping")
        self.data = data
        self.source = source
        self.lines = lines or {}

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "Config":
        try:
            node = yaml.compose(text)
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"{source}:{mark.line + 1}" if mark is not None else source
            problem = getattr(exc, "problem", None) or str(exc)
            raise ConfigError(f"{where}: YAML parse error: {problem}") from exc
        return cls(data or {}, source, _line_map(node) if node is not None else {})

    def _where(self, path: tuple) -> str:
        line = self.lines.get(path)
        return f"{self.source}:{line}" if line else self.source

    def error(self, path: tuple, message: str) -> ConfigError:
        return ConfigError(f"{self._where(path)}: field '{'.'.join(map(str, path))}' {message}")

    def has(self, dotted: str) -> bool:
        try:
            self._lookup(tuple(dotted.split(".")))
            return True
        except KeyError:
            return False

    def _lookup(self, path: tuple):
        node = self.data
        for key in path:
            if not isinstance(node, dict) or key not in node:
                raise KeyError(path)
            node = node[key]
        return node

    def raw(self, dotted: str, default=_MISSING):
        path = tuple(dotted.split("."))
        try:
            return self._lookup(path)
        except KeyError:
            if default is _MISSING:
                raise ConfigError(f"{self.source}: missing required field '{dotted}'") from None
            return default

    def number(self, dotted: str, default=_MISSING, positive=False, nonneg=False) -> float:
        value = self.raw(dotted, default)
        if value is default and default is not _MISSING:
            return value
        path = tuple(dotted.split("."))
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(path, f"must be a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise self.error(path, f"must be finite, got {value}")
        if positive and not value > 0:
            raise self.error(path, f"must be > 0, got {value}")
        if nonneg and not value >= 0:
            raise self.error(path, f"must be >= 0, got {value}")
        return value

    def integer(self, dotted: str, default=_MISSING, minimum: int | None = None) -> int:
        value = self.raw(dotted, default)
        if value is default and default is not _MISSING:
            return value
        path = tuple(dotted.split("."))
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(path, f"must be an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise self.error(path, f"must be >= {minimum}, got {value}")
        return value

    def point(self, dotted: str) -> tuple[float, float]:
        value = self.raw(dotted)
        ok = (isinstance(value, list) and len(value) == 2
              and all(isinstance(c, (int, float)) and not isinstance(c, bool)
                      and math.isfinite(c) for c in value))
        if not ok:
            raise self.error(tuple(dotted.split(".")), f"must be a pair of finite numbers, got {value!r}")
        return float(value[0]), float(value[1])

    def points(self, dotted: str, default=_MISSING) -> list[tuple[float, float]]:
        value = self.raw(dotted, default)
        if value is default and default is not _MISSING:
            return value
        path = tuple(dotted.split("."))
        if not isinstance(value, list) or not value:
            raise self.error(path, "must be a non-empty list of [x, y] pairs")
        pts = []
        for i, p in enumerate(value):
            ok = (isinstance(p, list) and len(p) == 2
                  and all(isinstance(c, (int, float)) and not isinstance(c, bool)
                          and math.isfinite(c) for c in p))
            if not ok:
                raise self.error(path + (i,), f"must be a pair of finite numbers, got {p!r}")
            pts.append((float(p[0]), float(p[1])))
        return pts

    # -- builders ---------------------------------------------------------

    def spreads(self) -> tuple[float, float]:
        """``(sigma_t, sigma_p)`` from either both fields or ``link.sigma_sum``."""
        if self.has("link.sigma_t") or self.has("link.sigma_p"):
            return (self.number("link.sigma_t", nonneg=True),
                    self.number("link.sigma_p", nonneg=True))
        total = self.number("link.sigma_sum", positive=True)
        s = math.sqrt(0.5 * total)
        return s, s

    def thresholds(self) -> DesignThresholds:
        try:
            return DesignThresholds(
                eta=self.number("thresholds.eta", positive=True),
                gamma_th=self.number("thresholds.gamma_th", positive=True),
                xi=self.number("thresholds.xi"),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise self.error(("thresholds", "xi"), str(exc)) from None

    def beacon_array(self) -> BeaconArray:
        aA = self.number("beacons.aA", default=None, positive=True)
        if aA is None:
            aA = self.number("link.aA", positive=True)
        width = self.number("beacons.w_z", positive=True)
        centers = self.points("beacons.centers")
        area = self.number("link.area", default=1e-4, positive=True)
        return BeaconArray.uniform(centers, aA, width, area)

    def search(self) -> GridSearchConfig | None:
        if not self.has("search"):
            return None
        region = self.raw("search.region")
        if (not isinstance(region, list) or len(region) != 4
                or not all(isinstance(v, (int, float)) for v in region)):
            raise self.error(("search", "region"), "must be [x_min, x_max, y_min, y_max]")
        try:
            return GridSearchConfig(*map(float, region), self.number("search.step", positive=True))
        except ValueError as exc:
            raise self.error(("search", "region"), str(exc)) from None

    def width_grid(self) -> np.ndarray:
        start = self.number("sweep.w_z.start", positive=True)
        stop = self.number("sweep.w_z.stop", positive=True)
        num = self.integer("sweep.w_z.num", minimum=0)
        if num == 0:
            raise self.error(("sweep", "w_z", "num"), "grid is empty")
        if stop < start:
            raise self.error(("sweep", "w_z", "stop"), f"must be >= start ({start})")
        return np.linspace(start, stop, num)

    def sweep(self) -> tuple[str, tuple[float, ...]] | None:
        if not self.has("sweep.parameter"):
            return None
        name = self.raw("sweep.parameter")
        if name not in SWEEP_PARAMETERS:
            raise self.error(("sweep", "parameter"), f"must be one of {SWEEP_PARAMETERS}, got {name!r}")
        values = self.raw("sweep.values")
        if not isinstance(values, list) or not values or not all(
                isinstance(v, (int, float)) and math.isfinite(v) for v in values):
            raise self.error(("sweep", "values"), "must be a non-empty list of finite numbers")
        return name, tuple(float(v) for v in values)

    def experiment(self, seed: int | None = None, trials: int | None = None,
                   require: tuple[str, ...] = ()) -> ExperimentConfig:
        """Build an :class:`ExperimentConfig` from whichever sections are present.

        ``require`` names sections (``"link"``, ``"beacons"``, ``"noise"``,
        ``"thresholds"``) whose absence is an error.
        """
        for section in require:
            if not self.has(section):
                raise ConfigError(f"{self.source}: missing required section '{section}'")
        has_link_spread = any(self.has(f"link.{k}") for k in ("sigma_t", "sigma_p", "sigma_sum"))
        sigma_t = sigma_p = None
        if has_link_spread:
            sigma_t, sigma_p = self.spreads()
        return ExperimentConfig(
            z=self.number("link.z", positive=True),
            aA=self.number("link.aA", default=None, positive=True),
            main_width=self.number("link.w_z", default=None, positive=True),
            area=self.number("link.area", default=1e-4, positive=True),
            array=self.beacon_array() if self.has("beacons") else None,
            mobility=MobilitySpec(sigma_t) if sigma_t is not None else None,
            pointing=PointingSpec(sigma_p) if sigma_p is not None else None,
            noise=(NoiseSpec(self.number("noise.sigma_n", nonneg=True))
                   if self.has("noise") else None),
            thresholds=self.thresholds() if self.has("thresholds") else None,
            trial_count=(trials if trials is not None
                         else self.integer("simulation.trials", default=DEFAULT_TRIALS, minimum=1)),
            master_seed=(seed if seed is not None
                         else self.integer("simulation.seed", default=0, minimum=0)),
            search=self.search(),
            sweep=self.sweep(),
        )

    def snapshot(self) -> dict[str, Any]:
        return copy.deepcopy(self.data)


def bundled_config_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("omctrack.configs").iterdir()
                  if p.name.endswith(".yaml"))


def resolve_config_path(name: str | os.PathLike) -> Path:
    """Locate a config file.

    Tried in order: the path as given, the directory in ``$OMCTRACK_CONFIG_DIR``,
    then the configs bundled with the package (by bare name, e.g. ``table1``).
    """
    path = Path(name)
    if path.is_file():
        return path
    candidates = []
    env_dir = os.environ.get(CONFIG_DIR_ENV)
    if env_dir and not path.is_absolute():
        candidates += [Path(env_dir) / path, Path(env_dir) / f"{path}.yaml"]
    bundled = resources.files("omctrack.configs")
    candidates += [Path(str(bundled / path.name)), Path(str(bundled / f"{path.name}.yaml"))]
    for c in candidates:
        if c.is_file():
            return c
    raise ConfigError(f"config file not found: {name}")


def load_config(name: str | os.PathLike) -> Config:
    path = resolve_config_path(name)
    return Config.from_text(path.read_text(), str(path))
