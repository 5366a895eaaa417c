"""JSON scenario files: loading, validation and round-tripping.

A scenario file is a single JSON object::

    {
      "scenario_name": "paper-noneve",
      "trials": 50,
      "output_format": "csv",
      "output_path": null,
      "seed": 7,
      "desired_key_length": 300,
      "excess_bit_factor": 2.0,
      "cascade_iterations": 4,
      "source": {"pump_rate": 1e9, "first_pair_prob": 4e-6,
                 "second_pair_prob": 0.333, "eve_prob": 0.0},
      "detector": {"eta_d": 0.8, "v_d": 2e-4, "rho_d": 0.8}
    }

``source`` and ``detector`` must list every field.  The remaining top-level
keys are optional and default to the values of :class:`RunConfig` (plus
``trials = 50``, ``output_format = "csv"``).  Optional extras:
``bob_detector`` (same shape as ``detector``), ``max_pumps`` and
``cascade_trace_back``.  Unknown keys are rejected.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

from .core import SEED_MASK, DetectorParams, RunConfig, SourceParams

OUTPUT_FORMATS = ("csv", "json")
DEFAULT_TRIALS = 50


class ConfigError(ValueError):
    """Invalid scenario file.  ``field`` is the dotted path of the offending key."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        where = f"{field}: " if field else ""
        at = f" (line {line})" if line is not None else ""
        super().__init__(f"{where}{message}{at}")


@dataclass(frozen=True)
class ScenarioConfig:
    run: RunConfig = field(default_factory=RunConfig)
    trials: int = DEFAULT_TRIALS
    scenario_name: str = "custom"
    output_path: Optional[str] = None
    output_format: str = "csv"
    #: False when the file left ``seed`` out, so an environment seed may apply.
    seed_in_file: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"must be one of {OUTPUT_FORMATS}", "output_format")
        if self.trials < 1:
            raise ConfigError("must be >= 1", "trials")


def _number(value: Any, name: str, *, integer: bool = False) -> Union[int, float]:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", name)
    if integer:
        if value != int(value):
            raise ConfigError(f"expected an integer, got {value!r}", name)
        return int(value)
    return float(value)


def _probability(value: Any, name: str) -> float:
    x = _number(value, name)
    if not 0.0 <= x <= 1.0:
        raise ConfigError(f"must lie in [0, 1], got {x!r}", name)
    return x


def _check_keys(data: dict, allowed: set[str], prefix: str = "") -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError("unknown field", prefix + key)


def _require(data: dict, key: str, prefix: str) -> Any:
    if key not in data:
        raise ConfigError("missing required field", prefix + key)
    return data[key]


def _section(data: dict, key: str) -> dict:
    section = _require(data, key, "")
    if not isinstance(section, dict):
        raise ConfigError("expected an object", key)
    return section


def _source(data: dict) -> SourceParams:
    names = {f.name for f in fields(SourceParams)}
    _check_keys(data, names, "source.")
    rate = _number(_require(data, "pump_rate", "source."), "source.pump_rate")
    if rate <= 0:
        raise ConfigError(f"must be positive, got {rate!r}", "source.pump_rate")
    probs = {k: _probability(_require(data, k, "source."), "source." + k) for k in sorted(names - {"pump_rate"})}
    return SourceParams(pump_rate=rate, **probs)


def _detector(data: dict, prefix: str) -> DetectorParams:
    names = {f.name for f in fields(DetectorParams)}
    _check_keys(data, names, prefix)
    return DetectorParams(**{k: _probability(_require(data, k, prefix), prefix + k) for k in sorted(names)})


TOP_LEVEL = {
    "scenario_name", "trials", "output_path", "output_format", "seed", "desired_key_length",
    "excess_bit_factor", "cascade_iterations", "cascade_trace_back", "max_pumps", "source",
    "detector", "bob_detector",
}


def scenario_from_dict(data: Any) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object")
    _check_keys(data, TOP_LEVEL)
    defaults = RunConfig()

    source = _source(_section(data, "source"))
    detector = _detector(_section(data, "detector"), "detector.")
    bob = data.get("bob_detector")
    if bob is not None:
        if not isinstance(bob, dict):
            raise ConfigError("expected an object or null", "bob_detector")
        bob = _detector(bob, "bob_detector.")

    length = _number(data.get("desired_key_length", defaults.desired_key_length), "desired_key_length", integer=True)
    if length < 1:
        raise ConfigError("must be >= 1", "desired_key_length")
    factor = _number(data.get("excess_bit_factor", defaults.excess_bit_factor), "excess_bit_factor")
    if factor < 1:
        raise ConfigError("must be >= 1", "excess_bit_factor")
    iterations = _number(data.get("cascade_iterations", defaults.cascade_iterations), "cascade_iterations", integer=True)
    if iterations < 1:
        raise ConfigError("must be >= 1", "cascade_iterations")
    seed = _number(data.get("seed", defaults.seed), "seed", integer=True)
    if not 0 <= seed <= SEED_MASK:
        raise ConfigError("must be an unsigned 64-bit integer", "seed")
    max_pumps = _number(data.get("max_pumps", defaults.max_pumps), "max_pumps", integer=True)
    if max_pumps < 1:
        raise ConfigError("must be >= 1", "max_pumps")
    trace_back = data.get("cascade_trace_back", defaults.cascade_trace_back)
    if not isinstance(trace_back, bool):
        raise ConfigError("expected true or false", "cascade_trace_back")

    trials = _number(data.get("trials", DEFAULT_TRIALS), "trials", integer=True)
    if trials < 1:
        raise ConfigError("must be >= 1", "trials")
    name = data.get("scenario_name", "custom")
    if not isinstance(name, str):
        raise ConfigError("expected a string", "scenario_name")
    out_path = data.get("output_path")
    if out_path is not None and not isinstance(out_path, str):
        raise ConfigError("expected a string or null", "output_path")
    fmt = data.get("output_format", "csv")
    if fmt not in OUTPUT_FORMATS:
        raise ConfigError(f"must be one of {OUTPUT_FORMATS}, got {fmt!r}", "output_format")

    run = RunConfig(
        desired_key_length=length,
        excess_bit_factor=factor,
        cascade_iterations=iterations,
        source=source,
        detector=detector,
        seed=seed,
        bob_detector=bob,
        max_pumps=max_pumps,
        cascade_trace_back=trace_back,
    )
    return ScenarioConfig(run=run, trials=trials, scenario_name=name, output_path=out_path,
                          output_format=fmt, seed_in_file="seed" in data)


def scenario_to_dict(scenario: ScenarioConfig) -> dict:
    run = scenario.run
    return {
        "scenario_name": scenario.scenario_name,
        "trials": scenario.trials,
        "output_path": scenario.output_path,
        "output_format": scenario.output_format,
        "seed": run.seed,
        "desired_key_length": run.desired_key_length,
        "excess_bit_factor": run.excess_bit_factor,
        "cascade_iterations": run.cascade_iterations,
        "cascade_trace_back": run.cascade_trace_back,
        "max_pumps": run.max_pumps,
        "source": {f.name: getattr(run.source, f.name) for f in fields(SourceParams)},
        "detector": {f.name: getattr(run.detector, f.name) for f in fields(DetectorParams)},
        "bob_detector": (None if run.bob_detector is None else
                         {f.name: getattr(run.bob_detector, f.name) for f in fields(DetectorParams)}),
    }


def loads_config(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from exc
    return scenario_from_dict(data)


def dumps_config(scenario: ScenarioConfig) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2) + "\n"


def list_presets() -> list[str]:
    root = resources.files("qkdsim") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> ScenarioConfig:
    if name not in list_presets():
        raise ConfigError(f"no such preset {name!r}; available: {', '.join(list_presets())}")
    return loads_config((resources.files("qkdsim") / "presets" / f"{name}.json").read_text())


def load_config(path: Union[str, os.PathLike]) -> ScenarioConfig:
    """Load a scenario file, or a bundled preset when ``path`` names one."""
    p = Path(path)
    if not p.exists() and str(path) in list_presets():
        return load_preset(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return loads_config(text)
