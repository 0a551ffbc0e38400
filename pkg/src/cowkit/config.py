"""Configuration documents for the cowkit CLI.

One JSON document mirrors the parameter tree; unknown keys are rejected so
typos in physics parameters fail loudly, with a line hint where possible.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError, ParameterError
from .multipoint import NetworkTopology
from .photonics import ChannelParams, DetectorParams, SourceParams
from .session import NoiseParams

SWEEP_AXES = ("dead_time", "efficiency", "length_km", "mean_photon_number")
SWEEP_MODES = ("single", "dual", "bounds")


@dataclass(frozen=True)
class DistillParams:
    """Post-processing knobs: disclosed ratio, compression ratio, QBER gate."""

    disclosed_fraction: float = 0.1
    compression_fraction: float = 0.9
    qber_threshold: float = 0.05

    def __post_init__(self):
        if not 0 < self.disclosed_fraction < 1:
            raise ParameterError(f"disclosed_fraction must be in (0, 1), got {self.disclosed_fraction}")
        if not 0 <= self.compression_fraction <= 1:
            raise ParameterError(f"compression_fraction must be in [0, 1], got {self.compression_fraction}")
        if not 0 <= self.qber_threshold <= 1:
            raise ParameterError(f"qber_threshold must be in [0, 1], got {self.qber_threshold}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one session needs; sub-objects validate themselves."""

    source: SourceParams = SourceParams()
    channel: ChannelParams = ChannelParams()
    detectors: tuple[DetectorParams, ...] = (DetectorParams(),)
    noise: NoiseParams = NoiseParams()
    distill: DistillParams = DistillParams()
    duration_s: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 1 <= len(self.detectors) <= 2:
            raise ParameterError(f"detectors must list 1 or 2 entries, got {len(self.detectors)}")
        if self.duration_s < 0:
            raise ParameterError(f"duration_s must be >= 0, got {self.duration_s}")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class SweepSpec:
    """One swept axis plus the receiver modes to evaluate."""

    axis: str
    values: tuple[float, ...]
    modes: tuple[str, ...] = ("single", "dual")

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ParameterError(f"axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        if not self.values:
            raise ParameterError("sweep values must be non-empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ParameterError("sweep values must be strictly increasing")
        if not self.modes:
            raise ParameterError("modes must be non-empty")
        for mode in self.modes:
            if mode not in SWEEP_MODES:
                raise ParameterError(f"mode must be one of {SWEEP_MODES}, got {mode!r}")


@dataclass(frozen=True)
class BoundsSpec:
    """Grid for the security-bound sweep."""

    mus: tuple[float, ...]
    efficiency: float
    lengths_km: tuple[float, ...]
    fiber_loss_db_per_km: float = 0.22
    excess_loss_db: float = 0.0

    def __post_init__(self):
        if not self.lengths_km:
            raise ParameterError("length range must be non-empty")
        if any(b <= a for a, b in zip(self.lengths_km, self.lengths_km[1:])):
            raise ParameterError("lengths must be strictly increasing")


def _line_hint(text: str, key: str) -> str:
    pos = text.find(f'"{key}"')
    if pos < 0:
        return ""
    return f" (line {text.count(chr(10), 0, pos) + 1})"


def _check_keys(section: dict, allowed: set[str], where: str, text: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}{_line_hint(text, key)}")


def _section(doc: dict, name: str, text: str) -> dict:
    value = doc.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"section {name!r} must be an object{_line_hint(text, name)}")
    return value


def _build(cls, section: dict, where: str, text: str):
    try:
        return cls(**section)
    except ParameterError as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def _parse_json(text: str, path: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


_EXPERIMENT_KEYS = {"source", "channel", "detectors", "noise", "distill", "duration_s", "seed"}
_SOURCE_KEYS = {"repetition_rate", "mean_photon_number", "decoy_fraction", "wavelength", "initial_power"}
_CHANNEL_KEYS = {"fiber_loss_db_per_km", "length_km", "excess_loss_db", "data_line_fraction"}
_DETECTOR_KEYS = {"efficiency", "dead_time", "dark_count_rate"}
_NOISE_KEYS = {"optical_error_prob", "dark_count_rate"}
_DISTILL_KEYS = {"disclosed_fraction", "compression_fraction", "qber_threshold"}


def experiment_config_from_dict(doc: dict, text: str = "", extra_keys: set[str] = frozenset()) -> ExperimentConfig:
    _check_keys(doc, _EXPERIMENT_KEYS | set(extra_keys), "config", text)
    source_sec = _section(doc, "source", text)
    _check_keys(source_sec, _SOURCE_KEYS, "source", text)
    channel_sec = _section(doc, "channel", text)
    _check_keys(channel_sec, _CHANNEL_KEYS, "channel", text)
    detector_secs = doc.get("detectors", [{}])
    if not isinstance(detector_secs, list) or not detector_secs:
        raise ConfigError(f"detectors must be a non-empty array{_line_hint(text, 'detectors')}")
    for det in detector_secs:
        if not isinstance(det, dict):
            raise ConfigError("each detector must be an object")
        _check_keys(det, _DETECTOR_KEYS, "detectors", text)
    noise_sec = _section(doc, "noise", text)
    _check_keys(noise_sec, _NOISE_KEYS, "noise", text)
    distill_sec = _section(doc, "distill", text)
    _check_keys(distill_sec, _DISTILL_KEYS, "distill", text)
    duration = doc.get("duration_s", 0.1)
    if not isinstance(duration, (int, float)) or duration <= 0:
        raise ConfigError(f"duration_s must be > 0{_line_hint(text, 'duration_s')}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer{_line_hint(text, 'seed')}")
    try:
        return ExperimentConfig(
            source=_build(SourceParams, source_sec, "source", text),
            channel=_build(ChannelParams, channel_sec, "channel", text),
            detectors=tuple(_build(DetectorParams, det, "detectors", text) for det in detector_secs),
            noise=_build(NoiseParams, noise_sec, "noise", text),
            distill=_build(DistillParams, distill_sec, "distill", text),
            duration_s=float(duration),
            seed=seed,
        )
    except ParameterError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    text = Path(path).read_text()
    return experiment_config_from_dict(_parse_json(text, str(path)), text)


def _expand_values(raw: Any, where: str, text: str) -> tuple[float, ...]:
    if isinstance(raw, list):
        return tuple(float(v) for v in raw)
    if isinstance(raw, dict):
        _check_keys(raw, {"start", "stop", "step"}, where, text)
        try:
            start, stop, step = float(raw["start"]), float(raw["stop"]), float(raw["step"])
        except KeyError as exc:
            raise ConfigError(f"{where} range needs start/stop/step, missing {exc.args[0]!r}") from None
        if step <= 0 or stop < start:
            raise ConfigError(f"{where} range must have step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + i * step for i in range(n))
    raise ConfigError(f"{where} must be an array or a start/stop/step object")


def load_sweep_spec(path: str | Path) -> SweepSpec:
    text = Path(path).read_text()
    doc = _parse_json(text, str(path))
    _check_keys(doc, {"axis", "values", "modes"}, "sweep", text)
    if "axis" not in doc or "values" not in doc:
        raise ConfigError("sweep requires 'axis' and 'values'")
    values = _expand_values(doc["values"], "values", text)
    modes = tuple(doc.get("modes", ["single", "dual"]))
    try:
        return SweepSpec(axis=doc["axis"], values=values, modes=modes)
    except ParameterError as exc:
        raise ConfigError(f"invalid sweep: {exc}") from exc


_BOUNDS_KEYS = {"mu", "efficiency", "length_km", "fiber_loss_db_per_km", "excess_loss_db"}


def load_bounds_spec(path: str | Path) -> BoundsSpec:
    text = Path(path).read_text()
    doc = _parse_json(text, str(path))
    _check_keys(doc, _BOUNDS_KEYS, "bounds config", text)
    for required in ("mu", "efficiency", "length_km"):
        if required not in doc:
            raise ConfigError(f"bounds config requires {required!r}")
    mu_raw = doc["mu"]
    if not isinstance(mu_raw, list):
        raise ConfigError("mu must be an array of mean photon numbers")
    lengths = _expand_values(doc["length_km"], "length_km", text)
    try:
        return BoundsSpec(
            mus=tuple(float(m) for m in mu_raw),
            efficiency=float(doc["efficiency"]),
            lengths_km=lengths,
            fiber_loss_db_per_km=float(doc.get("fiber_loss_db_per_km", 0.22)),
            excess_loss_db=float(doc.get("excess_loss_db", 0.0)),
        )
    except ParameterError as exc:
        raise ConfigError(f"invalid bounds config: {exc}") from exc


def topology_from_dict(doc: dict, text: str = "") -> NetworkTopology:
    _check_keys(doc, {"positions", "distances", "segments"}, "topology", text)
    segments_raw = doc.get("segments")
    if not isinstance(segments_raw, list) or not segments_raw:
        raise ConfigError("topology requires a non-empty 'segments' array")
    segments = []
    for entry in segments_raw:
        if not isinstance(entry, list) or len(entry) != 3:
            raise ConfigError(f"each segment must be a [bob1, alice, bob2] triple, got {entry!r}")
        segments.append(tuple(str(p) for p in entry))
    positions = doc.get("positions")
    distances_raw = doc.get("distances")
    if (positions is None) == (distances_raw is None):
        raise ConfigError("topology requires exactly one of 'positions' or 'distances'")
    distances = None
    if distances_raw is not None:
        distances = {}
        for a, row in distances_raw.items():
            if not isinstance(row, dict):
                raise ConfigError("distances must map party -> {party: km}")
            for b, km in row.items():
                key = (str(a), str(b)) if str(a) <= str(b) else (str(b), str(a))
                if key in distances and distances[key] != float(km):
                    raise ConfigError(f"asymmetric distance for pair {key}")
                distances[key] = float(km)
    else:
        positions = {str(p): float(km) for p, km in positions.items()}
    try:
        return NetworkTopology(segments=tuple(segments), positions=positions, distances=distances)
    except ParameterError as exc:
        raise ConfigError(f"invalid topology: {exc}") from exc


def load_multipoint_config(path: str | Path) -> tuple[ExperimentConfig, NetworkTopology]:
    """Multipoint config: an experiment config plus a 'topology' section."""
    text = Path(path).read_text()
    doc = _parse_json(text, str(path))
    if "topology" not in doc:
        raise ConfigError(f"{path}: multipoint config requires a 'topology' section")
    topology_sec = doc["topology"]
    if not isinstance(topology_sec, dict):
        raise ConfigError("'topology' must be an object")
    config = experiment_config_from_dict(doc, text, extra_keys={"topology"})
    return config, topology_from_dict(topology_sec, text)
