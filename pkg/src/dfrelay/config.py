"""Experiment configuration: TOML in, validated frozen dataclasses out."""

from __future__ import annotations

import re
from dataclasses import MISSING, dataclass, field, fields
from typing import Any, Optional

import tomli
import tomli_w

from .model import DEFAULT_PLACEMENT_SEED, NetworkScenario, place_relays
from .montecarlo import DestinationBox, STRATEGY_CODES

DEFAULT_RHOS = (0.01, 0.02, 0.05, 0.1, 0.2)
ALL_STRATEGIES = tuple(STRATEGY_CODES)


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when it could be located."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _pair(v, what) -> tuple[float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise TypeError(f"{what} must be a pair of numbers")
    return (_num(v[0], what), _num(v[1], what))


def _num(v, what) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError(f"{what} must be a number, got {v!r}")
    return float(v)


def _int(v, what) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError(f"{what} must be an integer, got {v!r}")
    return v


def _range(v, what) -> tuple[float, float]:
    lo, hi = _pair(v, what)
    if not lo < hi:
        raise ValueError(f"{what} must be increasing, got [{lo}, {hi}]")
    return (lo, hi)


@dataclass(frozen=True)
class RelayBox:
    x_range: tuple[float, float] = (25.0, 75.0)
    y_range: tuple[float, float] = (-25.0, 25.0)
    count: int = 15
    placement_seed: int = DEFAULT_PLACEMENT_SEED

    def __post_init__(self):
        object.__setattr__(self, "x_range", _range(self.x_range, "x_range"))
        object.__setattr__(self, "y_range", _range(self.y_range, "y_range"))
        if _int(self.count, "count") < 0:
            raise ValueError("count must be >= 0")
        _int(self.placement_seed, "placement_seed")


@dataclass(frozen=True)
class ScenarioConfig:
    source_pos: tuple[float, float] = (0.0, 0.0)
    dest_pos: tuple[float, float] = (100.0, 0.0)
    # explicit coordinates win over the box
    relays: Optional[tuple[tuple[float, float], ...]] = None
    relay_box: RelayBox = field(default_factory=RelayBox)
    alpha: float = 3.0
    antenna_gain_tx: float = 1.0
    antenna_gain_rx: float = 1.0
    wavelength: float = 1.0 / 3.0
    system_loss: float = 1.0
    noise_power: float = 1e-10
    snr_target: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "source_pos", _pair(self.source_pos, "source_pos"))
        object.__setattr__(self, "dest_pos", _pair(self.dest_pos, "dest_pos"))
        if self.relays is not None:
            if not isinstance(self.relays, (list, tuple)):
                raise TypeError("relays must be a list of [x, y] pairs")
            object.__setattr__(self, "relays",
                               tuple(_pair(r, "relays entry") for r in self.relays))
        for name in ("alpha", "antenna_gain_tx", "antenna_gain_rx", "wavelength",
                     "system_loss", "noise_power", "snr_target"):
            object.__setattr__(self, name, _num(getattr(self, name), name))
        self.build()  # geometry and physics checks live in NetworkScenario

    def relay_positions(self):
        if self.relays is not None:
            return self.relays
        b = self.relay_box
        return place_relays(b.count, b.x_range, b.y_range, b.placement_seed)

    def build(self) -> NetworkScenario:
        return NetworkScenario(
            source_pos=self.source_pos, dest_pos=self.dest_pos,
            relay_positions=self.relay_positions(), alpha=self.alpha,
            antenna_gain_tx=self.antenna_gain_tx,
            antenna_gain_rx=self.antenna_gain_rx, wavelength=self.wavelength,
            system_loss=self.system_loss, noise_power=self.noise_power,
            snr_target=self.snr_target)


@dataclass(frozen=True)
class PsmFixed:
    source_power: float
    threshold: float

    def __post_init__(self):
        if not _num(self.source_power, "source_power") > 0:
            raise ValueError("psm source_power must be > 0")
        if not _num(self.threshold, "threshold") > 0:
            raise ValueError("psm threshold must be > 0")
        object.__setattr__(self, "source_power", float(self.source_power))
        object.__setattr__(self, "threshold", float(self.threshold))


@dataclass(frozen=True)
class BoxConfig:
    x_range: tuple[float, float] = (20.0, 100.0)
    y_range: tuple[float, float] = (-50.0, 50.0)

    def __post_init__(self):
        object.__setattr__(self, "x_range", _range(self.x_range, "x_range"))
        object.__setattr__(self, "y_range", _range(self.y_range, "y_range"))

    def build(self) -> DestinationBox:
        return DestinationBox(self.x_range, self.y_range)


@dataclass(frozen=True)
class RunConfig:
    trials: int
    strategies: tuple[str, ...] = ALL_STRATEGIES
    rho_targets: tuple[float, ...] = DEFAULT_RHOS
    master_seed: int = 0
    workers: int = 1
    ocpa_p_max: Optional[float] = None
    psm: Optional[PsmFixed] = None
    destination_box: Optional[BoxConfig] = None

    def __post_init__(self):
        if _int(self.trials, "trials") < 1:
            raise ValueError("trials must be >= 1")
        strategies = tuple(self.strategies)
        unknown = [s for s in strategies if s not in STRATEGY_CODES]
        if unknown:
            raise ValueError(f"unknown strategies {unknown}; "
                             f"known: {list(STRATEGY_CODES)}")
        if not strategies or len(set(strategies)) != len(strategies):
            raise ValueError("strategies must be nonempty and distinct")
        object.__setattr__(self, "strategies", strategies)
        rhos = tuple(_num(r, "rho_targets entry") for r in self.rho_targets)
        if not rhos or not all(0 < r < 1 for r in rhos):
            raise ValueError(f"rho_targets must be nonempty and in (0, 1), got {list(rhos)}")
        if len(set(rhos)) != len(rhos):
            raise ValueError("rho_targets must be distinct")
        object.__setattr__(self, "rho_targets", rhos)
        _int(self.master_seed, "master_seed")
        if self.master_seed < 0:
            raise ValueError("master_seed must be >= 0")
        if _int(self.workers, "workers") < 1:
            raise ValueError("workers must be >= 1")
        if self.ocpa_p_max is not None:
            if not _num(self.ocpa_p_max, "ocpa_p_max") > 0:
                raise ValueError("ocpa_p_max must be > 0")
            object.__setattr__(self, "ocpa_p_max", float(self.ocpa_p_max))


@dataclass(frozen=True)
class OutputConfig:
    csv: str = "results.csv"
    curve_csv: Optional[str] = None
    per_trial_csv: Optional[str] = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and (not isinstance(v, str) or not v):
                raise TypeError(f"{f.name} must be a nonempty path string")


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunConfig
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


# -- dict <-> dataclass --------------------------------------------------------

_SECTIONS = {"scenario": ScenarioConfig, "run": RunConfig, "output": OutputConfig}
_NESTED = {("scenario", "relay_box"): RelayBox, ("run", "psm"): PsmFixed,
           ("run", "destination_box"): BoxConfig}


def _line_of(text: str, path: tuple[str, ...]) -> Optional[int]:
    """Line defining ``path`` (section names then a key), best effort."""
    if text is None or not path:
        return None
    *table, key = path
    want = ".".join(table)
    current = ""
    header = re.compile(r"^\s*\[([^\[\]]+)\]\s*(#.*)?$")
    for n, line in enumerate(text.splitlines(), start=1):
        m = header.match(line)
        if m:
            current = m.group(1).strip()
            if current == ".".join(path):
                return n
            continue
        if current == want and re.match(rf"^\s*{re.escape(key)}\s*=", line):
            return n
    # the section itself, if the key is absent
    for n, line in enumerate(text.splitlines(), start=1):
        m = header.match(line)
        if m and m.group(1).strip() in (want, ".".join(path)):
            return n
    return None


def _build(cls, raw: Any, path: tuple[str, ...], text: Optional[str]):
    if not isinstance(raw, dict):
        raise ConfigError(f"[{'.'.join(path)}] must be a table",
                          _line_of(text, path))
    names = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(names))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in [{'.'.join(path)}]",
                          _line_of(text, path + (unknown[0],)))
    kwargs = {}
    for key, value in raw.items():
        sub = _NESTED.get(path + (key,))
        kwargs[key] = _build(sub, value, path + (key,), text) if sub else value
    required = [n for n, f in names.items()
                if f.default is MISSING and f.default_factory is MISSING
                and n not in raw]
    if required:
        raise ConfigError(f"[{'.'.join(path)}] is missing required field(s) "
                          f"{required}", _line_of(text, path))
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        # point at the offending key when the message names one
        line = None
        for key in raw:
            if re.search(rf"\b{re.escape(key)}\b", str(exc)):
                line = _line_of(text, path + (key,))
                break
        raise ConfigError(f"[{'.'.join(path)}] {exc}",
                          line or _line_of(text, path)) from None


def config_from_dict(raw: dict, text: Optional[str] = None) -> ExperimentConfig:
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s) {unknown}",
                          _line_of(text, (unknown[0],)))
    if "run" not in raw:
        raise ConfigError("missing [run] section (required field: trials)")
    parts = {name: _build(cls, raw[name], (name,), text)
             for name, cls in _SECTIONS.items() if name in raw}
    return ExperimentConfig(**parts)


def _to_plain(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in fields(obj)
                if getattr(obj, f.name) is not None}
    if isinstance(obj, tuple):
        return [_to_plain(v) for v in obj]
    return obj


def config_to_dict(config: ExperimentConfig) -> dict:
    return _to_plain(config)


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax: {exc}",
                          int(m.group(1)) if m else None) from None
    return config_from_dict(raw, text)


def load_config(path, overrides=()) -> ExperimentConfig:
    """Read, apply ``key.path=value`` overrides, validate."""
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    if not overrides:
        return parse_config(text)
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax: {exc}") from None
    for item in overrides:
        apply_override(raw, item)
    return config_from_dict(raw, text)


def apply_override(raw: dict, item: str) -> None:
    """Set ``a.b.c=value`` in ``raw``; the value is parsed as a TOML value
    when possible and kept as a string otherwise."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, value = item.split("=", 1)
    parts = [p.strip() for p in key.strip().split(".")]
    if not all(parts):
        raise ConfigError(f"override {item!r} has an empty key")
    try:
        parsed = tomli.loads(f"v = {value.strip()}")["v"]
    except tomli.TOMLDecodeError:
        parsed = value.strip()
    node = raw
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {item!r}: {p} is not a table")
    node[parts[-1]] = parsed


def dumps_config(config: ExperimentConfig) -> str:
    return tomli_w.dumps(config_to_dict(config))


def write_config(config: ExperimentConfig, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_config(config).encode("utf-8"))


def default_config(trials: int = 100_000) -> ExperimentConfig:
    return ExperimentConfig(run=RunConfig(trials=trials))

