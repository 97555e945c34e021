"""Network geometry, Rayleigh link statistics and the SNR algebra.

Squared channel gains of a complex Gaussian link with per-dimension
variance ``s2`` are exponential with mean ``2 * s2``; they are drawn as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Relative slack when comparing an SNR against its target. Powers that are
# set to meet a target exactly land within a few ulps of it.
SNR_RTOL = 1e-9

Point = tuple[float, float]


def _point(p) -> Point:
    x, y = p
    return (float(x), float(y))


@dataclass(frozen=True)
class NetworkScenario:
    """Node placement plus the propagation and link-budget constants."""

    source_pos: Point = (0.0, 0.0)
    dest_pos: Point = (100.0, 0.0)
    relay_positions: tuple[Point, ...] = ()
    alpha: float = 3.0
    antenna_gain_tx: float = 1.0
    antenna_gain_rx: float = 1.0
    wavelength: float = 1.0 / 3.0
    system_loss: float = 1.0
    noise_power: float = 1e-10
    snr_target: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "source_pos", _point(self.source_pos))
        object.__setattr__(self, "dest_pos", _point(self.dest_pos))
        object.__setattr__(self, "relay_positions",
                           tuple(_point(p) for p in self.relay_positions))
        if self.system_loss < 1:
            raise ValueError("system_loss must be >= 1")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be > 0")
        if not self.snr_target > 0:
            raise ValueError("snr_target must be > 0")
        for name in ("alpha", "antenna_gain_tx", "antenna_gain_rx", "wavelength"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if distance(self.source_pos, self.dest_pos) <= 0:
            raise ValueError("source and destination coincide")
        for i, r in enumerate(self.relay_positions):
            if distance(r, self.source_pos) <= 0 or distance(r, self.dest_pos) <= 0:
                raise ValueError(f"relay {i} coincides with the source or destination")

    @property
    def n_relays(self) -> int:
        return len(self.relay_positions)

    @property
    def pathloss_constant(self) -> float:
        """C = Gt Gr lambda^2 / ((4 pi)^2 L)."""
        return (self.antenna_gain_tx * self.antenna_gain_rx * self.wavelength ** 2
                / ((4 * math.pi) ** 2 * self.system_loss))

    def with_destination(self, dest_pos) -> "NetworkScenario":
        from dataclasses import replace
        return replace(self, dest_pos=_point(dest_pos))


def place_relays(count: int, x_range=(25.0, 75.0), y_range=(-25.0, 25.0),
                 seed: int = 0) -> tuple[Point, ...]:
    """Uniform relay placement in a box, fixed by ``seed``."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(x_range[0], x_range[1], size=count)
    ys = rng.uniform(y_range[0], y_range[1], size=count)
    return tuple((float(x), float(y)) for x, y in zip(xs, ys))


DEFAULT_PLACEMENT_SEED = 20071025


def default_scenario(placement_seed: int = DEFAULT_PLACEMENT_SEED,
                     n_relays: int = 15) -> NetworkScenario:
    """Source and destination 100 m apart, relays uniform in a 50 m x 50 m box
    centred between them, 900 MHz free-space-like constants."""
    return NetworkScenario(relay_positions=place_relays(n_relays,
                                                        seed=placement_seed))


def distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class ChannelStatistics:
    """Per-dimension variances of the source-relay (f), relay-destination (g)
    and direct (h) links."""

    var_f: tuple[float, ...]
    var_g: tuple[float, ...]
    var_h: float

    def __post_init__(self):
        object.__setattr__(self, "var_f", tuple(float(v) for v in self.var_f))
        object.__setattr__(self, "var_g", tuple(float(v) for v in self.var_g))
        object.__setattr__(self, "var_h", float(self.var_h))
        if len(self.var_f) != len(self.var_g):
            raise ValueError("var_f and var_g must have the same length")
        if not all(v > 0 for v in self.var_f + self.var_g + (self.var_h,)):
            raise ValueError("all variances must be > 0")

    @property
    def n_relays(self) -> int:
        return len(self.var_f)


@dataclass(frozen=True)
class ChannelRealization:
    f_sq: tuple[float, ...]
    g_sq: tuple[float, ...]
    h_sq: float

    def __post_init__(self):
        object.__setattr__(self, "f_sq", tuple(float(v) for v in self.f_sq))
        object.__setattr__(self, "g_sq", tuple(float(v) for v in self.g_sq))
        object.__setattr__(self, "h_sq", float(self.h_sq))
        if len(self.f_sq) != len(self.g_sq):
            raise ValueError("f_sq and g_sq must have the same length")
        if min(self.f_sq + self.g_sq + (self.h_sq,)) < 0:
            raise ValueError("squared gains must be >= 0")


@dataclass(frozen=True)
class ReliableSet:
    indices: tuple[int, ...] = field(default_factory=tuple)

    def __contains__(self, i) -> bool:
        return i in self.indices

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)


def pathloss_variance(distance_m: float, scenario: NetworkScenario) -> float:
    """Per-dimension link variance C / d^alpha."""
    if not distance_m > 0:
        raise ValueError(f"distance must be > 0, got {distance_m}")
    return scenario.pathloss_constant / distance_m ** scenario.alpha


def build_statistics(scenario: NetworkScenario) -> ChannelStatistics:
    src, dst = scenario.source_pos, scenario.dest_pos
    var_f = [pathloss_variance(distance(src, r), scenario)
             for r in scenario.relay_positions]
    var_g = [pathloss_variance(distance(r, dst), scenario)
             for r in scenario.relay_positions]
    return ChannelStatistics(var_f, var_g,
                             pathloss_variance(distance(src, dst), scenario))


def draw_realization(stats: ChannelStatistics,
                     rng: np.random.Generator) -> ChannelRealization:
    """One fading draw. Consumes ``2N + 1`` standard exponentials, f then g then h."""
    n = stats.n_relays
    e = rng.standard_exponential(2 * n + 1)
    f_sq = 2.0 * np.asarray(stats.var_f) * e[:n]
    g_sq = 2.0 * np.asarray(stats.var_g) * e[n:2 * n]
    return ChannelRealization(f_sq, g_sq, 2.0 * stats.var_h * e[2 * n])


def received_snr(power: float, gain_sq: float, noise_power: float) -> float:
    if not noise_power > 0:
        raise ValueError("noise_power must be > 0")
    return power * gain_sq / noise_power


def meets_target(snr: float, target: float) -> bool:
    return snr >= target * (1.0 - SNR_RTOL)


def reliable_set(source_power: float, real: ChannelRealization,
                 scenario: NetworkScenario) -> ReliableSet:
    """Relays able to decode the source broadcast at ``source_power``."""
    return ReliableSet(tuple(
        i for i, f in enumerate(real.f_sq)
        if meets_target(received_snr(source_power, f, scenario.noise_power),
                        scenario.snr_target)))


def mrc_snr(source_power: float, h_sq: float,
            forwarding: Iterable[tuple[float, float]],
            noise_power: float) -> float:
    """Destination SNR after maximum ratio combining of the direct copy and
    each ``(relay_power, g_sq)`` forwarded copy."""
    return (source_power * h_sq
            + math.fsum(p * g for p, g in forwarding)) / noise_power


def normalized(values: Sequence[float] | float, noise_power: float):
    """Divide gains or variances by the noise power (unit-noise form)."""
    if np.isscalar(values):
        return float(values) / noise_power
    return [float(v) / noise_power for v in values]
