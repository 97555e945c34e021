"""Closed-form expected powers and outage probabilities.

Gains, thresholds and variances may be passed in physical units; every
formula here only depends on ratios such as ``gamma / var`` or on
``gain / noise_power``, so the noise power is applied explicitly where an
SNR is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import ChannelStatistics, NetworkScenario
from .numerics import exp_integral_e1


class DivergenceError(ValueError):
    """An inverse-gain expectation diverges (threshold at zero)."""


@dataclass(frozen=True)
class AnalyticReport:
    expected_source_power: float
    expected_relay_power: float
    outage: float
    per_relay: tuple[float, ...] = field(default_factory=tuple)

    @property
    def expected_total(self) -> float:
        return self.expected_source_power + self.expected_relay_power


def inverse_gain_tail(gamma: float, var_g: float) -> float:
    """E[1/X; X >= gamma] for X exponential with mean 2*var_g."""
    if math.isinf(gamma):
        return 0.0
    if not gamma > 0:
        raise DivergenceError("inverse-gain expectation diverges at gamma = 0")
    two_s2 = 2.0 * var_g
    return exp_integral_e1(gamma / two_s2) / two_s2


def inverse_gain_sum(gamma: float, var_g: Sequence[float]) -> float:
    return math.fsum(inverse_gain_tail(gamma, v) for v in var_g)


def expected_relay_power(gamma: float, var_g: float, snr_remainder: float,
                         noise_power: float = 1.0) -> float:
    """Mean transmit power of one relay that forwards whenever its squared
    gain clears ``gamma``, spending ``snr_remainder * N0 / gain``."""
    if snr_remainder == 0:
        return 0.0
    return snr_remainder * noise_power * inverse_gain_tail(gamma, var_g)


def effective_gain(gamma: float, reliable_var_g: Sequence[float]) -> float:
    """Squared gain of the single equivalent relay standing in for the set."""
    if len(reliable_var_g) == 0:
        raise ValueError("effective gain needs at least one relay")
    total = inverse_gain_sum(gamma, reliable_var_g)
    return math.inf if total == 0 else 1.0 / total


def expected_additional_power(odpa_expected_totals, ocpa_totals) -> float:
    """Mean extra power of the distributed allocation over the centralized
    optimum, both evaluated on the same realization ensemble."""
    a = np.asarray(odpa_expected_totals, dtype=float)
    b = np.asarray(ocpa_totals, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"ensemble sizes differ: {a.shape} vs {b.shape}")
    return float(a.mean() - b.mean())


def direct_outage(source_power: float, var_h: float,
                  scenario: NetworkScenario) -> float:
    """Prob(direct link alone misses the SNR target)."""
    if source_power <= 0:
        return 1.0
    return -math.expm1(-scenario.snr_target * scenario.noise_power
                       / (2.0 * var_h * source_power))


def reliable_probability(source_power: float, var_f: float,
                         scenario: NetworkScenario) -> float:
    if source_power <= 0:
        return 0.0
    return math.exp(-scenario.snr_target * scenario.noise_power
                    / (2.0 * var_f * source_power))


def expected_snr_remainder(source_power: float, var_h: float,
                           scenario: NetworkScenario) -> float:
    """E[(SNR_target - P_s |h|^2 / N0)^+] over the Rayleigh direct link."""
    s = scenario.snr_target
    m = source_power * 2.0 * var_h / scenario.noise_power
    if m == 0:
        return s
    return s + m * math.expm1(-s / m)


def iid_design_identity(source_power: float, gamma: float, var_f: float,
                        var_g: float, n_relays: int, rho_target: float,
                        scenario: NetworkScenario) -> float:
    """LHS - RHS of the i.i.d. design rule that links source power and
    threshold when the direct link is nearly always in outage."""
    lhs = (scenario.snr_target * scenario.noise_power / (2 * source_power * var_f)
           + gamma / (2 * var_g))
    rhs = -math.log1p(-rho_target ** (1.0 / n_relays))
    return lhs - rhs


def srm_expected_relay_power(snr_remainder: float, var_g: float,
                             rho_target: float, noise_power: float = 1.0) -> float:
    """Mean power of a designated relay with threshold -2 var ln(1-rho)."""
    tau = -2.0 * math.log1p(-rho_target)
    return snr_remainder * noise_power * exp_integral_e1(tau / 2) / (2.0 * var_g)


def psm_report(source_power: float, gamma: float, stats: ChannelStatistics,
               scenario: NetworkScenario) -> AnalyticReport:
    """Expected powers and outage of the fixed (source power, threshold) scheme."""
    from .strategies import psm_outage

    snr_rem = expected_snr_remainder(source_power, stats.var_h, scenario)
    per_relay = tuple(
        reliable_probability(source_power, vf, scenario)
        * expected_relay_power(gamma, vg, snr_rem, scenario.noise_power)
        for vf, vg in zip(stats.var_f, stats.var_g))
    return AnalyticReport(source_power, math.fsum(per_relay),
                          psm_outage(source_power, gamma, stats, scenario),
                          per_relay)
