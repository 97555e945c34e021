"""Power allocation policies for parallel decode-and-forward relays.

Six policies map the channel knowledge they are allowed to see onto an
:class:`AllocationDecision`:

* ``ocpa``   centralized optimum, full CSI
* ``odpa``   distributed optimum: source knows f, h and the g statistics,
             relays compare their own g against a broadcast threshold
* ``psm``    passive source, fixed source power and threshold
* ``srm``    single designated relay chosen from f, h and g statistics
* ``rrs``    single relay drawn uniformly at random
* ``direct`` direct link only

Internally gains and variances are divided by the noise power; powers then
come out in watts directly (``P = SNR / gain_normalized``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import analytics
from .analytics import inverse_gain_sum
from .model import (ChannelRealization, ChannelStatistics, NetworkScenario,
                    ReliableSet)
from .numerics import Tolerance, bisect, exp_integral_e1

STRATEGIES = ("ocpa", "odpa", "psm", "srm", "rrs", "direct")

THRESHOLD_TOL = Tolerance(rel=1e-13, abs=0.0, max_iter=200)


class InfeasibleError(ValueError):
    """No allocation can meet the SNR target (e.g. every gain is zero)."""


class Mode(str, enum.Enum):
    DIRECT = "direct-only"
    DISTRIBUTED = "distributed-threshold"
    DESIGNATED = "designated-relay"


@dataclass(frozen=True)
class AllocationDecision:
    strategy: str
    source_power: float
    mode: Mode
    threshold: float
    snr_remainder: float
    noise_power: float
    designated_relay: Optional[int] = None
    expected_total_power: float = math.nan
    # centralized policy only: the exact relay power it assigns
    relay_power: Optional[float] = None

    def __post_init__(self):
        if self.source_power < 0:
            raise ValueError("source power must be >= 0")
        if self.mode is Mode.DIRECT and not (
                math.isinf(self.threshold) and self.snr_remainder == 0):
            raise ValueError("direct-only decisions carry no relay threshold")


@dataclass(frozen=True)
class CandidateEvaluation:
    candidate_source_power: float
    reliable_set: ReliableSet
    solved_threshold: float
    g_eff_sq: float
    expected_total: float
    snr_remainder: float


def _check_rho(rho_target: float) -> None:
    if not 0 < rho_target < 1:
        raise ValueError(f"rho_target must lie in (0, 1), got {rho_target}")


def _direct(strategy: str, h_sq: float, scenario: NetworkScenario,
            ) -> AllocationDecision:
    if not h_sq > 0:
        raise InfeasibleError("direct link gain is zero")
    ps = scenario.snr_target * scenario.noise_power / h_sq
    return AllocationDecision(strategy, ps, Mode.DIRECT, math.inf, 0.0,
                              scenario.noise_power, expected_total_power=ps)


def direct_allocate(h_sq: float, scenario: NetworkScenario) -> AllocationDecision:
    return _direct("direct", h_sq, scenario)


# -- threshold equation ------------------------------------------------------

def threshold_bounds(reliable_var_g: Sequence[float],
                     rho_target: float) -> tuple[float, float]:
    """Bracket for the threshold from the smallest and largest variance."""
    # -log(1 - rho^(1/n)) written to stay accurate as rho approaches 1
    scale = -math.log(-math.expm1(math.log(rho_target) / len(reliable_var_g)))
    return 2.0 * min(reliable_var_g) * scale, 2.0 * max(reliable_var_g) * scale


def no_forward_probability(gamma: float, var_g: Sequence[float]) -> float:
    """Prob(no relay in the set clears ``gamma``)."""
    return math.prod(-math.expm1(-gamma / (2.0 * v)) for v in var_g)


def solve_threshold(reliable_var_g: Sequence[float], rho_target: float,
                    tol: Tolerance = THRESHOLD_TOL) -> float:
    """Threshold at which every reliable relay stays silent with
    probability exactly ``rho_target``."""
    if len(reliable_var_g) == 0:
        raise ValueError("threshold needs a nonempty reliable set")
    _check_rho(rho_target)
    lo, hi = threshold_bounds(reliable_var_g, rho_target)
    if lo == hi:
        return lo

    def residual(gamma):
        return no_forward_probability(gamma, reliable_var_g) - rho_target

    # rounding can push the analytic bracket endpoints onto the wrong side
    if residual(lo) >= 0:
        return lo
    if residual(hi) <= 0:
        return hi
    return bisect(residual, lo, hi, tol)


# -- centralized optimum -----------------------------------------------------

def ocpa_allocate(real: ChannelRealization,
                  scenario: NetworkScenario) -> AllocationDecision:
    n0, s = scenario.noise_power, scenario.snr_target
    h = real.h_sq / n0
    best, best_score = None, math.inf
    for k, (fk, gk) in enumerate(zip(real.f_sq, real.g_sq)):
        f, g = fk / n0, gk / n0
        if f >= h and g >= h and f > 0 and g > 0:
            score = 1 / f + 1 / g - h / (f * g)
            if score < best_score:
                best, best_score = k, score
    if best is None:
        return _direct("ocpa", real.h_sq, scenario)
    f, g = real.f_sq[best] / n0, real.g_sq[best] / n0
    ps = s / f
    remainder = max(0.0, s - ps * h)
    relay = remainder / g
    return AllocationDecision("ocpa", ps, Mode.DESIGNATED, 0.0, remainder, n0,
                              designated_relay=best,
                              expected_total_power=ps + relay,
                              relay_power=relay)


# -- distributed optimum -----------------------------------------------------

def odpa_candidates_normalized(f: Sequence[float], h: float,
                               var_g: Sequence[float], snr_target: float,
                               rho_target: float) -> list[CandidateEvaluation]:
    """All candidate source powers with their thresholds and expected totals.

    Inputs are noise-normalized. The last entry is the direct-link candidate
    (infinite source power when ``h == 0``).
    """
    order = sorted((i for i in range(len(f)) if f[i] > h),
                   key=lambda i: (-f[i], i))
    out = []
    for m, i in enumerate(order, start=1):
        ps = snr_target / f[i]
        members = tuple(sorted(order[:m]))
        vg = [var_g[j] for j in members]
        remainder = snr_target * (1.0 - h / f[i])
        gamma = solve_threshold(vg, rho_target)
        inv = inverse_gain_sum(gamma, vg)
        out.append(CandidateEvaluation(ps, ReliableSet(members), gamma,
                                       1.0 / inv, ps + remainder * inv,
                                       remainder))
    ps_direct = snr_target / h if h > 0 else math.inf
    out.append(CandidateEvaluation(ps_direct, ReliableSet(), math.inf, 0.0,
                                   ps_direct, 0.0))
    return out


def best_candidate(cands: Sequence[CandidateEvaluation]) -> int:
    """Index of the cheapest candidate; earlier (smaller power) wins ties."""
    best = 0
    for j in range(1, len(cands)):
        if cands[j].expected_total < cands[best].expected_total:
            best = j
    return best


def odpa_candidates(f_sq: Sequence[float], h_sq: float, var_g: Sequence[float],
                    rho_target: float,
                    scenario: NetworkScenario) -> list[CandidateEvaluation]:
    """Physical-unit view of :func:`odpa_candidates_normalized`."""
    n0 = scenario.noise_power
    cands = odpa_candidates_normalized(
        [x / n0 for x in f_sq], h_sq / n0, [v / n0 for v in var_g],
        scenario.snr_target, rho_target)
    return [CandidateEvaluation(c.candidate_source_power, c.reliable_set,
                                c.solved_threshold * n0, c.g_eff_sq * n0,
                                c.expected_total, c.snr_remainder)
            for c in cands]


def odpa_allocate(f_sq: Sequence[float], h_sq: float, var_g: Sequence[float],
                  rho_target: float,
                  scenario: NetworkScenario) -> AllocationDecision:
    _check_rho(rho_target)
    if h_sq <= 0 and not any(x > 0 for x in f_sq):
        raise InfeasibleError("all source-side gains are zero")
    cands = odpa_candidates(f_sq, h_sq, var_g, rho_target, scenario)
    c = cands[best_candidate(cands)]
    if not c.reliable_set:
        return _direct("odpa", h_sq, scenario)
    return AllocationDecision("odpa", c.candidate_source_power, Mode.DISTRIBUTED,
                              c.solved_threshold, c.snr_remainder,
                              scenario.noise_power,
                              expected_total_power=c.expected_total)


# -- relay side --------------------------------------------------------------

def relay_forward_decision(relay_index: int, g_sq_i: float,
                           decision: AllocationDecision,
                           is_reliable: bool) -> Optional[float]:
    """Transmit power relay ``relay_index`` chooses, or None if it stays silent."""
    if decision.snr_remainder <= 0 or decision.mode is Mode.DIRECT:
        return None
    if decision.mode is Mode.DISTRIBUTED:
        if not is_reliable:
            return None
    elif relay_index != decision.designated_relay:
        return None
    if not (g_sq_i >= decision.threshold and g_sq_i > 0):
        return None
    if decision.relay_power is not None:
        return decision.relay_power
    return decision.snr_remainder * decision.noise_power / g_sq_i


# -- passive source ----------------------------------------------------------

def psm_outage(source_power: float, gamma: float, stats: ChannelStatistics,
               scenario: NetworkScenario) -> float:
    """Prob(no relay both decodes and clears gamma, and the direct link fails)."""
    if source_power <= 0:
        return 1.0
    d_out = analytics.direct_outage(source_power, stats.var_h, scenario)
    prod = 1.0
    for vf, vg in zip(stats.var_f, stats.var_g):
        a = analytics.reliable_probability(source_power, vf, scenario)
        b = 0.0 if math.isinf(gamma) else math.exp(-gamma / (2.0 * vg))
        prod *= 1.0 - a * b
    return prod * d_out


def psm_outage_floor(source_power: float, stats: ChannelStatistics,
                     scenario: NetworkScenario) -> float:
    """Outage with a zero threshold, the least any threshold can give."""
    return psm_outage(source_power, 0.0, stats, scenario)


def psm_threshold_cap(source_power: float, rho_target: float,
                      stats: ChannelStatistics,
                      scenario: NetworkScenario) -> float:
    """Threshold at which prod(1 - b_i) * d_out reaches rho_target.

    Every admissible threshold for this source power lies below it.
    """
    d_out = analytics.direct_outage(source_power, stats.var_h, scenario)
    if d_out <= rho_target:
        return math.inf
    target = rho_target / d_out
    return solve_threshold(stats.var_g, target)


def psm_wrong_forwarding_prob(i: int, x: float, source_power: float,
                              stats: ChannelStatistics,
                              scenario: NetworkScenario) -> float:
    """Prob(relay i is reliable and some other reliable relay has a squared
    gain above ``x``)."""
    a = [analytics.reliable_probability(source_power, vf, scenario)
         for vf in stats.var_f]
    prod = 1.0
    for j, vg in enumerate(stats.var_g):
        if j != i:
            prod *= 1.0 - a[j] * math.exp(-x / (2.0 * vg))
    return a[i] * (1.0 - prod)


def psm_expected_waste(source_power: float, gamma: float,
                       stats: ChannelStatistics, scenario: NetworkScenario,
                       snr_remainder: Optional[float] = None) -> float:
    """Mean power spent by forwarding relays that are not the best one.

    ``snr_remainder`` defaults to its expectation over the direct link.
    """
    from .numerics import integrate_tail

    if snr_remainder is None:
        snr_remainder = analytics.expected_snr_remainder(
            source_power, stats.var_h, scenario)
    if snr_remainder == 0 or stats.n_relays < 2 or math.isinf(gamma):
        return 0.0
    if not gamma > 0:
        raise analytics.DivergenceError("wasted power diverges at gamma = 0")
    n0 = scenario.noise_power
    total = 0.0
    for i, vg in enumerate(stats.var_g):
        two_s2 = 2.0 * vg

        # substitute u = x / (2 var_g) so the integrand is O(1)
        def integrand(u, i=i, two_s2=two_s2):
            return (psm_wrong_forwarding_prob(i, u * two_s2, source_power,
                                              stats, scenario)
                    * math.exp(-u) / u)

        total += snr_remainder * n0 / two_s2 * integrate_tail(
            integrand, gamma / two_s2, Tolerance(rel=1e-10, abs=0.0,
                                                 max_iter=200))
    return total


@dataclass(frozen=True)
class PsmGrid:
    points: int = 200
    # largest source power searched; None means up to the power at which
    # the direct link alone meets the outage target
    p_max: Optional[float] = None


@dataclass(frozen=True)
class PsmParams:
    feasible: bool
    source_power: float = math.nan
    threshold: float = math.nan
    expected_total: float = math.nan
    outage: float = math.nan


def psm_expected_total(source_power: float, gamma: float,
                       stats: ChannelStatistics,
                       scenario: NetworkScenario) -> float:
    return analytics.psm_report(source_power, gamma, stats,
                                scenario).expected_total


def _psm_min_source_power(stats, rho_target, scenario) -> float:
    def g(p):
        return psm_outage_floor(p, stats, scenario) - rho_target

    lo = hi = scenario.snr_target * scenario.noise_power / (
        2.0 * max(stats.var_f + (stats.var_h,)))
    while g(hi) > 0:
        hi *= 2.0
    while g(lo) < 0:
        lo *= 0.5
    return bisect(g, lo, hi, Tolerance(rel=1e-12))


def psm_largest_threshold(source_power: float, rho_target: float,
                          stats: ChannelStatistics,
                          scenario: NetworkScenario) -> float:
    """Largest threshold keeping the outage at or below ``rho_target``."""
    if analytics.direct_outage(source_power, stats.var_h, scenario) <= rho_target:
        return math.inf
    if psm_outage_floor(source_power, stats, scenario) > rho_target:
        return math.nan

    def g(gamma):
        return psm_outage(source_power, gamma, stats, scenario) - rho_target

    hi = psm_threshold_cap(source_power, rho_target, stats, scenario)
    if g(hi) <= 0:
        return hi
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) <= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * hi:
            break
    return lo


def psm_pick_params(stats: ChannelStatistics, rho_target: float,
                    scenario: NetworkScenario,
                    grid: PsmGrid = PsmGrid()) -> PsmParams:
    """Grid search over source power for the cheapest admissible
    (source power, threshold) pair."""
    _check_rho(rho_target)
    if stats.n_relays == 0:
        raise ValueError("passive source model needs at least one relay")
    p_lo = _psm_min_source_power(stats, rho_target, scenario)
    p_direct = (scenario.snr_target * scenario.noise_power
                / (2.0 * stats.var_h * -math.log1p(-rho_target)))
    p_hi = p_direct if grid.p_max is None else min(grid.p_max, p_direct)
    if grid.p_max is not None and psm_outage_floor(
            grid.p_max, stats, scenario) > rho_target:
        return PsmParams(False)
    if p_hi <= p_lo:
        powers = np.array([p_hi if grid.p_max is None else grid.p_max])
    else:
        powers = np.geomspace(p_lo, p_hi, grid.points)
    best = PsmParams(False)
    for p in powers:
        p = float(p)
        gamma = psm_largest_threshold(p, rho_target, stats, scenario)
        if math.isnan(gamma) or gamma <= 0:
            continue
        total = psm_expected_total(p, gamma, stats, scenario)
        if not best.feasible or total < best.expected_total:
            best = PsmParams(True, p, gamma, total,
                             psm_outage(p, gamma, stats, scenario))
    return best


def psm_decision(source_power: float, gamma: float, h_sq: float,
                 scenario: NetworkScenario) -> AllocationDecision:
    """Per-realization view of the passive scheme; the remainder depends on
    the realized direct link."""
    remainder = max(0.0, scenario.snr_target
                    - source_power * h_sq / scenario.noise_power)
    return AllocationDecision("psm", source_power, Mode.DISTRIBUTED, gamma,
                              remainder, scenario.noise_power)


# -- single relay ------------------------------------------------------------

def srm_threshold_scale(rho_target: float) -> float:
    """Normalized threshold -2 ln(1 - rho); relay k uses var_g[k] times this."""
    return -2.0 * math.log1p(-rho_target)


def _designated(strategy, k, f_sq, h_sq, var_g, rho_target, scenario):
    n0, s = scenario.noise_power, scenario.snr_target
    tau = srm_threshold_scale(rho_target)
    kt = exp_integral_e1(tau / 2)
    ps = s * n0 / f_sq[k]
    remainder = max(0.0, s - ps * h_sq / n0)
    expected = ps + remainder * n0 * kt / (2.0 * var_g[k])
    return AllocationDecision(strategy, ps, Mode.DESIGNATED, var_g[k] * tau,
                              remainder, n0, designated_relay=k,
                              expected_total_power=expected)


def srm_scores(f_sq, h_sq, var_g, rho_target, scenario) -> list[float]:
    """Normalized expected totals per relay (inf where infeasible)."""
    n0 = scenario.noise_power
    kt = exp_integral_e1(srm_threshold_scale(rho_target) / 2)
    h = h_sq / n0
    out = []
    for fk, vk in zip(f_sq, var_g):
        f, v = fk / n0, vk / n0
        if f > 0 and h < 2.0 * v / kt:
            out.append(1.0 / f + kt / (2.0 * v) * max(0.0, 1.0 - h / f))
        else:
            out.append(math.inf)
    return out


def srm_allocate(f_sq: Sequence[float], h_sq: float, var_g: Sequence[float],
                 rho_target: float,
                 scenario: NetworkScenario) -> AllocationDecision:
    _check_rho(rho_target)
    scores = srm_scores(f_sq, h_sq, var_g, rho_target, scenario)
    k = int(np.argmin(scores)) if scores else -1
    direct = (scenario.snr_target * scenario.noise_power / h_sq
              if h_sq > 0 else math.inf)
    if k < 0 or math.isinf(scores[k]) or direct < scenario.snr_target * scores[k]:
        if math.isinf(direct):
            raise InfeasibleError("no usable relay and no direct link")
        return _direct("srm", h_sq, scenario)
    return _designated("srm", k, f_sq, h_sq, var_g, rho_target, scenario)


def rrs_pick(uniform: float, n_relays: int) -> int:
    return min(int(uniform * n_relays), n_relays - 1)


def rrs_allocate(f_sq: Sequence[float], h_sq: float, var_g: Sequence[float],
                 rho_target: float, rng: np.random.Generator | float,
                 scenario: NetworkScenario) -> AllocationDecision:
    """Uniformly drawn relay with the single-relay power and threshold rule.

    ``rng`` may be a generator or an already drawn uniform in [0, 1).
    """
    _check_rho(rho_target)
    n = len(f_sq)
    if n == 0:
        raise ValueError("random relay selection needs at least one relay")
    u = rng if isinstance(rng, float) else float(rng.random())
    k = rrs_pick(u, n)
    if not f_sq[k] > 0:
        raise InfeasibleError(f"relay {k} cannot decode at any power")
    return _designated("rrs", k, f_sq, h_sq, var_g, rho_target, scenario)
