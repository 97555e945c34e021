"""Trial engine, sweep aggregation and brute-force oracles.

Every trial draws from its own counter-based stream keyed by
``(master_seed, trial_index)``; a trial consumes ``2N + 1`` standard
exponentials (f, g, h) followed by three uniforms (random relay pick and,
when enabled, the destination position). Results therefore do not depend on
how trials are split across workers, and all strategies see the same fading
for the same trial index.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, special

from . import strategies as st
from ._backend import kernels
from .model import (SNR_RTOL, ChannelRealization, ChannelStatistics, NetworkScenario,
                    build_statistics, meets_target, mrc_snr, reliable_set)

Z95 = 1.959963984540054

STRATEGY_CODES = {"ocpa": 0, "odpa": 1, "psm": 2, "srm": 3, "rrs": 4,
                  "direct": 5}

STATUS = ("relayed", "fallback", "infeasible")

CHUNK = 4096


@dataclass(frozen=True)
class DestinationBox:
    x_range: tuple[float, float] = (20.0, 100.0)
    y_range: tuple[float, float] = (-50.0, 50.0)

    def point(self, u1: float, u2: float) -> tuple[float, float]:
        return (self.x_range[0] + u1 * (self.x_range[1] - self.x_range[0]),
                self.y_range[0] + u2 * (self.y_range[1] - self.y_range[0]))


@dataclass(frozen=True)
class TrialOutcome:
    source_power: float
    relay_power_total: float
    forwarding_count: int
    destination_snr: float
    outage: bool
    status: str = "relayed"
    capped_outage: Optional[bool] = None


@dataclass(frozen=True)
class SweepResult:
    strategy: str
    rho_target: float
    trials: int
    outage_rate: float
    outage_ci: float
    mean_total_power: float
    power_ci: float
    mean_source_power: float
    mean_relay_power: float
    fallback_rate: float
    master_seed: int
    mean_expected_total: float = math.nan
    mean_waste: float = 0.0
    power_cap: float = math.nan
    trial_data: Optional[dict] = field(default=None, compare=False, repr=False)


def trial_stream(master_seed: int, trial_index: int) -> np.random.Generator:
    if master_seed < 0 or trial_index < 0:
        raise ValueError("seeds and trial indices must be non-negative")
    return np.random.Generator(
        np.random.Philox(key=master_seed, counter=[0, 0, trial_index, 0]))


def draw_block(n_relays: int, master_seed: int, start: int, stop: int):
    """Standard draws for trials ``start..stop-1``: exponentials (n, 2N+1)
    and uniforms (n, 3)."""
    e = np.empty((stop - start, 2 * n_relays + 1))
    u = np.empty((stop - start, 3))
    if stop <= start:
        return e, u
    rng = trial_stream(master_seed, start)
    bitgen = rng.bit_generator
    fresh = bitgen.state
    for row, t in enumerate(range(start, stop)):
        # rewinding one generator to a fresh counter is the same stream as
        # trial_stream(master_seed, t), about 3x cheaper than building it
        fresh["state"]["counter"][:] = (0, 0, t, 0)
        bitgen.state = fresh
        e[row] = rng.standard_exponential(2 * n_relays + 1)
        u[row] = rng.random(3)
    return e, u


def _variances(scenario: NetworkScenario, positions, dest_xy):
    """Per-trial relay->destination and direct variances for moving
    destinations (vectorized path loss)."""
    c, alpha = scenario.pathloss_constant, scenario.alpha
    dx = dest_xy[:, 0]
    dy = dest_xy[:, 1]
    rel = np.asarray(positions, dtype=float).reshape(-1, 2)
    d_rd = np.hypot(rel[None, :, 0] - dx[:, None], rel[None, :, 1] - dy[:, None])
    sx, sy = scenario.source_pos
    d_sd = np.hypot(dx - sx, dy - sy)
    if (d_rd <= 0).any() or (d_sd <= 0).any():
        raise ValueError("randomized destination landed on another node")
    return c / d_rd ** alpha, c / d_sd ** alpha


def realize_block(scenario: NetworkScenario, stats: ChannelStatistics, e, u,
                  dest_box: Optional[DestinationBox] = None):
    """Noise-normalized gains and g-variances for a block of draws."""
    n0 = scenario.noise_power
    n = stats.n_relays
    vf = np.asarray(stats.var_f) / n0
    if dest_box is None:
        vg = np.broadcast_to(np.asarray(stats.var_g) / n0, (e.shape[0], n))
        vh = np.full(e.shape[0], stats.var_h / n0)
    else:
        dest = np.column_stack([
            dest_box.x_range[0] + u[:, 1] * (dest_box.x_range[1] - dest_box.x_range[0]),
            dest_box.y_range[0] + u[:, 2] * (dest_box.y_range[1] - dest_box.y_range[0])])
        vg_phys, vh_phys = _variances(scenario, scenario.relay_positions, dest)
        vg, vh = vg_phys / n0, vh_phys / n0
    F = np.ascontiguousarray(2.0 * vf * e[:, :n])
    G = np.ascontiguousarray(2.0 * vg * e[:, n:2 * n])
    H = np.ascontiguousarray(2.0 * vh * e[:, 2 * n])
    return F, G, H, np.ascontiguousarray(vg, dtype=float)


def _run_block(args):
    (codes, scenario, stats, rhos, psm_params, dest_box, seed, start,
     stop) = args
    e, u = draw_block(stats.n_relays, seed, start, stop)
    F, G, H, VG = realize_block(scenario, stats, e, u, dest_box)
    U = np.ascontiguousarray(u[:, 0])
    out = []
    for code in codes:
        for rho in rhos:
            ps, gamma = psm_params.get(rho, (0.0, 0.0)) if code == 2 else (0.0, 0.0)
            out.append(kernels.simulate(code, F, G, H, VG, U,
                                        scenario.snr_target, rho, ps,
                                        gamma / scenario.noise_power))
    return out


def simulate_trials(strategies: Sequence[str], scenario: NetworkScenario,
                    rho_targets: Sequence[float], trials: int, master_seed: int,
                    *, psm_params=None, dest_box=None, workers: int = 1,
                    stats: Optional[ChannelStatistics] = None):
    """Raw per-trial arrays keyed by ``(strategy, rho_target)``.

    ``psm_params`` maps rho_target to ``(source_power, threshold)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    stats = build_statistics(scenario) if stats is None else stats
    codes = [STRATEGY_CODES[s] for s in strategies]
    rhos = [float(r) for r in rho_targets]
    tasks = [(codes, scenario, stats, rhos, dict(psm_params or {}), dest_box,
              master_seed, a, min(a + CHUNK, trials))
             for a in range(0, trials, CHUNK)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_run_block, tasks))
    else:
        blocks = [_run_block(t) for t in tasks]
    names = ("source", "relay", "count", "snr_d", "status", "expected", "waste")
    result = {}
    k = 0
    for s in strategies:
        for rho in rhos:
            result[(s, rho)] = {
                name: np.concatenate([b[k][j] for b in blocks])
                for j, name in enumerate(names)}
            k += 1
    return result


def _mean_ci(x: np.ndarray) -> tuple[float, float]:
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(Z95 * x.std(ddof=1) / math.sqrt(x.size))


def aggregate(strategy: str, rho_target: float, data: dict,
              scenario: NetworkScenario, master_seed: int,
              power_cap: Optional[float] = None,
              keep_trials: bool = False) -> SweepResult:
    """Fold per-trial arrays into a :class:`SweepResult`.

    The centralized policy never misses the SNR target on its own; it is
    charged an outage when its total exceeds ``power_cap`` (default: the
    (1 - rho) quantile of its totals), and such trials transmit nothing.
    """
    source = data["source"].copy()
    relay = data["relay"].copy()
    status = data["status"]
    infeasible = status == 2
    snr_out = data["snr_d"] < scenario.snr_target * (1.0 - SNR_RTOL)
    outage = snr_out | infeasible
    cap = math.nan
    if strategy == "ocpa":
        total = source + relay
        cap = (float(np.quantile(total[~infeasible], 1.0 - rho_target,
                                 method="higher"))
               if power_cap is None else float(power_cap))
        capped = total > cap
        outage = capped | infeasible
        source[capped] = 0.0
        relay[capped] = 0.0
    n = source.size
    rate = float(outage.mean())
    ms, _ = _mean_ci(source)
    mr, _ = _mean_ci(relay)
    _, pci = _mean_ci(source + relay)
    expected = data["expected"]
    trial_data = None
    if keep_trials:
        trial_data = dict(data, outage=outage, source_charged=source,
                          relay_charged=relay)
    return SweepResult(
        strategy=strategy, rho_target=float(rho_target), trials=n,
        outage_rate=rate, outage_ci=Z95 * math.sqrt(rate * (1 - rate) / n),
        mean_total_power=ms + mr, power_ci=pci, mean_source_power=ms,
        mean_relay_power=mr, fallback_rate=float((status != 0).mean()),
        master_seed=master_seed,
        mean_expected_total=(float(np.nanmean(expected))
                             if np.isfinite(expected).any() else math.nan),
        mean_waste=float(data["waste"].mean()), power_cap=cap,
        trial_data=trial_data)


def resolve_psm_params(scenario, stats, rho_targets, fixed=None) -> dict:
    """(source_power, threshold) per rho: the fixed pair, or the grid pick."""
    out = {}
    for rho in rho_targets:
        if fixed is not None:
            out[float(rho)] = (float(fixed[0]), float(fixed[1]))
            continue
        p = st.psm_pick_params(stats, rho, scenario)
        if not p.feasible:
            raise st.InfeasibleError(
                f"no passive-source pair meets rho_target={rho}")
        out[float(rho)] = (p.source_power, p.threshold)
    return out


def run_sweep(strategy: str, scenario: NetworkScenario,
              rho_targets: Sequence[float], trials: int, master_seed: int,
              *, workers: int = 1, psm_fixed=None,
              ocpa_p_max: Optional[float] = None,
              dest_box: Optional[DestinationBox] = None,
              keep_trials: bool = False) -> list[SweepResult]:
    stats = build_statistics(scenario)
    psm = (resolve_psm_params(scenario, stats, rho_targets, psm_fixed)
           if strategy == "psm" else None)
    raw = simulate_trials([strategy], scenario, rho_targets, trials,
                          master_seed, psm_params=psm, dest_box=dest_box,
                          workers=workers, stats=stats)
    return [aggregate(strategy, float(rho), raw[(strategy, float(rho))],
                      scenario, master_seed, ocpa_p_max, keep_trials)
            for rho in rho_targets]


# -- single trial through the reference allocators -----------------------------

def realize(stats: ChannelStatistics, e) -> ChannelRealization:
    n = stats.n_relays
    return ChannelRealization(2.0 * np.asarray(stats.var_f) * e[:n],
                              2.0 * np.asarray(stats.var_g) * e[n:2 * n],
                              2.0 * stats.var_h * e[2 * n])


def run_trial(strategy: str, scenario: NetworkScenario,
              stats: ChannelStatistics, rho_target: float, trial_seed: int,
              *, master_seed: int = 0, psm_params=None,
              ocpa_p_max: Optional[float] = None,
              dest_box: Optional[DestinationBox] = None) -> TrialOutcome:
    """One trial on the object-level allocators (slow path, used to check
    the batch kernels)."""
    rng = trial_stream(master_seed, trial_seed)
    e = rng.standard_exponential(2 * stats.n_relays + 1)
    u = rng.random(3)
    if dest_box is not None:
        scenario = scenario.with_destination(dest_box.point(u[1], u[2]))
        stats = build_statistics(scenario)
    real = realize(stats, e)
    try:
        if strategy == "ocpa":
            d = st.ocpa_allocate(real, scenario)
        elif strategy == "odpa":
            d = st.odpa_allocate(real.f_sq, real.h_sq, stats.var_g, rho_target,
                                 scenario)
        elif strategy == "psm":
            if psm_params is None:
                p = st.psm_pick_params(stats, rho_target, scenario)
                psm_params = (p.source_power, p.threshold)
            d = st.psm_decision(psm_params[0], psm_params[1], real.h_sq,
                                scenario)
        elif strategy == "srm":
            d = st.srm_allocate(real.f_sq, real.h_sq, stats.var_g, rho_target,
                                scenario)
        elif strategy == "rrs":
            d = st.rrs_allocate(real.f_sq, real.h_sq, stats.var_g, rho_target,
                                float(u[0]), scenario)
        elif strategy == "direct":
            d = st.direct_allocate(real.h_sq, scenario)
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
    except st.InfeasibleError:
        return TrialOutcome(0.0, 0.0, 0, 0.0, True, "infeasible")
    reliable = reliable_set(d.source_power, real, scenario)
    forwarding = []
    for i, g in enumerate(real.g_sq):
        p = st.relay_forward_decision(i, g, d, i in reliable)
        if p is not None:
            forwarding.append((p, g))
    snr = mrc_snr(d.source_power, real.h_sq, forwarding, scenario.noise_power)
    relay = math.fsum(p for p, _ in forwarding)
    status = "fallback" if d.mode is st.Mode.DIRECT and strategy != "direct" else "relayed"
    capped = None
    if strategy == "ocpa" and ocpa_p_max is not None:
        capped = d.source_power + relay > ocpa_p_max
    return TrialOutcome(d.source_power, relay, len(forwarding), snr,
                        not meets_target(snr, scenario.snr_target), status,
                        capped)


# -- oracles -----------------------------------------------------------------

@dataclass(frozen=True)
class BruteForceResult:
    source_power: float
    threshold: float
    expected_total: float


def _oracle_threshold(var_g, rho):
    v = np.asarray(var_g)

    def g(gamma):
        return np.sum(np.log(-np.expm1(-gamma / (2 * v)))) - math.log(rho)

    hi = 2 * v.max()
    while g(hi) < 0:
        hi *= 2
    return optimize.brentq(g, 0.0 + 1e-300, hi, xtol=1e-300, rtol=1e-14,
                           maxiter=500)


def distributed_expected_total(source_power: float, f, h: float, var_g,
                               snr_target: float, rho_target: float):
    """Expected total of the threshold scheme at an arbitrary source power
    (noise-normalized inputs); returns (total, threshold)."""
    rem = max(0.0, snr_target - source_power * h)
    if rem == 0:
        return source_power, math.inf
    members = [j for j in range(len(f))
               if source_power * f[j] >= snr_target * (1 - 1e-12)]
    if not members:
        return math.inf, math.nan
    v = np.asarray([var_g[j] for j in members])
    gamma = _oracle_threshold(v, rho_target)
    inv = float(np.sum(special.exp1(gamma / (2 * v)) / (2 * v)))
    return source_power + rem * inv, gamma


def bruteforce_source_power_oracle(f_sq, h_sq: float, var_g, rho_target: float,
                               scenario: NetworkScenario,
                               grid_points: int = 2000) -> BruteForceResult:
    """Best expected total over a log-spaced continuum of source powers.

    Uses scipy's root finder and exponential integral, not the allocator's.
    """
    if len(f_sq) > 4:
        raise ValueError("brute-force oracle is limited to N <= 4")
    if grid_points < 100:
        raise ValueError("grid_points must be >= 100")
    n0, s = scenario.noise_power, scenario.snr_target
    f = [x / n0 for x in f_sq]
    h = h_sq / n0
    vg = [v / n0 for v in var_g]
    relay_cands = sorted(s / x for x in f if x > h)
    lo = relay_cands[0] if relay_cands else s / h
    hi = s / h if h > 0 else 2 * relay_cands[-1]
    best = BruteForceResult(math.nan, math.nan, math.inf)
    for p in np.geomspace(lo, hi, grid_points) if hi > lo else [lo]:
        total, gamma = distributed_expected_total(float(p), f, h, vg, s,
                                                  rho_target)
        if total < best.expected_total:
            best = BruteForceResult(float(p), gamma * n0, total)
    return best


def ocpa_exhaustive_oracle(real: ChannelRealization, scenario: NetworkScenario,
                           quantization: float) -> float:
    """Least total power over a source-power grid of step ``quantization``,
    each point trying the direct link and every single decodable relay."""
    if real.h_sq <= 0 and not any(x > 0 for x in real.f_sq):
        raise ValueError("all source-side gains are zero")
    if len(real.f_sq) > 2:
        raise ValueError("exhaustive oracle is limited to N <= 2")
    n0, s = scenario.noise_power, scenario.snr_target
    f = np.asarray(real.f_sq) / n0
    g = np.asarray(real.g_sq) / n0
    h = real.h_sq / n0
    top = s / h if h > 0 else max(s / x for x in f if x > 0)
    grid = quantization * np.arange(1, math.ceil(top / quantization) + 1)
    need = np.maximum(0.0, s - grid * h)
    best = np.where(need <= s * 1e-12, grid, np.inf)
    for k in range(len(f)):
        if f[k] <= 0 or g[k] <= 0:
            continue
        ok = grid * f[k] >= s * (1 - 1e-12)
        cost = np.where(ok, grid + need / g[k], np.inf)
        best = np.minimum(best, cost)
    return float(best.min())
