"""Pure-Python batch trial kernels.

Same contract as the compiled ``_ckernels`` module. Every trial goes through
the reference allocators in :mod:`dfrelay.strategies`, so this module is
also the yardstick the compiled kernels are tested against.
"""

import math

import numpy as np

from . import strategies as st
from .model import SNR_RTOL
from .numerics import exp_integral_e1

OCPA, ODPA, PSM, SRM, RRS, DIRECT = range(6)

RELAYED, FALLBACK, INFEASIBLE = 0, 1, 2

BACKEND = "python"


def _forward(snr, ps, h, g, candidates, gamma, remainder):
    """Realize distributed forwarding; returns (relay, count, snr_d, waste)."""
    relay = 0.0
    received = 0.0
    count = 0
    best_power = 0.0
    best_g = -1.0
    if remainder > 0:
        for j in candidates:
            if g[j] >= gamma and g[j] > 0:
                p = remainder / g[j]
                relay += p
                received += p * g[j]
                count += 1
                if g[j] > best_g:
                    best_g, best_power = g[j], p
    snr_d = ps * h + received
    waste = relay - best_power if count > 1 else 0.0
    return relay, count, snr_d, waste


def _odpa(f, g, h, vg, snr, rho):
    if h <= 0 and not any(x > 0 for x in f):
        return 0.0, 0.0, 0, 0.0, INFEASIBLE, math.nan, 0.0
    cands = st.odpa_candidates_normalized(f, h, vg, snr, rho)
    c = cands[st.best_candidate(cands)]
    if not c.reliable_set:
        ps = c.candidate_source_power
        return ps, 0.0, 0, ps * h, FALLBACK, c.expected_total, 0.0
    relay, count, snr_d, waste = _forward(
        snr, c.candidate_source_power, h, g, c.reliable_set.indices,
        c.solved_threshold, c.snr_remainder)
    return (c.candidate_source_power, relay, count, snr_d, RELAYED,
            c.expected_total, waste)


def _designated(k, f, g, h, vg, snr, tau, kt):
    ps = snr / f[k]
    remainder = max(0.0, snr - ps * h)
    expected = ps + remainder * kt / (2.0 * vg[k])
    relay, count, snr_d, _ = _forward(snr, ps, h, g, (k,), vg[k] * tau,
                                      remainder)
    return ps, relay, count, snr_d, RELAYED, expected, 0.0


def _srm(f, g, h, vg, snr, rho, tau, kt):
    best, best_score = -1, math.inf
    for k in range(len(f)):
        if f[k] > 0 and h < 2.0 * vg[k] / kt:
            score = 1.0 / f[k] + kt / (2.0 * vg[k]) * max(0.0, 1.0 - h / f[k])
            if score < best_score:
                best, best_score = k, score
    direct = snr / h if h > 0 else math.inf
    if best < 0 or direct < snr * best_score:
        if math.isinf(direct):
            return 0.0, 0.0, 0, 0.0, INFEASIBLE, math.nan, 0.0
        return direct, 0.0, 0, direct * h, FALLBACK, direct, 0.0
    return _designated(best, f, g, h, vg, snr, tau, kt)


def _ocpa(f, g, h, snr):
    best, best_score = -1, math.inf
    for k in range(len(f)):
        if f[k] >= h and g[k] >= h and f[k] > 0 and g[k] > 0:
            score = 1.0 / f[k] + 1.0 / g[k] - h / (f[k] * g[k])
            if score < best_score:
                best, best_score = k, score
    if best < 0:
        if not h > 0:
            return 0.0, 0.0, 0, 0.0, INFEASIBLE, math.nan, 0.0
        ps = snr / h
        return ps, 0.0, 0, ps * h, FALLBACK, ps, 0.0
    ps = snr / f[best]
    relay = max(0.0, snr - ps * h) / g[best]
    count = 1 if relay > 0 else 0
    return ps, relay, count, ps * h + relay * g[best], RELAYED, ps + relay, 0.0


def _psm(f, g, h, snr, ps, gamma):
    remainder = max(0.0, snr - ps * h)
    floor = snr * (1.0 - SNR_RTOL)
    reliable = [j for j in range(len(f)) if ps * f[j] >= floor]
    relay, count, snr_d, waste = _forward(snr, ps, h, g, reliable, gamma,
                                          remainder)
    return ps, relay, count, snr_d, RELAYED, math.nan, waste


def simulate(code, F, G, H, VG, U, snr, rho, ps_fixed=0.0, gamma_fixed=0.0):
    """Run one strategy over a batch of noise-normalized realizations.

    Returns ``(source, relay, count, snr_d, status, expected, waste)`` arrays.
    """
    n = H.shape[0]
    source = np.zeros(n)
    relay = np.zeros(n)
    count = np.zeros(n, dtype=np.int64)
    snr_d = np.zeros(n)
    status = np.zeros(n, dtype=np.int8)
    expected = np.full(n, math.nan)
    waste = np.zeros(n)
    if code in (SRM, RRS):
        tau = st.srm_threshold_scale(rho)
        kt = exp_integral_e1(tau / 2)
    for i in range(n):
        f = F[i].tolist()
        g = G[i].tolist()
        h = float(H[i])
        if code == ODPA:
            row = _odpa(f, g, h, VG[i].tolist(), snr, rho)
        elif code == SRM:
            row = _srm(f, g, h, VG[i].tolist(), snr, rho, tau, kt)
        elif code == RRS:
            k = st.rrs_pick(float(U[i]), len(f))
            if f[k] > 0:
                row = _designated(k, f, g, h, VG[i].tolist(), snr, tau, kt)
            else:
                row = (0.0, 0.0, 0, 0.0, INFEASIBLE, math.nan, 0.0)
        elif code == OCPA:
            row = _ocpa(f, g, h, snr)
        elif code == PSM:
            row = _psm(f, g, h, snr, ps_fixed, gamma_fixed)
        elif code == DIRECT:
            if h > 0:
                ps = snr / h
                row = (ps, 0.0, 0, ps * h, RELAYED, ps, 0.0)
            else:
                row = (0.0, 0.0, 0, 0.0, INFEASIBLE, math.nan, 0.0)
        else:
            raise ValueError(f"unknown strategy code {code}")
        (source[i], relay[i], count[i], snr_d[i], status[i], expected[i],
         waste[i]) = row
    return source, relay, count, snr_d, status, expected, waste


def solve_threshold(var_g, rho):
    return st.solve_threshold(list(var_g), rho)


def e1(x):
    return exp_integral_e1(x)

