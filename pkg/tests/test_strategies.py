import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as hs
from scipy import optimize, special

from dfrelay import strategies as st
from dfrelay.model import (ChannelRealization, ChannelStatistics, NetworkScenario,
                           mrc_snr)
from dfrelay.numerics import exp_integral_e1

# 5 + 7.5 * E1(-ln 0.9), evaluated with the quadrature oracle
ODPA_EXAMPLE_TOTAL = 18.318505125676438

variances = hs.floats(1e-3, 1e3)
rhos = hs.floats(1e-3, 0.95)


def unit_scenario(n=1):
    return NetworkScenario(relay_positions=tuple((50.0, float(i)) for i in range(n)),
                           noise_power=1.0, snr_target=10.0)


# -- threshold ----------------------------------------------------------------

def test_threshold_single_relay_closed_form():
    assert st.solve_threshold([0.5], 0.1) == pytest.approx(-math.log(0.9), rel=1e-12)


def test_threshold_symmetric_pair():
    assert st.solve_threshold([0.5, 0.5], 0.25) == pytest.approx(math.log(2), rel=1e-12)


def test_threshold_bounds_collapse_for_equal_variances():
    lo, hi = st.threshold_bounds([0.7] * 4, 0.05)
    assert lo == hi == st.solve_threshold([0.7] * 4, 0.05)


def test_threshold_bounds_near_one_stay_finite():
    lo, hi = st.threshold_bounds([1.0] * 15, 1 - 1e-9)
    assert 0 < lo == hi < math.inf


@given(hs.lists(variances, min_size=1, max_size=8), rhos)
def test_threshold_residual_and_bracket(var_g, rho):
    gamma = st.solve_threshold(var_g, rho)
    lo, hi = st.threshold_bounds(var_g, rho)
    assert lo * (1 - 1e-12) <= gamma <= hi * (1 + 1e-12)
    assert abs(st.no_forward_probability(gamma, var_g) - rho) <= 1e-9


@given(hs.lists(variances, min_size=1, max_size=5), rhos, rhos)
def test_threshold_increases_with_rho(var_g, r1, r2):
    assume(abs(r1 - r2) > 1e-6)
    lo, hi = sorted((r1, r2))
    assert st.solve_threshold(var_g, lo) < st.solve_threshold(var_g, hi)


def test_threshold_rejects_bad_input():
    with pytest.raises(ValueError):
        st.solve_threshold([], 0.1)
    with pytest.raises(ValueError):
        st.solve_threshold([1.0], 1.0)


# -- centralized ----------------------------------------------------------------

def test_ocpa_tie_picks_first():
    sc = unit_scenario(2)
    d = st.ocpa_allocate(ChannelRealization([2.0, 1.0], [1.0, 2.0], 0.0), sc)
    assert d.designated_relay == 0
    assert d.source_power == pytest.approx(5.0)
    assert d.relay_power == pytest.approx(10.0)


def test_ocpa_direct_when_efficient_set_empty():
    sc = unit_scenario(2)
    d = st.ocpa_allocate(ChannelRealization([1.0, 2.0], [3.0, 1.0], 4.0), sc)
    assert d.mode is st.Mode.DIRECT
    assert d.source_power == pytest.approx(10.0 / 4.0)


def test_ocpa_relay_power_clamps():
    sc = unit_scenario(1)
    d = st.ocpa_allocate(ChannelRealization([1.0], [5.0], 1.0), sc)
    assert d.relay_power == 0.0 and d.snr_remainder == 0.0


@given(hs.lists(hs.tuples(hs.floats(1e-3, 1e2), hs.floats(1e-3, 1e2)),
                min_size=1, max_size=6), hs.floats(1e-3, 1e2))
def test_ocpa_meets_target_and_beats_direct(links, h):
    sc = unit_scenario(len(links))
    real = ChannelRealization([a for a, _ in links], [b for _, b in links], h)
    d = st.ocpa_allocate(real, sc)
    relay = d.relay_power or 0.0
    assert d.source_power + relay <= 10.0 / h * (1 + 1e-12)
    fw = [] if d.mode is st.Mode.DIRECT else [(relay, real.g_sq[d.designated_relay])]
    assert mrc_snr(d.source_power, h, fw, 1.0) >= 10.0 * (1 - 1e-9)


# -- distributed ----------------------------------------------------------------

def test_odpa_single_relay_example():
    sc = unit_scenario(1)
    cands = st.odpa_candidates([2.0], 0.5, [0.5], 0.1, sc)
    assert cands[0].candidate_source_power == pytest.approx(5.0)
    assert cands[0].snr_remainder == pytest.approx(7.5)
    assert cands[0].solved_threshold == pytest.approx(-math.log(0.9), rel=1e-12)
    assert cands[0].expected_total == pytest.approx(ODPA_EXAMPLE_TOTAL, rel=1e-10)
    assert cands[-1].expected_total == pytest.approx(20.0)
    d = st.odpa_allocate([2.0], 0.5, [0.5], 0.1, sc)
    assert d.mode is st.Mode.DISTRIBUTED and d.source_power == pytest.approx(5.0)


def test_odpa_no_candidate_relays_goes_direct():
    sc = unit_scenario(2)
    d = st.odpa_allocate([0.1, 0.2], 0.5, [1.0, 1.0], 0.1, sc)
    assert d.mode is st.Mode.DIRECT and d.source_power == pytest.approx(20.0)


def test_odpa_loose_outage_leaves_source_power():
    sc = unit_scenario(1)
    c = st.odpa_candidates([2.0], 0.0, [0.5], 1 - 1e-12, sc)[0]
    assert c.expected_total == pytest.approx(c.candidate_source_power, rel=1e-9)


def test_odpa_infeasible():
    with pytest.raises(st.InfeasibleError):
        st.odpa_allocate([0.0], 0.0, [1.0], 0.1, unit_scenario(1))


@given(hs.lists(hs.tuples(hs.floats(1e-2, 1e2), variances), min_size=1, max_size=6),
       hs.floats(1e-3, 10.0), rhos)
def test_odpa_picks_cheapest_candidate(links, h, rho):
    sc = unit_scenario(len(links))
    f = [a for a, _ in links]
    vg = [v for _, v in links]
    cands = st.odpa_candidates(f, h, vg, rho, sc)
    d = st.odpa_allocate(f, h, vg, rho, sc)
    best = min(c.expected_total for c in cands)
    assert d.expected_total_power == pytest.approx(best, rel=1e-12)
    assert d.expected_total_power <= 10.0 / h * (1 + 1e-12)
    powers = [c.candidate_source_power for c in cands]
    assert powers == sorted(powers)


# -- relay decision -------------------------------------------------------------

def _distributed(gamma, remainder):
    return st.AllocationDecision("odpa", 1.0, st.Mode.DISTRIBUTED, gamma,
                                 remainder, 1.0)


def test_relay_forwards_at_threshold():
    d = _distributed(1.5, 7.5)
    assert st.relay_forward_decision(0, 1.5, d, True) == pytest.approx(5.0)
    assert st.relay_forward_decision(0, 1.5, d, False) is None
    assert st.relay_forward_decision(0, 1.4999, d, True) is None


def test_relay_silent_without_remainder():
    d = _distributed(0.1, 0.0)
    assert st.relay_forward_decision(0, 100.0, d, True) is None


def test_designated_relay_only():
    sc = unit_scenario(2)
    d = st.srm_allocate([2.0, 4.0], 0.0, [2.0, 0.5], 0.1, sc)
    other = 1 - d.designated_relay
    assert st.relay_forward_decision(other, 1e9, d, True) is None


# -- passive source -------------------------------------------------------------

def test_psm_outage_limits():
    stats = ChannelStatistics([1.0, 2.0], [1.0, 0.5], 0.3)
    sc = unit_scenario(2)
    from dfrelay.analytics import direct_outage
    assert st.psm_outage(3.0, math.inf, stats, sc) == pytest.approx(
        direct_outage(3.0, 0.3, sc))
    assert st.psm_outage(1e12, 1.0, stats, sc) < 1e-9


def test_psm_outage_single_relay_example():
    stats = ChannelStatistics([0.5], [0.25], 0.1)
    sc = unit_scenario(1)
    ps = 10.0 / (2 * 0.5)  # a = e^-1
    from dfrelay.analytics import direct_outage
    expect = (1 - math.exp(-2)) * direct_outage(ps, 0.1, sc)
    assert st.psm_outage(ps, 2 * 0.25, stats, sc) == pytest.approx(expect, rel=1e-14)


@given(hs.floats(0.1, 100), hs.floats(1e-3, 10), hs.floats(1e-3, 10))
def test_psm_outage_monotone(ps, g1, g2):
    stats = ChannelStatistics([1.0, 2.0, 0.7], [1.0, 0.5, 3.0], 0.3)
    sc = unit_scenario(3)
    lo, hi = sorted((g1, g2))
    assert st.psm_outage(ps, lo, stats, sc) <= st.psm_outage(ps, hi, stats, sc)
    assert st.psm_outage(ps, lo, stats, sc) <= st.psm_outage(ps / 2, lo, stats, sc)


def test_psm_wrong_forwarding_examples():
    sc = unit_scenario(2)
    one = ChannelStatistics([1.0], [1.0], 0.1)
    assert st.psm_wrong_forwarding_prob(0, 1.0, 5.0, one, sc) == 0.0
    two = ChannelStatistics([0.5, 0.5], [0.25, 0.25], 0.1)
    ps = 10.0 / (2 * 0.5)
    assert st.psm_wrong_forwarding_prob(0, 0.5, ps, two, sc) == pytest.approx(
        math.exp(-3), rel=1e-14)
    assert st.psm_wrong_forwarding_prob(0, 1e6, ps, two, sc) == 0.0


def test_psm_waste_trivial_cases():
    sc = unit_scenario(2)
    assert st.psm_expected_waste(5.0, 0.5, ChannelStatistics([1.0], [1.0], 0.1),
                                 sc) == 0.0
    two = ChannelStatistics([0.5, 0.5], [0.25, 0.25], 0.1)
    assert st.psm_expected_waste(5.0, 0.5, two, sc, snr_remainder=0.0) == 0.0


def test_psm_waste_matches_simulation():
    sc = unit_scenario(2)
    two = ChannelStatistics([0.5, 0.5], [0.25, 0.25], 0.1)
    ps, gamma, rem = 10.0, 0.2, 7.0
    predicted = st.psm_expected_waste(ps, gamma, two, sc, snr_remainder=rem)
    rng = np.random.default_rng(5)
    n = 10 ** 5
    f = rng.exponential(1.0, (n, 2))
    g = rng.exponential(0.5, (n, 2))
    fwd = (ps * f >= 10.0) & (g >= gamma)
    power = np.where(fwd, rem / g, 0.0)
    best = np.where(fwd, g, -1.0).argmax(axis=1)
    waste = np.where(fwd.sum(axis=1) > 1,
                     power.sum(axis=1) - power[np.arange(n), best], 0.0)
    se = waste.std() / math.sqrt(n)
    assert abs(waste.mean() - predicted) <= 3 * se


def test_psm_pick_infeasible_when_cap_too_low():
    stats = ChannelStatistics([1.0, 1.0], [1.0, 1.0], 0.01)
    sc = unit_scenario(2)
    p = st.psm_pick_params(stats, 0.01, sc, st.PsmGrid(points=20, p_max=1.0))
    assert not p.feasible


def test_psm_iid_identity_when_direct_link_negligible():
    from dfrelay.analytics import iid_design_identity
    n = 4
    stats = ChannelStatistics([1.0] * n, [1.0] * n, 1e-12)
    sc = unit_scenario(n)
    p = st.psm_pick_params(stats, 0.05, sc, st.PsmGrid(points=60))
    assert p.feasible
    assert iid_design_identity(p.source_power, p.threshold, 1.0, 1.0, n, 0.05,
                               sc) == pytest.approx(0.0, abs=1e-6)


@given(hs.floats(1.0, 200.0), hs.sampled_from([0.01, 0.05, 0.2]))
def test_psm_threshold_below_cap(ps, rho):
    stats = ChannelStatistics([1.0, 2.0, 0.5], [1.0, 0.5, 3.0], 0.05)
    sc = unit_scenario(3)
    gamma = st.psm_largest_threshold(ps, rho, stats, sc)
    assume(not math.isnan(gamma) and not math.isinf(gamma))
    cap = -math.log1p(-rho ** (1 / 3)) * 2 * max(stats.var_g)
    assert gamma < cap
    assert st.psm_outage(ps, gamma, stats, sc) <= rho * (1 + 1e-9)


def test_psm_pick_default_scenario_meets_target():
    from dfrelay.model import build_statistics, default_scenario
    sc = default_scenario()
    stats = build_statistics(sc)
    p = st.psm_pick_params(stats, 0.05, sc)
    assert p.feasible
    assert p.outage == pytest.approx(0.05, rel=1e-9)
    assert 0.05 < p.source_power < 1.0


# -- single relay / random relay / direct ----------------------------------------

def test_srm_threshold_scale():
    rho = 1 - math.exp(-0.5)
    assert 1.0 * st.srm_threshold_scale(rho) == pytest.approx(1.0, rel=1e-14)


def test_srm_example_scores():
    x = optimize.brentq(lambda t: special.exp1(t) - 0.2, 1e-6, 10, xtol=1e-15)
    rho = -math.expm1(-x)
    sc = unit_scenario(2)
    scores = st.srm_scores([2.0, 4.0], 0.0, [2.0, 0.5], rho, sc)
    assert scores == pytest.approx([0.55, 0.45], rel=1e-9)
    assert st.srm_allocate([2.0, 4.0], 0.0, [2.0, 0.5], rho, sc).designated_relay == 1


def test_srm_direct_when_no_relay_feasible():
    sc = unit_scenario(2)
    kt = exp_integral_e1(st.srm_threshold_scale(0.1) / 2)
    h = 2 * 1.0 / kt * 1.01
    d = st.srm_allocate([50.0, 50.0], h, [1.0, 1.0], 0.1, sc)
    assert d.mode is st.Mode.DIRECT


def test_rrs_single_relay_matches_srm():
    sc = unit_scenario(1)
    a = st.rrs_allocate([2.0], 0.1, [1.0], 0.1, 0.73, sc)
    b = st.srm_allocate([2.0], 0.1, [1.0], 0.1, sc)
    assert a.designated_relay == b.designated_relay == 0
    assert a.source_power == b.source_power
    assert a.threshold == b.threshold
    assert a.expected_total_power == b.expected_total_power


def test_rrs_selection_uniform():
    n, trials = 5, 10 ** 5
    u = np.random.default_rng(1).random(trials)
    counts = np.bincount([st.rrs_pick(float(x), n) for x in u], minlength=n)
    p = 1 / n
    se = math.sqrt(trials * p * (1 - p))
    assert np.all(np.abs(counts - trials * p) <= 3 * se)


def test_rrs_seeded_sequence_repeats():
    sc = unit_scenario(3)
    picks = [[st.rrs_allocate([1.0, 2.0, 3.0], 0.1, [1.0] * 3, 0.1, rng, sc)
              .designated_relay for _ in range(20)]
             for rng in (np.random.default_rng(9), np.random.default_rng(9))]
    assert picks[0] == picks[1]


def test_direct_examples():
    sc = NetworkScenario(noise_power=1e-10)
    assert st.direct_allocate(10 * 1e-10, sc).source_power == pytest.approx(1.0)
    assert st.direct_allocate(5e-10, sc).source_power == pytest.approx(2.0)
    assert st.direct_allocate(0.5, unit_scenario()).source_power == pytest.approx(20.0)
    with pytest.raises(st.InfeasibleError):
        st.direct_allocate(0.0, sc)
