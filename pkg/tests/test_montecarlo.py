import math

import numpy as np
import pytest

from timemux.analytic import exact_probabilities, predict, predict_exact
from timemux.montecarlo import (
    BLOCK_CYCLES,
    InsufficientStatistics,
    MismatchError,
    SimResult,
    Tally,
    compare_to_analytic,
    estimate_g2_heralded,
    g2_from_result,
    score_z,
    simulate,
    simulate_sweep,
    wilson_interval,
)
from timemux.params import Policy, RangeError, paper_params, validate

ETA_RT = 0.7065924761503206


def custom(n=4, p=0.3, eta_i=0.5, eta_s=0.6, eta_rt=0.8, dark=0.0, kmax=3,
           model="thermal", policy="first"):
    params = paper_params(eta_rt, kmax=kmax, stats_model=model, policy=policy)
    params = params.with_source(pair_prob_p=p, mean_pairs_mu=None)
    params = params.with_channel(eta_idler=eta_i, eta_signal_fixed=eta_s, dark_count_prob=dark)
    return validate(params.with_n(n))


def test_wilson_reference_values():
    # textbook case: 81 successes in 263 trials
    lo, hi = wilson_interval(81, 263)
    assert lo == pytest.approx(0.2553, abs=1e-4)
    assert hi == pytest.approx(0.3662, abs=1e-4)
    assert wilson_interval(0, 0) == (0.0, 1.0)
    lo, hi = wilson_interval(0, 1000)
    assert lo == 0.0 and 0 < hi < 0.004


def test_score_z_matches_wilson_bounds():
    lo, hi = wilson_interval(400, 10_000)
    assert abs(score_z(400, 10_000, lo)) == pytest.approx(1.959964, rel=1e-5)
    assert abs(score_z(400, 10_000, hi)) == pytest.approx(1.959964, rel=1e-5)
    with pytest.raises(InsufficientStatistics):
        score_z(0, 0, 0.5)


def test_blind_herald_detector_gives_exact_zeros():
    sim = simulate(custom(eta_i=0.0), 200_000, seed=3)
    assert sim.herald_cycles == sim.single_clicks == 0
    assert sim.p_herald_hat == 0.0
    assert math.isnan(sim.g2_heralded_hat)
    with pytest.raises(InsufficientStatistics):
        g2_from_result(sim)


def test_replay_is_bit_identical():
    params = paper_params(ETA_RT)
    a = simulate(params, 300_000, seed=9)
    b = simulate(params, 300_000, seed=9)
    assert a == b and a.as_dict() == b.as_dict()
    c = simulate(params, 300_000, seed=10)
    assert c != a


def test_worker_count_does_not_change_result():
    params = paper_params(ETA_RT)
    cycles = 5 * BLOCK_CYCLES + 123
    results = [simulate(params, cycles, seed=1, workers=w) for w in (1, 2, 8)]
    assert results[0] == results[1] == results[2]
    assert results[0].cycles == cycles


def test_prefix_cycles_reuse_block_streams():
    params = paper_params(ETA_RT)
    one = simulate(params, BLOCK_CYCLES, seed=5)
    two = simulate(params, 2 * BLOCK_CYCLES, seed=5)
    assert two.herald_cycles >= one.herald_cycles


def test_streams_are_independent():
    params = paper_params(ETA_RT)
    a = simulate(params, 200_000, seed=2, stream=1)
    b = simulate(params, 200_000, seed=2, stream=2)
    assert a != b


def test_bad_arguments():
    params = paper_params(ETA_RT)
    for kwargs in ({"cycles": 0}, {"cycles": -5}, {"cycles": 10, "seed": -1},
                   {"cycles": 10, "workers": 0}, {"cycles": 10, "seed": 1.5}):
        with pytest.raises(RangeError):
            simulate(params, **kwargs)


def test_conservation():
    sim = simulate(custom(), 300_000, seed=4)
    assert sum(sim.photon_hist) == sim.herald_cycles
    assert sim.single_clicks == sim.herald_cycles - sim.photon_hist[0]
    assert 0 < sim.single_clicks <= sim.herald_cycles <= sim.cycles
    assert len(sim.photon_hist) <= 4


def test_tally_sum():
    t = Tally(10, 3, 1, (2, 1)) + Tally(5, 2, 2, (0, 1, 1))
    assert t == Tally(15, 5, 3, (2, 2, 1))


@pytest.mark.parametrize("case", [
    {},
    {"policy": "last"},
    {"model": "poisson", "p": 0.4, "eta_i": 0.7, "eta_s": 0.9, "eta_rt": 0.5, "dark": 0.02,
     "n": 3},
    {"n": 2, "p": 0.5, "eta_i": 1.0, "eta_s": 1.0, "eta_rt": 1.0},
])
def test_mc_matches_exact_model(case):
    params = custom(**case)
    sim = simulate(params, 1_000_000, seed=17)
    exact = exact_probabilities(params)
    assert abs(score_z(sim.herald_cycles, sim.cycles, exact.p_herald)) < 3
    assert abs(score_z(sim.single_clicks, sim.cycles, exact.p_single)) < 3
    se = math.sqrt(exact.mean_output_photons / sim.cycles)
    assert abs(sim.mean_output_photons - exact.mean_output_photons) < 4 * se


def test_single_pair_mc_matches_closed_form():
    params = paper_params(ETA_RT, kmax=1)
    sim = simulate(params, 2_000_000, seed=8)
    agreement = compare_to_analytic(sim, predict(params))
    assert agreement.passed, agreement


def test_policy_dominance_in_simulation():
    first = simulate(custom(n=6, p=0.2, eta_rt=0.6), 1_000_000, seed=1, policy="first")
    last = simulate(custom(n=6, p=0.2, eta_rt=0.6), 1_000_000, seed=1, policy="last")
    # same random numbers; only the routing differs
    assert first.herald_cycles == last.herald_cycles
    assert last.single_clicks > first.single_clicks


def test_compare_detects_mismatches():
    params = paper_params(ETA_RT, kmax=1)
    sim = simulate(params, 100_000, seed=1)
    with pytest.raises(MismatchError):
        compare_to_analytic(sim, predict(params, 5))
    with pytest.raises(MismatchError):
        compare_to_analytic(sim, predict(params, 12, Policy.LAST))
    with pytest.raises(MismatchError):
        compare_to_analytic(sim, predict(params.with_channel(eta_roundtrip=0.8)))
    empty = SimResult(0, 0, 0, (), 0, Policy.FIRST, 12)
    with pytest.raises(InsufficientStatistics):
        compare_to_analytic(empty, predict(params))


def test_perturbed_model_is_rejected():
    # a 10 % error in eta_rt shifts p_single by about 10 sigma at 1e7 cycles
    params = paper_params(ETA_RT, kmax=1)
    sim = simulate(params, 10_000_000, seed=21, workers=2)
    assert compare_to_analytic(sim, predict(params)).passed
    wrong = predict(params.with_channel(eta_roundtrip=ETA_RT * 1.1))
    result = compare_to_analytic(sim, wrong, check_params=False)
    assert not result.passed
    assert result.z_single < -3


def test_sweep_uses_one_stream_per_n():
    params = paper_params(ETA_RT, kmax=1)
    sims = simulate_sweep(params, [1, 2, 3], 100_000, seed=3)
    assert [s.n_bins for s in sims] == [1, 2, 3]
    assert [s.stream for s in sims] == [1, 2, 3]
    assert sims[1] == simulate(params.with_n(2), 100_000, seed=3, stream=2)


def test_g2_near_zero_for_weak_source():
    params = custom(n=12, p=1e-4 / (1 + 1e-4), eta_i=1.0, eta_s=1.0, eta_rt=1.0, kmax=6)
    est = estimate_g2_heralded(params, 2_000_000, seed=2)
    assert est.heralded_events > 1000
    assert est.value < 0.01
    assert est.ci_low <= est.value <= est.ci_high


def test_g2_grows_with_mu_and_matches_exact():
    values = []
    for mu in (0.05, 0.5):
        params = custom(n=12, p=mu / (1 + mu), eta_i=0.079, eta_s=1.0, eta_rt=0.7, kmax=12)
        est = estimate_g2_heralded(params, 1_000_000, seed=6)
        exact = exact_probabilities(params).g2_heralded
        width = est.ci_high - est.ci_low
        assert abs(est.value - exact) < 1.5 * width
        values.append(est.value)
    assert values[1] > values[0]


def test_g2_is_reproducible():
    params = custom(n=6, p=0.2, eta_s=1.0)
    a = estimate_g2_heralded(params, 300_000, seed=12)
    b = estimate_g2_heralded(params, 300_000, seed=12)
    assert a == b


def test_g2_needs_heralds():
    with pytest.raises(InsufficientStatistics):
        estimate_g2_heralded(paper_params(ETA_RT), 1_000, seed=1)


def test_predict_exact_close_to_mc_at_default_cutoff():
    params = paper_params(ETA_RT)
    sim = simulate(params, 2_000_000, seed=30)
    assert compare_to_analytic(sim, predict_exact(params)).passed


def test_as_dict_has_intervals():
    d = simulate(custom(), 50_000, seed=1).as_dict()
    assert d["p_herald_ci"][0] <= d["p_herald"] <= d["p_herald_ci"][1]
    assert sum(d["photon_hist"]) == d["herald_cycles"]
    assert np.isfinite(d["g2_heralded"])
