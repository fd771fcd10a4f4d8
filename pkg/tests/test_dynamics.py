import math

import numpy as np
import pytest

from zrplab import dynamics
from zrplab.canonical import OccupancyConfig
from zrplab.dynamics import (
    AbsorbingStateError,
    DynState,
    StateSpaceTooLarge,
    balanced_config,
    condensed_config,
    encode_states,
    enumerate_state_space,
    simulate,
    step_event,
)

import helpers


def gen(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def test_enumerate_state_space_examples():
    assert enumerate_state_space(2, 2) == [(0, 2), (1, 1), (2, 0)]
    assert len(enumerate_state_space(4, 3)) == 15
    assert len(enumerate_state_space(5, 4)) == 56
    states = enumerate_state_space(4, 3)
    assert len(set(states)) == len(states)
    assert all(sum(s) == 4 for s in states)


def test_enumerate_state_space_cap():
    with pytest.raises(StateSpaceTooLarge) as err:
        enumerate_state_space(100, 30, cap=10**6)
    assert err.value.size == math.comb(129, 29)


def test_state_space_matches_stars_and_bars_oracle():
    assert set(enumerate_state_space(6, 4)) == set(helpers.compositions(6, 4))


def test_step_event_rates_example():
    state = DynState.from_config(OccupancyConfig.from_occupancies([2, 1, 1]), 1.0)
    assert state.total_rate == pytest.approx(4.0)  # rates (2, 1, 1)
    departures = np.zeros(3)
    trials = 40_000
    g = gen(1)
    for _ in range(trials):
        s = DynState.from_config(OccupancyConfig.from_occupancies([2, 1, 1]), 1.0)
        before = s.occupancies.copy()
        step_event(s, g)
        lost = np.flatnonzero(before - s.occupancies == 1)
        departures[lost[0]] += 1
    assert departures[0] / trials == pytest.approx(0.5, abs=0.01)


def test_step_event_condensed_example():
    state = DynState.from_config(OccupancyConfig.from_occupancies([4, 0, 0]), 2.0)
    assert state.total_rate == pytest.approx((4 / 3) ** 2)
    step_event(state, gen(2))
    assert state.occupancies[0] == 3
    assert state.occupancies.sum() == 4


def test_step_event_absorbing():
    state = DynState.from_config(OccupancyConfig.from_occupancies([0, 0, 0]), 1.0)
    with pytest.raises(AbsorbingStateError):
        step_event(state, gen(3))


def test_simulate_empty_returns_immediately():
    stats = simulate(balanced_config(0, 3), 1.0, gen(4), max_events=100)
    assert stats.absorbed
    assert stats.n_events == 0
    assert stats.elapsed_time == 0.0


def test_particle_conservation_and_rate_coherence():
    stats = simulate(condensed_config(37, 11), 1.5, gen(5), max_events=10**6, resync_every=1 << 18)
    assert stats.final_config.sum() == 37
    assert stats.max_rate_drift <= 1e-9


def test_time_horizon_mode():
    stats = simulate(balanced_config(12, 5), 2.0, gen(6), max_time=50.0)
    assert stats.elapsed_time == pytest.approx(50.0)
    assert stats.n_events > 0


def test_state_weights_sum_to_elapsed_time():
    stats = simulate(balanced_config(4, 3), 1.0, gen(7), max_events=10**5, collect_states=True)
    assert stats.state_weights.sum() == pytest.approx(stats.elapsed_time, rel=1e-9)


def test_stationarity_small_space():
    configs, probs, _ = helpers.brute_mu(1.0, 4, 3)
    codes = encode_states(configs, 5)
    stats = simulate(balanced_config(4, 3), 1.0, gen(8), max_events=2 * 10**6, collect_states=True)
    tv = 0.5 * np.abs(stats.state_distribution()[codes] - probs).sum()
    assert tv < 0.05


def test_jump_chain_differs_from_time_weighted():
    # the jump chain is not mu-stationary: event-count weights must not
    # match the canonical law on a heterogeneous-rate space
    configs, probs, _ = helpers.brute_mu(3.0, 4, 3)
    codes = encode_states(configs, 5)
    stats = simulate(balanced_config(4, 3), 3.0, gen(9), max_events=10**6,
                     time_weighted=False, collect_states=True)
    tv = 0.5 * np.abs(stats.state_distribution()[codes] - probs).sum()
    assert tv > 0.05


def test_reversibility_flux_balance():
    stats = simulate(balanced_config(4, 3), 2.0, gen(10), max_events=2 * 10**6,
                     collect_states=True, collect_flux=True)
    flux = stats.flux_counts
    pairs = np.argwhere((flux >= 10**4) & (flux.T >= 10**4))
    assert pairs.size > 0
    for a, b in pairs:
        ratio = flux[a, b] / flux[b, a]
        assert 0.9 <= ratio <= 1.1


def test_direction_symmetry():
    stats = simulate(balanced_config(9, 6), 1.0, gen(11), max_events=10**6)
    left, right = stats.dir_counts
    n = left + right
    assert abs(left - n / 2) <= 4 * 0.5 * math.sqrt(n)


def test_condensate_share_against_exact_max_mean():
    from zrplab.canonical import max_law_exact

    alpha, N, L = 2.5, 200, 10
    law = max_law_exact(alpha, N, L)
    exact_share = float((np.arange(N + 1) * np.exp(law.log_masses)).sum()) / N
    stats = simulate(condensed_config(N, L), alpha, gen(12), max_events=2 * 10**6)
    assert stats.max_share_mean == pytest.approx(exact_share, abs=0.05)


def test_dynamics_needs_two_sites():
    with pytest.raises(ValueError):
        simulate(balanced_config(3, 1), 1.0, gen(13), max_events=10)
