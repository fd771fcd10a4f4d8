import math

import numpy as np
import pytest
from scipy import stats

from zrplab import canonical
from zrplab.canonical import (
    OccupancyConfig,
    build_suffix_tables,
    exact_marginal,
    exact_marginal_table,
    max_law_exact,
    max_site,
    remove_max,
    sample_background_batch,
    sample_canonical,
    sample_canonical_batch,
    sample_background_projection,
)
from zrplab.logconv import convolve, LogPmf

import helpers


def gen(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def test_occupancy_config_invariants():
    c = OccupancyConfig.from_occupancies([2, 0, 1])
    assert c.total == 3
    assert c.n_sites == 3
    with pytest.raises(ValueError):
        OccupancyConfig(np.array([1, -1]), 0)
    with pytest.raises(ValueError):
        OccupancyConfig(np.array([1, 2]), 4)


def test_suffix_tables_structure():
    from zrplab.logconv import canonical_partition_log

    t = build_suffix_tables(1.5, 10, 4)
    # row 0 is the bare weight table, later rows are its convolutions
    assert np.allclose(t.partial[0], t.log_weights)
    step = convolve(LogPmf(t.partial[1]), LogPmf(t.log_weights), 10)
    assert np.allclose(t.partial[2], step.log_masses, atol=1e-12)
    assert t.log_z == pytest.approx(canonical_partition_log(1.5, 10, 4), abs=1e-12)


def test_exact_marginal_examples():
    tab = exact_marginal_table(1.0, 2, 2)
    assert tab == pytest.approx([0.25, 0.5, 0.25], rel=1e-13)
    assert exact_marginal_table(2.2, 0, 5)[0] == pytest.approx(1.0)
    brute = helpers.brute_marginal(2.0, 4, 3)
    assert exact_marginal_table(2.0, 4, 3) == pytest.approx(brute, rel=1e-11)
    assert exact_marginal(2.0, 4, 3, 9) == 0.0
    with pytest.raises(ValueError):
        exact_marginal(2.0, 4, 1, 0)


@pytest.mark.parametrize("alpha,N,L", [(1.0, 30, 7), (2.5, 500, 100), (1.5, 200, 12)])
def test_marginal_sums_to_one_and_mean_identity(alpha, N, L):
    tab = exact_marginal_table(alpha, N, L)
    assert tab.sum() == pytest.approx(1.0, abs=1e-12)
    mean = (np.arange(N + 1) * tab).sum()
    assert mean == pytest.approx(N / L, rel=1e-10)


def test_sampler_trivial_and_small_cases():
    t0 = build_suffix_tables(1.3, 0, 4)
    cfg = sample_canonical(t0, gen(1))
    assert cfg.total == 0
    assert (cfg.occupancies == 0).all()

    t = build_suffix_tables(1.0, 2, 2)
    draws = sample_canonical_batch(t, 10**5, gen(2))
    p11 = ((draws == 1).all(axis=1)).mean()
    assert p11 == pytest.approx(0.5, abs=0.01)


def test_sampler_marginal_matches_exact():
    t = build_suffix_tables(2.5, 50, 5)
    draws = sample_canonical_batch(t, 10**5, gen(3))
    emp = np.bincount(draws[:, 0], minlength=51) / draws.shape[0]
    tv = 0.5 * np.abs(emp - exact_marginal_table(2.5, 50, 5)).sum()
    assert tv < 0.01


def test_sampler_translation_invariance():
    t = build_suffix_tables(1.5, 40, 8)
    n = 50_000
    draws = sample_canonical_batch(t, n, gen(4))
    a = np.bincount(draws[:, 0], minlength=41) / n
    b = np.bincount(draws[:, 4], minlength=41) / n
    assert 0.5 * np.abs(a - b).sum() <= 3.0 / math.sqrt(n)


def test_max_site_examples():
    cfg = OccupancyConfig.from_occupancies([3, 1, 2])
    g1, g2 = gen(5), gen(5)
    assert max_site(cfg, g1) == (3, 0)
    # a unique maximum consumes no uniform: streams stay aligned
    assert g1.random() == g2.random()

    g3, g4 = gen(55), gen(55)
    tied = OccupancyConfig.from_occupancies([3, 3, 1])
    max_site(tied, g3)
    g4.random()  # ties consume exactly one uniform
    assert g3.random() == g4.random()

    g = gen(56)
    picks = np.array([max_site(tied, g)[1] for _ in range(10**5)])
    assert (picks == 0).mean() == pytest.approx(0.5, abs=0.01)
    assert set(np.unique(picks)) == {0, 1}

    zeros = OccupancyConfig.from_occupancies([0, 0])
    val, pos = max_site(zeros, g)
    assert val == 0 and pos in (0, 1)


def test_remove_max_examples():
    assert remove_max(OccupancyConfig.from_occupancies([1, 3, 2]), gen(6)).occupancies.tolist() == [1, 2]
    assert remove_max(OccupancyConfig.from_occupancies([5, 0, 0, 0]), gen(6)).occupancies.tolist() == [0, 0, 0]
    assert remove_max(OccupancyConfig.from_occupancies([2, 2]), gen(6)).occupancies.tolist() == [2]
    with pytest.raises(ValueError):
        remove_max(OccupancyConfig.from_occupancies([4]), gen(6))


def test_max_law_examples():
    law = max_law_exact(1.0, 2, 2)
    assert np.exp(law.log_masses) == pytest.approx([0.0, 0.5, 0.5], abs=1e-13)
    point = max_law_exact(2.0, 7, 1)
    assert math.exp(point.log_masses[7]) == pytest.approx(1.0)
    assert np.exp(point.log_masses[:7]).sum() == 0.0
    brute = helpers.brute_max_law(2.0, 4, 3)
    assert np.exp(max_law_exact(2.0, 4, 3).log_masses) == pytest.approx(brute, abs=1e-12)


@pytest.mark.parametrize("alpha,N,L", [(1.0, 60, 6), (2.5, 150, 24), (3.5, 90, 40), (1.5, 80, 3)])
def test_max_law_is_valid_pmf(alpha, N, L):
    law = max_law_exact(alpha, N, L)
    pmf = np.exp(law.log_masses)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-10)
    cdf = np.cumsum(pmf)
    assert (np.diff(cdf) >= -1e-14).all()


def test_max_law_matches_empirical_max():
    alpha, N, L = 2.5, 200, 16
    t = build_suffix_tables(alpha, N, L)
    _, maxima = sample_background_batch(t, 1, 10**5, gen(7))
    emp = np.bincount(maxima, minlength=N + 1) / maxima.shape[0]
    tv = 0.5 * np.abs(emp - np.exp(max_law_exact(alpha, N, L).log_masses)).sum()
    assert tv < 0.02


def test_background_projection_examples():
    t0 = build_suffix_tables(1.7, 0, 3)
    assert sample_background_projection(t0, 1, gen(8)).tolist() == [0]

    t = build_suffix_tables(1.0, 2, 2)
    draws, _ = sample_background_batch(t, 1, 10**5, gen(9))
    law = helpers.brute_background_law(1.0, 2, 2, 1)
    assert law[(0,)] == pytest.approx(0.5)
    assert (draws[:, 0] == 0).mean() == pytest.approx(0.5, abs=0.01)
    assert (draws[:, 0] == 1).mean() == pytest.approx(0.5, abs=0.01)

    with pytest.raises(ValueError):
        sample_background_batch(t, 2, 5, gen(9))


def test_background_batch_matches_enumerated_law():
    alpha, N, L = 2.0, 5, 3
    t = build_suffix_tables(alpha, N, L)
    draws, _ = sample_background_batch(t, 2, 200_000, gen(10))
    law = helpers.brute_background_law(alpha, N, L, 2)
    emp = {}
    for row in map(tuple, draws):
        emp[row] = emp.get(row, 0) + 1
    tv = 0.5 * sum(abs(emp.get(k, 0) / draws.shape[0] - p) for k, p in law.items())
    tv += 0.5 * sum(v / draws.shape[0] for k, v in emp.items() if k not in law)
    assert tv < 0.01


def test_tables_shared_across_threads_with_independent_streams():
    # immutable tables are safe to share; each thread owns its own stream
    from concurrent.futures import ThreadPoolExecutor

    t = build_suffix_tables(2.0, 30, 6)

    def stream(idx):
        ss = np.random.SeedSequence(77, spawn_key=(idx,))
        return np.random.Generator(np.random.Philox(ss))

    serial = [sample_canonical_batch(t, 500, stream(i)) for i in range(2)]
    with ThreadPoolExecutor(max_workers=2) as pool:
        threaded = list(pool.map(lambda i: sample_canonical_batch(t, 500, stream(i)), range(2)))
    for a, b in zip(serial, threaded):
        assert (a == b).all()


@pytest.mark.parametrize("alpha,N,L,seed", [(1.0, 4, 3, 11), (2.0, 4, 3, 12), (2.5, 5, 3, 13)])
def test_sampler_goodness_of_fit_tiny_space(alpha, N, L, seed):
    configs, probs, _ = helpers.brute_mu(alpha, N, L)
    t = build_suffix_tables(alpha, N, L)
    draws = sample_canonical_batch(t, 10**6, gen(seed))
    base = N + 1
    codes = (draws[:, 0] * base + draws[:, 1]) * base + draws[:, 2]
    keys = [(c[0] * base + c[1]) * base + c[2] for c in configs]
    counts = np.bincount(codes, minlength=base**3)[keys]
    res = stats.chisquare(counts, draws.shape[0] * np.array(probs))
    assert res.pvalue >= 1e-3
