from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from twoarmed.noise import DriverNoise, path_seed
from twoarmed.polya import (
    exact_bandit_replay,
    urn_bandit_equivalence,
    urn_final_counts,
    urn_path,
    urn_schedule,
)


def test_urn_examples():
    assert urn_path(1, 1, 0, 5).beta.tolist() == [1]
    p = urn_path(2, 3, 50, 5)
    assert p.beta[0] == 3 and p.totals[-1] == 55
    steps = np.diff(p.beta)
    assert set(steps.tolist()) <= {0, 1}
    assert p.fractions()[0] == Fraction(3, 5)
    rows = p.to_csv().splitlines()
    assert rows[0] == "n,beta,x" and len(rows) == 52


def test_first_draw_follows_the_uniform():
    for seed in range(20):
        u = DriverNoise(seed).pair(1)[0]
        assert urn_path(1, 1, 1, seed).beta[1] == (2 if u <= 0.5 else 1)


def test_schedule_values():
    s = urn_schedule(2, 3, 10)
    assert s.gammas(3).tolist() == [1 / 6, 1 / 7, 1 / 8]
    assert s.square_summable


@pytest.mark.parametrize("r,b", [(1, 1), (2, 3), (10, 1), (40, 37)])
def test_urn_and_bandit_agree(r, b):
    for seed in range(5):
        assert urn_bandit_equivalence(r, b, 10**4, seed) <= 1e-12


@pytest.mark.parametrize("r,b", [(1, 1), (3, 7)])
def test_exact_rational_replay(r, b):
    for seed in range(3):
        assert urn_path(r, b, 200, seed).fractions() == exact_bandit_replay(r, b, 200, seed)


def test_final_counts_match_single_urns():
    counts = urn_final_counts(2, 3, 300, 50, 17)
    for i in range(50):
        assert counts[i] == urn_path(2, 3, 300, path_seed(17, i)).beta[-1]


def test_uniform_law_for_one_ball_each():
    # r = b = 1: beta_N - 1 is uniform on {0, ..., N}
    N, M = 20, 100_000
    c = np.bincount(urn_final_counts(1, 1, N, M, 4) - 1, minlength=N + 1)
    assert len(c) == N + 1
    assert stats.chisquare(c).pvalue > 1e-3


def test_beta_binomial_law():
    r, b, N, M = 3, 2, 15, 100_000
    c = np.bincount(urn_final_counts(r, b, N, M, 9) - b, minlength=N + 1)
    expected = stats.betabinom(N, b, r).pmf(np.arange(N + 1)) * M
    assert stats.chisquare(c, expected).pvalue > 1e-3


def test_proportion_is_a_martingale():
    r, b, N, M = 2, 5, 500, 50_000
    x = urn_final_counts(r, b, N, M, 21) / (r + b + N)
    assert abs(x.mean() - b / (r + b)) <= 4 * x.std(ddof=1) / np.sqrt(M)


def test_validation():
    with pytest.raises(ValueError):
        urn_path(0, 1, 5, 1)
    with pytest.raises(ValueError):
        urn_path(1, 1, -1, 1)
