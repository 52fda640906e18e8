import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twoarmed.bandit import (
    BanditParams,
    coupled_pair,
    default_thin,
    monotone_flags,
    simulate_batch,
    simulate_path,
    step,
)
from twoarmed.montecarlo import simulate_terminal
from twoarmed.noise import DriverNoise, path_seed
from twoarmed.schedule import Constant, PowerI, RatioForm


def _reference_step(x, u, v, pA, pB, g):
    # the recursion written out directly
    if u <= x and v <= pA:
        return x + g * (1 - x)
    if u > x and v <= pB:
        return x - g * x
    return x


def test_step_examples():
    p = BanditParams(0.6, 0.4, 0.5)
    assert step(0.0, 0.3, 0.2, p, 0.5) == 0.0
    assert step(0.5, 0.3, 0.2, p, 0.5) == 0.75
    assert step(0.5, 0.8, 0.3, p, 0.5) == 0.25
    assert step(0.5, 0.3, 0.7, p, 0.5) == 0.5  # A checked, not rewarded
    assert step(1.0, 0.999, 0.1, p, 0.5) == 1.0


@settings(max_examples=300, deadline=None)
@given(
    x=st.floats(0, 1), u=st.floats(0, 1), v=st.floats(0, 1),
    pA=st.floats(0, 1), pB=st.floats(0, 1), g=st.floats(1e-6, 1 - 1e-6),
)
def test_step_matches_reference(x, u, v, pA, pB, g):
    got = step(x, u, v, BanditParams(pA, pB, 0.5), g)
    assert 0.0 <= got <= 1.0
    assert got == pytest.approx(_reference_step(x, u, v, pA, pB, g), rel=1e-15, abs=1e-16)


def test_boundary_starts_stay_put():
    for x0 in (0.0, 1.0):
        t = simulate_path(BanditParams(0.7, 0.3, x0), Constant(0.3), 2000, 5, thin=1)
        assert np.all(t.x == x0)


def test_no_b_reward_means_nondecreasing():
    t = simulate_path(BanditParams(0.5, 0.0, 0.3), PowerI(1, 1), 10**4, 11, thin=1)
    assert np.all(np.diff(t.x) >= 0)
    assert t.x[-1] > 0.3


def test_determinism():
    p = BanditParams(0.6, 0.4, 0.5)
    a = simulate_path(p, Constant(0.1), 10, 42, thin=1)
    b = simulate_path(p, Constant(0.1), 10, 42, thin=1)
    assert np.array_equal(a.x, b.x) and a.to_json() == b.to_json() and a.to_csv() == b.to_csv()


def test_path_matches_python_replay():
    p = BanditParams(0.7, 0.45, 0.35)
    s = PowerI(2.0, 0.8)
    N = 3000
    t = simulate_path(p, s, N, 123, thin=1)
    uv = DriverNoise(123).pairs(N)
    g = s.gammas(N)
    x = p.x0
    for n in range(N):
        x = _reference_step(x, uv[n, 0], uv[n, 1], p.pA, p.pB, g[n])
        assert t.x[n + 1] == pytest.approx(x, rel=1e-12, abs=1e-300)


def test_step_iteration_reproduces_path_below_half():
    # while X_n stays <= 1/2 the kernel and step() do identical arithmetic
    p = BanditParams(0.1, 0.9, 0.3)
    N = 2000
    t = simulate_path(p, Constant(0.05), N, 9, thin=1)
    uv = DriverNoise(9).pairs(N)
    x = p.x0
    for n in range(N):
        x = step(x, uv[n, 0], uv[n, 1], p, 0.05)
        assert x == t.x[n + 1]
    assert t.x.max() <= 0.5


@pytest.mark.parametrize(
    "params,schedule",
    [
        (BanditParams(0.9, 0.1, 0.5), PowerI(1, 1)),
        (BanditParams(0.2, 0.9, 0.5), PowerI(1, 1)),
        (BanditParams(1.0, 1.0, 0.5), PowerI(1, 1)),
        (BanditParams(0.6, 0.4, 0.01), RatioForm(1, 1, 0.5)),
        (BanditParams(0.6, 0.55, 0.99), PowerI(0.5, 0.7)),
    ],
)
def test_interior_start_stays_strictly_inside(params, schedule):
    for seed in range(3):
        t = simulate_path(params, schedule, 10**6, seed, thin=1)
        # the state is the pair (X, 1 - X); X alone rounds to 1.0 once 1 - X < 2^-53
        assert np.all(t.x > 0.0) and np.all(t.one_minus_x > 0.0)
        assert np.all(t.x <= 1.0) and np.all(t.one_minus_x <= 1.0)


def test_constant_steps_stay_inside_before_underflow():
    # (1 - gamma)^k reaches the smallest double after roughly 745/gamma shrinks
    t = simulate_path(BanditParams(0.9, 0.1, 0.5), Constant(0.01), 5000, 4, thin=1)
    assert np.all(t.x > 0.0) and np.all(t.one_minus_x > 0.0)


def test_states_near_one_keep_precision():
    t = simulate_path(BanditParams(1.0, 0.0, 0.5), Constant(0.01), 3000, 8, thin=1)
    y = t.one_minus_x
    assert y[-1] < 1e-6  # far below the spacing of doubles near 1 relative to 1 - X
    assert np.all(np.diff(y) <= 0)


def test_coupled_identical_inputs():
    a, b = coupled_pair(0.4, 0.4, 0.6, 0.6, 0.3, Constant(0.1), 500, 3, thin=1)
    assert np.array_equal(a.x, b.x)


@pytest.mark.parametrize("x,xp,pa,pap,pb", [(0.3, 0.7, 0.6, 0.6, 0.4), (0.5, 0.5, 0.5, 0.9, 0.4)])
def test_coupled_dominance_examples(x, xp, pa, pap, pb):
    for seed in range(5):
        lo, hi = coupled_pair(x, xp, pa, pap, pb, Constant(0.05), 10**4, seed, thin=1)
        assert np.all(lo.x <= hi.x)


def test_coupled_dominance_random_tuples():
    rng = np.random.default_rng(77)
    for i in range(200):
        x, xp = np.sort(rng.random(2))
        pa, pap = np.sort(rng.random(2))
        pb = float(rng.random())
        s = Constant(float(rng.uniform(0.01, 0.5))) if i % 2 else PowerI(float(rng.uniform(0.5, 3)), float(rng.uniform(0.3, 1)))
        lo, hi = coupled_pair(float(x), float(xp), float(pa), float(pap), pb, s, 10**4, int(rng.integers(2**63)), thin=1)
        assert np.all(lo.x <= hi.x)
        assert np.all(lo.one_minus_x >= hi.one_minus_x)


def test_coupled_rejects_wrong_order():
    with pytest.raises(ValueError):
        coupled_pair(0.6, 0.5, 0.5, 0.5, 0.4, Constant(0.1), 10, 1)
    with pytest.raises(ValueError):
        coupled_pair(0.5, 0.6, 0.7, 0.5, 0.4, Constant(0.1), 10, 1)


def test_final_state_monotone_in_start_value():
    xs = np.linspace(0.0, 1.0, 41)
    for seed in range(10):
        fin = [simulate_path(BanditParams(0.6, 0.4, float(x)), Constant(0.1), 3000, seed).x_final for x in xs]
        assert np.all(np.diff(fin) >= 0)


def test_descent_flag_dies_on_a_reward():
    # find a seed whose first draw checks A (u <= x) with a reward (v <= pA)
    p = BanditParams(0.9, 0.5, 0.5)
    for seed in range(100):
        u, v = DriverNoise(seed).pair(1)
        if u <= 0.5 and v <= 0.9:
            break
    t = simulate_path(p, Constant(0.1), 50, seed)
    assert not t.descent_alive
    assert monotone_flags(0.5, DriverNoise(seed).pairs(50), p, Constant(0.1))[0] is False


def test_descent_path_is_explicit_product():
    # pA = 0: no ascent ever, and with x0 small descent survives on many seeds
    p = BanditParams(0.0, 0.8, 0.02)
    s = PowerI(1, 1)
    N = 2000
    found = 0
    for seed in range(200):
        t = simulate_path(p, s, N, seed, thin=1)
        if not t.descent_alive:
            continue
        found += 1
        uv = DriverNoise(seed).pairs(N)
        factors = 1.0 - s.gammas(N) * (uv[:, 1] <= p.pB)
        prod = p.x0 * np.concatenate([[1.0], np.cumprod(factors)])
        assert np.allclose(t.x, prod, rtol=1e-12, atol=0)
    assert found > 50


def test_zero_start_flags():
    t = simulate_path(BanditParams(0.5, 0.5, 0.0), Constant(0.1), 100, 1)
    assert t.descent_alive and np.all(t.x == 0.0)


def test_flags_match_independent_replay():
    rng = np.random.default_rng(5)
    for _ in range(100):
        p = BanditParams(float(rng.random()), float(rng.random()), float(rng.uniform(0.01, 0.2)))
        s = Constant(0.2)
        seed = int(rng.integers(2**63))
        t = simulate_path(p, s, 60, seed)
        assert (t.descent_alive, t.ascent_alive) == monotone_flags(p.x0, DriverNoise(seed).pairs(60), p, s)
        p2 = BanditParams(p.pA, p.pB, 1.0 - p.x0)
        t2 = simulate_path(p2, s, 60, seed)
        assert (t2.descent_alive, t2.ascent_alive) == monotone_flags(p2.x0, DriverNoise(seed).pairs(60), p2, s)


def test_batch_matches_single_paths():
    p = BanditParams(0.6, 0.45, 0.4)
    s = PowerI(1.5, 0.9)
    b = simulate_batch(p, s, 5000, 31, 100, 70)
    for i in (0, 1, 63, 64, 69):
        t = simulate_path(p, s, 5000, path_seed(31, 100 + i))
        assert t.x_final == b.x_final[i]
        assert t.one_minus_x_final == b.one_minus_x_final[i]
        assert (t.descent_alive, t.ascent_alive) == (b.descent_alive[i], b.ascent_alive[i])


def test_martingale_mean():
    for x0 in (0.2, 0.5, 0.8):
        b = simulate_terminal(BanditParams(0.5, 0.5, x0), Constant(0.2), 2000, 20_000, 17)
        se = b.x_final.std(ddof=1) / math.sqrt(len(b))
        assert abs(b.x_final.mean() - x0) <= 4 * se


def test_drift_identity():
    # E X_N = x0 + pi sum_{n<N} gamma_{n+1} E h(X_n)
    from twoarmed.montecarlo import estimate_drift_identity

    for p in (BanditParams(0.7, 0.3, 0.4), BanditParams(0.3, 0.6, 0.7)):
        d = estimate_drift_identity(p, PowerI(1, 1), 2000, 20_000, 23)
        assert abs(d.mean) <= 4 * d.se


def test_trajectory_exports():
    t = simulate_path(BanditParams(0.6, 0.4, 0.5), Constant(0.1), 2500, 42)
    assert t.thin == default_thin(2500) == 3
    assert t.n[0] == 0 and t.n[-1] == 2500
    summary = json.loads(t.to_json())
    assert summary["seed"] == 42 and summary["N"] == 2500
    assert set(summary["flags"]) == {"descent_alive", "ascent_alive"}
    rows = t.to_csv().splitlines()
    assert rows[0] == "n,x" and len(rows) == len(t.n) + 1
    last = rows[-1].split(",")
    assert float(last[1]) == t.x_final
    assert t.to_csv(complement=True).splitlines()[0] == "n,x,one_minus_x"
    with pytest.raises(ValueError):
        t.x[0] = 0.3


def test_parameter_validation():
    with pytest.raises(ValueError):
        BanditParams(1.2, 0.5, 0.5)
    with pytest.raises(ValueError):
        simulate_path(BanditParams(0.5, 0.5, 0.5), Constant(0.1), 0, 1)
    with pytest.raises(ValueError):
        simulate_path(BanditParams(0.5, 0.5, 0.5), Constant(0.1), 10, 1, thin=0)
