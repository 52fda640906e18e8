import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from twoarmed.bandit import BanditParams, simulate_path
from twoarmed.noise import path_seed
from twoarmed.schedule import Constant, PowerI, tail_sq_sum_ub
from twoarmed.stopping import (
    InapplicableSchedule,
    RanOut,
    StoppingCertificate,
    Target,
    error_bound,
    monitor,
    monitor_batch,
    monitor_path,
)


def test_error_bound_examples():
    assert error_bound(0.5, 0.1) == pytest.approx(0.2)
    assert error_bound(0.9, 0.01) == pytest.approx(0.1)
    assert error_bound(0.99, 0.0) == 0.0
    assert error_bound(0.5, 5.0) == 1.0
    # X rounds to 1.0 but the complement carries the state: max(1e-30, 1e-30 / 1e-20)
    assert error_bound(1.0, 1e-30, one_minus_x=1e-20) == pytest.approx(1e-10)


def test_error_bound_rejections():
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            error_bound(bad, 0.1)
    with pytest.raises(ValueError):
        error_bound(0.5, -1.0)
    with pytest.raises(ValueError):
        error_bound(0.5, float("nan"))
    with pytest.raises(InapplicableSchedule):
        error_bound(0.5, math.inf)


@settings(max_examples=300, deadline=None)
@given(x=st.floats(1e-9, 1 - 1e-9), t1=st.floats(0, 10), t2=st.floats(0, 10))
def test_error_bound_nondecreasing_in_tail(x, t1, t2):
    lo, hi = sorted((t1, t2))
    b_lo, b_hi = error_bound(x, lo), error_bound(x, hi)
    assert 0.0 <= b_lo <= b_hi <= 1.0
    # symmetric under swapping X and 1 - X
    assert error_bound(x, lo, one_minus_x=1 - x) == error_bound(1 - x, lo, one_minus_x=x)


def test_epsilon_one_stops_immediately():
    c = monitor_path(BanditParams(0.6, 0.4, 0.5), PowerI(1, 1), 100, 3, 1.0)
    assert isinstance(c, StoppingCertificate) and c.n == 1


def test_ran_out():
    r = monitor_path(BanditParams(0.5, 0.5, 0.5), PowerI(1, 1), 20, 3, 1e-9)
    assert isinstance(r, RanOut) and r.N == 20 and r.last_bound > 1e-9
    assert json.loads(r.to_json())["ran_out"] is True


def test_constant_steps_are_inapplicable():
    p = BanditParams(0.6, 0.4, 0.5)
    with pytest.raises(InapplicableSchedule):
        monitor_path(p, Constant(0.1), 100, 1, 0.05)
    with pytest.raises(InapplicableSchedule):
        monitor_batch(p, Constant(0.1), 100, 10, 1, 0.05)
    with pytest.raises(InapplicableSchedule):
        monitor([0.5, 0.6], Constant(0.1), 0.05)


def test_determinism_and_json():
    p = BanditParams(0.9, 0.1, 0.5)
    a = monitor_path(p, PowerI(1, 1), 10**4, 12, 0.1)
    b = monitor_path(p, PowerI(1, 1), 10**4, 12, 0.1)
    assert a == b
    if isinstance(a, StoppingCertificate):
        d = json.loads(a.to_json())
        assert d["target"] in ("ArmA", "ArmB") and d["bound"] <= 0.1
        assert d["tail_sq_used"] == tail_sq_sum_ub(PowerI(1, 1), a.n)


def test_monitor_agrees_with_simulated_path():
    p = BanditParams(0.8, 0.2, 0.5)
    s = PowerI(1, 1)
    N = 5000
    for seed in range(20):
        t = simulate_path(p, s, N, seed, thin=1)
        streamed = monitor(zip(t.x[1:], t.one_minus_x[1:]), s, 0.1)
        direct = monitor_path(p, s, N, seed, 0.1)
        assert type(streamed) is type(direct)
        if isinstance(direct, StoppingCertificate):
            assert streamed.n == direct.n
            assert streamed.bound == pytest.approx(direct.bound, rel=1e-12)
            assert streamed.declared_target is direct.declared_target


def test_monitor_accepts_plain_floats_and_absorbed_states():
    c = monitor(iter([0.5, 0.0]), PowerI(1, 1), 1e-6)
    assert c.n == 2 and c.bound == 0.0 and c.declared_target is Target.ARM_B


def test_batch_agrees_with_single_paths():
    p = BanditParams(0.8, 0.3, 0.5)
    s = PowerI(1, 1)
    mb = monitor_batch(p, s, 3000, 100, 8, 0.1)
    for i in range(100):
        c = monitor_path(p, s, 3000, path_seed(8, i), 0.1)
        if isinstance(c, RanOut):
            assert mb.stop_n[i] == -1
        else:
            assert mb.stop_n[i] == c.n and mb.stop_x[i] == c.x_n
    assert np.all(np.isfinite(mb.final_x))


@pytest.mark.parametrize("eps", [0.01, 0.05, 0.1])
def test_declarations_are_wrong_rarely(eps):
    # C pB <= 1 with harmonic steps: the limit is 1, so declaring B is an error
    p = BanditParams(0.9, 0.1, 0.5)
    mb = monitor_batch(p, PowerI(1, 1), 10**4, 8192, 3, eps)
    c = mb.certified
    wrong = int(np.sum(c & ~mb.declared_a))
    n = int(c.sum())
    assert n > 0
    print(f"eps={eps}: certified={n}, wrong={wrong}, rate={wrong / n:.4f}")
    assert stats.binomtest(wrong, n, eps, alternative="greater").pvalue > 1e-3
