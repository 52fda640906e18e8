"""Online stopping rule: declare the winning arm once the conditional error bound is small.

At time n the probability that the limit differs from the side X_n is on is at most

    max( min((1-X)/X, T_n/X), min(X/(1-X), T_n/(1-X)) ),   T_n >= sum_{k>=n} gamma_{k+1}^2,

which involves neither pA nor pB.  The monitor uses a certified upper bound
for T_n; the expression is nondecreasing in T_n, so the substitution keeps the
bound valid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numba as nb
import numpy as np

from . import _jsonio
from ._validation import check_int, check_seed, check_unit_interval
from .bandit import BLOCK, BanditParams, _advance
from .noise import path_keys, split_seed, uv_pair
from .schedule import StepSchedule, tail_sq_sum_ub_array


class Target(str, Enum):
    ARM_A = "ArmA"
    ARM_B = "ArmB"


class InapplicableSchedule(ValueError):
    """The squared steps are not summable, so no finite tail bound exists."""


@nb.njit(inline="always")
def _bound(x, y, t):
    # x = X_n, y = 1 - X_n, both > 0
    b = max(min(y / x, t / x), min(x / y, t / y))
    return min(1.0, b)


def error_bound(x_n: float, tail_sq: float, one_minus_x: float | None = None) -> float:
    """The conditional error bound at state ``x_n`` with squared-step tail ``tail_sq``, clamped to [0, 1].

    ``one_minus_x`` may be passed to keep precision when ``x_n`` is close to 1.
    """
    x = check_unit_interval(x_n, "x_n", open_left=True, open_right=one_minus_x is None)
    y = 1.0 - x if one_minus_x is None else check_unit_interval(one_minus_x, "one_minus_x", open_left=True)
    if tail_sq < 0 or math.isnan(tail_sq):
        raise ValueError("tail_sq must be >= 0")
    if math.isinf(tail_sq):
        raise InapplicableSchedule("the squared-step tail is infinite")
    return float(_bound(x, y, float(tail_sq)))


@dataclass(frozen=True)
class StoppingCertificate:
    n: int
    x_n: float
    one_minus_x_n: float
    bound: float
    declared_target: Target
    epsilon: float
    tail_sq_used: float

    def to_dict(self):
        return {
            "n": self.n,
            "x_n": self.x_n,
            "one_minus_x_n": self.one_minus_x_n,
            "bound": self.bound,
            "target": self.declared_target.value,
            "epsilon": self.epsilon,
            "tail_sq_used": self.tail_sq_used,
        }

    def to_json(self) -> str:
        return _jsonio.dumps(self.to_dict())


@dataclass(frozen=True)
class RanOut:
    N: int
    last_bound: float
    epsilon: float

    def to_dict(self):
        return {"ran_out": True, "N": self.N, "last_bound": self.last_bound, "epsilon": self.epsilon}

    def to_json(self) -> str:
        return _jsonio.dumps(self.to_dict())


def _tail_array(schedule: StepSchedule, N: int) -> np.ndarray:
    t = tail_sq_sum_ub_array(schedule, N)
    if not np.isfinite(t[0]):
        raise InapplicableSchedule(f"{schedule.id}: squared steps are not summable")
    return np.ascontiguousarray(t)


def _declare(x: float, y: float) -> Target:
    return Target.ARM_A if x > y else Target.ARM_B


def monitor(path, schedule: StepSchedule, epsilon: float):
    """Watch a stream of states X_1, X_2, ... and stop at the first n with bound <= epsilon.

    ``path`` yields either X_n or pairs (X_n, 1 - X_n); it is consumed lazily.
    Exactly absorbed states (X_n in {0, 1}) carry no error and stop at once.
    """
    epsilon = check_unit_interval(epsilon, "epsilon", open_left=True)
    if not schedule.square_summable:
        raise InapplicableSchedule(f"{schedule.id}: squared steps are not summable")
    chunk = 1024
    tails = np.empty(0)
    n = 0
    last = 1.0
    for item in path:
        n += 1
        if n > len(tails):
            chunk = max(chunk, 2 * n)
            tails = tail_sq_sum_ub_array(schedule, chunk)
        x, y = (float(item[0]), float(item[1])) if isinstance(item, (tuple, list, np.ndarray)) else (float(item), 1.0 - float(item))
        t = float(tails[n - 1])
        last = 0.0 if x <= 0.0 or y <= 0.0 else float(_bound(x, y, t))
        if last <= epsilon:
            return StoppingCertificate(n, x, y, last, _declare(x, y), epsilon, t)
    return RanOut(n, last, epsilon)


@nb.njit(cache=True)
def _monitor_one(x0, pa, pb, gam, tails, eps, k0, k1):
    on_x = x0 <= 0.5
    s = x0 if on_x else 1.0 - x0
    for n in range(1, gam.shape[0] + 1):
        u, v = uv_pair(n, k0, k1)
        g = gam[n - 1]
        s, on_x, _, _ = _advance(s, on_x, u, v, pa, pb, g, 1.0 - g)
        x = s if on_x else 1.0 - s
        y = 1.0 - s if on_x else s
        b = 0.0 if s == 0.0 else _bound(x, y, tails[n - 1])
        if b <= eps:
            return n, x, y, b
    x = s if on_x else 1.0 - s
    y = 1.0 - s if on_x else s
    return -1, x, y, b


def monitor_path(params: BanditParams, schedule: StepSchedule, N: int, seed: int, epsilon: float):
    """Simulate one path with noise stream ``seed`` and monitor it up to horizon N."""
    N = check_int(N, "N", minimum=1)
    epsilon = check_unit_interval(epsilon, "epsilon", open_left=True)
    tails = _tail_array(schedule, N)
    gam = np.ascontiguousarray(schedule.gammas(N))
    k0, k1 = split_seed(check_seed(seed))
    n, x, y, b = _monitor_one(params.x0, params.pA, params.pB, gam, tails, epsilon, k0, k1)
    if n < 0:
        return RanOut(N, float(b), epsilon)
    return StoppingCertificate(int(n), float(x), float(y), float(b), _declare(x, y), epsilon, float(tails[n - 1]))


@nb.njit(cache=True, nogil=True)
def _monitor_block(x0, pa, pb, gam, tails, eps, k0s, k1s, stop_n, stop_x, stop_y, fin_x, fin_y):
    P = k0s.shape[0]
    N = gam.shape[0]
    on0 = x0 <= 0.5
    s = np.full(P, x0 if on0 else 1.0 - x0)
    on_x = np.full(P, on0)
    for p in range(P):
        stop_n[p] = -1
    for n in range(1, N + 1):
        g = gam[n - 1]
        om = 1.0 - g
        t = tails[n - 1]
        live = False
        for p in range(P):
            u, v = uv_pair(np.uint64(n), k0s[p], k1s[p])
            sp, op, _, _ = _advance(s[p], on_x[p], u, v, pa, pb, g, om)
            s[p] = sp
            on_x[p] = op
            live |= sp != 0.0
            if stop_n[p] < 0:
                x = sp if op else 1.0 - sp
                y = 1.0 - sp if op else sp
                b = 0.0 if sp == 0.0 else _bound(x, y, t)
                if b <= eps:
                    stop_n[p] = n
                    stop_x[p] = x
                    stop_y[p] = y
        if not live:
            break
    for p in range(P):
        fin_x[p] = s[p] if on_x[p] else 1.0 - s[p]
        fin_y[p] = 1.0 - s[p] if on_x[p] else s[p]


@dataclass
class MonitorBatch:
    """Stopping times (-1 = ran out), states at stopping, and states at the horizon."""

    epsilon: float
    N: int
    stop_n: np.ndarray
    stop_x: np.ndarray
    stop_y: np.ndarray
    final_x: np.ndarray
    final_y: np.ndarray

    @property
    def certified(self) -> np.ndarray:
        return self.stop_n > 0

    @property
    def declared_a(self) -> np.ndarray:
        return self.stop_x > self.stop_y


def monitor_batch(
    params: BanditParams, schedule: StepSchedule, N: int, M: int, master_seed: int, epsilon: float, first: int = 0
) -> MonitorBatch:
    """Monitor M paths; each path keeps running to N after it stops so its limit class can be read."""
    N = check_int(N, "N", minimum=1)
    M = check_int(M, "M", minimum=1)
    epsilon = check_unit_interval(epsilon, "epsilon", open_left=True)
    tails = _tail_array(schedule, N)
    gam = np.ascontiguousarray(schedule.gammas(N))
    k0, k1 = path_keys(master_seed, first, M)
    out = [np.empty(M, dtype=np.int64)] + [np.full(M, np.nan) for _ in range(4)]
    for b in range(0, M, BLOCK):
        e = min(b + BLOCK, M)
        _monitor_block(params.x0, params.pA, params.pB, gam, tails, epsilon, k0[b:e], k1[b:e], *(a[b:e] for a in out))
    return MonitorBatch(epsilon, N, *out)
