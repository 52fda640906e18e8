"""Closed-form bounds and limit laws for the absorption probabilities and moments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._validation import check_int, check_positive, check_probability, check_step, check_unit_interval
from .schedule import StepSchedule, compensated_cumsum, log_s_array


class Direction(str, Enum):
    LOWER_BOUNDS_FAILURE = "LowerBoundsFailure"
    LOWER_BOUNDS_SUCCESS = "LowerBoundsSuccess"
    UPPER_BOUNDS_MOMENT = "UpperBoundsMoment"
    EXACT_IDENTITY = "ExactIdentity"


class Which(str, Enum):
    X_INFINITY = "XInfinity"
    ONE_MINUS_X_INFINITY = "OneMinusXInfinity"


class NotApplicable(ValueError):
    """A bound's hypothesis fails for the given inputs."""


LIMIT = "limit"

# product factors closer to 1 than this are treated as exactly 1
_PRODUCT_TOL = 1e-15


@dataclass(frozen=True)
class BoundReport:
    name: str
    inputs: dict
    value: float
    direction: Direction
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"name": self.name, "inputs": self.inputs, "value": self.value, "direction": self.direction.value}
        if self.extra:
            d["extra"] = self.extra
        return d


def failure_lb_constant(x: float, pB: float, gamma: float) -> float:
    """Lower bound (1 - x)^(1/(pB gamma)) on the probability of absorption at 0 (constant step)."""
    x = check_probability(x, "x")
    pB = check_probability(pB, "pB")
    if pB == 0.0:
        raise ValueError("pB must be > 0")
    gamma = check_step(gamma)
    return float((1.0 - x) ** (1.0 / (pB * gamma)))


def success_lb_constant(x: float, pA: float, pB: float, gamma: float) -> float:
    """Lower bound on the probability of absorption at 1 for a constant step, clamped at 0.

    1 - 2 pA gamma (1/x - 1) / (pi (1 - gamma)^2),  pi = pA - pB > 0.
    """
    x = check_unit_interval(x, "x", open_left=True)
    pA = check_probability(pA, "pA")
    pB = check_probability(pB, "pB")
    if not pA > pB:
        raise ValueError(f"need pA > pB, got pA={pA}, pB={pB}")
    gamma = check_step(gamma)
    pi = pA - pB
    value = 1.0 - (2.0 * pA * gamma / (pi * (1.0 - gamma) ** 2)) * (1.0 / x - 1.0)
    return max(0.0, value)


def _log_tail_certificate(schedule: StepSchedule, pA: float, n: int) -> float:
    # |log prod_{k>n} (1 - pA g_k^2)| <= sum pA g^2 / (1 - pA g^2); a crude tail bound
    from .schedule import tail_sq_sum_ub

    t = tail_sq_sum_ub(schedule, n)
    g1 = schedule.gammas(n + 1)[-1]
    return pA * t / (1.0 - pA * g1 * g1)


def interior_mass_formula(x: float, pA: float, schedule: StepSchedule, n) -> float:
    """x(1 - x) prod_{k<=n} (1 - pA gamma_k^2): the exact value of E[X_n (1 - X_n)] when pA = pB.

    ``n = LIMIT`` gives the infinite product (0 when the squared steps are not summable).
    """
    x = check_probability(x, "x")
    pA = check_probability(pA, "pA")
    h = x * (1.0 - x)
    if n == LIMIT:
        if pA == 0.0:
            return h
        if not schedule.square_summable:
            return 0.0
        value, _ = interior_mass_limit(x, pA, schedule)
        return value
    n = check_int(n, "n")
    if n == 0 or h == 0.0:
        return h
    g = schedule.gammas(n)
    return h * math.exp(float(compensated_cumsum(np.log1p(-pA * g * g))[-1]))


def interior_mass_limit(x: float, pA: float, schedule: StepSchedule, chunk: int = 1 << 16, n_cap: int = 1 << 22):
    """Infinite product for ``interior_mass_formula`` plus a bound on the neglected log-tail.

    Factors are multiplied until they differ from 1 by less than 1e-15; the
    returned certificate bounds |log(rest of product)| via the squared-step tail.
    """
    h = x * (1.0 - x)
    n = chunk
    while True:
        g = schedule.gammas(n)
        if pA * g[-1] ** 2 < _PRODUCT_TOL or n >= n_cap:
            break
        n *= 2
    log_prod = float(compensated_cumsum(np.log1p(-pA * g * g))[-1])
    cert = _log_tail_certificate(schedule, pA, n)
    return h * math.exp(log_prod), float(cert)


def _check_delta_nonincreasing(schedule: StepSchedule, n: int):
    # log Delta_k = log gamma_k + log S_k, so the check survives where S_k overflows;
    # Delta_1 may exceed Delta_0, from k = 1 on the sequence must not increase
    log_d = np.log(schedule.gammas(n)) + log_s_array(schedule, n)[1:]
    bad = np.diff(log_d) > 1e-12
    if np.any(bad):
        k = int(np.argmax(bad)) + 2
        raise NotApplicable(f"Delta_n increases at n = {k}; moment bound requires nonincreasing Delta")


def moment_ub(x: float, schedule: StepSchedule, m: int, which: Which | str = Which.X_INFINITY, check_prefix: int = 10_000) -> float:
    """Upper bound on E[X_inf^(m+1)] (or E[(1 - X_inf)^(m+1)]) in the martingale case.

    prod_{k=0}^{m} (1 - (1 - x) / S_k), with 1/S_k = prod_{l<=k} (1 - gamma_l); for the
    complement, x and 1 - x swap.  Needs Delta_n nonincreasing for n >= 1, which is
    checked on the first ``check_prefix`` terms.
    """
    x = check_probability(x, "x")
    m = check_int(m, "m")
    which = Which(which)
    _check_delta_nonincreasing(schedule, max(check_prefix, m + 1))
    y = 1.0 - x if which is Which.X_INFINITY else x
    inv_s = np.exp(-log_s_array(schedule, m))
    return float(np.prod(1.0 - y * inv_s))


def beta_limit_moment(x: float, Delta: float, m: int) -> float:
    """E[X^(m+1)] for X ~ Beta(x/Delta, (1-x)/Delta): prod_{k=0}^{m} (x/Delta + k)/(1/Delta + k)."""
    x = check_unit_interval(x, "x")
    Delta = check_positive(Delta, "Delta")
    m = check_int(m, "m")
    a = x / Delta
    b = 1.0 / Delta
    out = 1.0
    for k in range(m + 1):
        out *= (a + k) / (b + k)
    return out


def report(name: str, **kwargs) -> BoundReport:
    """Evaluate a bound by name and wrap it in a ``BoundReport``."""
    if name == "failure":
        v = failure_lb_constant(kwargs["x"], kwargs["pB"], kwargs["gamma"])
        return BoundReport(name, kwargs, v, Direction.LOWER_BOUNDS_FAILURE)
    if name == "success":
        v = success_lb_constant(kwargs["x"], kwargs["pA"], kwargs["pB"], kwargs["gamma"])
        return BoundReport(name, kwargs, v, Direction.LOWER_BOUNDS_SUCCESS)
    if name == "interior":
        sched = kwargs["schedule"]
        n = kwargs["n"]
        v = interior_mass_formula(kwargs["x"], kwargs["pA"], sched, n)
        inputs = {"x": kwargs["x"], "pA": kwargs["pA"], "schedule": sched.to_dict(), "n": n}
        return BoundReport(name, inputs, v, Direction.EXACT_IDENTITY)
    if name == "moment":
        sched = kwargs["schedule"]
        which = Which(kwargs.get("which", Which.X_INFINITY))
        v = moment_ub(kwargs["x"], sched, kwargs["m"], which)
        inputs = {"x": kwargs["x"], "m": kwargs["m"], "which": which.value, "schedule": sched.to_dict()}
        return BoundReport(name, inputs, v, Direction.UPPER_BOUNDS_MOMENT)
    if name == "beta":
        v = beta_limit_moment(kwargs["x"], kwargs["Delta"], kwargs["m"])
        return BoundReport(name, kwargs, v, Direction.EXACT_IDENTITY)
    raise ValueError(f"unknown bound {name!r}")
