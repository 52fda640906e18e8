"""Gain sequences gamma_n for the bandit recursion.

Four families are supported:

* ``Constant(gamma)``            gamma_n = gamma
* ``PowerI(C, alpha)``           gamma_n = (C / (n + C)) ** alpha
* ``RatioForm(C, alpha, p)``     gamma_n = Delta_n / S_n, Delta_n = C n^(1/p - 1) log(n)^alpha
* ``Custom(func | values)``      user supplied

All sequences are 1-indexed.  Partial sums are accumulated with Neumaier
compensation so that prefix sums up to 10^6 terms are reproducible.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, ClassVar, Optional, Sequence

import numba as nb
import numpy as np

from ._validation import check_int, check_positive, check_probability, check_step


class Fallibility(str, Enum):
    FALLIBLE = "Fallible"
    INFALLIBLE = "Infallible"
    # reserved for families in the log-log critical gap (e.g. Delta_n = log n (log log n)^beta)
    UNKNOWN = "Unknown"


@nb.njit(cache=True)
def compensated_cumsum(values):
    """Prefix sums of ``values`` with Neumaier (improved Kahan) compensation."""
    n = values.shape[0]
    out = np.empty(n)
    s = 0.0
    c = 0.0
    for i in range(n):
        v = values[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out


@nb.njit(cache=True)
def _s_recursion(gammas):
    # S_0 = 1, S_n = S_{n-1} / (1 - gamma_n); Delta_n = gamma_n S_n
    n = gammas.shape[0]
    s = np.empty(n + 1)
    d = np.empty(n + 1)
    s[0] = 1.0
    d[0] = 1.0
    for k in range(1, n + 1):
        g = gammas[k - 1]
        s[k] = s[k - 1] / (1.0 - g)
        d[k] = g * s[k]
    return d, s


class StepSchedule:
    """Base class.  Subclasses implement ``_compute(n)`` returning gamma_1..gamma_n."""

    kind: ClassVar[str] = ""

    def _compute(self, n: int) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def gammas(self, n: int) -> np.ndarray:
        """Read-only array ``[gamma_1, ..., gamma_n]``."""
        n = check_int(n, "n", minimum=0)
        if n == 0:
            return np.empty(0)
        return _cached_gammas(self, n)

    def gamma(self, n: int) -> float:
        return gamma(self, n)

    @property
    def square_summable(self) -> bool:
        return math.isfinite(tail_sq_sum_ub(self, 1))

    @property
    def id(self) -> str:
        params = ",".join(f"{k}={v}" for k, v in self.to_dict().items() if k != "kind")
        return f"{self.kind}({params})"

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(StepSchedule):
    gamma_value: float
    kind: ClassVar[str] = "constant"

    def __post_init__(self):
        check_step(self.gamma_value, "gamma")

    def _compute(self, n):
        return np.full(n, float(self.gamma_value))

    def to_dict(self):
        return {"kind": self.kind, "gamma": float(self.gamma_value)}


@dataclass(frozen=True)
class PowerI(StepSchedule):
    """gamma_n = (C / (n + C)) ** alpha with C > 0 and 0 < alpha <= 1."""

    C: float
    alpha: float
    kind: ClassVar[str] = "power"

    def __post_init__(self):
        check_positive(self.C, "C")
        a = check_positive(self.alpha, "alpha")
        if a > 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {a}")

    def _compute(self, n):
        k = np.arange(1, n + 1, dtype=float)
        return (self.C / (k + self.C)) ** self.alpha

    def to_dict(self):
        return {"kind": self.kind, "C": float(self.C), "alpha": float(self.alpha)}


@dataclass(frozen=True)
class RatioForm(StepSchedule):
    """gamma_n = Delta_n / S_n with Delta_0 = 1, Delta_1 = C and
    Delta_n = C n^(1/p - 1) log(n)^alpha for n >= 2."""

    C: float
    alpha: float
    p: float
    kind: ClassVar[str] = "ratio"

    def __post_init__(self):
        check_positive(self.C, "C")
        check_positive(self.alpha, "alpha")
        p = check_positive(self.p, "p")
        if p > 1.0:
            raise ValueError(f"p must lie in (0, 1], got {p}")

    def deltas(self, n: int) -> np.ndarray:
        """Closed-form ``[Delta_0, ..., Delta_n]``."""
        out = np.empty(n + 1)
        out[0] = 1.0
        if n >= 1:
            out[1] = self.C
        if n >= 2:
            k = np.arange(2, n + 1, dtype=float)
            out[2:] = self.C * k ** (1.0 / self.p - 1.0) * np.log(k) ** self.alpha
        return out

    def _compute(self, n):
        d = self.deltas(n)
        s = compensated_cumsum(d)
        return d[1:] / s[1:]

    def to_dict(self):
        return {"kind": self.kind, "C": float(self.C), "alpha": float(self.alpha), "p": float(self.p)}


@dataclass(frozen=True, eq=False)
class Custom(StepSchedule):
    """User-defined steps, either a callable ``n -> gamma_n`` or an explicit list.

    ``tail_sq_bound`` is an upper bound on sum_{j > cutoff} gamma_j^2 supplied by
    the caller; without it the schedule is treated as not square-summable by the
    stopping monitor.  For an explicit list the cutoff is its length.
    """

    func: Optional[Callable[[int], float]] = None
    values: Optional[Sequence[float]] = None
    tail_sq_bound: Optional[float] = None
    cutoff: Optional[int] = None
    name: str = "custom"
    kind: ClassVar[str] = "custom"

    def __post_init__(self):
        if (self.func is None) == (self.values is None):
            raise ValueError("Custom needs exactly one of func or values")
        if self.values is not None:
            arr = np.asarray(self.values, dtype=float)
            _check_open_unit(arr)
            object.__setattr__(self, "values", tuple(float(v) for v in arr))
            object.__setattr__(self, "cutoff", len(arr))
        if self.tail_sq_bound is not None and self.tail_sq_bound < 0:
            raise ValueError("tail_sq_bound must be >= 0")

    def _compute(self, n):
        if self.values is not None:
            if n > len(self.values):
                raise ValueError(f"custom schedule only defines {len(self.values)} steps, asked for {n}")
            return np.array(self.values[:n])
        arr = np.array([float(self.func(k)) for k in range(1, n + 1)])
        _check_open_unit(arr)
        return arr

    def to_dict(self):
        if self.values is None:
            raise ValueError("a callable Custom schedule cannot be serialised; pass explicit values")
        d = {"kind": self.kind, "values": list(self.values)}
        if self.tail_sq_bound is not None:
            d["tail_sq_bound"] = float(self.tail_sq_bound)
        return d

    @property
    def id(self):
        return self.name


def _check_open_unit(arr):
    if arr.size and not (np.all(arr > 0.0) and np.all(arr < 1.0)):
        raise ValueError("every gamma_n must lie in (0, 1)")


@functools.lru_cache(maxsize=32)
def _cached_gammas(schedule: StepSchedule, n: int) -> np.ndarray:
    arr = np.ascontiguousarray(schedule._compute(n), dtype=float)
    arr.setflags(write=False)
    return arr


@functools.lru_cache(maxsize=32)
def _cached_big_gamma(schedule: StepSchedule, n: int) -> np.ndarray:
    out = np.empty(n + 1)
    out[0] = 0.0
    if n:
        out[1:] = compensated_cumsum(schedule.gammas(n))
    out.setflags(write=False)
    return out


SCHEDULE_KINDS = {cls.kind: cls for cls in (Constant, PowerI, RatioForm, Custom)}


def schedule_from_dict(d: dict) -> StepSchedule:
    """Inverse of ``StepSchedule.to_dict``.

    >>> schedule_from_dict({"kind": "power", "C": 1, "alpha": 1})
    PowerI(C=1, alpha=1)
    """
    kind = d.get("kind")
    if kind == "constant":
        return Constant(d["gamma"])
    if kind == "power":
        return PowerI(d["C"], d["alpha"])
    if kind == "ratio":
        return RatioForm(d["C"], d["alpha"], d["p"])
    if kind == "custom":
        return Custom(values=d["values"], tail_sq_bound=d.get("tail_sq_bound"))
    raise ValueError(f"unknown schedule kind {kind!r}; expected one of {sorted(SCHEDULE_KINDS)}")


# ---------------------------------------------------------------------------
# sequence quantities


def gamma(schedule: StepSchedule, n: int) -> float:
    """gamma_n for n >= 1."""
    n = check_int(n, "n", minimum=0)
    if n == 0:
        raise ValueError("gamma is 1-indexed: n must be >= 1")
    if isinstance(schedule, Constant):
        return float(schedule.gamma_value)
    if isinstance(schedule, PowerI):
        return float((schedule.C / (n + schedule.C)) ** schedule.alpha)
    return float(schedule.gammas(n)[n - 1])


def big_gamma(schedule: StepSchedule, n: int) -> float:
    """Gamma_n = gamma_1 + ... + gamma_n (compensated); Gamma_0 = 0."""
    n = check_int(n, "n", minimum=0)
    return float(_cached_big_gamma(schedule, n)[n])


def big_gamma_array(schedule: StepSchedule, n: int) -> np.ndarray:
    """``[Gamma_0, ..., Gamma_n]``."""
    return _cached_big_gamma(schedule, check_int(n, "n", minimum=0))


def delta_s_arrays(schedule: StepSchedule, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``([Delta_0..Delta_n], [S_0..S_n])`` from S_n = S_{n-1} / (1 - gamma_n)."""
    n = check_int(n, "n", minimum=0)
    d, s = _s_recursion(schedule.gammas(n))
    if not np.isfinite(s[-1]):
        first = int(np.argmax(~np.isfinite(s)))
        raise OverflowError(f"S_n overflows double precision at n = {first}")
    return d, s


def delta_s(schedule: StepSchedule, n: int) -> tuple[float, float]:
    """(Delta_n, S_n) with Delta_0 = S_0 = 1 and gamma_n = Delta_n / S_n."""
    d, s = delta_s_arrays(schedule, n)
    return float(d[n]), float(s[n])


def log_s_array(schedule: StepSchedule, n: int) -> np.ndarray:
    """``[log S_0, ..., log S_n]``; usable where S_n itself overflows."""
    n = check_int(n, "n", minimum=0)
    out = np.zeros(n + 1)
    if n:
        out[1:] = compensated_cumsum(-np.log1p(-schedule.gammas(n)))
    return out


# ---------------------------------------------------------------------------
# classification of the two named families


def _check_pb(pB):
    pB = check_probability(pB, "pB")
    if pB == 0.0:
        raise ValueError("classification requires pB in (0, 1]")
    return pB


def classify_power_I(C: float, alpha: float, pB: float) -> Fallibility:
    """gamma_n = (C/(n+C))^alpha: infallible iff alpha == 1 and C <= 1/pB."""
    C = check_positive(C, "C")
    alpha = check_positive(alpha, "alpha")
    if alpha > 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    pB = _check_pb(pB)
    # C <= 1/pB written as C * pB <= 1 keeps the boundary exact for pB = 1/k
    if alpha == 1.0 and C * pB <= 1.0:
        return Fallibility.INFALLIBLE
    return Fallibility.FALLIBLE


def classify_power_III(alpha: float, pB: float) -> Fallibility:
    """Ratio-form steps with p = pB: infallible iff alpha <= 1/pB."""
    alpha = check_positive(alpha, "alpha")
    pB = _check_pb(pB)
    return Fallibility.INFALLIBLE if alpha * pB <= 1.0 else Fallibility.FALLIBLE


def classify_schedule(schedule: StepSchedule, pB: float) -> Fallibility:
    """Exact classification where a closed criterion is known, ``UNKNOWN`` otherwise."""
    pB = _check_pb(pB)
    if isinstance(schedule, Constant):
        return Fallibility.FALLIBLE
    if isinstance(schedule, PowerI):
        return classify_power_I(schedule.C, schedule.alpha, pB)
    if isinstance(schedule, RatioForm) and schedule.p == pB:
        return classify_power_III(schedule.alpha, pB)
    return Fallibility.UNKNOWN


# ---------------------------------------------------------------------------
# tail of the squared steps


# safety factor on explicitly summed prefixes (absorbs rounding of the summation)
_SUM_SLACK = 1.0 + 1e-9
_RATIO_MIN_CUTOFF = 2**20


def _ratio_cutoff(n: int) -> int:
    return max(_RATIO_MIN_CUTOFF, 4 * (n + 1))


def _ratio_remainder(schedule: RatioForm, K: int) -> float:
    # for k >= 3, S_k >= (k/2) f(k/2) with f(t) = C t^(1/p-1) log(t)^alpha increasing,
    # hence gamma_k <= c / k with c = 2^(1/p) (log K / log(K/2))^alpha for k > K
    c = 2.0 ** (1.0 / schedule.p) * (math.log(K) / math.log(K / 2.0)) ** schedule.alpha
    return c * c / K


def tail_sq_sum_ub(schedule: StepSchedule, n: int) -> float:
    """Certified upper bound on sum_{k >= n} gamma_{k+1}^2, or ``math.inf``."""
    n = check_int(n, "n", minimum=1)
    return float(tail_sq_sum_ub_array(schedule, n)[-1])


def tail_sq_sum_ub_array(schedule: StepSchedule, n_max: int) -> np.ndarray:
    """Upper bounds for n = 1..n_max (index i holds the bound for n = i + 1)."""
    n_max = check_int(n_max, "n_max", minimum=1)
    n = np.arange(1, n_max + 1, dtype=float)
    if isinstance(schedule, Constant):
        return np.full(n_max, math.inf)
    if isinstance(schedule, PowerI):
        a2 = 2.0 * schedule.alpha
        if a2 <= 1.0:
            return np.full(n_max, math.inf)
        C = schedule.C
        return C**a2 / ((a2 - 1.0) * (n + C - 1.0) ** (a2 - 1.0))
    if isinstance(schedule, RatioForm):
        K = _ratio_cutoff(n_max)
        sq = schedule.gammas(K) ** 2
        # suffix[j] = sum_{i >= j} sq[i] over the explicit prefix
        suffix = compensated_cumsum(sq[::-1])[::-1]
        explicit = suffix[1 : n_max + 1]  # sum_{j=n+1}^{K} gamma_j^2 uses sq index n..K-1
        return explicit * _SUM_SLACK + _ratio_remainder(schedule, K)
    if isinstance(schedule, Custom):
        if schedule.tail_sq_bound is None or schedule.cutoff is None:
            return np.full(n_max, math.inf)
        K = schedule.cutoff
        out = np.empty(n_max)
        sq = schedule.gammas(K) ** 2
        suffix = np.concatenate([compensated_cumsum(sq[::-1])[::-1], [0.0]])
        for i in range(n_max):
            j = min(i + 1, K)  # index of gamma_{n+1} in sq is n
            out[i] = suffix[j] * _SUM_SLACK + schedule.tail_sq_bound
        return out
    raise TypeError(f"unsupported schedule {schedule!r}")


# ---------------------------------------------------------------------------
# heuristic probes of the asymptotic conditions


@dataclass
class FallibilityDiagnostics:
    """Finite-prefix probes of the two asymptotic step conditions.

    ``product_partial_sums[m]`` is sum_{n=0}^{m} prod_{k<=n} (1 - pB gamma_k); if it
    levels off the fallibility series looks summable.  ``ratio_running_sup[n-1]`` is
    max_{j<=n} gamma_j / (Gamma_j exp(-pB Gamma_j)); if it stays bounded the
    infallibility growth condition looks satisfied.  Neither decides anything:
    asymptotic conditions cannot be settled from a prefix.
    """

    pB: float
    n_max: int
    product_partial_sums: np.ndarray
    ratio_running_sup: np.ndarray
    heuristic: bool = field(default=True, init=False)

    def summary(self) -> dict:
        ps = self.product_partial_sums
        half = len(ps) // 2
        return {
            "heuristic": True,
            "pB": self.pB,
            "n_max": self.n_max,
            "product_sum_final": float(ps[-1]),
            "product_sum_late_growth": float(ps[-1] - ps[half]),
            "ratio_sup_final": float(self.ratio_running_sup[-1]),
            "ratio_sup_at_half": float(self.ratio_running_sup[half - 1]),
        }


def diagnostics_fallibility(schedule: StepSchedule, pB: float, n_max: int) -> FallibilityDiagnostics:
    pB = check_probability(pB, "pB")
    n_max = check_int(n_max, "n_max", minimum=10)
    g = schedule.gammas(n_max)
    log_prod = np.concatenate([[0.0], compensated_cumsum(np.log1p(-pB * g))])
    partial = compensated_cumsum(np.exp(log_prod))
    G = big_gamma_array(schedule, n_max)[1:]
    ratio = g / (G * np.exp(-pB * G))
    return FallibilityDiagnostics(pB, n_max, partial, np.maximum.accumulate(ratio))
