"""The averaged (deterministic) recursion, its ODE flow, and convergence-rate diagnostics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
import numba as nb

from ._validation import check_int, check_probability, check_unit_interval
from .bandit import Trajectory
from .schedule import StepSchedule, big_gamma_array, compensated_cumsum


class Inapplicable(ValueError):
    """The diagnostic needs summable squared steps."""


@nb.njit(cache=True)
def _iterate(x0, pi, gam):
    N = gam.shape[0]
    x = np.empty(N + 1)
    y = np.empty(N + 1)
    x[0] = x0
    y[0] = 1.0 - x0
    for n in range(N):
        inc = pi * gam[n] * x[n] * y[n]
        x[n + 1] = x[n] + inc
        y[n + 1] = y[n] - inc
    return x, y


@dataclass(frozen=True, eq=False)
class MeanPath:
    """x_n of the averaged recursion x_{n+1} = x_n + pi gamma_{n+1} x_n (1 - x_n), n = 0..N.

    ``one_minus_x`` is iterated alongside ``x`` so values near 1 keep full
    relative precision.
    """

    x0: float
    pi: float
    schedule: StepSchedule
    x: np.ndarray
    one_minus_x: np.ndarray
    big_gamma: np.ndarray
    drift_sum: np.ndarray

    @property
    def N(self) -> int:
        return len(self.x) - 1

    @property
    def boundary(self) -> bool:
        return self.x0 in (0.0, 1.0)

    @property
    def rate(self) -> np.ndarray:
        """e^{pi Gamma_n} (1 - x_n), computed in log space to avoid overflow."""
        with np.errstate(divide="ignore"):
            log_y = np.log(self.one_minus_x)
        out = np.exp(self.pi * self.big_gamma + log_y)
        out[self.one_minus_x == 0.0] = 0.0
        return out

    def bound_drift(self) -> np.ndarray:
        """(1 - x0) exp(-pi sum_{k<=n} gamma_k x_{k-1})."""
        return (1.0 - self.x0) * np.exp(-self.pi * self.drift_sum)

    def bound_start(self) -> np.ndarray:
        """(1 - x0) exp(-pi x0 Gamma_n)."""
        return (1.0 - self.x0) * np.exp(-self.pi * self.x0 * self.big_gamma)

    def rate_ceiling(self) -> float:
        """(1 - x0) exp((1/x0 - 1) e^{pi x0}): a ceiling for ``rate`` when pi > 0, x0 > 0."""
        if self.x0 == 0.0:
            return math.inf
        return (1.0 - self.x0) * math.exp((1.0 / self.x0 - 1.0) * math.exp(self.pi * self.x0))

    def lower_bound(self) -> np.ndarray:
        """(1 - x0) prod_{k<=n} (1 - pi gamma_k)."""
        g = self.schedule.gammas(self.N)
        log_p = np.concatenate([[0.0], compensated_cumsum(np.log1p(-self.pi * g))])
        return (1.0 - self.x0) * np.exp(log_p)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "x", "rate"])
        r = self.rate
        for n in range(self.N + 1):
            w.writerow([n, repr(float(self.x[n])), repr(float(r[n]))])
        return buf.getvalue()


def mean_path(x0: float, pi: float, schedule: StepSchedule, N: int) -> MeanPath:
    x0 = check_probability(x0, "x0")
    if not -1.0 <= pi <= 1.0:
        raise ValueError(f"pi must lie in [-1, 1], got {pi}")
    N = check_int(N, "N")
    gam = np.ascontiguousarray(schedule.gammas(N)) if N else np.empty(0)
    x, y = _iterate(x0, float(pi), gam)
    drift = np.concatenate([[0.0], compensated_cumsum(gam * x[:-1])]) if N else np.zeros(1)
    return MeanPath(x0, float(pi), schedule, x, y, big_gamma_array(schedule, N), drift)


def ode_flow(x, t, pi):
    """Phi(x, t) = x / ((1 - x) e^{-pi t} + x), the flow of dx/dt = pi x (1 - x)."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)):
        raise ValueError("x must lie in [0, 1]")
    if np.any(np.asarray(t) < 0.0):
        raise ValueError("t must be >= 0")
    out = x / ((1.0 - x) * np.exp(-pi * np.asarray(t, dtype=float)) + x)
    out = np.where(x == 0.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RateBand:
    lower: float
    upper: float
    boundary: bool = False

    def to_dict(self):
        return {"lower": self.lower, "upper": self.upper, "boundary": self.boundary}


def mean_rate_band(path: MeanPath, n_min: int = 1) -> RateBand:
    """min and max over n in [n_min, N] of e^{pi Gamma_n} (1 - x_n)."""
    if not path.schedule.square_summable:
        raise Inapplicable("the rate band needs summable squared steps")
    r = path.rate[n_min:]
    if path.x0 == 1.0:
        return RateBand(0.0, 0.0, boundary=True)
    return RateBand(float(r.min()), float(r.max()), boundary=path.x0 == 0.0)


@dataclass(frozen=True)
class PathRate:
    n: np.ndarray
    values: np.ndarray
    boundary: bool = False

    def late_variation(self, fraction: float = 0.5) -> float:
        """(max - min) / mean of ``values`` over the last ``fraction`` of the samples."""
        k = max(1, int(len(self.values) * fraction))
        w = self.values[-k:]
        m = float(np.mean(w))
        return 0.0 if m == 0.0 else float((w.max() - w.min()) / m)


def path_rate_diagnostic(traj: Trajectory, pA: float, schedule: StepSchedule | None = None) -> PathRate:
    """e^{pA Gamma_n} (1 - X_n) at the recorded samples of a path whose ascent flag survived."""
    pA = check_unit_interval(pA, "pA")
    if not traj.ascent_alive:
        raise ValueError("the path left the pure-ascent event; the diagnostic is undefined")
    schedule = traj.schedule if schedule is None else schedule
    G = big_gamma_array(schedule, traj.N)[traj.n]
    y = traj.one_minus_x
    if traj.params.x0 == 1.0:
        return PathRate(traj.n, np.zeros(len(y)), boundary=True)
    with np.errstate(divide="ignore"):
        vals = np.exp(pA * G + np.log(y))
    vals[y == 0.0] = 0.0
    return PathRate(traj.n, vals)
