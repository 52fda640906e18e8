"""Batches of seeded paths, finite-horizon classification, and absorption-frequency estimates."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from statistics import NormalDist

import numpy as np

from . import _jsonio
from ._validation import check_int, check_probability, check_seed
from .bandit import BanditParams, PathBatch, Trajectory, simulate_batch
from .schedule import StepSchedule

# paths per work unit; fixed so that results never depend on the worker count
CHUNK = 2048


class Outcome(str, Enum):
    AT_ZERO = "AtZero"
    AT_ONE = "AtOne"
    INTERIOR = "Interior"
    UNDECIDED = "Undecided"


OUTCOMES = (Outcome.AT_ZERO, Outcome.AT_ONE, Outcome.INTERIOR, Outcome.UNDECIDED)


@dataclass(frozen=True)
class ClassifierConfig:
    """Thresholds turning a state at the horizon into a limit class.

    With ``require_monotone_tail`` a path only counts as AtZero (AtOne) if its
    pure-descent (pure-ascent) flag is still alive; otherwise it is Undecided.
    """

    eps_zero: float = 1e-6
    eps_one: float = 1e-6
    interior_band: tuple[float, float] = (0.01, 0.99)
    require_monotone_tail: bool = False

    def __post_init__(self):
        lo, hi = (float(v) for v in self.interior_band)
        object.__setattr__(self, "interior_band", (lo, hi))
        # eps_one is compared with 1 - X, so it may sit below the spacing of doubles near 1
        if not (0.0 < self.eps_zero < lo < hi < 1.0 and self.eps_one > 0.0 and hi + self.eps_one < 1.0):
            raise ValueError(
                "classifier thresholds must satisfy 0 < eps_zero < lo < hi < 1 - eps_one < 1, "
                f"got eps_zero={self.eps_zero}, band={self.interior_band}, eps_one={self.eps_one}"
            )

    def to_dict(self):
        return {
            "eps_zero": self.eps_zero,
            "eps_one": self.eps_one,
            "interior_band": list(self.interior_band),
            "require_monotone_tail": self.require_monotone_tail,
        }


def classify_arrays(x, one_minus_x, descent, ascent, square_summable: bool, config: ClassifierConfig) -> np.ndarray:
    """Outcome index (position in ``OUTCOMES``) for every path; AtOne is tested on 1 - X."""
    x = np.asarray(x)
    y = np.asarray(one_minus_x)
    zero = x <= config.eps_zero
    one = y <= config.eps_one
    if config.require_monotone_tail:
        zero &= np.asarray(descent, dtype=bool)
        one &= np.asarray(ascent, dtype=bool)
    lo, hi = config.interior_band
    interior = (x >= lo) & (x <= hi) if square_summable else np.zeros(x.shape, dtype=bool)
    out = np.full(x.shape, 3, dtype=np.int8)
    out[interior] = 2
    out[one] = 1
    out[zero] = 0
    return out


def classify(traj: Trajectory, config: ClassifierConfig | None = None) -> Outcome:
    config = ClassifierConfig() if config is None else config
    code = classify_arrays(
        np.array([traj.x_final]),
        np.array([traj.one_minus_x_final]),
        np.array([traj.descent_alive]),
        np.array([traj.ascent_alive]),
        traj.schedule.square_summable,
        config,
    )[0]
    return OUTCOMES[code]


def wilson_interval(k: int, M: int, level: float = 0.99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion k/M."""
    if M <= 0:
        raise ValueError("M must be positive")
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    p = k / M
    z2 = z * z
    denom = 1.0 + z2 / M
    centre = (p + z2 / (2 * M)) / denom
    half = z / denom * math.sqrt(p * (1.0 - p) / M + z2 / (4 * M * M))
    return max(0.0, centre - half), min(1.0, centre + half)


# ---------------------------------------------------------------------------
# batches


def _chunks(M: int, chunk: int):
    return [(b, min(chunk, M - b)) for b in range(0, M, chunk)]


def _map(fn, items, workers: int):
    workers = check_int(workers, "workers", minimum=1)
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def simulate_terminal(
    params: BanditParams,
    schedule: StepSchedule,
    N: int,
    M: int,
    master_seed: int,
    workers: int = 1,
    track_drift: bool = False,
) -> PathBatch:
    """Terminal states of paths 0..M-1, in path order, computed chunk by chunk."""
    N = check_int(N, "N", minimum=1)
    M = check_int(M, "M", minimum=1)
    master_seed = check_seed(master_seed)
    schedule.gammas(N)  # fill the cache once before threads start
    parts = _map(
        lambda c: simulate_batch(params, schedule, N, master_seed, c[0], c[1], track_drift),
        _chunks(M, CHUNK),
        workers,
    )
    return PathBatch(
        0,
        np.concatenate([p.x_final for p in parts]),
        np.concatenate([p.one_minus_x_final for p in parts]),
        np.concatenate([p.descent_alive for p in parts]),
        np.concatenate([p.ascent_alive for p in parts]),
        np.concatenate([p.drift for p in parts]) if track_drift else None,
    )


@dataclass
class McEstimate:
    """Class counts of M paths at horizon N with Wilson intervals."""

    params: BanditParams
    schedule: StepSchedule
    N: int
    M: int
    seed: int
    counts: dict
    config: ClassifierConfig = field(default_factory=ClassifierConfig)
    level: float = 0.99
    paths: PathBatch | None = field(default=None, repr=False)

    def __post_init__(self):
        if sum(self.counts.values()) != self.M:
            raise ValueError("class counts must sum to M")

    def estimate(self, outcome: Outcome | str) -> float:
        return self.counts[Outcome(outcome).value] / self.M

    def interval(self, outcome: Outcome | str) -> tuple[float, float]:
        return wilson_interval(self.counts[Outcome(outcome).value], self.M, self.level)

    def half_width(self, outcome: Outcome | str) -> float:
        lo, hi = self.interval(outcome)
        return (hi - lo) / 2.0

    def merge(self, other: "McEstimate") -> "McEstimate":
        """Pool two disjoint batches of the same experiment (counts add)."""
        same = (
            self.params == other.params
            and self.schedule.to_dict() == other.schedule.to_dict()
            and self.N == other.N
            and self.seed == other.seed
            and self.config == other.config
        )
        if not same:
            raise ValueError("can only merge estimates of the same experiment")
        counts = {k: self.counts[k] + other.counts[k] for k in self.counts}
        return McEstimate(self.params, self.schedule, self.N, self.M + other.M, self.seed, counts, self.config, self.level)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "schedule": self.schedule.to_dict(),
            "N": self.N,
            "M": self.M,
            "seed": self.seed,
            "counts": dict(self.counts),
            "estimates": {o.value: self.estimate(o) for o in OUTCOMES},
            "ci": {o.value: list(self.interval(o)) for o in OUTCOMES},
            "level": self.level,
            "classifier": self.config.to_dict(),
        }

    def to_json(self) -> str:
        return _jsonio.dumps(self.to_dict())

    def paths_csv(self) -> str:
        if self.paths is None:
            raise ValueError("per-path data was not kept")
        p = self.paths
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "x_final", "one_minus_x_final", "descent_alive", "ascent_alive"])
        for i in range(len(p)):
            w.writerow([
                p.first + i, repr(float(p.x_final[i])), repr(float(p.one_minus_x_final[i])),
                int(p.descent_alive[i]), int(p.ascent_alive[i]),
            ])
        return buf.getvalue()


def _count(codes: np.ndarray) -> dict:
    c = np.bincount(codes, minlength=4)
    return {o.value: int(c[i]) for i, o in enumerate(OUTCOMES)}


def run_batch(
    params: BanditParams,
    schedule: StepSchedule,
    N: int,
    M: int,
    master_seed: int,
    config: ClassifierConfig | None = None,
    workers: int = 1,
    level: float = 0.99,
    keep_paths: bool = False,
) -> McEstimate:
    """Simulate M paths and count their classes; identical for any ``workers``."""
    config = ClassifierConfig() if config is None else config
    N = check_int(N, "N", minimum=1)
    M = check_int(M, "M", minimum=1)
    master_seed = check_seed(master_seed)
    level = check_level(level)
    ss = schedule.square_summable
    schedule.gammas(N)

    def unit(c):
        b = simulate_batch(params, schedule, N, master_seed, c[0], c[1])
        codes = classify_arrays(b.x_final, b.one_minus_x_final, b.descent_alive, b.ascent_alive, ss, config)
        return _count(codes), (b if keep_paths else None)

    results = _map(unit, _chunks(M, CHUNK), workers)
    total = {o.value: 0 for o in OUTCOMES}
    for counts, _ in results:
        for k, v in counts.items():
            total[k] += v
    paths = None
    if keep_paths:
        parts = [b for _, b in results]
        paths = PathBatch(
            0,
            np.concatenate([p.x_final for p in parts]),
            np.concatenate([p.one_minus_x_final for p in parts]),
            np.concatenate([p.descent_alive for p in parts]),
            np.concatenate([p.ascent_alive for p in parts]),
        )
    return McEstimate(params, schedule, N, M, master_seed, total, config, level, paths)


# ---------------------------------------------------------------------------
# moment-type estimates


@dataclass(frozen=True)
class InteriorMassEstimate:
    mean: float
    se: float
    formula: float
    M: int

    @property
    def z(self) -> float:
        return (self.mean - self.formula) / self.se if self.se > 0 else (0.0 if self.mean == self.formula else math.inf)

    def to_dict(self):
        return {"mean": self.mean, "se": self.se, "formula": self.formula, "M": self.M}


def estimate_interior_mass(
    params: BanditParams, schedule: StepSchedule, N: int, M: int, master_seed: int, workers: int = 1
) -> InteriorMassEstimate:
    """Sample mean of X_N (1 - X_N) next to its exact value x0(1-x0) prod (1 - p gamma_k^2)."""
    from .bounds import interior_mass_formula

    if params.pA != params.pB:
        raise ValueError("the interior-mass identity needs pA == pB")
    b = simulate_terminal(params, schedule, N, M, master_seed, workers)
    h = b.x_final * b.one_minus_x_final
    se = float(np.std(h, ddof=1) / math.sqrt(M)) if M > 1 else math.inf
    return InteriorMassEstimate(float(np.mean(h)), se, interior_mass_formula(params.x0, params.pA, schedule, N), M)


def jackknife_mean_se(values: np.ndarray) -> float:
    """Leave-one-out jackknife standard error of the sample mean."""
    v = np.asarray(values, dtype=float)
    M = len(v)
    if M < 2:
        return math.inf
    loo = (v.sum() - v) / (M - 1)
    return float(math.sqrt((M - 1) / M * np.sum((loo - loo.mean()) ** 2)))


@dataclass(frozen=True)
class MomentEstimate:
    orders: tuple[int, ...]
    values: tuple[float, ...]
    se: tuple[float, ...]
    M: int

    def to_dict(self):
        return {"orders": list(self.orders), "values": list(self.values), "se": list(self.se), "M": self.M}


def moments_from_sample(x: np.ndarray, m_max: int) -> MomentEstimate:
    m_max = check_int(m_max, "m_max", minimum=1)
    if m_max > 8:
        raise ValueError("m_max must be <= 8")
    orders = tuple(range(1, m_max + 1))
    vals, ses = [], []
    for m in orders:
        p = np.asarray(x, dtype=float) ** m
        vals.append(float(p.mean()))
        ses.append(jackknife_mean_se(p))
    return MomentEstimate(orders, tuple(vals), tuple(ses), len(x))


def estimate_moments(
    params: BanditParams, schedule: StepSchedule, N: int, M: int, master_seed: int, m_max: int = 4, workers: int = 1
) -> MomentEstimate:
    """E[X_N^m], m = 1..m_max, with jackknife standard errors."""
    if m_max > 8:
        raise ValueError("m_max must be <= 8")
    b = simulate_terminal(params, schedule, N, M, master_seed, workers)
    return moments_from_sample(b.x_final, m_max)


@dataclass(frozen=True)
class DriftIdentity:
    """Mean of X_N - x0 - pi sum_n gamma_{n+1} X_n (1 - X_n); zero in expectation."""

    mean: float
    se: float
    M: int


def estimate_drift_identity(
    params: BanditParams, schedule: StepSchedule, N: int, M: int, master_seed: int, workers: int = 1
) -> DriftIdentity:
    b = simulate_terminal(params, schedule, N, M, master_seed, workers, track_drift=True)
    r = b.x_final - params.x0 - params.pi * b.drift
    return DriftIdentity(float(r.mean()), float(np.std(r, ddof=1) / math.sqrt(M)), M)


def check_level(level: float) -> float:
    level = check_probability(level, "level")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    return level
