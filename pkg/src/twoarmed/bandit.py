"""Seeded simulation of the two-armed bandit (linear reward-inaction) recursion.

    X_{n+1} = X_n + gamma_{n+1} ((1 - X_n) 1{U <= X_n, V <= pA} - X_n 1{U > X_n, V <= pB})

Internally a state is held as ``(s, on_x)``: when ``on_x`` is true ``s = X_n``
(and X_n <= 1/2), otherwise ``s = 1 - X_n``.  The smaller side is always the
one stored, so values near 1 keep full relative precision and the state stays
strictly inside (0, 1) unless it underflows.  Each update is a monotone
rounded map of ``s``; switching sides happens only past 1/2, where
``1 - s`` is exact.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from ._validation import check_int, check_probability, check_seed
from .noise import path_keys, split_seed, uv_pair
from .schedule import StepSchedule

BLOCK = 64


@dataclass(frozen=True)
class BanditParams:
    """Reward probabilities of the two arms and the starting share of arm A."""

    pA: float
    pB: float
    x0: float

    def __post_init__(self):
        check_probability(self.pA, "pA")
        check_probability(self.pB, "pB")
        check_probability(self.x0, "x0")

    @property
    def pi(self) -> float:
        return self.pA - self.pB

    def to_dict(self):
        return {"pA": float(self.pA), "pB": float(self.pB), "x0": float(self.x0)}


# ---------------------------------------------------------------------------
# kernels


@nb.njit(inline="always")
def _advance(s, on_x, u, v, pa, pb, g, om):
    # returns (s, on_x, arm A checked, X before the step); bitwise ops keep it branch-free
    x = s if on_x else 1.0 - s
    chk_a = u <= x
    up = chk_a & (v <= pa)
    dn = (~chk_a) & (v <= pb)
    grow = (up & on_x) | (dn & ~on_x)
    shrink = (dn & on_x) | (up & ~on_x)
    s_new = g + om * s if grow else s
    s_new = om * s if shrink else s_new
    flip = s_new > 0.5
    s_new = 1.0 - s_new if flip else s_new
    return s_new, on_x ^ flip, chk_a, x


@nb.njit(cache=True)
def _simulate_one(x0, pa, pb, gam, k0, k1, thin, n_out, x_out, y_out):
    N = gam.shape[0]
    on_x = x0 <= 0.5
    s = x0 if on_x else 1.0 - x0
    descent = True
    ascent = True
    n_out[0] = 0
    x_out[0] = x0
    y_out[0] = 1.0 - x0
    j = 1
    for n in range(1, N + 1):
        u, v = uv_pair(n, k0, k1)
        g = gam[n - 1]
        s, on_x, chk_a, xprev = _advance(s, on_x, u, v, pa, pb, g, 1.0 - g)
        if not (u > xprev):
            descent = False
        if not (u < xprev):
            ascent = False
        if n % thin == 0 or n == N:
            n_out[j] = n
            if on_x:
                x_out[j] = s
                y_out[j] = 1.0 - s
            else:
                x_out[j] = 1.0 - s
                y_out[j] = s
            j += 1
    return j, descent, ascent


@nb.njit(cache=True, nogil=True)
def _simulate_block(x0, pa, pb, gam, k0s, k1s, x_fin, y_fin, descent, ascent, drift, track_drift):
    """Simulate len(k0s) paths interleaved step by step; results written in place."""
    P = k0s.shape[0]
    N = gam.shape[0]
    on0 = x0 <= 0.5
    s0 = x0 if on0 else 1.0 - x0
    s = np.full(P, s0)
    on_x = np.full(P, on0)
    for p in range(P):
        descent[p] = True
        ascent[p] = True
        drift[p] = 0.0
    for n in range(1, N + 1):
        g = gam[n - 1]
        om = 1.0 - g
        c = np.uint64(n)
        live = False
        for p in range(P):
            u, v = uv_pair(c, k0s[p], k1s[p])
            sp, op, chk_a, xprev = _advance(s[p], on_x[p], u, v, pa, pb, g, om)
            if track_drift:
                drift[p] += g * xprev * (1.0 - xprev)
            descent[p] &= u > xprev
            ascent[p] &= u < xprev
            s[p] = sp
            on_x[p] = op
            live |= sp != 0.0
        # s == 0 exactly is a fixed point of every update and of both flags
        if not live:
            break
    for p in range(P):
        if on_x[p]:
            x_fin[p] = s[p]
            y_fin[p] = 1.0 - s[p]
        else:
            x_fin[p] = 1.0 - s[p]
            y_fin[p] = s[p]


def step(x: float, u: float, v: float, params: BanditParams, gamma_n: float) -> float:
    """One update of the recursion (A checked iff u <= x, rewarded iff v <= p).

    Uses the same rounded arithmetic as the simulation kernels, so iterating
    ``step`` reproduces a simulated path bit for bit while X_n <= 1/2.
    """
    on_x = x <= 0.5
    s = x if on_x else 1.0 - x
    s, on_x, _, _ = _advance.py_func(s, on_x, u, v, params.pA, params.pB, gamma_n, 1.0 - gamma_n)
    return s if on_x else 1.0 - s


@dataclass
class PathBatch:
    """Terminal states and flags of paths ``first .. first + len - 1`` of a batch."""

    first: int
    x_final: np.ndarray
    one_minus_x_final: np.ndarray
    descent_alive: np.ndarray
    ascent_alive: np.ndarray
    drift: np.ndarray | None = None

    def __len__(self):
        return len(self.x_final)


def simulate_batch(
    params: BanditParams,
    schedule: StepSchedule,
    N: int,
    master_seed: int,
    first: int,
    count: int,
    track_drift: bool = False,
) -> PathBatch:
    """Terminal states of ``count`` independent paths with seeds hash(master_seed, index)."""
    N = check_int(N, "N", minimum=1)
    count = check_int(count, "count")
    gam = np.ascontiguousarray(schedule.gammas(N))
    k0, k1 = path_keys(master_seed, first, count)
    xf = np.empty(count)
    yf = np.empty(count)
    dsc = np.empty(count, dtype=np.bool_)
    asc = np.empty(count, dtype=np.bool_)
    dr = np.empty(count)
    for b in range(0, count, BLOCK):
        e = min(b + BLOCK, count)
        _simulate_block(
            params.x0, params.pA, params.pB, gam, k0[b:e], k1[b:e],
            xf[b:e], yf[b:e], dsc[b:e], asc[b:e], dr[b:e], track_drift,
        )
    return PathBatch(first, xf, yf, dsc, asc, dr if track_drift else None)


# ---------------------------------------------------------------------------
# single trajectories


@dataclass(frozen=True, eq=False)
class Trajectory:
    params: BanditParams
    schedule: StepSchedule
    seed: int
    N: int
    thin: int
    n: np.ndarray
    x: np.ndarray
    one_minus_x: np.ndarray
    descent_alive: bool
    ascent_alive: bool

    @property
    def schedule_id(self) -> str:
        return self.schedule.id

    @property
    def x_final(self) -> float:
        return float(self.x[-1])

    @property
    def one_minus_x_final(self) -> float:
        return float(self.one_minus_x[-1])

    @property
    def samples(self) -> list[tuple[int, float]]:
        return list(zip(self.n.tolist(), self.x.tolist()))

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "N": self.N,
            "x_final": self.x_final,
            "one_minus_x_final": self.one_minus_x_final,
            "flags": {"descent_alive": self.descent_alive, "ascent_alive": self.ascent_alive},
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)

    def to_csv(self, complement: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "x", "one_minus_x"] if complement else ["n", "x"])
        for i in range(len(self.n)):
            row = [int(self.n[i]), repr(float(self.x[i]))]
            if complement:
                row.append(repr(float(self.one_minus_x[i])))
            w.writerow(row)
        return buf.getvalue()


def default_thin(N: int) -> int:
    return max(1, math.ceil(N / 1000))


def simulate_path(
    params: BanditParams, schedule: StepSchedule, N: int, seed: int, thin: int | None = None
) -> Trajectory:
    """Run N steps from ``params.x0`` with noise stream ``seed``; keep every ``thin``-th state."""
    N = check_int(N, "N", minimum=1)
    seed = check_seed(seed)
    thin = default_thin(N) if thin is None else check_int(thin, "thin", minimum=1)
    gam = np.ascontiguousarray(schedule.gammas(N))
    size = N // thin + 2
    n_out = np.empty(size, dtype=np.int64)
    x_out = np.empty(size)
    y_out = np.empty(size)
    k0, k1 = split_seed(seed)
    j, descent, ascent = _simulate_one(params.x0, params.pA, params.pB, gam, k0, k1, thin, n_out, x_out, y_out)
    x = x_out[:j].copy()
    y = y_out[:j].copy()
    if not (np.all(x >= 0.0) and np.all(x <= 1.0) and np.all(y >= 0.0) and np.all(y <= 1.0)):
        raise RuntimeError("internal error: simulated state left [0, 1]")
    for arr in (x, y, n_out):
        arr.setflags(write=False)
    return Trajectory(params, schedule, seed, N, thin, n_out[:j].copy(), x, y, bool(descent), bool(ascent))


def coupled_pair(
    x: float,
    x_prime: float,
    pA: float,
    pA_prime: float,
    pB: float,
    schedule: StepSchedule,
    N: int,
    seed: int,
    thin: int = 1,
) -> tuple[Trajectory, Trajectory]:
    """Two paths driven by the same (U_n, V_n) stream; X_n <= X'_n for every n."""
    if x > x_prime:
        raise ValueError(f"coupling needs x <= x', got {x} > {x_prime}")
    if pA > pA_prime:
        raise ValueError(f"coupling needs pA <= pA', got {pA} > {pA_prime}")
    lo = simulate_path(BanditParams(pA, pB, x), schedule, N, seed, thin)
    hi = simulate_path(BanditParams(pA_prime, pB, x_prime), schedule, N, seed, thin)
    return lo, hi


def monotone_flags(x0: float, pairs: np.ndarray, params: BanditParams, schedule: StepSchedule) -> tuple[bool, bool]:
    """Replay the monotone-event conditions on a noise prefix.

    descent: U_n > x0 prod_{k<n} (1 - gamma_k 1{V_k <= pB}) for every n so far;
    ascent:  U_n < 1 - (1 - x0) prod_{k<n} (1 - gamma_k 1{V_k <= pA}) for every n so far.
    Computed from the products directly, without running the recursion.
    """
    x0 = check_probability(x0, "x0")
    pairs = np.asarray(pairs, dtype=float)
    n = len(pairs)
    gam = schedule.gammas(n) if n else np.empty(0)
    prod_b = 1.0
    prod_a = 1.0
    descent = ascent = True
    for k in range(n):
        u, v = pairs[k]
        if not u > x0 * prod_b:
            descent = False
        if not u < 1.0 - (1.0 - x0) * prod_a:
            ascent = False
        if not (descent or ascent):
            break
        prod_b *= 1.0 - gam[k] * (v <= params.pB)
        prod_a *= 1.0 - gam[k] * (v <= params.pA)
    return descent, ascent
