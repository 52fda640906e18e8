"""Two-colour Pólya urn driven by the same uniform stream as the bandit.

Start with ``r`` red and ``b`` black balls; at time n+1 a ball is drawn
(black iff U_{n+1} <= X_n, the current black proportion) and returned with one
more ball of its colour.  Counts are integers; proportions are derived.
With pA = pB = 1, x0 = b/(r+b) and gamma_n = 1/(r+b+n) the bandit recursion
reproduces the proportion process.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

import numba as nb
import numpy as np

from ._validation import check_int, check_seed
from .bandit import BanditParams, simulate_path
from .noise import DriverNoise, path_keys, uv_pair
from .schedule import Custom

_TWO54 = 2**54


def _draw_black(u: float, beta: int, total: int) -> bool:
    # u = (2w + 1) 2^-54 exactly, so u <= beta/total is an integer comparison
    return int(u * _TWO54) * total <= beta * _TWO54


@dataclass(frozen=True, eq=False)
class UrnPath:
    r: int
    b: int
    beta: np.ndarray  # black count at n = 0..N

    @property
    def N(self) -> int:
        return len(self.beta) - 1

    @property
    def n(self) -> np.ndarray:
        return np.arange(self.N + 1)

    @property
    def totals(self) -> np.ndarray:
        return self.r + self.b + self.n

    @property
    def x(self) -> np.ndarray:
        return self.beta / self.totals

    def fractions(self) -> list[Fraction]:
        return [Fraction(int(k), int(t)) for k, t in zip(self.beta, self.totals)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "beta", "x"])
        for n, k, x in zip(self.n, self.beta, self.x):
            w.writerow([int(n), int(k), repr(float(x))])
        return buf.getvalue()


def _check_rb(r, b):
    return check_int(r, "r", minimum=1), check_int(b, "b", minimum=1)


def urn_path(r: int, b: int, N: int, seed: int) -> UrnPath:
    """Black counts beta_0..beta_N of an urn driven by ``DriverNoise(seed)``."""
    r, b = _check_rb(r, b)
    N = check_int(N, "N")
    seed = check_seed(seed)
    beta = np.empty(N + 1, dtype=np.int64)
    beta[0] = b
    if N:
        u = DriverNoise(seed).pairs(N)[:, 0]
        k = b
        for n in range(N):
            if _draw_black(float(u[n]), k, r + b + n):
                k += 1
            beta[n + 1] = k
    return UrnPath(r, b, beta)


def urn_schedule(r: int, b: int, N: int) -> Custom:
    """gamma_n = 1/(r+b+n) for n = 1..N."""
    r, b = _check_rb(r, b)
    k = np.arange(1, N + 1, dtype=float)
    tail = 1.0 / (r + b + N)  # sum_{j > N} 1/(r+b+j)^2 <= 1/(r+b+N)
    return Custom(values=1.0 / (r + b + k), tail_sq_bound=tail, name=f"urn(r={r},b={b})")


def urn_bandit_equivalence(r: int, b: int, N: int, seed: int) -> float:
    """max_n |X_n(urn) - X_n(bandit)| over n <= N on a shared noise stream."""
    r, b = _check_rb(r, b)
    N = check_int(N, "N")
    if N == 0:
        return 0.0
    urn = urn_path(r, b, N, seed)
    traj = simulate_path(BanditParams(1.0, 1.0, b / (r + b)), urn_schedule(r, b, N), N, seed, thin=1)
    return float(np.max(np.abs(urn.x - traj.x)))


def exact_bandit_replay(r: int, b: int, N: int, seed: int) -> list[Fraction]:
    """The bandit recursion with pA = pB = 1 in exact rational arithmetic."""
    r, b = _check_rb(r, b)
    pairs = DriverNoise(check_seed(seed)).pairs(check_int(N, "N"))
    x = Fraction(b, r + b)
    out = [x]
    for n in range(N):
        u = Fraction(float(pairs[n, 0]))
        g = Fraction(1, r + b + n + 1)
        x = x + g * ((1 - x) if u <= x else -x)
        out.append(x)
    return out


@nb.njit(cache=True, nogil=True)
def _final_counts(r, b, N, k0s, k1s, out):
    for p in range(k0s.shape[0]):
        k = b
        for n in range(N):
            u, _ = uv_pair(n + 1, k0s[p], k1s[p])
            if u * (r + b + n) <= k:
                k += 1
        out[p] = k


def urn_final_counts(r: int, b: int, N: int, M: int, master_seed: int) -> np.ndarray:
    """beta_N for M independent urns (path seeds derived as in the bandit batches).

    The draw test multiplies in floating point; it can differ from the exact
    comparison only when u lies within one rounding of beta/total.
    """
    r, b = _check_rb(r, b)
    N = check_int(N, "N")
    M = check_int(M, "M", minimum=1)
    k0, k1 = path_keys(master_seed, 0, M)
    out = np.empty(M, dtype=np.int64)
    _final_counts(r, b, N, k0, k1, out)
    return out
