"""Constant-step transition operator on a grid and an absorption-probability solver.

For a constant step gamma the chain X_n is time-homogeneous with kernel

    P f(x) = pA x f(x + gamma(1-x)) + pB (1-x) f(x(1-gamma)) + (1 - pA x - pB(1-x)) f(x).

Functions live on a uniform grid of [0, 1] and are evaluated off-grid by
piecewise-linear interpolation.  ``u(x) = P_x(X_inf = 1)`` is the harmonic
function of P with u(0) = 0, u(1) = 1; it is found by iterating u <- P u
from u(x) = x.  Because interpolation reproduces affine functions,
P(id) = id + pi gamma h on the grid, so the iterates satisfy
u_k = id + pi gamma sum_{j<k} P^j h there: the same series ``psi_neumann``
sums directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from ._validation import check_int, check_probability, check_step

DEFAULT_POINTS = 4097


class MaxIterExceeded(RuntimeError):
    pass


class MonotonicityViolation(RuntimeError):
    pass


class NonConvergence(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or len(g) < 2 or g[0] != 0.0 or g[-1] != 1.0 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing from 0 to 1")
        if v.shape != g.shape or not np.all(np.isfinite(v)):
            raise ValueError("values must be finite, one per grid point")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)

    @classmethod
    def from_callable(cls, func, points: int = DEFAULT_POINTS) -> "GridFunction":
        g = uniform_grid(points)
        return cls(g, np.asarray(func(g), dtype=float) * np.ones_like(g))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def uniform_grid(points: int = DEFAULT_POINTS) -> np.ndarray:
    points = check_int(points, "points", minimum=2)
    g = np.linspace(0.0, 1.0, points)
    g[-1] = 1.0
    return g


def _check(gamma, pA, pB):
    return check_step(gamma), check_probability(pA, "pA"), check_probability(pB, "pB")


def p_gamma_apply(f: GridFunction, gamma: float, pA: float, pB: float) -> GridFunction:
    """(P f)(x) at every grid point, off-grid values by interpolation of ``f``."""
    gamma, pA, pB = _check(gamma, pA, pB)
    x = f.grid
    up = x + gamma * (1.0 - x)
    dn = x * (1.0 - gamma)
    v = pA * x * f(up) + pB * (1.0 - x) * f(dn) + (1.0 - pA * x - pB * (1.0 - x)) * f.values
    return GridFunction(x, v)


def q_gamma_apply(g: GridFunction, gamma: float, pA: float, pB: float) -> GridFunction:
    """The conjugate operator: P(g h) = h Q(g) with h(x) = x(1 - x)."""
    gamma, pA, pB = _check(gamma, pA, pB)
    x = g.grid
    up = x + gamma * (1.0 - x)
    dn = x * (1.0 - gamma)
    v = (1.0 - gamma) * (pA * up * g(up) + pB * (1.0 - dn) * g(dn)) + (1.0 - pA * x - pB * (1.0 - x)) * g.values
    return GridFunction(x, v)


def h_function(points: int = DEFAULT_POINTS) -> GridFunction:
    g = uniform_grid(points)
    return GridFunction(g, g * (1.0 - g))


def transition_matrix(grid: np.ndarray, gamma: float, pA: float, pB: float) -> sps.csr_matrix:
    """Sparse matrix of P under linear interpolation on ``grid``."""
    gamma, pA, pB = _check(gamma, pA, pB)
    n = len(grid)
    rows, cols, vals = [], [], []
    idx = np.arange(n)

    def add(target, weight):
        j = np.clip(np.searchsorted(grid, target, side="right") - 1, 0, n - 2)
        fr = (target - grid[j]) / (grid[j + 1] - grid[j])
        rows.extend([idx, idx])
        cols.extend([j, j + 1])
        vals.extend([weight * (1.0 - fr), weight * fr])

    add(grid + gamma * (1.0 - grid), pA * grid)
    add(grid * (1.0 - gamma), pB * (1.0 - grid))
    add(grid, 1.0 - pA * grid - pB * (1.0 - grid))
    m = sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    m.sum_duplicates()
    return m


@dataclass(frozen=True, eq=False)
class NeumannResult:
    """psi = sum_{n < terms} P^n h on the grid, with the size of the last term kept."""

    psi: GridFunction
    terms: int
    last_term: float
    tail_estimate: float

    def __call__(self, x):
        return self.psi(x)


def psi_neumann_grid(
    gamma: float, pA: float, pB: float, points: int = DEFAULT_POINTS, tol: float = 1e-14, depth: int = 10**6
) -> NeumannResult:
    """Truncated series sum_n P^n h, stopped once sup P^n h < tol."""
    gamma, pA, pB = _check(gamma, pA, pB)
    if not pA > pB:
        raise ValueError("the series converges only for pA > pB")
    depth = check_int(depth, "depth", minimum=1)
    term = h_function(points)
    acc = term.values.copy()
    prev = term.sup_norm()
    ratio = 0.0
    for n in range(1, depth):
        term = p_gamma_apply(term, gamma, pA, pB)
        size = term.sup_norm()
        if size < tol:
            # geometric extrapolation from the observed contraction
            tail = size * ratio / (1.0 - ratio) if ratio < 1.0 else np.inf
            return NeumannResult(GridFunction(term.grid, acc), n, size, float(tail))
        acc += term.values
        ratio = size / prev if prev > 0 else 0.0
        prev = size
    raise NonConvergence(f"last term {prev:.3g} still above {tol:g} after {depth} terms")


def psi_neumann(gamma: float, pA: float, pB: float, x, depth: int = 10**6, points: int = DEFAULT_POINTS, tol: float = 1e-14):
    """psi(x) = E_x sum_n h(X_n), evaluated by interpolation of the grid series."""
    res = psi_neumann_grid(gamma, pA, pB, points, tol, depth)
    return res(x), res


@dataclass(frozen=True, eq=False)
class AbsorptionSolution:
    gamma: float
    pA: float
    pB: float
    u: GridFunction
    iterations: int
    residual: float

    def __call__(self, x):
        return self.u(x)

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "pA": self.pA,
            "pB": self.pB,
            "points": len(self.u.grid),
            "iterations": self.iterations,
            "residual": self.residual,
        }

    def to_csv(self) -> str:
        lines = ["x,u"]
        lines += [f"{float(a)!r},{float(b)!r}" for a, b in zip(self.u.grid, self.u.values)]
        return "\n".join(lines) + "\n"


def absorption_solve(
    gamma: float,
    pA: float,
    pB: float,
    points: int = DEFAULT_POINTS,
    tol: float = 1e-10,
    max_iter: int = 10**6,
) -> AbsorptionSolution:
    """Iterate u <- P u from u(x) = x until sup |P u - u| <= tol."""
    gamma, pA, pB = _check(gamma, pA, pB)
    if not pA > pB:
        raise ValueError("expected pA > pB")
    max_iter = check_int(max_iter, "max_iter", minimum=1)
    grid = uniform_grid(points)
    P = transition_matrix(grid, gamma, pA, pB)
    u = grid.copy()
    for it in range(1, max_iter + 1):
        v = P @ u
        v[0], v[-1] = 0.0, 1.0
        res = float(np.max(np.abs(v - u)))
        u = v
        if res <= tol:
            break
    else:
        raise MaxIterExceeded(f"residual {res:.3g} > {tol:g} after {max_iter} iterations")
    drop = float(np.max(-np.diff(u)))
    if drop > 10 * tol:
        raise MonotonicityViolation(f"solution decreases by {drop:.3g} somewhere on the grid")
    return AbsorptionSolution(gamma, pA, pB, GridFunction(grid, u), it, res)
