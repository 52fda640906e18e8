"""scikit-learn style wrappers: start values in, absorption probabilities out."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_probability, check_start_values, check_step
from .bandit import BanditParams
from .markov import DEFAULT_POINTS, absorption_solve
from .montecarlo import OUTCOMES, ClassifierConfig, run_batch
from .schedule import Constant, StepSchedule


class OperatorAbsorption(RegressorMixin, BaseEstimator):
    """x -> P_x(X_inf = 1) for a constant step, from the grid operator solver.

    ``fit`` solves once; ``predict`` interpolates the solution at the start values.

    >>> est = OperatorAbsorption(gamma=0.1, pA=0.6, pB=0.4).fit()
    >>> float(est.predict([[0.0], [1.0]])[1])
    1.0
    """

    def __init__(self, gamma=0.1, pA=0.6, pB=0.4, points=DEFAULT_POINTS, tol=1e-10, max_iter=10**6):
        self.gamma = gamma
        self.pA = pA
        self.pB = pB
        self.points = points
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X=None, y=None):
        check_step(self.gamma)
        self.solution_ = absorption_solve(self.gamma, self.pA, self.pB, self.points, self.tol, self.max_iter)
        self.n_iter_ = self.solution_.iterations
        return self

    def predict(self, X):
        check_is_fitted(self, "solution_")
        return self.solution_(check_start_values(X))


class MonteCarloAbsorption(TransformerMixin, BaseEstimator):
    """Monte Carlo class frequencies for each start value.

    ``transform`` returns one row per start value with the frequencies of
    (AtZero, AtOne, Interior, Undecided); ``predict`` returns the AtOne column.
    All rows share the master seed, so rows are driven by common noise.
    """

    def __init__(self, pA=0.6, pB=0.4, schedule=None, N=10_000, M=1_000, seed=0, workers=1, config=None):
        self.pA = pA
        self.pB = pB
        self.schedule = schedule
        self.N = N
        self.M = M
        self.seed = seed
        self.workers = workers
        self.config = config

    def _schedule(self) -> StepSchedule:
        return Constant(0.1) if self.schedule is None else self.schedule

    def fit(self, X=None, y=None):
        check_probability(self.pA, "pA")
        check_probability(self.pB, "pB")
        self.schedule_ = self._schedule()
        self.config_ = ClassifierConfig() if self.config is None else self.config
        self.estimates_ = {}
        return self

    def transform(self, X):
        check_is_fitted(self, "schedule_")
        xs = check_start_values(X)
        out = np.empty((len(xs), len(OUTCOMES)))
        for i, x0 in enumerate(xs):
            est = run_batch(
                BanditParams(self.pA, self.pB, float(x0)), self.schedule_, self.N, self.M, self.seed,
                self.config_, self.workers,
            )
            self.estimates_[float(x0)] = est
            out[i] = [est.estimate(o) for o in OUTCOMES]
        return out

    def predict(self, X):
        return self.transform(X)[:, 1]
