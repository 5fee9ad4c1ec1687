"""scikit-learn style front end: a receding-horizon controller as an estimator.

``fit`` resolves and validates the system; ``predict`` maps each row of ``X``
(one state per row) to the mode the planner applies there; ``transform`` returns
the planned value and reached horizon per state.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .planner import check_budget, check_gamma, first_input, plan
from .sim import closed_loop
from .system import SwitchedSystem, make_system


class OPminController(BaseEstimator):
    """Optimistic planner wrapped as an estimator.

    Parameters
    ----------
    system : str or SwitchedSystem
        Registered system name or a system instance.
    system_params : dict, optional
        Keyword arguments passed to the registered constructor.
    gamma : float
        Discount factor in ``(0, 1]``.
    budget : int
        Planner budget ``B >= 1``.
    """

    def __init__(self, system="cubic_integrator", system_params=None, gamma=1.0, budget=100):
        self.system = system
        self.system_params = system_params
        self.gamma = gamma
        self.budget = budget

    def fit(self, X=None, y=None):
        check_gamma(self.gamma)
        check_budget(self.budget)
        if isinstance(self.system, SwitchedSystem):
            self.system_ = self.system
        else:
            self.system_ = make_system(self.system, **(self.system_params or {}))
        self.n_features_in_ = self.system_.state_dim
        if X is not None:
            self._check_X(X)
        return self

    def _check_X(self, X):
        X = check_array(X, dtype=np.float64, ensure_all_finite=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but the system state has {self.n_features_in_}")
        return X

    def plan_batch(self, X):
        check_is_fitted(self, "system_")
        X = self._check_X(X)
        return [plan(self.system_, x, self.gamma, self.budget) for x in X]

    def predict(self, X):
        """Mode applied at each state (first element of the planned sequence)."""
        return np.array([first_input(r) for r in self.plan_batch(X)], dtype=int)

    def transform(self, X):
        """Columns ``(planned value, reached horizon)`` for each state."""
        return np.array([(r.value, r.horizon) for r in self.plan_batch(X)], dtype=float)

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)

    def simulate(self, x0, steps):
        check_is_fitted(self, "system_")
        return closed_loop(self.system_, x0, self.gamma, self.budget, steps)
