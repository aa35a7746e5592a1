"""scikit-learn style wrapper around the gradient formation flow.

Rows of ``X`` are initial states.  ``transform`` maps them to the states the
flow settles in, ``predict`` labels each settled state by its equilibrium
class, and ``score`` is the fraction of rows reaching the target shape.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import NEWTON_TOL, InitSampler, classify, refine_equilibrium, trial_rng
from .config import Scenario, parse_edge_key
from .dynamics import IntegratorConfig, TerminalReason, integrate
from .exceptions import InvalidArgumentError, RefinementFailedError

UNRESOLVED = "Unresolved"


class FormationFlow(TransformerMixin, BaseEstimator):
    """Distance-based gradient formation control as a transformer.

    Parameters
    ----------
    distances : dict
        Squared target distances keyed by ``(i, j)`` or ``"i-j"`` (1-based).
        For ``law="locked"`` these are the planar targets; they are lifted by
        ``alpha`` at the virtual vertex.
    law : {"locked", "plain2d", "plain3d"}
    alpha : float
        Lift height for the locked law, also the default initial virtual
        coordinate in :meth:`sample_initial`.
    """

    def __init__(self, distances=None, law="locked", alpha=1.0, virtual_vertex=None,
                 dt=1e-3, t_max=200.0, grad_tol=1e-8, method="rk4", newton_tol=NEWTON_TOL):
        self.distances = distances
        self.law = law
        self.alpha = alpha
        self.virtual_vertex = virtual_vertex
        self.dt = dt
        self.t_max = t_max
        self.grad_tol = grad_tol
        self.method = method
        self.newton_tol = newton_tol

    def _scenario(self) -> Scenario:
        if not self.distances:
            raise InvalidArgumentError("distances must be a non-empty mapping")
        dist = {parse_edge_key(k) if isinstance(k, str) else tuple(sorted(k)): float(v)
                for k, v in dict(self.distances).items()}
        n = max(max(e) for e in dist)
        return Scenario("estimator", self.law, n, dist,
                        alpha=self.alpha if self.law == "locked" else None,
                        virtual_vertex=self.virtual_vertex if self.law == "locked" else None,
                        integrator=IntegratorConfig(dt=self.dt, t_max=self.t_max,
                                                    grad_tol=self.grad_tol, method=self.method,
                                                    record_every=10 ** 9))

    def fit(self, X=None, y=None):
        scenario = self._scenario()
        self.system_ = scenario.system()
        self.integrator_ = scenario.integrator
        self.n_features_in_ = self.system_.state_size
        if X is not None:
            self._validate(X)
        return self

    def _validate(self, X):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def _settle(self, x0):
        traj = integrate(self.system_, x0, self.integrator_)
        return traj.final_state, traj.terminal_reason is TerminalReason.GRADIENT_BELOW_TOL

    def transform(self, X):
        check_is_fitted(self, "system_")
        X = self._validate(X)
        return np.array([self._settle(x)[0] for x in X])

    def predict(self, X):
        check_is_fitted(self, "system_")
        X = self._validate(X)
        labels = []
        for x0 in X:
            x, converged = self._settle(x0)
            if not converged:
                labels.append(UNRESOLVED)
                continue
            try:
                x = refine_equilibrium(self.system_, x, self.newton_tol)
            except RefinementFailedError as exc:
                x = exc.best
            labels.append(classify(self.system_, x, grad_tol=self.grad_tol).classification.value)
        return np.array(labels, dtype=object)

    def score(self, X, y=None):
        return float(np.mean(self.predict(X) == "Correct"))

    def sample_initial(self, n_samples, lo=-5.0, hi=5.0, random_state=0):
        """Initial states drawn as in ``monte_carlo_basin`` (trial k of the seed)."""
        check_is_fitted(self, "system_")
        sampler = InitSampler(lo, hi, self.alpha if self.system_.is_locked else None)
        return np.array([sampler(self.system_, trial_rng(random_state, k)) for k in range(n_samples)])
