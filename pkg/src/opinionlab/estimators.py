"""scikit-learn style wrappers around the long-run solver and the game."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .game import nash_solve, social_optimum, symmetry_classes
from .loss import analytic_loss
from .longrun import solve_longrun
from .net import Network
from .rules import NoiseSpec, RuleProfile, SignalModel


def _as_network(A):
    return A if isinstance(A, Network) else Network(A)


class FJOpinionModel(TransformerMixin, BaseEstimator):
    """Long-run opinions for a fixed network and seed weights.

    ``fit(A)`` factors the resolvent; ``transform(X, xi)`` maps seed
    realizations (rows of X) to limit opinions.
    """

    def __init__(self, m=0.5, gamma=1.0, varpi=0.0):
        self.m = m
        self.gamma = gamma
        self.varpi = varpi

    def fit(self, A, y=None):
        net = _as_network(A)
        self.network_ = net
        self.n_features_in_ = net.n
        self.rules_ = RuleProfile.build(net.n, self.m, self.gamma)
        sol = solve_longrun(net, self.rules_.m)
        self.seed_weights_ = sol.P
        self.error_weights_ = sol.E
        return self

    def transform(self, X, xi=None):
        check_is_fitted(self, "seed_weights_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        out = X @ self.seed_weights_.T
        if xi is not None:
            out = out + check_array(xi) @ self.error_weights_.T
        return out

    def expected_loss(self):
        check_is_fitted(self, "seed_weights_")
        return analytic_loss(self.network_, self.rules_, NoiseSpec(self.varpi)).L


class RuleChoiceGame(BaseEstimator):
    """Nash equilibrium and social optimum of the seed-weight game on a network.

    ``symmetry`` is one of None, 'symmetric' or 'star' and selects the
    reduced fixed point the solvers use.
    """

    def __init__(self, varpi=0.01, correlation="independent", idiosyncratic_variance=0.0,
                 symmetry=None, damping=0.5, tol=1e-10):
        self.varpi = varpi
        self.correlation = correlation
        self.idiosyncratic_variance = idiosyncratic_variance
        self.symmetry = symmetry
        self.damping = damping
        self.tol = tol

    def _noise(self):
        return NoiseSpec(self.varpi, correlation=self.correlation,
                         idiosyncratic_variance=self.idiosyncratic_variance)

    def fit(self, A, y=None):
        net = _as_network(A)
        self.network_ = net
        self.n_features_in_ = net.n
        classes = symmetry_classes(net, self.symmetry)
        eq = nash_solve(net, self._noise(), SignalModel(), damping=self.damping, tol=self.tol,
                        classes=classes)
        self.m_star_ = eq.m_star
        self.residual_ = eq.residual
        self.losses_ = eq.losses.L
        self.n_iter_ = eq.iterations
        self.m_social_ = social_optimum(net, self._noise(), classes=classes).m
        return self

    def predict(self, A=None):
        """Equilibrium weights (the network argument is accepted for API symmetry)."""
        check_is_fitted(self, "m_star_")
        return self.m_star_

    def score(self, A=None, y=None):
        """Negative total equilibrium loss (higher is better)."""
        check_is_fitted(self, "losses_")
        return -float(np.sum(self.losses_))
