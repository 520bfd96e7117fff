"""Opinion dynamics with anchored (Friedkin-Johnsen) and DeGroot updating under noise."""

from .coarse import CoarseModel, coarse_equilibrium, coarse_longrun
from .estimators import FJOpinionModel, RuleChoiceGame
from .exceptions import *  # noqa: F401,F403
from .game import (best_response, compare_networks, nash_solve, polarization_study,
                   precision_scaled_gamma_check, social_optimum, welfare_gradient)
from .longrun import covariance_limit, dg_consensus, influence, solve_longrun
from .loss import analytic_loss, efficient_weights, locus_comparison, mc_loss
from .net import (Network, connectivity, is_connected, make_complete, make_directed_circle,
                  make_network, make_star, make_two_stars, stationary_weights)
from .rules import NoiseSpec, Realization, RuleProfile, SignalModel, modified_seed, sample_realization
from .sim import Protocol, protocol_invariance_check, run, step

__version__ = "0.1.0"
