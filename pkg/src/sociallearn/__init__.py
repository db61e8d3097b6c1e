"""Sequential Bayesian social learning on designed observation networks."""

from .arrival import ArrivalOrder, Relabeling, UniformArrival, WeightedArrival, FixedArrival, uniform_order, uniform_relabeling, weighted_order
from .engine import ExactBayes, InfoSet, PaperRule, TrialOutcome, exact_bayes_decision, paper_rule_decision, run_trial
from .errors import OutputError, ParameterError, PolicyError, ResourceError, SocialLearnError, UsageError, VerificationFailure
from .graphs import GraphSizing, ObservationGraph, build_celebrity, build_clique, build_empty, relabeled_celebrity, sizing
from .model import Challenge, WorldState, clear_majority_probability, follower_posterior, posterior_from_signal_counts, signal_likelihood

__all__ = [
    "ArrivalOrder",
    "Challenge",
    "ExactBayes",
    "FixedArrival",
    "GraphSizing",
    "InfoSet",
    "ObservationGraph",
    "OutputError",
    "PaperRule",
    "ParameterError",
    "PolicyError",
    "Relabeling",
    "ResourceError",
    "SocialLearnError",
    "TrialOutcome",
    "UniformArrival",
    "UsageError",
    "VerificationFailure",
    "WeightedArrival",
    "WorldState",
    "build_celebrity",
    "build_clique",
    "build_empty",
    "clear_majority_probability",
    "exact_bayes_decision",
    "follower_posterior",
    "paper_rule_decision",
    "posterior_from_signal_counts",
    "relabeled_celebrity",
    "run_trial",
    "signal_likelihood",
    "sizing",
    "uniform_order",
    "uniform_relabeling",
    "weighted_order",
]

__version__ = "0.1.0"
