"""The binary symmetric learning challenge and its exact probabilities.

States, signals and actions are all ``{0, 1}``.  Conditional on the state each
agent's signal matches it with probability ``0.5 + delta``; utility is 1 for
matching the state and 0 otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

# relative size below which outward binomial terms are dropped
_TAIL_CUTOFF = 1e-30


def _check_delta(delta: float) -> None:
    if not (0.0 < delta <= 0.5):
        raise ParameterError(f"delta must satisfy 0 < delta <= 0.5, got {delta!r}")


def _check_binary(name: str, value: int) -> None:
    if value not in (0, 1):
        raise ParameterError(f"{name} must be 0 or 1, got {value!r}")


@dataclass(frozen=True)
class Challenge:
    num_agents: int
    delta: float
    prior_one: float = 0.5

    def __post_init__(self):
        if int(self.num_agents) != self.num_agents or self.num_agents < 1:
            raise ParameterError(f"num_agents must be a positive integer, got {self.num_agents!r}")
        _check_delta(self.delta)
        if not (0.0 < self.prior_one < 1.0):
            raise ParameterError(f"prior_one must lie in (0, 1), got {self.prior_one!r}")

    @property
    def accuracy(self) -> float:
        """Probability that a signal equals the state."""
        return 0.5 + self.delta

    def with_agents(self, n: int) -> "Challenge":
        return Challenge(n, self.delta, self.prior_one)


@dataclass(frozen=True)
class WorldState:
    theta: int

    def __post_init__(self):
        _check_binary("theta", self.theta)

    @classmethod
    def draw(cls, challenge: Challenge, rng: np.random.Generator) -> "WorldState":
        return cls(int(rng.random() < challenge.prior_one))


def utility(theta: int, action: int) -> int:
    return int(theta == action)


def signal_likelihood(state: int, signal: int, delta: float) -> float:
    _check_binary("state", state)
    _check_binary("signal", signal)
    _check_delta(delta)
    return 0.5 + delta if signal == state else 0.5 - delta


def posterior_from_signal_counts(k_ones: int, m_total: int, delta: float, prior_one: float = 0.5) -> float:
    """P(theta = 1) after seeing ``k_ones`` ones among ``m_total`` independent signals.

    Only the margin ``2*k_ones - m_total`` enters the likelihood ratio.  With
    ``delta = 0.5`` a nonzero margin is conclusive and a zero margin leaves the
    prior untouched.
    """
    if not (0 <= k_ones <= m_total):
        raise ParameterError(f"need 0 <= k_ones <= m_total, got k_ones={k_ones}, m_total={m_total}")
    _check_delta(delta)
    if not (0.0 < prior_one < 1.0):
        raise ParameterError(f"prior_one must lie in (0, 1), got {prior_one!r}")
    margin = 2 * k_ones - m_total
    if delta == 0.5:
        if margin == 0:
            return prior_one
        return 1.0 if margin > 0 else 0.0
    log_odds = math.log(prior_one) - math.log1p(-prior_one) + margin * (math.log1p(2 * delta) - math.log1p(-2 * delta))
    if log_odds >= 0:
        return 1.0 / (1.0 + math.exp(-log_odds))
    e = math.exp(log_odds)
    return e / (1.0 + e)


def binomial_mass(n: int, p: float, lo: int, hi: int) -> float:
    """P(lo <= X <= hi) for X ~ Binomial(n, p).

    Terms are generated by the pmf ratio recurrence outward from the mode with
    the mode term fixed at 1, then normalised by their total.  No factorials or
    log-gamma calls are involved, so relative error stays near
    ``sqrt(n) * eps`` instead of growing with ``log(n!)``.  Outward terms below
    ``1e-30`` of the running total are dropped once the remaining tail is
    geometrically bounded under that level.
    """
    if n < 0:
        raise ParameterError(f"n must be nonnegative, got {n}")
    if not (0.0 <= p <= 1.0):
        raise ParameterError(f"p must lie in [0, 1], got {p!r}")
    lo = max(lo, 0)
    hi = min(hi, n)
    if lo > hi:
        return 0.0
    if p == 0.0:
        return 1.0 if lo == 0 else 0.0
    if p == 1.0:
        return 1.0 if hi == n else 0.0
    q = 1.0 - p
    odds = p / q
    mode = min(n, max(0, math.floor((n + 1) * p)))

    inside = [1.0] if lo <= mode <= hi else []
    total = [1.0]
    running = 1.0

    term = 1.0
    k = mode
    while k < n:
        ratio = (n - k) / (k + 1) * odds
        term *= ratio
        k += 1
        if term == 0.0:
            break
        total.append(term)
        running += term
        if lo <= k <= hi:
            inside.append(term)
        # ratios keep shrinking past the mode, so the rest is a dominated geometric series
        next_ratio = (n - k) / (k + 1) * odds
        if next_ratio < 1.0 and term * next_ratio / (1.0 - next_ratio) < _TAIL_CUTOFF * running:
            break

    term = 1.0
    k = mode
    inv_odds = q / p
    while k > 0:
        ratio = k / (n - k + 1) * inv_odds
        term *= ratio
        k -= 1
        if term == 0.0:
            break
        total.append(term)
        running += term
        if lo <= k <= hi:
            inside.append(term)
        next_ratio = k / (n - k + 1) * inv_odds
        if next_ratio < 1.0 and term * next_ratio / (1.0 - next_ratio) < _TAIL_CUTOFF * running:
            break

    return math.fsum(inside) / math.fsum(total)


def binomial_upper_tail(n: int, p: float, m: int) -> float:
    """P(X >= m) for X ~ Binomial(n, p)."""
    return binomial_mass(n, p, m, n)


def clear_majority_threshold(n: int) -> int:
    """Smallest count x of correct votes with margin ``2x - n >= 2``."""
    return (n + 3) // 2


def clear_majority_probability(n: int, delta: float) -> float:
    """Probability that ``n`` independent signals show a clear majority for the state.

    "Clear" means a vote margin of at least two, i.e. ``2X - n >= 2`` with
    ``X ~ Binomial(n, 0.5 + delta)`` counting correct signals.
    """
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    _check_delta(delta)
    return binomial_upper_tail(n, 0.5 + delta, clear_majority_threshold(n))


def celebrity_action_likelihood(action: int, theta: int, j_observed: int, delta: float) -> float:
    """P(first celebrity plays ``action`` | theta) after watching ``j_observed`` guinea pigs.

    The celebrity follows a clear majority (margin >= 2) of the observed
    signals and otherwise its own signal.
    """
    _check_binary("action", action)
    _check_binary("theta", theta)
    if int(j_observed) != j_observed or j_observed < 0:
        raise ParameterError(f"j_observed must be a nonnegative integer, got {j_observed!r}")
    _check_delta(delta)
    # probability that any single signal reads 1
    p_one = 0.5 + delta if theta == 1 else 0.5 - delta
    j = j_observed
    majority_one = binomial_mass(j, p_one, clear_majority_threshold(j), j)
    # margins in {-1, 0, 1}: count x with |2x - j| <= 1
    undecided = binomial_mass(j, p_one, j // 2, (j + 1) // 2)
    prob_one = majority_one + undecided * p_one
    return prob_one if action == 1 else 1.0 - prob_one


def follower_posterior(
    celebrity_action: int,
    own_signal: int,
    j_observed: int,
    delta: float,
    prior_one: float = 0.5,
) -> float:
    """P(theta = 1) for a commoner who sees the first celebrity's action and its own signal.

    The celebrity's action and the commoner's signal are independent given
    theta, so the likelihood factorises.
    """
    _check_binary("own_signal", own_signal)
    if not (0.0 < prior_one < 1.0):
        raise ParameterError(f"prior_one must lie in (0, 1), got {prior_one!r}")
    num = prior_one * celebrity_action_likelihood(celebrity_action, 1, j_observed, delta) * signal_likelihood(1, own_signal, delta)
    alt = (1 - prior_one) * celebrity_action_likelihood(celebrity_action, 0, j_observed, delta) * signal_likelihood(0, own_signal, delta)
    if num + alt == 0.0:
        raise ParameterError("observation has probability zero under both states")
    return num / (num + alt)
