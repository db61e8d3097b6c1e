"""Exhaustive enumeration over signal profiles.

Signal profiles of the agents arriving at times ``0..n-1`` are indexed by an
integer whose bit ``t`` is the signal of the ``t``-th arrival.  Two things are
computed on top of that index:

* exact Bayesian strategy tables, built by induction on arrival time: every
  earlier strategy is fixed before the current agent's posterior is formed;
* exact expected numbers of correct actions for the paper-rule policy,
  vectorised over profiles and (for celebrity graphs) over many orders at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, PolicyError, ResourceError
from .graphs import ObservationGraph
from .model import Challenge

DEFAULT_CAP = 20
# relative gap under which two posterior weights count as a tie
TIE_RTOL = 1e-12


def signal_profiles(n: int) -> np.ndarray:
    """All ``2**n`` profiles as an ``(2**n, n)`` int8 array; column ``t`` is bit ``t``."""
    idx = np.arange(1 << n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.int8)


def profile_weights(n: int, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Likelihood of every profile under theta = 1 and theta = 0."""
    ones = signal_profiles(n).sum(axis=1, dtype=np.int64)
    p, q = 0.5 + delta, 0.5 - delta
    w1 = p**ones * q ** (n - ones)
    w0 = q**ones * p ** (n - ones)
    return w1, w0


def _neighbor_positions(graph: ObservationGraph, order: np.ndarray, t: int) -> list[int]:
    if graph.family == "empty":
        return []
    if graph.family == "clique":
        return list(range(t))
    if graph.family == "celebrity":
        cel = graph.is_celebrity[order[: t + 1] - 1]
        return np.flatnonzero(cel[:t] != cel[t]).tolist()
    me = int(order[t])
    return [u for u in range(t) if graph.adjacent(int(order[u]), me)]


@dataclass(frozen=True)
class TableEntry:
    action: int
    posterior: float | None  # None when the infoset has probability zero


@dataclass
class StrategyTables:
    """Exact best-reply strategies for every arrival up to ``steps``.

    ``tables[t]`` maps ``(own_signal, observed)`` to a :class:`TableEntry`,
    where ``observed`` lists the actions of the agent's neighbor predecessors
    in arrival order.  ``neighbors[t]`` holds the matching arrival positions.
    """

    order: np.ndarray
    tables: list[dict] = field(default_factory=list)
    neighbors: list[list[int]] = field(default_factory=list)
    action_bits: np.ndarray | None = None
    w1: np.ndarray | None = None
    w0: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return len(self.tables)

    def action(self, t: int, own_signal: int, observed: tuple[int, ...]) -> int:
        entry = self.tables[t].get((own_signal, tuple(observed)))
        # unreachable histories keep the agent's own signal
        return own_signal if entry is None else entry.action

    def actions(self) -> np.ndarray:
        """``(2**steps, steps)`` int8 action matrix aligned with :func:`signal_profiles`."""
        bits = self.action_bits
        return ((bits[:, None] >> np.arange(self.steps, dtype=np.int64)) & 1).astype(np.int8)


def strategy_tables(
    graph: ObservationGraph,
    order,
    challenge: Challenge,
    steps: int | None = None,
    cap: int = DEFAULT_CAP,
) -> StrategyTables:
    """Solve the first ``steps`` arrivals (default: everyone) by enumeration."""
    order = np.asarray(getattr(order, "order", order), dtype=np.int64)
    n = graph.n
    if order.shape[0] != n:
        raise ParameterError("order length does not match the graph")
    steps = n if steps is None else steps
    if not (1 <= steps <= n):
        raise ParameterError(f"steps must lie in 1..{n}, got {steps}")
    if steps - 1 > cap:
        raise ResourceError(f"exact enumeration over {steps - 1} predecessor signals exceeds the cap of {cap}")
    if steps > 62:
        raise ResourceError("action bitmasks are limited to 62 arrivals")

    p, q = challenge.accuracy, 1.0 - challenge.accuracy
    prior = challenge.prior_one
    w1 = np.ones(1)
    w0 = np.ones(1)
    acts = np.zeros(1, dtype=np.int64)
    out = StrategyTables(order=order)
    for t in range(steps):
        nb = _neighbor_positions(graph, order, t)
        mask = 0
        for u in nb:
            mask |= 1 << u
        key = acts & mask
        uniq, inv = np.unique(key, return_inverse=True)
        inv = inv.reshape(-1)
        W1 = np.bincount(inv, weights=w1, minlength=uniq.size)
        W0 = np.bincount(inv, weights=w0, minlength=uniq.size)
        table: dict = {}
        chosen = np.empty((2, uniq.size), dtype=np.int64)
        observed = [tuple(int((int(k) >> u) & 1) for u in nb) for k in uniq]
        for s in (0, 1):
            a1 = prior * (p if s else q) * W1
            a0 = (1.0 - prior) * (q if s else p) * W0
            tot = a1 + a0
            tie = np.abs(a1 - a0) <= TIE_RTOL * tot
            act = np.where(tie, s, (a1 > a0).astype(np.int64))
            chosen[s] = act
            for i, obs in enumerate(observed):
                post = float(a1[i] / tot[i]) if tot[i] > 0 else None
                table[(s, obs)] = TableEntry(int(act[i]), post)
        out.tables.append(table)
        out.neighbors.append(nb)
        acts = np.concatenate([acts | (chosen[0][inv] << t), acts | (chosen[1][inv] << t)])
        w1 = np.concatenate([w1 * q, w1 * p])
        w0 = np.concatenate([w0 * p, w0 * q])
    out.action_bits = acts
    out.w1 = w1
    out.w0 = w0
    return out


def _popcount(bits: np.ndarray, width: int) -> np.ndarray:
    return ((bits[:, None] >> np.arange(width, dtype=np.int64)) & 1).sum(axis=1)


def exact_expected_correct_bayes(graph: ObservationGraph, order, challenge: Challenge, cap: int = DEFAULT_CAP) -> float:
    """Exact E[X] when every agent plays the exact best reply."""
    sol = strategy_tables(graph, order, challenge, cap=cap)
    n = graph.n
    ones = _popcount(sol.action_bits, n)
    prior = challenge.prior_one
    return float(prior * np.dot(sol.w1, ones) + (1 - prior) * np.dot(sol.w0, n - ones))


def _margin_rule(margin: np.ndarray, signals: np.ndarray) -> np.ndarray:
    return np.where(margin >= 2, 1, np.where(margin <= -2, 0, signals)).astype(np.int8)


def paper_rule_profile_actions(
    family: str,
    signals: np.ndarray,
    j_threshold: int | None = None,
    celebrity_positions: np.ndarray | None = None,
) -> np.ndarray:
    """Paper-rule actions for every profile.

    ``signals`` is ``(P, n)`` with column ``t`` the signal of arrival ``t``.
    For the celebrity family ``celebrity_positions`` is an ``(m, n)`` boolean
    array of roles in arrival order (one row per order) and the result is
    ``(m, P, n)``; other families return ``(P, n)``.
    """
    P, n = signals.shape
    if family == "empty":
        return signals.astype(np.int8, copy=True)
    if family == "clique":
        acts = np.empty_like(signals, dtype=np.int8)
        d = np.zeros(P, dtype=np.int64)
        for t in range(n):
            s = signals[:, t]
            a = np.where(d >= 2, 1, np.where(d <= -2, 0, s)).astype(np.int8)
            acts[:, t] = a
            d = d + np.where(np.abs(d) <= 1, 2 * a.astype(np.int64) - 1, 0)
        return acts
    if family != "celebrity":
        raise PolicyError(f"paper rule does not cover the {family!r} family; use the exact policy")
    if celebrity_positions is None or j_threshold is None:
        raise ParameterError("celebrity family needs celebrity_positions and j_threshold")
    cel = np.asarray(celebrity_positions, dtype=bool)
    if cel.ndim == 1:
        cel = cel[None, :]
    m = cel.shape[0]
    has_cel = cel.any(axis=1)
    first = np.where(has_cel, cel.argmax(axis=1), n)  # (m,)
    votes = 2 * signals.astype(np.int64) - 1
    cum = np.concatenate([np.zeros((P, 1), dtype=np.int64), np.cumsum(votes, axis=1)], axis=1)
    margin = cum[:, first].T  # (m, P): guinea-pig margin seen by every celebrity
    S = np.broadcast_to(signals, (m, P, n))
    cel_act = _margin_rule(margin[:, :, None], S)
    acts = np.where(cel[:, None, :], cel_act, S).astype(np.int8)
    first_act = np.take_along_axis(cel_act, np.minimum(first, n - 1)[:, None, None], axis=2)  # (m, P, 1)
    after = np.arange(n)[None, :] > first[:, None]
    copy = after & ~cel & (first >= j_threshold)[:, None] & has_cel[:, None]
    acts = np.where(copy[:, None, :], first_act, acts)
    return acts


def expected_correct_from_actions(actions: np.ndarray, w1: np.ndarray, w0: np.ndarray, prior_one: float) -> np.ndarray:
    """E[X] per leading batch entry for an action array shaped ``(..., P, n)``."""
    n = actions.shape[-1]
    ones = actions.sum(axis=-1, dtype=np.int64)
    return prior_one * (ones @ w1) + (1 - prior_one) * ((n - ones) @ w0)


def exact_expected_correct_paper(graph: ObservationGraph, orders, challenge: Challenge, j_threshold: int | None = None) -> np.ndarray:
    """Exact E[X] under the paper rule for one order or a stack of orders ``(m, n)``."""
    orders = np.atleast_2d(np.asarray(getattr(orders, "order", orders), dtype=np.int64))
    n = graph.n
    if orders.shape[1] != n:
        raise ParameterError("order length does not match the graph")
    if n > 24:
        raise ResourceError(f"exact enumeration over 2**{n} profiles is not supported")
    if challenge.prior_one != 0.5:
        raise PolicyError("the paper rule assumes a uniform prior; use the exact policy")
    S = signal_profiles(n)
    w1, w0 = profile_weights(n, challenge.delta)
    if graph.family == "celebrity":
        acts = paper_rule_profile_actions("celebrity", S, j_threshold, graph.is_celebrity[orders - 1])
        return expected_correct_from_actions(acts, w1, w0, challenge.prior_one)
    acts = paper_rule_profile_actions(graph.family, S)
    value = expected_correct_from_actions(acts, w1, w0, challenge.prior_one)
    return np.full(orders.shape[0], float(value))


def exact_expected_correct_roles(celebrity_positions: np.ndarray, challenge: Challenge, j_threshold: int) -> np.ndarray:
    """Exact E[X] on bi-cliques given only each order's role sequence ``(m, n)``."""
    cel = np.atleast_2d(np.asarray(celebrity_positions, dtype=bool))
    n = cel.shape[1]
    S = signal_profiles(n)
    w1, w0 = profile_weights(n, challenge.delta)
    acts = paper_rule_profile_actions("celebrity", S, j_threshold, cel)
    return expected_correct_from_actions(acts, w1, w0, challenge.prior_one)
