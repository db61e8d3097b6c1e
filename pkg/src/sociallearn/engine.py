"""Agent decision policies and the single-trial runner."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arrival import ArrivalOrder
from .errors import ParameterError, PolicyError
from .exact import DEFAULT_CAP, StrategyTables, strategy_tables
from .graphs import GraphSizing, ObservationGraph, Role
from .model import Challenge, WorldState, posterior_from_signal_counts
from .seeding import as_generator


@dataclass(frozen=True)
class PaperRule:
    """Role-aware closed-form rules; ``j_threshold`` is the guinea-pig count J.

    J only matters on celebrity graphs.
    """

    j_threshold: int | None = None

    name = "paper"

    @classmethod
    def from_sizing(cls, params: GraphSizing) -> "PaperRule":
        return cls(params.J)


@dataclass(frozen=True)
class ExactBayes:
    """Best reply computed by full enumeration of predecessor signals."""

    cap: int = DEFAULT_CAP

    name = "exact"


def resolve_policy(policy, j_threshold: int | None = None):
    if isinstance(policy, (PaperRule, ExactBayes)):
        return policy
    if policy == "paper":
        return PaperRule(j_threshold)
    if policy == "exact":
        return ExactBayes()
    raise ParameterError(f"unknown policy {policy!r}; expected 'paper' or 'exact'")


def _threshold(params) -> int | None:
    if params is None:
        return None
    if isinstance(params, (int, np.integer)):
        return int(params)
    if isinstance(params, GraphSizing):
        return params.J
    return getattr(params, "j_threshold", None)


@dataclass
class InfoSet:
    agent_id: int
    own_signal: int
    position: int  # 1-based arrival time
    predecessors: tuple[int, ...]
    observed_actions: dict[int, int]

    def __post_init__(self):
        if len(self.predecessors) != self.position - 1:
            raise ParameterError("predecessors must list exactly position - 1 agents")
        if not set(self.observed_actions) <= set(self.predecessors):
            raise ParameterError("observed actions must come from predecessors")


def build_infoset(graph: ObservationGraph, order, t: int, signals: np.ndarray, actions) -> InfoSet:
    """Infoset of the agent arriving at 0-based time ``t``.

    ``signals`` is indexed by identity - 1, ``actions`` by arrival time.
    """
    order = np.asarray(getattr(order, "order", order))
    me = int(order[t])
    preds = tuple(int(a) for a in order[:t])
    seen = {a: int(actions[u]) for u, a in enumerate(preds) if graph.adjacent(a, me)}
    return InfoSet(me, int(signals[me - 1]), t + 1, preds, seen)


def _margin_rule(margin: int, own_signal: int) -> int:
    if margin >= 2:
        return 1
    if margin <= -2:
        return 0
    return own_signal


def _cascade_rule(revealed_ones: int, revealed: int, own_signal: int, delta: float) -> int:
    post = posterior_from_signal_counts(revealed_ones + own_signal, revealed + 1, delta)
    if post > 0.5:
        return 1
    if post < 0.5:
        return 0
    return own_signal


def paper_rule_decision(infoset: InfoSet, graph: ObservationGraph, params=None, delta: float = 0.25) -> int:
    """Closed-form best reply for the empty, clique and celebrity families.

    ``params`` supplies J (a :class:`GraphSizing`, :class:`PaperRule` or int)
    and is required on celebrity graphs.  ``delta`` only feeds the clique
    posterior, whose sign does not depend on it.
    """
    s = infoset.own_signal
    if not infoset.observed_actions:
        return s
    if graph.family == "empty":
        return s
    if graph.family == "clique":
        ones = revealed = 0
        for a in infoset.predecessors:
            d = 2 * ones - revealed
            if abs(d) <= 1:
                ones += infoset.observed_actions[a]
                revealed += 1
        return _cascade_rule(ones, revealed, s, delta)
    if graph.family != "celebrity":
        raise PolicyError(f"paper rule does not cover the {graph.family!r} family; use exact_bayes_decision")
    J = _threshold(params)
    if J is None:
        raise ParameterError("celebrity graphs need J (pass GraphSizing, PaperRule or an int)")

    first_cel = None
    commoners_before_first = 0
    for a in infoset.predecessors:
        if graph.celebrity(a):
            first_cel = a
            break
        commoners_before_first += 1

    if graph.celebrity(infoset.agent_id):
        # only commoners that beat the first celebrity voted on their own signal
        margin = 0
        for a in infoset.predecessors[:commoners_before_first]:
            margin += 2 * infoset.observed_actions[a] - 1
        return _margin_rule(margin, s)
    if first_cel is not None and commoners_before_first >= J:
        return infoset.observed_actions[first_cel]
    return s


@dataclass
class TrialOutcome:
    theta: int
    X: int
    n: int
    actions: np.ndarray | None = None  # arrival order
    signals: np.ndarray | None = None  # arrival order
    trace: list[dict] | None = field(default=None, repr=False)

    @property
    def fraction(self) -> float:
        return self.X / self.n


def draw_world(challenge: Challenge, rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """State, then one block of signals indexed by identity - 1."""
    theta = WorldState.draw(challenge, rng).theta
    u = rng.random(challenge.num_agents)
    correct = u < challenge.accuracy
    signals = np.where(correct, theta, 1 - theta).astype(np.int8)
    return theta, signals


def _fast_path_ok(graph: ObservationGraph, policy, trace: bool) -> bool:
    return isinstance(policy, PaperRule) and not trace and graph.family in ("empty", "celebrity")


def _celebrity_vectorised(sig_pos: np.ndarray, cel_pos: np.ndarray, J: int) -> np.ndarray:
    acts = sig_pos.copy()
    cel_idx = np.flatnonzero(cel_pos)
    if cel_idx.size == 0:
        return acts
    f = int(cel_idx[0])
    margin = 2 * int(sig_pos[:f].sum()) - f
    if margin >= 2:
        acts[cel_idx] = 1
    elif margin <= -2:
        acts[cel_idx] = 0
    if f >= J:
        tail = acts[f + 1:]
        tail[~cel_pos[f + 1:]] = acts[f]
    return acts


def _paper_loop(graph, order, sig_pos, J, delta, trace):
    n = order.shape[0]
    acts = np.empty(n, dtype=np.int8)
    records = [] if trace else None
    family = graph.family
    cel_flags = graph.is_celebrity
    # running state, O(1) per arrival
    d_ones = d_rev = 0  # clique: revealed signals
    indep_margin = 0  # celebrity: guinea-pig votes
    first_action = None
    first_j = 0
    commoner_votes = [0, 0]
    celebrity_votes = [0, 0]
    all_votes = [0, 0]
    for t in range(n):
        agent = int(order[t])
        s = int(sig_pos[t])
        if family == "empty":
            a = s
            role = Role.PLAIN
            seen = [0, 0]
        elif family == "clique":
            a = _cascade_rule(d_ones, d_rev, s, delta) if t else s
            if abs(2 * d_ones - d_rev) <= 1:
                d_ones += a
                d_rev += 1
            role = Role.PLAIN
            seen = list(all_votes)
        elif family == "celebrity":
            if cel_flags[agent - 1]:
                role = Role.CELEBRITY
                seen = list(commoner_votes)
                a = _margin_rule(indep_margin, s)
                if first_action is None:
                    first_action = a
                    first_j = t
            else:
                role = Role.COMMONER
                seen = list(celebrity_votes)
                if first_action is None:
                    a = s
                    indep_margin += 2 * s - 1
                elif first_j >= J:
                    a = first_action
                else:
                    a = s
        else:
            raise PolicyError(f"paper rule does not cover the {family!r} family; use the exact policy")
        acts[t] = a
        all_votes[a] += 1
        if family == "celebrity":
            (celebrity_votes if role is Role.CELEBRITY else commoner_votes)[a] += 1
        if records is not None:
            records.append({"t": t + 1, "agent": agent, "role": role.value, "signal": s, "observed_votes": seen, "action": a})
    return acts, records


def _exact_loop(graph, order, sig_pos, tables: StrategyTables, trace):
    n = order.shape[0]
    acts = np.empty(n, dtype=np.int8)
    records = [] if trace else None
    for t in range(n):
        nb = tables.neighbors[t]
        obs = tuple(int(acts[u]) for u in nb)
        s = int(sig_pos[t])
        a = tables.action(t, s, obs)
        acts[t] = a
        if records is not None:
            agent = int(order[t])
            records.append({
                "t": t + 1,
                "agent": agent,
                "role": graph.role(agent).value,
                "signal": s,
                "observed_votes": [obs.count(0), obs.count(1)],
                "action": a,
            })
    return acts, records


def play(
    challenge: Challenge,
    graph: ObservationGraph,
    order,
    signals: np.ndarray,
    policy,
    *,
    trace: bool = False,
    tables: StrategyTables | None = None,
) -> tuple[np.ndarray, np.ndarray, list[dict] | None]:
    """Let every agent act on fixed ``signals`` (indexed by identity - 1).

    Returns actions and signals in arrival order plus the optional trace.
    Bi-clique and empty graphs under the paper rule take a vectorised path
    that produces the same actions as the per-agent loop.  ``tables`` lets a
    caller reuse exact strategies across calls with the same graph and order.
    """
    n = challenge.num_agents
    if graph.n != n:
        raise ParameterError(f"graph has {graph.n} agents but the challenge has {n}")
    order = np.asarray(getattr(order, "order", order), dtype=np.int64)
    if order.shape[0] != n:
        raise ParameterError("order length does not match the challenge")
    signals = np.asarray(signals, dtype=np.int8)
    if signals.shape != (n,):
        raise ParameterError(f"expected {n} signals")
    policy = resolve_policy(policy)
    if isinstance(policy, PaperRule) and challenge.prior_one != 0.5:
        raise PolicyError("the paper rule assumes a uniform prior; use the exact policy")
    sig_pos = signals[order - 1]

    if isinstance(policy, PaperRule):
        if graph.family == "celebrity" and policy.j_threshold is None:
            raise ParameterError("celebrity graphs need PaperRule(j_threshold=J)")
        if _fast_path_ok(graph, policy, trace):
            if graph.family == "empty":
                return sig_pos.copy(), sig_pos, None
            acts = _celebrity_vectorised(sig_pos, graph.is_celebrity[order - 1], policy.j_threshold)
            return acts, sig_pos, None
        acts, records = _paper_loop(graph, order, sig_pos, policy.j_threshold, challenge.delta, trace)
        return acts, sig_pos, records
    if tables is None:
        tables = strategy_tables(graph, order, challenge, cap=policy.cap)
    acts, records = _exact_loop(graph, order, sig_pos, tables, trace)
    return acts, sig_pos, records


def run_trial(
    challenge: Challenge,
    graph: ObservationGraph,
    order,
    policy,
    seed,
    *,
    trace: bool = False,
    keep_actions: bool = True,
    tables: StrategyTables | None = None,
) -> TrialOutcome:
    """Draw theta and signals from ``seed``, let everyone act, count correct actions."""
    rng = as_generator(seed)
    theta, signals = draw_world(challenge, rng)
    acts, sig_pos, records = play(challenge, graph, order, signals, policy, trace=trace, tables=tables)
    X = int(np.count_nonzero(acts == theta))
    return TrialOutcome(
        theta=theta,
        X=X,
        n=challenge.num_agents,
        actions=acts if keep_actions else None,
        signals=sig_pos if keep_actions else None,
        trace=records,
    )


@dataclass
class ExactDecision:
    action: int
    posterior: float | None
    tables: StrategyTables


def exact_bayes_decision(
    infoset: InfoSet,
    graph: ObservationGraph,
    order,
    challenge: Challenge,
    cap: int = DEFAULT_CAP,
) -> ExactDecision:
    """Exact best reply at ``infoset`` plus every earlier agent's strategy table."""
    order = ArrivalOrder(getattr(order, "order", order))
    t = infoset.position - 1
    if int(order.order[t]) != infoset.agent_id:
        raise ParameterError("infoset agent does not arrive at the stated position")
    sol = strategy_tables(graph, order, challenge, steps=t + 1, cap=cap)
    nb = sol.neighbors[t]
    try:
        obs = tuple(infoset.observed_actions[int(order.order[u])] for u in nb)
    except KeyError as exc:
        raise ParameterError(f"infoset is missing the action of neighbor {exc.args[0]}") from None
    entry = sol.tables[t].get((infoset.own_signal, obs))
    if entry is None:
        return ExactDecision(infoset.own_signal, None, sol)
    return ExactDecision(entry.action, entry.posterior, sol)
