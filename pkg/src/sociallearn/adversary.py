"""Search for arrival orders that minimise the expected optimal-action fraction.

The adversary knows the graph and the policy but not theta or the signals.
Small populations are searched exhaustively with exact evaluation; larger ones
by first-improvement hill climbing over adjacent transpositions, seeded with a
few structural orders.  Beyond 16 agents values are Monte Carlo estimates that
share one set of trial seeds across candidates (common random numbers).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .arrival import ArrivalOrder
from .engine import ExactBayes, PaperRule, resolve_policy, run_trial
from .errors import ParameterError
from .exact import exact_expected_correct_bayes, exact_expected_correct_paper
from .graphs import ObservationGraph
from .model import Challenge

EXHAUSTIVE_MAX_N = 8
EXACT_EVAL_MAX_N = 16
# values closer than this count as ties (lexicographically smaller order wins)
TIE_TOL = 1e-12
_CHUNK = 5040


@dataclass
class AdversaryResult:
    order: ArrivalOrder
    value: float
    method: str
    evaluated: int
    uniform_value: float | None = None
    candidates: list[tuple[ArrivalOrder, float]] = field(default_factory=list, repr=False)

    def worst(self, count: int) -> list[tuple[ArrivalOrder, float]]:
        """The ``count`` lowest-valued distinct orders seen during the search."""
        seen = {}
        for order, value in self.candidates:
            key = order.order.tobytes()
            if key not in seen or value < seen[key][1]:
                seen[key] = (order, value)
        return sorted(seen.values(), key=lambda ov: (ov[1], ov[0].order.tolist()))[:count]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "evaluated": self.evaluated,
            "value": self.value,
            "uniform_value": self.uniform_value,
            "order": self.order.order.tolist() if self.order.n <= 64 else f"<{self.order.n} agents>",
        }


def exact_fraction(challenge: Challenge, graph: ObservationGraph, orders, policy) -> np.ndarray:
    """Exact expected optimal-action fraction for each row of ``orders``."""
    orders = np.atleast_2d(np.asarray(getattr(orders, "order", orders), dtype=np.int64))
    n = graph.n
    if isinstance(policy, PaperRule):
        return exact_expected_correct_paper(graph, orders, challenge, policy.j_threshold) / n
    return np.array([exact_expected_correct_bayes(graph, row, challenge, cap=policy.cap) / n for row in orders])


class _Evaluator:
    def __init__(self, challenge, graph, policy, mc_trials, seed):
        self.challenge = challenge
        self.graph = graph
        self.policy = policy
        self.exact = graph.n <= EXACT_EVAL_MAX_N
        self.mc_trials = mc_trials
        self.seed = seed
        self.count = 0

    def __call__(self, order: np.ndarray) -> float:
        self.count += 1
        if self.exact:
            return float(exact_fraction(self.challenge, self.graph, order, self.policy)[0])
        total = 0
        for i in range(self.mc_trials):
            out = run_trial(
                self.challenge, self.graph, order, self.policy,
                seeding.derive(self.seed, seeding.ADVERSARY, i), keep_actions=False,
            )
            total += out.X
        return total / (self.mc_trials * self.graph.n)


def heuristic_orders(graph: ObservationGraph, policy) -> list[np.ndarray]:
    """Structural starting points: identity, reverse and role-based orders."""
    n = graph.n
    ident = np.arange(1, n + 1)
    out = [ident, ident[::-1].copy()]
    if graph.family == "celebrity":
        cel = graph.celebrities()
        com = np.flatnonzero(~graph.is_celebrity) + 1
        out.append(np.concatenate([cel, com]))
        out.append(np.concatenate([com, cel]))
        J = getattr(policy, "j_threshold", None)
        if J is not None and 1 <= J <= com.size:
            # first celebrity one short of the copy threshold
            out.append(np.concatenate([com[: J - 1], cel[:1], com[J - 1:], cel[1:]]))
        spread = np.empty(n, dtype=np.int64)
        slots = np.linspace(0, n - 1, cel.size + 2)[1:-1].round().astype(int)
        mask = np.zeros(n, dtype=bool)
        mask[slots] = True
        if mask.sum() == cel.size:
            spread[mask] = cel
            spread[~mask] = com
            out.append(spread)
    unique = []
    keys = set()
    for o in out:
        k = o.tobytes()
        if k not in keys:
            keys.add(k)
            unique.append(o.astype(np.int64))
    return unique


def _exhaustive(challenge, graph, policy) -> AdversaryResult:
    n = graph.n
    best_val = math.inf
    best_order = None
    total = 0.0
    count = 0
    worst: list[tuple[np.ndarray, float]] = []
    perms = itertools.permutations(range(1, n + 1))
    while True:
        chunk = list(itertools.islice(perms, _CHUNK))
        if not chunk:
            break
        arr = np.array(chunk, dtype=np.int64)
        vals = exact_fraction(challenge, graph, arr, policy)
        total += float(vals.sum())
        count += len(chunk)
        cmin = float(vals.min())
        if cmin < best_val - TIE_TOL:
            idx = int(np.flatnonzero(vals <= cmin + TIE_TOL)[0])
            best_val = float(vals[idx])
            best_order = arr[idx].copy()
        for idx in np.argsort(vals, kind="stable")[:5]:
            worst.append((arr[idx].copy(), float(vals[idx])))
    worst.sort(key=lambda ov: ov[1])
    return AdversaryResult(
        order=ArrivalOrder(best_order),
        value=best_val,
        method="exhaustive",
        evaluated=count,
        uniform_value=total / count,
        candidates=[(ArrivalOrder(o), v) for o, v in worst[:5]],
    )


def _hill_climb(challenge, graph, policy, budget, mc_trials, seed) -> AdversaryResult:
    evaluate = _Evaluator(challenge, graph, policy, mc_trials, seed)
    seen: list[tuple[np.ndarray, float]] = []
    best_order = None
    best_val = math.inf
    for cand in heuristic_orders(graph, policy):
        if evaluate.count >= budget:
            break
        v = evaluate(cand)
        seen.append((cand, v))
        if v < best_val - TIE_TOL:
            best_val, best_order = v, cand
    improved = True
    while improved and evaluate.count < budget:
        improved = False
        for t in range(graph.n - 1):
            if evaluate.count >= budget:
                break
            a, b = int(best_order[t]), int(best_order[t + 1])
            if graph.family == "celebrity" and graph.celebrity(a) == graph.celebrity(b):
                continue  # swapping two agents of the same role leaves every infoset unchanged
            cand = best_order.copy()
            cand[t], cand[t + 1] = b, a
            v = evaluate(cand)
            seen.append((cand, v))
            if v < best_val - TIE_TOL:
                best_val, best_order = v, cand
                improved = True
                break
    return AdversaryResult(
        order=ArrivalOrder(best_order),
        value=best_val,
        method="hill-climb" if evaluate.exact else "hill-climb-mc",
        evaluated=evaluate.count,
        candidates=[(ArrivalOrder(o), v) for o, v in seen],
    )


def adversarial_search(
    graph: ObservationGraph,
    challenge: Challenge,
    policy,
    budget: int = math.factorial(EXHAUSTIVE_MAX_N),
    *,
    mc_trials: int = 20,
    seed: int = 0,
) -> AdversaryResult:
    """Find the arrival order with the lowest expected optimal-action fraction.

    Exhaustive (with lexicographic tie-breaking) when ``n <= 8`` and the
    budget covers all ``n!`` orders, hill climbing otherwise.
    """
    if budget < 1:
        raise ParameterError("budget must be at least 1")
    if graph.n != challenge.num_agents:
        raise ParameterError("graph and challenge disagree on the number of agents")
    policy = resolve_policy(policy)
    if isinstance(policy, ExactBayes) and graph.n - 1 > policy.cap:
        raise ParameterError("the exact policy cannot be evaluated beyond its enumeration cap")
    n = graph.n
    if n <= EXHAUSTIVE_MAX_N and math.factorial(n) <= budget:
        return _exhaustive(challenge, graph, policy)
    return _hill_climb(challenge, graph, policy, budget, mc_trials, seed)
