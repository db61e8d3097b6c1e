import itertools
import math

import numpy as np
import pytest

from sociallearn.adversary import adversarial_search, exact_fraction, heuristic_orders
from sociallearn.engine import ExactBayes, PaperRule, play
from sociallearn.errors import ParameterError
from sociallearn.experiments import estimate_fraction
from sociallearn.arrival import UniformArrival
from sociallearn.graphs import build_celebrity, build_clique, build_empty
from sociallearn.model import Challenge


def independent_value(challenge, graph, order, policy):
    """E[fraction] by looping over states and signal profiles through the engine."""
    n = graph.n
    p = challenge.accuracy
    total = 0.0
    for theta in (0, 1):
        for s in itertools.product((0, 1), repeat=n):
            w = 0.5 * math.prod(p if b == theta else 1 - p for b in s)
            acts, _, _ = play(challenge, graph, order, np.array(s), policy)
            total += w * np.count_nonzero(acts == theta)
    return total / n


def brute_minimum(challenge, graph, policy):
    best, arg = math.inf, None
    for o in itertools.permutations(range(1, graph.n + 1)):
        v = independent_value(challenge, graph, np.array(o), policy)
        if v < best - 1e-12:
            best, arg = v, list(o)
    return arg, best


class TestExhaustive:
    def test_empty_graph_ties_return_identity(self):
        for n in (1, 3, 5):
            res = adversarial_search(build_empty(n), Challenge(n, 0.2), PaperRule(), 1000)
            assert res.order.order.tolist() == list(range(1, n + 1))
            assert res.value == pytest.approx(0.7)
            assert res.method == "exhaustive"

    def test_celebrity_five_one(self):
        c = Challenge(5, 0.3)
        g = build_celebrity(5, 1)
        pol = PaperRule(1)
        res = adversarial_search(g, c, pol, 120)
        arg, best = brute_minimum(c, g, pol)
        assert res.evaluated == 120
        assert res.value == pytest.approx(best, abs=1e-12)
        assert res.order.order.tolist() == arg
        # celebrity arriving first sees no one, so every commoner falls back to its signal
        assert res.value == pytest.approx(0.8)
        assert res.value <= res.uniform_value

    @pytest.mark.parametrize("n,k,J", [(4, 1, 1), (5, 2, 2), (6, 2, 3)])
    def test_global_minimiser_cross_check(self, n, k, J):
        c = Challenge(n, 0.2)
        g = build_celebrity(n, k)
        res = adversarial_search(g, c, PaperRule(J), math.factorial(n))
        orders = np.array(list(itertools.permutations(range(1, n + 1))))
        vals = exact_fraction(c, g, orders, PaperRule(J))
        assert res.value == pytest.approx(vals.min(), abs=1e-12)
        first = int(np.flatnonzero(vals <= vals.min() + 1e-12)[0])
        assert res.order.order.tolist() == orders[first].tolist()
        assert res.uniform_value == pytest.approx(vals.mean())

    def test_exact_policy_on_clique(self):
        c = Challenge(4, 0.2)
        res = adversarial_search(build_clique(4), c, ExactBayes(), 24)
        # identities are interchangeable on a clique, so every order ties
        assert res.order.order.tolist() == [1, 2, 3, 4]
        assert res.value == pytest.approx(res.uniform_value)


class TestHillClimb:
    def test_small_budget_switches_to_hill_climb(self):
        c = Challenge(6, 0.2)
        g = build_celebrity(6, 2)
        res = adversarial_search(g, c, PaperRule(2), 30)
        assert res.method == "hill-climb"
        assert res.evaluated <= 30
        orders = np.array(list(itertools.permutations(range(1, 7))))
        assert res.value <= exact_fraction(c, g, orders, PaperRule(2)).mean()

    def test_mc_value_below_uniform(self):
        n = 200
        c = Challenge(n, 0.1)
        g = build_celebrity(n, 5)
        pol = PaperRule(10)
        res = adversarial_search(g, c, pol, 12, mc_trials=50, seed=3)
        assert res.method == "hill-climb-mc"
        uni = estimate_fraction(c, g, UniformArrival(n), pol, 200, seed=4)
        assert res.value <= uni.mean_fraction + (uni.wilson_ci[1] - uni.wilson_ci[0])

    def test_deterministic(self):
        c = Challenge(40, 0.1)
        g = build_celebrity(40, 3)
        a = adversarial_search(g, c, PaperRule(5), 20, mc_trials=5, seed=1)
        b = adversarial_search(g, c, PaperRule(5), 20, mc_trials=5, seed=1)
        assert a.order == b.order and a.value == b.value

    def test_heuristics_are_permutations(self):
        g = build_celebrity(30, 4)
        for o in heuristic_orders(g, PaperRule(6)):
            assert sorted(o.tolist()) == list(range(1, 31))

    def test_worst_is_sorted_and_distinct(self):
        c = Challenge(6, 0.2)
        res = adversarial_search(build_celebrity(6, 2), c, PaperRule(2), 25)
        worst = res.worst(3)
        assert [v for _, v in worst] == sorted(v for _, v in worst)
        assert len({o.order.tobytes() for o, _ in worst}) == len(worst)


class TestErrors:
    def test_zero_budget(self):
        with pytest.raises(ParameterError):
            adversarial_search(build_empty(3), Challenge(3, 0.1), PaperRule(), 0)

    def test_size_mismatch(self):
        with pytest.raises(ParameterError):
            adversarial_search(build_empty(3), Challenge(4, 0.1), PaperRule(), 10)
