import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from statsmodels.stats.proportion import proportion_confint

from sociallearn import experiments as ex
from sociallearn.arrival import FixedArrival, UniformArrival, WeightedArrival, ArrivalOrder
from sociallearn.engine import ExactBayes, PaperRule, run_trial
from sociallearn.errors import ParameterError, ResourceError
from sociallearn.graphs import build_celebrity, build_clique, build_empty
from sociallearn.model import Challenge


class TestWilson:
    @pytest.mark.parametrize("k,n", [(0, 10), (3, 10), (10, 10), (512, 1000), (7, 30_000)])
    @pytest.mark.parametrize("conf", [0.9, 0.95, 0.99])
    def test_against_statsmodels(self, k, n, conf):
        lo, hi = proportion_confint(k, n, alpha=1 - conf, method="wilson")
        got = ex.wilson_interval(k, n, conf)
        assert got[0] == pytest.approx(lo, abs=1e-12) and got[1] == pytest.approx(hi, abs=1e-12)

    @given(st.integers(1, 10_000).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
    def test_contains_estimate(self, kn):
        k, n = kn
        lo, hi = ex.wilson_interval(k, n)
        assert lo <= k / n <= hi

    def test_errors(self):
        with pytest.raises(ParameterError):
            ex.wilson_interval(1, 0)
        with pytest.raises(ParameterError):
            ex.wilson_interval(1, 5, 1.0)


class TestEstimateFraction:
    def test_empty_graph_mean(self):
        n = 50
        est = ex.estimate_fraction(Challenge(n, 0.2), build_empty(n), UniformArrival(n), PaperRule(), 10_000, seed=1)
        assert est.mean_fraction == pytest.approx(0.7, abs=0.01)
        assert est.wilson_ci[0] <= est.mean_fraction <= est.wilson_ci[1]

    @pytest.mark.parametrize("graph", [build_empty(20), build_clique(20), build_celebrity(20, 3)])
    def test_perfect_signals(self, graph):
        est = ex.estimate_fraction(Challenge(20, 0.5), graph, UniformArrival(20), PaperRule(2), 50, seed=2)
        assert est.mean_fraction == 1.0

    def test_single_trial(self):
        c = Challenge(30, 0.2)
        g = build_celebrity(30, 2)
        est = ex.estimate_fraction(c, g, UniformArrival(30), PaperRule(3), 1, seed=9)
        from sociallearn import seeding

        order = UniformArrival(30).sample(seeding.rng(9, seeding.TRIAL_ORDER, 0))
        out = run_trial(c, g, order, PaperRule(3), seeding.derive(9, seeding.TRIAL_SIGNALS, 0))
        assert est.mean_fraction == out.fraction

    def test_ci_shrinks(self):
        c = Challenge(40, 0.1)
        g = build_celebrity(40, 3)
        small = ex.estimate_fraction(c, g, UniformArrival(40), PaperRule(4), 50, seed=3)
        large = ex.estimate_fraction(c, g, UniformArrival(40), PaperRule(4), 800, seed=3)
        assert large.ci_width < small.ci_width

    def test_deterministic_and_worker_independent(self):
        c = Challenge(500, 0.1)
        g = build_celebrity(500, 10)
        args = (c, g, UniformArrival(500), PaperRule(20), 40)
        a = ex.estimate_fraction(*args, seed=5, workers=1)
        b = ex.estimate_fraction(*args, seed=5, workers=3)
        assert a.to_dict() == b.to_dict()
        assert a.fractions == b.fractions

    def test_random_graph_and_weighted_order(self):
        n = 60
        est = ex.estimate_fraction(Challenge(n, 0.2), ex.RandomCelebrityGraph(n, 4), WeightedArrival(tuple(np.linspace(1, 3, n))), PaperRule(5), 30, seed=4)
        assert "trial_graph" in est.seed_ledger["streams"]

    def test_exact_policy_reuses_tables(self):
        n = 8
        order = FixedArrival(ArrivalOrder(np.arange(1, n + 1)))
        est = ex.estimate_fraction(Challenge(n, 0.2), build_clique(n), order, ExactBayes(), 200, seed=6)
        assert 0.5 < est.mean_fraction <= 1

    def test_errors(self):
        with pytest.raises(ParameterError):
            ex.estimate_fraction(Challenge(5, 0.1), build_empty(5), UniformArrival(5), PaperRule(), 0, seed=1)
        with pytest.raises(ParameterError):
            ex.estimate_fraction(Challenge(5, 0.1), build_empty(4), UniformArrival(5), PaperRule(), 3, seed=1)


class TestLemma1:
    @pytest.mark.parametrize("delta,eps,N", [(0.1, 0.1, 250), (0.5, 0.01, 100), (0.05, 0.2, 500)])
    def test_examples(self, delta, eps, N):
        rep = ex.verify_lemma1(delta, eps)
        assert rep.passed and rep.values["N"] == N
        assert rep.values["exact_tail"] > 1 - eps

    def test_perfect_signals(self):
        assert ex.verify_lemma1(0.5, 0.01).values["exact_tail"] == 1.0

    def test_monte_carlo_cross_check(self):
        # a 95% interval misses about one seed in twenty; require coverage, not a lucky seed
        reps = [ex.verify_lemma1(0.1, 0.1, mc_samples=20_000, seed=s) for s in range(40)]
        misses = sum(not r.values["mc_agrees"] for r in reps)
        assert misses <= 7  # P(Binomial(40, 0.05) > 7) < 0.002
        assert reps[1].seed_ledger["root_seed"] == 1


class TestLemma2And3:
    def test_lemma2_example(self):
        rep = ex.verify_lemma2(0.2, 10, 5, mc_samples=100_000, seed=0)
        assert rep.values["N"] == 510 and rep.values["exact"] >= 0.8
        assert rep.values["mc_agrees"]

    def test_monte_carlo_miss_does_not_fail_the_bound(self):
        # seed 3 lands outside the 95% interval; the exact probability still decides
        rep = ex.verify_lemma2(0.2, 10, 5, mc_samples=20_000, seed=3)
        assert not rep.values["mc_agrees"]
        assert rep.passed

    def test_product_against_brute_force(self):
        # P(no marked among first J) = C(N-K, J) / C(N, J)
        for N, K, J in [(10, 3, 4), (50, 7, 10), (8, 0, 5), (6, 3, 4)]:
            expected = math.comb(N - K, J) / math.comb(N, J) if J <= N - K else 0.0
            assert ex.no_celebrity_probability(N, K, J) == pytest.approx(expected, abs=1e-14)

    def test_k_zero(self):
        assert ex.no_celebrity_probability(100, 0, 30) == 1.0
        assert ex.verify_lemma2(0.2, 10, 0, mc_samples=0).values["exact"] == 1.0

    def test_lemma3_window_against_brute_force(self):
        # P(some marked in positions J+1..W | none in 1..J) = 1 - C(N-J-K, W-J) / C(N-J, W-J)
        for N, K, J, W in [(20, 4, 3, 8), (100, 17, 10, 20)]:
            expected = 1 - math.comb(N - J - K, W - J) / math.comb(N - J, W - J)
            assert ex.window_hit_probability(N, K, J, W) == pytest.approx(expected, abs=1e-14)

    def test_lemma3_example(self):
        rep = ex.verify_lemma3(0.2, 10, mc_samples=100_000, seed=0)
        assert rep.passed and rep.values["K"] == 17 and rep.values["N"] == 100
        assert rep.values["mc_agrees"]

    def test_first_positions_are_uniform(self):
        rng = np.random.default_rng(0)
        firsts = ex._first_positions_batch(rng, 60_000, 4, 2)
        counts = np.bincount(firsts[:, 0] * 4 + firsts[:, 1], minlength=16).reshape(4, 4)
        assert np.all(np.diag(counts) == 0)
        off = counts[~np.eye(4, dtype=bool)] / 60_000
        assert np.all(np.abs(off - 1 / 12) < 0.006)


class TestTheorem4:
    def test_perfect_signals(self):
        rep = ex.verify_theorem4(0.3, 0.5, 3, n_override=2000, seed=1)
        assert rep.passed and rep.values["mean_fraction"] == 1.0

    def test_inconclusive_flag(self):
        rep = ex.verify_theorem4(0.4, 0.1, 3, n_override=20_000, seed=2)
        assert rep.values["mean_fraction"] >= 0.6
        assert rep.inconclusive == (rep.values["ci_lo"] < 0.6)

    def test_memory_budget(self):
        with pytest.raises(ResourceError):
            ex.verify_theorem4(0.3, 0.1, 1, max_agents=1000)

    def test_report_rendering(self):
        rep = ex.verify_theorem4(0.4, 0.1, 2, n_override=5000, seed=3)
        text = rep.to_text()
        assert "mean_fraction" in text and "root_seed" in text
        assert rep.to_dict()["seed_ledger"]["root_seed"] == 3


class TestLemma4:
    def test_identity_tau(self):
        c = Challenge(5, 0.2)
        rng = np.random.default_rng(0)
        for _ in range(30):
            sigma = rng.permutation(5) + 1
            s = rng.integers(0, 2, 5)
            assert ex.lemma4_step_equivalence(sigma, np.arange(1, 6), s, c, 2, PaperRule(2))

    def test_exhaustive_small(self):
        rep = ex.verify_lemma4(4, 2, 0.2, PaperRule(1))
        assert rep.passed and rep.values["checked"] == 24 * 24 * 16 * 2

    def test_exact_policy(self):
        rep = ex.verify_lemma4(3, 1, 0.3, ExactBayes())
        assert rep.passed

    def test_unpermuted_signals_break(self):
        bad = ex.find_lemma4_counterexample(4, 2, 0.2, PaperRule(1))
        assert bad is not None
        c = Challenge(4, 0.2)
        assert not ex.lemma4_step_equivalence(bad["sigma"], bad["tau"], bad["signals"], c, 2, PaperRule(1), permute_signals=False)
        assert ex.lemma4_step_equivalence(bad["sigma"], bad["tau"], bad["signals"], c, 2, PaperRule(1))

    def test_dimension_mismatch(self):
        with pytest.raises(ParameterError):
            ex.lemma4_step_equivalence([1, 2, 3], [1, 2, 3, 4], [0, 1, 1, 0], Challenge(4, 0.1), 2, PaperRule(1))


class TestCorollary2:
    @pytest.mark.parametrize("n,k,delta", [(4, 1, 0.3), (2, 1, 0.2), (5, 2, 0.1)])
    def test_equal_expectations(self, n, k, delta):
        rep = ex.corollary2_equivalence(n, k, Challenge(n, delta), PaperRule(1))
        assert rep.passed and rep.values["gap"] <= 1e-12

    def test_perfect_signals(self):
        rep = ex.corollary2_equivalence(4, 2, Challenge(4, 0.5), PaperRule(1))
        assert rep.values["expected_X_fixed"] == pytest.approx(4)
        assert rep.values["expected_X_relabeled"] == pytest.approx(4)

    def test_exact_policy(self):
        rep = ex.corollary2_equivalence(4, 1, Challenge(4, 0.2), ExactBayes())
        assert rep.passed

    def test_size_limit(self):
        with pytest.raises(ResourceError):
            ex.corollary2_equivalence(8, 2, Challenge(8, 0.1), PaperRule(1))


class TestTheorem5:
    @pytest.mark.parametrize("n,k,J", [(4, 1, 1), (5, 2, 2)])
    def test_exact_reduction(self, n, k, J):
        rep = ex.verify_theorem5_exact(n, k, 0.2, PaperRule(J))
        assert rep.passed
        assert rep.values["adversary_value_fixed_graph"] <= rep.values["uniform_value_fixed_graph"]

    def test_identity_adversary_matches_uniform_relabeling(self):
        """Random relabeling against a fixed order is uniform arrival on the fixed graph."""
        n, k, J = 3000, 20, 30
        c = Challenge(n, 0.1)
        vs_random = ex.estimate_fraction(c, ex.RandomCelebrityGraph(n, k), FixedArrival(ArrivalOrder(np.arange(1, n + 1))), PaperRule(J), 300, seed=1)
        uniform = ex.estimate_fraction(c, build_celebrity(n, k), UniformArrival(n), PaperRule(J), 300, seed=2)
        gap = abs(vs_random.mean_fraction - uniform.mean_fraction)
        assert gap <= (vs_random.trial_ci[1] - vs_random.trial_ci[0]) + (uniform.trial_ci[1] - uniform.trial_ci[0])

    def test_statistical_small(self):
        rep = ex.verify_theorem5(0.4, 0.1, 8, 5, n_override=20_000, seed=1, adversary_trials=3, worst=2)
        assert len(rep.values["orders"]) == 2
        assert rep.passed == all(r["randomized_mean"] >= 0.6 for r in rep.values["orders"])


class TestDerandomize:
    def test_single_sample(self):
        res = ex.derandomize_theorem6(UniformArrival(200), 200, 5, 1, 20, seed=3, j_threshold=5, with_randomized=False)
        from sociallearn.arrival import uniform_relabeling
        from sociallearn import seeding

        assert res.relabeling == uniform_relabeling(200, seeding.rng(3, seeding.RELABEL_SAMPLE, 0))
        assert len(res.scores) == 1

    @pytest.mark.parametrize("seed", range(4))
    def test_best_at_least_mean(self, seed):
        res = ex.derandomize_theorem6(UniformArrival(300), 300, 6, 8, 20, seed=seed, j_threshold=10)
        assert res.best.mean_fraction >= res.mean_score
        assert res.best.mean_fraction == max(res.scores)

    def test_weighted_order(self):
        n = 300
        w = tuple(np.linspace(1, 5, n))
        res = ex.derandomize_theorem6(WeightedArrival(w), n, 6, 5, 20, seed=1, j_threshold=10)
        assert res.to_dict()["best_is_at_least_mean"]

    def test_errors(self):
        with pytest.raises(ParameterError):
            ex.derandomize_theorem6(UniformArrival(10), 10, 2, 0, 5, seed=1)


class TestSweep:
    def test_sorted_records(self):
        recs = ex.sweep(0.4, 0.1, [3000, 1000, 2000], 5, seed=1)
        assert [r["n"] for r in recs] == [1000, 2000, 3000]
        assert list(recs[0]) == list(ex.CSV_FIELDS)

    def test_ladder_monotone(self):
        rep = ex.theorem4_ladder(0.4, 0.1, 20, levels=3, seed=1)
        assert rep.passed
        ns = [r["n"] for r in rep.values["ladder"]]
        assert ns == sorted(ns)

    def test_empty_graph_check(self):
        rep = ex.empty_graph_check(40, 0.3, 2000, seed=1)
        assert rep.values["mean_fraction"] == pytest.approx(0.8, abs=0.02)
