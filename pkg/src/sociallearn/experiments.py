"""Monte Carlo estimation and the exact / statistical verifiers.

Every verifier returns a :class:`Report`.  Exact checks need no seed; the
statistical ones record a seed ledger, and rerunning with the ledger's root
seed reproduces every number.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from . import seeding
from .adversary import adversarial_search, exact_fraction
from .arrival import ArrivalOrder, FixedArrival, Relabeling, UniformArrival, uniform_relabeling
from .engine import ExactBayes, PaperRule, play, resolve_policy, run_trial
from .errors import ParameterError, ResourceError
from .exact import exact_expected_correct_bayes, exact_expected_correct_paper, strategy_tables
from .graphs import ObservationGraph, _ceil, build_celebrity, build_clique, build_empty, relabeled_celebrity, sizing
from .io import CSV_FIELDS

__all__ = ["CSV_FIELDS"]  # re-exported for sweep callers; the rest is public by name
from .model import Challenge, clear_majority_probability, clear_majority_threshold

WORKERS_ENV = "SOCIALLEARN_WORKERS"
DEFAULT_MAX_AGENTS = 5 * 10**6
EXACT_TOL = 1e-12


def wilson_interval(successes: int, total: int, confidence: float = 0.95) -> tuple[float, float]:
    if total <= 0:
        raise ParameterError("total must be positive")
    if not (0 < confidence < 1):
        raise ParameterError(f"confidence must lie in (0, 1), got {confidence!r}")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = successes / total
    denom = 1 + z * z / total
    centre = (phat + z * z / (2 * total)) / denom
    half = z * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == total else min(1.0, centre + half)
    return lo, hi


@dataclass
class Report:
    name: str
    passed: bool
    values: dict
    inconclusive: bool = False
    seed_ledger: dict | None = None

    def to_dict(self) -> dict:
        doc = {"name": self.name, "passed": self.passed, "inconclusive": self.inconclusive, "values": self.values}
        if self.seed_ledger is not None:
            doc["seed_ledger"] = self.seed_ledger
        return doc

    def to_text(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if self.inconclusive:
            status += " (statistically inconclusive)"
        rows = [("check", self.name), ("status", status)]
        rows += [(k, _fmt(v)) for k, v in self.values.items()]
        if self.seed_ledger is not None:
            rows.append(("root_seed", str(self.seed_ledger["root_seed"])))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, (list, tuple)) and len(v) > 8:
        return f"[{len(v)} items]"
    return str(v)


# --------------------------------------------------------------------------
# Monte Carlo estimation


@dataclass(frozen=True)
class RandomCelebrityGraph:
    """A fresh uniformly relabeled celebrity graph per trial."""

    n: int
    k: int

    family = "celebrity"

    def sample(self, rng: np.random.Generator) -> ObservationGraph:
        return relabeled_celebrity(self.n, self.k, uniform_relabeling(self.n, rng))


@dataclass
class EstimateResult:
    mean_fraction: float
    trials: int
    n: int
    correct: int
    wilson_ci: tuple[float, float]
    trial_ci: tuple[float, float]
    confidence: float
    seed_ledger: dict
    fractions: list[float] = field(default_factory=list, repr=False)

    @property
    def ci_width(self) -> float:
        return self.wilson_ci[1] - self.wilson_ci[0]

    def to_dict(self) -> dict:
        return {
            "mean_fraction": self.mean_fraction,
            "trials": self.trials,
            "n": self.n,
            "correct": self.correct,
            "wilson_ci": list(self.wilson_ci),
            "trial_ci": list(self.trial_ci),
            "confidence": self.confidence,
            "seed_ledger": self.seed_ledger,
        }


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, int(workers))


def _trial_chunk(challenge, graph, order_model, policy, seed, indices):
    fixed_graph = isinstance(graph, ObservationGraph)
    tables = {}
    out = []
    for i in indices:
        order = order_model.sample(seeding.rng(seed, seeding.TRIAL_ORDER, i))
        g = graph if fixed_graph else graph.sample(seeding.rng(seed, seeding.TRIAL_GRAPH, i))
        tab = None
        if isinstance(policy, ExactBayes) and fixed_graph:
            key = order.order.tobytes()
            if key not in tables:
                tables[key] = strategy_tables(g, order, challenge, cap=policy.cap)
            tab = tables[key]
        res = run_trial(challenge, g, order, policy, seeding.derive(seed, seeding.TRIAL_SIGNALS, i), keep_actions=False, tables=tab)
        out.append((i, res.X))
    return out


def estimate_fraction(
    challenge: Challenge,
    graph,
    order_model,
    policy,
    trials: int,
    seed: int,
    confidence: float = 0.95,
    *,
    workers: int | None = None,
) -> EstimateResult:
    """Mean optimal-action fraction over independent trials.

    ``graph`` is an :class:`ObservationGraph` or a sampler such as
    :class:`RandomCelebrityGraph`; ``order_model`` has ``sample(rng)``.
    Trial ``i`` draws its order, graph and world from its own derived streams,
    so the result does not depend on ``workers``.
    """
    if int(trials) != trials or trials < 1:
        raise ParameterError(f"trials must be a positive integer, got {trials!r}")
    if seed is None:
        raise ParameterError("estimate_fraction needs an explicit seed")
    if graph.n != challenge.num_agents or order_model.n != challenge.num_agents:
        raise ParameterError("graph, order model and challenge disagree on the number of agents")
    policy = resolve_policy(policy)
    workers = _resolve_workers(workers)
    indices = list(range(trials))
    if workers == 1 or trials < 2:
        results = _trial_chunk(challenge, graph, order_model, policy, seed, indices)
    else:
        chunks = [indices[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_trial_chunk, challenge, graph, order_model, policy, seed, c) for c in chunks if c]
            results = [r for f in futures for r in f.result()]
    results.sort()
    n = challenge.num_agents
    xs = np.array([x for _, x in results], dtype=np.int64)
    correct = int(xs.sum())
    fractions = xs / n
    mean = correct / (trials * n)
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    sd = float(fractions.std(ddof=1)) if trials > 1 else 0.0
    half = z * sd / math.sqrt(trials)
    counts = {"trial_order": trials, "trial_signals": trials}
    if not isinstance(graph, ObservationGraph):
        counts["trial_graph"] = trials
    return EstimateResult(
        mean_fraction=mean,
        trials=trials,
        n=n,
        correct=correct,
        wilson_ci=wilson_interval(correct, trials * n, confidence),
        trial_ci=(max(0.0, mean - half), min(1.0, mean + half)),
        confidence=confidence,
        seed_ledger=seeding.ledger(seed, **counts),
        fractions=fractions.tolist(),
    )


# --------------------------------------------------------------------------
# Lemma-level exact verifiers


def lemma1_population(delta: float, epsilon: float) -> int:
    return _ceil(1.0 / (4 * delta * delta * epsilon))


def verify_lemma1(delta: float, epsilon: float, *, mc_samples: int = 0, seed: int = 0, confidence: float = 0.95) -> Report:
    """Exact clear-majority probability of N = ceil(1/(4 delta^2 eps)) guinea pigs vs 1 - eps."""
    if not (0 < epsilon < 1):
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    N = lemma1_population(delta, epsilon)
    tail = clear_majority_probability(N, delta)
    values = {"delta": delta, "epsilon": epsilon, "N": N, "exact_tail": tail, "bound": 1 - epsilon}
    passed = tail > 1 - epsilon
    ledger = None
    if mc_samples:
        rng = seeding.rng(seed, seeding.PERMUTATION_MC, 1, N)
        correct = rng.binomial(N, 0.5 + delta, size=mc_samples)
        hits = int(np.count_nonzero(correct >= clear_majority_threshold(N)))
        lo, hi = wilson_interval(hits, mc_samples, confidence)
        values.update({"mc_samples": mc_samples, "mc_estimate": hits / mc_samples, "mc_ci": [lo, hi], "mc_agrees": lo <= tail <= hi})
        ledger = seeding.ledger(seed, permutation_mc=1)
    return Report("lemma1", passed, values, seed_ledger=ledger)


def no_celebrity_probability(N: int, K: int, J: int) -> float:
    """P(none of K marked agents among the first J of a uniform order), as the telescoping product."""
    if K == 0 or J == 0:
        return 1.0
    if K + J > N:
        return 0.0
    logs = [math.log1p(-K / (N - i)) for i in range(J)]
    return math.exp(math.fsum(logs))


def window_hit_probability(N: int, K: int, J: int, window_end: int) -> float:
    """P(some marked agent arrives at times J+1..window_end | none among the first J)."""
    L = window_end - J
    if L <= 0 or K == 0:
        return 0.0
    if K + L > N - J:
        return 1.0
    logs = [math.log1p(-K / (N - J - i)) for i in range(L)]
    return 1.0 - math.exp(math.fsum(logs))


def _first_positions_batch(rng, rows: int, N: int, steps: int) -> np.ndarray:
    """First ``steps`` entries of ``rows`` independent uniform permutations of 0..N-1.

    Partial Fisher-Yates run in lockstep across rows.
    """
    arr = np.tile(np.arange(N, dtype=np.int32), (rows, 1))
    r = np.arange(rows)
    for i in range(steps):
        j = i + rng.integers(0, N - i, size=rows)
        a = arr[r, i].copy()
        arr[r, i] = arr[r, j]
        arr[r, j] = a
    return arr[:, :steps]


def _sample_prefix_hits(rng, samples: int, N: int, K: int, steps: int, split: int | None = None):
    """Count samples whose prefix contains a marked agent (ids < K).

    With ``split`` the counts are (rows with no mark in [0, split),
    rows among those with a mark in [split, steps)).
    """
    batch = max(1, min(samples, 20_000_000 // max(N, 1)))
    done = 0
    a = b = 0
    while done < samples:
        rows = min(batch, samples - done)
        prefix = _first_positions_batch(rng, rows, N, steps)
        marked = prefix < K
        if split is None:
            a += int(np.count_nonzero(~marked.any(axis=1)))
        else:
            clean = ~marked[:, :split].any(axis=1)
            a += int(clean.sum())
            b += int(np.count_nonzero(clean & marked[:, split:].any(axis=1)))
        done += rows
    return a, b


def verify_lemma2(epsilon: float, J: int, K: int, *, mc_samples: int = 100_000, seed: int = 0, confidence: float = 0.95) -> Report:
    """No celebrity among the first J arrivals when N = ceil(2JK/eps) + J."""
    if not (0 < epsilon < 1) or J < 0 or K < 0:
        raise ParameterError("need 0 < epsilon < 1 and nonnegative J, K")
    N = _ceil(2 * J * K / epsilon) + J
    exact = no_celebrity_probability(N, K, J)
    values = {"epsilon": epsilon, "J": J, "K": K, "N": N, "exact": exact, "bound": 1 - epsilon}
    passed = exact >= 1 - epsilon
    ledger = None
    if mc_samples and N > 0:
        # the stream is addressed by the instance, so grid points never share draws
        rng = seeding.rng(seed, seeding.PERMUTATION_MC, 2, N, K, J)
        hits, _ = _sample_prefix_hits(rng, mc_samples, N, K, J) if J > 0 else (mc_samples, 0)
        lo, hi = wilson_interval(hits, mc_samples, confidence)
        agrees = lo <= exact <= hi
        values.update({"mc_samples": mc_samples, "mc_estimate": hits / mc_samples, "mc_ci": [lo, hi], "mc_agrees": agrees})
        ledger = seeding.ledger(seed, permutation_mc=1)
    return Report("lemma2", passed, values, seed_ledger=ledger)


def verify_lemma3(epsilon: float, J: int, *, mc_samples: int = 100_000, seed: int = 0, confidence: float = 0.95) -> Report:
    """Some celebrity arrives by time N*eps, given none among the first J.

    K = ceil((2/eps) ln(1/eps)) and N = ceil(2J/eps).  The Monte Carlo side
    samples unconditional permutations and conditions by rejection.
    """
    if not (0 < epsilon < 1) or J < 1:
        raise ParameterError("need 0 < epsilon < 1 and J >= 1")
    K = _ceil(2 / epsilon * math.log(1 / epsilon))
    N = _ceil(2 * J / epsilon)
    window_end = math.floor(N * epsilon + 1e-9)
    exact = window_hit_probability(N, K, J, window_end)
    values = {
        "epsilon": epsilon, "J": J, "K": K, "N": N, "window_end": window_end,
        "exact": exact, "bound": 1 - epsilon, "gap_ratio": (N - J) / K,
    }
    passed = exact >= 1 - epsilon
    ledger = None
    if mc_samples:
        rng = seeding.rng(seed, seeding.PERMUTATION_MC, 3, N, K, J)
        clean, hits = _sample_prefix_hits(rng, mc_samples, N, K, max(window_end, J), split=J)
        if clean:
            lo, hi = wilson_interval(hits, clean, confidence)
            agrees = lo <= exact <= hi
            values.update({"mc_samples": mc_samples, "mc_conditioned": clean, "mc_estimate": hits / clean, "mc_ci": [lo, hi], "mc_agrees": agrees})
        ledger = seeding.ledger(seed, permutation_mc=1)
    return Report("lemma3", passed, values, seed_ledger=ledger)


# --------------------------------------------------------------------------
# Celebrity-graph simulations


def _verdict(name: str, est: EstimateResult, bound: float, values: dict) -> Report:
    passed = est.mean_fraction >= bound
    inconclusive = passed and est.wilson_ci[0] < bound
    values = dict(values)
    values.update({
        "mean_fraction": est.mean_fraction,
        "bound": bound,
        "ci_lo": est.wilson_ci[0],
        "ci_hi": est.wilson_ci[1],
        "trial_ci": list(est.trial_ci),
        "trials": est.trials,
        "ci_lower_clears_bound": est.wilson_ci[0] >= bound,
    })
    return Report(name, passed, values, inconclusive=inconclusive, seed_ledger=est.seed_ledger)


def verify_theorem4(
    epsilon: float,
    delta: float,
    trials: int,
    n_override: int | None = None,
    *,
    seed: int = 0,
    confidence: float = 0.95,
    max_agents: int = DEFAULT_MAX_AGENTS,
    workers: int | None = None,
) -> Report:
    """Celebrity graph at N_hat (or ``n_override``) under uniform arrival."""
    sz = sizing(epsilon, delta)
    N = n_override or sz.N_hat
    if N > max_agents:
        raise ResourceError(f"N = {N} exceeds the memory budget of {max_agents} agents")
    if sz.K >= N:
        raise ParameterError(f"N = {N} is too small for K = {sz.K} celebrities")
    challenge = Challenge(N, delta)
    est = estimate_fraction(
        challenge, build_celebrity(N, sz.K), UniformArrival(N), PaperRule(sz.J),
        trials, seed, confidence, workers=workers,
    )
    return _verdict("thm4", est, 1 - sz.epsilon, {"n": N, **sz.to_dict()})


def theorem4_ladder(
    epsilon: float,
    delta: float,
    trials: int,
    *,
    levels: int = 4,
    seed: int = 0,
    confidence: float = 0.95,
    workers: int | None = None,
) -> Report:
    """Mean fraction along N_hat / 2**(levels-1), ..., N_hat/2, N_hat.

    Passes when no step drops by more than the trial-level intervals allow
    (each upper bound reaches the previous lower bound).
    """
    sz = sizing(epsilon, delta)
    rows = []
    for lvl in range(levels - 1, -1, -1):
        N = max(sz.K + 1, _ceil(sz.N_hat / 2**lvl))
        est = estimate_fraction(
            Challenge(N, delta), build_celebrity(N, sz.K), UniformArrival(N), PaperRule(sz.J),
            trials, seed, confidence, workers=workers,
        )
        rows.append({"n": N, "mean_fraction": est.mean_fraction, "trial_ci": list(est.trial_ci), "wilson_ci": list(est.wilson_ci)})
    monotone = all(b["trial_ci"][1] >= a["trial_ci"][0] for a, b in zip(rows, rows[1:]))
    strictly = all(b["mean_fraction"] >= a["mean_fraction"] for a, b in zip(rows, rows[1:]))
    return Report(
        "thm4-ladder", monotone,
        {"epsilon": sz.epsilon, "delta": delta, "K": sz.K, "J": sz.J, "ladder": rows, "means_nondecreasing": strictly},
        seed_ledger=seeding.ledger(seed, trial_order=trials, trial_signals=trials),
    )


# --------------------------------------------------------------------------
# Relabeling equivalence


def lemma4_traces(
    sigma: ArrivalOrder,
    tau: Relabeling,
    signal_profile,
    challenge: Challenge,
    k: int,
    policy,
    *,
    permute_signals: bool = True,
):
    """Arrival-time traces (signal, action, role) of both constructions.

    Construction 1: order ``sigma``, agent ``i`` holds signal ``s[tau(i)]``
    and is a celebrity iff ``tau(i) <= k``.  Construction 2: identity
    ``tau(sigma[t])`` arrives at time ``t``, agent ``i`` holds ``s[i]`` and
    agents ``1..k`` are celebrities.
    """
    sigma = sigma if isinstance(sigma, ArrivalOrder) else ArrivalOrder(sigma)
    tau = tau if isinstance(tau, Relabeling) else Relabeling(tau)
    s = np.asarray(signal_profile, dtype=np.int8)
    n = challenge.num_agents
    if sigma.n != n or tau.n != n or s.shape != (n,):
        raise ParameterError("sigma, tau and the signal profile must all have n entries")
    if not (1 <= k < n):
        raise ParameterError(f"need 1 <= k < n, got k={k}")
    policy = resolve_policy(policy)
    h = relabeled_celebrity(n, k, tau)
    s1 = s[tau.tau - 1] if permute_signals else s
    a1, sig1, _ = play(challenge, h, sigma, s1, policy)
    role1 = h.is_celebrity[sigma.order - 1]

    g = build_celebrity(n, k)
    order2 = tau.tau[sigma.order - 1]
    a2, sig2, _ = play(challenge, g, order2, s, policy)
    role2 = g.is_celebrity[order2 - 1]
    return (sig1, a1, role1), (sig2, a2, role2)


def lemma4_step_equivalence(
    sigma, tau, signal_profile, challenge: Challenge, k: int, policy, *, permute_signals: bool = True
) -> bool:
    """True iff at every arrival time both constructions agree on signal, action and role."""
    one, two = lemma4_traces(sigma, tau, signal_profile, challenge, k, policy, permute_signals=permute_signals)
    return all(np.array_equal(x, y) for x, y in zip(one, two))


def verify_lemma4(n: int, k: int, delta: float, policy, *, permute_signals: bool = True) -> Report:
    """Exhaust every (sigma, tau, signal profile, theta) at size n.

    theta never changes an action; per state the check compares the number
    of correct actions, which must also match.
    """
    if n > 6:
        raise ResourceError("the exhaustive relabeling-step check (lem4) is limited to n <= 6")
    challenge = Challenge(n, delta)
    policy = resolve_policy(policy)
    perms = [np.array(p, dtype=np.int64) for p in itertools.permutations(range(1, n + 1))]
    profiles = [np.array(p, dtype=np.int8) for p in itertools.product((0, 1), repeat=n)]
    g = build_celebrity(n, k)
    checked = mismatches = 0
    first_bad = None
    for tau_vals in perms:
        tau = Relabeling(tau_vals)
        h = relabeled_celebrity(n, k, tau)
        for sig_vals in perms:
            order2 = tau_vals[sig_vals - 1]
            role1 = h.is_celebrity[sig_vals - 1]
            role2 = g.is_celebrity[order2 - 1]
            for s in profiles:
                s1 = s[tau_vals - 1] if permute_signals else s
                a1, sg1, _ = play(challenge, h, sig_vals, s1, policy)
                a2, sg2, _ = play(challenge, g, order2, s, policy)
                same = np.array_equal(a1, a2) and np.array_equal(sg1, sg2) and np.array_equal(role1, role2)
                for theta in (0, 1):
                    checked += 1
                    ok = same and np.count_nonzero(a1 == theta) == np.count_nonzero(a2 == theta)
                    if not ok:
                        mismatches += 1
                        if first_bad is None:
                            first_bad = {"sigma": sig_vals.tolist(), "tau": tau_vals.tolist(), "signals": s.tolist(), "theta": theta}
    values = {"n": n, "k": k, "delta": delta, "policy": policy.name, "permute_signals": permute_signals, "checked": checked, "mismatches": mismatches}
    if first_bad is not None:
        values["first_mismatch"] = first_bad
    return Report("lem4", mismatches == 0, values)


def find_lemma4_counterexample(n: int, k: int, delta: float, policy):
    """First (sigma, tau, s) where the construction breaks if signals are NOT permuted."""
    challenge = Challenge(n, delta)
    policy = resolve_policy(policy)
    for tau_vals in itertools.permutations(range(1, n + 1)):
        for sig_vals in itertools.permutations(range(1, n + 1)):
            for s in itertools.product((0, 1), repeat=n):
                if not lemma4_step_equivalence(sig_vals, tau_vals, s, challenge, k, policy, permute_signals=False):
                    return {"sigma": list(sig_vals), "tau": list(tau_vals), "signals": list(s)}
    return None


def _all_orders(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(1, n + 1))), dtype=np.int64)


def _pair_values(n: int, k: int, challenge: Challenge, policy):
    """Exact E[X] for every (tau, sigma): rows tau, columns sigma, one matrix per construction."""
    policy = resolve_policy(policy)
    orders = _all_orders(n)
    g = build_celebrity(n, k)
    m = orders.shape[0]
    v1 = np.empty((m, m))
    v2 = np.empty((m, m))
    for r, tau_vals in enumerate(orders):
        h = relabeled_celebrity(n, k, tau_vals)
        orders2 = tau_vals[orders - 1]
        if isinstance(policy, PaperRule):
            v1[r] = exact_expected_correct_paper(h, orders, challenge, policy.j_threshold)
            v2[r] = exact_expected_correct_paper(g, orders2, challenge, policy.j_threshold)
        else:
            v1[r] = [exact_expected_correct_bayes(h, o, challenge, cap=policy.cap) for o in orders]
            v2[r] = [exact_expected_correct_bayes(g, o, challenge, cap=policy.cap) for o in orders2]
    return orders, v1, v2


def corollary2_equivalence(n: int, k: int, challenge: Challenge, policy) -> Report:
    """Exact E[X] of both constructions, averaged over all (sigma, tau) pairs.

    Also reports the largest per-pair gap, which should vanish as well.
    """
    if n > 7:
        raise ResourceError("full enumeration of (sigma, tau) pairs is limited to n <= 7")
    if challenge.num_agents != n:
        raise ParameterError("challenge size does not match n")
    _, v1, v2 = _pair_values(n, k, challenge, policy)
    e1 = float(v1.mean())
    e2 = float(v2.mean())
    gap = abs(e1 - e2)
    pair_gap = float(np.abs(v1 - v2).max())
    values = {"n": n, "k": k, "delta": challenge.delta, "expected_X_relabeled": e1, "expected_X_fixed": e2, "gap": gap, "max_pair_gap": pair_gap, "tolerance": EXACT_TOL}
    return Report("cor2", gap <= EXACT_TOL and pair_gap <= EXACT_TOL, values)


def verify_theorem5_exact(n: int, k: int, delta: float, policy, budget: int | None = None) -> Report:
    """Adversary vs the randomised graph equals the uniform-arrival value of the fixed graph.

    The adversary's order comes from :func:`adversarial_search` on the fixed
    graph; its value against the randomised graph averages over every tau.
    The identity is also checked for every other order.
    """
    if n > 6:
        raise ResourceError("the exact adversary check (thm5) is limited to n <= 6")
    challenge = Challenge(n, delta)
    policy = resolve_policy(policy)
    g = build_celebrity(n, k)
    adv = adversarial_search(g, challenge, policy, budget or math.factorial(n))
    orders, v1, v2 = _pair_values(n, k, challenge, policy)
    randomized_by_order = v1.mean(axis=0) / n  # column sigma: average over tau
    uniform_fixed = float(exact_fraction(challenge, g, orders, policy).mean())
    idx = int(np.flatnonzero((orders == adv.order.order).all(axis=1))[0])
    adv_vs_random = float(randomized_by_order[idx])
    worst_gap = float(np.abs(randomized_by_order - uniform_fixed).max())
    values = {
        "n": n, "k": k, "delta": delta,
        "adversary_order": adv.order.order.tolist(),
        "adversary_value_fixed_graph": adv.value,
        "adversary_value_randomized_graph": adv_vs_random,
        "uniform_value_fixed_graph": uniform_fixed,
        "gap": abs(adv_vs_random - uniform_fixed),
        "max_gap_over_orders": worst_gap,
        "tolerance": EXACT_TOL,
    }
    return Report("thm5-exact", abs(adv_vs_random - uniform_fixed) <= EXACT_TOL and worst_gap <= EXACT_TOL, values)


def verify_theorem5(
    epsilon: float,
    delta: float,
    adversary_budget: int,
    trials: int,
    *,
    n_override: int | None = None,
    worst: int = 5,
    adversary_trials: int = 10,
    seed: int = 0,
    confidence: float = 0.95,
    workers: int | None = None,
) -> Report:
    """Randomised celebrity graph against the adversary's worst orders for the fixed graph."""
    sz = sizing(epsilon, delta)
    N = n_override or sz.N_hat
    challenge = Challenge(N, delta)
    policy = PaperRule(sz.J)
    adv = adversarial_search(build_celebrity(N, sz.K), challenge, policy, adversary_budget, mc_trials=adversary_trials, seed=seed)
    rows = []
    ok = True
    inconclusive = False
    for order, fixed_value in adv.worst(worst):
        # every order reuses the same trial streams, so rows differ only by the order
        est = estimate_fraction(challenge, RandomCelebrityGraph(N, sz.K), FixedArrival(order), policy, trials, seed, confidence, workers=workers)
        passed = est.mean_fraction >= 1 - sz.epsilon
        ok = ok and passed
        inconclusive = inconclusive or (passed and est.wilson_ci[0] < 1 - sz.epsilon)
        rows.append({"fixed_graph_value": fixed_value, "randomized_mean": est.mean_fraction, "ci_lo": est.wilson_ci[0], "ci_hi": est.wilson_ci[1]})
    values = {"n": N, **sz.to_dict(), "adversary_method": adv.method, "adversary_evaluated": adv.evaluated, "bound": 1 - sz.epsilon, "orders": rows}
    return Report("thm5", ok, values, inconclusive=inconclusive, seed_ledger=seeding.ledger(seed, adversary=adversary_trials, trial_graph=trials, trial_signals=trials))


# --------------------------------------------------------------------------
# Derandomisation


@dataclass
class DerandomizeResult:
    relabeling: Relabeling
    best: EstimateResult
    scores: list[float]
    randomized: EstimateResult | None = None

    @property
    def mean_score(self) -> float:
        return float(np.mean(self.scores))

    def to_dict(self) -> dict:
        doc = {
            "best_score": self.best.mean_fraction,
            "best_ci": list(self.best.wilson_ci),
            "mean_score": self.mean_score,
            "scores": self.scores,
            "samples": len(self.scores),
            "best_is_at_least_mean": self.best.mean_fraction >= self.mean_score,
            "relabeling": self.relabeling.tau.tolist() if self.relabeling.n <= 64 else f"<{self.relabeling.n} entries>",
        }
        if self.randomized is not None:
            doc["randomized_score"] = self.randomized.mean_fraction
            doc["randomized_ci"] = list(self.randomized.wilson_ci)
            doc["best_within_randomized_minus_ci"] = self.best.mean_fraction >= self.randomized.mean_fraction - self.randomized.ci_width
        return doc


def derandomize_theorem6(
    order_model,
    n: int,
    k: int,
    samples: int,
    trials_per_sample: int,
    seed: int,
    *,
    delta: float = 0.1,
    epsilon: float = 0.4,
    j_threshold: int | None = None,
    confidence: float = 0.95,
    with_randomized: bool = True,
    workers: int | None = None,
) -> DerandomizeResult:
    """Pick the best of ``samples`` random relabelings as a fixed graph.

    All candidates are scored on the same trial streams (common random
    numbers), so the comparison isolates the graph.  With
    ``with_randomized`` the fresh-relabeling-per-trial graph is scored too.
    """
    if samples < 1:
        raise ParameterError("samples must be at least 1")
    if order_model.n != n:
        raise ParameterError("order model size does not match n")
    challenge = Challenge(n, delta)
    policy = PaperRule(j_threshold if j_threshold is not None else sizing(epsilon, delta).J)
    score_seed = int(seeding.derive(seed, seeding.RELABEL_SAMPLE, 1 << 20).generate_state(1, np.uint64)[0])
    best = None
    best_tau = None
    scores = []
    for i in range(samples):
        tau = uniform_relabeling(n, seeding.rng(seed, seeding.RELABEL_SAMPLE, i))
        est = estimate_fraction(challenge, relabeled_celebrity(n, k, tau), order_model, policy, trials_per_sample, score_seed, confidence, workers=workers)
        scores.append(est.mean_fraction)
        if best is None or est.mean_fraction > best.mean_fraction:
            best, best_tau = est, tau
    randomized = None
    if with_randomized:
        rand_seed = int(seeding.derive(seed, seeding.RELABEL_SAMPLE, (1 << 20) + 1).generate_state(1, np.uint64)[0])
        randomized = estimate_fraction(challenge, RandomCelebrityGraph(n, k), order_model, policy, trials_per_sample, rand_seed, confidence, workers=workers)
    return DerandomizeResult(best_tau, best, scores, randomized)


# --------------------------------------------------------------------------
# Sweeps and small helpers


def sweep(
    epsilon: float,
    delta: float,
    n_values,
    trials: int,
    seed: int,
    *,
    family: str = "celebrity",
    k: int | None = None,
    j_threshold: int | None = None,
    confidence: float = 0.95,
    workers: int | None = None,
) -> list[dict]:
    """One CSV-ready record per population size, sorted by n."""
    sz = sizing(epsilon, delta)
    k = sz.K if k is None else k
    J = sz.J if j_threshold is None else j_threshold
    records = []
    for N in sorted(set(int(v) for v in n_values)):
        challenge = Challenge(N, delta)
        if family == "celebrity":
            graph = build_celebrity(N, k)
        elif family == "empty":
            graph = build_empty(N)
        else:
            graph = build_clique(N)
        est = estimate_fraction(challenge, graph, UniformArrival(N), PaperRule(J), trials, seed, confidence, workers=workers)
        records.append({
            "epsilon": sz.epsilon, "delta": delta, "n": N,
            "k": k if family == "celebrity" else 0, "j": J, "trials": trials,
            "mean_fraction": est.mean_fraction, "ci_lo": est.wilson_ci[0], "ci_hi": est.wilson_ci[1],
            "seed": seed,
        })
    return records


def empty_graph_check(n: int, delta: float, trials: int, seed: int, confidence: float = 0.95) -> Report:
    challenge = Challenge(n, delta)
    est = estimate_fraction(challenge, build_empty(n), UniformArrival(n), PaperRule(), trials, seed, confidence)
    lo, hi = est.wilson_ci
    target = 0.5 + delta
    return Report("empty-graph", lo <= target <= hi, {"n": n, "delta": delta, "target": target, "mean_fraction": est.mean_fraction, "ci": [lo, hi]}, seed_ledger=est.seed_ledger)
