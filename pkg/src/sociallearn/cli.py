"""Command-line entry point: ``sociallearn <command> [flags]``.

Exit codes: 0 success, 1 verification not met, 2 usage or parameter error,
3 resource or I/O error.  Every failure also writes one JSON record to
standard error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import experiments as ex
from . import io as rio
from . import seeding
from .adversary import adversarial_search
from .arrival import ArrivalOrder, FixedArrival, UniformArrival, WeightedArrival
from .config import COMMANDS, FAMILIES, FORMATS, ORDER_MODELS, POLICIES, VERIFY_TARGETS, RunConfig, load_config_file, merge
from .engine import ExactBayes, PaperRule, run_trial
from .errors import ParameterError, ResourceError, SocialLearnError, UsageError
from .exact import strategy_tables
from .graphs import build_celebrity, build_clique, build_empty, sizing
from .model import Challenge


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    g = common.add_argument_group("run configuration (flags override --config)")
    g.add_argument("--config", help="JSON file with any of the keys below")
    g.add_argument("--family", choices=FAMILIES)
    g.add_argument("--n", type=int, help="number of agents (default: N_hat from sizing)")
    g.add_argument("--k", type=int, help="number of celebrities")
    g.add_argument("--j", type=int, help="guinea-pig threshold J used by the paper rule")
    g.add_argument("--epsilon", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--prior-one", dest="prior_one", type=float)
    g.add_argument("--order", choices=ORDER_MODELS)
    g.add_argument("--weights", type=_float_list, help="comma-separated arrival weights")
    g.add_argument("--fixed-order", dest="fixed_order", type=_int_list, help="comma-separated arrival order")
    g.add_argument("--policy", choices=POLICIES)
    g.add_argument("--trials", type=int)
    g.add_argument("--seed", type=int, help="root seed; drawn from entropy and printed when absent")
    g.add_argument("--confidence", type=float)
    g.add_argument("--workers", type=int, help="worker processes (env SOCIALLEARN_WORKERS)")
    g.add_argument("--n-values", dest="n_values", type=_int_list, help="sweep sizes, comma-separated")
    g.add_argument("--budget", type=int, help="adversary evaluation budget")
    g.add_argument("--samples", type=int, help="relabelings sampled by derandomization")
    g.add_argument("--mc-samples", dest="mc_samples", type=int)
    g.add_argument("--max-agents", dest="max_agents", type=int)
    g.add_argument("--ladder", action="store_true", help="thm4: also check the doubling ladder")
    g.add_argument("-o", "--output", help="output path ('-' for stdout)")
    g.add_argument("--format", choices=FORMATS)
    g.add_argument("--plot-dir", dest="plot_dir", help="sweep: write x,y series files here")
    g.add_argument("--trace", help="simulate: write a JSON-lines trace of trial 0 here")

    parser = _Parser(prog="sociallearn", description="Sequential social learning on designed observation networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="Monte Carlo estimate of the optimal-action fraction")
    sub.add_parser("sweep", parents=[common], help="simulate over several population sizes")
    v = sub.add_parser("verify", parents=[common], help="run one verifier")
    v.add_argument("target", choices=VERIFY_TARGETS)
    sub.add_parser("adversary", parents=[common], help="search for the worst arrival order")
    sub.add_parser("derandomize", parents=[common], help="pick the best of sampled relabelings")
    sub.add_parser("oracle", parents=[common], help="exact Bayesian strategy tables")
    return parser


def parse_config(argv) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    path = args.pop("config", None)
    file_doc = load_config_file(path) if path else None
    return merge(file_doc, args)


# --------------------------------------------------------------------------
# helpers


def _sizing(cfg: RunConfig):
    return sizing(cfg.epsilon, cfg.delta) if cfg.epsilon is not None else None


def _resolve_j(cfg: RunConfig, sz, fallback: int | None = None) -> int:
    if cfg.j is not None:
        return cfg.j
    if sz is not None:
        return sz.J
    if fallback is not None:
        return fallback
    raise ParameterError("celebrity graphs need --j or --epsilon")


def _graph_setup(cfg: RunConfig):
    """(n, k, J, graph) for the configured family; sizing fills the gaps."""
    sz = _sizing(cfg)
    if cfg.family == "celebrity":
        if cfg.n is None and sz is None:
            raise ParameterError("celebrity graphs need --n or --epsilon")
        n = cfg.n if cfg.n is not None else sz.N_hat
        if cfg.k is not None:
            k = cfg.k
        elif sz is not None:
            k = sz.K
        else:
            raise ParameterError("celebrity graphs need --k or --epsilon")
        if n > cfg.max_agents:
            raise ResourceError(f"n = {n} exceeds max_agents = {cfg.max_agents}")
        if not (1 <= k < n):
            raise ParameterError(f"celebrity graphs need 1 <= k < n, got k={k}, n={n}")
        J = _resolve_j(cfg, sz)
        return n, k, J, build_celebrity(n, k)
    if cfg.n is None:
        raise ParameterError(f"the {cfg.family} family needs --n")
    if cfg.n > cfg.max_agents:
        raise ResourceError(f"n = {cfg.n} exceeds max_agents = {cfg.max_agents}")
    graph = build_empty(cfg.n) if cfg.family == "empty" else build_clique(cfg.n)
    return cfg.n, 0, cfg.j, graph


def _order_model(cfg: RunConfig, n: int):
    if cfg.order == "weighted":
        if len(cfg.weights) != n:
            raise ParameterError(f"expected {n} weights, got {len(cfg.weights)}")
        return WeightedArrival(tuple(cfg.weights))
    if cfg.order == "fixed":
        if len(cfg.fixed_order) != n:
            raise ParameterError(f"fixed_order must have {n} entries")
        return FixedArrival(ArrivalOrder(cfg.fixed_order))
    return UniformArrival(n)


def _policy(cfg: RunConfig, J):
    return ExactBayes() if cfg.policy == "exact" else PaperRule(J)


def _emit_report(report: ex.Report, cfg: RunConfig) -> int:
    if (cfg.format or "text") == "json":
        rio.write_json(report.to_dict(), cfg.output)
    else:
        rio.write_text(report.to_text(), cfg.output)
    if not report.passed:
        _error_record("VerificationFailure", f"{report.name}: assertion not met", 1)
        return 1
    return 0


def _error_record(kind: str, message: str, code: int) -> None:
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message}, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: RunConfig) -> int:
    n, k, J, graph = _graph_setup(cfg)
    challenge = Challenge(n, cfg.delta, cfg.prior_one)
    policy = _policy(cfg, J)
    model = _order_model(cfg, n)
    est = ex.estimate_fraction(challenge, graph, model, policy, cfg.trials, cfg.seed, cfg.confidence, workers=cfg.workers)
    sz = _sizing(cfg)
    record = {
        "epsilon": sz.epsilon if sz is not None else None,
        "delta": cfg.delta, "n": n, "k": k, "j": J, "trials": cfg.trials,
        "mean_fraction": est.mean_fraction, "ci_lo": est.wilson_ci[0], "ci_hi": est.wilson_ci[1],
        "seed": cfg.seed,
    }
    fmt = cfg.format or "csv"
    if fmt == "text":
        rio.write_text(ex.Report("simulate", True, {**record, "trial_ci": list(est.trial_ci)}, seed_ledger=est.seed_ledger).to_text(), cfg.output)
    elif fmt == "json":
        rio.write_json({**record, "trial_ci": list(est.trial_ci), "seed_ledger": est.seed_ledger}, cfg.output)
    else:
        rio.emit_results([record], "csv", cfg.output)
    if cfg.trace:
        # trial 0 replayed on the same streams the estimate used
        order = model.sample(seeding.rng(cfg.seed, seeding.TRIAL_ORDER, 0))
        out = run_trial(challenge, graph, order, policy, seeding.derive(cfg.seed, seeding.TRIAL_SIGNALS, 0), trace=True, keep_actions=False)
        rio.write_trace(out.trace, cfg.trace)
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    if not cfg.n_values:
        raise ParameterError("sweep needs --n-values")
    if cfg.epsilon is None:
        raise ParameterError("sweep needs --epsilon for the sizing constants")
    if max(cfg.n_values) > cfg.max_agents:
        raise ResourceError(f"largest n exceeds max_agents = {cfg.max_agents}")
    records = ex.sweep(
        cfg.epsilon, cfg.delta, cfg.n_values, cfg.trials, cfg.seed,
        family=cfg.family, k=cfg.k, j_threshold=cfg.j, confidence=cfg.confidence, workers=cfg.workers,
    )
    rio.emit_results(records, "json" if cfg.format == "json" else "csv", cfg.output)
    if cfg.plot_dir:
        rio.write_plot_data(records, cfg.plot_dir)
    return 0


def _verify_report(cfg: RunConfig) -> ex.Report:
    t = cfg.target
    eps = cfg.epsilon
    if t in ("lemma1", "lemma2", "lemma3", "thm4", "thm5") and eps is None and not (t == "thm5" and cfg.n is not None and cfg.n <= 6):
        raise ParameterError(f"verify {t} needs --epsilon")
    if t == "lemma1":
        return ex.verify_lemma1(cfg.delta, eps, mc_samples=cfg.mc_samples, seed=cfg.seed, confidence=cfg.confidence)
    if t == "lemma2":
        if cfg.j is None or cfg.k is None:
            raise ParameterError("verify lemma2 needs --j and --k")
        return ex.verify_lemma2(eps, cfg.j, cfg.k, mc_samples=cfg.mc_samples, seed=cfg.seed, confidence=cfg.confidence)
    if t == "lemma3":
        if cfg.j is None:
            raise ParameterError("verify lemma3 needs --j")
        return ex.verify_lemma3(eps, cfg.j, mc_samples=cfg.mc_samples, seed=cfg.seed, confidence=cfg.confidence)
    if t == "thm4":
        rep = ex.verify_theorem4(eps, cfg.delta, cfg.trials, cfg.n, seed=cfg.seed, confidence=cfg.confidence, max_agents=cfg.max_agents, workers=cfg.workers)
        if cfg.ladder:
            lad = ex.theorem4_ladder(eps, cfg.delta, cfg.trials, seed=cfg.seed, confidence=cfg.confidence, workers=cfg.workers)
            rep.values["ladder"] = lad.values["ladder"]
            rep.values["ladder_monotone"] = lad.passed
            rep.passed = rep.passed and lad.passed
        return rep
    if t == "thm5":
        if cfg.n is not None and cfg.n <= 6:
            k = cfg.k if cfg.k is not None else 1
            return ex.verify_theorem5_exact(cfg.n, k, cfg.delta, _policy(cfg, _resolve_j(cfg, _sizing(cfg), fallback=1)))
        return ex.verify_theorem5(eps, cfg.delta, cfg.budget, cfg.trials, n_override=cfg.n, seed=cfg.seed, confidence=cfg.confidence, workers=cfg.workers)
    if t == "thm6":
        return _derandomize_report(cfg)
    n = cfg.n if cfg.n is not None else (5 if t == "lem4" else 4)
    k = cfg.k if cfg.k is not None else (2 if t == "lem4" else 1)
    policy = _policy(cfg, _resolve_j(cfg, _sizing(cfg), fallback=1))
    if t == "lem4":
        rep = ex.verify_lemma4(n, k, cfg.delta, policy)
        bad = ex.find_lemma4_counterexample(n, k, cfg.delta, policy)
        rep.values["unpermuted_counterexample"] = bad
        rep.passed = rep.passed and bad is not None
        return rep
    return ex.corollary2_equivalence(n, k, Challenge(n, cfg.delta), policy)


def cmd_verify(cfg: RunConfig) -> int:
    return _emit_report(_verify_report(cfg), cfg)


def _derandomize(cfg: RunConfig):
    n = cfg.n if cfg.n is not None else 5000
    eps = cfg.epsilon if cfg.epsilon is not None else 0.4
    sz = sizing(eps, cfg.delta)
    k = cfg.k if cfg.k is not None else sz.K
    if not (1 <= k < n):
        raise ParameterError(f"need 1 <= k < n, got k={k}, n={n}")
    res = ex.derandomize_theorem6(
        _order_model(cfg, n), n, k, cfg.samples, cfg.trials, cfg.seed,
        delta=cfg.delta, epsilon=eps, j_threshold=cfg.j, confidence=cfg.confidence, workers=cfg.workers,
    )
    return res, {"n": n, "k": k, "j": cfg.j if cfg.j is not None else sz.J, "delta": cfg.delta}


def _derandomize_report(cfg: RunConfig) -> ex.Report:
    res, head = _derandomize(cfg)
    doc = res.to_dict()
    doc.pop("scores")
    passed = doc["best_is_at_least_mean"] and doc.get("best_within_randomized_minus_ci", True)
    ledger = seeding.ledger(cfg.seed, relabel_sample=cfg.samples, trial_order=cfg.trials, trial_signals=cfg.trials, trial_graph=cfg.trials)
    return ex.Report("thm6", passed, {**head, **doc}, seed_ledger=ledger)


def cmd_derandomize(cfg: RunConfig) -> int:
    res, head = _derandomize(cfg)
    doc = {**head, **res.to_dict(), "seed_ledger": seeding.ledger(cfg.seed, relabel_sample=cfg.samples, trial_order=cfg.trials, trial_signals=cfg.trials, trial_graph=cfg.trials)}
    rio.write_json(doc, cfg.output)
    return 0


def cmd_adversary(cfg: RunConfig) -> int:
    n, k, J, graph = _graph_setup(cfg)
    challenge = Challenge(n, cfg.delta, cfg.prior_one)
    res = adversarial_search(graph, challenge, _policy(cfg, J), cfg.budget, mc_trials=cfg.trials, seed=cfg.seed)
    doc = res.to_dict()
    doc.update({"family": cfg.family, "n": n, "k": k, "j": J, "delta": cfg.delta, "policy": cfg.policy, "budget": cfg.budget})
    doc["worst"] = [{"order": o.order.tolist() if n <= 64 else None, "value": v} for o, v in res.worst(5)]
    if res.method == "hill-climb-mc":
        doc["seed_ledger"] = seeding.ledger(cfg.seed, adversary=cfg.trials)
    rio.write_json(doc, cfg.output)
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    n, k, J, graph = _graph_setup(cfg)
    order = np.array(cfg.fixed_order, dtype=np.int64) if cfg.fixed_order is not None else np.arange(1, n + 1)
    if order.shape[0] != n:
        raise ParameterError(f"fixed_order must have {n} entries")
    challenge = Challenge(n, cfg.delta, cfg.prior_one)
    sol = strategy_tables(graph, order, challenge)
    tables = []
    for t in range(sol.steps):
        entries = [
            {"own_signal": s, "observed": list(obs), "action": e.action, "posterior": e.posterior}
            for (s, obs), e in sorted(sol.tables[t].items())
        ]
        tables.append({"t": t + 1, "agent": int(order[t]), "neighbors": [int(order[u]) for u in sol.neighbors[t]], "entries": entries})
    rio.write_json({"family": cfg.family, "n": n, "k": k, "delta": cfg.delta, "prior_one": cfg.prior_one, "order": order.tolist(), "tables": tables}, cfg.output)
    return 0


DISPATCH = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "adversary": cmd_adversary,
    "derandomize": cmd_derandomize,
    "oracle": cmd_oracle,
}
assert set(DISPATCH) == set(COMMANDS)


def run_command(cfg: RunConfig) -> int:
    if cfg.seed is None:
        cfg.seed = seeding.fresh_root_seed()
        sys.stderr.write(f"sociallearn: no --seed given, using seed {cfg.seed}\n")
    sz = _sizing(cfg)
    if sz is not None and sz.clamped:
        sys.stderr.write(f"sociallearn: epsilon {cfg.epsilon} clamped to {sz.epsilon} (must not exceed 0.5 - delta)\n")
    return DISPATCH[cfg.command](cfg)


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return run_command(cfg)
    except SocialLearnError as exc:
        _error_record(type(exc).__name__, str(exc), exc.exit_code)
        return exc.exit_code
    except MemoryError:
        _error_record("ResourceError", "out of memory", 3)
        return 3
    except OSError as exc:
        _error_record("OutputError", str(exc), 3)
        return 3


if __name__ == "__main__":
    sys.exit(main())
