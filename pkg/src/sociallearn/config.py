"""Run configuration: one JSON document or the equivalent command-line flags.

Every field of :class:`RunConfig` is a JSON key and a flag (underscores
become dashes).  Values from a config file are overridden by flags.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, fields

from .errors import ParameterError, UsageError

COMMANDS = ("simulate", "sweep", "verify", "adversary", "derandomize", "oracle")
VERIFY_TARGETS = ("lemma1", "lemma2", "lemma3", "thm4", "thm5", "thm6", "lem4", "cor2")
FAMILIES = ("empty", "clique", "celebrity")
ORDER_MODELS = ("uniform", "weighted", "fixed")
POLICIES = ("paper", "exact")
FORMATS = ("csv", "json", "text")
WORKERS_ENV = "SOCIALLEARN_WORKERS"


@dataclass
class RunConfig:
    command: str
    target: str | None = None
    family: str = "celebrity"
    n: int | None = None
    k: int | None = None
    j: int | None = None
    epsilon: float | None = None
    delta: float = 0.1
    prior_one: float = 0.5
    order: str = "uniform"
    weights: list[float] | None = None
    fixed_order: list[int] | None = None
    policy: str = "paper"
    trials: int = 100
    seed: int | None = None
    confidence: float = 0.95
    workers: int | None = None
    n_values: list[int] | None = None
    budget: int = 40320
    samples: int = 50
    mc_samples: int = 100_000
    max_agents: int = 5_000_000
    ladder: bool = False
    output: str | None = None
    format: str | None = None
    plot_dir: str | None = None
    trace: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        cfg = cls(**_typed(doc))
        cfg.validate()
        return cfg

    def validate(self) -> "RunConfig":
        """Check every documented precondition before any work starts."""
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if self.command == "verify" and self.target not in VERIFY_TARGETS:
            raise UsageError(f"verify needs a target in {', '.join(VERIFY_TARGETS)}, got {self.target!r}")
        _choice("family", self.family, FAMILIES)
        _choice("order", self.order, ORDER_MODELS)
        _choice("policy", self.policy, POLICIES)
        if self.format is not None:
            _choice("format", self.format, FORMATS)
        if not (0 < self.delta <= 0.5):
            raise ParameterError(f"delta must lie in (0, 0.5], got {self.delta!r}")
        if not (0 < self.prior_one < 1):
            raise ParameterError(f"prior_one must lie in (0, 1), got {self.prior_one!r}")
        if self.epsilon is not None and not (0 < self.epsilon < 1):
            raise ParameterError(
                f"epsilon must lie in (0, 1), got {self.epsilon!r}; values above 0.5 - delta are clamped to 0.5 - delta"
            )
        if not (0 < self.confidence < 1):
            raise ParameterError(f"confidence must lie in (0, 1), got {self.confidence!r}")
        for name in ("trials", "budget", "samples", "max_agents"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be at least 1")
        if self.mc_samples < 0:
            raise ParameterError("mc_samples must be nonnegative")
        if self.workers is not None and self.workers < 1:
            raise ParameterError("workers must be at least 1")
        if self.seed is not None and self.seed < 0:
            raise ParameterError("seed must be nonnegative")
        if self.n is not None and self.n < 1:
            raise ParameterError("n must be at least 1")
        if self.k is not None and self.n is not None and self.family == "celebrity" and not (1 <= self.k < self.n):
            raise ParameterError(f"celebrity graphs need 1 <= k < n, got k={self.k}, n={self.n}")
        if self.j is not None and self.j < 0:
            raise ParameterError("j must be nonnegative")
        if self.n_values is not None and (not self.n_values or min(self.n_values) < 1):
            raise ParameterError("n_values must be a nonempty list of positive integers")
        if self.weights is not None:
            if any(not math.isfinite(w) or w <= 0 for w in self.weights):
                raise ParameterError("weights must be positive and finite")
            if self.n is not None and len(self.weights) != self.n:
                raise ParameterError(f"expected {self.n} weights, got {len(self.weights)}")
        if self.order == "weighted" and self.weights is None:
            raise ParameterError("order 'weighted' needs weights")
        if self.fixed_order is not None:
            n = self.n if self.n is not None else len(self.fixed_order)
            if sorted(self.fixed_order) != list(range(1, n + 1)):
                raise ParameterError("fixed_order must be a permutation of 1..n")
        if self.order == "fixed" and self.fixed_order is None:
            raise ParameterError("order 'fixed' needs fixed_order")
        if self.policy == "paper" and self.prior_one != 0.5:
            raise ParameterError("the paper policy assumes prior_one = 0.5; use policy 'exact'")
        return self

    def resolved_workers(self) -> int:
        return self.workers if self.workers is not None else 1


_INT = {"n", "k", "j", "trials", "seed", "workers", "budget", "samples", "mc_samples", "max_agents"}
_FLOAT = {"epsilon", "delta", "prior_one", "confidence"}
_STR = {"command", "target", "family", "order", "policy", "output", "format", "plot_dir", "trace"}


def _choice(name, value, options):
    if value not in options:
        raise ParameterError(f"{name} must be one of {', '.join(options)}, got {value!r}")


def _typed(doc: dict) -> dict:
    """Check key names and JSON value types; the offending key is named."""
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for key, value in doc.items():
        if key not in known:
            raise UsageError(f"unknown configuration key {key!r}")
        if value is None:
            out[key] = None
            continue
        if key in _INT:
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif key in _FLOAT:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            value = float(value) if ok else value
        elif key in _STR:
            ok = isinstance(value, str)
        elif key == "ladder":
            ok = isinstance(value, bool)
        elif key == "weights":
            ok = isinstance(value, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
            value = [float(v) for v in value] if ok else value
        else:  # fixed_order, n_values
            ok = isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
        if not ok:
            raise UsageError(f"configuration key {key!r} has the wrong type: {value!r}")
        out[key] = value
    if "command" not in out or out["command"] is None:
        raise UsageError("configuration needs a command")
    return out


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    return doc


def merge(file_doc: dict | None, flags: dict, env=None) -> RunConfig:
    """Defaults, then the file, then the worker env var, then explicit flags."""
    env = os.environ if env is None else env
    doc = dict(file_doc or {})
    if env.get(WORKERS_ENV):
        try:
            doc["workers"] = int(env[WORKERS_ENV])
        except ValueError:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {env[WORKERS_ENV]!r}") from None
    doc.update(flags)
    return RunConfig.from_dict(doc)
