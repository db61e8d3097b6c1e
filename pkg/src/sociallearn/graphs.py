"""Observation graphs and the celebrity sizing calculator.

Agent identities are 1-based throughout the public API.  The empty, clique and
celebrity families keep their adjacency implicit so a bi-clique over a million
agents costs one boolean per agent; only the ``explicit`` family stores edges.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ParameterError


class Role(str, Enum):
    CELEBRITY = "celebrity"
    COMMONER = "commoner"
    PLAIN = "plain"


FAMILIES = ("empty", "clique", "celebrity", "explicit")


def _check_permutation(values: Sequence[int] | np.ndarray, n: int, what: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ParameterError(f"{what} must list exactly {n} identities")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.mod(arr, 1) == 0):
            raise ParameterError(f"{what} must contain integers")
    arr = arr.astype(np.int64)
    seen = np.zeros(n + 1, dtype=bool)
    if arr.size and (arr.min() < 1 or arr.max() > n):
        raise ParameterError(f"{what} must be a permutation of 1..{n}")
    seen[arr] = True
    if not seen[1:].all():
        raise ParameterError(f"{what} must be a permutation of 1..{n}")
    return arr


@dataclass(frozen=True, eq=False)
class ObservationGraph:
    """Undirected visibility relation plus per-agent roles.

    ``is_celebrity`` is a read-only boolean array indexed by ``identity - 1``.
    """

    n: int
    family: str
    k: int = 0
    relabeling: np.ndarray | None = None
    explicit_edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)
    is_celebrity: np.ndarray = field(init=False, repr=False)
    _adjacency: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown graph family {self.family!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n!r}")
        flags = np.zeros(self.n, dtype=bool)
        if self.family == "celebrity":
            if not (1 <= self.k < self.n):
                raise ParameterError(f"celebrity graph needs 1 <= k < n, got k={self.k}, n={self.n}")
            if self.relabeling is None:
                flags[: self.k] = True
            else:
                tau = _check_permutation(self.relabeling, self.n, "relabeling")
                tau.setflags(write=False)
                object.__setattr__(self, "relabeling", tau)
                flags = tau <= self.k
        elif self.k:
            raise ParameterError(f"k is only meaningful for the celebrity family, got k={self.k}")
        flags.setflags(write=False)
        object.__setattr__(self, "is_celebrity", flags)
        if self.family == "explicit":
            adj: dict[int, set[int]] = {}
            for i, j in self.explicit_edges:
                if i == j:
                    raise ParameterError(f"self-loop at agent {i}")
                if not (1 <= i <= self.n and 1 <= j <= self.n):
                    raise ParameterError(f"edge ({i}, {j}) outside 1..{self.n}")
                adj.setdefault(i, set()).add(j)
                adj.setdefault(j, set()).add(i)
            object.__setattr__(self, "_adjacency", {i: frozenset(v) for i, v in adj.items()})

    def __eq__(self, other):
        if not isinstance(other, ObservationGraph):
            return NotImplemented
        return (
            self.n == other.n
            and self.family == other.family
            and self.k == other.k
            and np.array_equal(self.is_celebrity, other.is_celebrity)
            and self._edge_key() == other._edge_key()
        )

    def __hash__(self):
        return hash((self.n, self.family, self.k, self.is_celebrity.tobytes(), self._edge_key()))

    def _edge_key(self):
        return frozenset((min(e), max(e)) for e in self.explicit_edges)

    def role(self, agent: int) -> Role:
        self._check_agent(agent)
        if self.family != "celebrity":
            return Role.PLAIN
        return Role.CELEBRITY if self.is_celebrity[agent - 1] else Role.COMMONER

    def celebrity(self, agent: int) -> bool:
        return self.family == "celebrity" and bool(self.is_celebrity[agent - 1])

    def celebrities(self) -> np.ndarray:
        return np.flatnonzero(self.is_celebrity) + 1

    def adjacent(self, i: int, j: int) -> bool:
        if i == j:
            return False
        if self.family == "empty":
            return False
        if self.family == "clique":
            return True
        if self.family == "celebrity":
            return bool(self.is_celebrity[i - 1] != self.is_celebrity[j - 1])
        return j in self._adjacency.get(i, ())

    def neighbors(self, agent: int) -> Iterator[int]:
        self._check_agent(agent)
        if self.family == "empty":
            return iter(())
        if self.family == "clique":
            return (j for j in range(1, self.n + 1) if j != agent)
        if self.family == "celebrity":
            other_side = ~self.is_celebrity if self.is_celebrity[agent - 1] else self.is_celebrity
            return iter((np.flatnonzero(other_side) + 1).tolist())
        return iter(sorted(self._adjacency.get(agent, ())))

    def degree(self, agent: int) -> int:
        self._check_agent(agent)
        if self.family == "empty":
            return 0
        if self.family == "clique":
            return self.n - 1
        if self.family == "celebrity":
            return self.n - self.k if self.is_celebrity[agent - 1] else self.k
        return len(self._adjacency.get(agent, ()))

    def num_edges(self) -> int:
        if self.family == "empty":
            return 0
        if self.family == "clique":
            return self.n * (self.n - 1) // 2
        if self.family == "celebrity":
            return self.k * (self.n - self.k)
        return len(self._edge_key())

    def edges(self) -> Iterator[tuple[int, int]]:
        """Materialise the edge list as ``(i, j)`` pairs with ``i < j``."""
        for i in range(1, self.n + 1):
            for j in self.neighbors(i):
                if j > i:
                    yield (i, j)

    def _check_agent(self, agent: int) -> None:
        if not (1 <= agent <= self.n):
            raise ParameterError(f"agent {agent} outside 1..{self.n}")

    def to_dict(self) -> dict:
        doc: dict = {"n": self.n, "family": self.family}
        if self.family == "celebrity":
            doc["k"] = self.k
            if self.relabeling is not None:
                doc["relabeling"] = self.relabeling.tolist()
        if self.family == "explicit":
            doc["edges"] = [list(e) for e in sorted(self._edge_key())]
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "ObservationGraph":
        allowed = {"n", "k", "family", "relabeling", "edges"}
        unknown = set(doc) - allowed
        if unknown:
            raise ParameterError(f"unknown graph keys: {sorted(unknown)}")
        family = doc.get("family")
        n = doc.get("n")
        if family == "empty":
            return build_empty(n)
        if family == "clique":
            return build_clique(n)
        if family == "celebrity":
            tau = doc.get("relabeling")
            if tau is None:
                return build_celebrity(n, doc.get("k"))
            return relabeled_celebrity(n, doc.get("k"), tau)
        if family == "explicit":
            return build_explicit(n, doc.get("edges", []))
        raise ParameterError(f"unknown graph family {family!r}")

    @classmethod
    def from_json(cls, text: str) -> "ObservationGraph":
        return cls.from_dict(json.loads(text))


def build_empty(n: int) -> ObservationGraph:
    return ObservationGraph(n, "empty")


def build_clique(n: int) -> ObservationGraph:
    return ObservationGraph(n, "clique")


def build_celebrity(n: int, k: int) -> ObservationGraph:
    """Bi-clique between celebrities ``1..k`` and commoners ``k+1..n``."""
    if k is None or n is None or not (1 <= k < n):
        raise ParameterError(f"celebrity graph needs 1 <= k < n, got k={k}, n={n}")
    return ObservationGraph(n, "celebrity", k)


def relabeled_celebrity(n: int, k: int, relabeling) -> ObservationGraph:
    """Celebrity graph where agent ``i`` is a celebrity iff ``relabeling(i) <= k``.

    ``relabeling`` may be a :class:`~sociallearn.arrival.Relabeling` or any
    sequence holding ``tau(1), ..., tau(n)``.
    """
    tau = getattr(relabeling, "tau", relabeling)
    return ObservationGraph(n, "celebrity", k, relabeling=np.asarray(tau))


def build_explicit(n: int, edges: Iterable[Sequence[int]]) -> ObservationGraph:
    pairs = []
    for e in edges:
        if len(e) != 2:
            raise ParameterError(f"edge {e!r} is not a pair")
        pairs.append((int(e[0]), int(e[1])))
    return ObservationGraph(n, "explicit", explicit_edges=frozenset(pairs))


def _ceil(x: float) -> int:
    # absorb float noise such as 1/(0.1**2 * 0.4) == 249.99999999999997
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


@dataclass(frozen=True)
class GraphSizing:
    epsilon: float
    delta: float
    J: int
    K: int
    N_hat: int
    requested_epsilon: float

    @property
    def clamped(self) -> bool:
        return self.epsilon != self.requested_epsilon

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "requested_epsilon": self.requested_epsilon,
            "clamped": self.clamped,
            "delta": self.delta,
            "J": self.J,
            "K": self.K,
            "N_hat": self.N_hat,
        }


def clamp_epsilon(epsilon: float, delta: float) -> float:
    """Clamp to ``epsilon <= 0.5 - delta`` (skipped when delta = 0.5, where the bound is 0)."""
    if not (0.0 < delta <= 0.5):
        raise ParameterError(f"delta must satisfy 0 < delta <= 0.5, got {delta!r}")
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon!r}")
    bound = 0.5 - delta
    if bound > 0 and epsilon > bound:
        return bound
    return epsilon


def sizing(epsilon: float, delta: float) -> GraphSizing:
    """Guinea-pig threshold J, celebrity count K and sufficient population N_hat."""
    eps = clamp_epsilon(epsilon, delta)
    J = _ceil(1.0 / (delta * delta * eps))
    K = _ceil(8.0 / eps * math.log(4.0 / eps))
    N_hat = _ceil(128.0 / (eps**3 * delta * delta) * math.log(4.0 / eps))
    # ceilings can break N_hat >= 8JK/eps + J; restore it rather than report a weaker N_hat
    N_hat = max(N_hat, _ceil(8.0 * J * K / eps) + J)
    return GraphSizing(eps, delta, J, K, N_hat, requested_epsilon=epsilon)
