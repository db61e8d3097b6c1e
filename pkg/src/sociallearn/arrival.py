"""Arrival orders, relabelings and the random order models that produce them.

An :class:`ArrivalOrder` stores ``order[t]``: the identity arriving at time
``t + 1``.  A "position map" (agent -> arrival time) is its inverse and is
available from :meth:`ArrivalOrder.positions`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .graphs import _check_permutation
from .seeding import as_generator


class _Permutation:
    """Immutable 1-based permutation backed by a read-only int64 array."""

    _label = "permutation"

    def __init__(self, values: Sequence[int] | np.ndarray):
        arr = np.asarray(values)
        arr = _check_permutation(arr, arr.shape[0] if arr.ndim == 1 else -1, self._label)
        if arr.shape[0] == 0:
            raise ParameterError(f"{self._label} must be nonempty")
        arr.setflags(write=False)
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n(self) -> int:
        return int(self._values.shape[0])

    def __len__(self) -> int:
        return self.n

    def __call__(self, i: int) -> int:
        return int(self._values[i - 1])

    def __iter__(self):
        return iter(self._values.tolist())

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return np.array_equal(self._values, other._values)

    def __hash__(self):
        return hash((type(self).__name__, self._values.tobytes()))

    def __repr__(self):
        body = self._values.tolist() if self.n <= 12 else f"<{self.n} entries>"
        return f"{type(self).__name__}({body})"

    def inverse_values(self) -> np.ndarray:
        inv = np.empty_like(self._values)
        inv[self._values - 1] = np.arange(1, self.n + 1)
        return inv

    def to_json(self) -> str:
        return json.dumps(self._values.tolist())

    @classmethod
    def from_json(cls, text: str):
        return cls(json.loads(text))

    @classmethod
    def identity(cls, n: int):
        return cls(np.arange(1, n + 1))


class ArrivalOrder(_Permutation):
    _label = "arrival order"

    @property
    def order(self) -> np.ndarray:
        return self._values

    def positions(self) -> np.ndarray:
        """``positions()[i - 1]`` is the arrival time of agent ``i``."""
        return self.inverse_values()

    @classmethod
    def from_positions(cls, positions: Sequence[int] | np.ndarray) -> "ArrivalOrder":
        return cls(_Permutation(positions).inverse_values())


class Relabeling(_Permutation):
    _label = "relabeling"

    @property
    def tau(self) -> np.ndarray:
        return self._values

    def inverse(self) -> "Relabeling":
        return Relabeling(self.inverse_values())


def uniform_order(n: int, seed) -> ArrivalOrder:
    """Uniformly random arrival order (numpy's Fisher-Yates shuffle)."""
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    rng = as_generator(seed)
    return ArrivalOrder(rng.permutation(n) + 1)


def uniform_relabeling(n: int, seed) -> Relabeling:
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    return Relabeling(as_generator(seed).permutation(n) + 1)


def weighted_order(weights: Sequence[float] | np.ndarray, seed) -> ArrivalOrder:
    """Draw agents one by one with probability proportional to weight, without replacement.

    Implemented as an exponential race: agent ``i`` finishes at an
    ``Exp(weights[i])`` time and agents arrive in finishing order.  The first
    finisher is ``i`` with probability ``w_i / sum(w)`` and memorylessness makes
    every later pick proportional to the remaining weights.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ParameterError("weights must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ParameterError("all weights must be positive and finite")
    rng = as_generator(seed)
    finish = rng.standard_exponential(w.size) / w
    return ArrivalOrder(np.argsort(finish, kind="stable") + 1)


@dataclass(frozen=True)
class UniformArrival:
    n: int

    name = "uniform"

    def sample(self, rng: np.random.Generator) -> ArrivalOrder:
        return uniform_order(self.n, rng)

    def to_dict(self) -> dict:
        return {"model": self.name}


@dataclass(frozen=True)
class WeightedArrival:
    weights: tuple[float, ...]

    name = "weighted"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ParameterError("all weights must be positive and finite")

    @property
    def n(self) -> int:
        return len(self.weights)

    def sample(self, rng: np.random.Generator) -> ArrivalOrder:
        return weighted_order(self.weights, rng)

    def to_dict(self) -> dict:
        return {"model": self.name, "weights": list(self.weights)}


@dataclass(frozen=True, eq=False)
class FixedArrival:
    order: ArrivalOrder

    name = "fixed"

    @property
    def n(self) -> int:
        return self.order.n

    def sample(self, rng: np.random.Generator) -> ArrivalOrder:
        return self.order

    def to_dict(self) -> dict:
        return {"model": self.name, "order": self.order.order.tolist()}


def compose(outer: _Permutation | np.ndarray, inner: _Permutation | np.ndarray) -> np.ndarray:
    """Values of ``outer(inner(i))`` for ``i = 1..n``."""
    o = getattr(outer, "values", outer)
    i = getattr(inner, "values", inner)
    return np.asarray(o)[np.asarray(i) - 1]
