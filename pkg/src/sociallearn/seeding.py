"""Counter-based seed derivation.

Every random draw in the package descends from one integer root seed.  A
stream is addressed by ``(root, stream, index, *more)`` and realised as
``numpy.random.SeedSequence(root, spawn_key=(stream, index, *more))``, so the
numbers a trial sees depend only on its address, never on which worker ran it
or in what order.
"""

from __future__ import annotations

import numpy as np

# stream identifiers; part of the reproducibility contract, do not renumber
TRIAL_ORDER = 0
TRIAL_SIGNALS = 1
TRIAL_GRAPH = 2
RELABEL_SAMPLE = 3
PERMUTATION_MC = 4
ADVERSARY = 5


def fresh_root_seed() -> int:
    """Draw a 63-bit root seed from system entropy (to be printed by the caller)."""
    return int(np.random.SeedSequence().entropy) % (1 << 63)


def derive(root: int, stream: int, *index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(root), spawn_key=(int(stream),) + tuple(int(i) for i in index))


def rng(root: int, stream: int, *index: int) -> np.random.Generator:
    return np.random.default_rng(derive(root, stream, *index))


def as_generator(seed) -> np.random.Generator:
    """Accept an int, SeedSequence or Generator and return a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ledger(root: int, **counts: int) -> dict:
    """Everything needed to replay a run: the root plus how many indices each stream used."""
    return {
        "root_seed": int(root),
        "scheme": "numpy.SeedSequence(root, spawn_key=(stream, index, ...))",
        "streams": {k: int(v) for k, v in sorted(counts.items())},
    }
