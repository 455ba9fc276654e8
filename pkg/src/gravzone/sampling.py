"""Deterministic randomness and split utilities.

All stochastic steps in this package draw from numpy's PCG64 generator,
which is fully specified and platform-independent. Parallel work never
shares a generator: each task derives its own child seed with
:func:`derive_seed`, so results are identical no matter how many threads
run or in which order tasks complete.

Stream-splitting rule: ``child = mix64(master + GOLDEN * (index + 1))``
where ``mix64`` is the SplitMix64 finalizer and GOLDEN is 2**64 / phi.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit avalanche mix."""
    z &= _MASK64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, index: int) -> int:
    """Derive the child seed for task `index` from a master seed."""
    return _mix64((master + _GOLDEN * (index + 1)) & _MASK64)


def make_rng(seed: int) -> np.random.Generator:
    """Create the package-standard generator (PCG64) for a seed."""
    return np.random.Generator(np.random.PCG64(seed & _MASK64))


def round_half_up(x: float) -> int:
    """Round to nearest integer, halves away from zero toward +inf.

    Used wherever the package converts a fraction of a count into a
    count, so the rule is identical everywhere (Python's built-in round
    is half-to-even, which is harder to reason about in tests).
    """
    return int(np.floor(x + 0.5))


def stratified_split_indices(
    y: np.ndarray, test_fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Split indices into (train, test) preserving class proportions.

    Per class, the test split receives ``round_half_up(f * n_c)`` members,
    clamped to [1, n_c - 1] so both splits see every class. Callers must
    ensure every class has at least 2 members.
    """
    y = np.asarray(y)
    train_parts, test_parts = [], []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        perm = rng.permutation(idx.size)
        n_test = min(max(round_half_up(test_fraction * idx.size), 1), idx.size - 1)
        test_parts.append(idx[perm[:n_test]])
        train_parts.append(idx[perm[n_test:]])
    train = np.sort(np.concatenate(train_parts))
    test = np.sort(np.concatenate(test_parts))
    return train, test


def stratified_kfold_indices(
    y: np.ndarray, k_folds: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Assign indices to k folds, dealing each class round-robin after a
    seeded shuffle. Returns a list of k index arrays (some may be empty
    for a class rarer than k, but every sample lands in exactly one fold).
    """
    y = np.asarray(y)
    folds: list[list[int]] = [[] for _ in range(k_folds)]
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        shuffled = idx[rng.permutation(idx.size)]
        for pos, sample in enumerate(shuffled):
            folds[pos % k_folds].append(int(sample))
    return [np.sort(np.array(f, dtype=int)) for f in folds]
