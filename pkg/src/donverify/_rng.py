"""Counter-based random streams built on the SplitMix64 finalizer.

Every random draw is a pure function of ``(seed, donor_id)``, so verifier
samples do not depend on iteration order and can be computed in bulk with
numpy.  Trial seeds are a pure function of ``(master_seed, trial_index)``.
"""
from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 output function applied elementwise to a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def donor_key(donor_id: str) -> int:
    digest = hashlib.blake2b(str(donor_id).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def donor_keys(donor_ids) -> np.ndarray:
    return np.array([donor_key(d) for d in donor_ids], dtype=np.uint64)


def seed_keys(seeds) -> np.ndarray:
    """Whiten integer seeds (any size or sign) into 64-bit stream keys."""
    raw = np.array([(int(s) + GOLDEN) & MASK64 for s in np.atleast_1d(seeds)], dtype=np.uint64)
    return mix64(raw)


def uniforms(seed_key_arr: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) draws for every (seed key, donor key) pair.

    ``seed_key_arr`` has shape ``(t,)`` and ``keys`` shape ``(n,)``; the
    result has shape ``(t, n)``.
    """
    s = np.asarray(seed_key_arr, dtype=np.uint64)[:, None]
    z = mix64(s ^ np.asarray(keys, dtype=np.uint64)[None, :])
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def trial_seeds(master_seed: int, start: int, stop: int) -> np.ndarray:
    """Seeds for trials ``start..stop-1`` derived from ``master_seed``."""
    base = int(seed_keys([master_seed])[0])
    idx = np.arange(start + 1, stop + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(base) + idx * np.uint64(GOLDEN))


def trial_seed(master_seed: int, index: int) -> int:
    return int(trial_seeds(master_seed, index, index + 1)[0])


def seed_keys_u64(seeds: np.ndarray) -> np.ndarray:
    """Vectorized :func:`seed_keys` for seeds already reduced to uint64."""
    with np.errstate(over="ignore"):
        return mix64(np.asarray(seeds, dtype=np.uint64) + np.uint64(GOLDEN))
