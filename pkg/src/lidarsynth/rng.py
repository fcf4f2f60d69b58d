"""Deterministic counter-based random streams built on splitmix64.

Every random draw in the simulator is addressed by an explicit (stream key,
counter) pair instead of shared sequential generator state. Draws therefore
do not depend on evaluation order, which makes results bit-identical across
runs and across any number of worker threads.

Stream keys are produced by hash-chaining integer fields (seed, frame index,
sensor id, ray index, ...) through the splitmix64 finalizer. Draw ``j`` of a
stream with key ``k`` is ``mix64(k + (j + 1) * GOLDEN)``, i.e. the splitmix64
output sequence started at state ``k``.
"""

from __future__ import annotations

import numpy as np

# splitmix64 increment (2^64 / golden ratio, odd).
GOLDEN = np.uint64(0x9E3779B97F4A7C15)

_MASK64 = (1 << 64) - 1
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_U64_TO_UNIT = 2.0 ** -53  # top 53 bits -> [0, 1)


def mix64(x: np.ndarray | int) -> np.ndarray | np.uint64:
    """splitmix64 finalizer. Accepts a uint64 scalar or array (mod 2^64)."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):  # wrap-around is the point
        x = (x ^ (x >> np.uint64(30))) * _C1
        x = (x ^ (x >> np.uint64(27))) * _C2
        x = x ^ (x >> np.uint64(31))
    return x if x.ndim else np.uint64(x)


def stream_key(seed: int, *fields: int) -> np.uint64:
    """Hash-chain ``(seed, fields...)`` into a 64-bit stream key.

    Order-sensitive; each field is mixed before being absorbed so that
    e.g. (1, 2) and (2, 1) land on unrelated streams.
    """
    with np.errstate(over="ignore"):
        h = mix64(np.uint64(int(seed) & _MASK64) + GOLDEN)
        for f in fields:
            h = mix64(h ^ mix64(np.uint64(int(f) & _MASK64) + GOLDEN))
    return h


def substreams(key: np.uint64, indices: np.ndarray) -> np.ndarray:
    """Derive one stream key per index (vectorized tail of stream_key)."""
    idx = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(key) ^ mix64(idx + GOLDEN))


def uniforms(keys: np.ndarray | np.uint64, counter: int) -> np.ndarray:
    """Draw ``counter``-th uniform in [0, 1) from each stream in ``keys``."""
    k = np.asarray(keys, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = mix64(k + np.uint64(int(counter) + 1) * GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * _U64_TO_UNIT


def normals(keys: np.ndarray | np.uint64, counter: int) -> np.ndarray:
    """One standard normal per stream via Box-Muller.

    Consumes counters ``counter`` and ``counter + 1``; callers must not
    reuse them for other draws on the same stream.
    """
    u1 = uniforms(keys, counter)
    u2 = uniforms(keys, counter + 1)
    # 1 - u1 lies in (0, 1], so the log argument never hits zero.
    r = np.sqrt(-2.0 * np.log1p(-u1))
    return r * np.cos(2.0 * np.pi * u2)
