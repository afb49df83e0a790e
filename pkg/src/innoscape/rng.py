"""Counter-based deterministic random streams.

Every random decision in the training protocol is a pure function of a
64-bit key. Keys are derived by folding indices into a parent key with a
splitmix64-style finalizer, so any tree, node, or draw can be recomputed
in isolation and in any order. The compiled tree builder implements the
same three primitives; tests pin the two implementations to each other.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """Finalize a 64-bit value into a well-mixed 64-bit value."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def fold(key: int, index: int) -> int:
    """Derive the child key at position `index` under `key`.

    Distinct indices under the same key yield independent streams.
    """
    return mix64((key ^ (((index + 1) * GAMMA) & MASK64)) & MASK64)


def draw(key: int, k: int) -> int:
    """Return the k-th 64-bit variate of the stream identified by `key`."""
    return mix64((key + ((k + 1) * GAMMA)) & MASK64)


def bounded(value: int, n: int) -> int:
    """Map a 64-bit variate onto [0, n) by modulo."""
    if n <= 0:
        raise ValueError("bound must be positive")
    return value % n


def subset_sorted(key: int, n: int, k: int) -> list[int]:
    """Draw k distinct indices from [0, n) and return them ascending.

    Partial Fisher-Yates over an identity array: position i swaps with
    position i + draw(key, i) % (n - i). The chosen prefix is then sorted
    so downstream consumers see candidates in a canonical order.
    """
    if not 0 < k <= n:
        raise ValueError("need 0 < k <= n")
    pool = list(range(n))
    for i in range(k):
        j = i + bounded(draw(key, i), n - i)
        pool[i], pool[j] = pool[j], pool[i]
    return sorted(pool[:k])
