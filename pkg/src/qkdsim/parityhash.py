"""ParityHash privacy amplification.

The reconciled key of length ``n`` is cut into ``d`` blocks: ``d - 1`` blocks
of ``floor(n / d)`` bits and a final block holding everything left over.  Each
block contributes its XOR parity to the secret key.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import KeyTooShortError


@dataclass
class SecretKeyResult:
    alice_secret: np.ndarray
    bob_secret: np.ndarray
    secret_key_rate: float

    @property
    def keys_match(self) -> bool:
        return bool(np.array_equal(self.alice_secret, self.bob_secret))


def pa_block_size(n: int, d: int) -> int:
    if d < 1:
        raise ValueError(f"desired length must be >= 1, got {d}")
    if n < d:
        raise KeyTooShortError(f"reconciled key has {n} bits, fewer than the {d} requested")
    return n // d


def block_boundaries(n: int, d: int) -> np.ndarray:
    """Start offsets of the ``d`` blocks."""
    return np.arange(d) * pa_block_size(n, d)


def parity_hash(key, d: int) -> np.ndarray:
    bits = np.asarray(key, dtype=np.uint8)
    starts = block_boundaries(len(bits), d)
    return np.bitwise_xor.reduceat(bits, starts).astype(np.uint8)


def run_privacy_amplification(alice_key, bob_key, d: int, elapsed_time: float) -> SecretKeyResult:
    if len(alice_key) != len(bob_key):
        raise ValueError("reconciled keys must have equal length")
    if not elapsed_time > 0:
        raise ValueError(f"elapsed_time must be positive, got {elapsed_time!r}")
    return SecretKeyResult(parity_hash(alice_key, d), parity_hash(bob_key, d), d / elapsed_time)
