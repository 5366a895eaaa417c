"""Cascade information reconciliation.

Keys are ``numpy`` arrays of 0/1 ``uint8``.  Bob's key is corrected towards
Alice's; Alice's key is never modified.

Two leakage measures are reported.  ``leaked_bits`` charges two bits per
corrected error, which is what the reconciled key rate uses.
``leaked_parities`` counts every parity (or single bit) disclosed on the
public channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import RandomStream

BITS_LEAKED_PER_CORRECTION = 2


class BlockCorrection(NamedTuple):
    bob_block: np.ndarray
    corrections: int
    parities: int


class IterationResult(NamedTuple):
    bob_key: np.ndarray
    corrections: int
    parities: int


@dataclass
class CascadeResult:
    alice_key: np.ndarray
    bob_key: np.ndarray
    leaked_bits: int
    corrected_errors: int
    residual_errors: int
    iterations_run: int
    leaked_parities: int = 0
    initial_errors: int = 0
    block_sizes: tuple[int, ...] = ()
    residual_after_iteration: tuple[int, ...] = ()

    @property
    def key_length(self) -> int:
        return len(self.alice_key)


def _as_bits(key) -> np.ndarray:
    arr = np.asarray(key, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("keys must be one-dimensional bit arrays")
    return arr


def _parity(bits: np.ndarray) -> int:
    return int(np.bitwise_xor.reduce(bits)) if len(bits) else 0


def initial_block_size(qber: float, key_length: int) -> int:
    """``0.73 / qber`` rounded half-up, at least 2 and at most ``key_length``."""
    if key_length < 1:
        raise ValueError("key_length must be >= 1")
    if qber < 0:
        raise ValueError(f"qber must be non-negative, got {qber!r}")
    if qber == 0:
        return key_length
    # the epsilon keeps exact quotients such as 0.73 / 0.01 from rounding down
    size = math.floor(0.73 / qber + 0.5 + 1e-9)
    return min(max(size, 2), key_length)


def next_block_size(previous: int, key_length: int) -> int:
    return min(2 * previous, key_length)


def _locate_error(alice: np.ndarray, bob: np.ndarray) -> tuple[int, int]:
    """Bisect a block whose parities are known to differ.

    Returns the offset of a differing bit and the number of extra parities
    disclosed.  The left half gets ``ceil(len / 2)`` bits; at a two-bit base
    case the first bit is disclosed.
    """
    parities = 0
    lo, hi = 0, len(bob)
    while hi - lo > 2:
        mid = lo + (hi - lo + 1) // 2
        parities += 1
        if _parity(alice[lo:mid]) != _parity(bob[lo:mid]):
            hi = mid
        else:
            lo = mid
    if hi - lo == 2:
        parities += 1
        return (lo if alice[lo] != bob[lo] else lo + 1), parities
    return lo, parities


def binary_parity_correct(alice_block, bob_block) -> BlockCorrection:
    """Compare block parities and, on mismatch, bisect down to the wrong bit.

    Returns a corrected copy of Bob's block.  A block with an even number of
    errors passes unchanged.
    """
    alice = _as_bits(alice_block)
    bob = _as_bits(bob_block).copy()
    if len(alice) != len(bob) or len(alice) == 0:
        raise ValueError("blocks must be non-empty and of equal length")
    if _parity(alice) == _parity(bob):
        return BlockCorrection(bob, 0, 1)
    wrong, extra = _locate_error(alice, bob)
    bob[wrong] ^= 1
    return BlockCorrection(bob, 1, 1 + extra)


def cascade_iteration(alice_key, bob_key, block_size: int) -> IterationResult:
    alice = _as_bits(alice_key)
    bob = _as_bits(bob_key).copy()
    if len(alice) != len(bob):
        raise ValueError("keys must have equal length")
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    corrections = parities = 0
    for start in range(0, len(alice), block_size):
        stop = start + block_size
        fixed = binary_parity_correct(alice[start:stop], bob[start:stop])
        bob[start:stop] = fixed.bob_block
        corrections += fixed.corrections
        parities += fixed.parities
    return IterationResult(bob, corrections, parities)


def draw_shuffle(stream: RandomStream, n: int) -> np.ndarray:
    return stream.permutation(n)


def shuffle_in_unison(stream: RandomStream, alice_key, bob_key) -> tuple[np.ndarray, np.ndarray]:
    alice = _as_bits(alice_key)
    bob = _as_bits(bob_key)
    if len(alice) != len(bob):
        raise ValueError("keys must have equal length")
    order = draw_shuffle(stream, len(alice))
    return alice[order], bob[order]


class _Pass:
    """One Cascade pass: a key ordering cut into fixed-size blocks."""

    def __init__(self, order: np.ndarray, block_size: int):
        self.order = order
        self.block_size = block_size
        self.position = np.empty_like(order)
        self.position[order] = np.arange(len(order))

    def block_of(self, index: int) -> int:
        return int(self.position[index]) // self.block_size

    def members(self, block: int) -> np.ndarray:
        return self.order[block * self.block_size:(block + 1) * self.block_size]

    @property
    def n_blocks(self) -> int:
        return -(-len(self.order) // self.block_size)


def run_cascade(alice_key, bob_key, iterations: int, initial_qber: float, stream: RandomStream,
                trace_back: bool = True) -> CascadeResult:
    """Reconcile Bob's key against Alice's.

    Pass 1 uses ``initial_block_size(initial_qber)``; each later pass reshuffles
    both keys with the same permutation and doubles the block size.  With
    ``trace_back`` every correction re-opens the blocks of earlier passes that
    contain the flipped bit, which now have odd error parity, and bisects them
    too.  With ``trace_back=False`` passes run strictly forward.

    Keys are returned in their input order; the shuffles act on index
    permutations only.
    """
    alice = _as_bits(alice_key).copy()
    bob = _as_bits(bob_key).copy()
    if len(alice) != len(bob):
        raise ValueError("keys must have equal length")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    n = len(alice)
    initial_errors = int(np.count_nonzero(alice != bob))
    if n == 0:
        return CascadeResult(alice, bob, 0, 0, 0, 0)

    passes: list[_Pass] = []
    corrections = parities = 0
    residuals = []

    def fix(members: np.ndarray) -> int:
        nonlocal corrections, parities
        offset, extra = _locate_error(alice[members], bob[members])
        parities += extra
        index = int(members[offset])
        bob[index] ^= 1
        corrections += 1
        return index

    def cascade_from(index: int, origin: int) -> None:
        # each pending entry is (pass number, block number) whose parity just flipped
        pending = [(j, passes[j].block_of(index)) for j in range(len(passes)) if j != origin]
        while pending:
            j, block = pending.pop()
            members = passes[j].members(block)
            if _parity(alice[members]) == _parity(bob[members]):
                continue
            flipped = fix(members)
            pending.extend((m, passes[m].block_of(flipped)) for m in range(len(passes)) if m != j)

    block = initial_block_size(initial_qber, n)
    for k in range(iterations):
        if k == 0:
            order = np.arange(n)
        else:
            order = draw_shuffle(stream, n)
            block = next_block_size(block, n)
        current = _Pass(order, block)
        passes.append(current)
        for b in range(current.n_blocks):
            members = current.members(b)
            parities += 1
            if _parity(alice[members]) == _parity(bob[members]):
                continue
            flipped = fix(members)
            if trace_back:
                cascade_from(flipped, k)
        residuals.append(int(np.count_nonzero(alice != bob)))

    return CascadeResult(
        alice_key=alice,
        bob_key=bob,
        leaked_bits=BITS_LEAKED_PER_CORRECTION * corrections,
        corrected_errors=corrections,
        residual_errors=residuals[-1],
        iterations_run=iterations,
        leaked_parities=parities,
        initial_errors=initial_errors,
        block_sizes=tuple(p.block_size for p in passes),
        residual_after_iteration=tuple(residuals),
    )
