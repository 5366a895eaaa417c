"""
Reconciliation and privacy amplification on synthetic keys
==========================================================

Both classical stages work on any pair of bit arrays, so they can be studied
without running the photon simulation at all.
"""
import numpy as np

from qkdsim import make_stream, parity_hash, run_cascade
from qkdsim.cascade import binary_parity_correct, initial_block_size

rng = make_stream(3)
n = 600

# A single flipped bit is always found by bisection.
alice = rng.integers(0, 2, 16).astype(np.uint8)
bob = alice.copy()
bob[11] ^= 1
fix = binary_parity_correct(alice, bob)
print("one error in 16 bits:", fix.corrections, "corrected with", fix.parities, "parities")

# Residual errors after four passes over a range of error rates.
print(" qber  k1  residual(mean)  leaked/n")
for qber in (0.01, 0.03, 0.06, 0.10, 0.15):
    residual, leaked = [], []
    for _ in range(40):
        a = rng.integers(0, 2, n).astype(np.uint8)
        b = a.copy()
        b[rng.choice(n, int(qber * n), replace=False)] ^= 1
        res = run_cascade(a, b, 4, qber, rng)
        residual.append(res.residual_errors)
        leaked.append(res.leaked_bits / n)
    print(f" {qber:.2f} {initial_block_size(qber, n):3d} {np.mean(residual):10.2f} {np.mean(leaked):10.3f}")

# Parity hashing squeezes n bits into d; any one flipped input bit flips
# exactly one output bit.
key = rng.integers(0, 2, n).astype(np.uint8)
secret = parity_hash(key, 300)
key[42] ^= 1
print("output bits changed by one input flip:", np.count_nonzero(parity_hash(key, 300) != secret))
