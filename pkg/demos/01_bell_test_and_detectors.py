"""
Bell test and detector model
============================

How far the Ekert bases sit from the classical CHSH limit, and what a lossy
photon counter does to a multi-photon input.
"""
import numpy as np

from qkdsim import EKERT_BASES, DetectorParams, povm_no_click, povm_single_click, same_bit_probability
from qkdsim.bitgen import classical_s, ideal_correlation, theoretical_s

# Every pairing of Alice's and Bob's analysers, with the probability that
# both sides read the same bit.  Matching angles give 0: the singlet always
# anti-correlates, which is why Bob inverts his sifted bits.
for a in EKERT_BASES.alice:
    row = [f"{same_bit_probability(a, b):.3f}" for b in EKERT_BASES.bob]
    print(a.label.name, row)

print("ideal correlation A1/B1:", ideal_correlation(EKERT_BASES.alice[0], EKERT_BASES.bob[0]))
print("S for the singlet:", theoretical_s(), " classical bound:", classical_s())

# Click probabilities of the default detector for n photons.
d = DetectorParams(eta_d=0.8, v_d=2e-4, rho_d=0.8)
n = np.arange(5)
no_click = np.array([povm_no_click(k, d) for k in n])
click = np.array([povm_single_click(k, d) for k in n])
print("n      ", n)
print("P(0|n) ", np.round(no_click, 4))
print("P(1|n) ", np.round(click, 4))
print("missing", np.round(1 - no_click - click, 4) + 0.0, "(multi-click mass, zero when rho_d = 0)")
