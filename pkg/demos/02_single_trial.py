"""
One trial, stage by stage
=========================

Bit generation, Cascade and parity hashing on the default scenario, with the
link budget that comes out the other end.
"""
from dataclasses import asdict

import numpy as np

from qkdsim import RunConfig, run_trial_detailed

cfg = RunConfig(desired_key_length=300, seed=17)
out = run_trial_detailed(cfg)

raw = out.bitgen
print(f"pumps {raw.pump_count:,}  pairs {raw.pair_count}  coincidences {raw.coincidence_count}")
print(f"sifted bits {raw.key_length}  raw QBER {raw.raw_qber:.3f}  S {raw.s_value:.3f}")
print(f"simulated time {raw.elapsed_time:.3f} s")

rec = out.cascade
print(f"Cascade block sizes {rec.block_sizes}")
print(f"errors {rec.initial_errors} -> corrected {rec.corrected_errors}, left {rec.residual_errors}")
print(f"residual after each pass {rec.residual_after_iteration}, leaked {rec.leaked_bits} bits")

sec = out.secret
print(f"secret key {len(sec.alice_secret)} bits, keys match: {sec.keys_match}")
print("first 32 bits:", "".join(map(str, sec.alice_secret[:32])))

for name, value in asdict(out.budget).items():
    print(f"  {name:28s} {value}")

# The rates line up the way the stages consume bits.
b = out.budget
assert b.secret_key_rate <= b.reconciled_key_rate <= b.raw_key_rate
print("agreement before/after Cascade:",
      np.mean(raw.alice_raw_key == raw.bob_raw_key), np.mean(rec.alice_key == rec.bob_key))
