"""
Ensembles with and without an eavesdropper
==========================================

The CHSH value separates a clean link from one where Eve intercepts 30% of
Bob's photons.  Matplotlib is optional; without it the script prints a table.
"""
from dataclasses import replace

import numpy as np

from qkdsim import load_preset, run_ensemble

trials = 20
clean_cfg = load_preset("paper-noneve").run
eve_cfg = load_preset("paper-eve30").run

clean = run_ensemble(clean_cfg, trials, jobs=2)
eve = run_ensemble(eve_cfg, trials, jobs=2)

for name, summary in (("no Eve", clean), ("Eve 30%", eve)):
    s, q = summary.abs_s, summary.stats["raw_qber"]
    print(f"{name:8s} |S| {s.mean:.3f} +- {s.std:.3f}   QBER {q.mean:.3f} +- {q.std:.3f}   "
          f"flagged {summary.eve_detection_rate:.0%}")

# Sweep the interception probability on short keys.
for p in (0.0, 0.1, 0.2, 0.3, 0.5):
    cfg = replace(eve_cfg, source=replace(eve_cfg.source, eve_prob=p))
    summary = run_ensemble(cfg, 10)
    print(f"eve_prob {p:.1f}: |S| {summary.abs_s.mean:.2f}  QBER {summary.stats['raw_qber'].mean:.3f}")

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots()
    for name, summary in (("no Eve", clean), ("Eve 30%", eve)):
        ax.scatter([t.raw_qber for t in summary.trials], [abs(t.s_value) for t in summary.trials], label=name)
    ax.axhline(2.0, color="k", lw=0.8)
    ax.set_xlabel("raw QBER")
    ax.set_ylabel("|S|")
    ax.legend()
    fig.savefig("eve_scatter.png", dpi=120)
    print("wrote eve_scatter.png")
