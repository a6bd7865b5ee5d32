"""Uncertainty from the MAP estimate alone.

Adds a compact blob to the simulated field, then asks whether the blob
and a matched background region carry physical structure, and prints local
credible intervals on the mean of each region at three confidence levels.

    python3 demos/uncertainty.py
"""

from ballreg import ExperimentConfig, run_experiment

cfg = ExperimentConfig(blob_amplitude=1.0, alpha=0.01)
rep = run_experiment(cfg, write=False)
print(f"h(x_map) = {rep['h_map']:.1f}, threshold at alpha={cfg.alpha}: {rep['epsilon_prime']:.1f}")
for t in rep.tests:
    print(f"{t.region:>10}: {t.outcome} (surrogate objective {t.h_surrogate:.1f})")
for a, ivs in rep.lci.items():
    for r, (lo, hi) in zip(rep.regions, ivs):
        print(f"alpha={a:<5} {r.label:>10}: [{lo:+.3f}, {hi:+.3f}] width {hi - lo:.3f}")
