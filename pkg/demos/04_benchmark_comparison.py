"""Compare batch strategies on Hartmann-6 with the experiment harness.

Writes run files under ``demo_out/`` and prints the comparison table that
``easybo compare`` would show.
"""

from pathlib import Path

from easybo.harness import ExperimentConfig, compare_report, run_experiment

out = Path("demo_out")
common = dict(problem="hartmann6", B=5, budget=60, n_init=10, repeats=3, base_seed=11, refit_every=5, fit_restarts=3)
setups = [
    ("async", "EASYBO"),
    ("async", "EASYBO_A"),
    ("sync", "EASYBO_SP"),
    ("sync", "PBO"),
    ("sync", "PHCBO"),
]
results = []
for regime, variant in setups:
    cfg = ExperimentConfig(regime=regime, variant=variant, out=str(out / f"{variant}_{regime}"), **common)
    res = run_experiment(cfg)
    s = res.summary
    print(f"{variant:<10} {regime:<6} best {s.best:.4f} mean {s.mean:.4f} std {s.std:.4f} time {s.mean_time:.1f}")
    results.append(res)

print()
print(compare_report(results).format_table())
