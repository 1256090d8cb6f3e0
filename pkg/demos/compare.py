"""Iterations to a common target energy for DG and the gradient baselines.

    python demos/compare.py
"""

from dgopt.experiments import load_config, run_compare

cfg = load_config(preset="compare", overrides={"size": 48, "max_sweeps": 150})
res = run_compare(cfg)
print(f"target energy {res['target']:.4f}")
for row in res["rows"]:
    its = row["iterations"] if row["iterations"] is not None else "not reached"
    print(f"{row['solver']:11s} {its!s:>12}  final {row['final_energy']:.4f}  "
          f"{row['seconds']:.1f} s")
