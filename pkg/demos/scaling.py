"""Linear rate against resolution on centre-square inpainting.

Measured rates drop by about 4 per level; the closed-form estimate and the
step-size bound are printed alongside.

    python demos/scaling.py
"""

from dgopt.experiments import load_config, run_scaling

cfg = load_config(preset="scaling", overrides={"resolutions": "4,5",
                                               "sweeps_base": 300})
for r in run_scaling(cfg)["rows"]:
    print(f"m={r['m']}  rate {r['rate']:.3e}  estimate {r['predicted_rate']:.3e}  "
          f"bound {r['bound_rate']:.3e}")
