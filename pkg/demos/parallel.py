"""Separator/block sweeps give the same answer for any worker count.

    python demos/parallel.py
"""

import os

from dgopt.core import SolverConfig
from dgopt.imaging import corrupt, phantom
from dgopt.objectives import ImagingObjective, elastica
from dgopt.parallel import ParallelPlan, dg_parallel_run
from dgopt.partition import build_partition

g = corrupt(phantom(96), "gaussian", seed=2, sigma=0.1)
obj = ImagingObjective(g, elastica(0.5, 0.5, 1e-2), h=1.0)
part = build_partition(obj.shape, obj.dependency_radius(), 8, 1)
print(f"{part.M} blocks, {part.N} separators, {os.cpu_count()} cpus")

ref = None
for workers in (1, 2, 4):
    u, tr = dg_parallel_run(obj, g, SolverConfig(tau=0.05, max_sweeps=20),
                            ParallelPlan(part, workers))
    same = ref is None or (u == ref).all()
    ref = u if ref is None else ref
    print(f"workers {workers}: block phase {tr.meta['block_phase_ms']:.0f} ms, "
          f"identical to 1 worker: {same}")
