"""Itoh-Abe discrete-gradient optimisation for imaging energies."""

from .baselines import ArmijoParams, gradient_descent_run, heavy_ball_run
from .core import (AdaptConfig, ConvergenceTrace, SolverConfig, SolverError,
                   dg_adapt_run, dg_run, dg_sweep, theory_constants,
                   tv_inpainting_rate, wolfe_check)
from .imaging import (ImageGrid, Mask, corrupt, load_image, load_mask,
                      make_mask, phantom, psnr, save_image, save_mask, ssim)
from .objectives import (Fidelity, FunctionObjective, GradientUndefined,
                         ImagingObjective, QuadraticObjective, Regularizer,
                         elastica, tv_eps, tv_nonsmooth)
from .parallel import ParallelPlan, dg_parallel_run, dg_parallel_sweep
from .partition import (Ordering, Partition, build_ordering, build_partition,
                        dist_ind, dist_set, validate_partition)
from .scalar_solve import RootConfig, brent_root, solve_beta

__version__ = "0.1.0"
