"""Itoh-Abe discrete-gradient solvers with fixed and adaptive step sizes.

Each sweep visits every coordinate once and replaces it by the solution of
the scalar implicit equation handled in :mod:`dgopt.scalar_solve`.  Because
every accepted step satisfies ``V(u + beta e) - V(u) = -beta**2 / tau``, the
energy drop of a sweep is known without evaluating ``V``, whatever ``tau``.
"""

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels as K
from .partition import Ordering, build_ordering, build_partition
from .scalar_solve import RootConfig

__all__ = [
    "AdaptConfig", "SolverConfig", "ConvergenceTrace", "SweepResult",
    "SolverError", "dg_sweep", "dg_run", "wolfe_check", "dg_adapt_run",
    "TheoryConstants", "theory_constants", "InpaintingRate",
    "tv_inpainting_rate", "resolve_ordering",
]

TRACE_FIELDS = ("sweep", "energy", "decrement", "grad_norm", "tau", "wall_ms",
                "action")


class SolverError(RuntimeError):
    """Raised when an energy or step becomes non-finite."""


@dataclass(frozen=True)
class AdaptConfig:
    """Step adaptation constants.

    ``rho = lam = 1`` switches adaptation off, which is occasionally useful
    for comparisons.
    """

    c1: float = 0.7
    c2: float = 0.9
    rho: float = 0.99
    lam: float = 1.005

    def __post_init__(self):
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise ValueError("need 0 < c1 < c2 < 1")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("rho must lie in (0, 1]")
        if not self.lam >= 1.0:
            raise ValueError("lam must be at least 1")

    def step_floor(self, L):
        """Smallest step the decrease rule can settle on for an L-smooth
        energy."""
        return (1.0 - self.c2) / (1.0 + self.c2) * 2.0 / L


@dataclass(frozen=True)
class SolverConfig:
    """Settings shared by the serial, adaptive and parallel drivers.

    ``grad_every`` controls how often the gradient norm is traced
    (``0`` never, ``1`` every sweep); non-smooth energies are never traced.
    ``blocks`` sets the block grid used by the ``block`` ordering.
    """

    tau: float = 1.0
    tol: float = 1e-8
    max_sweeps: int = 1000
    ordering: object = "natural"
    seed: Optional[int] = None
    adapt: Optional[AdaptConfig] = None
    root: RootConfig = field(default_factory=RootConfig)
    grad_every: int = 10
    blocks: tuple = (2, 2)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 0:
            raise ValueError("max_sweeps must be non-negative")
        if self.grad_every < 0:
            raise ValueError("grad_every must be non-negative")


class ConvergenceTrace:
    """Per-sweep records; row 0 describes the starting point."""

    def __init__(self, meta=None):
        self.rows = []
        self.meta = dict(meta or {})

    def append(self, sweep, energy, decrement=None, grad_norm=None, tau=None,
               wall_ms=0.0, action=""):
        self.rows.append({"sweep": int(sweep), "energy": float(energy),
                          "decrement": decrement, "grad_norm": grad_norm,
                          "tau": tau, "wall_ms": float(wall_ms),
                          "action": action})

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([np.nan if r[name] is None else r[name]
                         for r in self.rows], dtype=float)

    @property
    def energies(self):
        return self.column("energy")

    @property
    def decrements(self):
        return self.column("decrement")

    @property
    def taus(self):
        return self.column("tau")

    @property
    def grad_norms(self):
        return self.column("grad_norm")

    @property
    def actions(self):
        return [r["action"] for r in self.rows]

    def to_csv(self, path=None):
        """Write the trace as CSV; returns the text when ``path`` is None.

        Metadata, if any, goes to a JSON file next to ``path``.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for r in self.rows:
            w.writerow(["" if r[k] is None else
                        (repr(r[k]) if isinstance(r[k], float) else r[k])
                        for k in TRACE_FIELDS])
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w") as f:
            f.write(text)
        if self.meta:
            with open(str(path) + ".json", "w") as f:
                json.dump(self.meta, f, indent=2, default=float)
        return text

    @classmethod
    def from_csv(cls, path):
        tr = cls()
        with open(path) as f:
            for r in csv.DictReader(f):
                num = lambda s: float(s) if s != "" else None
                tr.append(int(r["sweep"]), float(r["energy"]),
                          num(r["decrement"]), num(r["grad_norm"]),
                          num(r["tau"]), float(r["wall_ms"]), r["action"])
        return tr


class SweepResult(NamedTuple):
    u: np.ndarray
    decrement: float
    betas: np.ndarray
    dvs: np.ndarray
    status: np.ndarray


def resolve_ordering(shape, ordering="natural", seed=None, radius=None,
                     blocks=(2, 2)):
    """Flat visiting order for a state of the given shape."""
    if isinstance(ordering, Ordering):
        return ordering.indices
    if not isinstance(ordering, str):
        return np.asarray(ordering, dtype=np.int64)
    n = int(np.prod(shape))
    if len(shape) != 2:
        if ordering == "natural":
            return np.arange(n)
        if ordering == "random":
            return np.random.default_rng(seed).permutation(n)
        raise ValueError(f"ordering {ordering!r} needs a 2-D state")
    partition = None
    if ordering == "block":
        partition = build_partition(shape, radius or 1, *blocks)
    return build_ordering(shape, ordering, seed=seed, partition=partition).indices


def _dissipated(betas, dvs, status, tau):
    """Sweep decrement from the dissipation identity.

    Visits that fell back to an explicit step do not satisfy the identity;
    their true (local) energy change is used instead.
    """
    ok = (status == K.ST_OK) | (status == K.ST_MAXITER)
    return float(np.sum(betas[ok] ** 2) / tau - np.sum(dvs[~ok]))


def _sweep_inplace(obj, u, tau, order, root, betas, dvs, status):
    if hasattr(obj, "kernel_args"):
        K.sweep_image(u, order, float(tau), *root.kernel_args(),
                      *obj.kernel_args(), betas, dvs, status)
        return
    shape = u.shape
    rargs = root.kernel_args()
    for t, k in enumerate(order):
        idx = np.unravel_index(int(k), shape)
        beta, dv, st = K.solve_py((obj, u, idx), float(tau), *rargs)
        u[idx] += beta
        betas[t], dvs[t], status[t] = beta, dv, st


def _state(obj, u):
    check = getattr(obj, "_check", None)
    u = check(u) if check is not None else np.asarray(getattr(u, "data", u),
                                                      dtype=np.float64)
    return np.array(u, dtype=np.float64, copy=True)


def dg_sweep(obj, u, tau, ordering="natural", root=None, seed=None):
    """One Itoh-Abe sweep; ``u`` is not modified.

    Returns a :class:`SweepResult` whose ``decrement`` is ``sum(beta**2) /
    tau`` and whose ``dvs`` hold the per-visit energy changes, so
    ``-dvs.sum()`` is ``V(u) - V(u')`` up to rounding.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    root = root or RootConfig()
    u = _state(obj, u)
    order = resolve_ordering(u.shape, ordering, seed,
                             radius=obj.dependency_radius())
    if len(order) != u.size:
        raise ValueError("ordering length does not match the state")
    m = len(order)
    betas, dvs = np.zeros(m), np.zeros(m)
    status = np.zeros(m, dtype=np.int64)
    _sweep_inplace(obj, u, tau, order, root, betas, dvs, status)
    return SweepResult(u, _dissipated(betas, dvs, status, tau), betas, dvs, status)


def _grad_norm(obj, u):
    return float(np.linalg.norm(obj.gradient(u)))


def _stop_scale(v0):
    return abs(v0) if abs(v0) >= 1e-300 else 1.0


def _check_finite(v, k):
    if not math.isfinite(v):
        raise SolverError(f"non-finite energy {v} after sweep {k}")


def dg_run(obj, u0, cfg=None, sweep=None):
    """Fixed-step DG: sweep until ``decrement / |V(u0)| < tol``.

    The stop test uses only the dissipated amount; energies in the trace
    come from a full evaluation after each sweep.  ``sweep(u, tau)`` may
    replace the serial sweep (the parallel driver uses this).
    """
    cfg = cfg or SolverConfig()
    u = _state(obj, u0)
    if sweep is None:
        order = resolve_ordering(u.shape, cfg.ordering, cfg.seed,
                                 obj.dependency_radius(), cfg.blocks)
        m = len(order)
        betas, dvs = np.zeros(m), np.zeros(m)
        status = np.zeros(m, dtype=np.int64)

        def sweep(u, tau):
            _sweep_inplace(obj, u, tau, order, cfg.root, betas, dvs, status)
            return _dissipated(betas, dvs, status, tau)

    want_grad = cfg.grad_every > 0 and obj.smooth
    v0 = obj.eval(u)
    _check_finite(v0, 0)
    trace = ConvergenceTrace({"solver": "dg", "tau0": cfg.tau})
    trace.append(0, v0, None, _grad_norm(obj, u) if want_grad else None,
                 cfg.tau, 0.0, "")
    scale = _stop_scale(v0)
    t0 = time.perf_counter()
    tau = cfg.tau
    for k in range(1, cfg.max_sweeps + 1):
        dec = sweep(u, tau)
        v = obj.eval(u)
        _check_finite(v, k)
        gn = _grad_norm(obj, u) if want_grad and k % cfg.grad_every == 0 else None
        trace.append(k, v, dec, gn, tau, 1e3 * (time.perf_counter() - t0), "")
        if dec / scale < cfg.tol:
            break
    trace.meta["sweeps"] = len(trace) - 1
    return u, trace


def _wolfe_case(dv, dot_old, dot_new, c1, c2):
    if dv <= c1 * dot_old:
        return "increase"
    if dot_new >= c2 * dot_old:
        return "decrease"
    return "hold"


def wolfe_check(obj, u_old, u_new, c1, c2):
    """Classify a step for the adaptive rule.

    ``increase`` when the sufficient-decrease test
    ``V(u_new) - V(u_old) <= c1 <grad V(u_old), d>`` holds, otherwise
    ``decrease`` when the curvature test
    ``<grad V(u_new), d> >= c2 <grad V(u_old), d>`` holds, otherwise
    ``hold``; ``d = u_new - u_old``.
    """
    if not obj.smooth:
        from .objectives import GradientUndefined
        raise GradientUndefined("step classification needs a smooth energy")
    u_old = np.asarray(getattr(u_old, "data", u_old), dtype=float)
    u_new = np.asarray(getattr(u_new, "data", u_new), dtype=float)
    d = (u_new - u_old).ravel()
    dv = obj.eval(u_new) - obj.eval(u_old)
    dot_old = float(np.ravel(obj.gradient(u_old)) @ d)
    dot_new = float(np.ravel(obj.gradient(u_new)) @ d)
    return _wolfe_case(dv, dot_old, dot_new, c1, c2)


def dg_adapt_run(obj, u0, cfg, sweep=None):
    """DG with the step adapted after every sweep.

    The new iterate is always accepted.  The step grows by ``lam`` when
    the sufficient-decrease test holds, shrinks by ``rho`` when only the
    curvature test holds and is kept otherwise.  One gradient is computed
    per sweep; it is reused as the next sweep's starting gradient.
    """
    if cfg.adapt is None:
        raise ValueError("dg_adapt_run needs cfg.adapt")
    if not obj.smooth:
        from .objectives import GradientUndefined
        raise GradientUndefined("adaptive stepping needs a smooth energy")
    ad = cfg.adapt
    u = _state(obj, u0)
    if sweep is None:
        order = resolve_ordering(u.shape, cfg.ordering, cfg.seed,
                                 obj.dependency_radius(), cfg.blocks)
        m = len(order)
        betas, dvs = np.zeros(m), np.zeros(m)
        status = np.zeros(m, dtype=np.int64)

        def sweep(u, tau):
            _sweep_inplace(obj, u, tau, order, cfg.root, betas, dvs, status)
            return _dissipated(betas, dvs, status, tau)

    v_old = obj.eval(u)
    _check_finite(v_old, 0)
    g_old = np.ravel(obj.gradient(u))
    trace = ConvergenceTrace({"solver": "dg-adapt", "tau0": cfg.tau,
                              "c1": ad.c1, "c2": ad.c2, "rho": ad.rho,
                              "lam": ad.lam})
    trace.append(0, v_old, None, float(np.linalg.norm(g_old)), cfg.tau, 0.0, "")
    scale = _stop_scale(v_old)
    t0 = time.perf_counter()
    tau = cfg.tau
    for k in range(1, cfg.max_sweeps + 1):
        u_prev = u.copy()
        dec = sweep(u, tau)
        v = obj.eval(u)
        _check_finite(v, k)
        g_new = np.ravel(obj.gradient(u))
        d = (u - u_prev).ravel()
        case = _wolfe_case(v - v_old, float(g_old @ d), float(g_new @ d),
                           ad.c1, ad.c2)
        # tau column records the step used for this sweep
        trace.append(k, v, dec, float(np.linalg.norm(g_new)), tau,
                     1e3 * (time.perf_counter() - t0), case)
        if case == "increase":
            tau *= ad.lam
        elif case == "decrease":
            tau *= ad.rho
        v_old, g_old = v, g_new
        if dec / scale < cfg.tol:
            break
    trace.meta["sweeps"] = len(trace) - 1
    trace.meta["tau_final"] = tau
    return u, trace


# -- theory -----------------------------------------------------------------

@dataclass(frozen=True)
class TheoryConstants:
    L_max: float
    tau_min: float
    tau_max: float
    n: int
    R: int
    nu_general: float
    nu_radius: float
    tau_star_general: float
    tau_star_radius: float
    sigma: Optional[float] = None
    linear_factor: Optional[float] = None
    linear_factor_radius: Optional[float] = None


def theory_constants(L_max, tau_min, tau_max, n, R, sigma=None):
    """Rate constants for step sizes in ``[tau_min, tau_max]``.

    ``nu_general`` bounds ``min_j |grad V(u^j)|**2 <= nu (V(u0) - V*) / k``
    for any energy with ``L_max``-Lipschitz gradient on ``n`` unknowns;
    ``nu_radius`` is the sharper constant when updates only interact within
    Chebyshev radius ``R``.  The ``tau_star`` values minimise the
    respective ``nu`` for a constant step.  With a PL parameter ``sigma``
    the contraction factors ``1 - 2 sigma / nu`` are filled in.
    """
    if min(L_max, tau_min, tau_max, n) <= 0 or R < 0:
        raise ValueError("theory constants need positive inputs")
    if tau_min > tau_max:
        raise ValueError("tau_min exceeds tau_max")
    tail = tau_max / (L_max ** 2 * tau_min ** 2)
    nu_g = 2.0 * L_max ** 2 * (tau_max * n + tail)
    nu_r = 2.0 * L_max ** 2 * ((2 * R + 1) ** 2 * tau_max + tail)
    lf = lfr = None
    if sigma is not None:
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        lf = 1.0 - 2.0 * sigma / nu_g
        lfr = 1.0 - 2.0 * sigma / nu_r
    return TheoryConstants(float(L_max), float(tau_min), float(tau_max), int(n),
                           int(R), nu_g, nu_r, 1.0 / (L_max * math.sqrt(n)),
                           1.0 / ((2 * R + 1) * L_max), sigma, lf, lfr)


class InpaintingRate(NamedTuple):
    rate: float
    sigma: float
    L_max: float
    tau: float
    nu: float
    bound_rate: float


def tv_inpainting_rate(h, a, eps, R=1):
    """Predicted per-sweep log-decrement for TV_eps centre-square inpainting.

    Uses ``sigma = h**2`` and ``L_max = h**2 (1 + 4 a eps**-0.5 h**-2)``
    (area-weighted energy).  ``rate`` is the small-``h`` estimate
    ``2 (2R+1) sqrt(eps) h**2 / a``; ``bound_rate`` is ``2 sigma / nu`` with
    the radius-optimal step and ``nu = 4 (2R+1) L_max``.
    """
    if min(h, a, eps) <= 0 or R < 0:
        raise ValueError("rate needs positive h, a, eps")
    sigma = h * h
    L = h * h * (1.0 + 4.0 * a / (math.sqrt(eps) * h * h))
    nu = 4.0 * (2 * R + 1) * L
    return InpaintingRate(2.0 * (2 * R + 1) * math.sqrt(eps) * h * h / a,
                          sigma, L, 1.0 / ((2 * R + 1) * L), nu, 2.0 * sigma / nu)
