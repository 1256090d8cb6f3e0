"""Explicit first-order reference solvers with Armijo backtracking."""

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import ConvergenceTrace, SolverError, _stop_scale
from .objectives import GradientUndefined

__all__ = ["ArmijoParams", "armijo_step", "gradient_descent_run",
           "heavy_ball_run"]


@dataclass(frozen=True)
class ArmijoParams:
    s0: float = 1.0
    theta: float = 0.5
    c: float = 1e-4
    max_backtracks: int = 50
    momentum: float = 0.9

    def __post_init__(self):
        if not self.s0 > 0:
            raise ValueError("s0 must be positive")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if not 0 < self.c < 1:
            raise ValueError("c must lie in (0, 1)")
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")


def armijo_step(obj, u, v, g, params):
    """Backtrack from ``s0`` until ``V(u - s g) <= V(u) - c s |g|^2``.

    Returns ``(s, u - s g, V(u - s g))``, or ``(None, u, v)`` when the
    backtracking budget runs out.
    """
    gg = float(np.vdot(g, g))
    s = params.s0
    for _ in range(params.max_backtracks + 1):
        trial = u - s * g
        vt = obj.eval(trial)
        if math.isfinite(vt) and vt <= v - params.c * s * gg:
            return s, trial, vt
        s *= params.theta
    return None, u, v


def _run(obj, u0, params, tol, max_iters, momentum, name, target, grad_tol):
    if not obj.smooth:
        raise GradientUndefined(f"{name} needs a smooth energy")
    u = np.array(getattr(u0, "data", u0), dtype=np.float64, copy=True)
    u_prev = u.copy()
    v = obj.eval(u)
    if not math.isfinite(v):
        raise SolverError("non-finite starting energy")
    g = obj.gradient(u)
    trace = ConvergenceTrace({"solver": name, "s0": params.s0,
                              "theta": params.theta, "c": params.c,
                              "momentum": momentum})
    trace.append(0, v, None, float(np.linalg.norm(g)), None, 0.0, "")
    scale = _stop_scale(v)
    exhausted = False
    t0 = time.perf_counter()
    for k in range(1, max_iters + 1):
        if not np.any(g):
            break
        s, y, _ = armijo_step(obj, u, v, g, params)
        if s is None:
            exhausted = True
            break
        u_new = y + momentum * (u - u_prev) if momentum else y
        v_new = obj.eval(u_new)
        if not math.isfinite(v_new):
            raise SolverError(f"non-finite energy at iteration {k}")
        u_prev, u = u, u_new
        dec = v - v_new
        v = v_new
        g = obj.gradient(u)
        trace.append(k, v, dec, float(np.linalg.norm(g)), s,
                     1e3 * (time.perf_counter() - t0), "")
        if abs(dec) / scale < tol:
            break
        if target is not None and v <= target:
            break
        if grad_tol is not None and trace.rows[-1]["grad_norm"] < grad_tol:
            break
    trace.meta["iterations"] = len(trace) - 1
    trace.meta["backtrack_exhausted"] = exhausted
    return u, trace


def gradient_descent_run(obj, u0, params=None, tol=1e-8, max_iters=1000, *,
                         target=None, grad_tol=None):
    """``u <- u - s grad V(u)`` with ``s`` found by Armijo backtracking.

    Stops when ``|V(u^{k-1}) - V(u^k)| / |V(u^0)| < tol``, when the
    optional energy ``target`` or gradient-norm ``grad_tol`` is reached,
    or when backtracking fails (``trace.meta["backtrack_exhausted"]``).
    """
    return _run(obj, u0, params or ArmijoParams(), tol, max_iters, 0.0,
                "gradient-descent", target, grad_tol)


def heavy_ball_run(obj, u0, params=None, tol=1e-8, max_iters=1000, *,
                   target=None, grad_tol=None):
    """Heavy-ball iteration ``u <- u - s grad V(u) + m (u - u_prev)``.

    The Armijo search only covers the gradient part; the momentum term
    ``m = params.momentum`` is added afterwards, so energies may rise.
    """
    params = params or ArmijoParams()
    return _run(obj, u0, params, tol, max_iters, params.momentum,
                "heavy-ball", target, grad_tol)
