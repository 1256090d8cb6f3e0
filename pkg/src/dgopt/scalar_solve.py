"""Scalar root finding for the implicit Itoh-Abe coordinate update."""

import enum
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as K

__all__ = ["RootConfig", "RootResult", "BetaStatus", "NoSignChange",
           "brent_root", "solve_beta"]


class NoSignChange(ValueError):
    """The interval handed to :func:`brent_root` does not bracket a root."""


class BetaStatus(enum.IntEnum):
    OK = K.ST_OK
    FLAT = K.ST_FLAT            # coordinate slope below threshold, beta = 0
    MAXITER = K.ST_MAXITER      # Brent hit its iteration cap
    EULER = K.ST_EULER          # no bracket; explicit Euler step kept
    ZERO = K.ST_ZERO            # no dissipative step found, beta = 0


@dataclass(frozen=True)
class RootConfig:
    abs_tol: float = 1e-10
    max_iterations: int = 100
    bracket_expansion: float = 2.0
    max_expansions: int = 60

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if not self.bracket_expansion > 1:
            raise ValueError("bracket_expansion must exceed 1")
        if self.max_iterations < 1 or self.max_expansions < 1:
            raise ValueError("iteration caps must be at least 1")

    def kernel_args(self):
        return (float(self.abs_tol), int(self.max_iterations),
                float(self.bracket_expansion), int(self.max_expansions))


class RootResult(NamedTuple):
    root: float
    converged: bool
    iterations: int


def brent_root(f, lo, hi, cfg=None, full_output=False):
    """Find a zero of ``f`` in ``[lo, hi]`` by the Brent-Dekker method.

    The returned point never leaves the initial bracket.  If the iteration
    cap is reached the midpoint of the last bracket is returned and a
    ``RuntimeWarning`` is issued (``full_output`` reports it as
    ``converged=False``).

    Raises
    ------
    NoSignChange
        If ``f(lo)`` and ``f(hi)`` have the same strict sign.
    """
    cfg = cfg or RootConfig()
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise ValueError("need lo < hi")
    flo, fhi = float(f(lo)), float(f(hi))
    if flo * fhi > 0:
        raise NoSignChange(f"f({lo}) = {flo} and f({hi}) = {fhi} share a sign")
    root, flag, its = K.brent_py(lambda x, _: float(f(x)), None, lo, hi, flo,
                                 fhi, cfg.abs_tol, cfg.max_iterations)
    if flag:
        warnings.warn("brent_root: iteration cap reached", RuntimeWarning,
                      stacklevel=2)
    res = RootResult(root, not flag, its)
    return res if full_output else root


def solve_beta(obj, u, idx, tau, cfg=None, full_output=False):
    """Solve ``beta = -tau (V(u + beta e) - V(u)) / beta`` for one coordinate.

    The equation is solved in the form ``beta + tau dV(beta) / beta = 0``,
    whose value at 0 is ``tau`` times the coordinate slope.  The bracket is
    grown geometrically on the descent side starting from the explicit
    Euler step ``-tau * slope``.

    Returns ``beta``, or ``(beta, dV, BetaStatus)`` with ``full_output``.
    The returned step always satisfies ``dV <= 0``.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    cfg = cfg or RootConfig()
    kernel_args = getattr(obj, "kernel_args", None)
    if kernel_args is not None:
        u = np.array(obj._check(u), copy=True)
        i, j = idx
        beta, dv, st = K.solve_beta_image(u, int(i), int(j), float(tau),
                                          *cfg.kernel_args(), *kernel_args())
    else:
        u = np.asarray(u, dtype=float)
        beta, dv, st = K.solve_py((obj, u, idx), float(tau), *cfg.kernel_args())
    if full_output:
        return float(beta), float(dv), BetaStatus(st)
    return float(beta)
