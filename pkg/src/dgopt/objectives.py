"""Energies ``V(u) = fidelity + regularizer`` on pixel grids, plus a few
generic objectives used for testing the solvers.

Pixel arrays are indexed ``u[i, j]`` with ``i`` the x (column) index and
``j`` the y (row) index, so ``u.shape == (nx, ny)`` and the grid spacing is
``h = 1 / nx``.  Out-of-range neighbours are replicated from the nearest
in-range pixel, which makes every boundary backward difference zero.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels as K

__all__ = [
    "Objective",
    "Regularizer",
    "Fidelity",
    "ImagingObjective",
    "QuadraticObjective",
    "FunctionObjective",
    "GradientUndefined",
    "elastica",
    "tv_eps",
    "tv_nonsmooth",
]


class GradientUndefined(ValueError):
    """Raised when a gradient is requested from a non-smooth energy."""


class Objective:
    """Minimal interface the discrete-gradient solvers rely on.

    Subclasses implement :meth:`eval`; :meth:`local_diff` defaults to two
    full evaluations and should be overridden whenever a cheaper local
    formula exists.
    """

    smooth = True

    def eval(self, u):
        raise NotImplementedError

    def local_diff(self, u, idx, beta):
        """``V(u + beta e_idx) - V(u)``."""
        if beta == 0.0:
            return 0.0
        v = np.array(u, dtype=float, copy=True)
        v[idx] += beta
        return self.eval(v) - self.eval(u)

    def gradient(self, u):
        raise GradientUndefined(f"gradient undefined for {type(self).__name__}")

    def dependency_radius(self):
        """Chebyshev radius of the local difference, or ``None`` if dense."""
        return None


@dataclass(frozen=True)
class Regularizer:
    """``kind`` is one of ``elastica``, ``tv_eps``, ``tv_nonsmooth`` (TV
    without smoothing plus the smoothed curvature term) or ``none``."""

    kind: str = "elastica"
    a: float = 1.0
    b: float = 0.0
    eps: float = 1e-4

    _codes = {"none": K.REG_NONE, "tv_eps": K.REG_TV,
              "elastica": K.REG_ELASTICA, "tv_nonsmooth": K.REG_TV_NONSMOOTH}

    def __post_init__(self):
        if self.kind not in self._codes:
            raise ValueError(f"unknown regularizer {self.kind!r}")
        if self.a < 0 or self.b < 0:
            raise ValueError("regularizer weights must be non-negative")
        if self.kind != "none" and not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def code(self):
        return self._codes[self.kind]


@dataclass(frozen=True)
class Fidelity:
    """``kind`` is ``l2sq`` (squared), ``l1``, ``l1_smoothed`` or ``none``."""

    kind: str = "l2sq"
    eps: float = 1e-12

    _codes = {"none": K.FID_NONE, "l2sq": K.FID_L2SQ, "l1": K.FID_L1,
              "l1_smoothed": K.FID_L1_SMOOTH}

    def __post_init__(self):
        if self.kind not in self._codes:
            raise ValueError(f"unknown fidelity {self.kind!r}")
        if self.kind == "l1_smoothed" and not self.eps > 0:
            raise ValueError("l1 smoothing eps must be positive")

    @property
    def code(self):
        return self._codes[self.kind]

    @property
    def smooth(self):
        return self.kind != "l1"


def elastica(a, b, eps):
    return Regularizer("elastica", a, b, eps)


def tv_eps(a, eps):
    return Regularizer("tv_eps", a, 0.0, eps)


def tv_nonsmooth(a, b, eps):
    return Regularizer("tv_nonsmooth", a, b, eps)


class ImagingObjective(Objective):
    """Denoising/inpainting energy on an ``(nx, ny)`` pixel grid.

    Parameters
    ----------
    g : array_like
        Data image, shape ``(nx, ny)``.
    regularizer : Regularizer
    fidelity : Fidelity, optional
        Defaults to the squared L2 distance.
    mask : array_like of bool, optional
        ``True`` where the datum is known; fidelity is only charged there.
    area_weighted : bool
        Multiply both sums by the pixel area ``h**2``.
    h : float, optional
        Grid spacing used by the difference quotients; ``1 / nx`` by
        default.  ``h = 1`` gives plain pixel differences.
    """

    def __init__(self, g, regularizer, fidelity=None, mask=None,
                 area_weighted=False, h=None):
        g = np.array(getattr(g, "data", g), dtype=np.float64)
        if g.ndim != 2:
            raise ValueError("g must be two-dimensional")
        self.g = g
        self.g.setflags(write=False)
        self.shape = g.shape
        self.nx, self.ny = g.shape
        self.h = 1.0 / self.nx if h is None else float(h)
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        self.regularizer = regularizer
        self.fidelity = fidelity if fidelity is not None else Fidelity()
        if mask is None:
            known = np.ones(g.shape)
        else:
            mask = np.asarray(getattr(mask, "known", mask), dtype=bool)
            if mask.shape != g.shape:
                raise ValueError("mask shape does not match data")
            known = mask.astype(np.float64)
        self.known = known
        self.known.setflags(write=False)
        self.area_weighted = bool(area_weighted)
        self.weight = self.h ** 2 if area_weighted else 1.0

    @property
    def smooth(self):
        return self.regularizer.kind != "tv_nonsmooth" and self.fidelity.smooth

    def dependency_radius(self):
        # the curvature term at (i, j) reads the 3x3 neighbourhood, so a
        # pixel update sees everything within distance 2
        kind = self.regularizer.kind
        if kind in ("elastica", "tv_nonsmooth"):
            return 2
        if kind == "tv_eps":
            return 1
        return 0

    def kernel_args(self):
        r, f = self.regularizer, self.fidelity
        return (r.code, float(r.a), float(r.b), float(r.eps), float(self.h),
                f.code, float(f.eps), float(self.weight), self.g, self.known)

    def _check(self, u):
        u = np.asarray(getattr(u, "data", u), dtype=np.float64)
        if u.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {u.shape}")
        return u

    # -- evaluation ---------------------------------------------------------

    def _forward(self, u):
        r = self.regularizer
        h, eps = self.h, r.eps
        P = np.pad(u, 2, mode="edge")
        Dx = np.zeros_like(P)
        Dy = np.zeros_like(P)
        Dx[1:, :] = (P[1:, :] - P[:-1, :]) / h
        Dy[:, 1:] = (P[:, 1:] - P[:, :-1]) / h
        st = {"Dx": Dx, "Dy": Dy}
        st["G"] = G = np.sqrt(Dx * Dx + Dy * Dy + eps)
        if r.kind == "tv_eps":
            st["H"] = r.a * G
            return st
        Sy = np.zeros_like(P)
        Sx = np.zeros_like(P)
        Sy[1:, :-1] = 0.25 * (Dy[1:, 1:] + Dy[1:, :-1] + Dy[:-1, :-1]
                              + Dy[:-1, 1:])
        Sx[:-1, 1:] = 0.25 * (Dx[1:, 1:] + Dx[:-1, 1:] + Dx[1:, :-1]
                              + Dx[:-1, :-1])
        Wx = np.sqrt(Dx * Dx + Sy * Sy + eps)
        Wy = np.sqrt(Sx * Sx + Dy * Dy + eps)
        Fx = Dx / Wx
        Fy = Dy / Wy
        Kc = np.zeros_like(P)
        Kc[:-1, :-1] = ((Fx[1:, :-1] - Fx[:-1, :-1]) / h
                        + (Fy[:-1, 1:] - Fy[:-1, :-1]) / h)
        st.update(Sx=Sx, Sy=Sy, Wx=Wx, Wy=Wy, Fx=Fx, Fy=Fy, K=Kc)
        if r.kind == "elastica":
            st["H"] = (r.a + r.b * Kc * Kc) * G
        else:
            st["H"] = r.a * np.sqrt(Dx * Dx + Dy * Dy) + r.b * Kc * Kc * G
        return st

    def regularizer_density(self, u):
        """Per-pixel regularizer values ``H_ij`` (unweighted)."""
        u = self._check(u)
        if self.regularizer.kind == "none":
            return np.zeros(self.shape)
        return self._forward(u)["H"][2:-2, 2:-2]

    def fidelity_density(self, u):
        u = self._check(u)
        r = u - self.g
        kind = self.fidelity.kind
        if kind == "l2sq":
            f = r * r
        elif kind == "l1":
            f = np.abs(r)
        elif kind == "l1_smoothed":
            f = np.sqrt(r * r + self.fidelity.eps)
        else:
            f = np.zeros_like(r)
        return self.known * f

    def eval(self, u):
        u = self._check(u)
        total = self.regularizer_density(u).sum() + self.fidelity_density(u).sum()
        return float(self.weight * total)

    def local_diff(self, u, idx, beta):
        u = self._check(u)
        i, j = idx
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise IndexError(f"pixel {idx} outside {self.shape}")
        # the kernel perturbs and restores u in place
        work = np.array(u, copy=True)
        return float(K.local_diff_image(work, int(i), int(j), float(beta),
                                        *self.kernel_args()))

    # -- gradient -----------------------------------------------------------

    def gradient(self, u):
        if not self.smooth:
            raise GradientUndefined(
                "gradient undefined for non-smooth energy "
                f"({self.regularizer.kind}, {self.fidelity.kind})")
        u = self._check(u)
        grad = self._fidelity_gradient(u)
        if self.regularizer.kind != "none":
            grad += self._regularizer_gradient(u)
        return self.weight * grad

    def _fidelity_gradient(self, u):
        r = u - self.g
        kind = self.fidelity.kind
        if kind == "l2sq":
            d = 2.0 * r
        elif kind == "l1_smoothed":
            d = r / np.sqrt(r * r + self.fidelity.eps)
        else:
            d = np.zeros_like(r)
        return self.known * d

    def _regularizer_gradient(self, u):
        reg = self.regularizer
        h = self.h
        st = self._forward(u)
        Dx, Dy, G = st["Dx"], st["Dy"], st["G"]
        core = (slice(2, -2), slice(2, -2))
        dG = np.zeros_like(G)
        dDx = np.zeros_like(G)
        dDy = np.zeros_like(G)
        if reg.kind == "tv_eps":
            dG[core] = reg.a
        else:
            Kc = st["K"]
            dG[core] = reg.a + reg.b * Kc[core] ** 2
            dK = np.zeros_like(G)
            dK[core] = 2.0 * reg.b * Kc[core] * G[core]
            # curvature: forward differences of the flux ratios
            dFx = np.zeros_like(G)
            dFy = np.zeros_like(G)
            q = dK[:-1, :-1] / h
            dFx[1:, :-1] += q
            dFx[:-1, :-1] -= q
            dFy[:-1, 1:] += q
            dFy[:-1, :-1] -= q
            Sx, Sy, Wx, Wy = st["Sx"], st["Sy"], st["Wx"], st["Wy"]
            # Fx = Dx / Wx with Wx = sqrt(Dx^2 + Sy^2 + eps)
            dWx = -dFx * Dx / Wx ** 2
            dDx += dFx / Wx + dWx * Dx / Wx
            dSy = dWx * Sy / Wx
            dWy = -dFy * Dy / Wy ** 2
            dDy += dFy / Wy + dWy * Dy / Wy
            dSx = dWy * Sx / Wy
            # four-point averages
            q = 0.25 * dSy[1:, :-1]
            dDy[1:, 1:] += q
            dDy[1:, :-1] += q
            dDy[:-1, :-1] += q
            dDy[:-1, 1:] += q
            q = 0.25 * dSx[:-1, 1:]
            dDx[1:, 1:] += q
            dDx[:-1, 1:] += q
            dDx[1:, :-1] += q
            dDx[:-1, :-1] += q
        dDx += dG * Dx / G
        dDy += dG * Dy / G
        dP = np.zeros_like(G)
        dP[1:, :] += dDx[1:, :] / h
        dP[:-1, :] -= dDx[1:, :] / h
        dP[:, 1:] += dDy[:, 1:] / h
        dP[:, :-1] -= dDy[:, 1:] / h
        # adjoint of edge padding
        ix = np.clip(np.arange(dP.shape[0]) - 2, 0, self.nx - 1)
        iy = np.clip(np.arange(dP.shape[1]) - 2, 0, self.ny - 1)
        out = np.zeros(self.shape)
        np.add.at(out, (ix[:, None], iy[None, :]), dP)
        return out

    def lipschitz_estimate(self, u, iters=50, seed=0, delta=1e-6):
        """Power-iteration estimate of the Hessian norm at ``u`` using
        finite differences of the gradient. An estimate, not a bound."""
        u = self._check(u)
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.shape)
        v /= np.linalg.norm(v)
        g0 = self.gradient(u)
        lam = 0.0
        for _ in range(iters):
            hv = (self.gradient(u + delta * v) - g0) / delta
            lam = float(np.linalg.norm(hv))
            if lam == 0.0:
                break
            v = hv / lam
        return lam


class QuadraticObjective(Objective):
    """``V(u) = 0.5 u.A.u - b.u + c`` on a flat vector."""

    def __init__(self, A, b=None, c=0.0):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        self.b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
        self.c = float(c)
        self.shape = (n,)

    def eval(self, u):
        u = np.asarray(u, dtype=float)
        return float(0.5 * u @ self.A @ u - self.b @ u + self.c)

    def local_diff(self, u, idx, beta):
        u = np.asarray(u, dtype=float)
        k = int(np.ravel_multi_index(np.atleast_1d(idx), self.shape)) \
            if isinstance(idx, tuple) else int(idx)
        slope = self.A[k] @ u - self.b[k]
        return float(beta * (slope + 0.5 * self.A[k, k] * beta))

    def gradient(self, u):
        return self.A @ np.asarray(u, dtype=float) - self.b

    def lipschitz(self):
        return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (self.A + self.A.T)))))


class FunctionObjective(Objective):
    """Wrap plain callables ``f(u)`` and optionally ``grad(u)``."""

    def __init__(self, f, grad=None, shape=None, radius=None):
        self.f = f
        self.grad = grad
        self.shape = shape
        self.smooth = grad is not None
        self._radius = radius

    def eval(self, u):
        return float(self.f(np.asarray(u, dtype=float)))

    def gradient(self, u):
        if self.grad is None:
            raise GradientUndefined("no gradient supplied")
        return np.asarray(self.grad(np.asarray(u, dtype=float)), dtype=float)

    def dependency_radius(self):
        return self._radius
