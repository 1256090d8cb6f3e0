"""Compiled inner loops: stencil terms, local energy differences, the scalar
root solve and the coordinate sweep.

The scalar solve is written once as plain Python and compiled twice: with
numba for the imaging energies, and left interpreted for generic objectives
that only expose a Python ``local_diff``.
"""

import math

import numba as nb
import numpy as np

_jit = {"nogil": True, "cache": True}
# functions calling the generated solver cannot be cached
_jit_nc = {"nogil": True}

EPS = float(np.finfo(np.float64).eps)

# regularizer codes
REG_NONE = 0
REG_TV = 1
REG_ELASTICA = 2
REG_TV_NONSMOOTH = 3

# fidelity codes
FID_NONE = 0
FID_L2SQ = 1
FID_L1 = 2
FID_L1_SMOOTH = 3

# per-coordinate solve status
ST_OK = 0
ST_FLAT = 1
ST_MAXITER = 2
ST_EULER = 3
ST_ZERO = 4

DERIV_STEP = 1e-8
FLAT_THRESHOLD = 1e-14


# ---------------------------------------------------------------------------
# Brent-Dekker
# ---------------------------------------------------------------------------

def _brent_impl(f, args, a, b, fa, fb, xtol, maxiter):
    """Zero of ``f(x, args)`` on the sign-change interval ``[a, b]``.

    Returns ``(root, status, iterations)``; status 0 is converged, 1 means
    ``maxiter`` was exhausted and the midpoint of the final bracket is
    returned.
    """
    if fa == 0.0:
        return a, 0, 0
    if fb == 0.0:
        return b, 0, 0
    c = a
    fc = fa
    d = b - a
    e = d
    for it in range(1, maxiter + 1):
        if abs(fc) < abs(fb):
            a = b
            b = c
            c = a
            fa = fb
            fb = fc
            fc = fa
        tol1 = 2.0 * EPS * abs(b) + 0.5 * xtol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or fb == 0.0:
            return b, 0, it
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                # secant
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                # inverse quadratic interpolation
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            else:
                p = -p
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e = d
                d = p / q
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        a = b
        fa = fb
        if abs(d) > tol1:
            b = b + d
        elif xm > 0.0:
            b = b + tol1
        else:
            b = b - tol1
        fb = f(b, args)
        if (fb > 0.0 and fc > 0.0) or (fb < 0.0 and fc < 0.0):
            c = a
            fc = fa
            d = b - a
            e = d
    return 0.5 * (b + c), 1, maxiter


brent_py = _brent_impl
brent_jit = nb.njit(**_jit)(_brent_impl)


# ---------------------------------------------------------------------------
# Itoh-Abe scalar equation
# ---------------------------------------------------------------------------

def _make_solver(ld, brent, wrap):
    """Build ``solve(ldargs, tau, ...)`` around a local-difference function.

    ``ld(beta, ldargs)`` must return ``V(u + beta e) - V(u)`` for the
    coordinate bound in ``ldargs``; ``wrap`` is applied to every generated
    function (``numba.njit`` or identity).
    """

    @wrap
    def gfun(beta, gargs):
        tau = gargs[0]
        return beta + tau * ld(beta, gargs[1]) / beta

    def solve(ldargs, tau, xtol, maxiter, factor, maxexp):
        dp = ld(DERIV_STEP, ldargs)
        dm = ld(-DERIV_STEP, ldargs)
        deriv = (dp - dm) / (2.0 * DERIV_STEP)
        if not abs(deriv) >= FLAT_THRESHOLD:
            return 0.0, 0.0, ST_FLAT
        g0 = tau * deriv
        beta0 = -tau * deriv
        gargs = (tau, ldargs)
        hi = beta0
        ghi = gfun(hi, gargs)
        nexp = 0
        while ((ghi > 0.0 and g0 > 0.0) or (ghi < 0.0 and g0 < 0.0)) \
                and nexp < maxexp:
            hi = hi * factor
            ghi = gfun(hi, gargs)
            nexp += 1
        status = ST_OK
        if ghi == 0.0:
            beta = hi
        elif (ghi > 0.0 and g0 < 0.0) or (ghi < 0.0 and g0 > 0.0):
            # a root tolerance on beta alone can leave a sizeable residual
            # in the dissipation identity when g is steep, so tighten it
            # until the identity holds to the same tolerance
            tol = xtol
            while True:
                beta, flag, _ = brent(gfun, gargs, 0.0, hi, g0, ghi, tol,
                                      maxiter)
                if flag != 0:
                    status = ST_MAXITER
                    break
                resid = ld(beta, ldargs) + beta * beta / tau
                if abs(resid) <= xtol * (1.0 + abs(beta) / tau) \
                        or tol <= 4.0 * EPS * abs(beta):
                    break
                tol *= 1e-3
        else:
            # no sign change found (or non-finite g): explicit Euler step
            beta = beta0
            status = ST_EULER
        dv = ld(beta, ldargs)
        if not dv <= 0.0:
            return 0.0, 0.0, ST_ZERO
        return beta, dv, status

    return wrap(solve)


# ---------------------------------------------------------------------------
# Imaging energies on the staggered stencil (replicate boundaries)
# ---------------------------------------------------------------------------

@nb.njit(**_jit)
def _px(u, i, j):
    nx, ny = u.shape
    if i < 0:
        i = 0
    elif i >= nx:
        i = nx - 1
    if j < 0:
        j = 0
    elif j >= ny:
        j = ny - 1
    return u[i, j]


@nb.njit(**_jit)
def _dxm(u, i, j, h):
    return (_px(u, i, j) - _px(u, i - 1, j)) / h


@nb.njit(**_jit)
def _dym(u, i, j, h):
    return (_px(u, i, j) - _px(u, i, j - 1)) / h


@nb.njit(**_jit)
def h_term(u, i, j, reg, a, b, eps, h):
    """Regularizer density at pixel ``(i, j)`` (unweighted)."""
    dx = _dxm(u, i, j, h)
    dy = _dym(u, i, j, h)
    if reg == REG_TV:
        return a * math.sqrt(dx * dx + dy * dy + eps)
    g = math.sqrt(dx * dx + dy * dy + eps)
    dx_e = _dxm(u, i + 1, j, h)
    dy_n = _dym(u, i, j + 1, h)
    sy0 = 0.25 * (dy_n + dy + _dym(u, i - 1, j, h) + _dym(u, i - 1, j + 1, h))
    sy1 = 0.25 * (_dym(u, i + 1, j + 1, h) + _dym(u, i + 1, j, h) + dy + dy_n)
    sx0 = 0.25 * (dx_e + dx + _dxm(u, i + 1, j - 1, h) + _dxm(u, i, j - 1, h))
    sx1 = 0.25 * (_dxm(u, i + 1, j + 1, h) + _dxm(u, i, j + 1, h) + dx_e + dx)
    fx0 = dx / math.sqrt(dx * dx + sy0 * sy0 + eps)
    fx1 = dx_e / math.sqrt(dx_e * dx_e + sy1 * sy1 + eps)
    fy0 = dy / math.sqrt(sx0 * sx0 + dy * dy + eps)
    fy1 = dy_n / math.sqrt(sx1 * sx1 + dy_n * dy_n + eps)
    kappa = (fx1 - fx0) / h + (fy1 - fy0) / h
    if reg == REG_ELASTICA:
        return (a + b * kappa * kappa) * g
    return a * math.sqrt(dx * dx + dy * dy) + b * kappa * kappa * g


@nb.njit(**_jit)
def fid_term(r, fid, feps):
    if fid == FID_L2SQ:
        return r * r
    if fid == FID_L1:
        return abs(r)
    if fid == FID_L1_SMOOTH:
        return math.sqrt(r * r + feps)
    return 0.0


@nb.njit(**_jit)
def local_sum(u, pi, pj, reg, a, b, eps, h, fid, feps, weight, g, known):
    """Sum of every energy term that reads pixel ``(pi, pj)``."""
    nx, ny = u.shape
    s = 0.0
    if reg == REG_TV:
        s += h_term(u, pi, pj, reg, a, b, eps, h)
        if pi + 1 < nx:
            s += h_term(u, pi + 1, pj, reg, a, b, eps, h)
        if pj + 1 < ny:
            s += h_term(u, pi, pj + 1, reg, a, b, eps, h)
    elif reg != REG_NONE:
        for i in range(max(pi - 1, 0), min(pi + 2, nx)):
            for j in range(max(pj - 1, 0), min(pj + 2, ny)):
                s += h_term(u, i, j, reg, a, b, eps, h)
    if fid != FID_NONE and known[pi, pj] != 0.0:
        s += known[pi, pj] * fid_term(u[pi, pj] - g[pi, pj], fid, feps)
    return weight * s


@nb.njit(**_jit)
def ld_image(beta, args):
    u, pi, pj, base, reg, a, b, eps, h, fid, feps, weight, g, known = args
    old = u[pi, pj]
    u[pi, pj] = old + beta
    s = local_sum(u, pi, pj, reg, a, b, eps, h, fid, feps, weight, g, known)
    u[pi, pj] = old
    return s - base


@nb.njit(**_jit)
def local_diff_image(u, pi, pj, beta, reg, a, b, eps, h, fid, feps, weight,
                     g, known):
    base = local_sum(u, pi, pj, reg, a, b, eps, h, fid, feps, weight, g, known)
    args = (u, pi, pj, base, reg, a, b, eps, h, fid, feps, weight, g, known)
    return ld_image(beta, args)


solve_image = _make_solver(ld_image, brent_jit, nb.njit(**_jit_nc))


@nb.njit(**_jit_nc)
def solve_beta_image(u, pi, pj, tau, xtol, maxiter, factor, maxexp,
                     reg, a, b, eps, h, fid, feps, weight, g, known):
    base = local_sum(u, pi, pj, reg, a, b, eps, h, fid, feps, weight, g, known)
    args = (u, pi, pj, base, reg, a, b, eps, h, fid, feps, weight, g, known)
    return solve_image(args, tau, xtol, maxiter, factor, maxexp)


@nb.njit(**_jit_nc)
def sweep_image(u, order, tau, xtol, maxiter, factor, maxexp,
                reg, a, b, eps, h, fid, feps, weight, g, known,
                betas, dvs, status):
    """Itoh-Abe sweep over the flat indices in ``order``, updating ``u`` in
    place. Per-visit results go to ``betas``, ``dvs`` and ``status``."""
    ny = u.shape[1]
    for t in range(order.shape[0]):
        k = order[t]
        pi = k // ny
        pj = k - pi * ny
        base = local_sum(u, pi, pj, reg, a, b, eps, h, fid, feps, weight,
                         g, known)
        args = (u, pi, pj, base, reg, a, b, eps, h, fid, feps, weight, g, known)
        beta, dv, st = solve_image(args, tau, xtol, maxiter, factor, maxexp)
        u[pi, pj] += beta
        betas[t] = beta
        dvs[t] = dv
        status[t] = st


# ---------------------------------------------------------------------------
# Generic (interpreted) path
# ---------------------------------------------------------------------------

def _ld_py(beta, args):
    obj, u, idx = args
    return obj.local_diff(u, idx, beta)


solve_py = _make_solver(_ld_py, brent_py, lambda f: f)
