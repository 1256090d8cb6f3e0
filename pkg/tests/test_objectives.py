import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from dgopt.objectives import (Fidelity, GradientUndefined, ImagingObjective,
                              QuadraticObjective, Regularizer, elastica,
                              tv_eps, tv_nonsmooth)

# frozen from oracles.elastica_energy on the 3x3 bump
BUMP_ENERGY = 677.046862222114


def make(reg, n=8, seed=0, fid="l2sq", mask=False, weighted=False, shape=None):
    rng = np.random.default_rng(seed)
    shape = shape or (n, n)
    g = rng.random(shape)
    m = rng.random(shape) > 0.3 if mask else None
    return ImagingObjective(g, reg, Fidelity(fid), mask=m,
                            area_weighted=weighted), rng


VARIANTS = [elastica(1.0, 0.5, 1e-2), tv_eps(0.7, 1e-2),
            tv_nonsmooth(0.4, 0.3, 1e-2)]


def test_constant_images():
    for reg in (elastica(0.8, 2.0, 0.03), tv_eps(0.8, 0.03)):
        g = np.full((5, 7), 0.4)
        obj = ImagingObjective(g, reg)
        assert obj.eval(g) == pytest.approx(0.8 * 35 * math.sqrt(0.03), rel=1e-14)


def test_bump_fixture():
    u = np.array([[0, 0, 0], [0, 1, 0], [0, 0, 0]], float)
    obj = ImagingObjective(u, elastica(1, 1, 0.01))
    assert obj.h == pytest.approx(1 / 3)
    assert obj.eval(u) == pytest.approx(BUMP_ENERGY, rel=1e-12)


@given(st.integers(0, 10 ** 6), st.integers(2, 5), st.integers(2, 5))
@settings(max_examples=25, deadline=None)
def test_eval_matches_scalar_oracle(seed, nx, ny):
    rng = np.random.default_rng(seed)
    u, g = rng.random((nx, ny)), rng.random((nx, ny))
    known = rng.random((nx, ny)) > 0.4
    known[0, 0] = True
    h = 1.0 / nx
    obj = ImagingObjective(g, elastica(0.6, 0.02, 0.05), mask=known)
    ref = oracles.elastica_energy(u.tolist(), g.tolist(), 0.6, 0.02, 0.05, h,
                                  known.tolist())
    assert obj.eval(u) == pytest.approx(ref, rel=1e-12)
    obj = ImagingObjective(g, tv_eps(0.6, 0.05), mask=known)
    ref = oracles.tv_energy(u.tolist(), g.tolist(), 0.6, 0.05, h, known.tolist())
    assert obj.eval(u) == pytest.approx(ref, rel=1e-12)


def test_area_weights():
    obj, rng = make(elastica(1, 1, 0.1), n=6)
    w = ImagingObjective(obj.g, obj.regularizer, area_weighted=True)
    u = rng.random((6, 6))
    assert w.eval(u) == pytest.approx(obj.eval(u) / 36, rel=1e-13)
    assert w.eval(u) >= 0


def test_local_diff_basics():
    obj, rng = make(elastica(1, 1, 1e-2))
    u = rng.random(obj.shape)
    assert obj.local_diff(u, (3, 4), 0.0) == 0.0
    d = obj.local_diff(u, (3, 4), 0.37)
    v = u.copy()
    v[3, 4] += 0.37
    back = obj.local_diff(v, (3, 4), -0.37)
    assert d + back == pytest.approx(0.0, abs=1e-10 * (1 + abs(d)))
    with pytest.raises(IndexError):
        obj.local_diff(u, (8, 0), 0.1)
    with pytest.raises(ValueError):
        obj.eval(np.zeros((3, 3)))


@pytest.mark.parametrize("reg", VARIANTS, ids=lambda r: r.kind)
@pytest.mark.parametrize("fid", ["l2sq", "l1", "l1_smoothed"])
@given(seed=st.integers(0, 10 ** 6), beta=st.floats(-2, 2),
       weighted=st.booleans(), mask=st.booleans())
@settings(max_examples=15, deadline=None)
def test_local_diff_oracle(reg, fid, seed, beta, weighted, mask):
    obj, rng = make(reg, n=6, seed=seed, fid=fid, mask=mask, weighted=weighted,
                    shape=(6, 5))
    u = rng.normal(size=obj.shape)
    idx = (int(rng.integers(6)), int(rng.integers(5)))
    v = u.copy()
    v[idx] += beta
    ref = obj.eval(v) - obj.eval(u)
    assert abs(obj.local_diff(u, idx, beta) - ref) <= 1e-10 * (1 + abs(obj.eval(u)))


def _radius_probe(obj, rng, dist_min):
    nx, ny = obj.shape
    u = rng.normal(size=obj.shape)
    p = (int(rng.integers(nx)), int(rng.integers(ny)))
    far = [(i, j) for i in range(nx) for j in range(ny)
           if max(abs(i - p[0]), abs(j - p[1])) >= dist_min]
    q = far[int(rng.integers(len(far)))]
    beta = float(rng.normal())
    before = obj.local_diff(u, p, beta)
    u[q] += float(rng.normal()) * 3
    return before, obj.local_diff(u, p, beta)


@pytest.mark.parametrize("reg", VARIANTS + [Regularizer("none", 0, 0, 1)],
                         ids=lambda r: r.kind)
@given(seed=st.integers(0, 10 ** 6))
@settings(max_examples=25, deadline=None)
def test_radius_soundness(reg, seed):
    obj, rng = make(reg, n=9, seed=seed)
    R = obj.dependency_radius()
    before, after = _radius_probe(obj, rng, R + 1)
    assert abs(before - after) <= 1e-12


def test_declared_radii():
    assert make(tv_eps(1, 0.1))[0].dependency_radius() == 1
    assert make(Regularizer("none", 0, 0, 1))[0].dependency_radius() == 0
    # the curvature term of H_ij reads the 3x3 block around (i, j) and a
    # pixel update changes the 3x3 block of such terms
    assert make(elastica(1, 1, 0.1))[0].dependency_radius() == 2
    assert make(tv_nonsmooth(1, 1, 0.1))[0].dependency_radius() == 2


def test_elastica_reaches_distance_two():
    obj, rng = make(elastica(1, 1, 1e-2), n=9, seed=4)
    u = rng.normal(size=obj.shape)
    before = obj.local_diff(u, (4, 4), 0.5)
    u[6, 4] += 1.0
    assert abs(obj.local_diff(u, (4, 4), 0.5) - before) > 1e-6


def test_gradient_simple_cases():
    g = np.full((6, 6), 0.3)
    obj = ImagingObjective(g, tv_eps(1, 1e-2))
    assert np.allclose(obj.gradient(g), 0.0, atol=1e-14)
    rng = np.random.default_rng(1)
    u, g = rng.random((5, 5)), rng.random((5, 5))
    fid_only = ImagingObjective(g, Regularizer("none", 0, 0, 1))
    assert np.allclose(fid_only.gradient(u), 2 * (u - g), rtol=1e-14)


def fd_gradient(obj, u, delta=1e-6):
    out = np.zeros_like(u)
    for idx in np.ndindex(u.shape):
        out[idx] = (obj.local_diff(u, idx, delta)
                    - obj.local_diff(u, idx, -delta)) / (2 * delta)
    return out


@pytest.mark.parametrize("eps", [1e-2, 1e-4])
@pytest.mark.parametrize("kind", ["elastica", "tv_eps"])
@pytest.mark.parametrize("weighted", [False, True])
def test_gradient_matches_fd(kind, eps, weighted):
    reg = elastica(1, 1, eps) if kind == "elastica" else tv_eps(1, eps)
    obj, rng = make(reg, n=8, seed=7, mask=True, weighted=weighted)
    u = rng.random(obj.shape)
    grad = obj.gradient(u)
    fd = fd_gradient(obj, u)
    assert np.max(np.abs(grad - fd) / (1 + np.abs(grad))) < 1e-5


def test_smoothed_l1_gradient():
    obj, rng = make(tv_eps(0.5, 1e-2), n=6, fid="l1_smoothed")
    obj = ImagingObjective(obj.g, obj.regularizer, Fidelity("l1_smoothed", 1e-3))
    u = rng.random(obj.shape)
    grad = obj.gradient(u)
    assert np.max(np.abs(grad - fd_gradient(obj, u, 1e-7)) / (1 + np.abs(grad))) < 1e-5


def test_gradient_refused_when_nonsmooth():
    with pytest.raises(GradientUndefined):
        make(tv_nonsmooth(1, 1, 0.1))[0].gradient(np.zeros((8, 8)))
    with pytest.raises(GradientUndefined):
        make(tv_eps(1, 0.1), fid="l1")[0].gradient(np.zeros((8, 8)))


@pytest.mark.parametrize("reg", VARIANTS[:2], ids=lambda r: r.kind)
def test_coordinate_minimizer_does_not_increase(reg):
    obj, rng = make(reg, n=6, seed=3)
    u = rng.random(obj.shape)
    v0 = obj.eval(u)
    grid = np.linspace(-2, 2, 4001)
    diffs = [obj.local_diff(u, (2, 3), b) for b in grid]
    best = grid[int(np.argmin(diffs))]
    u[2, 3] += best
    assert obj.eval(u) <= v0


@pytest.mark.parametrize("reg", VARIANTS, ids=lambda r: r.kind)
@given(c=st.floats(-5, 5), seed=st.integers(0, 1000))
@settings(max_examples=10, deadline=None)
def test_translation_invariance(reg, c, seed):
    obj, rng = make(reg, n=6, seed=seed)
    u = rng.random(obj.shape)
    j0 = obj.regularizer_density(u).sum()
    j1 = obj.regularizer_density(u + c).sum()
    assert j1 == pytest.approx(j0, rel=1e-9, abs=1e-9)


def test_parameter_validation():
    with pytest.raises(ValueError):
        Regularizer("tv_eps", 1, 0, 0.0)
    with pytest.raises(ValueError):
        Regularizer("curvy", 1, 0, 0.1)
    with pytest.raises(ValueError):
        Fidelity("l1_smoothed", 0.0)


def test_quadratic_objective():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    q = QuadraticObjective(A, b=[1.0, -1.0])
    u = np.array([0.3, -0.2])
    v = u.copy()
    v[1] += 0.7
    assert q.local_diff(u, (1,), 0.7) == pytest.approx(q.eval(v) - q.eval(u))
    assert np.allclose(q.gradient(u), A @ u - [1.0, -1.0])
    assert q.lipschitz() == pytest.approx(max(np.linalg.eigvalsh(A)))
