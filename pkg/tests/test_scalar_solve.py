import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from dgopt.objectives import (FunctionObjective, ImagingObjective,
                              QuadraticObjective, elastica, tv_eps)
from dgopt.scalar_solve import (BetaStatus, NoSignChange, RootConfig,
                                brent_root, solve_beta)

# frozen from oracles.grid_then_bisect on b^2 + ((1 + b)^4 - 1) / 4
QUARTIC_BETA = -0.481607691003149
# frozen from oracles.fixed_point(math.cos, 0.5)
DOTTIE = 0.7390851332151607


def test_brent_examples():
    assert brent_root(lambda x: x * x - 2, 1, 2) == pytest.approx(math.sqrt(2), abs=1e-9)
    assert brent_root(lambda x: x, -1, 1) == pytest.approx(0.0, abs=1e-10)
    assert brent_root(lambda x: math.cos(x) - x, 0, 1) == pytest.approx(DOTTIE, abs=1e-9)


def test_oracle_fixtures_reproduce():
    f = lambda b: b * b + ((1 + b) ** 4 - 1) / 4
    assert oracles.grid_then_bisect(f, -1.0, -1e-9) == pytest.approx(QUARTIC_BETA, abs=1e-12)
    assert oracles.fixed_point(math.cos, 0.5) == pytest.approx(DOTTIE, abs=1e-14)


def test_brent_errors_and_cap():
    with pytest.raises(NoSignChange):
        brent_root(lambda x: x * x + 1, -1, 1)
    with pytest.raises(ValueError):
        brent_root(lambda x: x, 1, -1)
    with pytest.warns(RuntimeWarning):
        res = brent_root(lambda x: x ** 3 - 0.3, 0, 1,
                         RootConfig(abs_tol=1e-15, max_iterations=2),
                         full_output=True)
    assert not res.converged and 0 <= res.root <= 1


@given(st.floats(-50, 50), st.floats(0.01, 50), st.floats(-3, 3))
@settings(max_examples=60, deadline=None)
def test_brent_stays_in_bracket(lo, width, shift):
    hi = lo + width
    f = lambda x: math.tanh(x - shift)
    if f(lo) * f(hi) > 0:
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r = brent_root(f, lo, hi)
    assert lo <= r <= hi


def test_root_config_validation():
    for kw in ({"abs_tol": 0}, {"bracket_expansion": 1.0},
               {"max_iterations": 0}, {"max_expansions": 0}):
        with pytest.raises(ValueError):
            RootConfig(**kw)


def test_quadratic_lands_on_minimizer():
    q = QuadraticObjective([[1.0]])
    beta = solve_beta(q, np.array([1.0]), (0,), 2.0)
    assert beta == pytest.approx(-1.0, abs=1e-12)


def test_quartic_fixture():
    f = FunctionObjective(lambda u: 0.25 * u[0] ** 4, shape=(1,))
    beta, dv, status = solve_beta(f, np.array([1.0]), (0,), 1.0, full_output=True)
    assert status == BetaStatus.OK
    assert beta == pytest.approx(QUARTIC_BETA, abs=1e-9)
    assert dv == pytest.approx(-beta * beta, abs=1e-9)


def test_flat_slice():
    q = QuadraticObjective([[1.0]])
    assert solve_beta(q, np.array([0.0]), (0,), 1.0, full_output=True) == \
        (0.0, 0.0, BetaStatus.FLAT)
    obj = ImagingObjective(np.full((4, 4), 0.2), tv_eps(1, 0.1))
    assert solve_beta(obj, np.full((4, 4), 0.2), (1, 1), 3.0) == 0.0


def test_tau_validation():
    with pytest.raises(ValueError):
        solve_beta(QuadraticObjective([[1.0]]), np.array([1.0]), (0,), 0.0)


@given(lam=st.floats(0.01, 100), u=st.floats(-10, 10), tau=st.floats(1e-3, 1e3))
@settings(max_examples=80, deadline=None)
def test_quadratic_closed_form(lam, u, tau):
    q = QuadraticObjective([[lam]])
    beta = solve_beta(q, np.array([u]), (0,), tau)
    expect = -tau * lam * u / (1 + tau * lam / 2)
    assert beta == pytest.approx(expect, abs=1e-9 * (1 + abs(expect)))


@pytest.mark.parametrize("reg", [elastica(1, 1, 1e-2), tv_eps(1, 1e-3)],
                         ids=["elastica", "tv"])
@given(seed=st.integers(0, 10 ** 6), tau=st.sampled_from([1e-3, 1e-1, 1.0, 1e3]))
@settings(max_examples=30, deadline=None)
def test_per_coordinate_dissipation(reg, seed, tau):
    rng = np.random.default_rng(seed)
    g = rng.random((6, 6))
    obj = ImagingObjective(g, reg)
    u = rng.random((6, 6))
    idx = (int(rng.integers(6)), int(rng.integers(6)))
    cfg = RootConfig()
    beta, dv, status = solve_beta(obj, u, idx, tau, cfg, full_output=True)
    assert dv <= 0
    assert dv == pytest.approx(obj.local_diff(u, idx, beta), abs=1e-9 * (1 + abs(dv)))
    if status == BetaStatus.OK:
        assert abs(dv + beta * beta / tau) <= 10 * cfg.abs_tol * (1 + abs(beta) / tau)
    slope = (obj.local_diff(u, idx, 1e-8) - obj.local_diff(u, idx, -1e-8)) / 2e-8
    if abs(slope) > 1e-8 and beta != 0.0:
        assert np.sign(beta) == -np.sign(slope)


def test_euler_fallback_keeps_dissipation():
    # slope is -1 everywhere but V jumps up beyond the first step, so no
    # bracket exists on the descent side
    f = FunctionObjective(lambda u: -u[0] if u[0] < 0.5 else 10.0 - u[0], shape=(1,))
    beta, dv, status = solve_beta(f, np.array([0.0]), (0,), 1.0,
                                  RootConfig(max_expansions=3), full_output=True)
    assert status in (BetaStatus.EULER, BetaStatus.ZERO, BetaStatus.OK)
    assert dv <= 0
