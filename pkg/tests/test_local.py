import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdtrfit.benchmarks import BENCH_Z
from fdtrfit.optim.local import (
    bfgs_minimize,
    bfgs_update,
    dogleg,
    nelder_mead_minimize,
    run_local,
    trust_region_lsq,
)

Z_RING = -0.6771956027519526


def sphere(x):
    return float(np.sum(np.asarray(x) ** 2))


def rosen_residuals(x):
    return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])


# ---- BFGS update algebra -------------------------------------------------

vec = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).map(np.array)
eigs = st.lists(st.floats(0.1, 10.0), min_size=3, max_size=3).map(np.array)


def _spd(rng, eigvals):
    q, _ = np.linalg.qr(rng.normal(size=(eigvals.size, eigvals.size)))
    return (q * eigvals) @ q.T


@settings(max_examples=1000, deadline=None)
@given(dx=vec, h_eigs=eigs, b_eigs=eigs, seed=st.integers(0, 2**31 - 1))
def test_update_secant_and_spd(dx, h_eigs, b_eigs, seed):
    # gradient change of a quadratic with curvature H: positive by construction
    if np.linalg.norm(dx) < 1e-6:
        return
    rng = np.random.default_rng(seed)
    dg = _spd(rng, h_eigs) @ dx
    Binv = _spd(rng, b_eigs)
    new, applied = bfgs_update(Binv, dx, dg)
    assert applied
    assert np.max(np.abs(new @ dg - dx)) < 1e-10
    assert np.array_equal(new, new.T)
    np.linalg.cholesky(new)


def test_update_identity_fixed_point():
    s = np.array([0.3, -1.2, 2.0])
    new, applied = bfgs_update(np.eye(3), s, s)
    assert applied
    np.testing.assert_allclose(new, np.eye(3), atol=1e-14)


def test_update_skipped_on_zero_curvature():
    B = np.diag([1.0, 2.0])
    new, applied = bfgs_update(B, np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert not applied and new is B


def test_update_skipped_on_negative_curvature():
    B = np.eye(2)
    new, applied = bfgs_update(B, np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
    assert not applied and new is B


# ---- BFGS ----------------------------------------------------------------

def test_bfgs_sphere_few_iterations():
    res = bfgs_minimize(sphere, [1.0, 1.0])
    assert np.linalg.norm(res.x_final) < 1e-6
    assert res.iterations <= 3
    assert res.status == "converged"


def test_bfgs_trace_monotone_and_min():
    res = bfgs_minimize(BENCH_Z.fitness, [1.0, 1.0])
    fs = [f for _, f in res.trace]
    assert all(b <= a for a, b in zip(fs, fs[1:]))
    assert res.f_final == min(fs)


def test_bfgs_rejects_nonfinite_start():
    with pytest.raises(ValueError):
        bfgs_minimize(lambda x: np.nan, [0.0])


def test_bfgs_respects_max_evals():
    calls = []

    def f(x):
        calls.append(1)
        return sphere(x - 3.0)

    res = bfgs_minimize(f, [0.0, 0.0, 0.0], max_evals=20)
    assert len(calls) <= 20 and res.evals == len(calls)


def test_bfgs_max_iter_zero():
    res = bfgs_minimize(sphere, [1.0, 2.0], max_iter=0)
    assert res.status == "max_iter"
    np.testing.assert_array_equal(res.x_final, [1.0, 2.0])


def test_bfgs_line_search_failure_keeps_best():
    # gradient says descend but every trial point is worse
    def f(x):
        return 0.0 if np.allclose(x, 0.0) else (1.0 if abs(x[0]) > 1e-7 else -x[0])

    res = bfgs_minimize(f, [0.0], max_iter=5)
    assert res.f_final <= 0.0


# ---- Nelder-Mead -----------------------------------------------------------

def test_nm_sphere():
    res = nelder_mead_minimize(sphere, [1.0, 1.0])
    assert res.f_final < 1e-6


def test_nm_max_iter_zero_returns_start():
    res = nelder_mead_minimize(sphere, [1.0, 1.0], max_iter=0)
    assert res.status == "max_iter"
    np.testing.assert_array_equal(res.x_final, [1.0, 1.0])


def test_nm_max_evals_hard_cap():
    res = nelder_mead_minimize(sphere, [5.0, -5.0, 2.0], max_evals=30)
    assert res.evals <= 30


def test_nm_zero_coordinate_simplex():
    # a start with a zero component still spans the space
    res = nelder_mead_minimize(lambda x: (x[0] - 0.5) ** 2 + (x[1] - 0.2) ** 2, [0.0, 0.0])
    np.testing.assert_allclose(res.x_final, [0.5, 0.2], atol=1e-2)


# ---- trust region ----------------------------------------------------------

def test_tr_linear_one_step():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(8, 3))
    b = rng.normal(size=8)
    res = trust_region_lsq(lambda x: A @ x - b, np.array([40.0, -25.0, 7.0]), radius=1e3)
    x_ls = np.linalg.lstsq(A, b, rcond=None)[0]
    np.testing.assert_allclose(res.x_final, x_ls, atol=1e-6)
    # the first accepted step already lands on the solution
    assert abs(res.trace[1][1] - np.sum((A @ x_ls - b) ** 2)) < 1e-8


def test_tr_rosenbrock():
    res = trust_region_lsq(rosen_residuals, np.array([-1.2, 1.0]), tol=1e-12, max_iter=500)
    np.testing.assert_allclose(res.x_final, [1.0, 1.0], atol=1e-8)


def test_tr_accepted_steps_decrease():
    res = trust_region_lsq(rosen_residuals, np.array([-1.2, 1.0]))
    fs = [f for _, f in res.trace]
    assert all(b < a for a, b in zip(fs, fs[1:]))


def test_tr_nonfinite_residuals_stall_or_stop():
    def r(x):
        return np.array([np.nan]) if x[0] > 0.5 else np.array([x[0] - 2.0])

    res = trust_region_lsq(r, np.array([0.0]))
    assert np.isfinite(res.f_final) and res.x_final[0] <= 0.5


def test_tr_max_evals_cap():
    res = trust_region_lsq(rosen_residuals, np.array([-1.2, 1.0]), max_evals=15)
    assert res.evals <= 15


def test_dogleg_inside_radius():
    J = np.array([[2.0, 0.0], [0.0, 1.0]])
    r = np.array([1.0, 1.0])
    step, at_boundary = dogleg(J, r, 100.0)
    np.testing.assert_allclose(step, [-0.5, -1.0])
    assert not at_boundary
    step, at_boundary = dogleg(J, r, 0.1)
    assert at_boundary and np.linalg.norm(step) == pytest.approx(0.1)


# ---- the ring landscape: two basins ---------------------------------------

def _run(alg, x0):
    return run_local(
        alg,
        BENCH_Z.fitness,
        np.array(x0, dtype=float),
        residual_fn=BENCH_Z.residuals,
        residual_offset=BENCH_Z.residual_offset,
        max_iter=1000,
    )


@pytest.mark.parametrize("alg,tol", [("bfgs", 1e-6), ("nelder_mead", 1e-4), ("trust_region", 1e-6)])
def test_ring_from_inside_reaches_global(alg, tol):
    assert abs(_run(alg, (1.0, 1.0)).f_final + 1.0) < tol


@pytest.mark.parametrize("alg", ["bfgs", "nelder_mead", "trust_region"])
def test_ring_from_outside_stays_on_ring(alg):
    res = _run(alg, (-2.5, -2.5))
    assert abs(res.f_final - Z_RING) < 1e-3
    assert np.hypot(*res.x_final) == pytest.approx(2.8298, abs=1e-2)


@pytest.mark.parametrize("x0", [(1.0, 1.0), (-2.5, -2.5), (0.3, -1.7)])
def test_same_start_same_basin(x0):
    fs = [_run(alg, x0).f_final for alg in ("bfgs", "nelder_mead", "trust_region")]
    assert max(fs) - min(fs) < 1e-3


def test_unknown_algorithm():
    with pytest.raises(ValueError):
        run_local("newton", sphere, [0.0])


def test_trust_region_needs_residuals():
    with pytest.raises(ValueError):
        run_local("trust_region", sphere, [0.0])


def test_bfgs_stalls_on_nonfinite_gradient():
    # a wall right next to the start makes the difference quotient infinite
    res = bfgs_minimize(lambda x: np.inf if x[0] > 1e-8 else float(x[0] ** 2 + 1), [0.0])
    assert res.status == "stalled" and res.f_final == 1.0
