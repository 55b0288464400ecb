import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdtrfit.identifiability import (
    SensitivityCurve,
    identifiability_svd,
    sensitivity,
    svd_report,
)
from fdtrfit.objective import gan_si_problem

# frozen spectrum of the five-parameter two-spot problem at rel_step 0.01
GOLDEN_SIGMA = [54.37901588758285, 43.81928768787129, 16.252300647172294, 8.386357486213782, 1.9681600397142707]


@pytest.fixture(scope="module")
def problem():
    return gan_si_problem()


def test_golden_spectrum(problem):
    rep = identifiability_svd(problem, problem.space.names)
    np.testing.assert_allclose(rep.singular_values, GOLDEN_SIGMA, rtol=1e-9)
    assert rep.condition == pytest.approx(27.629366916461414, rel=1e-9)
    assert not rep.degenerate


def test_frobenius_and_orthonormal(problem):
    rep = identifiability_svd(problem, problem.space.names)
    fro2 = np.linalg.norm(rep.jacobian, "fro") ** 2
    assert abs(np.sum(rep.singular_values**2) - fro2) <= 1e-8 * fro2
    np.testing.assert_allclose(rep.directions @ rep.directions.T, np.eye(5), atol=1e-12)


def test_threaded_equals_serial(problem):
    a = identifiability_svd(problem, problem.space.names)
    b = identifiability_svd(problem, problem.space.names, workers=3)
    np.testing.assert_array_equal(a.jacobian, b.jacobian)


def test_table_rows(problem):
    rep = identifiability_svd(problem, problem.space.names)
    rows = rep.table()
    assert [r["index"] for r in rows] == list(range(5))
    assert all(r["dominant"] in problem.space.names for r in rows)


def test_step_halving_consistent(problem):
    a = sensitivity(problem, "k_Si", rel_step=0.01).S
    b = sensitivity(problem, "k_Si", rel_step=0.005).S
    assert np.max(np.abs(a - b)) < 1e-3 * np.max(np.abs(b))


def test_curve_layout(problem):
    c = sensitivity(problem, "k_GaN")
    n = sum(ds.grid.freqs.size for ds in problem.datasets)
    assert c.S.shape == c.freqs.shape == (n,)
    assert c.peak == np.max(np.abs(c.S))


def test_g2_sensitivity_is_finite_and_weaker_than_k_si(problem):
    g2 = sensitivity(problem, "G2")
    ksi = sensitivity(problem, "k_Si")
    assert 0 < g2.peak < ksi.peak


def test_at_overrides_nominal(problem):
    base = sensitivity(problem, "k_Si").S
    moved = sensitivity(problem, "k_Si", at={"k_GaN": 200.0}).S
    assert not np.allclose(base, moved)


def test_sensitivity_errors(problem):
    with pytest.raises(ValueError):
        sensitivity(problem, "k_Si", rel_step=0.0)
    with pytest.raises(KeyError):
        sensitivity(problem, "nonexistent")
    with pytest.raises(ValueError):
        sensitivity(problem, "k_Si", at={"k_Si": -1.0})
    with pytest.raises(ValueError):
        identifiability_svd(problem, [])


def test_unbound_parameter_has_zero_sensitivity():
    from dataclasses import replace

    from fdtrfit.sample import ParameterBinding

    prob = gan_si_problem()
    unbound = ParameterBinding({k: v for k, v in prob.binding.items() if k != "k_Si"})
    prob2 = replace(prob, binding=unbound)
    assert np.all(sensitivity(prob2, "k_Si").S == 0.0)


def test_curve_length_check():
    with pytest.raises(ValueError):
        SensitivityCurve("x", np.ones(3), np.ones(4))


# ---- svd_report on constructed Jacobians -----------------------------------

def test_duplicate_columns_degenerate_direction():
    rng = np.random.default_rng(0)
    c = rng.normal(size=40)
    J = np.column_stack([c, rng.normal(size=40), c])
    rep = svd_report(J, ["a", "b", "c"])
    assert rep.singular_values[-1] < 1e-10
    weak = rep.directions[-1]
    np.testing.assert_allclose(np.abs(weak), [2**-0.5, 0, 2**-0.5], atol=1e-8)


def test_orthogonal_columns_give_norms():
    J = np.zeros((6, 3))
    J[0, 0], J[1, 1], J[2, 2] = 3.0, -5.0, 0.5
    rep = svd_report(J, ["a", "b", "c"])
    np.testing.assert_allclose(rep.singular_values, [5.0, 3.0, 0.5])
    assert rep.condition == pytest.approx(10.0)


def test_all_zero_jacobian():
    rep = svd_report(np.zeros((5, 2)), ["a", "b"])
    assert rep.degenerate and np.all(rep.singular_values == 0)
    assert rep.condition == np.inf


def test_svd_report_shape_checks():
    with pytest.raises(ValueError):
        svd_report(np.ones((4, 2)), ["a"])
    with pytest.raises(ValueError):
        svd_report(np.ones(4), ["a"])


@settings(max_examples=100, deadline=None)
@given(m=st.integers(1, 12), n=st.integers(1, 6), seed=st.integers(0, 10_000))
def test_frobenius_identity_random(m, n, seed):
    J = np.random.default_rng(seed).normal(size=(m, n)) * 10.0 ** np.random.default_rng(seed + 1).uniform(-3, 3, n)
    rep = svd_report(J, [f"p{i}" for i in range(n)])
    fro2 = float(np.sum(J**2))
    assert abs(np.sum(rep.singular_values**2) - fro2) <= 1e-8 * fro2
    assert np.all(np.diff(rep.singular_values) <= 0)
