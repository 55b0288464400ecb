import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdtrfit.params import ParamDef, ParameterSpace, linear_space


def space_lin_log():
    return ParameterSpace([ParamDef("a", 1.0, 1000.0, "linear"), ParamDef("b", 1.0, 1000.0, "log10")])


def test_linear_identity():
    assert space_lin_log().to_physical([130.0, 0.0])[0] == 130.0


def test_log10_component():
    assert space_lin_log().to_physical([0.0, 2.0])[1] == pytest.approx(100.0, rel=1e-15)


def test_wrong_dimension_raises():
    with pytest.raises(ValueError, match="dimension mismatch"):
        space_lin_log().to_physical([1.0, 2.0, 3.0])


def test_fixed_params_excluded():
    sp = ParameterSpace([ParamDef("a", 1, 10), ParamDef("f", 1, 3, role="fixed", fixed_value=2.0)])
    assert sp.dim == 1 and sp.names == ["a"] and sp.fixed == {"f": 2.0}
    assert sp.to_physical([0.5]).shape == (1,)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(name="x", lower=2.0, upper=1.0, scale="linear"),
        dict(name="x", lower=0.0, upper=1.0, scale="log10"),
        dict(name="x", lower=1.0, upper=2.0, role="fixed"),
        dict(name="x", lower=1.0, upper=2.0, scale="ln"),
    ],
)
def test_paramdef_validation(kwargs):
    with pytest.raises(ValueError):
        ParamDef(**kwargs)


def test_duplicate_names_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        ParameterSpace([ParamDef("a", 1, 2), ParamDef("a", 1, 3)])


def test_decode_all_zero_and_all_one():
    sp = linear_space([(0.0, 1.0), (-3.0, 12.1)])
    assert np.array_equal(sp.decode_bits(np.zeros(40, int)), sp.lower)
    np.testing.assert_allclose(sp.decode_bits(np.ones(40, int)), sp.upper, rtol=0, atol=1e-15)


def test_decode_msb_only():
    sp = linear_space([(0.0, 1.0)])
    bits = np.zeros(20, int)
    bits[0] = 1
    assert sp.decode_bits(bits)[0] == 524288 / 1048575
    assert sp.decode_bits(bits)[0] == pytest.approx(0.5000005, abs=1e-7)


def test_decode_accepts_grouped_shape():
    sp = linear_space([(0.0, 1.0), (0.0, 2.0)])
    rng = np.random.default_rng(1)
    bits = rng.integers(0, 2, (7, 2, 20))
    np.testing.assert_array_equal(sp.decode_bits(bits), sp.decode_bits(bits.reshape(7, 40)))


def test_decode_bad_shape():
    with pytest.raises(ValueError):
        linear_space([(0.0, 1.0)]).decode_bits(np.zeros(19, int))


def test_constrain_examples():
    sp = linear_space([(0.0, 1.0)])
    assert sp.constrain([0.3], "reflect")[0] == 0.3
    assert sp.constrain([1.2], "reflect")[0] == pytest.approx(0.8)
    assert sp.constrain([-3.5], "clamp")[0] == 0.0
    with pytest.raises(ValueError):
        sp.constrain([0.3], "wrap")


def test_reflect_repeated_folds():
    sp = linear_space([(0.0, 1.0)])
    assert sp.constrain([2.3], "reflect")[0] == pytest.approx(0.3)
    assert sp.constrain([-1.25], "reflect")[0] == pytest.approx(0.75)


def test_sample_uniform_inside():
    sp = space_lin_log()
    x = sp.sample_uniform(np.random.default_rng(0), 500)
    assert np.all((x >= sp.lower) & (x <= sp.upper))


@settings(max_examples=200)
@given(st.integers(0, 2**20 - 2))
def test_decode_monotone(n):
    sp = linear_space([(-3.0, 12.1)])
    to_bits = lambda k: np.array([(k >> (19 - i)) & 1 for i in range(20)])
    assert sp.decode_bits(to_bits(n + 1))[0] >= sp.decode_bits(to_bits(n))[0]


@settings(max_examples=200)
@given(st.floats(1e-3, 1e9), st.floats(1.0, 1e4))
def test_scaling_round_trip(lo, ratio):
    sp = ParameterSpace([ParamDef("p", lo, lo * ratio * 1.001 + lo)])
    p = np.array([lo * np.sqrt(ratio)])
    assert sp.to_physical(sp.to_scaled(p))[0] == pytest.approx(p[0], rel=1e-12)


@settings(max_examples=300)
@given(st.floats(-1e3, 1e3), st.sampled_from(["reflect", "clamp"]))
def test_constrain_idempotent_and_inside(x, mode):
    sp = linear_space([(-3.0, 12.1)])
    once = sp.constrain([x], mode)
    assert sp.lower[0] <= once[0] <= sp.upper[0]
    assert np.array_equal(sp.constrain(once, mode), once)
