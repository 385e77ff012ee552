import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ssmgic.core import FilterInit, ModelSpec, ParameterVector, TimeSeries, validate_model
from ssmgic.models import SeasonalArConfig, build_seasonal_ar

from conftest import FAMILIES


def scalar_trend_spec(tau2=1.0, sigma2=1.0, **overrides):
    fields = dict(
        F=[[1.0]], G=[[1.0]], H=[1.0], Q=[[tau2]], R=sigma2,
        dF=np.zeros((2, 1, 1)), dQ=np.array([[[tau2]], [[0.0]]]), dR=np.array([0.0, sigma2]),
        d2F=np.zeros((2, 2, 1, 1)), d2Q=np.array([[[[tau2]], [[0.0]]], [[[0.0]], [[0.0]]]]),
        d2R=np.array([[0.0, 0.0], [0.0, sigma2]]),
    )
    fields.update(overrides)
    return ModelSpec(**fields)


def test_smallest_trend_spec_is_valid():
    assert validate_model(scalar_trend_spec()) == []


def test_asymmetric_dq_reported_by_name():
    dQ = np.zeros((2, 2, 2))
    dQ[0] = [[1.0, 0.5], [0.0, 1.0]]
    spec = ModelSpec(
        F=np.eye(2), G=np.eye(2), H=[1.0, 0.0], Q=np.eye(2), R=1.0,
        dF=np.zeros((2, 2, 2)), dQ=dQ, dR=np.zeros(2),
        d2F=np.zeros((2, 2, 2, 2)), d2Q=np.zeros((2, 2, 2, 2)), d2R=np.zeros((2, 2)),
    )
    problems = validate_model(spec)
    assert len(problems) == 1
    assert "dQ[0]" in problems[0]


def test_seasonal_ar_builder_output_is_valid():
    spec = build_seasonal_ar(SeasonalArConfig(2, 12, 2), [-3, -4, -5, -2, 0.5, -0.2])
    assert validate_model(spec) == []


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_every_builder_validates(name, rng):
    model = FAMILIES[name]
    for _ in range(5):
        theta = rng.normal(size=len(model.param_names))
        assert validate_model(model.build(theta)) == []


@pytest.mark.parametrize(
    "override, fragment",
    [
        ({"G": [[1.0, 0.0]]}, "G has shape"),
        ({"R": -1.0}, "negative"),
        ({"Q": [[-1.0]]}, "positive semidefinite"),
        ({"dF": np.ones((2, 1, 1))}, "F_is_constant"),
        ({"d2R": np.array([[0.0, 1.0], [0.0, 1.0]])}, "d2R"),
    ],
)
def test_constructed_violations(override, fragment):
    problems = validate_model(scalar_trend_spec(**override))
    assert any(fragment in msg for msg in problems), problems


def test_model_spec_arrays_are_read_only():
    spec = scalar_trend_spec()
    with pytest.raises(ValueError):
        spec.F[0, 0] = 2.0


@given(arrays(np.float64, st.integers(1, 7), elements=st.floats(-50, 50)), st.data())
def test_parameter_round_trip(theta, data):
    mask = data.draw(arrays(np.bool_, theta.shape))
    pv = ParameterVector(theta, log_variance=mask)
    assert np.all(pv.natural_scale[mask] > 0)
    back = ParameterVector.from_natural(pv.natural_scale, log_variance=mask)
    np.testing.assert_allclose(back.theta, theta, rtol=0, atol=1e-12)


def test_parameter_vector_rejects_nonfinite():
    with pytest.raises(ValueError):
        ParameterVector([0.0, np.nan])


def test_time_series_validation():
    assert TimeSeries([1.0, 2.0]).N == 2
    with pytest.raises(ValueError):
        TimeSeries([])
    with pytest.raises(ValueError, match="index 1"):
        TimeSeries([1.0, np.inf])


def test_filter_init_defaults():
    x0, V0 = FilterInit().resolve(3)
    np.testing.assert_array_equal(x0, np.zeros(3))
    np.testing.assert_array_equal(V0, 1e4 * np.eye(3))
    x0, V0 = FilterInit(kappa=5.0).resolve(2)
    np.testing.assert_array_equal(V0, 5.0 * np.eye(2))


def test_filter_init_checks():
    with pytest.raises(ValueError):
        FilterInit(kappa=0.0)
    with pytest.raises(ValueError):
        FilterInit(V0=[[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        FilterInit(V0=-np.eye(2))
    with pytest.raises(ValueError):
        FilterInit(x0=[0.0]).resolve(2)
