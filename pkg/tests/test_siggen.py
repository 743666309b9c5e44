import math

import numpy as np
import pytest

from mcdemod.carriers import CarrierBasis, DisturbanceSupport, constant_carrier, benchmark_carrier_basis
from mcdemod.siggen import (
    DisturbanceModel,
    EncodedSignals,
    SampledSignal,
    center_function,
    chirp,
    benchmark_disturbance_support,
    benchmark_encoded_signals,
    samples_per_period,
    sinusoid_sum,
    synthesize,
)


def z_reference(t):
    t = np.asarray(t, dtype=float)
    return np.stack([
        2 * np.sin(t) - 1.5 * np.sin(t / 2),
        np.cos(t) - 1.2 * np.sin(t / 4),
        1.4 * np.cos(t / 3) ** 2,
    ])


def test_benchmark_encoded_values_at_zero():
    z = benchmark_encoded_signals()(np.array([0.0]))[:, 0]
    assert z[0] == 0.0
    assert z[1] == 1.0
    assert z[2] == pytest.approx(1.4, abs=1e-15)


def test_benchmark_encoded_match_formulas():
    t = np.linspace(0, 5, 1001)
    np.testing.assert_allclose(benchmark_encoded_signals()(t), z_reference(t), rtol=0, atol=1e-15)


def test_sinusoid_sum_terms():
    f = sinusoid_sum([{"fn": "cos", "amplitude": 3.0, "omega": 2.0, "divisor": 5.0, "phase": 0.1, "power": 3}])
    t = np.array([0.0, 1.0, 2.5])
    np.testing.assert_allclose(f(t), 3 * np.cos(2 * t / 5 + 0.1) ** 3, rtol=1e-15)


def test_center_functions():
    assert center_function("sin")(0.0) == pytest.approx(0.5)
    assert center_function("cos")(0.0) == pytest.approx(1.0)
    c = center_function("constant", value=0.3)
    assert c(1.0) == 0.3
    np.testing.assert_array_equal(c(np.zeros(3)), 0.3)


def test_benchmark_support_centers():
    D = benchmark_disturbance_support()
    (f, hf), (g, hg) = D.intervals
    assert hf == hg == 1 / 20
    for t in (0.0, 1.0, 3.0):
        assert f(t) == pytest.approx((1 + math.sin(t)) / 2)
        assert g(t) == pytest.approx((1 + math.cos(t)) / 2)


# -- disturbance -------------------------------------------------------------


@pytest.mark.parametrize("shape", ["raised_cosine", "rectangle"])
def test_disturbance_vanishes_outside_support(shape):
    D = benchmark_disturbance_support()
    d = DisturbanceModel(D, 5.0, shape)
    for t in np.linspace(0, 5, 7):
        s = (np.arange(10_000) + 0.5) / 10_000
        v = d(np.full_like(s, t), s)
        assert np.all(v[~D.contains(t, s)] == 0.0)
        assert np.max(v) > 0


def test_raised_cosine_peak_and_edges():
    D = DisturbanceSupport(((lambda t: 0.5, 0.1),))
    d = DisturbanceModel(D, 5.0)
    assert d(0.0, 0.5) == pytest.approx(5.0)
    assert d(0.0, 0.4) == pytest.approx(0.0, abs=1e-15)
    assert d(0.0, 0.45) == pytest.approx(2.5)
    assert DisturbanceModel(D, 5.0, "rectangle")(0.0, 0.42) == 5.0


def test_disturbance_shape_validated():
    with pytest.raises(ValueError):
        DisturbanceModel(benchmark_disturbance_support(), 1.0, "triangle")


# -- synthesis ---------------------------------------------------------------


def test_samples_per_period():
    assert samples_per_period(0.01, 0.01 / 200) == 200
    with pytest.raises(ValueError):
        samples_per_period(0.01, 0.01 / 3.7)


def test_constant_signal():
    S = CarrierBasis((constant_carrier(1.0),))
    z = EncodedSignals((lambda t: 2.5 + 0 * t,))
    sig = synthesize(z, S, None, 0.01, 0.01 / 20, (0, 1))
    assert np.all(sig.values == 2.5)
    assert len(sig) == 2001


def test_benchmark_signal_at_zero():
    sig = synthesize(benchmark_encoded_signals(), benchmark_carrier_basis(), None, 0.01, 0.01 / 200, (0, 0.1))
    assert sig.values[0] == pytest.approx(0.4, abs=1e-15)


def test_signal_is_direct_sum():
    S = benchmark_carrier_basis()
    z = benchmark_encoded_signals()
    eps, d = 0.01, 0.01 / 200
    sig = synthesize(z, S, None, eps, d, (0, 2))
    t = sig.times
    expect = sum(z_reference(t)[i] * S[i](t, t / eps) for i in range(3))
    np.testing.assert_allclose(sig.values, expect, rtol=0, atol=1e-14)


def test_spike_inside_mask():
    S = benchmark_carrier_basis()
    z = benchmark_encoded_signals()
    D = benchmark_disturbance_support()
    eps, d = 0.01, 0.01 / 200
    # on [2, 3] the two arcs stay disjoint, so each spike peaks at the amplitude
    clean = synthesize(z, S, None, eps, d, (2, 3))
    dirty = synthesize(z, S, DisturbanceModel(D, 5.0), eps, d, (2, 3))
    diff = dirty.values - clean.values
    t = clean.times
    inside = D.contains(t, np.mod(t / eps, 1.0))
    assert np.all(diff[~inside] == 0.0)
    assert diff[inside].max() == pytest.approx(5.0, abs=0.01)


def test_overlapping_arcs_add():
    c = lambda t: 0.5
    D = DisturbanceSupport(((c, 0.05), (c, 0.05)))
    assert DisturbanceModel(D, 5.0)(0.0, 0.5) == pytest.approx(10.0)


def test_generator_deterministic():
    args = (benchmark_encoded_signals(), benchmark_carrier_basis(), DisturbanceModel(benchmark_disturbance_support()),
            0.01, 0.01 / 100, (0, 1), 3, 1.0)
    a, b = synthesize(*args), synthesize(*args)
    np.testing.assert_array_equal(a.values, b.values)


def test_perturbation_scaling():
    S = CarrierBasis((constant_carrier(1.0),))
    z = EncodedSignals((lambda t: 0 * t,))
    sig = synthesize(z, S, None, 0.1, 0.1 / 20, (0, 3), perturbation_k=2, perturbation_scale=0.5)
    np.testing.assert_allclose(sig.values, 0.5 * 0.01 * chirp(sig.times), rtol=1e-15)
    assert np.max(np.abs(chirp(np.linspace(0, 10, 1000)))) <= 1.0


def test_span_covered_and_validated():
    S = CarrierBasis((constant_carrier(1.0),))
    z = EncodedSignals((lambda t: 0 * t,))
    eps = 10 ** -2.7
    sig = synthesize(z, S, None, eps, eps / 200, (0, 5))
    assert sig.times[-1] >= 5.0 - 1e-12
    assert sig.times[-1] < 5.0 + eps / 200
    with pytest.raises(ValueError):
        synthesize(z, S, None, 0.01, 0.01 / 20, (1, 1))
    with pytest.raises(ValueError):
        synthesize(benchmark_encoded_signals(), S, None, 0.01, 0.01 / 20, (0, 1))


def test_sampled_signal_rejects_nonfinite():
    with pytest.raises(ValueError):
        SampledSignal(0.0, 0.1, [1.0, np.nan])
