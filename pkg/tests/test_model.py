import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blinkfim.model import (MIXED, Detection, GaussianPSF, SourceModel, log_density_gradient,
                            mixture_density, param_labels, psf_amplitude,
                            single_source_density)
from blinkfim.quadrature import QuadratureSpec, integrate

# (2 pi)^(-1/4), 30-digit reference
PSI0 = 0.631618777746064701290010510108


def test_amplitude_peak():
    assert psf_amplitude(0.0, 1.0) == pytest.approx(PSI0, rel=1e-15)


@pytest.mark.parametrize("sigma", [0.3, 1.0, 2.7])
def test_amplitude_two_sigma(sigma):
    assert psf_amplitude(2 * sigma, sigma) == pytest.approx(
        psf_amplitude(0.0, sigma) * np.exp(-1), rel=1e-14)


@pytest.mark.parametrize("sigma", [0.0, -1.0])
def test_amplitude_bad_sigma(sigma):
    with pytest.raises(ValueError):
        psf_amplitude(0.0, sigma)


def test_amplitude_square_normalized():
    r = integrate(lambda x: psf_amplitude(x, 1.3) ** 2, -15, 15, QuadratureSpec(), 30)
    assert r.value == pytest.approx(1.0, rel=1e-12)


def test_single_source_peak_and_mismatch():
    assert single_source_density(0.7, 0.7, 2.0) == pytest.approx(1 / np.sqrt(2 * np.pi * 4))
    with pytest.raises(ValueError):
        single_source_density([0.0, 0.0], [0.0, 0.0, 0.0], 1.0, 2)
    with pytest.raises(ValueError):
        single_source_density(0.0, [0.0, 1.0], 1.0, 1)


def test_single_source_2d_is_product():
    r = np.array([[0.4, -1.2]])
    p = single_source_density(r, [0.1, 0.3], 0.8)
    px = single_source_density(0.4, 0.1, 0.8) * single_source_density(-1.2, 0.3, 0.8)
    assert p[0] == pytest.approx(px, rel=1e-14)


def test_mixture_reduces_to_single():
    m = SourceModel([0.3], None, 1.2, 10)
    x = np.linspace(-3, 3, 7)
    assert np.array_equal(mixture_density(x, m), single_source_density(x, 0.3, 1.2))
    coincident = SourceModel([0.5, 0.5], [0.5, 0.5], 1.0, 10)
    assert np.allclose(mixture_density(x, coincident), single_source_density(x, 0.5, 1.0),
                       rtol=1e-15)


def test_mixture_midpoint():
    m = SourceModel([0.0, 4.0], [0.5, 0.5], 1.0, 1)
    assert mixture_density(2.0, m) == pytest.approx(single_source_density(2.0, 0.0, 1.0))


def test_validation():
    with pytest.raises(ValueError):
        SourceModel([0, 1], [0.7, 0.7])
    with pytest.raises(ValueError):
        SourceModel([0, 1], [1.2, -0.2])
    with pytest.raises(ValueError):
        SourceModel([0, 1], [0.5, 0.5], sigma=[1.0, 2.0])
    with pytest.raises(ValueError):
        SourceModel([0, 1], photons=0)
    with pytest.raises(ValueError):
        SourceModel.pair_1d(1.0, delta=1.0)
    assert SourceModel([[0, 0], [1, 0]], [1.0, 0.0]).dark_sources == (1,)


def test_labels_and_theta():
    m = SourceModel([[0, 1], [2, 3]])
    assert m.labels == ("x1", "y1", "x2", "y2") == param_labels(2, 2)
    assert np.array_equal(m.theta, [0, 1, 2, 3])
    pair = SourceModel.pair_1d(2.0, 0.2, 1.0, 100, center=1.0)
    assert np.allclose(pair.positions[:, 0], [0.0, 2.0])
    assert np.allclose(pair.weights, [0.6, 0.4])


def test_detection_window():
    assert Detection((0.1,)).window == MIXED
    assert Detection((0.1,), 2).window == 2
    with pytest.raises(ValueError):
        Detection((0.1,), 0)


def test_psf_gradient_matches_finite_difference():
    psf = GaussianPSF(0.9, 2)
    u = np.array([[0.3, -0.7], [1.1, 0.2]])
    h = 1e-6
    num = np.stack([(psf.amplitude(u + h * e) - psf.amplitude(u - h * e)) / (2 * h)
                    for e in np.eye(2)], axis=1)
    assert np.allclose(psf.amplitude_grad(u), num, rtol=1e-7, atol=1e-10)


positions = st.lists(st.floats(-5, 5), min_size=1, max_size=4)


@settings(max_examples=60, deadline=None)
@given(positions, st.floats(0.3, 3.0), st.floats(-6, 6), st.integers(0, 2**31))
def test_score_matches_finite_difference(pos, sigma, x, seed):
    w = np.random.default_rng(seed).dirichlet(np.ones(len(pos)))
    m = SourceModel(pos, w, sigma, 1)
    g = log_density_gradient(x, m)
    h = 1e-6 * sigma
    num = []
    for i in range(len(pos)):
        th = m.theta.copy()
        th[i] += h
        up = np.log(mixture_density(x, m.with_theta(th)))
        th[i] -= 2 * h
        dn = np.log(mixture_density(x, m.with_theta(th)))
        num.append((up - dn) / (2 * h))
    assert np.allclose(g, num, rtol=1e-5, atol=1e-6 / sigma)


@settings(max_examples=40, deadline=None)
@given(positions, st.floats(0.3, 3.0), st.integers(0, 2**31))
def test_mixture_normalized(pos, sigma, seed):
    w = np.random.default_rng(seed).dirichlet(np.ones(len(pos)))
    m = SourceModel(pos, w, sigma, 1)
    (lo, hi), = m.box(10.0)
    r = integrate(lambda x: mixture_density(x, m), lo, hi, QuadratureSpec(), int(hi - lo) + 1)
    assert r.value == pytest.approx(1.0, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(-4, 4), st.floats(0.1, 5), st.floats(-4, 4))
def test_mixture_symmetric_under_exchange(a, b, x):
    m1 = SourceModel([a, b], [0.5, 0.5], 1.0, 1)
    m2 = SourceModel([b, a], [0.5, 0.5], 1.0, 1)
    assert mixture_density(x, m1) == pytest.approx(mixture_density(x, m2), rel=1e-14)
