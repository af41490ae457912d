import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad, quad
from scipy.special import iv

from tachypulse.numerics import Grid1D
from tachypulse.opc_time import ProbePulse, peak_time
from tachypulse.srs import (
    NoiseSources,
    SrsMedium,
    gain_spectrum,
    kernel_transfer,
    raman_kernel,
    srs_free_space_flux,
    srs_response_field,
    srs_response_flux,
    srs_series,
    srs_spontaneous_flux,
)


def fig6_probe(detuning, spectral_fwhm, t_p, gamma=1.0):
    return ProbePulse("gaussian", 8 * math.log(2) / (spectral_fwhm * gamma), detuning * gamma, t_p / gamma, photon_number=1e10)


# ---------------------------------------------------------------- kernel

@settings(max_examples=200, deadline=None)
@given(t=st.floats(0, 200), gL=st.floats(0, 50), G=st.floats(0.1, 5))
def test_kernel_nonnegative(t, gL, G):
    assert raman_kernel(t, SrsMedium(G, gL)) >= 0


def test_kernel_matches_definition():
    m = SrsMedium(1.0, 25.0)
    for t in (1e-6, 0.3, 4.0, 30.0):
        az = 25.0
        ref = 0.5 * math.sqrt(az / t) * math.exp(-t) * iv(1, math.sqrt(az * t))
        assert raman_kernel(t, m) == pytest.approx(ref, rel=1e-12)
    assert raman_kernel(0.0, m) == pytest.approx(25.0 / 4)


def test_kernel_spectrum_by_quadrature():
    # direct quadrature of int K(t) exp(i delta t) dt against the closed form
    m = SrsMedium(1.0, 6.0)
    for d in (-20.0, -3.0, 0.0, 0.5, 7.0, 20.0):
        re = quad(lambda t: raman_kernel(t, m) * math.cos(d * t), 0, 200, limit=2000, epsabs=1e-13)[0]
        im = quad(lambda t: raman_kernel(t, m) * math.sin(d * t), 0, 200, limit=2000, epsabs=1e-13)[0]
        assert 1 + re + 1j * im == pytest.approx(kernel_transfer(d, m), rel=1e-6)


def test_dft_of_impulse_plus_kernel():
    m = SrsMedium(1.0, 6.0)
    h = 0.0002
    t = np.arange(0, 60, h)
    k = raman_kernel(t, m)
    w = np.full(t.size, h)
    w[0] = w[-1] = h / 2
    for d in np.linspace(-20, 20, 9):
        dft = 1 + np.sum(w * k * np.exp(1j * d * t))
        assert dft == pytest.approx(kernel_transfer(d, m), rel=1e-6)


@pytest.mark.parametrize("d", [0.0, 2.0, -5.0])
def test_first_order_gain(d):
    m = SrsMedium(1.0, 0.01)                      # alpha z = 0.01 Gamma
    first = 1 + (0.01 / 4) / (1.0 - 1j * d)
    assert kernel_transfer(d, m) == pytest.approx(first, rel=1e-2)
    # and the time-domain response reproduces it for a long monochromatic-ish probe
    p = ProbePulse("gaussian", 400.0, d, 600.0)
    g = Grid1D.from_step(0, 1200, 0.02)
    out = srs_response_field(g, p, m)
    i = 30000
    assert out[i] / p.envelope(g.values[i]) == pytest.approx(first, rel=1e-2)


# ---------------------------------------------------------------- response

def test_zero_gain_identity():
    p = fig6_probe(10, 0.5, 30)
    g = Grid1D.from_step(0, 60, 0.01)
    for m, z in ((SrsMedium(1.0, 0.0), 1.0), (SrsMedium(1.0, 25.0), 0.0)):
        out = srs_response_flux(z, g.values, p, m)
        assert np.array_equal(out, srs_free_space_flux(g.values, p))


def test_response_against_direct_quadrature():
    m = SrsMedium(1.0, 25.0)
    p = fig6_probe(10, 0.5, 30)
    t = 28.0
    f = lambda u: raman_kernel(u, m) * p.envelope(t - u)  # noqa: E731
    re = quad(lambda u: f(u).real, 0, t, limit=4000, epsabs=1e-12)[0]
    im = quad(lambda u: f(u).imag, 0, t, limit=4000, epsabs=1e-12)[0]
    ref = p.peak_flux * abs(p.envelope(t) + re + 1j * im) ** 2
    assert srs_response_flux(1.0, t, p, m) == pytest.approx(ref, rel=1e-5)


def test_searchlight_rejected():
    with pytest.raises(ValueError, match="searchlight"):
        SrsMedium(1.0, 25.0, pump_geometry="searchlight")


def test_alpha_identity():
    m = SrsMedium.from_alpha(2.0, 3.0, 4.0)
    assert m.alpha_srs == pytest.approx(3.0) and m.gL == pytest.approx(6.0)


# ---------------------------------------------------------------- spontaneous

def test_spontaneous_no_gain_closed_form():
    m = SrsMedium(1.5, 0.0, 2.0)
    noise = NoiseSources(0.7, 0.3)
    t = np.array([0.0, 0.2, 1.0, 5.0])
    ref = 0.7 * 2.0 * np.exp(-3.0 * t) + 0.3 * 2.0 * (1 - np.exp(-3.0 * t)) / 3.0
    assert srs_spontaneous_flux(2.0, t, m, noise) == pytest.approx(ref, rel=1e-13)


def test_spontaneous_default_normalization():
    assert srs_spontaneous_flux(1.0, 50.0, SrsMedium(1.0, 0.0)) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("gL", [0.5, 2.0, 5.0, 10.0, 25.0])
def test_spontaneous_settles_to_dense_quadrature(gL):
    m = SrsMedium(1.0, gL)
    noise = NoiseSources(0.0, 1.0)
    late = srs_spontaneous_flux(1.0, np.array([400.0, 800.0]), m, noise)
    assert late[1] == pytest.approx(late[0], rel=1e-10)
    # the double integral over z' and t' taken directly, without the closed-form inner integral
    f = lambda zp, tp: math.exp(2 * math.sqrt(gL * zp * tp) - 2 * tp) * (iv(0, math.sqrt(gL * zp * tp)) * math.exp(-math.sqrt(gL * zp * tp))) ** 2  # noqa: E731
    ref = dblquad(f, 0, 800.0, 0, 1.0, epsabs=1e-12, epsrel=1e-10)[0]
    assert late[1] == pytest.approx(ref, rel=1e-6)


def test_spontaneous_saddle_point_slope():
    gL = 400.0
    m = SrsMedium(1.0, gL)
    t = np.linspace(18, 22, 41)
    n = srs_spontaneous_flux(1.0, t, m)
    slope = np.gradient(np.log(n), t)[20]
    saddle = math.sqrt(gL / 20.0) - 2.0
    assert slope == pytest.approx(saddle, rel=0.05)


# ---------------------------------------------------------------- gain spectrum

def test_gain_spectrum_limits():
    m = SrsMedium(1.0, 25.0)
    assert gain_spectrum(0.0, m)[0] == pytest.approx(math.exp(25.0))
    assert gain_spectrum(1e9, m)[0] == pytest.approx(1.0)


def test_gain_spectrum_gaussian_approximation():
    m = SrsMedium(1.0, 25.0)
    x = 0.1
    exact, approx = gain_spectrum(x, m)
    # ln(exact/approx) = gL x^4 / (1 + x^2)
    assert abs(math.log(exact / approx)) <= x**4 * 25.0 * 1.01
    assert abs(exact / approx - 1) <= 1.01 * (math.exp(x**4 * 25.0) - 1)


# ---------------------------------------------------------------- series

def test_zero_probe_total_is_spontaneous():
    p = ProbePulse("gaussian", 11.0, 10.0, 30.0, photon_number=0.0)
    s = srs_series(1.0, Grid1D.from_step(0, 10, 0.01), p, SrsMedium(1.0, 25.0))
    assert np.array_equal(s.total, s.spontaneous)


@pytest.mark.parametrize("case", [(10, 0.5, 25, 30), (15, 0.25, 12, 60)])
@pytest.mark.parametrize("gamma", [1.0, 2.0])
def test_fig6_advancement(case, gamma):
    d, w, gL, tp = case
    p = fig6_probe(d, w, tp, gamma)
    g = Grid1D.from_step(0, 2 * tp / gamma, 0.01 / gamma)
    s = srs_series(1.0, g, p, SrsMedium(gamma, gL))
    adv = peak_time(g.values, srs_free_space_flux(g.values, p)) - peak_time(g.values, s.response)
    assert adv > 0
