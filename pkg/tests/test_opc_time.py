import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import iv

from oracles import moc_impulse, richardson
from tachypulse.numerics import Grid1D
from tachypulse.opc_time import (
    FluxSeries,
    GridResolutionError,
    MultimodalSignalError,
    ProbePulse,
    PumpedMedium,
    conjugate_flux_series,
    flux_response,
    flux_spontaneous,
    free_space_flux,
    green_p,
    green_table,
    leading_peak_time,
    peak_advancement,
    peak_time,
    response_amplitude,
)

FIG3 = dict(shape="gaussian", width_fwhm=24.0, detuning=0.28, peak_time=50.0, photon_number=1e10)


def kernel_sum_oracle(zeta, tau, kappa, extra=5, dps=None):
    """Round-trip sum written out term by term, carrying ``extra`` surplus
    round trips.  With ``dps`` the sum is taken in mpmath at that precision."""
    jmax = math.ceil(tau / 2) + extra
    if dps:
        mpmath.mp.dps = dps
        tau_, kap = mpmath.mpf(tau), mpmath.mpf(kappa)
        tot = mpmath.mpf(0)
        for j in range(jmax + 1):
            for sgn, b in ((1, 2 * j + mpmath.mpf(zeta)), (-1, 2 * j + 2 - mpmath.mpf(zeta))):
                if tau_ > b:
                    r = (tau_ - b) / (tau_ + b)
                    x = kap * mpmath.sqrt((tau_ - b) * (tau_ + b))
                    tot += sgn * (r**j * mpmath.besseli(2 * j, x) - r ** (j + 1) * mpmath.besseli(2 * j + 2, x)) / 2
                elif tau_ == b:
                    tot += sgn * (1 if j == 0 else 0) / mpmath.mpf(2)
        return float(tot)
    tot = 0.0
    for j in range(jmax + 1):
        for sgn, b in ((1, 2 * j + zeta), (-1, 2 * j + 2 - zeta)):
            if tau == b:
                tot += sgn * 0.5 * (j == 0)
            elif tau > b:
                r = (tau - b) / (tau + b)
                x = kappa * math.sqrt((tau - b) * (tau + b))
                tot += sgn * 0.5 * (r**j * iv(2 * j, x) - r ** (j + 1) * iv(2 * j + 2, x))
    return tot


# ---------------------------------------------------------------- kernel

def test_kernel_zero_before_first_arrival():
    assert green_p(0.5, 0.3, 1.7) == 0.0


@settings(max_examples=200, deadline=None)
@given(zeta=st.floats(0, 1), frac=st.floats(0, 0.999999), kappa=st.floats(0, 3))
def test_kernel_causality(zeta, frac, kappa):
    tau = frac * min(zeta, 2 - zeta)
    if not tau < min(zeta, 2 - zeta):
        return
    assert green_p(zeta, tau, kappa) == 0.0


@pytest.mark.parametrize("zeta,tau", [(0.3, 0.2), (0.3, 0.5), (0.3, 1.8), (0.3, 2.5), (0.0, 0.7), (1.0, 3.0)])
def test_kernel_no_pump_limit(zeta, tau):
    expect = 0.5 * ((tau >= zeta) - (tau >= 2 - zeta))
    assert green_p(zeta, tau, 0.0) == expect


@settings(max_examples=100, deadline=None)
@given(zeta=st.floats(0, 1), tau=st.floats(0, 5.8), kappa=st.floats(0.01, 1.7))
def test_kernel_truncation_exact(zeta, tau, kappa):
    # surplus round trips beyond ceil(tau/2) contribute nothing
    assert kernel_sum_oracle(zeta, tau, kappa, extra=0) == kernel_sum_oracle(zeta, tau, kappa, extra=6)
    assert green_p(zeta, tau, kappa) == pytest.approx(kernel_sum_oracle(zeta, tau, kappa), rel=1e-11, abs=1e-13)


def test_kernel_matches_characteristics_oracle():
    # direct integration of the coupled-wave equations for an impulsive probe
    ref = richardson(lambda M: moc_impulse(1.7, [3.0], M), 400)[0]
    assert green_p(0.0, 3.0, 1.7) == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("tau", [0.5, 1.5, 4.5, 9.0])
def test_kernel_matches_characteristics_oracle_more_times(tau):
    ref = richardson(lambda M: moc_impulse(1.2, [tau], M), 200)[0]
    assert green_p(0.0, tau, 1.2) == pytest.approx(ref, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("zeta,tau,kappa", [(0.0, 30.0, 1.7), (0.4, 41.3, 1.7), (0.0, 100.0, 1.7), (0.9, 60.0, 2.5)])
def test_kernel_large_time_high_precision(zeta, tau, kappa):
    # the alternating round-trip sum cancels by many orders here
    ref = kernel_sum_oracle(zeta, tau, kappa, extra=0, dps=40 + int(0.5 * kappa * tau))
    assert green_p(zeta, tau, kappa) == pytest.approx(ref, rel=1e-12)


def test_kernel_float_exact_handover():
    k = 1.7
    t0 = 10.0 / k
    a, b = green_p(0.0, t0 * (1 - 1e-12), k), green_p(0.0, t0 * (1 + 1e-12), k)
    assert a == pytest.approx(b, rel=1e-9)


def test_kernel_domain_errors():
    with pytest.raises(ValueError):
        green_p(1.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        green_p(0.5, -1.0, 1.0)


def test_table_matches_direct_kernel():
    tab = green_table(1.7, 100.0)
    for t in [0.1, 1.99, 2.0, 2.01, 13.7, 42.0, 77.7, 99.9]:
        assert tab(t) == pytest.approx(green_p(0.0, t, 1.7), rel=1e-10)
    assert tab(2.0, side="left") == pytest.approx(green_p(0.0, 2.0, 1.7, limit="left"), rel=1e-12)


# ---------------------------------------------------------------- probe

def test_probe_envelope_normalized():
    p = ProbePulse(**FIG3)
    t = np.linspace(0, 100, 2001)
    assert np.max(np.abs(p.envelope(t))) == pytest.approx(1.0)
    # amplitude FWHM
    half = np.abs(p.envelope(np.array([50 - 12.0, 50 + 12.0])))
    assert half == pytest.approx([0.5, 0.5], rel=1e-12)


def test_probe_validation():
    with pytest.raises(ValueError):
        ProbePulse("chopped_gaussian", 24, 0.0, 20)
    with pytest.raises(ValueError):
        ProbePulse("square", 24, 0.0, 20)


def test_probe_laplace_matches_quadrature():
    from scipy.integrate import quad

    p = ProbePulse("gaussian", 10.0, 0.3, 15.0)
    s = 0.2 + 0.4j
    re = quad(lambda t: (p.envelope(t) * np.exp(-s * t)).real, 0, 80, limit=200)[0]
    im = quad(lambda t: (p.envelope(t) * np.exp(-s * t)).imag, 0, 80, limit=200)[0]
    assert p.laplace(np.array([s]))[0] == pytest.approx(re + 1j * im, rel=1e-9)


# ---------------------------------------------------------------- fluxes

def test_spontaneous_trivial():
    assert flux_spontaneous(0.0, PumpedMedium(1.7)) == 0.0
    assert np.all(flux_spontaneous(np.array([1.0, 5.0, 20.0]), PumpedMedium(0.0)) == 0.0)


def test_spontaneous_growth_rate_matches_dominant_pole():
    from tachypulse.opc_freq import find_instability_poles

    m = PumpedMedium(1.7)
    t = np.linspace(60, 80, 21)
    slope = np.polyfit(t, np.log(flux_spontaneous(t, m)), 1)[0]
    s_star = find_instability_poles(m).dominant_growth_rate
    assert slope == pytest.approx(2 * s_star, rel=0.05)


def test_response_zero_probe():
    p = ProbePulse(**{**FIG3, "photon_number": 0.0})
    assert np.all(flux_response(np.linspace(0, 60, 61), PumpedMedium(1.7), p) == 0.0)


def test_response_chopped_exact_zero():
    p = ProbePulse("chopped_gaussian", 24, 0.28, 20.0, onset_time=10.0, photon_number=1e10)
    t = np.arange(0, 10, 0.05)
    assert np.all(flux_response(t, PumpedMedium(1.7), p) == 0.0)
    assert flux_response(10.5, PumpedMedium(1.7), p) > 0


def test_response_detuning_sign_symmetry():
    m = PumpedMedium(1.7)
    t = np.linspace(5, 70, 27)
    a = flux_response(t, m, ProbePulse(**FIG3))
    b = flux_response(t, m, ProbePulse(**{**FIG3, "detuning": -0.28}))
    assert b == pytest.approx(a, rel=1e-12)


def test_response_linear_in_photon_number():
    m = PumpedMedium(1.0)
    t = np.linspace(5, 90, 18)
    a = flux_response(t, m, ProbePulse(**FIG3))
    b = flux_response(t, m, ProbePulse(**{**FIG3, "photon_number": 2e10}))
    assert np.all(np.abs(b / a - 2) < 1e-14)


def test_spontaneous_independent_of_probe():
    g = Grid1D.from_step(0, 20, 0.05)
    m = PumpedMedium(1.2)
    a = conjugate_flux_series(g, m, ProbePulse(**FIG3))
    b = conjugate_flux_series(g, m, ProbePulse(**{**FIG3, "photon_number": 5.0, "detuning": 0.1}))
    assert np.array_equal(a.spontaneous, b.spontaneous)


def test_grid_resolution_error():
    with pytest.raises(GridResolutionError):
        conjugate_flux_series(Grid1D.from_step(0, 10, 0.5), PumpedMedium(1.0), ProbePulse(**FIG3))


def test_no_pump_series_is_zero():
    s = conjugate_flux_series(Grid1D.from_step(0, 30, 0.05), PumpedMedium(0.0), ProbePulse(**FIG3))
    assert np.all(s.total == 0.0)


def test_flux_series_invariants():
    g = Grid1D(0.0, 1.0, 3)
    with pytest.raises(ValueError):
        FluxSeries(g, np.array([0.0, -1.0, 0.0]), np.zeros(3))
    s = FluxSeries(g, np.array([0.0, 1.0, 2.0]), np.array([0.5, 0.5, 0.0]))
    assert np.array_equal(s.total, s.spontaneous + s.response)


@pytest.fixture(scope="module")
def fig3_series():
    return conjugate_flux_series(Grid1D.from_step(0, 100, 0.05), PumpedMedium(1.7), ProbePulse(**FIG3))


def test_fig3_response_peak(fig3_series):
    tp = leading_peak_time(fig3_series.tau, fig3_series.response)
    assert 39.0 <= tp <= 45.0


def test_fig3_advancement(fig3_series):
    free = (fig3_series.tau, free_space_flux(fig3_series.tau, ProbePulse(**FIG3)))
    adv = peak_advancement(free, fig3_series, window=(0, 50))
    assert adv > 1.0
    assert adv == pytest.approx(8.0, abs=3.0)


def test_fig3_growth_after_50(fig3_series):
    tot = fig3_series.total
    tau = fig3_series.tau
    late = (tau >= 55)
    assert np.all(np.diff(tot[late]) > 0)
    assert tot[tau == 100.0][0] > 1e3 * tot[np.argmin(np.abs(tau - 50))]


# ---------------------------------------------------------------- peaks

def test_peak_advancement_conventions():
    x = np.linspace(0, 100, 2001)
    y = np.exp(-((x - 50) / 7) ** 2)
    ys = np.exp(-((x - 55) / 7) ** 2)
    assert peak_advancement((x, y), (x, y)) == 0.0
    assert peak_advancement((x, y), (x, ys)) == pytest.approx(-5.0, abs=1e-6)


def test_peak_time_parabolic_subgrid():
    x = np.linspace(0, 10, 11)
    y = -(x - 4.3) ** 2
    assert peak_time(x, y) == pytest.approx(4.3, abs=1e-12)


def test_leading_peak_ignores_growth_and_rejects_pure_growth():
    x = np.linspace(0, 100, 2001)
    y = np.exp(-((x - 40) / 8) ** 2) + 1e-12 * np.exp(0.3 * x)
    assert leading_peak_time(x, y) == pytest.approx(40, abs=0.05)
    assert math.isnan(leading_peak_time(x, np.exp(0.3 * x)))


def test_multimodal_rejected():
    x = np.linspace(0, 100, 1001)
    y = np.exp(-((x - 30) / 5) ** 2) + 0.95 * np.exp(-((x - 70) / 5) ** 2)
    with pytest.raises(MultimodalSignalError):
        peak_time(x, y)
    assert peak_time(x, y, window=(0, 50)) == pytest.approx(30.0, abs=1e-3)


def test_response_amplitude_vs_direct_quadrature():
    from scipy.integrate import quad

    m, p = PumpedMedium(0.9), ProbePulse("gaussian", 6.0, 0.2, 8.0)
    t = 9.3
    f = lambda u: green_p(0.0, u, 0.9) * p.envelope(t - u)  # noqa: E731
    pts = [0, 2, 4, 6, 8]
    re = quad(lambda u: f(u).real, 0, t, points=pts, limit=200, epsabs=1e-13)[0]
    im = quad(lambda u: f(u).imag, 0, t, points=pts, limit=200, epsabs=1e-13)[0]
    assert response_amplitude([t], m, p)[0] == pytest.approx(re + 1j * im, rel=1e-9)
