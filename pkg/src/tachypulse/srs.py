"""Transient stimulated Raman scattering in a relaxing medium.

A Stokes probe ``E_in(t)`` crossing a pumped Raman medium of length ``z``
leaves as

    E_out(t) = E_in(t) + int_0^t K(z, t') E_in(t - t') dt',
    K(z, t) = (1/2) sqrt(alpha z / t) exp(-Gamma t) I_1(sqrt(alpha z t)),

with ``alpha = g Gamma`` the gain-rate product and the pump switched on at
``t = 0``.  The kernel's Laplace transform is
``exp(alpha z / (4 (p + Gamma))) - 1``.  Amplified noise comes from the
initial inversion (weight ``C_Q``) and the Langevin source (weight ``C_F``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import ive

from .numerics import Grid1D
from .opc_time import FluxSeries, ProbePulse

__all__ = [
    "SrsMedium",
    "NoiseSources",
    "raman_kernel",
    "kernel_transfer",
    "gain_spectrum",
    "srs_response_field",
    "srs_response_flux",
    "srs_spontaneous_flux",
    "srs_free_space_flux",
    "srs_series",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class SrsMedium:
    """Raman medium with relaxation rate ``Gamma`` and integrated gain ``gL``.

    ``alpha_srs = g Gamma`` follows from ``gL`` and ``length_z``.  Only the
    uniformly pumped geometry is modelled.
    """

    Gamma: float = 1.0
    gL: float = 25.0
    length_z: float = 1.0
    pump_geometry: str = "uniform"

    def __post_init__(self):
        if self.pump_geometry != "uniform":
            raise ValueError(
                f"pump geometry {self.pump_geometry!r} is not supported: a swept "
                "(searchlight) pump has no propagation model here; use 'uniform'"
            )
        if not (math.isfinite(self.Gamma) and self.Gamma > 0):
            raise ValueError("Gamma must be > 0")
        if not (math.isfinite(self.gL) and self.gL >= 0):
            raise ValueError("gL must be >= 0")
        if not (math.isfinite(self.length_z) and self.length_z > 0):
            raise ValueError("length_z must be > 0")

    @property
    def alpha_srs(self) -> float:
        return self.gL * self.Gamma / self.length_z

    @classmethod
    def from_alpha(cls, Gamma: float, alpha_srs: float, length_z: float = 1.0) -> "SrsMedium":
        if alpha_srs < 0:
            raise ValueError("alpha_srs must be >= 0")
        return cls(Gamma, alpha_srs * length_z / Gamma, length_z)

    def alpha_z(self, z: float | None = None) -> float:
        z = self.length_z if z is None else z
        if z < 0:
            raise ValueError("z must be >= 0")
        return self.alpha_srs * z


@dataclass(frozen=True)
class NoiseSources:
    """Delta-correlation weights of the inversion and Langevin noise.

    The default (``None``) picks ``2 Gamma / z`` for both, which makes the
    zero-gain spontaneous flux tend to 1 (in units of Gamma) at late times.
    """

    Q_corr_amplitude: float | None = None
    F_corr_amplitude: float | None = None

    def __post_init__(self):
        for v in (self.Q_corr_amplitude, self.F_corr_amplitude):
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise ValueError("noise correlation amplitudes must be >= 0")

    def resolve(self, medium: SrsMedium, z: float) -> tuple:
        d = 2.0 * medium.Gamma / z
        q = d if self.Q_corr_amplitude is None else self.Q_corr_amplitude
        f = d if self.F_corr_amplitude is None else self.F_corr_amplitude
        return q, f


def raman_kernel(t, medium: SrsMedium, z: float | None = None):
    """``K(z, t)`` for ``t >= 0``; finite at ``t = 0`` where it equals ``alpha z / 4``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    az = medium.alpha_z(z)
    x = np.sqrt(az * t)
    small = x < 1e-4
    with np.errstate(invalid="ignore", divide="ignore"):
        # I_1(x)/x e^{-Gamma t}, scaled to keep e^{x - Gamma t} in range
        ratio = np.where(small, 0.5 + x * x / 16, ive(1, x) / np.where(small, 1.0, x))
        val = 0.5 * az * np.exp(np.where(small, 0.0, x) - medium.Gamma * t) * ratio
    return val


def kernel_transfer(delta, medium: SrsMedium, z: float | None = None):
    """Exact spectral response ``1 + K~(-i delta) = exp(alpha z / (4 (Gamma - i delta)))``

    for a probe component ``exp(-i delta t)``.
    """
    d = np.asarray(delta, dtype=float)
    return np.exp(medium.alpha_z(z) / (4.0 * (medium.Gamma - 1j * d)))


def gain_spectrum(delta, medium: SrsMedium):
    """Lorentzian-exponent gain ``exp[gL / (1 + (delta/Gamma)^2)]``.

    Returns
    -------
    (exact, gaussian) : float or ndarray
        The gain and its near-resonance approximation
        ``exp[gL (1 - (delta/Gamma)^2)]``.
    """
    y = np.asarray(delta, dtype=float) / medium.Gamma
    exact = np.exp(medium.gL / (1.0 + y * y))
    approx = np.exp(medium.gL * (1.0 - y * y))
    if exact.ndim == 0:
        return float(exact), float(approx)
    return exact, approx


def _fine_grid(t_grid, detuning, width):
    t = t_grid.values if isinstance(t_grid, Grid1D) else np.asarray(t_grid, dtype=float)
    if len(t) < 2:
        raise ValueError("need at least two time samples")
    h = t[1] - t[0]
    if not np.allclose(np.diff(t), h, rtol=1e-9, atol=1e-12) or t[0] < 0:
        raise ValueError("time grid must be uniform and start at t >= 0")
    # phase advance per internal step <= 0.05 rad; envelope well resolved
    hmax = min(0.05 / max(abs(detuning), 1e-300), width / 100.0)
    m = max(1, int(math.ceil(h / hmax)))
    return t, m


def _trapezoid_conv(t, m, probe, medium, z):
    """Trapezoidal causal convolution on a grid with m substeps per output step."""
    h = (t[1] - t[0]) / m
    off = int(round(t[0] / h))
    n = (len(t) - 1) * m + 1 + off
    tf = h * np.arange(n)
    e_in = np.where(tf >= max(probe.start, 0.0), probe.envelope(tf), 0.0)
    k = raman_kernel(tf, medium, z)
    conv = fftconvolve(k, e_in)[:n]
    conv = h * (conv - 0.5 * (k[0] * e_in + k * e_in[0]))
    return conv[off + m * np.arange(len(t))]


def srs_response_field(t_grid, probe: ProbePulse, medium: SrsMedium, z: float | None = None):
    """Output probe amplitude (unit-peak input) on a uniform time grid.

    The causal convolution is evaluated by FFT with the trapezoidal rule on
    two internal grids (substeps m and 2m) and Richardson-combined, which
    removes the leading endpoint error of the oscillatory integrand.
    """
    t, m = _fine_grid(t_grid, probe.detuning, probe.width_fwhm)
    e_out = np.where(t >= max(probe.start, 0.0), probe.envelope(t), 0.0)
    if medium.alpha_z(z) == 0:
        return e_out
    coarse = _trapezoid_conv(t, m, probe, medium, z)
    fine = _trapezoid_conv(t, 2 * m, probe, medium, z)
    return e_out + (4 * fine - coarse) / 3


def srs_response_flux(z: float, t, probe: ProbePulse, medium: SrsMedium):
    """Output Stokes flux ``<n_p> |E_out(t)|^2`` (per unit time, 1/Gamma units if t is Gamma t).

    ``t`` may be a scalar (then evaluated on a grid from 0) or a uniform
    grid starting at 0.
    """
    if z < 0:
        raise ValueError("z must be >= 0")
    scalar = np.ndim(t) == 0
    if scalar:
        if t < 0:
            raise ValueError("t must be >= 0")
        grid = Grid1D(0.0, max(float(t), 1e-12), 2)
        val = srs_response_field(grid, probe, medium, z)[-1]
        return float(probe.peak_flux * abs(val) ** 2)
    return probe.peak_flux * np.abs(srs_response_field(t, probe, medium, z)) ** 2


def _f_integrand(tp, az, gamma, z):
    # exp(-2 Gamma t) z [I_0^2 - I_1^2](sqrt(alpha z t)) with scaled Bessels
    x = np.sqrt(az * tp)
    return z * np.exp(2 * x - 2 * gamma * tp) * (ive(0, x) ** 2 - ive(1, x) ** 2)


def srs_spontaneous_flux(z: float, t, medium: SrsMedium, noise: NoiseSources | None = None):
    """Normally ordered spontaneous Stokes flux at position ``z``.

    ``C_Q e^{-2 Gamma t} Z(t) + C_F int_0^t e^{-2 Gamma t'} Z(t') dt'`` with
    ``Z(t) = int_0^z I_0^2(sqrt(alpha z' t)) dz' = z [I_0^2 - I_1^2](sqrt(alpha z t))``.
    The time integral is accumulated by Gauss-Legendre on sub-intervals
    short compared with the local growth scale.
    """
    if z <= 0:
        raise ValueError("z must be > 0")
    noise = noise or NoiseSources()
    cq, cf = noise.resolve(medium, z)
    g = medium.Gamma
    az = medium.alpha_srs * z
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(tt < 0):
        raise ValueError("t must be >= 0")
    order = np.argsort(tt)
    ts = tt[order]
    edges = np.concatenate([[0.0], ts])
    scale = 0.25 / (2 * g + math.sqrt(az * g) + 1e-300)
    acc, cum = 0.0, np.empty(len(ts))
    for i in range(len(ts)):
        a, b = edges[i], edges[i + 1]
        if b > a:
            # finer pieces near t = 0 where sqrt(t) varies quickly
            m = max(1, int(math.ceil((b - a) / scale)))
            pieces = np.linspace(a, b, m + 1)
            lo, hi = pieces[:-1], pieces[1:]
            hh = 0.5 * (hi - lo)
            u = lo[:, None] + hh[:, None] * (1 + _GL_NODES)
            acc += float(np.sum(hh * np.sum(_GL_WEIGHTS * _f_integrand(u, az, g, z), axis=1)))
        cum[i] = acc
    q = _f_integrand(ts, az, g, z)
    out = np.empty_like(tt)
    out[order] = cq * q + cf * cum
    return float(out[0]) if np.ndim(t) == 0 else out


def srs_free_space_flux(t, probe: ProbePulse):
    """Probe flux without the medium."""
    return probe.peak_flux * np.abs(probe.envelope(np.asarray(t, dtype=float))) ** 2


def srs_series(z: float, t_grid: Grid1D, probe: ProbePulse, medium: SrsMedium, noise: NoiseSources | None = None) -> FluxSeries:
    """Spontaneous, response and total Stokes flux on ``t_grid``.

    Times are in units of ``1/Gamma`` and fluxes in units of ``Gamma``
    when ``Gamma = 1``; otherwise the inputs' own units carry through.
    """
    if t_grid.start < 0:
        raise ValueError("t_grid must start at t >= 0")
    sp = srs_spontaneous_flux(z, t_grid.values, medium, noise)
    if probe.photon_number == 0:
        resp = np.zeros(t_grid.n_points)
    else:
        resp = srs_response_flux(z, t_grid.values, probe, medium)
    params = {"Gamma": medium.Gamma, "gL": medium.gL, "length_z": medium.length_z, "z": z,
              **{f"probe.{k}": v for k, v in probe.to_dict().items()}}
    return FluxSeries(t_grid, np.maximum(sp, 0.0), np.maximum(resp, 0.0), params)
