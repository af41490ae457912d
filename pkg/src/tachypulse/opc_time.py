"""Time-domain solver for a pumped phase-conjugating slab.

Lengths are in units of the slab length L and times in units of L/c, so the
slab occupies 0 <= zeta <= 1 and the pump is switched on at tau = 0.  The
probe enters at zeta = 0 and the conjugate leaves through the same face.

The kernel ``green_p(zeta, tau)`` is the conjugate amplitude at zeta = 0 and
time tau produced by a unit probe impulse sitting at zeta when the pump turns
on.  It is a finite sum of Bessel-ratio terms, one pair per internal round
trip.  Those terms grow like exp(kappa*tau) while the sum grows only at the
instability rate, so for kappa*tau beyond ~10 the sum is evaluated in
integer fixed-point arithmetic with enough guard bits to absorb the
cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import erfc, erfcx

from .numerics import Grid1D, bessel_ie

__all__ = [
    "PumpedMedium",
    "ProbePulse",
    "FluxSeries",
    "GridResolutionError",
    "MultimodalSignalError",
    "green_p",
    "GreenTable",
    "green_table",
    "flux_spontaneous",
    "flux_response",
    "response_amplitude",
    "conjugate_flux_series",
    "free_space_flux",
    "peak_time",
    "peak_advancement",
    "crossover_time",
]

# kappa*tau below this is summed in double precision
FLOAT_ARG_LIMIT = 10.0

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


class GridResolutionError(ValueError):
    """The time grid undersamples the probe carrier phase."""


class MultimodalSignalError(ValueError):
    """More than one comparable maximum inside the analysis window."""


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PumpedMedium:
    """Uniformly pumped slab.

    Parameters
    ----------
    kappa : float
        Coupling strength |g| L.
    alpha_det : float
        Detection factor setting the absolute photon-rate scale.
    """

    kappa: float
    alpha_det: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if not (math.isfinite(self.alpha_det) and self.alpha_det > 0):
            raise ValueError(f"alpha_det must be > 0, got {self.alpha_det}")

    @property
    def pump_on_time(self) -> float:
        return 0.0


_SHAPES = ("gaussian", "chopped_gaussian", "custom_samples")


@dataclass(frozen=True)
class ProbePulse:
    """Probe envelope ``f(t) = exp(-a (t - t_p)^2 - i delta t)``, unit peak.

    ``width_fwhm`` is the full width at half maximum of ``|f|``.  The chopped
    variant is zero before ``onset_time``.  ``custom_samples`` takes
    ``(times, values)`` and interpolates the complex envelope with cubic
    splines (zero outside the sampled span); ``detuning`` is then applied on
    top of the samples.
    """

    shape: str = "gaussian"
    width_fwhm: float = 24.0
    detuning: float = 0.0
    peak_time: float = 50.0
    onset_time: float | None = None
    photon_number: float = 1.0
    samples: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown probe shape {self.shape!r}; expected one of {_SHAPES}")
        if not self.photon_number >= 0:
            raise ValueError("photon_number must be >= 0")
        if not math.isfinite(self.detuning):
            raise ValueError("detuning must be finite")
        if self.shape == "custom_samples":
            if self.samples is None:
                raise ValueError("custom_samples probe needs samples=(times, values)")
            t, v = (np.asarray(a) for a in self.samples)
            if t.ndim != 1 or t.shape != v.shape or len(t) < 4 or np.any(np.diff(t) <= 0):
                raise ValueError("samples must be two equal-length 1-D arrays with increasing times")
            peak = np.max(np.abs(v))
            if not peak > 0:
                raise ValueError("custom samples are identically zero")
            object.__setattr__(self, "samples", (t.astype(float), v.astype(complex) / peak))
        else:
            if not (math.isfinite(self.width_fwhm) and self.width_fwhm > 0):
                raise ValueError(f"width_fwhm must be > 0, got {self.width_fwhm}")
            if not math.isfinite(self.peak_time):
                raise ValueError("peak_time must be finite")
        if self.shape == "chopped_gaussian":
            if self.onset_time is None or not math.isfinite(self.onset_time):
                raise ValueError("chopped_gaussian needs a finite onset_time")
            if self.onset_time > self.peak_time:
                raise ValueError("onset_time after peak_time would break |f| <= |f(t_p)| = 1")

    # -- envelope ---------------------------------------------------------
    @property
    def rate(self) -> float:
        """Gaussian exponent ``a`` with ``|f| = exp(-a (t-t_p)^2)``."""
        return 4.0 * math.log(2.0) / self.width_fwhm**2

    @property
    def start(self) -> float:
        """Left edge of the support (-inf for an unchopped Gaussian)."""
        if self.shape == "chopped_gaussian":
            return float(self.onset_time)
        if self.shape == "custom_samples":
            return float(self.samples[0][0])
        return -math.inf

    @property
    def breakpoints(self) -> tuple:
        if self.shape == "chopped_gaussian":
            return (float(self.onset_time),)
        if self.shape == "custom_samples":
            return (float(self.samples[0][0]), float(self.samples[0][-1]))
        return ()

    @lru_cache(maxsize=1)
    def _spline(self):
        t, v = self.samples
        return CubicSpline(t, v.real), CubicSpline(t, v.imag)

    def envelope(self, t, conjugate: bool = False):
        """Complex envelope including the detuning phase ``exp(-i delta t)``."""
        t = np.asarray(t, dtype=float)
        sgn = 1.0 if conjugate else -1.0
        phase = np.exp(sgn * 1j * self.detuning * t)
        if self.shape == "custom_samples":
            tt, _ = self.samples
            re, im = self._spline()
            inside = (t >= tt[0]) & (t <= tt[-1])
            base = np.where(inside, re(t) + 1j * im(t), 0.0)
            if conjugate:
                base = np.conj(base)
            return base * phase
        out = np.exp(-self.rate * (t - self.peak_time) ** 2) * phase
        if self.shape == "chopped_gaussian":
            out = np.where(t >= self.onset_time, out, 0.0)
        return out

    def energy(self) -> float:
        """``int |f|^2 dt`` over the whole support."""
        if self.shape == "custom_samples":
            t, v = self.samples
            fine = np.linspace(t[0], t[-1], 20 * len(t) + 1)
            return float(np.trapezoid(np.abs(self.envelope(fine)) ** 2, fine))
        a2 = 2.0 * self.rate
        full = math.sqrt(math.pi / a2)
        if self.shape == "chopped_gaussian":
            return 0.5 * full * float(erfc(math.sqrt(a2) * (self.onset_time - self.peak_time)))
        return full

    @property
    def peak_flux(self) -> float:
        """``<n_p> = <N_p> / int |f|^2``, the flux at the envelope maximum."""
        return self.photon_number / self.energy()

    def laplace(self, s, conjugate: bool = False, t0: float | None = None):
        """Laplace transform ``int_{t0}^inf f(t) exp(-s t) dt``.

        ``t0`` defaults to the pump switch-on time 0 (the probe is taken as
        zero before the medium becomes active); pass ``-inf`` for the
        two-sided transform of an unchopped Gaussian.  With
        ``conjugate=True`` the transform of ``conj(f)`` is returned.
        """
        s = np.asarray(s, dtype=complex)
        if t0 is None:
            t0 = 0.0
        t0 = max(t0, self.start)
        if self.shape == "custom_samples":
            return self._laplace_samples(s, conjugate, t0)
        a = self.rate
        d = -self.detuning if conjugate else self.detuning
        q = s + 1j * d
        tp = self.peak_time
        pref = 0.5 * math.sqrt(math.pi / a)
        if t0 == -math.inf:
            return 2 * pref * np.exp(-q * tp + q * q / (4 * a))
        z = math.sqrt(a) * (t0 - tp) + q / (2 * math.sqrt(a))
        e_tail = -a * (t0 - tp) ** 2 - q * t0
        with np.errstate(over="ignore", invalid="ignore"):
            right = pref * np.exp(e_tail) * erfcx(z)
            left = pref * (2 * np.exp(-q * tp + q * q / (4 * a)) - np.exp(e_tail) * erfcx(-z))
        return np.where(z.real >= 0, right, left)

    def _laplace_samples(self, s, conjugate, t0):
        t, _ = self.samples
        lo = max(t0, t[0])
        if lo >= t[-1]:
            return np.zeros_like(s)
        n = 64 * len(t) + 1
        tt = np.linspace(lo, t[-1], n)
        ft = self.envelope(tt, conjugate)
        w = np.full(n, tt[1] - tt[0])
        w[0] = w[-1] = 0.5 * w[0]
        flat = s.ravel()
        out = np.array([np.sum(w * ft * np.exp(-si * tt)) for si in flat])
        return out.reshape(s.shape)

    def to_dict(self) -> dict:
        d = {
            "shape": self.shape,
            "width_fwhm": self.width_fwhm,
            "detuning": self.detuning,
            "peak_time": self.peak_time,
            "photon_number": self.photon_number,
        }
        if self.onset_time is not None:
            d["onset_time"] = self.onset_time
        return d


# ---------------------------------------------------------------------------
# Green function
# ---------------------------------------------------------------------------

def _float_terms(zeta, tau, kappa, limit):
    """Double-precision sum; ``zeta`` may be an array."""
    zeta = np.asarray(zeta, dtype=float)
    out = np.zeros(zeta.shape)
    jmax = int(math.ceil(tau / 2.0))
    for j in range(jmax + 1):
        for sign, b in ((1.0, 2 * j + zeta), (-1.0, 2 * j + 2 - zeta)):
            d = tau - b
            live = d > 0 if limit == "left" else d >= 0
            if not np.any(live):
                continue
            dd = np.where(live, d, 0.0)
            ssum = tau + b
            x = kappa * np.sqrt(dd * ssum)
            logr = np.log(np.where(dd > 0, dd, 1.0) / np.where(dd > 0, ssum, 1.0))
            e0 = np.where(dd > 0, np.exp(j * logr + x) * bessel_ie(2 * j, x), 1.0 if j == 0 else 0.0)
            e1 = np.where(dd > 0, np.exp((j + 1) * logr + x) * bessel_ie(2 * j + 2, x), 0.0)
            out += np.where(live, sign * 0.5 * (e0 - e1), 0.0)
    return out


def _scaled_ints(*vals):
    # exact integer numerators over a common power-of-two denominator 2^E
    ratios = [float(v).as_integer_ratio() for v in vals]
    e = max(d.bit_length() - 1 for _, d in ratios)
    return [n << (e - (d.bit_length() - 1)) for n, d in ratios], e


def _ratio_block(kn, tn, bn, e, nu0, weights, prec):
    """Fixed-point value of sum_k w_k R^((nu0+2k)/2) I_(nu0+2k)(x).

    With u = kappa (tau-b)/2 and y = kappa^2 (tau^2-b^2)/4 each term is
    u^nu sum_m y^m / (m! (nu+m)!), a series of positive terms; all blocks of
    one evaluation share the scale 2^prec.
    """
    d = tn - bn
    ui = kn * d
    one = 1 << prec
    y = (kn * kn * d * (tn + bn) << prec) >> (4 * e + 2)
    u2 = (ui * ui << prec) >> (4 * e + 2)
    if nu0 == 0:
        pre = one
    else:
        pre = (((ui**nu0) << prec) >> ((2 * e + 1) * nu0)) // math.factorial(nu0)
    nk = len(weights)
    sums = [0] * nk
    yf = y / one
    big = max(pre, one) * max(u2, one) >> prec
    t = one
    m = 0
    while True:
        sums[0] += t
        den = 1
        for k in range(1, nk):
            den *= (nu0 + m + 2 * k - 1) * (nu0 + m + 2 * k)
            sums[k] += t // den
        m += 1
        t = ((t * y) >> prec) // (m * (nu0 + m))
        if t == 0 or (m * (nu0 + m) > yf and (t * big) >> prec == 0):
            break
    acc = 0
    u2k = one
    for k in range(nk):
        acc += weights[k] * ((sums[k] * u2k) >> prec)
        u2k = (u2k * u2) >> prec
    return (acc * pre) >> prec


def _exact_terms(zeta, tau, kappa, limit):
    (tn, zn, kn), e = _scaled_ints(tau, zeta, kappa)
    prec = 96 + int(1.4427 * kappa * tau) + int(tau).bit_length()
    unit = 1 << e
    # collect Bessel-ratio terms per retardation time b; coincident b values
    # (always the case at zeta = 0 or 1) share a single series pass
    blocks: dict[int, dict[int, int]] = {}
    jmax = int(math.ceil(tau / 2.0))
    for j in range(jmax + 1):
        for sign, bn in ((1, 2 * j * unit + zn), (-1, (2 * j + 2) * unit - zn)):
            if bn > tn or (limit == "left" and bn == tn):
                continue
            blk = blocks.setdefault(bn, {})
            blk[2 * j] = blk.get(2 * j, 0) + sign
            blk[2 * j + 2] = blk.get(2 * j + 2, 0) - sign
    total = 0
    for bn, terms in blocks.items():
        orders = sorted(o for o, w in terms.items() if w)
        if not orders:
            continue
        nu0 = orders[0]
        weights = [terms.get(nu0 + 2 * k, 0) for k in range((orders[-1] - nu0) // 2 + 1)]
        total += _ratio_block(kn, tn, bn, e, nu0, weights, prec)
    return total / (1 << (prec + 1))


def green_p(zeta, tau, kappa, limit: str = "right"):
    """Conjugate output at the entrance face for a unit probe impulse.

    Parameters
    ----------
    zeta : float or array_like
        Initial impulse position, ``0 <= zeta <= 1``.
    tau : float
        Time since pump switch-on.
    kappa : float
        Coupling strength.
    limit : {"right", "left"}
        One-sided value at the retardation times where the kernel jumps.

    Returns
    -------
    float or ndarray
        Real kernel value.  Zero for ``tau < min(zeta, 2 - zeta)``.
    """
    if limit not in ("right", "left"):
        raise ValueError("limit must be 'right' or 'left'")
    z = np.asarray(zeta, dtype=float)
    if np.any((z < 0) | (z > 1)):
        raise ValueError("zeta must lie in [0, 1]")
    if tau < 0 or kappa < 0:
        raise ValueError("tau and kappa must be >= 0")
    tau, kappa = float(tau), float(kappa)
    if kappa * tau <= FLOAT_ARG_LIMIT:
        out = _float_terms(z, tau, kappa, limit)
        return float(out) if out.ndim == 0 else out
    if z.ndim == 0:
        return _exact_terms(float(z), tau, kappa, limit)
    return np.array([_exact_terms(float(v), tau, kappa, limit) for v in z.ravel()]).reshape(z.shape)


# ---------------------------------------------------------------------------
# tabulated kernel at the entrance face
# ---------------------------------------------------------------------------

def _lobatto(n):
    return np.cos(np.pi * np.arange(n) / (n - 1))  # from +1 down to -1


class GreenTable:
    """Piecewise-Chebyshev table of ``green_p(0, tau)`` on ``[0, tau_max]``.

    The kernel at zeta = 0 is analytic on every interval [2j, 2j+2] and jumps
    only at tau = 0 and tau = 2, so each interval gets its own interpolant
    built from one-sided limits at its ends.  Instances are immutable.
    """

    def __init__(self, kappa: float, tau_max: float, nodes: int = 16, kernel=None):
        self.kappa = float(kappa)
        self.n_pieces = max(1, int(math.ceil(tau_max / 2.0)))
        self.tau_max = 2.0 * self.n_pieces
        kernel = kernel or (lambda t, lim: green_p(0.0, t, self.kappa, limit=lim))
        x = _lobatto(nodes)
        vals = np.empty((self.n_pieces, nodes))
        for j in range(self.n_pieces):
            tt = 2 * j + 1 + x
            for i, t in enumerate(tt):
                lim = "left" if i == 0 else "right"
                vals[j, i] = kernel(float(t), lim)
        self._x = x
        self._vals = vals
        w = np.ones(nodes)
        w[0] = w[-1] = 0.5
        w[1::2] *= -1
        self._w = w
        self._vals.setflags(write=False)

    def __call__(self, tau, side: str = "right"):
        tau = np.asarray(tau, dtype=float)
        if np.any(tau < 0) or np.any(tau > self.tau_max + 1e-12):
            raise ValueError("tau outside the tabulated range")
        j = np.floor(tau / 2.0).astype(int)
        if side == "left":
            j = np.where((tau == 2.0 * j) & (j > 0), j - 1, j)
        j = np.minimum(j, self.n_pieces - 1)
        x = np.clip(tau - 2.0 * j - 1.0, -1.0, 1.0)
        diff = x[..., None] - self._x
        exact = diff == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            c = self._w / diff
            num = np.sum(c * self._vals[j], axis=-1)
            den = np.sum(c, axis=-1)
            out = num / den
        hit = np.any(exact, axis=-1)
        if np.any(hit):
            out = np.where(hit, np.sum(np.where(exact, self._vals[j], 0.0), axis=-1), out)
        return out[()] if out.ndim == 0 else out

    def square_integral(self, tau):
        """``int_0^tau G(0, u)^2 du`` for an array of ``tau`` values."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        h = 1.0
        full = np.empty(self.n_pieces + 1)
        full[0] = 0.0
        for j in range(self.n_pieces):
            u = 2 * j + 1 + h * _GL_NODES
            full[j + 1] = full[j] + h * np.dot(_GL_WEIGHTS, self(u) ** 2)
        j = np.minimum(np.floor(tau / 2.0).astype(int), self.n_pieces - 1)
        rest = tau - 2.0 * j
        hr = 0.5 * rest
        u = 2.0 * j[:, None] + hr[:, None] * (1 + _GL_NODES)
        part = hr * np.sum(_GL_WEIGHTS * self(u) ** 2, axis=1)
        return full[j] + part


@lru_cache(maxsize=16)
def _cached_table(kappa: float, n_pieces: int) -> GreenTable:
    return GreenTable(kappa, 2.0 * n_pieces)


def green_table(kappa: float, tau_max: float) -> GreenTable:
    """Shared, cached :class:`GreenTable` covering at least ``tau_max``."""
    n = max(1, int(math.ceil(tau_max / 2.0)))
    return _cached_table(float(kappa), n)


# ---------------------------------------------------------------------------
# fluxes
# ---------------------------------------------------------------------------

def _zeta_square_integral(tau, kappa):
    """``int_0^1 G(zeta, tau)^2 dzeta`` split at the kernel's breakpoints."""
    if tau <= 0:
        return 0.0
    cuts = {0.0, 1.0}
    j = 0
    while 2 * j <= tau:
        for c in (tau - 2 * j, 2 * j + 2 - tau):
            if 0 < c < 1:
                cuts.add(c)
        j += 1
    cuts = sorted(cuts)
    exact = kappa * tau > FLOAT_ARG_LIMIT
    nodes, weights = (_GL10 if exact else (_GL_NODES, _GL_WEIGHTS))
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if exact and tau > 6 and hi - lo < 1e-3:
            continue
        h = 0.5 * (hi - lo)
        z = lo + h * (1 + nodes)
        g = green_p(z, tau, kappa)
        total += h * np.dot(weights, g * g)
    return float(total)


_GL10 = np.polynomial.legendre.leggauss(10)


@lru_cache(maxsize=16)
def _s1_spline(kappa: float, tau_max: float):
    """Interpolant of ``int_0^1 G^2 dzeta`` in tau.

    Cheap double-precision nodes are dense; the fixed-point region, where
    the integral is dominated by the growing modes and varies smoothly, is
    sampled every unit up to tau = 24 and every three units beyond.
    """
    t_float = FLOAT_ARG_LIMIT / kappa if kappa > 0 else math.inf
    nodes = [0.0]
    t = 0.0
    while t < tau_max:
        if t < min(t_float, 6.0):
            t += 0.125
        elif t < t_float:
            t += 0.25
        elif t < 24.0:
            t += 1.0
        else:
            t += 3.0
        nodes.append(min(t, tau_max) if t > tau_max - 1e-9 else t)
    nodes = np.array(sorted(set(nodes)))
    vals = np.array([_zeta_square_integral(float(t), kappa) for t in nodes])
    return nodes, vals


def _s1(tau, kappa, tau_max):
    tau = np.asarray(tau, dtype=float)
    nodes, vals = _s1_spline(float(kappa), float(tau_max))
    out = np.zeros(tau.shape)
    pos = tau > 0
    # interpolate log values away from tau = 0 where the integral vanishes
    first = np.searchsorted(nodes, 0.5)
    lin = pos & (tau < nodes[first])
    out[lin] = np.interp(tau[lin], nodes, vals)
    spl = CubicSpline(nodes[first - 1:], np.log(vals[first - 1:]))
    rest = tau >= nodes[first]
    out[rest] = np.exp(spl(tau[rest]))
    return out


def flux_spontaneous(tau, medium: PumpedMedium):
    """Spontaneous conjugate flux at the entrance face (units c/L).

    ``kappa^2 alpha_det [int_0^1 G(zeta,tau)^2 dzeta + int_0^tau G(0,u)^2 du]``
    """
    scalar = np.ndim(tau) == 0
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau < 0):
        raise ValueError("tau must be >= 0")
    k = medium.kappa
    if k == 0:
        out = np.zeros(tau.shape)
    else:
        tmax = float(np.max(tau)) if tau.size else 0.0
        tmax = max(2.0, 2.0 * math.ceil(tmax / 2.0))
        table = green_table(k, tmax)
        s2 = table.square_integral(tau)
        if tau.size == 1:
            s1 = np.array([_zeta_square_integral(float(tau[0]), k)])
        else:
            s1 = _s1(tau, k, tmax)
        out = k * k * medium.alpha_det * (s1 + s2)
    return float(out[0]) if scalar else out


def _check_phase_sampling(probe: ProbePulse, step: float):
    if abs(probe.detuning) * step > 0.1:
        raise GridResolutionError(
            f"detuning {probe.detuning} with step {step} gives "
            f"{abs(probe.detuning) * step:.3g} rad per step (> 0.1)"
        )


def response_amplitude(tau, medium: PumpedMedium, probe: ProbePulse, table: GreenTable | None = None):
    """``int_0^tau G(0, tau - t) f(t) dt`` (complex), pump on at t = 0.

    Integrated by 16-point Gauss-Legendre on every interval between kernel
    and probe breakpoints, with the kernel read from a :class:`GreenTable`.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.zeros(tau.shape, dtype=complex)
    if medium.kappa == 0 and table is None:
        table = None
    tmax = float(np.max(tau)) if tau.size else 0.0
    if table is None:
        table = green_table(medium.kappa, max(tmax, 2.0))
    lead = max(0.0, probe.start)
    fbreaks = [b for b in probe.breakpoints if b > 0]
    for i, t in enumerate(tau):
        if t <= lead:
            continue
        # u = t - t' runs over [0, t - lead]; kernel pieces break at even u
        umax = t - lead
        cuts = set(np.arange(0.0, umax, 2.0).tolist())
        cuts.add(umax)
        for b in fbreaks:
            if 0 < t - b < umax:
                cuts.add(t - b)
        cuts = np.array(sorted(cuts))
        lo, hi = cuts[:-1], cuts[1:]
        h = 0.5 * (hi - lo)
        u = lo[:, None] + h[:, None] * (1 + _GL_NODES)
        g = table(u)
        f = probe.envelope(t - u)
        out[i] = np.sum(h * np.sum(_GL_WEIGHTS * g * f, axis=1))
    return out


def flux_response(tau, medium: PumpedMedium, probe: ProbePulse):
    """Conjugate flux phase-locked to the probe (units c/L).

    ``kappa^2 alpha_det <n_p> |int_0^tau G(0, tau-t) f(t) dt|^2``
    """
    scalar = np.ndim(tau) == 0
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau < 0):
        raise ValueError("tau must be >= 0")
    k = medium.kappa
    if k == 0 or probe.photon_number == 0:
        out = np.zeros(tau.shape)
    else:
        amp = response_amplitude(tau, medium, probe)
        out = k * k * medium.alpha_det * probe.peak_flux * np.abs(amp) ** 2
    return float(out[0]) if scalar else out


def free_space_flux(tau, probe: ProbePulse):
    """Flux of the probe propagating in vacuum, ``<n_p> |f(tau)|^2``."""
    tau = np.asarray(tau, dtype=float)
    if probe.photon_number == 0:
        return np.zeros(tau.shape)
    return probe.peak_flux * np.abs(probe.envelope(tau)) ** 2


# ---------------------------------------------------------------------------
# series and peak analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FluxSeries:
    """Spontaneous, response and total flux on a uniform grid."""

    tau_grid: Grid1D
    spontaneous: np.ndarray
    response: np.ndarray
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = self.tau_grid.n_points
        for name in ("spontaneous", "response"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have {n} samples, got {arr.shape}")
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite and nonnegative")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def tau(self) -> np.ndarray:
        return self.tau_grid.values

    @property
    def total(self) -> np.ndarray:
        return self.spontaneous + self.response

    def columns(self) -> dict:
        return {"tau": self.tau, "n_sp": self.spontaneous, "n_resp": self.response, "n_total": self.total}


def conjugate_flux_series(grid: Grid1D, medium: PumpedMedium, probe: ProbePulse) -> FluxSeries:
    """Spontaneous, response and total conjugate flux on ``grid``.

    The kernel at the entrance face is tabulated once (see
    :class:`GreenTable`) and shared by both flux channels.
    """
    if grid.start < 0:
        raise ValueError("grid must start at tau >= 0")
    tau = grid.values
    if probe.photon_number > 0:
        _check_phase_sampling(probe, grid.step)
    sp = flux_spontaneous(tau, medium)
    resp = flux_response(tau, medium, probe)
    params = {"kappa": medium.kappa, "alpha_det": medium.alpha_det, **{f"probe.{k}": v for k, v in probe.to_dict().items()}}
    return FluxSeries(grid, np.maximum(sp, 0.0), np.maximum(resp, 0.0), params)


def _as_xy(series, component):
    if isinstance(series, FluxSeries):
        return series.tau, np.asarray(getattr(series, component))
    x, y = series
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def peak_time(x, y, window: Sequence[float] | None = None, unimodal_fraction: float = 0.9) -> float:
    """Location of the maximum of sampled ``y(x)`` with parabolic refinement.

    Raises
    ------
    MultimodalSignalError
        If another local maximum inside the window reaches
        ``unimodal_fraction`` of the global maximum.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        m = (x >= window[0]) & (x <= window[1])
        x, y = x[m], y[m]
    if len(x) < 3:
        raise ValueError("need at least three samples in the window")
    i = int(np.argmax(y))
    inner = (y[1:-1] >= y[:-2]) & (y[1:-1] > y[2:])
    peaks = np.flatnonzero(inner) + 1
    strong = [p for p in peaks if p != i and y[p] >= unimodal_fraction * y[i]]
    if strong:
        raise MultimodalSignalError(
            f"local maxima at {x[i]:.4g} and {x[strong[0]]:.4g} are within "
            f"{100 * (1 - unimodal_fraction):.0f}% of each other"
        )
    if i == 0 or i == len(x) - 1:
        return float(x[i])
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    den = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
    return float(x[i] + shift * (x[i + 1] - x[i]))


def leading_peak_time(x, y, prominence: float = 0.01) -> float:
    """Time of the first local maximum of ``y`` that stands out by at least
    ``prominence`` in ``ln y``, refined parabolically.

    Unlike :func:`peak_time` this ignores later exponential growth, which
    would otherwise dominate the global maximum.  Returns nan when the
    largest value sits at an end of the grid and no interior peak exists
    (e.g. pure growth).
    """
    from scipy.signal import find_peaks

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    live = y > 0
    if not np.any(live):
        return math.nan
    ly = np.log(np.where(live, y, np.min(y[live])))
    idx, _ = find_peaks(ly, prominence=prominence)
    if idx.size == 0:
        j = int(np.argmax(y))
        return math.nan if j in (0, len(y) - 1) else float(x[j])
    i = int(idx[0])
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    den = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
    return float(x[i] + shift * (x[i + 1] - x[i]))


def peak_advancement(reference, signal, window: Sequence[float] | None = None, component: str = "response") -> float:
    """``t_peak(reference) - t_peak(signal)``; positive when the signal leads.

    Either argument may be a :class:`FluxSeries` (its ``component`` is
    used) or an ``(x, y)`` pair of arrays.
    """
    rx, ry = _as_xy(reference, component)
    sx, sy = _as_xy(signal, component)
    return peak_time(rx, ry, window) - peak_time(sx, sy, window)


def crossover_time(series: FluxSeries) -> float:
    """First time at which spontaneous flux exceeds the response flux.

    This marks the end of the interval in which the output is dominated by
    the probe-locked reshaping.  Returns ``nan`` if it never happens after
    the response has become nonzero.
    """
    tau, sp, resp = series.tau, series.spontaneous, series.response
    live = np.flatnonzero(resp > 0)
    if live.size == 0:
        return math.nan
    after = np.arange(len(tau)) >= live[0]
    # look only after the response peak
    ipk = int(np.argmax(resp))
    cand = np.flatnonzero(after & (np.arange(len(tau)) >= ipk) & (sp > resp))
    if cand.size == 0:
        return math.nan
    k = int(cand[0])
    if k == 0:
        return float(tau[0])
    # linear interpolation of sp - resp between k-1 and k
    d0 = sp[k - 1] - resp[k - 1]
    d1 = sp[k] - resp[k]
    return float(tau[k - 1] + (tau[k] - tau[k - 1]) * d0 / (d0 - d1)) if d0 != d1 else float(tau[k])
