"""Shared numerical kernels.

Exponentially scaled modified Bessel functions of integer order, adaptive
Gauss-Kronrod quadrature with explicit breakpoints, and a complex root finder
based on the argument principle.  Everything here is a pure function of its
arguments.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import gammaln

__all__ = [
    "Grid1D",
    "bessel_i",
    "bessel_ie",
    "quad_adaptive",
    "QuadratureError",
    "find_roots_complex",
    "RootSet",
    "BoundaryZeroError",
]


# ---------------------------------------------------------------------------
# uniform grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``start, start + h, ..., stop`` with ``n_points`` nodes."""

    start: float
    stop: float
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ValueError("grid bounds must be finite")
        if not self.stop > self.start:
            raise ValueError(f"grid needs stop > start, got [{self.start}, {self.stop}]")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError(f"grid needs n_points >= 2, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))

    @classmethod
    def from_step(cls, start: float, stop: float, step: float) -> "Grid1D":
        """Grid with spacing ``step``; ``stop - start`` must be a multiple of it."""
        if step <= 0:
            raise ValueError("step must be positive")
        n = (stop - start) / step
        k = round(n)
        if abs(n - k) > 1e-9 * max(1.0, abs(n)):
            raise ValueError(f"span {stop - start} is not a multiple of step {step}")
        return cls(start, stop, k + 1)

    @property
    def step(self) -> float:
        return (self.stop - self.start) / (self.n_points - 1)

    @property
    def values(self) -> np.ndarray:
        # i*h + start, not cumulative sums, so every node is reproducible
        i = np.arange(self.n_points)
        return self.start + i * (self.stop - self.start) / (self.n_points - 1)

    def __len__(self):
        return self.n_points


# ---------------------------------------------------------------------------
# modified Bessel functions I_n
# ---------------------------------------------------------------------------

_SERIES_LIMIT = 30.0   # below this argument the ascending series is used
_DEBYE_TERMS = 14


@lru_cache(maxsize=1)
def _debye_coefficients():
    """Coefficient tables of the Debye polynomials U_k(p).

    U_k(p) only contains the powers p^k, p^(k+2), ..., p^(3k).  Row k of the
    returned array holds the coefficients c_kj of p^(k+2j), so that
    U_k(p)/nu^k = r^-k * sum_j c_kj p^(2j) with p = nu/r, r = sqrt(nu^2+x^2).
    """
    u = [Polynomial([1.0])]
    t = Polynomial([0.0, 1.0])
    for _ in range(_DEBYE_TERMS - 1):
        uk = u[-1]
        nxt = 0.5 * t**2 * (1 - t**2) * uk.deriv() + 0.125 * ((1 - 5 * t**2) * uk).integ()
        u.append(nxt)
    table = np.zeros((_DEBYE_TERMS, _DEBYE_TERMS + 1))
    for k, uk in enumerate(u):
        c = np.zeros(3 * k + 1)
        c[: len(uk.coef)] = uk.coef
        table[k, : k + 1] = c[k::2][: k + 1]
    return table


def _ie_series(n, x):
    # (x/2)^n / n! * sum_m (x^2/4)^m / (m! (n+1)_m), times e^-x
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for m in range(1, 400):
        term = term * q / (m * (n + m))
        total = total + term
        if np.all(term <= 1e-17 * total):
            break
    with np.errstate(divide="ignore"):
        logpre = np.where(x > 0, n * np.log(0.5 * np.where(x > 0, x, 1.0)), 0.0)
    logpre = logpre - gammaln(n + 1.0) - x
    out = total * np.exp(logpre)
    # I_n(0) = delta_n0
    return np.where(x == 0, np.where(n == 0, 1.0, 0.0), out)


def _ie_debye(n, x):
    r = np.hypot(n, x)
    p2 = (n / r) ** 2
    coef = _debye_coefficients()
    total = np.zeros_like(x)
    rk = np.ones_like(x)
    for k in range(_DEBYE_TERMS):
        poly = np.zeros_like(x)
        for j in range(k, -1, -1):
            poly = poly * p2 + coef[k, j]
        total = total + poly * rk
        rk = rk / r
    # exponent r - x + n*log(x/(n+r)), with r - x written without cancellation
    expo = n * n / (r + x) + n * np.log(x / (n + r))
    return total * np.exp(expo) / np.sqrt(2 * np.pi * r)


def bessel_ie(order, x):
    """Exponentially scaled modified Bessel function ``exp(-x) I_order(x)``.

    Parameters
    ----------
    order : int or array_like of int
        Order of the function; negative orders map to ``|order|``.
    x : float or array_like
        Nonnegative argument.

    Returns
    -------
    float or ndarray
    """
    n_in = np.asarray(order)
    if n_in.dtype.kind not in "iu" and not np.all(np.mod(n_in, 1) == 0):
        raise ValueError("order must be an integer")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("bessel_ie is defined for x >= 0 only")
    n, x = np.broadcast_arrays(np.abs(n_in).astype(float), x)
    out = np.empty(x.shape)
    low = x < _SERIES_LIMIT
    if np.any(low):
        out[low] = _ie_series(n[low], x[low])
    if np.any(~low):
        out[~low] = _ie_debye(n[~low], x[~low])
    return out[()] if out.ndim == 0 else out


def bessel_i(order, x):
    """Modified Bessel function of the first kind ``I_order(x)``.

    Raises
    ------
    ValueError
        For negative ``x``.
    OverflowError
        When the unscaled value is not representable; use :func:`bessel_ie`.
    """
    scaled = np.asarray(bessel_ie(order, x))
    xa = np.broadcast_to(np.asarray(x, dtype=float), scaled.shape)
    with np.errstate(over="ignore"):
        logv = np.log(np.where(scaled > 0, scaled, 1.0)) + xa
    if np.any((scaled > 0) & (logv > 709.78)):
        raise OverflowError("I_n(x) exceeds double range; use bessel_ie")
    out = np.where(scaled > 0, np.exp(logv), 0.0)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# adaptive quadrature
# ---------------------------------------------------------------------------

class QuadratureError(ArithmeticError):
    """Adaptive quadrature ran out of subdivisions before meeting ``tol``."""

    def __init__(self, msg, estimate, error):
        super().__init__(f"{msg} (estimate {estimate!r}, error bound {error:.3g})")
        self.estimate = estimate
        self.error = error


# 7-point Gauss / 15-point Kronrod nodes on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
_GWEIGHTS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(f, a, b, vectorized):
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    x = c + h * _NODES
    if vectorized:
        y = np.asarray(f(x))
    else:
        y = np.array([f(xi) for xi in x])
    if not np.all(np.isfinite(y)):
        raise ValueError(f"integrand not finite on [{a}, {b}]")
    k = h * np.dot(_KWEIGHTS, y)
    g = h * np.dot(_GWEIGHTS, y)
    return k, abs(k - g)


def quad_adaptive(
    f: Callable,
    a: float,
    b: float,
    tol: float = 1e-10,
    breakpoints: Iterable[float] = (),
    max_intervals: int = 4000,
    vectorized: bool = False,
    rtol: float = 0.0,
):
    """Globally adaptive 15-point Gauss-Kronrod quadrature.

    The interval is first split at every breakpoint inside ``(a, b)``; then the
    subinterval with the largest error estimate is bisected until the summed
    estimate falls below ``max(tol, rtol*|I|)``.

    Parameters
    ----------
    f : callable
        Integrand, real or complex valued.  With ``vectorized=True`` it is
        called with an array of nodes.
    a, b : float
        Integration limits, ``a <= b``.
    tol : float
        Absolute error target.
    breakpoints : iterable of float
        Known discontinuities or kinks of ``f``.
    max_intervals : int
        Subdivision budget.

    Returns
    -------
    float or complex

    Raises
    ------
    QuadratureError
        When the budget is exhausted; carries ``estimate`` and ``error``.
    """
    if tol <= 0 and rtol <= 0:
        raise ValueError("tol must be positive")
    if b < a:
        raise ValueError("quad_adaptive needs a <= b")
    if a == b:
        return 0.0
    pts = sorted({float(p) for p in breakpoints if a < p < b})
    edges = [a, *pts, b]
    heap = []
    total, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = _gk15(f, lo, hi, vectorized)
        heapq.heappush(heap, (-e, lo, hi, val))
        total += val
        err += e
    while err > max(tol, rtol * abs(total)):
        if len(heap) >= max_intervals:
            raise QuadratureError("subdivision budget exhausted", total, err)
        e0, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise QuadratureError("interval below floating-point resolution", total, err)
        v1, e1 = _gk15(f, lo, mid, vectorized)
        v2, e2 = _gk15(f, mid, hi, vectorized)
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        total += v1 + v2 - val
        err += e1 + e2 + e0
    # re-sum to avoid drift from the running updates
    total = sum(item[3] for item in heap)
    return total


# ---------------------------------------------------------------------------
# complex roots
# ---------------------------------------------------------------------------

class BoundaryZeroError(ArithmeticError):
    """|f| dropped below tolerance on the contour; shift the region."""


@dataclass(frozen=True)
class RootSet:
    """Zeros found in a region, with multiplicities."""

    roots: tuple
    multiplicities: tuple

    def __iter__(self):
        return iter(self.roots)

    def __len__(self):
        return len(self.roots)

    @property
    def count(self) -> int:
        """Zeros counted with multiplicity."""
        return int(sum(self.multiplicities))


def _edge_phase(f, z0, z1, tol, depth=0):
    # accumulated change of arg f along the segment z0 -> z1, refined until
    # consecutive samples differ by a small fraction of their modulus, which
    # bounds the phase step and avoids aliasing by 2*pi
    n = 16
    t = np.linspace(0.0, 1.0, n + 1)
    z = z0 + (z1 - z0) * t
    w = np.array([f(zi) for zi in z], dtype=complex)
    if np.any(np.abs(w) < tol):
        raise BoundaryZeroError(f"|f| < {tol} on the contour near {z[np.argmin(np.abs(w))]}")
    d = np.angle(w[1:] / w[:-1])
    small = np.abs(np.diff(w)) < 0.3 * np.minimum(np.abs(w[1:]), np.abs(w[:-1]))
    total = 0.0
    for k in range(n):
        if small[k] or depth > 40:
            total += d[k]
        else:
            total += _edge_phase(f, z[k], z[k + 1], tol, depth + 1)
    return total


def _winding(f, box, tol):
    x0, x1, y0, y1 = box
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    phase = sum(_edge_phase(f, corners[i], corners[(i + 1) % 4], tol) for i in range(4))
    return int(round(phase / (2 * np.pi)))


def _newton(f, df, z, tol, box, maxit=60):
    for _ in range(maxit):
        fz = f(z)
        d = df(z) if df is not None else _cdiff(f, z)
        if d == 0:
            break
        step = fz / d
        z = z - step
        if abs(step) <= tol * max(1.0, abs(z)):
            return z, True
    return z, False


def _cdiff(f, z, h=1e-6):
    h = h * max(1.0, abs(z))
    return (f(z + h) - f(z - h) + 1j * (f(z - 1j * h) - f(z + 1j * h))) / (4 * h)


def find_roots_complex(
    f: Callable[[complex], complex],
    region: Sequence[float],
    tol: float = 1e-12,
    df: Callable[[complex], complex] | None = None,
    min_size: float | None = None,
) -> RootSet:
    """All zeros of an analytic ``f`` inside a rectangle.

    The rectangle ``(re_min, re_max, im_min, im_max)`` is bisected until each
    cell encloses at most one distinct zero according to the winding number of
    ``f`` along its boundary; every such zero is then polished by Newton's
    method (with ``df`` if given).  A cell that still winds more than once when
    it has shrunk below ``min_size`` is reported as a multiple zero.

    Raises
    ------
    BoundaryZeroError
        If ``|f| < tol`` somewhere on the outer contour.
    """
    x0, x1, y0, y1 = map(float, region)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("region must have positive width and height")
    if min_size is None:
        min_size = 1e-6 * max(x1 - x0, y1 - y0)
    total = _winding(f, (x0, x1, y0, y1), tol)
    if total < 0:
        raise ValueError("negative winding number: f has poles in the region")
    found, mult = [], []

    def explore(box, count):
        if count == 0:
            return
        bx0, bx1, by0, by1 = box
        w, h = bx1 - bx0, by1 - by0
        if count == 1 or max(w, h) < min_size:
            z, ok = _newton(f, df, complex(0.5 * (bx0 + bx1), 0.5 * (by0 + by1)), tol, box)
            inside = bx0 - 1e-9 * w <= z.real <= bx1 + 1e-9 * w and by0 - 1e-9 * h <= z.imag <= by1 + 1e-9 * h
            if ok and inside or max(w, h) < min_size:
                found.append(z)
                mult.append(count)
                return
        # split the longer side, nudging the cut off-centre so it is unlikely
        # to pass through a zero
        if w >= h:
            cut = bx0 + 0.5 * w * (1 + 1e-3 * np.pi / 7)
            halves = [(bx0, cut, by0, by1), (cut, bx1, by0, by1)]
        else:
            cut = by0 + 0.5 * h * (1 + 1e-3 * np.pi / 7)
            halves = [(bx0, bx1, by0, cut), (bx0, bx1, cut, by1)]
        for sub in halves:
            try:
                c = _winding(f, sub, tol * 1e-3)
            except BoundaryZeroError:
                # a zero sits on the cut: shift the cut slightly and retry
                return explore_shifted(box, count)
            explore(sub, c)

    def explore_shifted(box, count):
        bx0, bx1, by0, by1 = box
        w = bx1 - bx0
        cut = bx0 + w * 0.4127
        for sub in [(bx0, cut, by0, by1), (cut, bx1, by0, by1)]:
            explore(sub, _winding(f, sub, tol * 1e-3))

    explore((x0, x1, y0, y1), total)
    order = np.lexsort((np.imag(found), np.real(found))) if found else []
    return RootSet(tuple(complex(found[i]) for i in order), tuple(int(mult[i]) for i in order))
