"""Dispersion relations of infinite parametrically coupled media.

Units: c = 1, frequencies and wavenumbers in c/L and 1/L.

* tachyonic (counter-propagating parametric pair): ``omega^2 = k^2 - |g|^2``
* polaritonic (passively coupled pair): ``omega^2 = k^2 + |g|^2``
* Raman (light mode ``a`` at ``k`` coupled to a material mode ``b`` at
  ``Omega0`` through both ``a b^dag`` and ``a b`` terms): the four
  eigenfrequencies of the linear equations for ``(a, b, a^dag, b^dag)``.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "CouplingParams",
    "BogoliubovCoefficients",
    "DispersionBranch",
    "GapEdgeError",
    "DegenerateBranchWarning",
    "HYBRID_TOL",
    "tachyonic_omega",
    "polaritonic_omega",
    "tachyonic_bogoliubov",
    "polaritonic_bogoliubov",
    "srs_matrix",
    "srs_branches",
    "tachyonic_branch",
    "polaritonic_branch",
    "srs_sweep",
    "group_velocity",
]

HYBRID_TOL = 1e-10


class GapEdgeError(ValueError):
    """Group velocity requested too close to a band edge."""


class DegenerateBranchWarning(RuntimeWarning):
    """Two eigenfrequencies are closer than the configured tolerance."""


@dataclass(frozen=True)
class CouplingParams:
    """Coupling ``g = |g| e^{i phi}``, carrier and material resonance.

    ``phi`` multiplies the phase already carried by ``g``.  None of the
    dispersion relations depend on either phase.
    """

    g: complex = 1.0
    phi: float = 0.0
    omega0: float = 0.0
    Omega0: float = 1.0

    def __post_init__(self):
        if not cmath.isfinite(complex(self.g)):
            raise ValueError("g must be finite")
        if not (math.isfinite(self.Omega0) and self.Omega0 >= 0):
            raise ValueError("Omega0 must be >= 0")

    @property
    def k0(self) -> float:
        return self.omega0

    @property
    def g_abs(self) -> float:
        return abs(complex(self.g))


@dataclass(frozen=True)
class BogoliubovCoefficients:
    """Mode-mixing coefficients; ``s`` (active) or ``theta`` (passive) is set."""

    u: complex
    v: complex
    s: float | None = None
    theta: float | None = None

    @property
    def norm(self) -> float:
        """``|v|^2 - |u|^2`` for active mixing, ``|u|^2 + |v|^2`` for passive."""
        if self.s is not None:
            return abs(self.v) ** 2 - abs(self.u) ** 2
        return abs(self.u) ** 2 + abs(self.v) ** 2


@dataclass(frozen=True)
class DispersionBranch:
    """Sampled ``omega(k)`` with a per-sample and a branch-level class.

    ``model`` names the closed form (``"tachyonic"`` / ``"polaritonic"``)
    when one exists, which :func:`group_velocity` then differentiates.
    """

    k_samples: np.ndarray
    omega_samples: np.ndarray
    classification: str
    sample_classes: tuple = ()
    model: str | None = None
    g_abs: float = 0.0
    sign: int = 1

    def columns(self) -> dict:
        return {
            "k": self.k_samples,
            "re_omega": self.omega_samples.real,
            "im_omega": self.omega_samples.imag,
            "class": np.array(self.sample_classes or [self.classification] * len(self.k_samples)),
        }


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def tachyonic_omega(k, g):
    """``(+w, -w)`` with ``w = sqrt(k^2 - |g|^2)``; imaginary inside the gap."""
    ga = abs(complex(g))
    k = np.asarray(k, dtype=float)
    d = k * k - ga * ga
    w = np.where(d >= 0, np.sqrt(np.abs(d)) + 0j, 1j * np.sqrt(np.abs(d)))
    if w.ndim == 0:
        w = complex(w)
    return w, -w


def polaritonic_omega(k, g):
    """``(+w, -w)`` with ``w = sqrt(k^2 + |g|^2)``."""
    ga = abs(complex(g))
    k = np.asarray(k, dtype=float)
    w = np.sqrt(k * k + ga * ga)
    if w.ndim == 0:
        w = float(w)
    return w, -w


def tachyonic_bogoliubov(k: float, g: complex) -> BogoliubovCoefficients:
    """Active mixing ``u = sinh s``, ``v = e^{i phi} cosh s`` with
    ``tanh^2 s = |g|^2 / |omega + k|^2`` (real branch, ``k > |g|``)."""
    ga, phi = abs(complex(g)), cmath.phase(complex(g))
    if not k > ga:
        raise ValueError("active Bogoliubov coefficients need k > |g| (outside the gap)")
    w = math.sqrt(k * k - ga * ga)
    s = math.atanh(ga / (w + k))
    return BogoliubovCoefficients(math.sinh(s), cmath.exp(1j * phi) * math.cosh(s), s=s)


def tachyonic_omega_from_s(k: float, g: complex, s: float) -> float:
    """Inverse of the squeezing relation: ``omega = |g| coth s - k``."""
    return abs(complex(g)) / math.tanh(s) - k


def polaritonic_bogoliubov(k: float, g: complex) -> BogoliubovCoefficients:
    """Passive mixing ``u = sin theta``, ``v = e^{i phi} cos theta`` with
    ``tan 2 theta = |g| / k``."""
    ga, phi = abs(complex(g)), cmath.phase(complex(g))
    theta = 0.5 * math.atan2(ga, k)
    return BogoliubovCoefficients(math.sin(theta), cmath.exp(1j * phi) * math.cos(theta), theta=theta)


# ---------------------------------------------------------------------------
# four-branch Raman dispersion
# ---------------------------------------------------------------------------

def srs_matrix(k: float, params: CouplingParams) -> np.ndarray:
    """Linear (dynamical) matrix ``M`` with ``i d/dt X = M X`` for
    ``X = (a, b, a^dag, b^dag)``."""
    g = params.g_abs
    W = params.Omega0
    return np.array(
        [
            [k, 1j * g, 0, -1j * g],
            [-1j * g, W, -1j * g, 0],
            [0, -1j * g, -k, 1j * g],
            [-1j * g, 0, -1j * g, -W],
        ],
        dtype=complex,
    )


def _classify(w: complex, vg: float | None, tol=HYBRID_TOL) -> str:
    re, im = abs(w.real) > tol, abs(w.imag) > tol
    if re and im:
        return "hybrid"
    if im:
        return "unstable-gap"
    if vg is None:
        return "bradyonic"
    return "tachyonic" if abs(vg) > 1.0 + 1e-9 else "bradyonic"


def _sorted_eigs(k, params):
    w = np.linalg.eigvals(srs_matrix(k, params))
    w = np.where(np.abs(w.real) < 1e-14, 1j * w.imag, w)
    w = np.where(np.abs(w.imag) < 1e-14 * max(1.0, abs(k), params.Omega0), w.real + 0j, w)
    return w[np.lexsort((w.imag, w.real))]


def _match(ref, other):
    cost = np.abs(ref[:, None] - other[None, :])
    _, cols = linear_sum_assignment(cost)
    return other[cols]


def srs_branches(k: float, params: CouplingParams, h: float = 1e-6, degeneracy_tol: float = 1e-9):
    """Four eigenfrequencies at ``k`` and their classes.

    Branches are sorted by real part, then imaginary part.  Group velocities
    for the classification come from central differences with neighbours
    matched by minimum total distance.

    Returns
    -------
    (omegas, classes) : ndarray of 4 complex, tuple of 4 str
    """
    if params.g_abs == 0:
        w = np.array([k, params.Omega0, -k, -params.Omega0], dtype=complex)
        w = w[np.lexsort((w.imag, w.real))]
        # light line (|v_g| = 1) and flat material line are both non-tachyonic
        return w, ("bradyonic",) * 4
    w = _sorted_eigs(k, params)
    sep = np.min([abs(w[i] - w[j]) for i in range(4) for j in range(i + 1, 4)])
    if sep < degeneracy_tol:
        warnings.warn(f"branch separation {sep:.3g} below {degeneracy_tol:g} at k = {k}", DegenerateBranchWarning, stacklevel=2)
    wp = _match(w, _sorted_eigs(k + h, params))
    wm = _match(w, _sorted_eigs(k - h, params))
    vg = (wp.real - wm.real) / (2 * h)
    return w, tuple(_classify(complex(x), float(v)) for x, v in zip(w, vg))


# ---------------------------------------------------------------------------
# sweeps and group velocity
# ---------------------------------------------------------------------------

def _branch_class(classes):
    for c in ("hybrid", "tachyonic", "unstable-gap"):
        if c in classes:
            return c
    return "bradyonic"


def tachyonic_branch(k_grid, g, sign: int = 1) -> DispersionBranch:
    k = np.asarray(k_grid, dtype=float)
    w = tachyonic_omega(k, g)[0 if sign > 0 else 1]
    w = np.atleast_1d(w)
    cls = tuple("unstable-gap" if abs(x.imag) > 0 else "tachyonic" for x in w)
    return DispersionBranch(k, w, "tachyonic", cls, "tachyonic", abs(complex(g)), sign)


def polaritonic_branch(k_grid, g, sign: int = 1) -> DispersionBranch:
    k = np.asarray(k_grid, dtype=float)
    w = np.atleast_1d(polaritonic_omega(k, g)[0 if sign > 0 else 1]).astype(complex)
    return DispersionBranch(k, w, "bradyonic", ("bradyonic",) * len(k), "polaritonic", abs(complex(g)), sign)


def srs_sweep(k_grid, params: CouplingParams) -> list:
    """The four Raman branches over ``k_grid`` (sorted rank at every k)."""
    k = np.asarray(k_grid, dtype=float)
    ws, cs = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateBranchWarning)
        for kv in k:
            w, c = srs_branches(float(kv), params)
            ws.append(w)
            cs.append(c)
    ws = np.array(ws)
    out = []
    for j in range(4):
        cls = tuple(c[j] for c in cs)
        out.append(DispersionBranch(k, ws[:, j], _branch_class(cls), cls, None, params.g_abs, 1))
    return out


def group_velocity(branch: DispersionBranch, k: float, h: float = 1e-6) -> float:
    """``d Re(omega) / dk``.

    Closed-form branches are differentiated by a complex-step difference of
    the formula; sampled branches by central differences of the samples.

    Raises
    ------
    GapEdgeError
        If ``k`` lies within one step of the tachyonic gap edge, or inside
        the gap.
    """
    if branch.model == "tachyonic":
        if abs(k) - branch.g_abs <= h:
            raise GapEdgeError(f"|k| = {abs(k)} is within {h:g} of the gap edge |g| = {branch.g_abs}")
        f = lambda x: branch.sign * np.sqrt(x * x - branch.g_abs**2)  # noqa: E731
    elif branch.model == "polaritonic":
        f = lambda x: branch.sign * np.sqrt(x * x + branch.g_abs**2)  # noqa: E731
    else:
        f = None
    if f is not None:
        # complex-step difference: free of cancellation, exact to rounding
        step = 1e-30 * max(1.0, abs(k))
        return float(np.imag(f(complex(k, step))) / step)
    ks, ws = branch.k_samples, branch.omega_samples
    i = int(np.searchsorted(ks, k))
    if i <= 0 or i >= len(ks):
        raise ValueError("k outside the sampled range")
    lo, hi = max(i - 1, 0), min(i + 1, len(ks) - 1)
    if np.any(np.abs(ws[lo:hi + 1].imag) > HYBRID_TOL):
        raise GapEdgeError("k is within one step of a complex-frequency region")
    return float(np.interp(k, ks, np.gradient(ws.real, ks)))
