"""Time-resolved Shannon-information gain of a detected flux.

For a signal-bearing photon number ``n_r`` on top of a noise photon number
``n_s`` (both per resolution bin, with ``n = n_r + n_s``)

    dH = n log2(1 + 1/n) + log2(1 + n_r/n_s) - n_s log2(1 + 1/n_s)

is the entropy advantage of the detected distribution over noise alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import Grid1D
from .opc_time import FluxSeries, ProbePulse, free_space_flux

__all__ = ["NoiseFloorRequired", "InfoSeries", "delta_H", "info_series", "free_space_info_series"]


class NoiseFloorRequired(ValueError):
    """Signal without noise: the information gain diverges."""


def _xlog1p_inv(n):
    # n log2(1 + 1/n), -> 0 as n -> 0
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = n * np.log1p(1.0 / n) / np.log(2.0)
    return np.where(n > 0, v, 0.0)


def delta_H(n_resp, n_sp):
    """Information gain in bits for photon numbers per bin.

    Parameters
    ----------
    n_resp, n_sp : float or ndarray
        Signal and noise photon numbers (>= 0).

    Raises
    ------
    NoiseFloorRequired
        If ``n_sp == 0`` where ``n_resp > 0``; supply a ``noise_floor``.
    """
    nr = np.asarray(n_resp, dtype=float)
    ns = np.asarray(n_sp, dtype=float)
    if np.any(nr < 0) or np.any(ns < 0):
        raise ValueError("photon numbers must be >= 0")
    if np.any((ns == 0) & (nr > 0)):
        raise NoiseFloorRequired(
            "n_sp = 0 with n_resp > 0 makes the information gain diverge; "
            "set a noise_floor (photons per bin) to bound the noise from below"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        t2 = np.where(nr > 0, np.log1p(nr / np.where(ns > 0, ns, 1.0)) / np.log(2.0), 0.0)
    # term1 - term3 = n_r log2(1 + 1/n) - n_s log2[(1 + 1/n_s) / (1 + 1/n)],
    # and the last ratio is exactly 1 + n_r / (n_s (n + 1))
    a = ns + nr
    safe_a = np.where(a > 0, a, 1.0)
    safe_s = np.where(ns > 0, ns, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d13 = (nr * np.log1p(1.0 / safe_a) - ns * np.log1p(nr / (safe_s * (safe_a + 1.0)))) / np.log(2.0)
    d13 = np.where(ns > 0, d13, _xlog1p_inv(a))
    out = np.where(nr > 0, np.maximum(d13 + t2, 0.0), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class InfoSeries:
    """Information gain per resolution bin on a time grid."""

    tau_grid: Grid1D
    delta_H: np.ndarray
    params: dict = field(default_factory=dict, compare=False)

    @property
    def tau(self) -> np.ndarray:
        return self.tau_grid.values

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.delta_H))

    @property
    def peak_time(self) -> float:
        from .opc_time import peak_time
        if not np.any(self.delta_H > 0):
            return float("nan")
        return peak_time(self.tau, self.delta_H, unimodal_fraction=1.0)

    @property
    def peak_value(self) -> float:
        return float(np.max(self.delta_H))

    def total(self) -> float:
        """Time integral of the information gain (bits x time units)."""
        return float(np.trapezoid(self.delta_H, self.tau))

    def columns(self) -> dict:
        return {"tau": self.tau, "delta_H_bits": self.delta_H}


def info_series(flux: FluxSeries, noise_floor: float = 1.0, t_res: float = 1.0) -> InfoSeries:
    """Pointwise information gain of a flux series.

    Fluxes are converted to photons per bin with ``n = flux * t_res``; the
    noise is bounded below by ``noise_floor`` photons per bin.
    """
    if not noise_floor > 0:
        raise ValueError("noise_floor must be > 0")
    if not t_res > 0:
        raise ValueError("t_res must be > 0")
    nr = np.asarray(flux.response) * t_res
    ns = np.maximum(np.asarray(flux.spontaneous) * t_res, noise_floor)
    dh = np.asarray(delta_H(nr, ns), dtype=float)
    return InfoSeries(flux.tau_grid, dh, {**flux.params, "noise_floor": noise_floor, "t_res": t_res})


def free_space_info_series(grid: Grid1D, probe: ProbePulse, noise_floor: float = 1.0, t_res: float = 1.0) -> InfoSeries:
    """Information gain of the probe in vacuum, noise set by ``noise_floor``."""
    flux = FluxSeries(grid, np.zeros(grid.n_points), free_space_flux(grid.values, probe), {"reference": "free_space"})
    return info_series(flux, noise_floor, t_res)
