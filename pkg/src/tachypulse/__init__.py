"""Pulse reshaping, instability and information flow in parametrically
amplifying media (phase conjugation and stimulated Raman scattering)."""

try:
    from importlib.metadata import PackageNotFoundError, version

    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.1.0"

from .numerics import Grid1D, bessel_i, bessel_ie, find_roots_complex, quad_adaptive  # noqa: E402
from .opc_time import (  # noqa: E402
    FluxSeries,
    ProbePulse,
    PumpedMedium,
    conjugate_flux_series,
    flux_response,
    flux_spontaneous,
    green_p,
    peak_advancement,
)

__all__ = [
    "__version__",
    "Grid1D",
    "bessel_i",
    "bessel_ie",
    "find_roots_complex",
    "quad_adaptive",
    "FluxSeries",
    "ProbePulse",
    "PumpedMedium",
    "conjugate_flux_series",
    "flux_response",
    "flux_spontaneous",
    "green_p",
    "peak_advancement",
]
