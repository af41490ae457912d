"""Scenario files, figure presets, the scenario runner and the command line.

A scenario is an INI-style key-value file (``configparser``): a
``[scenario]`` section with ``kind`` and ``name`` plus the parameter
sections that kind uses.  Every output is a whitespace-separated column
file whose ``#`` header lists the artifact version and all parameters.
"""
from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import io
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

__all__ = [
    "ValidationError",
    "Scenario",
    "SCHEMA",
    "KIND_SECTIONS",
    "PRESETS",
    "preset",
    "parse_scenario",
    "serialize_scenario",
    "load_scenario",
    "run_scenario",
    "write_columns",
    "main",
    "OUT_DIR_ENV",
]

OUT_DIR_ENV = "TACHYPULSE_OUT_DIR"
KINDS = ("opc_flux", "opc_profile", "opc_info", "srs_flux", "dispersion_sweep", "threshold_scan")


class ValidationError(ValueError):
    """Scenario parameter out of range; the message starts with its path."""


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Field:
    type: str                      # float, int, str, floats, strs
    default: object = None         # None: optional (omitted when unset)
    check: str | None = None       # ">0", ">=0", or "a|b|c" for enums
    required: bool = False
    doc: str = ""


F = Field
SCHEMA: dict = {
    "medium": {
        "kappa": F("float", 1.7, ">=0", doc="coupling |g| L"),
        "alpha_det": F("float", 1.0, ">0", doc="detection factor (absolute flux scale)"),
    },
    "probe": {
        "shape": F("str", "gaussian", "gaussian|chopped_gaussian", doc="envelope family"),
        "width_fwhm": F("float", 24.0, ">0", doc="FWHM of |f| in L/c"),
        "detuning": F("float", 0.28, "finite", doc="delta in c/L"),
        "peak_time": F("float", 50.0, "finite", doc="t_p in L/c"),
        "onset_time": F("float", None, "finite", doc="switch-on time (chopped_gaussian only)"),
        "photon_number": F("float", 1e10, ">=0", doc="<N_p>"),
    },
    "chopped": {
        "onset_time": F("float", None, "finite", required=True, doc="onset of the extra chopped-probe run"),
        "peak_time": F("float", None, "finite", required=True, doc="its Gaussian peak time"),
    },
    "grid": {
        "start": F("float", 0.0, ">=0", doc="first time (L/c, or 1/Gamma for srs_flux)"),
        "stop": F("float", 100.0, ">0", doc="last time"),
        "step": F("float", 0.05, ">0", doc="spacing"),
    },
    "info": {
        "noise_floor": F("float", 1.0, ">0", doc="lower bound on noise photons per bin"),
        "t_res": F("float", 1.0, ">0", doc="detector bin in L/c"),
    },
    "profile": {
        "times": F("floats", (20.0, 30.0, 40.0, 50.0, 60.0), "finite", doc="snapshot times in L/c"),
        "x_min": F("float", -0.5, "finite", doc="left end of the x grid (units L)"),
        "x_max": F("float", 1.5, "finite", doc="right end"),
        "n_x": F("int", 201, ">=2", doc="number of x samples"),
        "bandwidth": F("float", 40.0, ">0", doc="Fourier window width in c/L"),
        "n_fft": F("int", 16384, ">=256", doc="Fourier samples"),
    },
    "spectral": {
        "delta_min": F("float", -3.0, "finite", doc="first detuning in c/L"),
        "delta_max": F("float", 3.0, "finite", doc="last detuning"),
        "n_delta": F("int", 601, ">=2", doc="number of detunings"),
    },
    "srs": {
        "Gamma": F("float", 1.0, ">0", doc="relaxation rate"),
        "gL": F("float", 25.0, ">=0", doc="integrated gain"),
        "length_z": F("float", 1.0, ">0", doc="medium length"),
        "z": F("float", None, ">0", doc="observation point (default length_z)"),
        "pump_geometry": F("str", "uniform", "uniform|searchlight", doc="only uniform is modelled"),
        "q_corr": F("float", None, ">=0", doc="inversion-noise weight (default 2 Gamma/z)"),
        "f_corr": F("float", None, ">=0", doc="Langevin-noise weight (default 2 Gamma/z)"),
    },
    "srs_probe": {
        "detuning_over_Gamma": F("float", 10.0, "finite", doc="delta / Gamma"),
        "spectral_fwhm_over_Gamma": F("float", 0.5, ">0", doc="spectral amplitude FWHM / Gamma"),
        "peak_time_Gamma": F("float", 30.0, "finite", doc="Gamma t_p"),
        "photon_number": F("float", 1e10, ">=0", doc="<N_p>"),
    },
    "dispersion": {
        "g": F("float", 1.0, ">=0", doc="|g| in c/L"),
        "phi": F("float", 0.0, "finite", doc="pump phase (does not enter omega)"),
        "Omega0": F("float", 2.0, ">=0", doc="Raman resonance in c/L"),
        "k_min": F("float", -4.0, "finite", doc="first k"),
        "k_max": F("float", 4.0, "finite", doc="last k"),
        "n_k": F("int", 801, ">=2", doc="number of k samples"),
        "branches": F("strs", ("tachyonic", "polaritonic", "srs"), "tachyonic|polaritonic|srs", doc="families to sweep"),
    },
    "threshold": {
        "kappa_min": F("float", 1.0, ">0", doc="left end of the kappa sweep"),
        "kappa_max": F("float", 2.0, ">0", doc="right end"),
        "points": F("int", 21, ">=2", doc="sweep points"),
    },
}

KIND_SECTIONS = {
    "opc_flux": (("medium", "probe", "grid"), ("chopped",)),
    "opc_info": (("medium", "probe", "grid", "info"), ("chopped",)),
    "opc_profile": (("medium", "probe", "profile", "spectral"), ()),
    "srs_flux": (("srs", "srs_probe", "grid"), ()),
    "dispersion_sweep": (("dispersion",), ()),
    "threshold_scan": (("threshold",), ()),
}


def _coerce(path, f: Field, raw):
    try:
        if f.type == "float":
            v = float(raw)
        elif f.type == "int":
            if isinstance(raw, str):
                v = int(raw.strip())
            else:
                if float(raw) != int(raw):
                    raise ValueError
                v = int(raw)
        elif f.type == "str":
            v = str(raw).strip()
        elif f.type == "floats":
            items = raw.split(",") if isinstance(raw, str) else raw
            v = tuple(float(x) for x in items if str(x).strip() != "")
        elif f.type == "strs":
            items = raw.split(",") if isinstance(raw, str) else raw
            v = tuple(str(x).strip() for x in items if str(x).strip())
        else:  # pragma: no cover
            raise AssertionError(f.type)
    except (TypeError, ValueError):
        raise ValidationError(f"{path}: cannot read {raw!r} as {f.type}") from None
    vals = v if isinstance(v, tuple) else (v,)
    for x in vals:
        if f.check is None:
            continue
        if f.type in ("str", "strs"):
            allowed = f.check.split("|")
            if x not in allowed:
                raise ValidationError(f"{path}: {x!r} not one of {allowed}")
            continue
        if not math.isfinite(x):
            raise ValidationError(f"{path}: must be finite, got {x}")
        if f.check == ">0" and not x > 0:
            raise ValidationError(f"{path}: must be > 0, got {x}")
        if f.check == ">=0" and not x >= 0:
            raise ValidationError(f"{path}: must be >= 0, got {x}")
        if f.check.startswith(">=") and f.check[2:].isdigit() and not x >= int(f.check[2:]):
            raise ValidationError(f"{path}: must be {f.check}, got {x}")
    return v


def _cross_checks(kind, p):
    """Constraints that involve more than one key."""
    def need(cond, msg):
        if not cond:
            raise ValidationError(msg)

    if "grid" in p:
        g = p["grid"]
        need(g["stop"] > g["start"], "grid.stop: must exceed grid.start")
        need((g["stop"] - g["start"]) / g["step"] <= 5e6, "grid.step: more than 5e6 samples requested")
    if "probe" in p:
        pr = p["probe"]
        if pr["shape"] == "chopped_gaussian":
            need(pr.get("onset_time") is not None, "probe.onset_time: required for shape chopped_gaussian")
        else:
            need(pr.get("onset_time") is None, "probe.onset_time: only valid for shape chopped_gaussian")
        if "grid" in p:
            need(abs(pr["detuning"]) * p["grid"]["step"] <= 0.1,
                 "grid.step: detuning x step exceeds 0.1 rad (phase undersampled)")
    if "profile" in p:
        pf = p["profile"]
        need(pf["x_max"] > pf["x_min"], "profile.x_max: must exceed profile.x_min")
        need(len(pf["times"]) > 0, "profile.times: at least one snapshot time")
        need(all(t >= 0 for t in pf["times"]), "profile.times: snapshot times must be >= 0")
        if "probe" in p:
            need(abs(p["probe"]["detuning"]) < 0.4 * pf["bandwidth"], "profile.bandwidth: too narrow for the probe detuning")
        if "medium" in p:
            need(abs(p["medium"]["kappa"] - math.pi / 2) > 1e-9,
                 "medium.kappa: exactly marginal coupling (pi/2) has no steady state; perturb kappa")
    if "spectral" in p:
        need(p["spectral"]["delta_max"] > p["spectral"]["delta_min"], "spectral.delta_max: must exceed spectral.delta_min")
    if "srs" in p:
        if p["srs"]["pump_geometry"] == "searchlight":
            raise ValidationError(
                "srs.pump_geometry: the swept (searchlight) pump has no propagation model in this "
                "artifact; only 'uniform' pumping is supported"
            )
        if "grid" in p:
            d = p["srs_probe"]["detuning_over_Gamma"]
            need(abs(d) * p["grid"]["step"] <= 0.1, "grid.step: detuning x step exceeds 0.1 rad (phase undersampled)")
    if "dispersion" in p:
        d = p["dispersion"]
        need(d["k_max"] > d["k_min"], "dispersion.k_max: must exceed dispersion.k_min")
        need(len(d["branches"]) > 0, "dispersion.branches: at least one family")
    if "threshold" in p:
        t = p["threshold"]
        need(t["kappa_max"] > t["kappa_min"], "threshold.kappa_max: must exceed threshold.kappa_min")


@dataclass(frozen=True)
class Scenario:
    """Validated, default-filled scenario.

    ``params`` maps section name to a dict of typed values; optional keys
    that are unset are absent.
    """

    kind: str
    name: str
    params: dict = field(default_factory=dict)

    @classmethod
    def build(cls, kind: str, name: str = "scenario", sections: dict | None = None) -> "Scenario":
        if kind not in KINDS:
            raise ValidationError(f"scenario.kind: {kind!r} not one of {list(KINDS)}")
        name = str(name).strip()
        if not name or any(c in name for c in "/\\ \t"):
            raise ValidationError(f"scenario.name: {name!r} must be a non-empty token without spaces or slashes")
        sections = {k: dict(v) for k, v in (sections or {}).items()}
        required, optional = KIND_SECTIONS[kind]
        for sec in sections:
            if sec not in required and sec not in optional:
                raise ValidationError(f"{sec}: section not used by kind {kind!r}")
        params = {}
        for sec in required + tuple(s for s in optional if s in sections):
            given = sections.get(sec, {})
            schema = SCHEMA[sec]
            for key in given:
                if key not in schema:
                    raise ValidationError(f"{sec}.{key}: unknown parameter")
            vals = {}
            for key, f in schema.items():
                path = f"{sec}.{key}"
                if key in given and given[key] is not None:
                    vals[key] = _coerce(path, f, given[key])
                elif f.required:
                    raise ValidationError(f"{path}: required")
                elif f.default is not None:
                    vals[key] = f.default
            params[sec] = vals
        _cross_checks(kind, params)
        return cls(kind, name, params)

    def get(self, path: str, default=None):
        sec, key = path.split(".", 1)
        return self.params.get(sec, {}).get(key, default)

    def replace(self, **changes) -> "Scenario":
        """Copy with ``section__key=value`` overrides (validated again)."""
        secs = {k: dict(v) for k, v in self.params.items()}
        for k, v in changes.items():
            sec, key = k.split("__", 1)
            secs.setdefault(sec, {})[key] = v
        return Scenario.build(self.kind, self.name, secs)

    def flat(self) -> list:
        out = [("scenario.kind", self.kind), ("scenario.name", self.name)]
        for sec, vals in self.params.items():
            for key, v in vals.items():
                out.append((f"{sec}.{key}", _fmt_value(v)))
        return out


def _fmt_value(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_scenario(s: Scenario) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["scenario"] = {"kind": s.kind, "name": s.name}
    for sec, vals in s.params.items():
        cp[sec] = {k: _fmt_value(v) for k, v in vals.items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def parse_scenario(text: str) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"scenario file: {exc}") from None
    if not cp.has_section("scenario") or "kind" not in cp["scenario"]:
        raise ValidationError("scenario.kind: required")
    head = dict(cp["scenario"])
    extra = set(head) - {"kind", "name"}
    if extra:
        raise ValidationError(f"scenario.{sorted(extra)[0]}: unknown parameter")
    secs = {sec: dict(cp[sec]) for sec in cp.sections() if sec != "scenario"}
    return Scenario.build(head["kind"], head.get("name", "scenario"), secs)


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"scenario file: {exc}") from None
    return parse_scenario(text)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

_SRS_A = {"srs": {"Gamma": 1.0, "gL": 25.0}, "srs_probe": {"detuning_over_Gamma": 10.0, "spectral_fwhm_over_Gamma": 0.5, "peak_time_Gamma": 30.0, "photon_number": 1e10}, "grid": {"start": 0.0, "stop": 60.0, "step": 0.01}}
_SRS_B = {"srs": {"Gamma": 1.0, "gL": 12.0}, "srs_probe": {"detuning_over_Gamma": 15.0, "spectral_fwhm_over_Gamma": 0.25, "peak_time_Gamma": 60.0, "photon_number": 1e10}, "grid": {"start": 0.0, "stop": 120.0, "step": 0.005}}
_FIG3_PROBE = {"shape": "gaussian", "width_fwhm": 24.0, "detuning": 0.28, "peak_time": 50.0, "photon_number": 1e10}

PRESETS = {
    "fig1": ("dispersion_sweep", {"dispersion": {"g": 1.0, "Omega0": 2.0, "k_min": -3.0, "k_max": 3.0, "n_k": 601, "branches": "tachyonic, polaritonic"}}),
    "fig2": ("dispersion_sweep", {"dispersion": {"g": 1.0, "Omega0": 2.0, "k_min": -4.0, "k_max": 4.0, "n_k": 801, "branches": "srs"}}),
    "fig3": ("opc_flux", {"medium": {"kappa": 1.7}, "probe": dict(_FIG3_PROBE), "grid": {"start": 0.0, "stop": 100.0, "step": 0.05}, "chopped": {"onset_time": 10.0, "peak_time": 20.0}}),
    "fig4": ("opc_profile", {"medium": {"kappa": 1.7}, "probe": {"shape": "gaussian", "width_fwhm": 19.3, "detuning": 0.31, "peak_time": 50.0, "photon_number": 1.0}, "profile": {"times": "20, 30, 40, 50, 60"}, "spectral": {}}),
    "fig5": ("opc_info", {"medium": {"kappa": 1.7}, "probe": {**_FIG3_PROBE, "photon_number": 100.0}, "grid": {"start": 0.0, "stop": 100.0, "step": 0.05}, "info": {"noise_floor": 1.0, "t_res": 1.0}, "chopped": {"onset_time": 10.0, "peak_time": 20.0}}),
    "fig6a": ("srs_flux", _SRS_A),
    "fig6b": ("srs_flux", _SRS_B),
    "threshold": ("threshold_scan", {"threshold": {"kappa_min": 1.0, "kappa_max": 2.0, "points": 21}}),
}


def preset(name: str) -> Scenario:
    if name not in PRESETS:
        raise ValidationError(f"preset: unknown name {name!r}; choose from {sorted(PRESETS)}")
    kind, secs = PRESETS[name]
    return Scenario.build(kind, name, secs)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _header(scenario: Scenario, title: str, columns, deterministic: bool, extra=()) -> list:
    lines = [f"tachypulse {__version__}: {title}"]
    if not deterministic:
        lines.append("generated " + _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
    lines += [f"{k} = {v}" for k, v in scenario.flat()]
    lines += [f"{k} = {v}" for k, v in extra]
    lines.append("columns: " + " ".join(columns))
    return lines


def write_columns(path, columns: dict, header_lines=()) -> None:
    """Write equal-length columns as text; floats with 17 significant digits."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise ValueError("columns differ in length")
    out = io.StringIO()
    for h in header_lines:
        out.write(f"# {h}\n")
    for i in range(n):
        row = []
        for a in arrays:
            x = a[i]
            row.append(x if isinstance(x, str) or a.dtype.kind in "US" else f"{float(x):.17g}")
        out.write(" ".join(str(r) for r in row) + "\n")
    Path(path).write_text(out.getvalue())


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

def _grid(s: Scenario):
    from .numerics import Grid1D
    return Grid1D.from_step(s.get("grid.start"), s.get("grid.stop"), s.get("grid.step"))


def _probe(s: Scenario, chopped=False):
    from .opc_time import ProbePulse
    p = s.params["probe"]
    if chopped:
        return ProbePulse("chopped_gaussian", p["width_fwhm"], p["detuning"], s.get("chopped.peak_time"),
                          onset_time=s.get("chopped.onset_time"), photon_number=p["photon_number"])
    return ProbePulse(p["shape"], p["width_fwhm"], p["detuning"], p["peak_time"],
                      onset_time=p.get("onset_time"), photon_number=p["photon_number"])


def _medium(s: Scenario):
    from .opc_time import PumpedMedium
    return PumpedMedium(s.get("medium.kappa"), s.get("medium.alpha_det"))


def _safe_peak(x, y, window=None):
    from .opc_time import MultimodalSignalError, peak_time
    try:
        return peak_time(x, y, window)
    except (MultimodalSignalError, ValueError):
        return math.nan


def _run_opc_flux(s, tol):
    from .opc_time import conjugate_flux_series, free_space_flux, leading_peak_time
    grid, med = _grid(s), _medium(s)
    outputs, summary = [], []
    runs = [("", _probe(s))] + ([("_chopped", _probe(s, True))] if "chopped" in s.params else [])
    for tag, probe in runs:
        fs = conjugate_flux_series(grid, med, probe)
        free = free_space_flux(grid.values, probe)
        outputs.append((f"flux{tag}", "conjugate flux at the entrance face", fs.columns()))
        outputs.append((f"free_space{tag}", "free-space probe flux", {"tau": grid.values, "n_free": free}))
        tf = _safe_peak(grid.values, free)
        # first response maximum; later exponential growth is not a peak
        tr = leading_peak_time(grid.values, fs.response)
        summary += [(f"free_space_peak{tag}", tf), (f"response_peak{tag}", tr), (f"advancement{tag}", tf - tr)]
    return outputs, summary


def _run_opc_info(s, tol):
    from .info import free_space_info_series, info_series
    from .opc_time import conjugate_flux_series
    grid, med = _grid(s), _medium(s)
    nf, tr = s.get("info.noise_floor"), s.get("info.t_res")
    outputs, summary = [], []
    runs = [("", _probe(s))] + ([("_chopped", _probe(s, True))] if "chopped" in s.params else [])
    for tag, probe in runs:
        fs = conjugate_flux_series(grid, med, probe)
        ic = info_series(fs, nf, tr)
        ifr = free_space_info_series(grid, probe, nf, tr)
        outputs.append((f"info_conjugate{tag}", "information gain of the conjugate", ic.columns()))
        outputs.append((f"info_free_space{tag}", "information gain of the free-space probe", ifr.columns()))
        outputs.append((f"flux{tag}", "conjugate flux at the entrance face", fs.columns()))
        summary += [
            (f"info_peak_time{tag}", ic.peak_time), (f"info_peak_bits{tag}", ic.peak_value),
            (f"free_space_info_peak_bits{tag}", ifr.peak_value),
            (f"suppression{tag}", ifr.peak_value / ic.peak_value if ic.peak_value > 0 else math.inf),
            (f"info_total{tag}", ic.total()), (f"free_space_info_total{tag}", ifr.total()),
        ]
    return outputs, summary


def _run_opc_profile(s, tol):
    from .opc_freq import field_profile, find_instability_poles, spectral_response
    med, probe = _medium(s), _probe(s)
    pf = s.params["profile"]
    x = np.linspace(pf["x_min"], pf["x_max"], pf["n_x"])
    poles = find_instability_poles(med) if med.kappa > 0 else None
    outputs = []
    for t in pf["times"]:
        ep, ec = field_profile(x, t, probe, med, pf["bandwidth"], pf["n_fft"], poles)
        outputs.append((f"profile_t{t:g}", f"field snapshot at t = {t!r}", {"x": x, "abs2_E_p": np.abs(ep) ** 2, "abs2_E_c": np.abs(ec) ** 2}))
    sp = s.params["spectral"]
    d = np.linspace(sp["delta_min"], sp["delta_max"], sp["n_delta"])
    outputs.append(("spectral_x0", "amplitudes at the entrance face", spectral_response(d, med, 0.0).columns()))
    outputs.append(("spectral_xL", "amplitudes at the exit face", spectral_response(d, med, 1.0).columns()))
    summary = [("n_poles", len(poles.poles) if poles else 0),
               ("dominant_growth_rate", poles.dominant_growth_rate if poles else -math.inf)]
    if poles:
        outputs.append(("poles", "zeros of the common denominator", {"re_s": np.array([p.real for p in poles.poles]), "im_s": np.array([p.imag for p in poles.poles])}))
    return outputs, summary


def _run_srs(s, tol):
    from .opc_time import ProbePulse
    from .srs import NoiseSources, SrsMedium, srs_free_space_flux, srs_series
    sr, sp = s.params["srs"], s.params["srs_probe"]
    G = sr["Gamma"]
    med = SrsMedium(G, sr["gL"], sr["length_z"], sr["pump_geometry"])
    z = sr.get("z", sr["length_z"])
    noise = NoiseSources(sr.get("q_corr"), sr.get("f_corr"))
    width = 8 * math.log(2) / (sp["spectral_fwhm_over_Gamma"] * G)
    probe = ProbePulse("gaussian", width, sp["detuning_over_Gamma"] * G, sp["peak_time_Gamma"] / G, photon_number=sp["photon_number"])
    from .numerics import Grid1D
    gt = _grid(s)
    grid = Grid1D(gt.start / G, gt.stop / G, gt.n_points)
    fs = srs_series(z, grid, probe, med, noise)
    free = srs_free_space_flux(grid.values, probe)
    cols = {"Gamma_t": gt.values, "n_sp_over_Gamma": fs.spontaneous / G, "n_resp_over_Gamma": fs.response / G, "n_total_over_Gamma": fs.total / G}
    tf, tr = _safe_peak(gt.values, free), _safe_peak(gt.values, fs.response)
    return ([("srs_flux", "transmitted Stokes flux", cols),
             ("srs_free_space", "free-space probe flux", {"Gamma_t": gt.values, "n_free_over_Gamma": free / G})],
            [("free_space_peak_Gamma_t", tf), ("response_peak_Gamma_t", tr), ("advancement_Gamma_t", tf - tr)])


def _run_dispersion(s, tol):
    from .dispersion import CouplingParams, polaritonic_branch, srs_sweep, tachyonic_branch
    d = s.params["dispersion"]
    k = np.linspace(d["k_min"], d["k_max"], d["n_k"])
    outputs, summary = [], []
    for fam in d["branches"]:
        if fam == "srs":
            brs = srs_sweep(k, CouplingParams(d["g"], d["phi"], Omega0=d["Omega0"]))
            names = [f"srs_{i}" for i in range(4)]
        elif fam == "tachyonic":
            brs = [tachyonic_branch(k, d["g"], +1), tachyonic_branch(k, d["g"], -1)]
            names = ["tachyonic_plus", "tachyonic_minus"]
        else:
            brs = [polaritonic_branch(k, d["g"], +1), polaritonic_branch(k, d["g"], -1)]
            names = ["polaritonic_plus", "polaritonic_minus"]
        for nm, b in zip(names, brs):
            outputs.append((f"branch_{nm}", f"dispersion branch {nm}", b.columns()))
            summary.append((f"class_{nm}", b.classification))
    return outputs, summary


def _run_threshold(s, tol):
    from .opc_freq import find_instability_poles, instability_threshold
    from .opc_time import PumpedMedium
    t = s.params["threshold"]
    ks = np.linspace(t["kappa_min"], t["kappa_max"], t["points"])
    rates, ims, flags = [], [], []
    for k in ks:
        ps = find_instability_poles(PumpedMedium(float(k)))
        dom = ps.dominant
        rates.append(ps.dominant_growth_rate)
        ims.append(dom.imag if dom is not None else math.nan)
        flags.append(1.0 if ps.threshold_flag else 0.0)
    kc = instability_threshold(t["kappa_min"], t["kappa_max"], tol=tol)
    return ([("threshold_scan", "dominant pole vs coupling", {"kappa": ks, "growth_rate": np.array(rates), "im_dominant": np.array(ims), "threshold_flag": np.array(flags)})],
            [("kappa_c", kc), ("kappa_c_minus_half_pi", kc - math.pi / 2)])


_RUNNERS = {
    "opc_flux": _run_opc_flux,
    "opc_info": _run_opc_info,
    "opc_profile": _run_opc_profile,
    "srs_flux": _run_srs,
    "dispersion_sweep": _run_dispersion,
    "threshold_scan": _run_threshold,
}


class NumericalFailure(RuntimeError):
    """A solver failed; the message names the module that raised."""


def run_scenario(scenario: Scenario, out_dir=None, deterministic: bool = False, tol: float = 1e-12) -> list:
    """Compute a scenario and write its files.

    All results are computed before anything is written, so a failure
    leaves the output directory untouched.

    Returns
    -------
    list of Path
        Files written.

    Raises
    ------
    NumericalFailure
        Wrapping any solver exception, with its module in the message.
    """
    out = Path(out_dir if out_dir is not None else os.environ.get(OUT_DIR_ENV, "."))
    if not tol > 0:
        raise ValidationError("--tol: must be > 0")
    try:
        with np.errstate(over="ignore", under="ignore"):
            outputs, summary = _RUNNERS[scenario.kind](scenario, tol)
    except ValidationError:
        raise
    except Exception as exc:  # noqa: BLE001 - surfaced with provenance
        mod = type(exc).__module__
        origin = exc.__traceback__
        while origin is not None and origin.tb_next is not None:
            origin = origin.tb_next
        where = origin.tb_frame.f_globals.get("__name__", mod) if origin else mod
        raise NumericalFailure(f"{where}: {type(exc).__name__}: {exc}") from exc
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ValidationError(f"--out-dir: {out} is not writable")
    written = []
    for stem, title, cols in outputs:
        path = out / f"{scenario.name}_{stem}.dat"
        write_columns(path, cols, _header(scenario, title, list(cols), deterministic))
        written.append(path)
    path = out / f"{scenario.name}_summary.txt"
    head = "".join(f"# {h}\n" for h in _header(scenario, "summary", ["key", "value"], deterministic)[:-1])
    path.write_text(head + "".join(f"{k} = {_fmt_value(v) if not isinstance(v, float) else repr(v)}\n" for k, v in summary))
    written.append(path)
    return written


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def _common(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global flags with suppressed defaults so that a
    # flag given before the subcommand is not reset by the subparser
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=d(None), help=f"output directory (default ${OUT_DIR_ENV} or .)")
    common.add_argument("--deterministic", action="store_true", default=d(False), help="omit the timestamp from headers")
    common.add_argument("--tol", type=float, default=d(1e-12), help="root/threshold tolerance")
    return common


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tachypulse", description="Pulse reshaping in parametrically amplifying media.",
                                 parents=[_common(False)])
    common = _common(True)
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", parents=[common], help="run a scenario file")
    r.add_argument("scenario")
    p = sub.add_parser("preset", parents=[common], help="export or run a compiled-in preset")
    p.add_argument("name", choices=sorted(PRESETS))
    g = p.add_mutually_exclusive_group()
    g.add_argument("--export", action="store_true", help="print the scenario file (default)")
    g.add_argument("--run", action="store_true", help="run the preset")
    t = sub.add_parser("threshold-scan", parents=[common], help="dominant pole vs coupling")
    t.add_argument("--kappa-min", type=float, default=1.0)
    t.add_argument("--kappa-max", type=float, default=2.0)
    t.add_argument("--points", type=int, default=21)
    return ap


def main(argv=None) -> int:
    ap = _parser()
    args = ap.parse_args(argv)
    try:
        if args.cmd == "preset":
            sc = preset(args.name)
            if not args.run:
                sys.stdout.write(serialize_scenario(sc))
                return 0
        elif args.cmd == "run":
            sc = load_scenario(args.scenario)
        else:
            sc = Scenario.build("threshold_scan", "threshold_scan", {"threshold": {
                "kappa_min": args.kappa_min, "kappa_max": args.kappa_max, "points": args.points}})
        files = run_scenario(sc, args.out_dir, args.deterministic, args.tol)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure in {exc}", file=sys.stderr)
        return 2
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
