import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tachypulse.cli_io import (
    OUT_DIR_ENV,
    PRESETS,
    Scenario,
    ValidationError,
    main,
    parse_scenario,
    preset,
    run_scenario,
    serialize_scenario,
)


def _small_flux(**over):
    secs = {"medium": {"kappa": 1.2}, "probe": {"width_fwhm": 6.0, "peak_time": 10.0, "detuning": 0.2},
            "grid": {"start": 0.0, "stop": 12.0, "step": 0.1}}
    for k, v in over.items():
        sec, key = k.split("__")
        secs.setdefault(sec, {})[key] = v
    return Scenario.build("opc_flux", "small", secs)


def test_preset_values():
    assert preset("fig3").get("probe.detuning") == 0.28
    assert preset("fig6a").get("srs.gL") == 25.0
    t = preset("threshold")
    assert t.kind == "threshold_scan"
    assert (t.get("threshold.kappa_min"), t.get("threshold.kappa_max")) == (1.0, 2.0)
    assert preset("fig4").get("probe.width_fwhm") == 19.3 and preset("fig4").get("probe.detuning") == 0.31
    assert preset("fig5").get("probe.photon_number") == 100.0


def test_unknown_preset():
    with pytest.raises(ValidationError):
        preset("fig9")


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_round_trip(name):
    s = preset(name)
    assert parse_scenario(serialize_scenario(s)) == s


@settings(max_examples=60, deadline=None)
@given(kappa=st.floats(0, 3), w=st.floats(0.5, 50), d=st.floats(-1, 1), tp=st.floats(-100, 100),
       n=st.floats(0, 1e15), nf=st.floats(1e-6, 1e3))
def test_round_trip_random(kappa, w, d, tp, n, nf):
    s = Scenario.build("opc_info", "r", {
        "medium": {"kappa": kappa},
        "probe": {"width_fwhm": w, "detuning": d, "peak_time": tp, "photon_number": n},
        "grid": {"start": 0.0, "stop": 10.0, "step": 0.05},
        "info": {"noise_floor": nf},
    })
    assert parse_scenario(serialize_scenario(s)) == s


@pytest.mark.parametrize("over,path", [
    ({"probe__width_fwhm": -1.0}, "probe.width_fwhm"),
    ({"medium__kappa": -0.1}, "medium.kappa"),
    ({"grid__stop": -1.0}, "grid.stop"),
    ({"probe__shape": "square"}, "probe.shape"),
    ({"probe__bogus": 1.0}, "probe.bogus"),
    ({"grid__step": 1.0}, "grid.step"),
    ({"probe__shape": "chopped_gaussian"}, "probe.onset_time"),
])
def test_validation_paths(over, path):
    with pytest.raises(ValidationError, match=path.replace(".", r"\.")):
        _small_flux(**over)


def test_searchlight_rejected():
    with pytest.raises(ValidationError, match="searchlight"):
        Scenario.build("srs_flux", "x", {"srs": {"pump_geometry": "searchlight"}})


def test_kind_section_mismatch():
    with pytest.raises(ValidationError, match="srs"):
        Scenario.build("opc_flux", "x", {"srs": {}})


def test_malformed_file_writes_nothing(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nkind = opc_flux\nname = bad\n[probe]\nwidth_fwhm = -3\n")
    out = tmp_path / "out"
    assert main(["run", str(bad), "--out-dir", str(out)]) == 1
    assert not out.exists() or not any(out.iterdir())


def test_run_writes_headers_and_is_reproducible(tmp_path):
    s = _small_flux()
    a = run_scenario(s, tmp_path / "a", deterministic=True)
    b = run_scenario(s, tmp_path / "b", deterministic=True)
    for fa, fb in zip(a, b):
        assert fa.read_bytes() == fb.read_bytes()
    text = (tmp_path / "a" / "small_flux.dat").read_text()
    assert text.startswith("# tachypulse ")
    assert "# medium.kappa = 1.2" in text and "# columns: tau n_sp n_resp n_total" in text
    data = np.loadtxt(tmp_path / "a" / "small_flux.dat")
    assert data.shape == (121, 4)
    assert np.allclose(data[:, 3], data[:, 1] + data[:, 2], rtol=1e-15, atol=0)


def test_timestamp_only_difference(tmp_path):
    s = _small_flux()
    a = run_scenario(s, tmp_path / "a", deterministic=False)[0].read_text().splitlines()
    b = run_scenario(s, tmp_path / "b", deterministic=True)[0].read_text().splitlines()
    assert [x for x in a if not x.startswith("# generated")] == b


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "env"))
    files = run_scenario(_small_flux(), deterministic=True)
    assert all(str(f).startswith(str(tmp_path / "env")) for f in files)


def test_numerical_failure_exit_code(tmp_path, capsys):
    f = tmp_path / "marginal.ini"
    s = preset("fig4").replace(medium__kappa=1.5707963)
    f.write_text(serialize_scenario(s))
    assert main(["run", str(f), "--out-dir", str(tmp_path / "o")]) == 2
    assert "tachypulse.opc_freq" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_preset_export_cli(capsys):
    assert main(["preset", "fig6b", "--export"]) == 0
    text = capsys.readouterr().out
    assert parse_scenario(text) == preset("fig6b")


def test_threshold_scan_cli(tmp_path):
    assert main(["threshold-scan", "--kappa-min", "1.2", "--kappa-max", "1.9", "--points", "4",
                 "--out-dir", str(tmp_path), "--deterministic"]) == 0
    summary = (tmp_path / "threshold_scan_summary.txt").read_text()
    kc = float([ln for ln in summary.splitlines() if ln.startswith("kappa_c =")][0].split("=")[1])
    assert abs(kc - np.pi / 2) < 1e-9
    data = np.loadtxt(tmp_path / "threshold_scan_threshold_scan.dat")
    assert list(data[:, 3]) == [0.0, 0.0, 1.0, 1.0]


def test_dispersion_and_srs_runs(tmp_path):
    d = Scenario.build("dispersion_sweep", "d", {"dispersion": {"n_k": 21, "branches": "tachyonic, srs"}})
    files = run_scenario(d, tmp_path, deterministic=True)
    assert {f.name for f in files} >= {"d_branch_tachyonic_plus.dat", "d_branch_srs_0.dat"}
    s = Scenario.build("srs_flux", "s", {"grid": {"stop": 40.0, "step": 0.01}})
    files = run_scenario(s, tmp_path, deterministic=True)
    text = (tmp_path / "s_srs_flux.dat").read_text()
    assert "# columns: Gamma_t n_sp_over_Gamma n_resp_over_Gamma n_total_over_Gamma" in text


def test_profile_run(tmp_path):
    s = preset("fig4").replace(profile__times="30", profile__n_x=11, spectral__n_delta=5)
    files = run_scenario(s, tmp_path, deterministic=True)
    names = {f.name for f in files}
    assert "fig4_profile_t30.dat" in names and "fig4_spectral_x0.dat" in names
    data = np.loadtxt(tmp_path / "fig4_profile_t30.dat")
    assert data.shape == (11, 3)


@pytest.mark.parametrize("before", [True, False])
def test_global_flags_either_side_of_subcommand(tmp_path, monkeypatch, before):
    monkeypatch.chdir(tmp_path)
    flags = ["--out-dir", str(tmp_path / "o"), "--deterministic"]
    argv = flags + ["preset", "fig1", "--run"] if before else ["preset", "fig1", "--run"] + flags
    assert main(argv) == 0
    assert (tmp_path / "o" / "fig1_summary.txt").exists()
    assert not list(tmp_path.glob("*.dat"))
    assert "# generated" not in (tmp_path / "o" / "fig1_summary.txt").read_text()
