import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from omx import experiments as ex
from omx.calibration import synthetic_dataset, write_measurements
from omx.cli import main
from omx.config import ConfigError, RunConfig, sweep_values
from omx.model import TWO_PI

SMALL = """
efficiency.sweep_points = 4
transient.sweep_stop = 4.0
transient.sweep_points = 5
spectral.sweep_start = 100.9e6
spectral.sweep_stop = 101.1e6
spectral.sweep_points = 5
probe.drive_duration_us = 20
probe.sweep_points = 4
ringdown.sweep_stop = 10
ringdown.sweep_points = 4
ringdown.spectrum_record_us = 40
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


# -- configuration -------------------------------------------------------------------------


def test_default_round_trip():
    text = RunConfig().dumps()
    assert RunConfig.loads(text).dumps() == text


@given(
    k1=st.floats(0.01, 5.0),
    pts=st.integers(2, 100),
    p2=st.lists(st.floats(0.0, 50.0), min_size=1, max_size=4),
    plot=st.booleans(),
)
def test_round_trip_property(k1, pts, p2, plot):
    cfg = RunConfig()
    cfg.calibration.k1_per_mw = k1
    cfg.efficiency.sweep_points = pts
    cfg.efficiency.p2_mw = p2
    cfg.efficiency.eta_product = [0.2] * len(p2)
    cfg.run.plot = plot
    text = cfg.dumps()
    assert RunConfig.loads(text).dumps() == text


def test_defaults_match_device():
    cfg = RunConfig()
    p = cfg.system_params(5.0, 15.0)
    assert p.c1 == pytest.approx(1.0) and p.c2 == pytest.approx(1.0)
    assert p.mech.omega_m == pytest.approx(TWO_PI * 101e6)
    assert p.mode1.kappa_total == pytest.approx(TWO_PI * 30e6)
    assert cfg.calibration.eta_product == pytest.approx(0.45**2)


def test_comments_and_units():
    cfg = RunConfig.loads("# comment\nsystem.gamma_m_hz = 16e3  # Hz\n")
    assert cfg.system_params().mech.gamma_m == pytest.approx(TWO_PI * 16e3)


@pytest.mark.parametrize(
    "text,path",
    [
        ("system.nonsense = 1", "system.nonsense"),
        ("bogus.key = 1", "bogus.key"),
        ("pulse.dt_ns = -1", "pulse.dt_ns"),
        ("efficiency.sweep_points = 1", "efficiency.sweep_points"),
        ("detection.window = kaiser", "detection.window"),
        ("probe.cooperativity = 0.3", "probe.cooperativity"),
        ("system.eta1 = 1.5", "system"),
        ("signal.power_mw = abc", "signal.power_mw"),
        ("efficiency.eta_product = 0.2", "efficiency.eta_product"),
    ],
)
def test_invalid_config_names_field(text, path):
    with pytest.raises(ConfigError) as err:
        RunConfig.loads(text)
    assert err.value.path == path
    assert path in str(err.value)


def test_sweep_values():
    cfg = RunConfig()
    assert sweep_values(cfg.efficiency).tolist() == pytest.approx(np.linspace(0, 30, 31).tolist())
    cfg.efficiency.sweep_scale = "log"
    cfg.efficiency.sweep_start = 1.0
    vals = sweep_values(cfg.efficiency)
    assert vals[0] == pytest.approx(1.0) and vals[-1] == pytest.approx(30.0)
    assert np.allclose(np.diff(np.log(vals)), np.log(30) / 30)


def test_signal_amplitude_is_photon_flux():
    cfg = RunConfig()
    p = cfg.system_params()
    flux = 0.2e-3 / (1.054571817e-34 * TWO_PI * 299792458.0 / 800e-9)
    assert cfg.signal_amplitude(p) ** 2 == pytest.approx(flux, rel=1e-12)


# -- scenario runners (trivial limits) ------------------------------------------------------------


def test_zero_drive_gives_zero_efficiency():
    cfg = RunConfig.loads(SMALL)
    cfg.efficiency.sweep_stop = 0.0
    cfg.efficiency.sweep_start = 0.0
    for rows in ex.efficiency_sweep(cfg).values():
        assert all(chi_ss == 0 and chi_g == 0 for _, chi_ss, chi_g in rows)


def test_zero_signal_gives_zero_transient():
    cfg = RunConfig.loads(SMALL)
    cfg.signal.power_mw = 0.0
    for rows in ex.transient(cfg).values():
        assert all(p == 0 for _, p in rows)


def test_probe_zero_p1_gives_zero_intensity():
    cfg = RunConfig.loads(SMALL)
    p1_rows, p2_rows = ex.mechanical_probe(cfg)
    peak = max(v for _, v in p1_rows)
    # only the long-decayed optical remnant of the signal pulse remains
    assert p1_rows[0][0] == 0.0 and p1_rows[0][1] <= 1e-12 * peak
    assert all(v > 0 for _, v in p1_rows[1:])


def test_spectral_far_off_resonance_suppressed():
    cfg = RunConfig.loads(SMALL)
    cfg.spectral.sweep_start = 101e6
    cfg.spectral.sweep_stop = 131e6
    cfg.spectral.sweep_points = 2
    cfg.spectral.durations_us = [6.0]
    ((on, p_on), (off, p_off)) = ex.spectral_response(cfg)[6.0]
    assert p_off < 1e-4 * p_on


def test_parallel_map_preserves_order():
    assert ex.parallel_map(lambda x: x * x, list(range(50)), workers=4) == [x * x for x in range(50)]


# -- command line ----------------------------------------------------------------------------


def test_version_and_dump(capsys):
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0
    assert capsys.readouterr().out.startswith("omx ")
    assert main(["--dump-default-config"]) == 0
    text = capsys.readouterr().out
    assert RunConfig.loads(text).dumps() == RunConfig().dumps()


def test_no_subcommand_is_config_error(capsys):
    assert main([]) == 2


@pytest.mark.parametrize("cmd", ["efficiency-sweep", "transient", "spectral-response", "mechanical-probe", "ringdown"])
def test_subcommands_byte_identical(tmp_path, small_cfg, cmd):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert main([cmd, "--config", str(small_cfg), "--out", str(d), "--seed", "7", "--workers", "3"]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1] and outs[0]
    for name, data in outs[0].items():
        if name.endswith(".csv"):
            assert b"\r" not in data and data.endswith(b"\n")


def test_csv_headers(tmp_path, small_cfg):
    assert main(["mechanical-probe", "--config", str(small_cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "mech_probe_p1_sweep.csv").read_text().startswith("p1_mw,mech_intensity\n")
    assert (tmp_path / "mech_probe_p2_sweep.csv").read_text().startswith("p2_mw,mech_intensity\n")
    assert main(["efficiency-sweep", "--config", str(small_cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "efficiency_p2_21mw.csv").read_text().startswith("p1_mw,chi_steady,chi_gated\n")


def test_plot_output_deterministic(tmp_path, small_cfg):
    pytest.importorskip("matplotlib")
    svgs = []
    for k in range(2):
        d = tmp_path / f"p{k}"
        assert main(["transient", "--config", str(small_cfg), "--out", str(d), "--plot"]) == 0
        svgs.append((d / "transient_6us.svg").read_bytes())
    assert svgs[0] == svgs[1]


def test_calibrate_command(tmp_path):
    data = tmp_path / "data.csv"
    write_measurements(synthetic_dataset(0.2, 1 / 15, 0.2025), data)
    assert main(["calibrate", str(data), "--out", str(tmp_path)]) == 0
    report = dict(line.split("=") for line in (tmp_path / "calibration_report.txt").read_text().splitlines())
    assert float(report["k1_per_mw"]) == pytest.approx(0.2, rel=1e-4)
    assert float(report["k2_per_mw"]) == pytest.approx(1 / 15, rel=1e-4)
    assert float(report["eta_product"]) == pytest.approx(0.2025, rel=1e-4)
    assert (tmp_path / "calibration_covariance.csv").exists()


def test_calibrate_missing_header_exit_code(tmp_path):
    data = tmp_path / "bad.csv"
    data.write_text("5.0,0.0,mech_intensity,1.0,\n")
    assert main(["calibrate", str(data), "--out", str(tmp_path)]) == 2
    assert main(["calibrate", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2


def test_calibrate_fit_failure_exit_code(tmp_path):
    data = tmp_path / "few.csv"
    write_measurements(synthetic_dataset(0.2, 0.1, p1_grid=np.array([0.0, 5.0])), data)
    assert main(["calibrate", str(data), "--out", str(tmp_path)]) == 4


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("system.nonsense = 3\n")
    assert main(["transient", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_step_size_failure_exit_code(tmp_path):
    cfg = tmp_path / "coarse.cfg"
    cfg.write_text("pulse.dt_ns = 5\n")
    assert main(["transient", "--config", str(cfg), "--out", str(tmp_path)]) == 3


def test_ringdown_zero_excitation_is_clean_fit_error(tmp_path, small_cfg, capsys):
    cfg = tmp_path / "zero.cfg"
    cfg.write_text(small_cfg.read_text() + "ringdown.initial_phonons = 0\n")
    assert main(["ringdown", "--config", str(cfg), "--out", str(tmp_path)]) == 4
    err = capsys.readouterr().err
    assert "fit failure" in err and "Traceback" not in err


def test_ringdown_lifetime_and_linewidth(tmp_path, small_cfg):
    cfg = RunConfig.load(small_cfg)
    cfg.ringdown.spectrum_record_us = RunConfig().ringdown.spectrum_record_us
    cfg.system.gamma_m_hz = 16e3
    res = ex.ringdown(cfg)
    assert res.exp_fit.lifetime == pytest.approx(1 / (TWO_PI * 16e3), rel=0.01)
    assert res.lorentz.fwhm == pytest.approx(16e3, rel=0.01)
    assert res.consistency < 0.05
    assert math.isfinite(res.lorentz.center)


def test_bundled_dataset_calibrates(tmp_path):
    data = Path(__file__).resolve().parents[1] / "data" / "calibration_synthetic.csv"
    assert main(["calibrate", str(data), "--out", str(tmp_path)]) == 0
    report = dict(line.split("=") for line in (tmp_path / "calibration_report.txt").read_text().splitlines())
    assert float(report["k1_per_mw"]) == pytest.approx(0.2, rel=0.03)
    assert float(report["k2_per_mw"]) == pytest.approx(1 / 15, rel=0.03)
