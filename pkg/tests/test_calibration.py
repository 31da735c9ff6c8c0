import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omx.calibration import (
    CSV_HEADER,
    CalibrationError,
    InsufficientDataError,
    MeasurementRow,
    SchemaError,
    calibrate,
    efficiency_from_output_power,
    fit_eta,
    fit_proportionality,
    load_measurements,
    predict_efficiency_curve,
    synthetic_dataset,
    write_measurements,
)
from omx.model import TWO_PI, optical_power, photon_flux

K1, K2 = 0.2, 1.0 / 15.0


def load(text):
    return load_measurements(io.StringIO(text))


# -- schema ----------------------------------------------------------------------------


def test_header_only_is_empty():
    assert load(CSV_HEADER + "\n") == []


def test_row_without_sigma():
    (row,) = load(CSV_HEADER + "\n5.0,0.0,mech_intensity,1.0,\n")
    assert row == MeasurementRow(5.0, 0.0, "mech_intensity", 1.0, None)


def test_unknown_quantity_names_line():
    with pytest.raises(SchemaError) as err:
        load(CSV_HEADER + "\n1,0,mech_intensity,1,\n2,0,phase,1,\n")
    assert err.value.line == 3
    assert "line 3" in str(err.value)


@pytest.mark.parametrize(
    "body,line,column",
    [
        ("1,0,efficiency,abc,", 2, "value"),
        ("-1,0,efficiency,0.1,", 2, "p1_mw"),
        ("1,-2,efficiency,0.1,", 2, "p2_mw"),
        ("1,0,efficiency,0.1,0", 2, "sigma"),
        ("1,0,efficiency,nan,", 2, "value"),
    ],
)
def test_malformed_rows(body, line, column):
    with pytest.raises(SchemaError) as err:
        load(CSV_HEADER + "\n" + body + "\n")
    assert (err.value.line, err.value.column) == (line, column)


def test_wrong_field_count_and_missing_header():
    with pytest.raises(SchemaError):
        load(CSV_HEADER + "\n1,0,efficiency\n")
    with pytest.raises(SchemaError) as err:
        load("1,0,efficiency,0.1,\n")
    assert err.value.line == 1
    with pytest.raises(SchemaError):
        load("")


def test_blank_lines_skipped_and_count_preserved():
    rows = load(CSV_HEADER + "\n1,0,efficiency,0.1,\n\n2,0,efficiency,0.2,0.01\n")
    assert len(rows) == 2 and rows[1].sigma == 0.01


def test_write_load_round_trip(tmp_path):
    rows = synthetic_dataset(K1, K2, 0.2025)
    rows.append(MeasurementRow(1.0, 2.0, "output_power", 1e-9, 1e-10))
    write_measurements(rows, tmp_path / "d.csv")
    assert load_measurements(tmp_path / "d.csv") == rows


def test_measurement_row_invariants():
    with pytest.raises(ValueError):
        MeasurementRow(-1.0, 0.0, "efficiency", 0.1)
    with pytest.raises(ValueError):
        MeasurementRow(1.0, 0.0, "efficiency", float("inf"))
    with pytest.raises(ValueError):
        MeasurementRow(1.0, 0.0, "efficiency", 0.1, -1.0)


def test_output_power_converted_to_efficiency():
    w_in = TWO_PI * 299792458.0 / 800e-9
    w_out = TWO_PI * 299792458.0 / 637e-9
    out_w = optical_power(0.05 * photon_flux(0.2e-3, w_in), w_out)
    (row,) = efficiency_from_output_power([MeasurementRow(5, 5, "output_power", out_w)], 0.2, 800e-9, 637e-9)
    assert row.quantity == "efficiency"
    assert row.value == pytest.approx(0.05, rel=1e-12)


# -- proportionality fit -------------------------------------------------------------------


def test_noiseless_recovery():
    fit = fit_proportionality(synthetic_dataset(K1, K2))
    assert fit.k1 == pytest.approx(K1, rel=1e-6)
    assert fit.k2 == pytest.approx(K2, rel=1e-6)
    assert fit.residual_norm < 1e-8
    assert fit.covariance.shape == (2, 2)


def test_scale_invariance():
    a = fit_proportionality(synthetic_dataset(K1, K2, scale=1.0))
    b = fit_proportionality(synthetic_dataset(K1, K2, scale=10.0))
    assert (b.k1, b.k2) == pytest.approx((a.k1, a.k2), rel=1e-9)
    assert b.scale == pytest.approx(10 * a.scale, rel=1e-9)


@pytest.mark.parametrize("seed", [1, 2])
def test_noisy_recovery(seed):
    fit = calibrate(synthetic_dataset(K1, K2, 0.2025, noise=0.05, seed=seed))
    assert fit.k1 == pytest.approx(K1, rel=0.10)
    assert fit.k2 == pytest.approx(K2, rel=0.10)
    assert fit.eta_product == pytest.approx(0.2025, rel=0.10)


def test_duplicate_rows_same_result():
    rows = synthetic_dataset(K1, K2, noise=0.03, seed=5)
    a = fit_proportionality(rows)
    b = fit_proportionality(rows + rows)
    assert (b.k1, b.k2) == pytest.approx((a.k1, a.k2), rel=1e-8)


def test_file_order_invariance():
    rows = synthetic_dataset(K1, K2, noise=0.03, seed=6)
    n = len(rows) // 2
    a = fit_proportionality(rows)
    b = fit_proportionality(rows[n:] + rows[:n])
    c = fit_proportionality(rows[::-1])
    assert (b.k1, b.k2) == pytest.approx((a.k1, a.k2), rel=1e-8)
    assert (c.k1, c.k2) == pytest.approx((a.k1, a.k2), rel=1e-8)


def test_insufficient_data():
    rows = synthetic_dataset(K1, K2, p2_grid=np.array([0.0, 3.0, 6.0]))
    with pytest.raises(InsufficientDataError):
        fit_proportionality(rows)
    with pytest.raises(InsufficientDataError):
        fit_proportionality([r for r in synthetic_dataset(K1, K2) if r.p2 > 0])


def test_weighted_fit_uses_sigma():
    rows = synthetic_dataset(K1, K2)
    weighted = [MeasurementRow(r.p1, r.p2, r.quantity, r.value, 0.05 * r.value + 1e-6) for r in rows]
    fit = fit_proportionality(weighted)
    assert (fit.k1, fit.k2) == pytest.approx((K1, K2), rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(k1=st.floats(0.05, 1.0), k2=st.floats(0.05, 1.0), eta=st.floats(0.1, 0.9))
def test_round_trip_property(k1, k2, eta):
    fit = calibrate(synthetic_dataset(k1, k2, eta))
    assert fit.k1 == pytest.approx(k1, rel=0.01)
    assert fit.k2 == pytest.approx(k2, rel=0.01)
    assert fit.eta_product == pytest.approx(eta, rel=0.005)


# -- eta fit --------------------------------------------------------------------------------


@pytest.mark.parametrize("eta", [0.2025, 0.25])
def test_eta_recovery(eta):
    rows = synthetic_dataset(K1, K2, eta)
    assert fit_eta(rows, fit_proportionality(rows)) == pytest.approx(eta, rel=0.005)


def test_eta_errors():
    rows = synthetic_dataset(K1, K2)
    cal = fit_proportionality(rows)
    with pytest.raises(InsufficientDataError):
        fit_eta(rows, cal)
    zeros = rows + [MeasurementRow(p, 2.0, "efficiency", 0.0) for p in (1.0, 5.0, 10.0)]
    with pytest.raises(CalibrationError):
        fit_eta(zeros, cal)
    with pytest.raises(CalibrationError):
        fit_eta(synthetic_dataset(K1, K2, 1.4), cal)


def test_report_and_covariance_format():
    fit = calibrate(synthetic_dataset(K1, K2, 0.2025, noise=0.02, seed=3))
    keys = [line.split("=")[0] for line in fit.report().splitlines()]
    assert keys[:3] == ["k1_per_mw", "k2_per_mw", "eta_product"]
    lines = fit.covariance_csv().splitlines()
    assert lines[0] == "param,k1_per_mw,k2_per_mw" and len(lines) == 3


# -- predicted curves -------------------------------------------------------------------------


def test_predict_curve_examples():
    fit = calibrate(synthetic_dataset(K1, K2, 0.2025))
    assert all(chi == 0 for _, chi in predict_efficiency_curve(fit, np.linspace(0, 30, 31), 0.0))
    grid = np.linspace(0.0, 40.0, 4001)
    curve = predict_efficiency_curve(fit, grid, 15.0)
    assert curve[int(np.argmax([c for _, c in curve]))][0] == pytest.approx(10.0, abs=0.01 + 1e-3)
    knees = [grid[np.argmax([c for _, c in predict_efficiency_curve(fit, grid, p2)])] for p2 in (2, 11, 21)]
    assert knees == sorted(knees) and knees[0] < knees[-1]
    with pytest.raises(ValueError):
        predict_efficiency_curve(fit_proportionality(synthetic_dataset(K1, K2)), grid, 2.0)


@given(p1=st.floats(0, 1e3), p2=st.floats(0, 1e3), eta=st.floats(0, 1))
def test_predict_curve_bounded(p1, p2, eta):
    fit = fit_proportionality(synthetic_dataset(K1, K2))
    ((_, chi),) = predict_efficiency_curve(fit, [p1], p2, eta)
    assert 0 <= chi <= eta * (1 + 1e-12)
