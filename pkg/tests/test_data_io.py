"""File formats, synthetic data generators and the Rabi calibration helper."""

import numpy as np
import pytest

from odmrkit.data_io import (
    SideResonance,
    Spectrum,
    fit_rabi_calibration,
    read_fit_report,
    read_grid,
    read_spectrum,
    synth_grid,
    synth_spectrum,
    write_fit_report,
    write_grid,
    write_map_cells,
    write_map_matrix,
    write_spectrum,
)
from odmrkit.errors import InsufficientData, ParseError, SchemaError
from odmrkit.fitting import fit_spectrum, global_width_fit
from odmrkit.lineshape import (
    APModelParams,
    ContrastModelParams,
    HyperfineModel,
    WidthModelParams,
    a_of_p,
    contrast_model,
    contrast_to_amplitude,
    total_width_model,
    triple_lorentzian,
)
from odmrkit.sensitivity import SensitivityModel, log_grid, sensitivity_map

TRUTH = HyperfineModel(amplitude=0.008, center_hz=2870.0, hwhm_hz=2.0, splitting_hz=2.2)
CONTRAST = ContrastModelParams(theta=22.9e-3, g1_over_c_mw=0.71, g1g2_us2=0.0047)


def width_params(powers):
    return WidthModelParams(
        dnu_inh_hz=3.08,
        ratio_g1_g2=0.0014,
        a_over_g2=tuple(a_of_p(APModelParams(0.5, 0.5, 0.074), p) for p in powers),
        c_over_g2=0.018,
        p0_mw=39.0,
        f0_hz=1.0,
    )


def test_spectrum_roundtrip_is_bit_exact(tmp_path):
    spec = synth_spectrum(
        TRUTH, noise_rel=0.002, seed=3, power_mw=7.0, rabi_hz=1.1, sample_id="S5"
    )
    path = tmp_path / "spec.tsv"
    write_spectrum(spec, path)
    back = read_spectrum(path)
    assert np.array_equal(spec.freq_mhz, back.freq_mhz)
    assert np.array_equal(spec.signal, back.signal)
    assert np.array_equal(spec.sigma, back.sigma)
    assert back.power_mw == 7.0
    assert back.rabi_hz == 1.1
    assert back.sample_id == "S5"


def test_spectrum_roundtrip_without_metadata(tmp_path):
    spec = synth_spectrum(TRUTH, noise_rel=0.001, seed=1)
    path = tmp_path / "spec.tsv"
    write_spectrum(spec, path)
    back = read_spectrum(path)
    assert back.power_mw is None
    assert back.rabi_hz is None
    assert back.sample_id is None
    assert np.array_equal(spec.signal, back.signal)


def test_grid_roundtrip_is_bit_exact(tmp_path):
    powers = np.geomspace(0.02, 500.0, 5)
    grid = synth_grid(
        width_params(powers),
        CONTRAST,
        powers,
        np.geomspace(0.05, 2.5, 4),
        noise_width_rel=0.02,
        noise_amp_rel=0.03,
        seed=5,
    )
    path = tmp_path / "grid.tsv"
    write_grid(grid, path)
    back = read_grid(path)
    for field in (
        "power_mw",
        "rabi_hz",
        "width_hz",
        "width_sigma",
        "amplitude",
        "amplitude_sigma",
    ):
        assert np.array_equal(getattr(grid, field), getattr(back, field))


def test_fit_report_roundtrip_including_inf_ci(tmp_path):
    powers = np.geomspace(0.02, 500.0, 12)
    grid = synth_grid(
        width_params(powers),
        CONTRAST,
        powers,
        np.geomspace(0.05, 2.5, 8),
        noise_width_rel=0.02,
        noise_amp_rel=0.03,
        seed=11,
    )
    report = global_width_fit(grid)
    assert any(np.isinf(v) for v in report.ci68.values())
    path = tmp_path / "report.txt"
    write_fit_report(report, path)
    back = read_fit_report(path)
    assert back.params == report.params
    assert back.ci68 == report.ci68
    assert back.flags == report.flags
    assert back.cost == report.cost
    assert back.residual_rms == report.residual_rms
    assert back.n_points == report.n_points
    assert back.n_iter == report.n_iter
    assert back.converged == report.converged
    assert back.excluded_ranges == report.excluded_ranges


def test_fit_report_roundtrip_with_excluded_ranges(tmp_path):
    spec = synth_spectrum(TRUTH, noise_rel=0.002, seed=3)
    report = fit_spectrum(spec)
    assert len(report.excluded_ranges) == 2
    path = tmp_path / "report.txt"
    write_fit_report(report, path)
    back = read_fit_report(path)
    assert back.excluded_ranges == report.excluded_ranges
    assert back.params == report.params


def spectrum_lines(tmp_path):
    spec = synth_spectrum(TRUTH, noise_rel=0.002, seed=3)
    path = tmp_path / "base.tsv"
    write_spectrum(spec, path)
    return path.read_text().splitlines()


def reread(tmp_path, lines):
    path = tmp_path / "edited.tsv"
    path.write_text("\n".join(lines) + "\n")
    return read_spectrum(path)


def test_parse_error_reports_line_and_column(tmp_path):
    lines = spectrum_lines(tmp_path)
    lines[10] = "2830.45 not_a_number 0.002"
    with pytest.raises(ParseError) as err:
        reread(tmp_path, lines)
    assert "line 11" in str(err.value)
    assert "column" in str(err.value)


def test_parse_error_on_short_row_and_nonfinite(tmp_path):
    lines = spectrum_lines(tmp_path)
    hdr = next(i for i, l in enumerate(lines) if not l.startswith("#"))
    row = lines[hdr + 3].split()
    short = lines.copy()
    short[hdr + 3] = f"{row[0]} {row[1]}"
    with pytest.raises(ParseError, match="expected 3 columns"):
        reread(tmp_path, short)
    nonfinite = lines.copy()
    nonfinite[hdr + 3] = f"{row[0]} nan {row[2]}"
    with pytest.raises(ParseError, match="non-finite"):
        reread(tmp_path, nonfinite)


def test_schema_error_on_wrong_columns(tmp_path):
    lines = spectrum_lines(tmp_path)
    hdr = next(i for i, l in enumerate(lines) if not l.startswith("#"))
    lines[hdr] = "freq_mhz signal noise"
    with pytest.raises(SchemaError, match="expected columns"):
        reread(tmp_path, lines)


def test_schema_error_on_empty_unsorted_or_bad_sigma(tmp_path):
    lines = spectrum_lines(tmp_path)
    hdr = next(i for i, l in enumerate(lines) if not l.startswith("#"))
    with pytest.raises(SchemaError, match="no data rows"):
        reread(tmp_path, lines[: hdr + 1])
    swapped = lines.copy()
    swapped[hdr + 1], swapped[hdr + 2] = swapped[hdr + 2], swapped[hdr + 1]
    with pytest.raises(SchemaError, match="strictly increasing"):
        reread(tmp_path, swapped)
    negsig = lines.copy()
    row = negsig[hdr + 3].split()
    negsig[hdr + 3] = f"{row[0]} {row[1]} -0.002"
    with pytest.raises(SchemaError, match="sigma must be positive"):
        reread(tmp_path, negsig)


def test_read_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        read_spectrum(tmp_path / "nope.tsv")


def test_synth_spectrum_deterministic_per_seed():
    a = synth_spectrum(TRUTH, noise_rel=0.01, seed=42)
    b = synth_spectrum(TRUTH, noise_rel=0.01, seed=42)
    c = synth_spectrum(TRUTH, noise_rel=0.01, seed=43)
    assert np.array_equal(a.signal, b.signal)
    assert not np.array_equal(a.signal, c.signal)


def test_synth_spectrum_noiseless_matches_model():
    spec = synth_spectrum(TRUTH, noise_rel=0.0, seed=0)
    assert np.array_equal(spec.signal, triple_lorentzian(TRUTH, spec.freq_mhz))
    # The quoted sigma never collapses to zero.
    assert np.all(spec.sigma >= 1e-6)


def test_synth_spectrum_side_resonances_show_up():
    side = SideResonance(amplitude=0.004)
    with_side = synth_spectrum(TRUTH, side=side, noise_rel=0.0, seed=0)
    without = synth_spectrum(TRUTH, noise_rel=0.0, seed=0)
    delta = without.signal - with_side.signal
    at_side = np.abs(with_side.freq_mhz - (2870.0 + 33.0)) < 1.0
    far = np.abs(np.abs(with_side.freq_mhz - 2870.0) - 16.0) < 1.0
    assert np.max(delta[at_side]) > 0.003
    assert np.max(np.abs(delta[far])) < 5e-4


def test_synth_grid_noiseless_matches_models():
    powers = np.geomspace(0.02, 500.0, 3)
    rabis = np.geomspace(0.05, 2.5, 2)
    wp = width_params(powers)
    grid = synth_grid(wp, CONTRAST, powers, rabis)
    k = 0
    for i, p in enumerate(powers):
        for r in rabis:
            assert grid.power_mw[k] == p
            assert grid.rabi_hz[k] == r
            w = total_width_model(wp, p, i, r)
            assert grid.width_hz[k] == w
            amp = contrast_to_amplitude(contrast_model(CONTRAST, p, r), w / 2.0)
            assert grid.amplitude[k] == amp
            k += 1


def test_synth_grid_requires_matching_a_entries():
    powers = np.geomspace(0.02, 500.0, 4)
    with pytest.raises(ValueError, match="one a_over_g2 entry per power"):
        synth_grid(width_params(powers[:3]), CONTRAST, powers, np.array([0.5, 1.0, 2.0]))


def test_spectrum_validation():
    with pytest.raises(ValueError, match="equal length"):
        Spectrum(np.array([1.0, 2.0]), np.array([1.0]), np.array([0.1, 0.1]))
    with pytest.raises(ValueError, match="strictly increasing"):
        Spectrum(np.array([2.0, 1.0]), np.ones(2), np.full(2, 0.1))
    with pytest.raises(ValueError, match="sigma must be positive"):
        Spectrum(np.array([1.0, 2.0]), np.ones(2), np.array([0.1, -0.1]))


def test_rabi_calibration_exact_square_root_law():
    cal = fit_rabi_calibration([(1.0, 0.5), (4.0, 1.0), (9.0, 1.5)])
    assert cal.k_mhz_per_sqrt_mw == pytest.approx(0.5, abs=1e-15)
    assert cal.n_records == 3
    assert cal.residual_rms == 0.0
    assert cal.max_abs_residual == 0.0


def test_rabi_calibration_least_squares_slope():
    records = [(1.0, 0.52), (4.0, 0.98), (9.0, 1.55)]
    cal = fit_rabi_calibration(records)
    p = np.array([r[0] for r in records])
    f = np.array([r[1] for r in records])
    want = float(np.sum(f * np.sqrt(p)) / np.sum(p))
    assert abs(cal.k_mhz_per_sqrt_mw - want) < 1e-15
    assert cal.max_abs_residual >= cal.residual_rms > 0.0


def test_rabi_calibration_input_validation():
    with pytest.raises(InsufficientData):
        fit_rabi_calibration([(1.0, 0.5)])
    with pytest.raises(ValueError):
        fit_rabi_calibration([(1.0, 0.5), (4.0, -1.0)])
    with pytest.raises(ValueError):
        fit_rabi_calibration([(1.0,), (4.0,)])


def sensitivity_model():
    return SensitivityModel(
        dnu_inh_hz=3.08,
        ratio_g1_g2=0.0014,
        ap=APModelParams(0.5, 0.5, 0.074),
        c_over_g2=0.018,
        p0_mw=39.0,
        f0_hz=1.0,
        contrast=CONTRAST,
    )


def test_map_cell_file_lists_every_cell(tmp_path):
    smap = sensitivity_map(sensitivity_model(), log_grid(0.02, 500.0, 4), log_grid(0.05, 2.5, 3))
    path = tmp_path / "cells.tsv"
    write_map_cells(smap, path)
    lines = path.read_text().splitlines()
    data = [l for l in lines if l and not l.startswith("#") and not l[0].isalpha()]
    assert len(data) == 12
    first = data[0].split()
    assert float(first[0]) == 0.02
    assert float(first[1]) == 0.05
    assert float(first[2]) == smap.sensitivity[0, 0]
    # The optimum is quoted in the header comments.
    assert any("argmin_power_mw = 500.0" in l for l in lines)


def test_map_matrix_file_shape_and_values(tmp_path):
    smap = sensitivity_map(sensitivity_model(), log_grid(0.02, 500.0, 4), log_grid(0.05, 2.5, 3))
    path = tmp_path / "matrix.tsv"
    write_map_matrix(smap, path)
    rows = [
        [float(v) for v in l.split()]
        for l in path.read_text().splitlines()
        if l and not l.startswith("#")
    ]
    assert np.array_equal(np.array(rows), smap.sensitivity)


def test_map_cell_file_spells_out_infinities(tmp_path):
    smap = sensitivity_map(
        sensitivity_model(), log_grid(0.02, 500.0, 3), np.array([1e-300, 0.6])
    )
    path = tmp_path / "cells.tsv"
    write_map_cells(smap, path)
    body = path.read_text()
    assert " inf" in body
