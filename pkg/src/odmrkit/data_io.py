"""File formats, synthetic data generation and the Rabi calibration.

All files are UTF-8 text: ``# key = value`` header lines, one
whitespace-separated column-name line, then whitespace-separated numeric
columns. Floats are written with ``repr`` so write/read round-trips preserve
values bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constants import SIDE_RESONANCE_OFFSET_MHZ
from .errors import InsufficientData, ParseError, SchemaError
from .fitting import FitReport, MeasurementGrid
from .lineshape import (
    ContrastModelParams,
    HyperfineModel,
    WidthModelParams,
    contrast_model,
    contrast_to_amplitude,
    total_width_model,
    triple_lorentzian,
)
from .sensitivity import SensitivityMap

_SPECTRUM_COLUMNS = ("freq_mhz", "signal", "sigma")
_GRID_COLUMNS = (
    "power_mw",
    "rabi_mhz",
    "width_mhz",
    "width_sigma",
    "amplitude",
    "amplitude_sigma",
)


@dataclass(frozen=True)
class Spectrum:
    """One measured or synthesized ODMR trace, normalized to a unit baseline."""

    freq_mhz: np.ndarray
    signal: np.ndarray
    sigma: np.ndarray
    power_mw: float | None = None
    rabi_hz: float | None = None
    sample_id: str | None = None

    def __post_init__(self) -> None:
        for name in ("freq_mhz", "signal", "sigma"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.freq_mhz.ndim != 1:
            raise ValueError("spectrum columns must be one-dimensional")
        if not (self.freq_mhz.size == self.signal.size == self.sigma.size):
            raise ValueError("spectrum columns must have equal length")
        if self.freq_mhz.size < 2:
            raise ValueError("spectrum needs at least two points")
        if np.any(np.diff(self.freq_mhz) <= 0.0):
            raise ValueError("freq_mhz must be strictly increasing")
        if np.any(self.sigma <= 0.0):
            raise ValueError("sigma must be positive")
        for name in ("freq_mhz", "signal", "sigma"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} must be finite")

    @property
    def n_points(self) -> int:
        return int(self.freq_mhz.size)


@dataclass(frozen=True)
class SideResonance:
    """A pair of satellite dips offset symmetrically from the line center."""

    amplitude: float
    offset_hz: float = SIDE_RESONANCE_OFFSET_MHZ
    hwhm_hz: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.amplitude < 1.0:
            raise ValueError("amplitude must lie in [0, 1)")
        if not self.offset_hz > 0.0:
            raise ValueError("offset_hz must be positive")
        if self.hwhm_hz is not None and not self.hwhm_hz > 0.0:
            raise ValueError("hwhm_hz must be positive when given")


@dataclass(frozen=True)
class RabiCalibration:
    """Square-root calibration f_R = k * sqrt(P_mw) fitted through the origin."""

    k_mhz_per_sqrt_mw: float
    n_records: int
    residual_rms: float
    max_abs_residual: float


def fit_rabi_calibration(records) -> RabiCalibration:
    """Least-squares calibration from (mw_power_mw, rabi_hz) records."""
    data = np.asarray(list(records), dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("records must be (power, rabi) pairs")
    if data.shape[0] < 2:
        raise InsufficientData("Rabi calibration needs at least 2 records")
    if np.any(data <= 0.0):
        raise ValueError("calibration records must be positive")
    power, rabi = data[:, 0], data[:, 1]
    root = np.sqrt(power)
    k = float(np.sum(rabi * root) / np.sum(power))
    resid = rabi - k * root
    return RabiCalibration(
        k_mhz_per_sqrt_mw=k,
        n_records=int(data.shape[0]),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        max_abs_residual=float(np.max(np.abs(resid))),
    )


def synth_spectrum(
    truth: HyperfineModel,
    *,
    side: SideResonance | None = None,
    noise_rel: float = 0.0,
    seed: int = 0,
    span_hz: float = 80.0,
    n_points: int = 1601,
    power_mw: float | None = None,
    rabi_hz: float | None = None,
    sample_id: str | None = None,
) -> Spectrum:
    """Deterministically synthesize a hyperfine-triplet spectrum.

    Gaussian noise of relative scale ``noise_rel`` is drawn from a fresh
    generator seeded with ``seed``, so equal inputs give identical spectra.
    The sigma column carries the true noise scale, with a small floor for
    noise-free traces so weights stay finite.
    """
    if not span_hz > 0.0 or n_points < 2:
        raise ValueError("need a positive span and at least 2 points")
    if noise_rel < 0.0:
        raise ValueError("noise_rel must be non-negative")
    nu = np.linspace(truth.center_hz - span_hz / 2.0, truth.center_hz + span_hz / 2.0, n_points)
    signal = triple_lorentzian(truth, nu)
    if side is not None:
        g = side.hwhm_hz if side.hwhm_hz is not None else truth.hwhm_hz
        for direction in (-1.0, 1.0):
            d = nu - truth.center_hz - direction * side.offset_hz
            signal = signal - side.amplitude * g * g / (d * d + g * g)
    sigma_scale = max(noise_rel, 1e-6)
    if noise_rel > 0.0:
        rng = np.random.default_rng(seed)
        signal = signal + rng.normal(0.0, noise_rel, size=nu.size)
    return Spectrum(
        freq_mhz=nu,
        signal=signal,
        sigma=np.full(nu.size, sigma_scale),
        power_mw=power_mw,
        rabi_hz=rabi_hz,
        sample_id=sample_id,
    )


def synth_grid(
    width_params: WidthModelParams,
    contrast_params: ContrastModelParams,
    power_mw: np.ndarray,
    rabi_hz: np.ndarray,
    *,
    noise_width_rel: float = 0.0,
    noise_amp_rel: float = 0.0,
    seed: int = 0,
    splitting_hz: float | None = None,
) -> MeasurementGrid:
    """Synthesize a fitted-results grid directly from the global models.

    One row per (power, Rabi) combination; widths and amplitudes are
    perturbed by relative Gaussian noise and the sigma columns carry the
    true relative scales (with a floor for the noise-free case).
    """
    powers = np.asarray(power_mw, dtype=float)
    rabis = np.asarray(rabi_hz, dtype=float)
    if powers.size != len(width_params.a_over_g2):
        raise ValueError("width_params must carry one a_over_g2 entry per power")
    if noise_width_rel < 0.0 or noise_amp_rel < 0.0:
        raise ValueError("noise levels must be non-negative")
    rng = np.random.default_rng(seed)
    rows_p, rows_f, width, amp = [], [], [], []
    for k, p in enumerate(powers):
        for f in rabis:
            w = total_width_model(width_params, float(p), k, float(f))
            c = contrast_model(contrast_params, float(p), float(f))
            kwargs = {} if splitting_hz is None else {"splitting_hz": splitting_hz}
            a = contrast_to_amplitude(c, w / 2.0, **kwargs)
            rows_p.append(float(p))
            rows_f.append(float(f))
            width.append(w)
            amp.append(a)
    width = np.asarray(width)
    amp = np.asarray(amp)
    width_sigma = np.maximum(noise_width_rel, 1e-6) * width
    amp_sigma = np.maximum(noise_amp_rel, 1e-6) * amp
    if noise_width_rel > 0.0:
        width = width * (1.0 + noise_width_rel * rng.standard_normal(width.size))
    if noise_amp_rel > 0.0:
        amp = amp * (1.0 + noise_amp_rel * rng.standard_normal(amp.size))
    return MeasurementGrid(
        power_mw=np.asarray(rows_p),
        rabi_hz=np.asarray(rows_f),
        width_hz=width,
        width_sigma=width_sigma,
        amplitude=amp,
        amplitude_sigma=amp_sigma,
    )


def _format_float(x: float) -> str:
    return repr(float(x))


def _parse_float(token: str, line_no: int, column: int, *, finite: bool = True) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", line_no, column) from None
    if finite and not math.isfinite(value):
        raise ParseError(f"non-finite value: {token!r}", line_no, column)
    return value


def _token_column(line: str, index: int) -> int:
    """1-based character column where the index-th whitespace token starts."""
    pos = 0
    for _ in range(index + 1):
        while pos < len(line) and line[pos].isspace():
            pos += 1
        start = pos
        while pos < len(line) and not line[pos].isspace():
            pos += 1
    return start + 1


def _read_table(path: Path, expected_columns: tuple[str, ...]):
    """Shared reader: header dict, column check, float matrix."""
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    columns_seen = False
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.lstrip().startswith("#"):
                body = line.lstrip()[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    header[key.strip()] = value.strip()
                continue
            tokens = line.split()
            if not columns_seen:
                if tuple(tokens) != expected_columns:
                    raise SchemaError(
                        f"{path.name}: expected columns {' '.join(expected_columns)!r}, "
                        f"got {' '.join(tokens)!r} on line {line_no}"
                    )
                columns_seen = True
                continue
            if len(tokens) != len(expected_columns):
                raise ParseError(
                    f"expected {len(expected_columns)} columns, got {len(tokens)}",
                    line_no,
                    1,
                )
            rows.append(
                [
                    _parse_float(tok, line_no, _token_column(line, i))
                    for i, tok in enumerate(tokens)
                ]
            )
    if not columns_seen:
        raise SchemaError(f"{path.name}: missing column-name line")
    if not rows:
        raise SchemaError(f"{path.name}: no data rows")
    return header, np.asarray(rows, dtype=float)


def write_spectrum(spec: Spectrum, path) -> None:
    path = Path(path)
    lines = ["# odmr spectrum", "# format = spectrum/1"]
    if spec.power_mw is not None:
        lines.append(f"# power_mw = {_format_float(spec.power_mw)}")
    if spec.rabi_hz is not None:
        lines.append(f"# rabi_mhz = {_format_float(spec.rabi_hz)}")
    if spec.sample_id is not None:
        lines.append(f"# sample_id = {spec.sample_id}")
    lines.append(" ".join(_SPECTRUM_COLUMNS))
    for f, s, e in zip(spec.freq_mhz, spec.signal, spec.sigma):
        lines.append(f"{_format_float(f)} {_format_float(s)} {_format_float(e)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_spectrum(path) -> Spectrum:
    path = Path(path)
    header, data = _read_table(path, _SPECTRUM_COLUMNS)
    freq = data[:, 0]
    if np.any(np.diff(freq) <= 0.0):
        raise SchemaError(f"{path.name}: freq_mhz must be strictly increasing")
    if np.any(data[:, 2] <= 0.0):
        raise SchemaError(f"{path.name}: sigma must be positive")
    def opt(key: str) -> float | None:
        return float(header[key]) if key in header else None
    return Spectrum(
        freq_mhz=freq,
        signal=data[:, 1],
        sigma=data[:, 2],
        power_mw=opt("power_mw"),
        rabi_hz=opt("rabi_mhz"),
        sample_id=header.get("sample_id"),
    )


def write_grid(grid: MeasurementGrid, path) -> None:
    path = Path(path)
    lines = ["# odmr measurement grid", "# format = grid/1", " ".join(_GRID_COLUMNS)]
    for i in range(grid.n_points):
        lines.append(
            " ".join(
                _format_float(v)
                for v in (
                    grid.power_mw[i],
                    grid.rabi_hz[i],
                    grid.width_hz[i],
                    grid.width_sigma[i],
                    grid.amplitude[i],
                    grid.amplitude_sigma[i],
                )
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_grid(path) -> MeasurementGrid:
    path = Path(path)
    _, data = _read_table(path, _GRID_COLUMNS)
    try:
        return MeasurementGrid(
            power_mw=data[:, 0],
            rabi_hz=data[:, 1],
            width_hz=data[:, 2],
            width_sigma=data[:, 3],
            amplitude=data[:, 4],
            amplitude_sigma=data[:, 5],
        )
    except ValueError as exc:
        raise SchemaError(f"{path.name}: {exc}") from exc


def write_fit_report(report: FitReport, path) -> None:
    path = Path(path)
    lines = ["# odmr fit report", "# format = fitreport/1"]
    for name, value in report.params.items():
        lines.append(f"{name} = {value:.6g} ± {report.ci68[name]:.3g}")
    lines.append(
        f"# converged = {str(report.converged).lower()}, n_points = {report.n_points}, "
        f"iterations = {report.n_iter}"
    )
    lines.append("[machine]")
    for name, value in report.params.items():
        lines.append(f"param {name} {_format_float(value)} {_format_float(report.ci68[name])}")
    lines.append(f"stat cost {_format_float(report.cost)}")
    lines.append(f"stat residual_rms {_format_float(report.residual_rms)}")
    lines.append(f"stat n_points {report.n_points}")
    lines.append(f"stat n_iter {report.n_iter}")
    lines.append(f"stat converged {int(report.converged)}")
    for lo, hi in report.excluded_ranges:
        lines.append(f"excluded {_format_float(lo)} {_format_float(hi)}")
    for flag in report.flags:
        lines.append(f"flag {flag}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_fit_report(path) -> FitReport:
    path = Path(path)
    params: dict[str, float] = {}
    ci68: dict[str, float] = {}
    stats: dict[str, float] = {}
    excluded: list[tuple[float, float]] = []
    flags: list[str] = []
    in_machine = False
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line == "[machine]":
                in_machine = True
                continue
            if not in_machine:
                continue
            tokens = line.split()
            kind = tokens[0]
            if kind == "param":
                if len(tokens) != 4:
                    raise ParseError("param line needs: param name value ci", line_no, 1)
                params[tokens[1]] = _parse_float(tokens[2], line_no, _token_column(line, 2))
                ci68[tokens[1]] = _parse_float(
                    tokens[3], line_no, _token_column(line, 3), finite=False
                )
            elif kind == "stat":
                if len(tokens) != 3:
                    raise ParseError("stat line needs: stat name value", line_no, 1)
                stats[tokens[1]] = _parse_float(
                    tokens[2], line_no, _token_column(line, 2), finite=False
                )
            elif kind == "excluded":
                if len(tokens) != 3:
                    raise ParseError("excluded line needs two bounds", line_no, 1)
                excluded.append(
                    (
                        _parse_float(tokens[1], line_no, _token_column(line, 1)),
                        _parse_float(tokens[2], line_no, _token_column(line, 2)),
                    )
                )
            elif kind == "flag":
                flags.append(line[len("flag ") :])
            else:
                raise ParseError(f"unknown machine record {kind!r}", line_no, 1)
    if not in_machine:
        raise SchemaError(f"{path.name}: missing [machine] block")
    required = {"cost", "residual_rms", "n_points", "n_iter", "converged"}
    missing = required - set(stats)
    if missing:
        raise SchemaError(f"{path.name}: missing stats {sorted(missing)}")
    return FitReport(
        params=params,
        ci68=ci68,
        residual_rms=stats["residual_rms"],
        n_points=int(stats["n_points"]),
        converged=bool(stats["converged"]),
        cost=stats["cost"],
        n_iter=int(stats["n_iter"]),
        excluded_ranges=tuple(excluded),
        flags=tuple(flags),
    )


def write_map_cells(smap: SensitivityMap, path) -> None:
    """Column export of the sensitivity map; non-finite cells stay explicit."""
    path = Path(path)
    lines = [
        "# odmr sensitivity map",
        "# format = sensmap/1",
        f"# argmin_power_mw = {_format_float(smap.best_power_mw)}",
        f"# argmin_rabi_mhz = {_format_float(smap.best_rabi_hz)}",
        f"# min_sensitivity_t_per_rthz = {_format_float(smap.best_sensitivity)}",
        "power_mw rabi_mhz sensitivity_t_per_rthz",
    ]
    for i, p in enumerate(smap.power_mw):
        for j, r in enumerate(smap.rabi_hz):
            lines.append(
                f"{_format_float(p)} {_format_float(r)} "
                f"{_format_float(smap.sensitivity[i, j])}"
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_map_matrix(smap: SensitivityMap, path) -> None:
    """Matrix export: rows follow power_mw, columns follow rabi_mhz."""
    path = Path(path)
    lines = [
        "# odmr sensitivity matrix, T per sqrt(Hz)",
        "# rows: power_mw = " + " ".join(_format_float(p) for p in smap.power_mw),
        "# cols: rabi_mhz = " + " ".join(_format_float(r) for r in smap.rabi_hz),
    ]
    for i in range(smap.power_mw.size):
        lines.append(" ".join(_format_float(v) for v in smap.sensitivity[i]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
