"""Weighted nonlinear least squares and the fit campaigns built on it.

The engine is a Levenberg-Marquardt minimizer with an internal log
reparameterization for positivity-constrained parameters (results are
reported in natural units). Campaigns: single-spectrum hyperfine-triplet
fits with side-resonance exclusion, the global width surface over a
(power, Rabi) grid, the ensemble contrast model, and the saturating a(P)
curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import HYPERFINE_SPLITTING_MHZ, SIDE_RESONANCE_OFFSET_MHZ
from .errors import (
    InsufficientData,
    NoConvergence,
    SingularJacobian,
    UnidentifiableParameter,
)
from .lineshape import hyperfine_contrast
from .spin_models import TWO_PI

_RANK_RCOND = 1e-12  # singular values below rcond * s_max count as null directions


@dataclass(frozen=True)
class FitReport:
    """Named best-fit parameters with 68% confidence intervals and fit diagnostics."""

    params: dict[str, float]
    ci68: dict[str, float]
    residual_rms: float
    n_points: int
    converged: bool
    cost: float
    n_iter: int
    excluded_ranges: tuple[tuple[float, float], ...] = ()
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if set(self.params) != set(self.ci68):
            raise ValueError("params and ci68 must carry the same names")


@dataclass(frozen=True)
class MeasurementGrid:
    """Fitted width/amplitude results over a grid of (power, Rabi) settings."""

    power_mw: np.ndarray
    rabi_hz: np.ndarray
    width_hz: np.ndarray
    width_sigma: np.ndarray
    amplitude: np.ndarray
    amplitude_sigma: np.ndarray

    def __post_init__(self) -> None:
        arrays = {}
        for name in (
            "power_mw",
            "rabi_hz",
            "width_hz",
            "width_sigma",
            "amplitude",
            "amplitude_sigma",
        ):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        n = arrays["power_mw"].size
        if any(a.size != n for a in arrays.values()):
            raise ValueError("all grid columns must have equal length")
        if n == 0:
            raise InsufficientData("measurement grid is empty")
        for name in ("width_sigma", "amplitude_sigma"):
            if np.any(arrays[name] <= 0.0):
                raise ValueError(f"{name} entries must be positive")
        if np.any(arrays["width_hz"] <= 0.0):
            raise ValueError("width_hz entries must be positive")
        if np.any(arrays["power_mw"] <= 0.0) or np.any(arrays["rabi_hz"] <= 0.0):
            raise ValueError("power_mw and rabi_hz entries must be positive")
        pairs = list(zip(arrays["power_mw"].tolist(), arrays["rabi_hz"].tolist()))
        if len(set(pairs)) != n:
            raise ValueError("grid rows must have unique (power, rabi) pairs")

    @property
    def n_points(self) -> int:
        return int(self.power_mw.size)

    def unique_powers(self) -> np.ndarray:
        return np.unique(self.power_mw)

    def power_indices(self) -> np.ndarray:
        """Index of each row's power within the sorted unique power list."""
        return np.searchsorted(self.unique_powers(), self.power_mw)


@dataclass(frozen=True)
class SideResonanceExclusion:
    """Windows around the simultaneous NV/nitrogen spin-flip side resonances.

    Both windows are ``window_hz`` wide and centered ``delta_hz`` above and
    below the fitted line center.
    """

    delta_hz: float = SIDE_RESONANCE_OFFSET_MHZ
    window_hz: float = 20.0

    def __post_init__(self) -> None:
        if not self.delta_hz > 0.0 or not self.window_hz > 0.0:
            raise ValueError("delta_hz and window_hz must be positive")

    def windows(self, center_hz: float) -> tuple[tuple[float, float], tuple[float, float]]:
        half = self.window_hz / 2.0
        return (
            (center_hz - self.delta_hz - half, center_hz - self.delta_hz + half),
            (center_hz + self.delta_hz - half, center_hz + self.delta_hz + half),
        )


def finite_difference_jacobian(residual, x: np.ndarray, rel: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a residual vector, for fallback and checks."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(residual(x)).size
    jac = np.empty((n, x.size))
    for j in range(x.size):
        h = rel * max(abs(x[j]), 1e-8)
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.asarray(residual(xp)) - np.asarray(residual(xm))) / (2.0 * h)
    return jac


def least_squares(
    residual,
    init: dict[str, float],
    weights: np.ndarray | None = None,
    *,
    jacobian=None,
    positive: tuple[str, ...] = (),
    max_iter: int = 200,
    step_rtol: float = 1e-10,
    cost_rtol: float = 1e-12,
    absolute_sigma: bool = False,
) -> FitReport:
    """Minimize sum of (weights * residual(x))^2 with Levenberg-Marquardt damping.

    Parameters
    ----------
    residual : callable
        Maps the parameter vector (ordered as ``init``) to a residual array.
    init : dict
        Named starting values; insertion order fixes the parameter order.
    weights : array, optional
        Per-point weights, typically 1/sigma. Defaults to 1.
    jacobian : callable, optional
        Analytic d(residual)/d(params); finite differences when omitted.
    positive : tuple of str
        Parameters constrained positive via an internal log transform.
    absolute_sigma : bool
        When False (default) the covariance is scaled by the reduced
        chi-square, so confidence intervals track the observed scatter; when
        True the supplied weights are taken as exact 1/sigma.

    Raises
    ------
    NoConvergence
        Iteration budget exhausted while the fit was still improving.
    SingularJacobian
        Some parameter has an identically zero residual derivative at the
        starting point (named in the exception).
    """
    names = list(init)
    x = np.asarray([float(init[k]) for k in names], dtype=float)
    unknown = set(positive) - set(names)
    if unknown:
        raise ValueError(f"positive lists unknown parameters: {sorted(unknown)}")
    log_mask = np.asarray([k in positive for k in names])
    if np.any(log_mask & ~(x > 0.0)):
        bad = [k for k, m, v in zip(names, log_mask, x) if m and not v > 0.0]
        raise ValueError(f"positive parameters must start positive: {bad}")

    r = np.asarray(residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residual is not finite at the starting point")
    w = np.ones_like(r) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != r.shape or np.any(w <= 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be positive, finite and match the residual")

    jac = jacobian if jacobian is not None else (
        lambda xv: finite_difference_jacobian(residual, xv)
    )

    def decode(q: np.ndarray) -> np.ndarray:
        out = q.copy()
        out[log_mask] = np.exp(q[log_mask])
        return out

    def chain(xv: np.ndarray) -> np.ndarray:
        d = np.ones_like(xv)
        d[log_mask] = xv[log_mask]
        return d

    q = x.copy()
    q[log_mask] = np.log(x[log_mask])
    cost = float(np.sum((w * r) ** 2))
    lam = 1e-3
    converged = False
    n_iter = 0

    for n_iter in range(1, max_iter + 1):
        jac_x = np.asarray(jac(x), dtype=float)
        if jac_x.shape != (r.size, x.size):
            raise ValueError("jacobian shape does not match residual and parameters")
        jac_q = (w[:, None] * jac_x) * chain(x)[None, :]
        if n_iter == 1:
            dead = np.all(jac_q == 0.0, axis=0)
            if np.any(dead):
                dead_names = tuple(k for k, d in zip(names, dead) if d)
                raise SingularJacobian(
                    f"residual does not depend on {dead_names} at the starting point",
                    dead_names,
                )
        grad = jac_q.T @ (w * r)
        normal = jac_q.T @ jac_q
        diag = np.diag(normal).copy()
        diag[diag <= 0.0] = 1e-300

        # Per-component step cap: a factor e^3 per iteration for log-space
        # parameters, a comparable relative move for affine ones.  Uncapped
        # Gauss-Newton steps on weakly constrained parameters can jump to
        # absurd values that still lower the cost (a huge relaxation term
        # just flattens the model) and then poison the next Jacobian.
        cap = np.where(log_mask, 3.0, 3.0 * np.maximum(1.0, np.abs(q)))

        accepted = False
        for _ in range(60):
            try:
                step = np.linalg.solve(normal + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam = min(lam * 10.0, 1e14)
                continue
            overshoot = float(np.max(np.abs(step) / cap))
            if overshoot > 1.0:
                step = step / overshoot
            q_new = q + step
            with np.errstate(all="ignore"):
                x_new = decode(q_new)
                r_new = np.asarray(residual(x_new), dtype=float)
            if np.all(np.isfinite(x_new)) and np.all(np.isfinite(r_new)):
                cost_new = float(np.sum((w * r_new) ** 2))
                # Tiny relative slack lets a step at the machine-precision
                # optimum count as accepted instead of stalling.
                if cost_new <= cost * (1.0 + 1e-15):
                    accepted = True
                    break
            lam = min(lam * 10.0, 1e14)
        if not accepted:
            # Damping maxed out without a downhill step: either we sit at a
            # local optimum to machine precision, or the model is stuck.
            jac_scale = np.linalg.norm(jac_q) * math.sqrt(cost)
            if np.linalg.norm(grad) <= 1e-8 * max(jac_scale, 5e-324):
                converged = True
                break
            raise NoConvergence(
                f"stalled after {n_iter} iterations with a non-zero gradient (cost {cost:g})"
            )

        rel_step = float(np.max(np.abs(step) / np.maximum(1.0, np.abs(q_new))))
        rel_drop = (cost - cost_new) / max(cost, 5e-324)
        q, x, r, cost = q_new, x_new, r_new, cost_new
        lam = max(lam * 0.3, 1e-14)
        if rel_step < step_rtol or rel_drop < cost_rtol:
            converged = True
            break

    if not converged:
        raise NoConvergence(f"no convergence after {max_iter} iterations (cost {cost:g})")

    # Covariance from the weighted Jacobian at the optimum.
    jac_q = (w[:, None] * np.asarray(jac(x), dtype=float)) * chain(x)[None, :]
    _, svals, vt = np.linalg.svd(jac_q, full_matrices=False)
    keep = svals > _RANK_RCOND * (svals[0] if svals.size else 0.0)
    inv_s2 = np.where(keep, 1.0 / np.where(keep, svals, 1.0) ** 2, 0.0)
    dof = r.size - x.size
    scale = 1.0
    flags: list[str] = []
    if not absolute_sigma:
        scale = cost / dof if dof > 0 else 1.0
        if dof <= 0:
            flags.append("no degrees of freedom: covariance not chi-square scaled")
    cov_q = (vt.T * inv_s2) @ vt * scale
    ci_q = np.sqrt(np.maximum(np.diag(cov_q), 0.0))
    # Parameters with significant weight in a null direction are unbounded.
    if not np.all(keep):
        null_overlap = np.sqrt(np.sum(vt[~keep] ** 2, axis=0))
        for j, name in enumerate(names):
            if null_overlap[j] > 1e-6:
                ci_q[j] = math.inf
                flags.append(f"parameter '{name}' unidentifiable: Jacobian rank deficient")
    ci_x = ci_q * chain(x)

    return FitReport(
        params={k: float(v) for k, v in zip(names, x)},
        ci68={k: float(c) for k, c in zip(names, ci_x)},
        residual_rms=float(np.sqrt(np.mean((w * r) ** 2))),
        n_points=int(r.size),
        converged=True,
        cost=cost,
        n_iter=n_iter,
        flags=tuple(flags),
    )


def _moving_average(y: np.ndarray, width: int) -> np.ndarray:
    width = max(1, int(width))
    if width % 2 == 0:
        width += 1
    if width == 1:
        return y.copy()
    kernel = np.ones(width) / width
    padded = np.concatenate([np.full(width // 2, y[0]), y, np.full(width // 2, y[-1])])
    return np.convolve(padded, kernel, mode="valid")


def initial_guess(spec, *, splitting_hz: float = HYPERFINE_SPLITTING_MHZ) -> dict[str, float]:
    """Starting point for a hyperfine-triplet fit from the raw spectrum.

    The signal is smoothed with a moving average, the center taken as the
    argmin, the amplitude as a third of the dip depth and the component
    half-width from the half-depth width of the envelope with the hyperfine
    splitting subtracted to undo the overlap broadening.

    Raises :class:`InsufficientData` when no dip stands out of the noise.
    """
    nu = np.asarray(spec.freq_mhz, dtype=float)
    sig = np.asarray(spec.signal, dtype=float)
    if nu.size < 10:
        raise InsufficientData("need at least 10 points to locate a dip")
    spacing = float(np.median(np.diff(nu)))
    smooth_width = int(round(0.5 / spacing)) if spacing > 0 else 3
    smooth_width = min(max(smooth_width, 3), max(3, nu.size // 10))
    sm = _moving_average(sig, smooth_width)

    i0 = int(np.argmin(sm))
    depth = 1.0 - sm[i0]
    sigma = np.asarray(spec.sigma, dtype=float)
    noise_floor = float(np.median(sigma)) / math.sqrt(smooth_width)
    if depth <= max(4.0 * noise_floor, 1e-12):
        raise InsufficientData("no dip stands out of the noise floor")

    half_level = 1.0 - depth / 2.0

    def crossing(direction: int) -> float:
        idx = range(i0, nu.size) if direction > 0 else range(i0, -1, -1)
        prev = i0
        for i in idx:
            if sm[i] > half_level:
                t = (half_level - sm[prev]) / (sm[i] - sm[prev])
                return float(nu[prev] + t * (nu[i] - nu[prev]))
            prev = i
        return float(nu[-1] if direction > 0 else nu[0])

    half_width = (crossing(+1) - crossing(-1)) / 2.0
    # Overlap with the hyperfine satellites widens the envelope by roughly one
    # splitting; subtracting it beats a fixed divisor across narrow and broad
    # lines, with a floor for the fully resolved regime.
    hwhm = max(half_width - splitting_hz, half_width / 3.0)
    return {
        "amplitude": depth / 3.0,
        "center_hz": float(nu[i0]),
        "hwhm_hz": hwhm,
    }


def _triplet_residual_factory(nu, y, splitting):
    def model(x):
        amp, nu0, g = x
        g_sq = g * g
        out = np.ones_like(nu)
        for m in (-1.0, 0.0, 1.0):
            d = nu - nu0 - m * splitting
            out -= amp * g_sq / (d * d + g_sq)
        return out

    def residual(x):
        return y - model(x)

    def jacobian(x):
        amp, nu0, g = x
        g_sq = g * g
        d_amp = np.zeros_like(nu)
        d_nu0 = np.zeros_like(nu)
        d_g = np.zeros_like(nu)
        for m in (-1.0, 0.0, 1.0):
            d = nu - nu0 - m * splitting
            denom = d * d + g_sq
            d_amp += g_sq / denom
            d_nu0 += amp * g_sq * (-2.0 * d) / denom**2
            d_g += amp * 2.0 * g * d * d / denom**2
        # residual = y - model and model = 1 - sum(...): d(residual)/dp = +d(sum)/dp
        return np.column_stack([d_amp, -d_nu0, d_g])

    return model, residual, jacobian


def fit_spectrum(
    spec,
    *,
    splitting_hz: float = HYPERFINE_SPLITTING_MHZ,
    exclusion: SideResonanceExclusion | None = SideResonanceExclusion(),
    absolute_sigma: bool = False,
) -> FitReport:
    """Fit the hyperfine triplet to one spectrum, excluding side resonances.

    The exclusion windows are placed once, from the initial center estimate,
    so that adding or removing data inside them cannot move the final fit.
    Spectra whose resonance appears as a peak (singlet-absorption readout)
    are flipped about the unit baseline before fitting; parameters keep the
    same meaning.

    Raises :class:`InsufficientData` when fewer than 50 points survive the
    exclusion windows.
    """
    nu = np.asarray(spec.freq_mhz, dtype=float)
    sig = np.asarray(spec.signal, dtype=float)
    sigma = np.asarray(spec.sigma, dtype=float)
    flags: list[str] = []

    sm = _moving_average(sig, 5)
    flipped = (np.max(sm) - 1.0) > (1.0 - np.min(sm))
    y = 2.0 - sig if flipped else sig
    if flipped:
        flags.append("peak-shaped trace fitted as its mirror dip")

    view = _SpectrumView(nu, y, sigma)
    try:
        guess = initial_guess(view, splitting_hz=splitting_hz)
    except InsufficientData:
        span = nu[-1] - nu[0]
        guess = {
            "amplitude": 1e-4,
            "center_hz": float(0.5 * (nu[0] + nu[-1])),
            "hwhm_hz": span / 20.0,
        }
        flags.append("no dip detected: fitted from a flat-spectrum fallback guess")

    excluded: tuple[tuple[float, float], ...] = ()
    mask = np.ones(nu.size, dtype=bool)
    if exclusion is not None:
        excluded = exclusion.windows(guess["center_hz"])
        for lo, hi in excluded:
            mask &= ~((nu >= lo) & (nu <= hi))
    if int(np.sum(mask)) < 50:
        raise InsufficientData(
            f"only {int(np.sum(mask))} points outside exclusion windows; need at least 50"
        )

    _, residual, jacobian = _triplet_residual_factory(nu[mask], y[mask], splitting_hz)
    report = least_squares(
        residual,
        guess,
        weights=1.0 / sigma[mask],
        jacobian=jacobian,
        positive=("amplitude", "hwhm_hz"),
        absolute_sigma=absolute_sigma,
    )
    return FitReport(
        params=report.params,
        ci68=report.ci68,
        residual_rms=report.residual_rms,
        n_points=report.n_points,
        converged=report.converged,
        cost=report.cost,
        n_iter=report.n_iter,
        excluded_ranges=excluded,
        flags=tuple(flags) + report.flags,
    )


@dataclass
class _SpectrumView:
    freq_mhz: np.ndarray
    signal: np.ndarray
    sigma: np.ndarray


def global_width_fit(
    grid: MeasurementGrid,
    init: dict[str, float] | None = None,
    *,
    absolute_sigma: bool = False,
) -> FitReport:
    """Fit the width surface over all (power, Rabi) settings at once.

    Shared parameters: inhomogeneous width, gamma1/gamma2, c/gamma2, the
    saturation power p0 and the relaxation knee f0; plus one a(P) value per
    power setting (named ``a_over_g2[k]`` in ascending power order).
    """
    powers = grid.unique_powers()
    if powers.size < 2:
        raise UnidentifiableParameter(
            "width surface needs at least 2 distinct powers to separate "
            "power terms from the Rabi terms"
        )
    if np.unique(grid.rabi_hz).size < 3:
        raise UnidentifiableParameter(
            "width surface needs at least 3 distinct Rabi settings to "
            "separate the inhomogeneous offset, slope and curvature"
        )
    kidx = grid.power_indices()
    f = grid.rabi_hz
    big_p = grid.power_mw
    scalars = ["dnu_inh_hz", "ratio_g1_g2", "c_over_g2", "p0_mw", "f0_hz"]
    a_names = [f"a_over_g2[{k}]" for k in range(powers.size)]
    names = scalars + a_names

    if init is None:
        init = {}
        init["dnu_inh_hz"] = max(0.8 * float(np.min(grid.width_hz)), 1e-3)
        init["ratio_g1_g2"] = 0.01
        init["c_over_g2"] = 0.02
        init["p0_mw"] = float(np.median(powers))
        init["f0_hz"] = float(np.exp(np.mean(np.log(f))))
        for name in a_names:
            init[name] = 0.1
    else:
        missing = [k for k in names if k not in init]
        if missing:
            raise ValueError(f"init is missing parameters: {missing}")
        init = {k: float(init[k]) for k in names}

    def unpack(x):
        dnu, ratio, c, p0, f0 = x[:5]
        return dnu, ratio, c, p0, f0, x[5:]

    def pieces(x):
        dnu, ratio, c, p0, f0, a = unpack(x)
        u = f * f / (1.0 + (f / f0) ** 2)
        denom = ratio + a[kidx] * u + c * big_p
        numer = 4.0 * (1.0 + big_p / p0)
        s = np.sqrt(numer / denom)
        return dnu, ratio, c, p0, f0, a, u, denom, numer, s

    def residual(x):
        dnu, *_rest, s = pieces(x)
        return grid.width_hz - (dnu + f * s)

    def jacobian(x):
        dnu, ratio, c, p0, f0, a, u, denom, numer, s = pieces(x)
        jac = np.zeros((f.size, len(names)))
        jac[:, 0] = 1.0
        jac[:, 1] = -f * s / (2.0 * denom)
        jac[:, 2] = -f * s * big_p / (2.0 * denom)
        jac[:, 3] = f * (-4.0 * big_p / p0**2) / (2.0 * s * denom)
        du_df0 = 2.0 * f0 * f**4 / (f0 * f0 + f * f) ** 2
        jac[:, 4] = -f * s * a[kidx] * du_df0 / (2.0 * denom)
        for k in range(a.size):
            sel = kidx == k
            jac[sel, 5 + k] = -f[sel] * s[sel] * u[sel] / (2.0 * denom[sel])
        return -jac  # residual = data - model

    report = least_squares(
        residual,
        init,
        weights=1.0 / grid.width_sigma,
        jacobian=jacobian,
        positive=tuple(names),
        absolute_sigma=absolute_sigma,
    )
    flags = list(report.flags)
    for k, name in enumerate(a_names):
        ci = report.ci68[name]
        if not math.isfinite(ci) or ci > abs(report.params[name]):
            flags.append(f"{name} weakly identified at power {powers[k]:g} mW")
    return FitReport(
        params=report.params,
        ci68=report.ci68,
        residual_rms=report.residual_rms,
        n_points=report.n_points,
        converged=report.converged,
        cost=report.cost,
        n_iter=report.n_iter,
        flags=tuple(flags),
    )


def global_contrast_fit(
    grid: MeasurementGrid,
    *,
    splitting_hz: float = HYPERFINE_SPLITTING_MHZ,
    absolute_sigma: bool = False,
) -> FitReport:
    """Fit the ensemble contrast model to the grid's fitted amplitudes.

    Component amplitudes are converted to on-resonance contrasts with the
    hyperfine-overlap factor evaluated at each row's fitted width before
    fitting theta, gamma1/c and gamma1*gamma2.
    """
    if grid.unique_powers().size < 2:
        raise UnidentifiableParameter(
            "contrast model needs at least 2 distinct powers to separate "
            "theta from the pumping saturation"
        )
    conv = np.array(
        [
            hyperfine_contrast(1.0, w / 2.0, splitting_hz)
            for w in grid.width_hz
        ]
    )
    c_data = grid.amplitude * conv
    c_sigma = grid.amplitude_sigma * conv
    big_p = grid.power_mw
    r2 = grid.rabi_hz**2

    def model(x):
        theta, g1_over_c, g1g2 = x
        pump = big_p / (big_p + g1_over_c * (1.0 - theta))
        knee = g1g2 * (1.0 + big_p / g1_over_c) / (TWO_PI * TWO_PI)
        return 0.25 * theta * pump * r2 / (r2 + knee)

    def residual(x):
        return c_data - model(x)

    def jacobian(x):
        theta, g1_over_c, g1g2 = x
        denom_p = big_p + g1_over_c * (1.0 - theta)
        pump = big_p / denom_p
        knee = g1g2 * (1.0 + big_p / g1_over_c) / (TWO_PI * TWO_PI)
        sat = r2 / (r2 + knee)
        m = 0.25 * theta * pump * sat
        d_theta = 0.25 * pump * sat + m * g1_over_c / denom_p
        dknee_dg = (g1g2 / (TWO_PI * TWO_PI)) * (-big_p / g1_over_c**2)
        d_g1c = m * (-(1.0 - theta) / denom_p) + m * (-dknee_dg / (r2 + knee))
        dknee_dk = (1.0 + big_p / g1_over_c) / (TWO_PI * TWO_PI)
        d_k = m * (-dknee_dk / (r2 + knee))
        return -np.column_stack([d_theta, d_g1c, d_k])

    init = {
        "theta": min(0.5, max(8.0 * float(np.max(c_data)), 1e-3)),
        "g1_over_c_mw": float(np.percentile(big_p, 25)),
        "g1g2_us2": 0.005,
    }
    return least_squares(
        residual,
        init,
        weights=1.0 / c_sigma,
        jacobian=jacobian,
        positive=("theta", "g1_over_c_mw", "g1g2_us2"),
        absolute_sigma=absolute_sigma,
    )


def fit_ap_curve(
    power_mw: np.ndarray,
    a_values: np.ndarray,
    a_sigma: np.ndarray,
    *,
    absolute_sigma: bool = False,
) -> FitReport:
    """Fit a1 P/(1 + P/b1) + c1 to per-power relaxation slopes.

    Rows with non-finite values or uncertainties are dropped; at least four
    usable powers are required to constrain the three-parameter curve, else
    :class:`UnidentifiableParameter` is raised.
    """
    big_p = np.asarray(power_mw, dtype=float)
    a = np.asarray(a_values, dtype=float)
    s = np.asarray(a_sigma, dtype=float)
    if big_p.shape != a.shape or big_p.shape != s.shape:
        raise ValueError("power_mw, a_values, a_sigma must have equal shapes")
    good = np.isfinite(big_p) & np.isfinite(a) & np.isfinite(s) & (s > 0.0)
    big_p, a, s = big_p[good], a[good], s[good]
    if np.unique(big_p).size < 4:
        raise UnidentifiableParameter(
            "a(P) curve needs at least 4 distinct powers with finite uncertainties"
        )
    order = np.argsort(big_p)
    big_p, a, s = big_p[order], a[order], s[order]

    def residual(x):
        a1, b1, c1 = x
        return a - (a1 * big_p / (1.0 + big_p / b1) + c1)

    def jacobian(x):
        a1, b1, c1 = x
        sat = 1.0 + big_p / b1
        d_a1 = big_p / sat
        d_b1 = a1 * big_p**2 / (b1**2 * sat**2)
        d_c1 = np.ones_like(big_p)
        return -np.column_stack([d_a1, d_b1, d_c1])

    c1_0 = max(float(a[0]), 1e-6)
    plateau = max(float(np.max(a)), c1_0 * 1.5)
    half = c1_0 + 0.5 * (plateau - c1_0)
    above = np.nonzero(a >= half)[0]
    b1_0 = float(big_p[above[0]]) if above.size else float(np.median(big_p))
    b1_0 = max(b1_0, float(np.min(big_p)))
    a1_0 = max((plateau - c1_0) / b1_0, 1e-6)
    init = {"a1": a1_0, "b1_mw": b1_0, "c1": c1_0}
    return least_squares(
        residual,
        init,
        weights=1.0 / s,
        jacobian=jacobian,
        positive=("a1", "b1_mw", "c1"),
        absolute_sigma=absolute_sigma,
    )
