"""Vibration averaging, lineshape composition, and cooperativity calculators.

All inputs are ordinary frequencies (Hz). Values with measurement
uncertainties are passed and returned as (value, sigma) pairs; propagation
is linear (first order in the input sigmas).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class VibrationSpec:
    """Gaussian cavity-length jitter mapped to frequency jitter.

    sigma_nu = sigma_length * |dispersion_slope| is the RMS of the cavity
    resonance-frequency fluctuations.
    """

    sigma_length: float                 # RMS length jitter (m)
    dispersion_slope: float             # Hz per meter of cavity length
    n_points: int = 201
    span_sigmas: float = 5.0

    def __post_init__(self):
        if self.sigma_length < 0:
            raise EnsembleError("sigma_length must be >= 0")
        if not np.isfinite(self.dispersion_slope):
            raise EnsembleError("dispersion slope must be finite")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise EnsembleError("n_points must be odd and >= 3")
        if self.span_sigmas < 4.0:
            raise EnsembleError("quadrature halfwidth must be >= 4 sigma")

    @property
    def sigma_nu(self) -> float:
        return self.sigma_length * abs(self.dispersion_slope)

    def detuning_grid(self) -> tuple[np.ndarray, np.ndarray]:
        return gaussian_detuning_weights(self.sigma_nu,
                                         self.span_sigmas * self.sigma_nu,
                                         self.n_points)


def gaussian_detuning_weights(sigma_nu: float, grid_halfwidth: float,
                              n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Discrete Gaussian probability weights over detuning offsets.

    Returns (offsets, weights) with the weights normalized to 1 and
    symmetric about zero. A zero sigma collapses to a single delta weight.
    """
    if n_points < 3 or n_points % 2 == 0:
        raise EnsembleError("n_points must be odd and >= 3")
    if sigma_nu < 0:
        raise EnsembleError("sigma must be >= 0")
    if sigma_nu == 0:
        offsets = np.zeros(1)
        return offsets, np.ones(1)
    if grid_halfwidth < 4.0 * sigma_nu:
        raise EnsembleError("grid halfwidth must cover at least 4 sigma")
    offsets = np.linspace(-grid_halfwidth, grid_halfwidth, n_points)
    w = np.exp(-0.5 * (offsets / sigma_nu) ** 2)
    w /= w.sum()
    return offsets, w


def vibration_average(func: Callable[[float], float],
                      spec: VibrationSpec) -> float:
    """Weighted average of func(detuning) over the Gaussian jitter grid."""
    offsets, weights = spec.detuning_grid()
    return float(sum(w * func(d) for d, w in zip(offsets, weights)))


def spectral_overlap(c_max: float, quality: float, nu_emitter: float,
                     nu_cavity: float) -> float:
    """Cooperativity at finite emitter-cavity detuning.

    C = C_max / (1 + 4 Q^2 (nu_e/nu_c - 1)^2), the Lorentzian overlap of the
    emitter line with the cavity mode of linewidth nu_c / Q.
    """
    if nu_emitter <= 0 or nu_cavity <= 0:
        raise EnsembleError("frequencies must be positive")
    return c_max / (1.0 + 4.0 * quality ** 2 * (nu_emitter / nu_cavity - 1.0) ** 2)


def overlap_kernel(detuning, kappa: float):
    """Same Lorentzian suppression expressed in detuning: 1/(1+(2d/kappa)^2)."""
    d = np.asarray(detuning, dtype=float)
    out = 1.0 / (1.0 + (2.0 * d / kappa) ** 2)
    return float(out) if out.ndim == 0 else out


def vibration_overlap_ratio(spec: VibrationSpec, kappa: float) -> float:
    """Averaged-to-maximal cooperativity ratio under cavity jitter."""
    if kappa <= 0:
        raise EnsembleError("kappa must be > 0")
    return vibration_average(lambda d: overlap_kernel(d, kappa), spec)


Quantity = tuple[float, float]  # (value, 1 sigma)


def _as_quantity(x) -> Quantity:
    if np.isscalar(x):
        return float(x), 0.0
    v, s = x
    if s < 0:
        raise EnsembleError("sigma must be >= 0")
    return float(v), float(s)


def cooperativity_from_lifetimes(tau, tau_p) -> Quantity:
    """C = tau/tau_P - 1 with quadrature error propagation."""
    t, st = _as_quantity(tau)
    tp, stp = _as_quantity(tau_p)
    if not 0 < tp <= t:
        raise EnsembleError("need 0 < tau_P <= tau")
    c = t / tp - 1.0
    sc = (t / tp) * np.hypot(st / t, stp / tp)
    return float(c), float(sc)


def cooperativity_from_linewidths(gamma_p_purcell, gamma_p, gamma,
                                  correction: float = 0.90) -> Quantity:
    """C = (gamma'_P - gamma') / (gamma * correction).

    The correction divides out the vibration-induced overlap reduction;
    correction = 1 returns the raw (as-measured) value.
    """
    gpp, sgpp = _as_quantity(gamma_p_purcell)
    gp, sgp = _as_quantity(gamma_p)
    g0, sg0 = _as_quantity(gamma)
    if not gpp >= gp >= g0 > 0:
        raise EnsembleError("need gamma'_P >= gamma' >= gamma > 0")
    if not 0 < correction <= 1:
        raise EnsembleError("correction must be in (0, 1]")
    diff = gpp - gp
    c = diff / (g0 * correction)
    sdiff = np.hypot(sgpp, sgp)
    sc = 0.0 if diff == 0 else c * np.hypot(sdiff / diff, sg0 / g0)
    return float(c), float(sc)


def coherent_cooperativity(gamma_p_purcell, gamma_p,
                           correction: float = 0.90) -> Quantity:
    """C_coh = (gamma'_P / gamma' - 1) / correction."""
    gpp, sgpp = _as_quantity(gamma_p_purcell)
    gp, sgp = _as_quantity(gamma_p)
    if not gpp >= gp > 0:
        raise EnsembleError("need gamma'_P >= gamma' > 0")
    if not 0 < correction <= 1:
        raise EnsembleError("correction must be in (0, 1]")
    ratio = gpp / gp
    c = (ratio - 1.0) / correction
    sc = (ratio / correction) * np.hypot(sgpp / gpp, sgp / gp)
    return float(c), float(sc)


def cooperativity(g: float, kappa: float, gamma: float, gamma_dp: float = 0.0,
                  denominator: str = "natural") -> float:
    """C = 4 g^2 / (kappa * linewidth).

    denominator "natural" uses the bare decay gamma; "broadened" uses the
    dephasing-broadened gamma' = gamma + gamma_dp. Both conventions are in
    circulation and are exposed explicitly.
    """
    if min(g, kappa, gamma) < 0 or kappa == 0 or gamma == 0:
        raise EnsembleError("rates must be positive")
    if denominator == "natural":
        width = gamma
    elif denominator == "broadened":
        width = gamma + gamma_dp
    else:
        raise EnsembleError(f"unknown denominator convention {denominator!r}")
    return float(4.0 * g ** 2 / (kappa * width))


def g_from_cooperativity(c, kappa: float, linewidth: float) -> Quantity:
    """Invert C = 4 g^2 / (kappa * linewidth) for g."""
    cv, sc = _as_quantity(c)
    if cv < 0 or kappa <= 0 or linewidth <= 0:
        raise EnsembleError("inputs must be positive (C >= 0)")
    g = np.sqrt(cv * kappa * linewidth / 4.0)
    sg = 0.0 if cv == 0 else 0.5 * g * sc / cv
    return float(g), float(sg)


def purcell_lifetime(tau, c) -> Quantity:
    """tau_P = tau / (1 + C)."""
    t, st = _as_quantity(tau)
    cv, sc = _as_quantity(c)
    if t <= 0 or cv < 0:
        raise EnsembleError("need tau > 0 and C >= 0")
    tp = t / (1.0 + cv)
    stp = tp * np.hypot(st / t, sc / (1.0 + cv))
    return float(tp), float(stp)


ZETA_100_ORIENTATION = float(np.cos(np.deg2rad(35.0)) ** 2)  # dipole projection


def alpha_eta_bound(c, f_p, beta0, zeta: float = ZETA_100_ORIENTATION,
                    epsilon_max: float = 1.0) -> Quantity:
    """Lower bound on branching ratio times quantum efficiency.

    alpha * eta >= C / (F_P * beta0 * zeta * epsilon_max), from the
    factorized cooperativity with every unknown efficiency at its maximum.
    """
    cv, sc = _as_quantity(c)
    fv, sf = _as_quantity(f_p)
    bv, sb = _as_quantity(beta0)
    if min(cv, fv, bv) <= 0:
        raise EnsembleError("C, F_P, beta0 must be positive")
    if not 0 < zeta <= 1 or not 0 < epsilon_max <= 1:
        raise EnsembleError("zeta and epsilon_max must be in (0, 1]")
    bound = cv / (fv * bv * zeta * epsilon_max)
    sig = bound * np.sqrt((sc / cv) ** 2 + (sf / fv) ** 2 + (sb / bv) ** 2)
    return float(bound), float(sig)


@dataclass(frozen=True)
class LineshapeParams:
    """Voigt-family profile: Lorentzian and Gaussian FWHM components."""

    lorentzian_fwhm: float
    gaussian_fwhm: float
    center: float = 0.0
    amplitude: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.lorentzian_fwhm < 0 or self.gaussian_fwhm < 0:
            raise EnsembleError("FWHM values must be >= 0")
        if self.lorentzian_fwhm == 0 and self.gaussian_fwhm == 0:
            raise EnsembleError("at least one FWHM must be positive")


GAUSSIAN_FWHM_FACTOR = float(2.0 * np.sqrt(2.0 * np.log(2.0)))


def gaussian_fwhm_from_vibrations(sigma_length: float,
                                  slope_hz_per_m: float) -> float:
    """FWHM = sigma_length * |slope| * 2 sqrt(2 ln 2)."""
    if sigma_length < 0:
        raise EnsembleError("sigma_length must be >= 0")
    return sigma_length * abs(slope_hz_per_m) * GAUSSIAN_FWHM_FACTOR


def _lorentzian_unit(x, fwhm):
    hw = fwhm / 2.0
    return (hw / np.pi) / (x ** 2 + hw ** 2)


def lineshape_eval(params: LineshapeParams, nu) -> np.ndarray:
    """Evaluate the profile: offset + amplitude * V(nu - center) / V(0).

    The Voigt core is a direct numerical convolution of the unit-area
    Lorentzian with the Gaussian on an adaptive grid; the pure limits are
    returned in closed form.
    """
    x = np.asarray(nu, dtype=float) - params.center
    fl, fg = params.lorentzian_fwhm, params.gaussian_fwhm
    if fg == 0:
        core = _lorentzian_unit(x, fl)
        peak = _lorentzian_unit(0.0, fl)
    elif fl == 0:
        sig = fg / GAUSSIAN_FWHM_FACTOR
        core = np.exp(-0.5 * (x / sig) ** 2) / (sig * np.sqrt(2 * np.pi))
        peak = 1.0 / (sig * np.sqrt(2 * np.pi))
    else:
        sig = fg / GAUSSIAN_FWHM_FACTOR
        # quadrature over the Gaussian, wide and fine enough for 1e-6 accuracy
        n = 2001
        s = np.linspace(-8 * sig, 8 * sig, n)
        w = np.exp(-0.5 * (s / sig) ** 2)
        w /= w.sum()
        core = (_lorentzian_unit(x[..., None] - s, fl) * w).sum(axis=-1)
        peak = float((_lorentzian_unit(-s, fl) * w).sum())
    out = params.offset + params.amplitude * core / peak
    return float(out) if np.ndim(nu) == 0 else out


def lineshape_fwhm(params: LineshapeParams) -> float:
    """Full width at half maximum of the profile, found by bisection."""
    half = params.offset + 0.5 * params.amplitude
    scale = params.lorentzian_fwhm + params.gaussian_fwhm

    def f(x):
        return lineshape_eval(params, params.center + x) - half

    hi = scale
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e6 * scale:
            raise EnsembleError("could not bracket the half maximum")
    return 2.0 * brentq(f, 0.0, hi, xtol=1e-9 * scale)
