"""Experimental-style estimators: Lorentzian/Voigt/exponential fits on count
traces, PLE postselection and averaging, dip-contrast extraction, photon-flux
conversion, and the contrast-trigger gate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.constants import c as C0, h as PLANCK_H

from .fitting import (FitError, FitResult, exponential_jacobian,
                      exponential_model, levenberg_marquardt,
                      lorentzian_jacobian, lorentzian_model,
                      voigt_fixed_gaussian_model)


class AnalysisError(ValueError):
    pass


@dataclass
class ScanTrace:
    """Photon counts versus scan frequency."""

    frequency: np.ndarray          # Hz, strictly increasing
    counts: np.ndarray             # non-negative integers
    integration_time: float = 50e-3
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frequency = np.asarray(self.frequency, float)
        self.counts = np.asarray(self.counts)
        if self.frequency.ndim != 1 or len(self.frequency) != len(self.counts):
            raise AnalysisError("frequency and counts must be 1-D, same length")
        if np.any(np.diff(self.frequency) <= 0):
            raise AnalysisError("frequency grid must be strictly increasing")
        if np.any(self.counts < 0):
            raise AnalysisError("counts must be non-negative")
        if self.integration_time <= 0:
            raise AnalysisError("integration time must be > 0")


@dataclass
class HistogramTrace:
    """Time-binned decay histogram with uniform bin width."""

    time_bins: np.ndarray          # left bin edges, s
    counts: np.ndarray

    def __post_init__(self):
        self.time_bins = np.asarray(self.time_bins, float)
        self.counts = np.asarray(self.counts)
        if len(self.time_bins) != len(self.counts):
            raise AnalysisError("bins and counts must have the same length")
        widths = np.diff(self.time_bins)
        if len(widths) and (widths.min() <= 0
                            or np.ptp(widths) > 1e-9 * widths.mean()):
            raise AnalysisError("bins must be uniform and increasing")
        if np.any(self.counts < 0):
            raise AnalysisError("counts must be non-negative")

    @property
    def bin_width(self) -> float:
        return float(self.time_bins[1] - self.time_bins[0])


def _poisson_sigma(counts) -> np.ndarray:
    # variance floor of 1 keeps empty bins from getting infinite weight
    return np.sqrt(np.maximum(np.asarray(counts, float), 1.0))


def _fit_counts(model, jacobian, x, y, p0, names, bounds,
                n_reweight: int = 2) -> FitResult:
    """Poisson-weighted LM fit with model-based reweighting.

    The first pass weights by the observed counts; subsequent passes use the
    fitted expectation instead, which removes the small-count bias of
    weighting by noisy data.
    """
    res = levenberg_marquardt(model, jacobian, x, y, _poisson_sigma(y), p0,
                              names=names, bounds=bounds)
    for _ in range(n_reweight):
        if not np.all(np.isfinite(res.parameters)):
            break
        sigma = _poisson_sigma(model(x, res.parameters))
        res = levenberg_marquardt(model, jacobian, x, y, sigma,
                                  res.parameters, names=names, bounds=bounds)
    return res


def _line_start(trace: ScanTrace, mode: str) -> np.ndarray:
    f, y = trace.frequency, trace.counts.astype(float)
    base = np.median(y)
    if mode == "dip":
        i = int(np.argmin(y))
        amp = y[i] - base
    else:
        i = int(np.argmax(y))
        amp = y[i] - base
    span = f[-1] - f[0]
    # crude width guess: half-crossing extent around the extremum
    half = base + amp / 2.0
    inside = (y < half) if mode == "dip" else (y > half)
    w = span * max(inside.mean(), 1.0 / len(f))
    return np.array([f[i], w, amp, base])


def fit_lorentzian(trace: ScanTrace, mode: str = "peak") -> FitResult:
    """Lorentzian peak/dip fit with Poisson weights.

    A fit whose amplitude is consistent with zero at 2 sigma is flagged as
    unsuccessful (flat trace).
    """
    if mode not in ("peak", "dip"):
        raise AnalysisError(f"mode must be peak or dip, got {mode!r}")
    if len(trace.frequency) < 8:
        raise AnalysisError("need at least 8 points for a Lorentzian fit")
    f = trace.frequency
    span = f[-1] - f[0]
    p0 = _line_start(trace, mode)
    res = _fit_counts(
        lorentzian_model, lorentzian_jacobian, f, trace.counts.astype(float),
        p0, names=("center", "fwhm", "amplitude", "offset"),
        bounds=[(f[0] - span, f[-1] + span), (span * 1e-6, span * 10),
                (-np.inf, np.inf), (0.0, np.inf)])
    amp, samp = res["amplitude"]
    if not np.isfinite(amp) or abs(amp) < 2.0 * samp:
        res.success = False
        res.message = "amplitude consistent with zero"
    if mode == "dip" and amp > 0 or mode == "peak" and amp < 0:
        res.success = False
        res.message = f"fitted amplitude has the wrong sign for a {mode}"
    return res


def fit_voigt_fixed_gaussian(trace: ScanTrace, gaussian_fwhm: float,
                             mode: str = "peak") -> FitResult:
    """Voigt fit with the Gaussian FWHM frozen; returns the Lorentzian part."""
    if gaussian_fwhm < 0:
        raise AnalysisError("gaussian_fwhm must be >= 0")
    if gaussian_fwhm == 0:
        res = fit_lorentzian(trace, mode)
        res.names = ("center", "lorentzian_fwhm", "amplitude", "offset")
        return res
    if len(trace.frequency) < 8:
        raise AnalysisError("need at least 8 points")
    f = trace.frequency
    span = f[-1] - f[0]
    p0 = _line_start(trace, mode)
    p0[1] = max(p0[1] - gaussian_fwhm, span * 1e-3)
    res = _fit_counts(
        voigt_fixed_gaussian_model(gaussian_fwhm), None, f,
        trace.counts.astype(float), p0,
        names=("center", "lorentzian_fwhm", "amplitude", "offset"),
        bounds=[(f[0] - span, f[-1] + span), (0.0, span * 10),
                (-np.inf, np.inf), (0.0, np.inf)])
    return res


def _auto_window_start(hist: HistogramTrace, window_length: float,
                       fast_threshold: float = 0.005) -> float:
    """Window start past the fast background component.

    A slow decay is calibrated on the tail, the early excess over it is fit
    as an exponential, and the start is placed where the fast component
    drops below `fast_threshold` of the slow signal, plus two fast time
    constants of margin (the bare crossing still leaves percent-level
    contamination inside a long fit window).
    """
    t, y = hist.time_bins, hist.counts.astype(float)
    i_pk = int(np.argmax(y))
    t_pk = t[i_pk]
    tail = (t >= t_pk + 0.3 * window_length) & (t <= t_pk + window_length)
    if tail.sum() < 10:
        return float(t_pk)
    res = levenberg_marquardt(
        exponential_model, exponential_jacobian, t[tail] - t_pk, y[tail],
        _poisson_sigma(y[tail]),
        np.array([window_length / 4, max(y[tail][0], 1.0), max(y.min(), 0.0)]),
        names=("tau", "amplitude", "offset"),
        bounds=[(hist.bin_width, np.inf), (0, np.inf), (0, np.inf)])
    tau_s, a_s = res["tau"][0], res["amplitude"][0]
    slow = exponential_model(t - t_pk, res.parameters)
    excess = y - slow
    # significant early excess bins, contiguous from the peak
    sig_bins = []
    for i in range(i_pk, len(t)):
        if excess[i] > 2.0 * _poisson_sigma(slow[i]):
            sig_bins.append(i)
        else:
            break
    conservative = min(t_pk + 0.3 * window_length,
                       t[-1] - window_length if t[-1] > window_length else t_pk)
    if not sig_bins:
        return float(t_pk)
    if len(sig_bins) < 3 or a_s <= 0:
        # excess present but not fittable: fall back to a fixed offset
        return float(conservative)
    ts = t[sig_bins] - t_pk
    le = np.log(excess[sig_bins])
    # weighted log-linear estimate of the fast component
    w = excess[sig_bins] ** 2 / np.maximum(y[sig_bins], 1.0)
    A = np.vstack([np.ones_like(ts), -ts]).T
    coef, *_ = np.linalg.lstsq(A * np.sqrt(w)[:, None],
                               le * np.sqrt(w), rcond=None)
    log_af, inv_tf = coef
    if inv_tf <= 1.0 / tau_s:
        return float(conservative)
    tau_f = 1.0 / inv_tf
    a_f = np.exp(log_af)
    ratio0 = a_f / (fast_threshold * a_s)
    t_cross = max(np.log(ratio0) / (inv_tf - 1.0 / tau_s), 0.0) \
        if ratio0 > 1.0 else 0.0
    # keep at least half the nominal window inside the histogram
    start = min(t_pk + t_cross + 2.0 * tau_f,
                t_pk + 0.5 * window_length,
                t[-1] - window_length if t[-1] > window_length else t_pk)
    return float(t[min(int(np.ceil((start - t[0]) / hist.bin_width)),
                       len(t) - 1)])


def fit_monoexponential(hist: HistogramTrace, window_start: float | None = None,
                        window_length: float = 10e-9) -> FitResult:
    """Fit A exp(-t/tau) + B inside [start, start + window_length].

    With window_start = None the start is placed automatically after any
    fast-decaying background component.
    """
    if window_length <= 0:
        raise AnalysisError("window length must be > 0")
    if window_start is None:
        window_start = _auto_window_start(hist, window_length)
    t, y = hist.time_bins, hist.counts.astype(float)
    m = (t >= window_start) & (t <= window_start + window_length)
    if m.sum() < 10:
        raise AnalysisError("fit window holds fewer than 10 bins")
    tw, yw = t[m] - window_start, y[m]
    p0 = np.array([window_length / 4.0,
                   max(yw[0] - yw[-1], 1.0), max(yw[-1], 0.0)])
    res = _fit_counts(
        exponential_model, exponential_jacobian, tw, yw, p0,
        names=("tau", "amplitude", "offset"),
        bounds=[(hist.bin_width / 10, np.inf), (0.0, np.inf),
                (-np.inf, np.inf)])
    res.window = (float(window_start), float(window_start + window_length))
    return res


@dataclass
class PostselectionReport:
    n_input: int
    n_accepted: int
    rejections: dict
    average: ScanTrace | None
    fits: list[FitResult]


def _center_and_average(traces, fits, accepted) -> ScanTrace | None:
    idx = [i for i, ok in enumerate(accepted) if ok]
    if not idx:
        return None
    ref = traces[idx[0]]
    rel = ref.frequency - fits[idx[0]]["center"][0]
    acc = []
    for i in idx:
        r = traces[i].frequency - fits[i]["center"][0]
        acc.append(np.interp(rel, r, traces[i].counts.astype(float)))
    avg = np.mean(acc, axis=0)
    return ScanTrace(rel, avg, ref.integration_time,
                     {"n_averaged": len(idx), "centered": True})


def ple_postselect_on_resonance(traces: Sequence[ScanTrace],
                                center_band: tuple[float, float],
                                min_width: float = 100e6,
                                min_contrast: float = 0.5
                                ) -> PostselectionReport:
    """Filter transmission-dip scans and average the survivors.

    A scan is kept when a dip is present, its fitted center lies in the
    band, the width exceeds min_width, and the dip contrast (depth over
    baseline) exceeds min_contrast. Accepted traces are re-centered on their
    fitted dips before averaging.
    """
    fits, accepted = [], []
    rej = {"no_dip": 0, "center_band": 0, "width": 0, "contrast": 0}
    for tr in traces:
        res = fit_lorentzian(tr, mode="dip")
        fits.append(res)
        if not res.success:
            rej["no_dip"] += 1
            accepted.append(False)
            continue
        c = res["center"][0]
        if not center_band[0] <= c <= center_band[1]:
            rej["center_band"] += 1
            accepted.append(False)
            continue
        if res["fwhm"][0] <= min_width:
            rej["width"] += 1
            accepted.append(False)
            continue
        off = res["offset"][0]
        contrast = -res["amplitude"][0] / off if off > 0 else 0.0
        if contrast <= min_contrast:
            rej["contrast"] += 1
            accepted.append(False)
            continue
        accepted.append(True)
    avg = _center_and_average(traces, fits, accepted)
    return PostselectionReport(len(traces), int(sum(accepted)), rej, avg, fits)


def ple_postselect_off_resonance(traces: Sequence[ScanTrace],
                                 center_band: tuple[float, float],
                                 width_range: tuple[float, float] = (30e6, 500e6),
                                 min_amplitude_sigma: float = 3.0,
                                 require_repump: bool = True
                                 ) -> PostselectionReport:
    """Filter fluorescence-peak scans (sideband detection) and average.

    Scans failing the conditional-repump precondition are rejected outright;
    the rest must show a significant peak with center in the band and width
    inside the accepted range.
    """
    fits, accepted = [], []
    rej = {"repump": 0, "no_peak": 0, "center_band": 0, "width": 0}
    for tr in traces:
        if require_repump and not tr.metadata.get("repump_applied", False):
            rej["repump"] += 1
            fits.append(None)
            accepted.append(False)
            continue
        res = fit_lorentzian(tr, mode="peak")
        fits.append(res)
        amp, samp = (res["amplitude"] if res.success else (0.0, np.inf))
        if not res.success or amp < min_amplitude_sigma * samp:
            rej["no_peak"] += 1
            accepted.append(False)
            continue
        c = res["center"][0]
        if not center_band[0] <= c <= center_band[1]:
            rej["center_band"] += 1
            accepted.append(False)
            continue
        w = res["fwhm"][0]
        if not width_range[0] <= w <= width_range[1]:
            rej["width"] += 1
            accepted.append(False)
            continue
        accepted.append(True)
    # averaging needs fit objects for accepted traces only
    safe_fits = [f if f is not None else FitResult(
        np.zeros(4), np.zeros(4), ("center", "fwhm", "amplitude", "offset"),
        False, np.inf, 0) for f in fits]
    avg = _center_and_average(traces, safe_fits, accepted)
    return PostselectionReport(len(traces), int(sum(accepted)), rej,
                               avg, safe_fits)


def dip_contrast(trace: ScanTrace, smoothing_window: int = 5,
                 depth_points: int = 12, exclusion_points: int = 50) -> float:
    """Model-free dip contrast: 1 - depth / baseline.

    The dip is located on a running average; the depth is the mean of
    `depth_points` around it and the baseline the mean of everything farther
    than `exclusion_points` from it.
    """
    y = trace.counts.astype(float)
    n = len(y)
    if n <= 2 * exclusion_points + depth_points + 12:
        raise AnalysisError("trace too short for the contrast estimator")
    if smoothing_window < 1 or smoothing_window % 2 == 0:
        raise AnalysisError("smoothing window must be odd and >= 1")
    kern = np.ones(smoothing_window) / smoothing_window
    smooth = np.convolve(y, kern, mode="same")
    half = smoothing_window // 2
    i_dip = half + int(np.argmin(smooth[half:n - half]))
    if i_dip < exclusion_points or i_dip >= n - exclusion_points:
        raise AnalysisError("dip sits at the trace edge")
    lo = max(i_dip - depth_points // 2, 0)
    depth = y[lo:lo + depth_points].mean()
    mask = np.ones(n, bool)
    mask[max(i_dip - exclusion_points, 0):i_dip + exclusion_points + 1] = False
    baseline = y[mask].mean()
    if baseline <= 0:
        raise AnalysisError("zero baseline")
    return float(1.0 - depth / baseline)


def photons_per_lifetime(power: float, wavelength: float,
                         lifetime: float) -> float:
    """Mean photon number arriving during one lifetime: P lambda tau / (h c)."""
    if min(power, wavelength, lifetime) < 0:
        raise AnalysisError("inputs must be non-negative")
    return float(power * wavelength * lifetime / (PLANCK_H * C0))


def trigger_gate(contrasts: Sequence[float],
                 threshold: float = 0.35) -> np.ndarray:
    """Acceptance mask: step i is accepted when step i-1 exceeded threshold.

    The first step has no predecessor and is never accepted.
    """
    c = np.asarray(contrasts, float)
    out = np.zeros(len(c), bool)
    out[1:] = c[:-1] > threshold
    return out


def accepted_detunings(detunings: Sequence[float], contrasts: Sequence[float],
                       threshold: float = 0.35) -> np.ndarray:
    """Detuning values surviving the trigger gate (for g2 emulation)."""
    d = np.asarray(detunings, float)
    if len(d) != len(contrasts):
        raise AnalysisError("detunings and contrasts must align")
    return d[trigger_gate(contrasts, threshold)]
