"""Seeded synthetic-data generation: transmission scans, PLE scans, decay
histograms, and photoluminescence maps with Poisson noise, spectral
diffusion, and Bernoulli ionization.

Reproducibility: every generator derives its random stream from a Philox
counter-based generator seeded as SeedSequence(seed, spawn_key=(scan_index,)),
so scans can be produced independently and in parallel with identical
results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qdynamics as qd
from .analysis import HistogramTrace, ScanTrace


class SynthError(ValueError):
    pass


def scan_rng(seed: int, scan_index: int = 0) -> np.random.Generator:
    """Independent counter-based stream for one scan of one dataset."""
    ss = np.random.SeedSequence(seed, spawn_key=(scan_index,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class EmitterTruth:
    """Ground truth of the synthetic emitter."""

    frequency: float                    # ZPL frequency nu_e0 (Hz)
    linewidth: float                    # total homogeneous linewidth gamma' (Hz)
    diffusion_sigma: float = 0.0        # per-scan spectral jump RMS (Hz)
    ionization_prob: float = 0.0        # per-scan chance of a dark scan
    repump_success_prob: float = 1.0

    def __post_init__(self):
        if self.frequency <= 0 or self.linewidth <= 0:
            raise SynthError("frequency and linewidth must be positive")
        for p in (self.ionization_prob, self.repump_success_prob):
            if not 0.0 <= p <= 1.0:
                raise SynthError("probabilities must be in [0, 1]")


@dataclass(frozen=True)
class NoiseSpec:
    peak_rate: float = 2e4              # counts/s at the line extremum
    background_rate: float = 50.0       # counts/s
    integration_time: float = 50e-3     # s per frequency step
    fast_amplitude: float = 0.0         # histogram fast-background peak counts
    fast_decay_time: float = 0.5e-9     # s

    def __post_init__(self):
        if min(self.peak_rate, self.background_rate, self.fast_amplitude) < 0:
            raise SynthError("rates must be >= 0")
        if self.integration_time <= 0 or self.fast_decay_time <= 0:
            raise SynthError("times must be > 0")


def _sample_emitter_frequency(truth: EmitterTruth,
                              rng: np.random.Generator) -> float:
    if truth.diffusion_sigma == 0:
        return truth.frequency
    return float(rng.normal(truth.frequency, truth.diffusion_sigma))


def gen_transmission_scan(truth: EmitterTruth, params: qd.SystemParams,
                          frequency_grid: Sequence[float], noise: NoiseSpec,
                          seed: int, scan_index: int = 0,
                          vibration=None) -> ScanTrace:
    """Cavity transmission dip scan with Poisson counts.

    The emitter frequency is drawn once per scan from the diffusion
    distribution (or the emitter is dark if ionized); the expected rate is
    the coupled-system transmission normalized to the bare-cavity peak.
    """
    freqs = np.asarray(frequency_grid, float)
    rng = scan_rng(seed, scan_index)
    ionized = rng.random() < truth.ionization_prob
    nu_e = _sample_emitter_frequency(truth, rng)
    offs, wts = qd._vibration_grid(vibration)
    t_bg = 4.0 * params.kappa_in * params.kappa_out / params.kappa ** 2
    # cavity parked at the nominal line plus the configured offset
    nu_c = truth.frequency + params.delta_c

    p = qd.replace(params, g=0.0) if ionized else params
    de = nu_e - freqs
    dc = (nu_c - freqs)[:, None] + offs[None, :]
    grid = qd.weak_drive_transmission(p, de[:, None], dc)
    rel = grid @ wts
    expected = (noise.peak_rate * rel / t_bg
                + noise.background_rate) * noise.integration_time
    counts = rng.poisson(expected)
    return ScanTrace(freqs, counts, noise.integration_time,
                     {"scan_id": scan_index, "ionized": bool(ionized),
                      "true_emitter_frequency": nu_e,
                      "repump_applied": True})


def gen_ple_scan(truth: EmitterTruth, frequency_grid: Sequence[float],
                 noise: NoiseSpec, seed: int, scan_index: int = 0) -> ScanTrace:
    """Sideband-detected excitation scan: a low-rate Lorentzian peak.

    Repump metadata follows the conditional rule: the repump succeeds with
    the truth's success probability; an unrepumped ionized emitter yields a
    flat background scan.
    """
    freqs = np.asarray(frequency_grid, float)
    rng = scan_rng(seed, scan_index)
    ionized = rng.random() < truth.ionization_prob
    repumped = (not ionized) or (rng.random() < truth.repump_success_prob)
    nu_e = _sample_emitter_frequency(truth, rng)
    hw = truth.linewidth / 2.0
    if repumped:
        line = hw ** 2 / ((freqs - nu_e) ** 2 + hw ** 2)
    else:
        line = np.zeros_like(freqs)
    expected = (noise.peak_rate * line
                + noise.background_rate) * noise.integration_time
    counts = rng.poisson(expected)
    return ScanTrace(freqs, counts, noise.integration_time,
                     {"scan_id": scan_index, "ionized": bool(ionized),
                      "repump_applied": bool(repumped),
                      "true_emitter_frequency": nu_e})


def gen_lifetime_histogram(tau_true: float, noise: NoiseSpec, seed: int,
                           scan_index: int = 0, bin_width: float = 0.25e-9,
                           n_bins: int = 160,
                           peak_counts: float = 2000.0) -> HistogramTrace:
    """Poisson-sampled decay histogram with an optional fast background.

    expected(t) = A exp(-t/tau) + A_fast exp(-t/tau_fast) + B per bin.
    """
    if tau_true <= 0:
        raise SynthError("tau must be > 0")
    if bin_width <= 0 or n_bins < 2:
        raise SynthError("invalid binning")
    rng = scan_rng(seed, scan_index)
    t = np.arange(n_bins) * bin_width
    expected = (peak_counts * np.exp(-t / tau_true)
                + noise.fast_amplitude * np.exp(-t / noise.fast_decay_time)
                + noise.background_rate * bin_width)
    counts = rng.poisson(expected)
    return HistogramTrace(t, counts)


@dataclass(frozen=True)
class PLMap:
    gap_grid: np.ndarray            # m
    frequency_grid: np.ndarray      # Hz
    intensity: np.ndarray           # shape (len(gaps), len(freqs))


def gen_pl_map(lines: Sequence[tuple[float, float]],
               dispersion: Sequence, frequency_grid: Sequence[float],
               kappa: float, seed: int,
               noise_rate: float = 0.0) -> PLMap:
    """Photoluminescence intensity versus (air gap, emission frequency).

    `lines` are (frequency, strength) pairs; `dispersion` is the
    layered-optics (gap, resonance frequency, branch) point list. Emission
    at a given gap is enhanced by the Lorentzian overlap of each line with
    every cavity resonance at that gap.
    """
    freqs = np.asarray(frequency_grid, float)
    gaps = sorted({p.air_gap for p in dispersion})
    rng = scan_rng(seed)
    img = np.zeros((len(gaps), len(freqs)))
    hw = kappa / 2.0
    by_gap: dict[float, list[float]] = {g: [] for g in gaps}
    for p in dispersion:
        by_gap[p.air_gap].append(p.frequency)
    for i, g in enumerate(gaps):
        for nu_c in by_gap[g]:
            cav = hw ** 2 / ((freqs - nu_c) ** 2 + hw ** 2)
            for nu_l, strength in lines:
                overlap = hw ** 2 / ((nu_l - nu_c) ** 2 + hw ** 2)
                img[i] += strength * overlap * cav
    if noise_rate > 0:
        img = rng.poisson(np.maximum(img, 0.0) + noise_rate).astype(float)
    return PLMap(np.asarray(gaps), freqs, img)
