"""Headless figure rendering for the CLI report paths.

Every function takes already-computed arrays and writes a figure file next
to the delimited output; nothing here recomputes physics.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path, dpi: int) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # empty metadata keeps PNG output byte-stable across library patch levels
    fig.savefig(path, dpi=dpi, metadata={})
    plt.close(fig)


def plot_dispersion(points, path, dpi: int = 150) -> None:
    """Resonance frequency vs air gap, colored by branch label."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for branch, color in (("air-like", "tab:blue"), ("diamond-like", "tab:red")):
        sel = [p for p in points if p.branch == branch]
        if sel:
            ax.plot([p.air_gap * 1e6 for p in sel],
                    [p.frequency * 1e-12 for p in sel],
                    ".", ms=3, color=color, label=branch)
    ax.set_xlabel("air gap (um)")
    ax.set_ylabel("resonance frequency (THz)")
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path, dpi)


def plot_field_profile(profile, path, dpi: int = 150) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    z = profile.z_grid * 1e6
    ax.plot(z, profile.intensity, lw=0.8, color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(z, profile.index_profile, lw=0.8, color="0.6", alpha=0.7)
    for name, (z0, z1) in profile.regions.items():
        ax.axvspan(z0 * 1e6, z1 * 1e6, color="tab:orange" if name == "diamond"
                   else "tab:green", alpha=0.08)
    ax.set_xlabel("position (um)")
    ax.set_ylabel("normalized intensity")
    ax2.set_ylabel("refractive index")
    fig.tight_layout()
    _save(fig, path, dpi)


def plot_spectrum(detuning, transmission, path, label: str = "",
                  dpi: int = 150) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.asarray(detuning) * 1e-9, transmission, lw=1.2)
    ax.set_xlabel("probe detuning (GHz)")
    ax.set_ylabel("transmission")
    if label:
        ax.set_title(label)
    fig.tight_layout()
    _save(fig, path, dpi)


def plot_g2(tau, g2, path, dpi: int = 150) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.asarray(tau) * 1e9, g2, lw=1.2)
    ax.axhline(1.0, color="0.6", lw=0.8, ls="--")
    ax.set_xlabel("delay (ns)")
    ax.set_ylabel("g2")
    fig.tight_layout()
    _save(fig, path, dpi)


def plot_saturation(photons, contrast, path, dpi: int = 150) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(photons, np.asarray(contrast) * 100, "o-", lw=1.2)
    ax.set_xlabel("photons per lifetime")
    ax.set_ylabel("dip contrast (%)")
    fig.tight_layout()
    _save(fig, path, dpi)


def plot_scan_fit(trace, fit_curve, path, dpi: int = 150) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    f0 = trace.frequency.mean()
    ax.plot((trace.frequency - f0) * 1e-9, trace.counts, ".", ms=3,
            color="0.4")
    if fit_curve is not None:
        ax.plot((trace.frequency - f0) * 1e-9, fit_curve, lw=1.2,
                color="tab:red")
    ax.set_xlabel("frequency offset (GHz)")
    ax.set_ylabel("counts")
    fig.tight_layout()
    _save(fig, path, dpi)


def plot_histogram_fit(hist, fit_curve, window, path, dpi: int = 150) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(hist.time_bins * 1e9, np.maximum(hist.counts, 0.5), ".",
                ms=3, color="0.4")
    if fit_curve is not None:
        ax.semilogy(hist.time_bins * 1e9, np.maximum(fit_curve, 0.5), lw=1.2,
                    color="tab:red")
    if window is not None:
        ax.axvspan(window[0] * 1e9, window[1] * 1e9, color="tab:blue",
                   alpha=0.08)
    ax.set_xlabel("time (ns)")
    ax.set_ylabel("counts")
    fig.tight_layout()
    _save(fig, path, dpi)
