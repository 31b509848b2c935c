"""One-dimensional transfer-matrix optics for the air-diamond hybrid cavity.

All spectral quantities are ordinary frequencies (Hz). Lengths are meters.
The cavity structure is: ambient (fiber silica) | input DBR | air gap |
diamond | output DBR | substrate, probed at normal incidence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.constants import c as C0
from scipy.optimize import brentq, minimize_scalar


class OpticsError(ValueError):
    pass


@dataclass(frozen=True)
class Layer:
    """Homogeneous dielectric slab at normal incidence."""

    thickness: float
    index: float
    absorption: float = 0.0

    def __post_init__(self):
        if self.thickness < 0:
            raise OpticsError(f"negative layer thickness {self.thickness}")
        if self.index <= 0:
            raise OpticsError(f"non-positive refractive index {self.index}")
        if self.absorption < 0:
            raise OpticsError("absorption must be >= 0")

    @property
    def complex_index(self) -> complex:
        return self.index + 1j * self.absorption


@dataclass(frozen=True)
class TransferResult:
    r: complex
    t: complex
    reflectance: float
    transmittance: float


def characteristic_matrix(layers: Sequence[Layer], wavelength) -> np.ndarray:
    """Product of layer matrices, vectorized over wavelength.

    Returns an array of shape wavelength.shape + (2, 2).
    """
    lam = np.asarray(wavelength, dtype=float)
    M = np.broadcast_to(np.eye(2, dtype=complex), lam.shape + (2, 2)).copy()
    for layer in layers:
        n = layer.complex_index
        delta = 2.0 * np.pi * n * layer.thickness / lam
        cd, sd = np.cos(delta), np.sin(delta)
        Ml = np.empty(lam.shape + (2, 2), dtype=complex)
        Ml[..., 0, 0] = cd
        Ml[..., 0, 1] = 1j * sd / n
        Ml[..., 1, 0] = 1j * n * sd
        Ml[..., 1, 1] = cd
        M = M @ Ml
    return M


def transfer_matrix(layers: Sequence[Layer], wavelength, n_ambient: float = 1.0,
                    n_substrate: float = 1.0) -> TransferResult:
    """Complex reflection/transmission amplitudes and intensities of a stack.

    An empty stack reduces to the bare ambient/substrate interface
    (identity matrix pass-through).
    """
    lam = np.asarray(wavelength, dtype=float)
    M = characteristic_matrix(layers, lam)
    B = M[..., 0, 0] + M[..., 0, 1] * n_substrate
    C = M[..., 1, 0] + M[..., 1, 1] * n_substrate
    r = (n_ambient * B - C) / (n_ambient * B + C)
    t = 2.0 * n_ambient / (n_ambient * B + C)
    R = np.abs(r) ** 2
    T = (n_substrate / n_ambient) * np.abs(t) ** 2
    if lam.ndim == 0:
        return TransferResult(complex(r), complex(t), float(R), float(T))
    return TransferResult(r, t, R, T)


def quarter_wave_stack(n_high: float, n_low: float, pairs: int,
                       center_wavelength: float) -> tuple[Layer, ...]:
    """DBR of `pairs` high/low quarter-wave pairs, high-index layer first."""
    layers = []
    for _ in range(pairs):
        layers.append(Layer(center_wavelength / (4 * n_high), n_high))
        layers.append(Layer(center_wavelength / (4 * n_low), n_low))
    return tuple(layers)


def design_quarter_wave_mirror(target_ppm: float, center_wavelength: float,
                               n_ambient: float, n_substrate: float,
                               n_low: float = 1.48, pairs: int | None = None
                               ) -> tuple[tuple[Layer, ...], float]:
    """Solve for the high index of a quarter-wave DBR hitting a ppm target.

    Coating vendors quote mirrors by their transmittance alone; a
    concrete stack is needed for field and dispersion simulation.  With the
    pair count fixed, the high index is the one free knob; it is solved so
    that the stack transmittance at the design wavelength equals the target.
    """
    if not 0 < target_ppm < 1e6:
        raise OpticsError("target transmittance must be in (0, 1e6) ppm")

    def t_of_nh(nh, npairs):
        stack = quarter_wave_stack(nh, n_low, npairs, center_wavelength)
        return transfer_matrix(stack, center_wavelength, n_ambient,
                               n_substrate).transmittance - target_ppm * 1e-6

    if pairs is None:
        # smallest pair count for which a physical n_high in (n_low, 2.6] works
        for npairs in range(4, 40):
            if t_of_nh(n_low + 1e-6, npairs) > 0 > t_of_nh(2.6, npairs):
                pairs = npairs
                break
        else:
            raise OpticsError("no quarter-wave design reaches the ppm target")
    nh = brentq(lambda x: t_of_nh(x, pairs), n_low + 1e-6, 2.6)
    return quarter_wave_stack(nh, n_low, pairs, center_wavelength), nh


@dataclass(frozen=True)
class MirrorSpec:
    """Mirror description: lumped ppm values and/or an explicit DBR stack."""

    transmittance_ppm: float
    loss_ppm: float = 0.0
    stack: tuple[Layer, ...] | None = None
    substrate_index: float = 1.45

    def __post_init__(self):
        if self.transmittance_ppm < 0 or self.loss_ppm < 0:
            raise OpticsError("ppm values must be >= 0")
        if self.transmittance_ppm + self.loss_ppm > 1e6:
            raise OpticsError("transmittance + loss exceeds 1e6 ppm")

    def realized(self, wavelength: float, n_ambient: float) -> tuple[Layer, ...]:
        """Concrete layer stack; designed on demand if only ppm values given."""
        if self.stack is not None:
            return self.stack
        stack, _ = design_quarter_wave_mirror(
            self.transmittance_ppm, wavelength, n_ambient, self.substrate_index)
        return stack

    def lumped_transmittance(self, wavelength: float, n_ambient: float) -> float:
        """Equivalent transmittance (ppm) of the realized stack."""
        stack = self.realized(wavelength, n_ambient)
        res = transfer_matrix(stack, wavelength, n_ambient, self.substrate_index)
        return res.transmittance * 1e6


@dataclass(frozen=True)
class CavityGeometry:
    """Plano-concave hybrid cavity: air gap plus diamond slab between mirrors."""

    air_gap: float
    diamond_thickness: float
    diamond_index: float
    mirror_roc: float
    input_mirror: MirrorSpec
    output_mirror: MirrorSpec
    wavelength: float

    def __post_init__(self):
        for name in ("air_gap", "diamond_thickness", "mirror_roc", "wavelength"):
            if getattr(self, name) <= 0:
                raise OpticsError(f"{name} must be > 0")
        if not 0 < self.reduced_length < self.mirror_roc:
            raise OpticsError(
                "paraxial instability: need 0 < t_air + t_d/n_d < mirror ROC")

    @property
    def reduced_length(self) -> float:
        """Diffraction length t_air + t_d/n_d governing the Gaussian mode."""
        return self.air_gap + self.diamond_thickness / self.diamond_index

    @property
    def optical_length(self) -> float:
        """Optical path t_air + n_d * t_d (sets the longitudinal mode number)."""
        return self.air_gap + self.diamond_index * self.diamond_thickness

    def mode_number(self, wavelength: float | None = None) -> int:
        lam = wavelength if wavelength is not None else self.wavelength
        return round(2.0 * self.optical_length / lam)


def _cavity_layers(geom: CavityGeometry, air_gap: float | None = None
                   ) -> tuple[list[Layer], float, float, int]:
    """Full stack from the fiber substrate to the output substrate.

    Returns (layers, n_ambient, n_substrate, index of the air-gap layer).
    """
    gap = geom.air_gap if air_gap is None else air_gap
    lam = geom.wavelength
    inp = list(geom.input_mirror.realized(lam, 1.0))
    out = list(geom.output_mirror.realized(lam, geom.diamond_index))
    # input stack is designed as seen from the air gap; reverse it so the
    # full list runs from the fiber side toward the output substrate
    layers = inp[::-1]
    i_air = len(layers)
    layers.append(Layer(gap, 1.0))
    layers.append(Layer(geom.diamond_thickness, geom.diamond_index))
    layers.extend(out)
    return layers, geom.input_mirror.substrate_index, \
        geom.output_mirror.substrate_index, i_air


def cavity_transmission(geom: CavityGeometry, frequency, air_gap: float | None = None):
    """Stack transmittance versus probe frequency (Hz)."""
    freq = np.asarray(frequency, dtype=float)
    layers, n_amb, n_sub, _ = _cavity_layers(geom, air_gap)
    lam = C0 / freq
    return transfer_matrix(layers, lam, n_amb, n_sub).transmittance


def find_resonances(geom: CavityGeometry, freq_lo: float, freq_hi: float,
                    air_gap: float | None = None, coarse_points: int = 1200,
                    prominence: float = 1e-3) -> list[float]:
    """Transmission maxima in [freq_lo, freq_hi], refined by bounded search.

    Coarse scan followed by golden-section style refinement of each local
    maximum. Returns an empty list when no resonance lies in the window.
    """
    nus = np.linspace(freq_lo, freq_hi, coarse_points)
    T = cavity_transmission(geom, nus, air_gap)
    peak = T.max()
    if peak <= 0:
        return []
    idx = np.nonzero((T[1:-1] > T[:-2]) & (T[1:-1] >= T[2:])
                     & (T[1:-1] > prominence * peak))[0] + 1
    out = []
    for i in idx:
        res = minimize_scalar(
            lambda nu: -cavity_transmission(geom, nu, air_gap),
            bounds=(nus[i - 1], nus[i + 1]), method="bounded",
            options={"xatol": 1e3})
        out.append(float(res.x))
    return sorted(out)


@dataclass(frozen=True)
class DispersionPoint:
    air_gap: float
    frequency: float
    branch: str  # "air-like" | "diamond-like"


def dispersion_slope(geom: CavityGeometry, frequency: float | None = None,
                     gap_step: float = 1e-12) -> float:
    """Local d(nu_res)/d(t_air) in Hz/m by centered difference (1 pm step)."""
    nu0 = frequency if frequency is not None else C0 / geom.wavelength
    span = 0.5e12
    res0 = find_resonances(geom, nu0 - span, nu0 + span)
    if not res0:
        raise OpticsError("no resonance near the requested frequency")
    nu_res = min(res0, key=lambda f: abs(f - nu0))
    half = 0.2e12
    lo = find_resonances(geom, nu_res - half, nu_res + half,
                         air_gap=geom.air_gap - gap_step)
    hi = find_resonances(geom, nu_res - half, nu_res + half,
                         air_gap=geom.air_gap + gap_step)
    if not lo or not hi:
        raise OpticsError("resonance lost while stepping the air gap")
    f_lo = min(lo, key=lambda f: abs(f - nu_res))
    f_hi = min(hi, key=lambda f: abs(f - nu_res))
    return (f_hi - f_lo) / (2.0 * gap_step)


def mode_dispersion(geom: CavityGeometry, gaps: Sequence[float],
                    freq_lo: float, freq_hi: float) -> list[DispersionPoint]:
    """Resonance map over an air-gap grid with air/diamond branch labels.

    Branch character comes from the local slope magnitude: an air-like mode
    tunes faster with the gap than a uniformly filled cavity of the same
    optical length would.
    """
    gaps = np.asarray(gaps, dtype=float)
    if gaps.size and np.any(np.diff(gaps) <= 0):
        raise OpticsError("gap grid must be strictly increasing")
    per_gap = [find_resonances(geom, freq_lo, freq_hi, air_gap=g) for g in gaps]
    points: list[DispersionPoint] = []
    for k, (g, freqs) in enumerate(zip(gaps, per_gap)):
        for f in freqs:
            # slope from the nearest resonance at a neighboring gap
            k2 = k + 1 if k + 1 < len(gaps) else k - 1
            if k2 < 0 or not per_gap[k2]:
                branch = "air-like"
            else:
                f2 = min(per_gap[k2], key=lambda x: abs(x - f))
                slope = (f2 - f) / (gaps[k2] - g)
                uniform = f / (g + geom.diamond_index * geom.diamond_thickness)
                branch = "air-like" if abs(slope) > uniform else "diamond-like"
            points.append(DispersionPoint(float(g), float(f), branch))
    return points


@dataclass
class FieldProfile:
    z_grid: np.ndarray
    intensity: np.ndarray          # |E(z)|^2, normalized to global max 1
    index_profile: np.ndarray
    regions: dict = field(default_factory=dict)  # name -> (z0, z1)
    antinodes_air: np.ndarray | None = None
    antinodes_diamond: np.ndarray | None = None
    emitter_antinode: float | None = None  # diamond antinode nearest output mirror
    off_resonant: bool = False
    diamond_index: float = 2.41


def field_profile(geom: CavityGeometry, wavelength: float | None = None,
                  points_per_wave: int = 60) -> FieldProfile:
    """Standing-wave intensity |E(z)|^2 across the full mirror-to-mirror stack.

    The field is obtained by propagating the transmitted plane wave backward
    through the stack, which keeps E and H continuous at every interface.
    A flag is set when the requested wavelength is visibly off resonance.
    """
    lam = wavelength if wavelength is not None else geom.wavelength
    layers, n_amb, n_sub, i_air = _cavity_layers(geom)

    zs, Es, ns = [], [], []
    EH = np.array([1.0, n_sub], dtype=complex)
    edges = np.concatenate([[0.0], np.cumsum([l.thickness for l in layers])])
    for layer, z0 in zip(reversed(layers), reversed(edges[:-1])):
        n = layer.complex_index
        npts = max(int(layer.thickness / (lam / abs(n)) * points_per_wave), 8)
        zl = np.linspace(0.0, layer.thickness, npts)
        delta = 2.0 * np.pi * n * (layer.thickness - zl) / lam
        E = np.cos(delta) * EH[0] + 1j * np.sin(delta) / n * EH[1]
        zs.append(z0 + zl)
        Es.append(E)
        ns.append(np.full(npts, layer.index))
        M = characteristic_matrix([layer], lam)
        EH = M @ EH
    z = np.concatenate(zs[::-1])
    E = np.concatenate(Es[::-1])
    nn = np.concatenate(ns[::-1])
    order = np.argsort(z, kind="stable")
    z, E, nn = z[order], E[order], nn[order]
    I = np.abs(E) ** 2
    if I.max() == 0:
        raise OpticsError("zero field profile")
    I = I / I.max()

    prof = FieldProfile(z_grid=z, intensity=I, index_profile=nn,
                        diamond_index=geom.diamond_index)
    prof.regions["air"] = (edges[i_air], edges[i_air + 1])
    prof.regions["diamond"] = (edges[i_air + 1], edges[i_air + 2])

    def _antinodes(z0, z1):
        m = (z >= z0) & (z <= z1)
        zi, Ii = z[m], I[m]
        loc = np.nonzero((Ii[1:-1] > Ii[:-2]) & (Ii[1:-1] >= Ii[2:]))[0] + 1
        return zi[loc]

    prof.antinodes_air = _antinodes(*prof.regions["air"])
    prof.antinodes_diamond = _antinodes(*prof.regions["diamond"])
    if prof.antinodes_diamond.size:
        prof.emitter_antinode = float(
            prof.regions["diamond"][1] - prof.antinodes_diamond.max())

    # off-resonance check: transmission at lam much below the local peak
    nu = C0 / lam
    res = find_resonances(geom, nu - 0.5e12, nu + 0.5e12)
    if res:
        nearest = min(res, key=lambda f: abs(f - nu))
        t_here = cavity_transmission(geom, nu)
        t_peak = cavity_transmission(geom, nearest)
        prof.off_resonant = bool(t_here < 0.5 * t_peak)
    else:
        prof.off_resonant = True
    return prof


def effective_length(profile: FieldProfile) -> float:
    """Energy-weighted cavity length, antinode-normalized in the diamond.

    L_eff = 2 * integral n^2 |E|^2 dz / (n_d^2 * max |E|^2 in diamond).
    The factor 2 makes a uniform hard-mirror cavity of length L return
    exactly L (a sin^2 standing wave averages to half its antinode value).
    """
    z, I, nn = profile.z_grid, profile.intensity, profile.index_profile
    if I.max() <= 0:
        raise OpticsError("zero field")
    z0, z1 = profile.regions["diamond"]
    mask = (z >= z0) & (z <= z1)
    if not mask.any():
        raise OpticsError("profile has no diamond region")
    i_max = I[mask].max()
    if i_max <= 0:
        raise OpticsError("zero field in diamond")
    norm = profile.diamond_index ** 2 * i_max
    return float(2.0 * np.trapezoid(nn ** 2 * I, z) / norm)


def beam_waist(geom: CavityGeometry) -> float:
    """Gaussian waist from the reduced diffraction length and the mirror ROC."""
    L = geom.reduced_length
    R = geom.mirror_roc
    if L >= R:
        raise OpticsError("unstable geometry: reduced length >= mirror ROC")
    return float(np.sqrt(geom.wavelength / np.pi * np.sqrt(L * (R - L))))


def mode_volume(waist: float, l_eff: float, wavelength: float) -> float:
    """Mode volume (pi/4) w0^2 L_eff, reported in units of wavelength^3."""
    if waist <= 0 or l_eff <= 0 or wavelength <= 0:
        raise OpticsError("mode volume inputs must be positive")
    return float(np.pi / 4.0 * waist ** 2 * l_eff / wavelength ** 3)


def purcell_factor(wavelength: float, n: float, quality: float,
                   volume_lambda3: float) -> float:
    """F_P = (3 / 4 pi^2) (lambda/n)^3 Q / V with V in lambda^3 units."""
    if min(wavelength, n, quality, volume_lambda3) <= 0:
        raise OpticsError("Purcell inputs must be positive")
    return float(3.0 / (4.0 * np.pi ** 2) / n ** 3 * quality / volume_lambda3)


@dataclass(frozen=True)
class LossBudget:
    finesse: float
    total_loss_ppm: float
    excess_loss_ppm: float
    consistent: bool


def loss_budget(kappa: float, t_in_ppm: float, t_out_ppm: float,
                fsr: float | None = None,
                total_loss_ppm: float | None = None) -> LossBudget:
    """Finesse and round-trip loss split into mirror and excess parts.

    Either the free spectral range or the total round-trip loss must be
    given; the other is derived via finesse = FSR/kappa = 2 pi / loss.
    """
    if kappa <= 0:
        raise OpticsError("kappa must be > 0")
    if (fsr is None) == (total_loss_ppm is None):
        raise OpticsError("give exactly one of fsr or total_loss_ppm")
    if fsr is not None:
        if fsr <= kappa:
            raise OpticsError("need fsr > kappa")
        finesse = fsr / kappa
        total = 2.0 * np.pi / finesse * 1e6
    else:
        total = float(total_loss_ppm)
        finesse = 2.0 * np.pi / (total * 1e-6)
    excess = total - t_in_ppm - t_out_ppm
    return LossBudget(float(finesse), float(total), float(excess), excess >= 0)


def empty_cavity_transmission(t_in_ppm: float, t_out_ppm: float,
                              total_loss_ppm: float, detuning, kappa: float):
    """Lorentzian bare-cavity transmission versus cavity detuning (Hz)."""
    if min(t_in_ppm, t_out_ppm) < 0 or total_loss_ppm <= 0 or kappa <= 0:
        raise OpticsError("invalid loss-budget inputs")
    t_max = 4.0 * t_in_ppm * t_out_ppm / total_loss_ppm ** 2
    d = np.asarray(detuning, dtype=float)
    out = t_max / (1.0 + (2.0 * d / kappa) ** 2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CavityDerived:
    resonance_frequency: float
    l_eff: float
    waist: float
    mode_volume_lambda3: float
    quality: float
    kappa: float
    finesse: float
    total_loss_ppm: float
    purcell: float
    dispersion_slope: float
    mode_number: int


def characterize(geom: CavityGeometry, kappa: float,
                 total_loss_ppm: float) -> CavityDerived:
    """Full derived-quantity report for a geometry plus measured linewidth."""
    nu0 = C0 / geom.wavelength
    res = find_resonances(geom, nu0 - 0.5e12, nu0 + 0.5e12)
    if not res:
        raise OpticsError("no cavity resonance near the design wavelength")
    nu_res = min(res, key=lambda f: abs(f - nu0))
    lam_res = C0 / nu_res
    prof = field_profile(geom, lam_res)
    l_eff = effective_length(prof)
    w0 = beam_waist(geom)
    vol = mode_volume(w0, l_eff, lam_res)
    quality = nu_res / kappa
    budget = loss_budget(kappa, geom.input_mirror.transmittance_ppm,
                         geom.output_mirror.transmittance_ppm,
                         total_loss_ppm=total_loss_ppm)
    fp = purcell_factor(lam_res, geom.diamond_index, quality, vol)
    slope = dispersion_slope(geom, nu_res)
    return CavityDerived(
        resonance_frequency=float(nu_res), l_eff=l_eff, waist=w0,
        mode_volume_lambda3=vol, quality=float(quality), kappa=float(kappa),
        finesse=budget.finesse, total_loss_ppm=budget.total_loss_ppm,
        purcell=fp, dispersion_slope=slope,
        mode_number=geom.mode_number(lam_res))
