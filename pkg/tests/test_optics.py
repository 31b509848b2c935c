"""Transfer-matrix optics: analytic oracles and structural invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import c as C0

from cavityqed import optics as op

from conftest import KAPPA, TOTAL_LOSS_PPM, WAVELENGTH


# ------------------------------------------------------------ transfer matrix

def test_empty_stack_is_fresnel_interface():
    n1, n2 = 1.0, 2.41
    res = op.transfer_matrix([], WAVELENGTH, n1, n2)
    r_expect = (n1 - n2) / (n1 + n2)
    assert res.r == pytest.approx(r_expect, rel=1e-12)
    assert res.reflectance + res.transmittance == pytest.approx(1.0, rel=1e-12)


def test_quarter_wave_stack_matches_admittance_formula():
    # N high/low pairs at the design wavelength reduce to an effective
    # admittance Y = (nH/nL)^(2N) * n_sub, R = ((n0 - Y)/(n0 + Y))^2
    n_h, n_l, n_sub, pairs = 2.1, 1.48, 1.45, 7
    stack = op.quarter_wave_stack(n_h, n_l, pairs, WAVELENGTH)
    res = op.transfer_matrix(stack, WAVELENGTH, 1.0, n_sub)
    y = (n_h / n_l) ** (2 * pairs) * n_sub
    r_expect = ((1.0 - y) / (1.0 + y)) ** 2
    assert res.reflectance == pytest.approx(r_expect, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(
    n1=st.floats(1.1, 3.0),
    n2=st.floats(1.1, 3.0),
    t1=st.floats(20e-9, 800e-9),
    t2=st.floats(20e-9, 800e-9),
    lam=st.floats(450e-9, 900e-9),
)
def test_lossless_stack_conserves_energy(n1, n2, t1, t2, lam):
    layers = [op.Layer(t1, n1), op.Layer(t2, n2), op.Layer(t1 / 2, n1)]
    res = op.transfer_matrix(layers, lam, 1.0, 1.45)
    assert res.reflectance + res.transmittance == pytest.approx(1.0, rel=1e-12)


def test_transfer_matrix_vectorizes_over_wavelength():
    layers = [op.Layer(100e-9, 2.0)]
    lams = np.linspace(500e-9, 700e-9, 11)
    res = op.transfer_matrix(layers, lams, 1.0, 1.45)
    for i, lam in enumerate(lams):
        single = op.transfer_matrix(layers, lam, 1.0, 1.45)
        assert res.transmittance[i] == pytest.approx(single.transmittance,
                                                     rel=1e-12)


def test_layer_validation():
    with pytest.raises(op.OpticsError):
        op.Layer(-1e-9, 1.5)
    with pytest.raises(op.OpticsError):
        op.Layer(1e-9, 0.0)


# ------------------------------------------------------------ mirror design

@pytest.mark.parametrize("target_ppm,n_ambient", [(80.0, 1.0), (2000.0, 2.41)])
def test_designed_mirror_hits_ppm_target(target_ppm, n_ambient):
    spec = op.MirrorSpec(target_ppm)
    realized = spec.lumped_transmittance(WAVELENGTH, n_ambient)
    assert realized == pytest.approx(target_ppm, rel=1e-6)


def test_mirror_design_rejects_bad_target():
    with pytest.raises(op.OpticsError):
        op.design_quarter_wave_mirror(0.0, WAVELENGTH, 1.0, 1.45)


# ------------------------------------------------------------ geometry

def test_reduced_and_optical_length(geometry):
    assert geometry.reduced_length == pytest.approx(
        6.50e-6 + 3.72e-6 / 2.41, rel=1e-12)
    assert geometry.optical_length == pytest.approx(
        6.50e-6 + 2.41 * 3.72e-6, rel=1e-12)


def test_unstable_geometry_rejected(geometry):
    with pytest.raises(op.OpticsError):
        op.CavityGeometry(
            air_gap=20e-6, diamond_thickness=3.72e-6, diamond_index=2.41,
            mirror_roc=15.7e-6, input_mirror=geometry.input_mirror,
            output_mirror=geometry.output_mirror, wavelength=WAVELENGTH)


# ------------------------------------------------------------ resonances

def test_resonance_near_design_wavelength(derived):
    lam_res = C0 / derived.resonance_frequency
    assert lam_res == pytest.approx(618.78e-9, abs=0.05e-9)


def test_resonances_are_transmission_maxima(geometry):
    nu0 = C0 / geometry.wavelength
    res = op.find_resonances(geometry, nu0 - 0.5e12, nu0 + 0.5e12)
    assert res
    for nu in res:
        t0 = op.cavity_transmission(geometry, nu)
        t_side = op.cavity_transmission(
            geometry, np.array([nu - 2e9, nu + 2e9]))
        assert t0 > t_side.max()


def test_mode_number_is_50(geometry, derived):
    assert geometry.mode_number(C0 / derived.resonance_frequency) == 50
    assert derived.mode_number == 50


# ------------------------------------------------------------ field profile

def test_field_profile_continuous_and_normalized(geometry, derived):
    prof = op.field_profile(geometry, C0 / derived.resonance_frequency)
    assert prof.intensity.max() == pytest.approx(1.0, rel=1e-12)
    assert not prof.off_resonant
    # tangential E continuity: both layers sample each interface z; the two
    # values at any duplicated coordinate must coincide
    dz = np.diff(prof.z_grid)
    dups = dz == 0.0
    assert dups.any()
    assert np.abs(np.diff(prof.intensity)[dups]).max() < 1e-10


def test_emitter_antinode_depth(geometry, derived):
    prof = op.field_profile(geometry, C0 / derived.resonance_frequency)
    assert prof.antinodes_diamond.size > 0
    # nearest antinode sits about a quarter wave in diamond from the mirror
    quarter = (C0 / derived.resonance_frequency) / (4 * 2.41)
    assert prof.emitter_antinode == pytest.approx(quarter, rel=0.05)


def test_effective_length_uniform_cavity_identity():
    # a hard-mirror uniform sin^2 standing wave must return its own length
    L = 5e-6
    z = np.linspace(0.0, L, 20001)
    intensity = np.sin(2 * np.pi * 10 * z / L) ** 2
    prof = op.FieldProfile(z_grid=z, intensity=intensity,
                           index_profile=np.ones_like(z),
                           regions={"diamond": (0.0, L)}, diamond_index=1.0)
    assert op.effective_length(prof) == pytest.approx(L, rel=1e-6)


def test_effective_length_value(derived):
    assert derived.l_eff == pytest.approx(10.50e-6, rel=0.01)


# ------------------------------------------------------------ mode geometry

def test_beam_waist_matches_gaussian_formula(geometry):
    L = geometry.reduced_length
    R = geometry.mirror_roc
    expect = np.sqrt(WAVELENGTH / np.pi * np.sqrt(L * (R - L)))
    assert op.beam_waist(geometry) == pytest.approx(expect, rel=1e-12)
    assert op.beam_waist(geometry) == pytest.approx(1.24e-6, rel=0.01)


def test_mode_volume_value(derived):
    assert derived.mode_volume_lambda3 == pytest.approx(53.8, rel=0.01)


def test_purcell_factor_scalings():
    base = op.purcell_factor(WAVELENGTH, 2.41, 7e4, 55.0)
    assert op.purcell_factor(WAVELENGTH, 2.41, 14e4, 55.0) == pytest.approx(
        2.0 * base, rel=1e-12)
    assert op.purcell_factor(WAVELENGTH, 2.41, 7e4, 110.0) * 110.0 == \
        pytest.approx(base * 55.0, rel=1e-12)


# ------------------------------------------------------------ dispersion

def test_dispersion_slope_sign_and_magnitude(derived):
    slope = derived.dispersion_slope
    # retracting the gap tunes the resonance up: slope is negative,
    # about -46 MHz per pm at the operating point
    assert slope < 0
    assert abs(slope) * 1e-12 == pytest.approx(46e6, rel=0.15)


def test_mode_dispersion_branches_never_cross(geometry):
    nu0 = C0 / geometry.wavelength
    gaps = np.linspace(6.35e-6, 6.65e-6, 7)
    points = op.mode_dispersion(geometry, gaps, nu0 - 3e12, nu0 + 3e12)
    assert points
    by_gap = {}
    for p in points:
        by_gap.setdefault(p.air_gap, []).append(p.frequency)
    for freqs in by_gap.values():
        freqs = sorted(freqs)
        for lo, hi in zip(freqs, freqs[1:]):
            assert hi - lo > 0.0


# ------------------------------------------------------------ loss budget

def test_loss_budget_finesse():
    b = op.loss_budget(KAPPA, 80.0, 2000.0, total_loss_ppm=TOTAL_LOSS_PPM)
    assert b.finesse == pytest.approx(2 * np.pi / 7.5e-3, rel=1e-12)
    assert b.excess_loss_ppm == pytest.approx(7500.0 - 2080.0, rel=1e-12)
    assert b.consistent


def test_loss_budget_routes_agree():
    b1 = op.loss_budget(KAPPA, 80.0, 2000.0, total_loss_ppm=TOTAL_LOSS_PPM)
    b2 = op.loss_budget(KAPPA, 80.0, 2000.0, fsr=b1.finesse * KAPPA)
    assert b2.total_loss_ppm == pytest.approx(TOTAL_LOSS_PPM, rel=1e-12)
    with pytest.raises(op.OpticsError):
        op.loss_budget(KAPPA, 80.0, 2000.0)


# ------------------------------------------------------ bare transmission

def test_empty_cavity_peak_and_halfwidth():
    t_max = op.empty_cavity_transmission(80.0, 2000.0, TOTAL_LOSS_PPM, 0.0,
                                         KAPPA)
    assert t_max == pytest.approx(4 * 80 * 2000 / 7500.0 ** 2, rel=1e-12)
    t_half = op.empty_cavity_transmission(80.0, 2000.0, TOTAL_LOSS_PPM,
                                          KAPPA / 2.0, KAPPA)
    assert t_half == pytest.approx(t_max / 2.0, rel=1e-12)


def test_empty_cavity_symmetric_lossless_unity():
    assert op.empty_cavity_transmission(100.0, 100.0, 200.0, 0.0, KAPPA) == \
        pytest.approx(1.0, rel=1e-12)


def test_empty_cavity_lorentzian_area():
    d = np.linspace(-600 * KAPPA, 600 * KAPPA, 2_000_001)
    t = op.empty_cavity_transmission(80.0, 2000.0, TOTAL_LOSS_PPM, d, KAPPA)
    t_max = op.empty_cavity_transmission(80.0, 2000.0, TOTAL_LOSS_PPM, 0.0,
                                         KAPPA)
    area = np.trapezoid(t, d)
    assert area == pytest.approx(np.pi * KAPPA * t_max / 2.0, rel=0.01)


# ------------------------------------------------------------ characterize

def test_characterize_quality_and_purcell(derived):
    assert derived.quality == pytest.approx(
        derived.resonance_frequency / KAPPA, rel=1e-12)
    assert derived.quality == pytest.approx(7.06e4, rel=0.01)
    assert derived.purcell == pytest.approx(7.1, abs=0.15)
