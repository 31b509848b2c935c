"""Shared fixtures: the reference cavity geometry and emitter parameters."""

import numpy as np
import pytest

from cavityqed import ensemble as en
from cavityqed import optics as op
from cavityqed import qdynamics as qd

WAVELENGTH = 619e-9
KAPPA = 6.86e9
TOTAL_LOSS_PPM = 7500.0
KAPPA_IN = KAPPA * 80.0 / TOTAL_LOSS_PPM
KAPPA_OUT = KAPPA * 2000.0 / TOTAL_LOSS_PPM
TAU = 5.0e-9
GAMMA = 1.0 / (2.0 * np.pi * TAU)
GAMMA_PRIME = 77.6e6
GAMMA_DP = GAMMA_PRIME - GAMMA
G_COUPLING = 0.30e9
T_BG = 4.0 * KAPPA_IN * KAPPA_OUT / KAPPA ** 2

SIGMA_LENGTH = 27e-12
SLOPE_HZ_PER_M = 46e6 / 1e-12


@pytest.fixture(scope="session")
def geometry() -> op.CavityGeometry:
    return op.CavityGeometry(
        air_gap=6.50e-6, diamond_thickness=3.72e-6, diamond_index=2.41,
        mirror_roc=15.7e-6,
        input_mirror=op.MirrorSpec(80.0),
        output_mirror=op.MirrorSpec(2000.0),
        wavelength=WAVELENGTH)


@pytest.fixture(scope="session")
def derived(geometry) -> op.CavityDerived:
    return op.characterize(geometry, KAPPA, TOTAL_LOSS_PPM)


@pytest.fixture(scope="session")
def system() -> qd.SystemParams:
    return qd.SystemParams(g=G_COUPLING, kappa=KAPPA, kappa_in=KAPPA_IN,
                           kappa_out=KAPPA_OUT, gamma=GAMMA,
                           gamma_dp=GAMMA_DP)


@pytest.fixture(scope="session")
def driven(system) -> qd.SystemParams:
    # weak probe: 0.0015 photons per Purcell lifetime at the bare peak
    flux = 0.0015 / (1.85e-9 * T_BG)
    return system.driven_at_flux(flux)


@pytest.fixture(scope="session")
def vibration() -> en.VibrationSpec:
    return en.VibrationSpec(SIGMA_LENGTH, SLOPE_HZ_PER_M)
