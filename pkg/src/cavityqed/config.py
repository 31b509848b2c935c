"""Run configuration: JSON document with schema validation and dotted-path
overrides. Physical defaults are the reference operating point of the
toolkit (emitter at 619 nm in a 80/2000 ppm hybrid cavity).
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TAU_NATURAL = 5.0e-9
GAMMA_NATURAL = 1.0 / (2.0 * np.pi * TAU_NATURAL)          # 31.83 MHz
GAMMA_PRIME = 77.6e6
KAPPA = 6.86e9
TOTAL_LOSS_PPM = 7500.0

DEFAULTS: dict = {
    "geometry": {
        "air_gap": 6.50e-6,
        "diamond_thickness": 3.72e-6,
        "diamond_index": 2.41,
        "mirror_roc": 15.7e-6,
        "wavelength": 619e-9,
    },
    "mirrors": {
        "input_ppm": 80.0,
        "output_ppm": 2000.0,
        "n_low": 1.48,
        "substrate_index": 1.45,
        "total_loss_ppm": TOTAL_LOSS_PPM,
    },
    "system": {
        "g": 0.30e9,
        "kappa": KAPPA,
        "kappa_in": KAPPA * 80.0 / TOTAL_LOSS_PPM,
        "kappa_out": KAPPA * 2000.0 / TOTAL_LOSS_PPM,
        "tau": TAU_NATURAL,
        # gamma_dp = gamma' - gamma with gamma = 1/(2 pi tau)
        "gamma_dp": GAMMA_PRIME - GAMMA_NATURAL,
        "tau_purcell": 1.85e-9,
        "tau_purcell_measured": 2.55e-9,
        "gamma_prime_purcell": 126e6,
        "f_purcell": 6.9,
        "beta0": 0.57,
        "zeta": float(np.cos(np.deg2rad(35.0)) ** 2),
        "delta_gs": 850e9,
        "temperature": 8.0,
    },
    "vibration": {
        "sigma_length": 27e-12,
        "slope_hz_per_m": 46e6 / 1e-12,
        "n_points": 201,
        "span_sigmas": 5.0,
    },
    "emitter_truth": {
        "frequency": 484.3e12,
        "linewidth": GAMMA_PRIME,
        "diffusion_sigma": 0.0,
        "ionization_prob": 0.1,
        "repump_success_prob": 0.9,
    },
    "scan": {
        "span": 0.5e9,
        "points": 241,
        "photons_per_lifetime": 0.0015,
        "peak_rate": 2.0e4,
        "background_rate": 50.0,
        "integration_time": 50e-3,
        "n_scans": 20,
        "n_replications": 100,
        "truth_offset_fraction": 0.0,
        "family_detunings": [0.0],
    },
    "output": {
        "csv_precision": 12,
        "figure_format": "png",
        "figure_dpi": 150,
    },
}

ENV_CONFIG_DIR = "CAVITYQED_CONFIG_DIR"


class ConfigError(ValueError):
    pass


def _validate_against(defaults: dict, doc: dict, path: str = "") -> None:
    for key, value in doc.items():
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key: {here}")
        ref = defaults[key]
        if isinstance(ref, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here} must be a section (object)")
            _validate_against(ref, value, here)
        elif isinstance(ref, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{here} must be a boolean")
        elif isinstance(ref, (int, float)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{here} must be a number")
        elif isinstance(ref, list):
            if not isinstance(value, list):
                raise ConfigError(f"{here} must be a list")
        elif isinstance(ref, str):
            if not isinstance(value, str):
                raise ConfigError(f"{here} must be a string")


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class RunConfig:
    doc: dict

    def __getitem__(self, section: str) -> dict:
        return self.doc[section]

    def get(self, dotted: str):
        node = self.doc
        for part in dotted.split("."):
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"unknown config key: {dotted}")
            node = node[part]
        return node

    def with_override(self, dotted: str, raw: str) -> "RunConfig":
        """Apply one --set KEY=VALUE dotted-path override."""
        parts = dotted.split(".")
        self.get(dotted)  # raises on unknown keys
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        doc = copy.deepcopy(self.doc)
        node = doc
        for p in parts[:-1]:
            node = node[p]
        node[parts[-1]] = value
        _validate_against(DEFAULTS, doc)
        return RunConfig(doc)


def resolve_config_path(path: str | os.PathLike) -> Path:
    """Literal path, or a name looked up in $CAVITYQED_CONFIG_DIR."""
    p = Path(path)
    if p.exists():
        return p
    env = os.environ.get(ENV_CONFIG_DIR)
    if env and not p.is_absolute():
        candidate = Path(env) / p
        if candidate.exists():
            return candidate
    raise ConfigError(f"config file not found: {path}")


def load_config(path: str | os.PathLike | None = None,
                overrides: list[str] | None = None) -> RunConfig:
    """Defaults, optionally merged with a JSON file and --set overrides."""
    doc = copy.deepcopy(DEFAULTS)
    if path is not None:
        p = resolve_config_path(path)
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {p}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        _validate_against(DEFAULTS, user)
        doc = _deep_merge(doc, user)
    cfg = RunConfig(doc)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, raw = item.partition("=")
        cfg = cfg.with_override(key.strip(), raw.strip())
    return cfg
