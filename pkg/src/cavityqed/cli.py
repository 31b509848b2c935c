"""Command-line interface: reproducible report pipelines over the toolkit.

Exit codes: 0 success, 2 configuration/input error, 3 numerical failure,
4 pipeline closure failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.constants import c as C0

from . import analysis as an
from . import datafiles as df
from . import ensemble as en
from . import optics as op
from . import plotting as pl
from . import qdynamics as qd
from . import synthgen as sg
from .config import ConfigError, RunConfig, load_config
from .fitting import (FitError, exponential_model, lorentzian_model,
                      voigt_fixed_gaussian_model)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CLOSURE = 4


class ClosureError(RuntimeError):
    pass


# ------------------------------------------------------------ construction

def build_geometry(cfg: RunConfig) -> op.CavityGeometry:
    g, m = cfg["geometry"], cfg["mirrors"]
    mir_in = op.MirrorSpec(m["input_ppm"], substrate_index=m["substrate_index"])
    mir_out = op.MirrorSpec(m["output_ppm"], substrate_index=m["substrate_index"])
    return op.CavityGeometry(
        air_gap=g["air_gap"], diamond_thickness=g["diamond_thickness"],
        diamond_index=g["diamond_index"], mirror_roc=g["mirror_roc"],
        input_mirror=mir_in, output_mirror=mir_out,
        wavelength=g["wavelength"])


def build_system(cfg: RunConfig) -> qd.SystemParams:
    s = cfg["system"]
    gamma = 1.0 / (2.0 * np.pi * s["tau"])
    return qd.SystemParams(
        g=s["g"], kappa=s["kappa"], kappa_in=s["kappa_in"],
        kappa_out=s["kappa_out"], gamma=gamma, gamma_dp=s["gamma_dp"])


def driven_system(cfg: RunConfig) -> qd.SystemParams:
    """System with the drive set from scan.photons_per_lifetime."""
    base = build_system(cfg)
    s, scan = cfg["system"], cfg["scan"]
    t_peak = 4.0 * base.kappa_in * base.kappa_out / base.kappa ** 2
    flux = scan["photons_per_lifetime"] / (s["tau_purcell"] * t_peak)
    return base.driven_at_flux(flux)


def build_vibration(cfg: RunConfig) -> en.VibrationSpec:
    v = cfg["vibration"]
    return en.VibrationSpec(v["sigma_length"], v["slope_hz_per_m"],
                            int(v["n_points"]), v["span_sigmas"])


def build_truth(cfg: RunConfig) -> sg.EmitterTruth:
    t = cfg["emitter_truth"]
    return sg.EmitterTruth(t["frequency"], t["linewidth"],
                           t["diffusion_sigma"], t["ionization_prob"],
                           t["repump_success_prob"])


def build_noise(cfg: RunConfig) -> sg.NoiseSpec:
    s = cfg["scan"]
    return sg.NoiseSpec(s["peak_rate"], s["background_rate"],
                        s["integration_time"])


# ------------------------------------------------------------ commands

def cmd_cavity(cfg: RunConfig, out: Path, workers: int) -> int:
    geom = build_geometry(cfg)
    kappa = cfg["system"]["kappa"]
    total_loss = cfg["mirrors"]["total_loss_ppm"]
    derived = op.characterize(geom, kappa, total_loss)
    lam_res = C0 / derived.resonance_frequency
    df.write_json(out / "cavity_report.json", {
        "resonance_frequency_hz": derived.resonance_frequency,
        "resonance_wavelength_m": lam_res,
        "effective_length_m": derived.l_eff,
        "beam_waist_m": derived.waist,
        "mode_volume_lambda3": derived.mode_volume_lambda3,
        "quality_factor": derived.quality,
        "finesse": derived.finesse,
        "kappa_hz": derived.kappa,
        "total_loss_ppm": derived.total_loss_ppm,
        "purcell_factor": derived.purcell,
        "dispersion_slope_hz_per_m": derived.dispersion_slope,
        "mode_number": derived.mode_number,
    })

    nu0 = derived.resonance_frequency
    gaps = np.linspace(geom.air_gap - 0.25e-6, geom.air_gap + 0.25e-6, 26)
    points = op.mode_dispersion(geom, gaps, nu0 - 12e12, nu0 + 12e12)
    prec = int(cfg["output"]["csv_precision"])
    df.write_csv(out / "dispersion.csv", ["gap_m", "frequency_hz", "branch"],
                 [np.array([p.air_gap for p in points]),
                  np.array([p.frequency for p in points]),
                  np.array([p.branch for p in points])], prec)

    prof = op.field_profile(geom, lam_res)
    df.write_csv(out / "field_profile.csv", ["z_m", "n", "intensity"],
                 [prof.z_grid, prof.index_profile, prof.intensity], prec)

    dpi = int(cfg["output"]["figure_dpi"])
    fmt = cfg["output"]["figure_format"]
    pl.plot_dispersion(points, out / f"dispersion.{fmt}", dpi)
    pl.plot_field_profile(prof, out / f"field_profile.{fmt}", dpi)
    return EXIT_OK


def _averaged_spectrum(params: qd.SystemParams, dets: np.ndarray,
                       ec_detuning: float, vib: en.VibrationSpec) -> np.ndarray:
    offs, wts = vib.detuning_grid()
    de = -dets
    dc = (ec_detuning - dets)[:, None] + offs[None, :]
    grid = qd.weak_drive_transmission(params, de[:, None], dc)
    return grid @ wts


def cmd_sim(cfg: RunConfig, sub: str, out: Path, workers: int) -> int:
    params = driven_system(cfg)
    vib = build_vibration(cfg)
    scan = cfg["scan"]
    prec = int(cfg["output"]["csv_precision"])
    dpi = int(cfg["output"]["figure_dpi"])
    fmt = cfg["output"]["figure_format"]

    if sub == "spectrum":
        dets = np.linspace(-8e9, 8e9, int(scan["points"]))
        family = list(scan["family_detunings"])

        def one(k_d):
            k, d = k_d
            T = _averaged_spectrum(params, dets, d, vib)
            df.write_csv(out / f"spectrum_{k:02d}.csv",
                         ["probe_detuning_hz", "transmission"],
                         [dets, T], prec)
            pl.plot_spectrum(dets, T, out / f"spectrum_{k:02d}.{fmt}",
                             label=f"emitter-cavity detuning {d / 1e9:.2f} GHz",
                             dpi=dpi)

        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(one, enumerate(family)))
        return EXIT_OK

    if sub == "g2":
        taus = np.linspace(0.0, 200.0 / params.kappa, 121)
        curve = qd.g2_transmitted(params, taus)
        df.write_csv(out / "g2.csv", ["tau_s", "g2"], [curve.tau, curve.g2],
                     prec)
        pl.plot_g2(curve.tau, curve.g2, out / f"g2.{fmt}", dpi)
        return EXIT_OK

    if sub == "saturation":
        photons = np.logspace(np.log10(1.5e-3), np.log10(3.0), 8)
        pts = qd.saturation_curve(params, photons,
                                  cfg["system"]["tau_purcell"],
                                  vibration=vib.detuning_grid())
        df.write_csv(out / "saturation.csv",
                     ["photons_per_lifetime", "contrast"],
                     [np.array([p.photons_per_lifetime for p in pts]),
                      np.array([p.contrast for p in pts])], prec)
        pl.plot_saturation([p.photons_per_lifetime for p in pts],
                           [p.contrast for p in pts],
                           out / f"saturation.{fmt}", dpi)
        return EXIT_OK

    raise ConfigError(f"unknown sim subcommand {sub!r}")


def cmd_fom(cfg: RunConfig, out: Path) -> int:
    s = cfg["system"]
    vib = build_vibration(cfg)
    gamma = 1.0 / (2.0 * np.pi * s["tau"])
    gamma_prime = gamma + s["gamma_dp"]
    ratio = en.vibration_overlap_ratio(vib, s["kappa"])
    c_lw, sc_lw = en.cooperativity_from_linewidths(
        s["gamma_prime_purcell"], gamma_prime, gamma, correction=ratio)
    c_coh, sc_coh = en.coherent_cooperativity(
        s["gamma_prime_purcell"], gamma_prime, correction=ratio)
    tau_p, _ = en.purcell_lifetime(s["tau"], c_lw)
    g_fit, _ = en.g_from_cooperativity(c_lw, s["kappa"], gamma)
    bound, sbound = en.alpha_eta_bound(c_lw, s["f_purcell"], s["beta0"],
                                       zeta=s["zeta"])
    df.write_json(out / "fom_report.json", {
        "vibration_overlap_ratio": ratio,
        "gamma_hz": gamma,
        "gamma_prime_hz": gamma_prime,
        "gamma_prime_purcell_hz": s["gamma_prime_purcell"],
        "cooperativity": c_lw,
        "cooperativity_sigma": sc_lw,
        "coherent_cooperativity": c_coh,
        "coherent_cooperativity_sigma": sc_coh,
        "cooperativity_model_natural": en.cooperativity(
            s["g"], s["kappa"], gamma, s["gamma_dp"], "natural"),
        "cooperativity_model_broadened": en.cooperativity(
            s["g"], s["kappa"], gamma, s["gamma_dp"], "broadened"),
        "tau_purcell_s": tau_p,
        "g_hz": g_fit,
        "alpha_eta_bound": bound,
        "alpha_eta_bound_sigma": sbound,
        "thermal_upper_branch_population": qd.thermal_upper_branch_population(
            s["delta_gs"], s["temperature"]),
    })
    return EXIT_OK


def cmd_fit(args, cfg: RunConfig, out: Path) -> int:
    prec = int(cfg["output"]["csv_precision"])
    dpi = int(cfg["output"]["figure_dpi"])
    fmt = cfg["output"]["figure_format"]
    path = Path(args.file)
    stem = path.stem
    if args.model == "exponential":
        hist = df.read_histogram_trace(path)
        res = an.fit_monoexponential(hist, args.window_start,
                                     args.window_length)
        curve = exponential_model(hist.time_bins - res.window[0],
                                  res.parameters)
        curve[hist.time_bins < res.window[0]] = np.nan
        pl.plot_histogram_fit(hist, curve, res.window,
                              out / f"fit_{stem}.{fmt}", dpi)
    else:
        trace = df.read_scan_trace(path)
        if args.model == "lorentzian":
            res = an.fit_lorentzian(trace, mode=args.mode)
            curve = lorentzian_model(trace.frequency, res.parameters)
        else:
            res = an.fit_voigt_fixed_gaussian(trace, args.gaussian_fwhm,
                                              mode=args.mode)
            curve = voigt_fixed_gaussian_model(args.gaussian_fwhm)(
                trace.frequency, res.parameters)
        pl.plot_scan_fit(trace, curve, out / f"fit_{stem}.{fmt}", dpi)
    df.write_json(out / f"fit_{stem}.json", res.as_dict())
    if not res.success:
        raise FitError(f"fit did not converge: {res.message}")
    return EXIT_OK


def _synth_datasets(cfg: RunConfig, seed: int, workers: int,
                    n_scans: int | None = None):
    """Generate the four closure datasets; returns dict of lists."""
    params = driven_system(cfg)
    truth = build_truth(cfg)
    noise = build_noise(cfg)
    scan = cfg["scan"]
    s = cfg["system"]
    n = int(scan["n_scans"]) if n_scans is None else int(n_scans)
    half = scan["span"]
    pts = int(scan["points"])
    grid = truth.frequency + np.linspace(-half, half, pts)

    def tscan(i):
        return sg.gen_transmission_scan(truth, params, grid, noise, seed, i)

    def plescan(i):
        t_ple = sg.EmitterTruth(truth.frequency, truth.linewidth,
                                truth.diffusion_sigma, truth.ionization_prob,
                                truth.repump_success_prob)
        ple_grid = truth.frequency + np.linspace(-0.6e9, 0.6e9, pts)
        ple_noise = sg.NoiseSpec(scan["peak_rate"] / 10.0,
                                 scan["background_rate"],
                                 scan["integration_time"])
        return sg.gen_ple_scan(t_ple, ple_grid, ple_noise, seed + 1, i)

    def hist_on(i):
        return sg.gen_lifetime_histogram(
            s["tau_purcell_measured"], sg.NoiseSpec(fast_amplitude=500.0,
                                                    background_rate=20.0),
            seed + 2, i)

    def hist_off(i):
        return sg.gen_lifetime_histogram(
            s["tau"], sg.NoiseSpec(fast_amplitude=500.0, background_rate=20.0),
            seed + 3, i, n_bins=240)

    def cavity_scan(i):
        # broad bare-cavity scan: Voigt of the cavity Lorentzian and the
        # vibration Gaussian
        rng = sg.scan_rng(seed + 4, i)
        f = truth.frequency + np.linspace(-25e9, 25e9, 2 * pts)
        vibspec = build_vibration(cfg)
        gauss_fwhm = en.gaussian_fwhm_from_vibrations(
            vibspec.sigma_length, vibspec.dispersion_slope)
        shape = en.lineshape_eval(
            en.LineshapeParams(s["kappa"], gauss_fwhm, center=truth.frequency,
                               amplitude=1.0), f)
        expected = (scan["peak_rate"] * shape
                    + scan["background_rate"]) * scan["integration_time"]
        return an.ScanTrace(f, rng.poisson(expected),
                            scan["integration_time"], {"scan_id": i})

    with ThreadPoolExecutor(max_workers=workers) as ex:
        return {
            "transmission": list(ex.map(tscan, range(n))),
            "ple": list(ex.map(plescan, range(n))),
            "lifetime_on": list(ex.map(hist_on, range(n))),
            "lifetime_off": list(ex.map(hist_off, range(n))),
            "cavity": list(ex.map(cavity_scan, range(max(n // 4, 1)))),
        }


def cmd_synth(cfg: RunConfig, seed: int, out: Path, workers: int) -> int:
    data = _synth_datasets(cfg, seed, workers)
    prec = int(cfg["output"]["csv_precision"])
    for i, tr in enumerate(data["transmission"]):
        df.write_scan_trace(out / f"transmission_{i:03d}.csv", tr, prec)
    for i, tr in enumerate(data["ple"]):
        df.write_scan_trace(out / f"ple_{i:03d}.csv", tr, prec)
    for i, h in enumerate(data["lifetime_on"]):
        df.write_histogram_trace(out / f"lifetime_on_{i:03d}.csv", h, prec)
    for i, h in enumerate(data["lifetime_off"]):
        df.write_histogram_trace(out / f"lifetime_off_{i:03d}.csv", h, prec)
    for i, tr in enumerate(data["cavity"]):
        df.write_scan_trace(out / f"cavity_{i:03d}.csv", tr, prec)
    s = cfg["system"]
    truth = build_truth(cfg)
    df.write_json(out / "truth.json", {
        "emitter_frequency_hz": truth.frequency,
        "gamma_prime_hz": truth.linewidth,
        "tau_s": s["tau"],
        "tau_purcell_s": s["tau_purcell_measured"],
        "kappa_hz": s["kappa"],
        "seed": seed,
    })
    return EXIT_OK


def _weighted_mean(values, sigmas):
    v = np.asarray(values, float)
    s = np.asarray(sigmas, float)
    ok = np.isfinite(v) & np.isfinite(s) & (s > 0)
    if not ok.any():
        raise ClosureError("no successful fits to aggregate")
    w = 1.0 / s[ok] ** 2
    return float((v[ok] * w).sum() / w.sum()), float(1.0 / np.sqrt(w.sum()))


def cmd_pipeline(cfg: RunConfig, seed: int, out: Path, workers: int) -> int:
    """synth -> fit -> compare against generator truth.

    For each quantity the weighted mean over all replications must agree
    with truth within twice the typical (median) single-fit sigma, and the
    pooled 1-sigma coverage over all fits must be consistent with a
    correctly estimated uncertainty (60-75%).
    """
    n_rep = int(cfg["scan"]["n_replications"])
    offset = float(cfg["scan"]["truth_offset_fraction"])
    data = _synth_datasets(cfg, seed, workers, n_scans=n_rep)
    s = cfg["system"]
    truth = build_truth(cfg)
    gauss_fwhm = en.gaussian_fwhm_from_vibrations(
        cfg["vibration"]["sigma_length"], cfg["vibration"]["slope_hz_per_m"])

    with ThreadPoolExecutor(max_workers=workers) as ex:
        fits_t = list(ex.map(lambda tr: an.fit_lorentzian(tr, "dip"),
                             data["transmission"]))
        fits_p = list(ex.map(lambda tr: an.fit_lorentzian(tr, "peak"),
                             data["ple"]))
        fits_on = list(ex.map(an.fit_monoexponential, data["lifetime_on"]))
        fits_off = list(ex.map(an.fit_monoexponential, data["lifetime_off"]))
        fits_c = list(ex.map(
            lambda tr: an.fit_voigt_fixed_gaussian(tr, gauss_fwhm, "peak"),
            data["cavity"]))

    # truth for the dip width is the noiseless model expectation, fitted the
    # same way (the dip of the coupled system is not exactly Lorentzian)
    quiet = sg.NoiseSpec(build_noise(cfg).peak_rate * 1e4, 0.0,
                         build_noise(cfg).integration_time)
    grid = truth.frequency + np.linspace(-cfg["scan"]["span"],
                                         cfg["scan"]["span"],
                                         int(cfg["scan"]["points"]))
    quiet_truth = sg.EmitterTruth(truth.frequency, truth.linewidth)
    model_scan = sg.gen_transmission_scan(quiet_truth, driven_system(cfg),
                                          grid, quiet, seed=0)
    width_truth = an.fit_lorentzian(model_scan, "dip")["fwhm"][0]

    rows = []
    n_cover = 0
    n_total = 0

    def check(name, fits, param, truth_value):
        nonlocal n_cover, n_total
        truth_value = truth_value * (1.0 + offset)
        vals = np.array([f[param][0] for f in fits
                         if f is not None and f.success])
        sigs = np.array([f[param][1] for f in fits
                         if f is not None and f.success])
        mean, sig = _weighted_mean(vals, sigs)
        rep_sigma = float(np.median(sigs))
        n_cover += int(np.sum(np.abs(vals - truth_value) <= sigs))
        n_total += len(vals)
        passed = abs(mean - truth_value) <= 2.0 * rep_sigma
        rows.append({"quantity": name, "recovered": mean,
                     "sigma_aggregate": sig, "sigma_single_fit": rep_sigma,
                     "truth": truth_value, "n_fits": len(vals),
                     "pass": bool(passed)})
        return passed

    ok = True
    ok &= check("gamma_prime_purcell_hz", fits_t, "fwhm", width_truth)
    ok &= check("gamma_prime_hz", fits_p, "fwhm", truth.linewidth)
    ok &= check("tau_purcell_s", fits_on, "tau", s["tau_purcell_measured"])
    ok &= check("tau_s", fits_off, "tau", s["tau"])
    ok &= check("kappa_hz", fits_c, "lorentzian_fwhm", s["kappa"])
    coverage = n_cover / n_total
    coverage_ok = 0.60 <= coverage <= 0.75
    ok &= coverage_ok

    prec = int(cfg["output"]["csv_precision"])
    df.write_csv(out / "pipeline_closure.csv",
                 ["quantity", "recovered", "sigma_aggregate",
                  "sigma_single_fit", "truth", "pass"],
                 [np.array([r["quantity"] for r in rows]),
                  np.array([r["recovered"] for r in rows]),
                  np.array([r["sigma_aggregate"] for r in rows]),
                  np.array([r["sigma_single_fit"] for r in rows]),
                  np.array([r["truth"] for r in rows]),
                  np.array([r["pass"] for r in rows])], prec)
    df.write_json(out / "pipeline_closure.json",
                  {"rows": rows, "seed": seed,
                   "coverage_1sigma": coverage,
                   "coverage_pass": bool(coverage_ok),
                   "all_pass": bool(ok)})
    if not ok:
        raise ClosureError("pipeline closure tolerances exceeded; "
                           f"see {out / 'pipeline_closure.json'}")
    return EXIT_OK


# ------------------------------------------------------------ entry point

def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cavityqed",
        description="Cavity QED simulation and analysis pipelines")
    p.add_argument("--config", help="JSON config file (searched in "
                   "$CAVITYQED_CONFIG_DIR if not found literally)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="cavityqed_out", help="output directory")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="K=V", help="dotted-path config override")
    p.add_argument("--workers", type=int, default=4)
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("cavity", help="cavity characterization report")
    psim = sub.add_parser("sim", help="master-equation simulations")
    psim.add_argument("what", choices=["spectrum", "g2", "saturation"])
    sub.add_parser("fom", help="figure-of-merit report")
    pfit = sub.add_parser("fit", help="fit a data file")
    pfit.add_argument("file")
    pfit.add_argument("--model", required=True,
                      choices=["lorentzian", "voigt", "exponential"])
    pfit.add_argument("--mode", default="peak", choices=["peak", "dip"])
    pfit.add_argument("--gaussian-fwhm", type=float, default=2.92e9)
    pfit.add_argument("--window-start", type=float, default=None)
    pfit.add_argument("--window-length", type=float, default=10e-9)
    sub.add_parser("synth", help="generate synthetic datasets")
    sub.add_parser("pipeline", help="synth -> fit -> closure comparison")
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "cavity":
            return cmd_cavity(cfg, out, args.workers)
        if args.command == "sim":
            return cmd_sim(cfg, args.what, out, args.workers)
        if args.command == "fom":
            return cmd_fom(cfg, out)
        if args.command == "fit":
            return cmd_fit(args, cfg, out)
        if args.command == "synth":
            return cmd_synth(cfg, args.seed, out, args.workers)
        if args.command == "pipeline":
            return cmd_pipeline(cfg, args.seed, out, args.workers)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, df.DataFileError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ClosureError as exc:
        print(f"closure failure: {exc}", file=sys.stderr)
        return EXIT_CLOSURE
    except (qd.DynamicsError, op.OpticsError, en.EnsembleError, FitError,
            an.AnalysisError, sg.SynthError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
