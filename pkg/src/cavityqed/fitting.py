"""Damped Gauss-Newton (Levenberg-Marquardt) least squares with analytic
Jacobians for the spectroscopy models used by the analysis layer.

Residuals are (model - data) / sigma. Covariance is inv(J^T J) of the
weighted problem, unscaled, so the parameter sigmas are meaningful when the
supplied noise model is correct (Poisson weighting for count data).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ensemble import GAUSSIAN_FWHM_FACTOR, LineshapeParams, lineshape_eval


class FitError(ValueError):
    pass


@dataclass
class FitResult:
    parameters: np.ndarray
    sigmas: np.ndarray
    names: tuple[str, ...]
    success: bool
    reduced_chi2: float
    n_iterations: int
    message: str = ""
    window: tuple[float, float] | None = None

    def __getitem__(self, name: str) -> tuple[float, float]:
        i = self.names.index(name)
        return float(self.parameters[i]), float(self.sigmas[i])

    def as_dict(self) -> dict:
        d = {n: {"value": float(v), "sigma": float(s)}
             for n, v, s in zip(self.names, self.parameters, self.sigmas)}
        d["success"] = self.success
        d["reduced_chi2"] = self.reduced_chi2
        if self.window is not None:
            d["window"] = list(self.window)
        return d


def levenberg_marquardt(model: Callable, jacobian: Callable | None,
                        x: np.ndarray, y: np.ndarray, sigma: np.ndarray,
                        p0: np.ndarray, names: tuple[str, ...],
                        max_iter: int = 200, step_tol: float = 1e-10,
                        bounds: list[tuple[float, float]] | None = None
                        ) -> FitResult:
    """Minimize sum(((model(x, p) - y) / sigma)^2) over p.

    The damping parameter is adapted multiplicatively; a missing analytic
    Jacobian falls back to forward differences. Parameters are clipped to
    bounds after each accepted step.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    sigma = np.asarray(sigma, float)
    p = np.asarray(p0, float).copy()
    if np.any(sigma <= 0):
        raise FitError("sigmas must be positive")
    if len(x) <= len(p):
        raise FitError("need more points than parameters")

    def jac(px):
        if jacobian is not None:
            return jacobian(x, px)
        J = np.empty((len(x), len(px)))
        f0 = model(x, px)
        for k in range(len(px)):
            h = 1e-7 * max(abs(px[k]), 1e-12)
            pk = px.copy()
            pk[k] += h
            J[:, k] = (model(x, pk) - f0) / h
        return J

    def clip(px):
        if bounds is not None:
            for k, (lo, hi) in enumerate(bounds):
                px[k] = min(max(px[k], lo), hi)
        return px

    p = clip(p)
    r = (model(x, p) - y) / sigma
    cost = float(r @ r)
    lam = 1e-3
    it = 0
    message = "converged"
    for it in range(1, max_iter + 1):
        J = jac(p) / sigma[:, None]
        g = J.T @ r
        A = J.T @ J
        stepped = False
        for _ in range(50):
            try:
                step = np.linalg.solve(A + lam * np.diag(np.diag(A).clip(1e-30)),
                                       -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            p_new = clip(p + step)
            r_new = (model(x, p_new) - y) / sigma
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                stepped = True
                break
            lam *= 10
            if lam > 1e12:
                break
        if not stepped:
            message = "damping saturated"
            break
        rel = np.abs(p_new - p) / np.maximum(np.abs(p_new), 1e-30)
        dcost = cost - cost_new
        p, r, cost = p_new, r_new, cost_new
        lam = max(lam / 3, 1e-12)
        if rel.max() < step_tol or dcost <= 1e-12 * max(cost, 1.0):
            break
    else:
        message = "max iterations reached"

    J = jac(p) / sigma[:, None]
    dof = len(x) - len(p)
    red = cost / dof
    try:
        cov = np.linalg.inv(J.T @ J)
        sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        ok = np.all(np.isfinite(sig))
    except np.linalg.LinAlgError:
        sig = np.full(len(p), np.nan)
        ok = False
    success = ok and message in ("converged",) or (ok and message == "damping saturated" and cost < 1e-18)
    return FitResult(p, sig, names, bool(success), float(red), it, message)


# ---------------------------------------------------------------- models

def lorentzian_model(x, p):
    """p = (center, fwhm, amplitude, offset); amplitude < 0 describes a dip."""
    c, w, a, b = p
    hw2 = (w / 2.0) ** 2
    return b + a * hw2 / ((x - c) ** 2 + hw2)


def lorentzian_jacobian(x, p):
    c, w, a, b = p
    hw2 = (w / 2.0) ** 2
    d2 = (x - c) ** 2
    den = d2 + hw2
    J = np.empty((len(x), 4))
    J[:, 0] = a * hw2 * 2.0 * (x - c) / den ** 2
    J[:, 1] = a * (w / 2.0) * d2 / den ** 2
    J[:, 2] = hw2 / den
    J[:, 3] = 1.0
    return J


def exponential_model(t, p):
    """p = (tau, amplitude, offset): A exp(-t/tau) + B."""
    tau, a, b = p
    return b + a * np.exp(-t / tau)


def exponential_jacobian(t, p):
    tau, a, b = p
    e = np.exp(-t / tau)
    J = np.empty((len(t), 3))
    J[:, 0] = a * e * t / tau ** 2
    J[:, 1] = e
    J[:, 2] = 1.0
    return J


def voigt_fixed_gaussian_model(gaussian_fwhm: float):
    """Voigt with frozen Gaussian part; p = (center, lorentzian_fwhm,
    amplitude, offset). Falls back to a pure Gaussian at L = 0."""

    def model(x, p):
        c, wl, a, b = p
        if wl <= 0 and gaussian_fwhm <= 0:
            return np.full_like(np.asarray(x, float), b)
        if wl <= 0:
            sig = gaussian_fwhm / GAUSSIAN_FWHM_FACTOR
            return b + a * np.exp(-0.5 * ((x - c) / sig) ** 2)
        params = LineshapeParams(wl, gaussian_fwhm, center=c,
                                 amplitude=a, offset=b)
        return lineshape_eval(params, x)

    return model
