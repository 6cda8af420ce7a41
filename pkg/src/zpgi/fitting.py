"""Weighted least-squares fit of the temporal g2_10 model to a curve.

The model is the closed-form g2_10(tau) with Gaussian-spectrum coherence
mu(tau) = v * exp(-(sigma*tau)**2); free parameters (nbar, sigma, v) with
bounds nbar > 0, sigma > 0, 0 <= v <= 1.  Optimization is derivative-free
from the model's point of view: scipy's trust-region least squares with
finite-difference Jacobians, started from a coarse grid scan so a single
basin suffices.  Parameter errors come from the Gauss-Newton covariance
(J^T J)^-1 of the weighted residuals (absolute data errors, no chi-square
rescaling).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .analytic import PhotonStatsParams, g2_10_tau
from .estimator import CorrelationCurve

__all__ = ["FitResult", "FitError", "fit_g2_10_curve"]


class FitError(RuntimeError):
    """Fit did not converge; carries the residual-norm trace."""

    def __init__(self, message: str, residual_trace=()):
        super().__init__(message)
        self.residual_trace = tuple(residual_trace)


@dataclass(frozen=True)
class FitResult:
    nbar: float
    sigma: float
    v: float
    nbar_se: float
    sigma_se: float
    v_se: float
    residual_norm: float
    n_points: int
    sigma_unidentifiable: bool

    def to_dict(self) -> dict:
        return {
            "nbar": self.nbar,
            "sigma": self.sigma,
            "v": self.v,
            "nbar_se": self.nbar_se,
            "sigma_se": self.sigma_se,
            "v_se": self.v_se,
            "residual_norm": self.residual_norm,
            "n_points": self.n_points,
            "sigma_unidentifiable": self.sigma_unidentifiable,
        }


def _model(taus: np.ndarray, nbar: float, sigma: float, v: float) -> np.ndarray:
    p = PhotonStatsParams(nbar=nbar, sigma=sigma, v=v)
    return np.array([g2_10_tau(t, p) for t in taus])


def fit_g2_10_curve(curve: CorrelationCurve, min_points: int = 5) -> FitResult:
    """Fit (nbar, sigma, v) to an empirical g2_10(lag) curve.

    Uses the finite points with positive errors, weighting by 1/stderr
    (unit weights if the curve carries no usable errors).  Requires at
    least ``min_points`` finite points.
    """
    lags = curve.lags().astype(np.float64)
    g = curve.values()
    se = curve.stderrs()
    ok = np.isfinite(g)
    if ok.sum() < min_points:
        raise FitError(f"only {int(ok.sum())} finite points; need >= {min_points}")
    taus = lags[ok]
    y = g[ok]
    w_se = se[ok]
    usable = np.isfinite(w_se) & (w_se > 0)
    if usable.all():
        weights = 1.0 / w_se
    elif usable.any():
        fill = float(np.median(w_se[usable]))
        weights = 1.0 / np.where(usable, w_se, fill)
    else:
        weights = np.ones_like(y)

    tau_scale = max(float(np.max(np.abs(taus))), 1.0)
    sigma0 = _half_width_sigma(taus, y, tau_scale)
    trace: list[float] = []

    def resid(theta):
        r = (_model(taus, theta[0], theta[1], theta[2]) - y) * weights
        trace.append(float(np.sqrt(np.sum(r**2))))
        return r

    # coarse scan keeps the local solver in the right basin
    best = None
    for nb0 in np.geomspace(0.02, 16.0, 12):
        for v0 in (0.3, 0.7, 1.0):
            theta = (nb0, sigma0, v0)
            c = float(np.sum(resid(theta) ** 2))
            if best is None or c < best[0]:
                best = (c, theta)
    x0 = np.array(best[1])

    res = least_squares(
        resid,
        x0,
        bounds=([1e-9, 1e-12, 0.0], [np.inf, np.inf, 1.0]),
        xtol=1e-14,
        ftol=1e-14,
        gtol=1e-14,
        max_nfev=2000,
    )
    if not res.success and res.status <= 0:
        raise FitError(f"fit did not converge: {res.message}", residual_trace=trace)

    nbar, sigma, v = (float(t) for t in res.x)
    # Gauss-Newton covariance of the weighted problem
    jtj = res.jac.T @ res.jac
    ses = [math.inf] * 3
    sigma_unidentifiable = False
    try:
        cov = np.linalg.inv(jtj)
        d = np.diag(cov)
        if np.all(d >= 0):
            ses = [float(math.sqrt(x)) for x in d]
        else:
            sigma_unidentifiable = True
    except np.linalg.LinAlgError:
        sigma_unidentifiable = True
    # a flat curve (v ~ 0) carries no coherence-time information
    if v < 1e-3 or not math.isfinite(ses[1]) or ses[1] > 100.0 * max(sigma, 1e-12):
        sigma_unidentifiable = True
    return FitResult(
        nbar=nbar,
        sigma=sigma,
        v=v,
        nbar_se=ses[0],
        sigma_se=ses[1],
        v_se=ses[2],
        residual_norm=float(np.sqrt(np.sum(res.fun**2))),
        n_points=int(len(y)),
        sigma_unidentifiable=sigma_unidentifiable,
    )


def _half_width_sigma(taus: np.ndarray, y: np.ndarray, tau_scale: float) -> float:
    """Starting sigma from where the deviation from 1 falls to 1/e of its peak."""
    dev = np.abs(y - 1.0)
    order = np.argsort(np.abs(taus))
    taus_s = taus[order]
    dev_s = dev[order]
    peak = dev_s[0] if dev_s.size else 0.0
    if peak <= 0:
        return 1.0 / tau_scale
    target = peak / math.e
    for t, d in zip(taus_s, dev_s):
        if abs(t) > 0 and d <= target:
            return 1.0 / abs(t)
    return 1.0 / tau_scale
