"""Failure-rate fits: error-distance slopes and threshold crossings.

Two estimators cover the quantities the experiments report:

  * `fit_distance` fits log p_L against log(p / p_ref) by weighted
    least squares over a fixed low-rate window, giving the effective
    error distance as the slope.  Points with zero observed failures
    carry no usable log estimate and are dropped (their rate is only
    bounded, see `rule_of_three`).
  * `fit_threshold` collapses curves p_L(p, d) onto the quadratic
    scaling ansatz A + B x + C x^2 with x = (p - p_th) d^(1/nu).  For a
    fixed (p_th, nu) the ansatz is linear, so the search profiles the
    weighted chi^2 over a coarse grid and polishes the best cell with
    Nelder-Mead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

__all__ = [
    "RatePoint",
    "DistanceFit",
    "ThresholdFit",
    "rule_of_three",
    "distance_window",
    "log_spaced",
    "fit_distance",
    "fit_threshold",
]

# fitting window for error-distance slopes, as fractions of p_ref
WINDOW_LO = 10.0 ** -1.0
WINDOW_HI = 10.0 ** -0.6


@dataclass(frozen=True)
class RatePoint:
    """One measured logical failure rate."""

    p: float
    shots: int
    fails: int

    def __post_init__(self):
        if self.shots <= 0:
            raise ValueError("shots must be positive")
        if not 0 <= self.fails <= self.shots:
            raise ValueError("fails must lie in [0, shots]")

    @property
    def rate(self) -> float:
        return self.fails / self.shots

    @property
    def stderr(self) -> float:
        q = self.rate
        return float(np.sqrt(q * (1.0 - q) / self.shots))


@dataclass(frozen=True)
class DistanceFit:
    slope: float
    slope_err: float
    intercept: float
    used: tuple
    dropped: tuple


@dataclass(frozen=True)
class ThresholdFit:
    p_th: float
    nu: float
    coeffs: tuple  # A, B, C of the collapse polynomial
    chi2: float
    n_points: int


def rule_of_three(shots: int) -> float:
    """95% upper bound on the rate after observing zero failures."""
    return 3.0 / shots


def distance_window(p_ref: float) -> tuple:
    return (WINDOW_LO * p_ref, WINDOW_HI * p_ref)


def log_spaced(p_ref: float, n: int = 5) -> np.ndarray:
    """Sample points spanning the slope-fit window, log-uniformly."""
    lo, hi = distance_window(p_ref)
    return np.geomspace(lo, hi, n)


def _wls_line(x, y, sig):
    w = 1.0 / np.asarray(sig) ** 2
    xm = np.average(x, weights=w)
    ym = np.average(y, weights=w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (y - ym)) / sxx
    return slope, ym - slope * xm, float(np.sqrt(1.0 / sxx))


def fit_distance(points, p_ref: float) -> DistanceFit:
    """Slope of log p_L vs log(p / p_ref) inside the fit window."""
    lo, hi = distance_window(p_ref)
    tol = 1e-9
    inside = [q for q in points
              if lo * (1 - tol) <= q.p <= hi * (1 + tol)]
    used = [q for q in inside if q.fails > 0]
    dropped = [q for q in inside if q.fails == 0]
    if len(used) < 2:
        raise ValueError("need at least two points with failures")
    x = np.log(np.array([q.p for q in used]) / p_ref)
    y = np.log(np.array([q.rate for q in used]))
    sig = np.array([q.stderr / q.rate for q in used])  # log-space error
    slope, intercept, err = _wls_line(x, y, sig)
    return DistanceFit(slope=float(slope), slope_err=err,
                       intercept=float(intercept),
                       used=tuple(used), dropped=tuple(dropped))


def _collapse_chi2(p_th, nu, ds, ps, ys, sig):
    x = (ps - p_th) * ds ** (1.0 / nu)
    design = np.stack([np.ones_like(x), x, x * x], axis=1) / sig[:, None]
    coef, *_ = np.linalg.lstsq(design, ys / sig, rcond=None)
    resid = design @ coef - ys / sig
    return float(resid @ resid), coef


def fit_threshold(curves: dict, nu_range=(0.7, 2.2),
                  grid: int = 41) -> ThresholdFit:
    """Crossing point of failure-rate curves, one per code distance.

    `curves` maps distance d to a list of RatePoint measured at that d.
    """
    if len(curves) < 2:
        raise ValueError("need curves for at least two distances")
    ds, ps, ys, sig = [], [], [], []
    for d, pts in curves.items():
        for q in pts:
            if q.fails == 0:
                continue
            ds.append(float(d))
            ps.append(q.p)
            ys.append(q.rate)
            sig.append(q.stderr)
    ds = np.array(ds)
    ps = np.array(ps)
    ys = np.array(ys)
    sig = np.array(sig)
    if len(ps) < 6:
        raise ValueError("too few nonzero points for a collapse fit")

    best = (np.inf, None, None)
    for p_th in np.linspace(ps.min(), ps.max(), grid):
        for nu in np.linspace(nu_range[0], nu_range[1], 16):
            chi2, _ = _collapse_chi2(p_th, nu, ds, ps, ys, sig)
            if chi2 < best[0]:
                best = (chi2, p_th, nu)

    def objective(t):
        if not (ps.min() <= t[0] <= ps.max()):
            return 1e18
        if not (nu_range[0] <= t[1] <= nu_range[1]):
            return 1e18
        return _collapse_chi2(t[0], t[1], ds, ps, ys, sig)[0]

    opt = scipy.optimize.minimize(objective, [best[1], best[2]],
                                  method="Nelder-Mead",
                                  options={"xatol": 1e-6, "fatol": 1e-10})
    p_th, nu = opt.x
    chi2, coef = _collapse_chi2(p_th, nu, ds, ps, ys, sig)
    return ThresholdFit(p_th=float(p_th), nu=float(nu),
                        coeffs=tuple(float(c) for c in coef),
                        chi2=chi2, n_points=len(ps))
