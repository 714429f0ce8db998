"""Self-calibration of the voltage-per-photoelectron coefficient.

For a linear detector the Fano factor of the output voltages obeys
``F_v = (Q/n) * v_mean + gamma``: sweeping the efficiency (e.g. with a
polarizer) and fitting a straight line to (v_mean, F_v) yields ``gamma`` as
the intercept, which then converts voltages into photoelectron counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .detection import ShotSeries
from .errors import FitError
from .probdist import ProbDist

VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class FanoPoint:
    """Dark-corrected voltage statistics of one setting.

    ``usable`` is False when the corrected mean is not positive or the
    corrected variance had to be floored; such points are left out of fits.
    """

    v_mean: float
    fano_v: float
    v_mean_se: float
    fano_se: float
    setting_id: str
    shots: int
    variance: float = math.nan
    floored: bool = False
    usable: bool = True


@dataclass(frozen=True)
class CalibrationFit:
    slope: float
    intercept_gamma: float
    slope_se: float
    intercept_se: float
    r_squared: float
    points: tuple
    chi2: float = math.nan
    weighted: bool = True

    @property
    def gamma(self) -> float:
        return self.intercept_gamma

    @property
    def dof(self) -> int:
        return sum(p.usable for p in self.points) - 2


def _moments(x):
    n = x.size
    mean = float(x.mean())
    d = x - mean
    var = float(d @ d) / (n - 1)
    m3 = float(np.mean(d ** 3))
    m4 = float(np.mean(d ** 4))
    # sampling variance of the unbiased variance estimator
    var_of_var = (m4 - (n - 3) / (n - 1) * var * var) / n
    return mean, var, m3, max(var_of_var, 0.0)


def shot_statistics(series: ShotSeries, dark: ShotSeries) -> FanoPoint:
    """Mean, dark-corrected variance and Fano factor of one shot series.

    Variances use the unbiased (n - 1) estimator. Standard errors propagate
    the sampling errors of both series, including the mean/variance
    covariance (third central moment).
    """
    if not dark.is_dark:
        raise ValueError("the reference series must be a dark run")
    ns, nd = len(series), len(dark)
    if ns < 2 or nd < 2:
        raise ValueError("need at least two shots in both the series and the dark run")

    ms, vs, m3s, vvs = _moments(series.voltages)
    md, vd, m3d, vvd = _moments(dark.voltages)
    v_mean = ms - md
    variance = vs - vd
    floored = variance < VARIANCE_FLOOR
    if floored:
        variance = VARIANCE_FLOOR

    se_mean2 = vs / ns + vd / nd
    se_var2 = vvs + vvd
    cov = m3s / ns + m3d / nd
    usable = v_mean > 0 and not floored
    if v_mean > 0:
        fano = variance / v_mean
        fano_var = (se_var2 / v_mean ** 2 + variance ** 2 * se_mean2 / v_mean ** 4
                    - 2.0 * variance * cov / v_mean ** 3)
        fano_se = math.sqrt(max(fano_var, 0.0))
    else:
        fano, fano_se = math.nan, math.nan
    return FanoPoint(
        v_mean=v_mean, fano_v=fano, v_mean_se=math.sqrt(se_mean2), fano_se=fano_se,
        setting_id=series.setting_id, shots=ns, variance=variance,
        floored=bool(floored), usable=bool(usable))


def fit_fano_line(points: Sequence[FanoPoint], weighted: bool = True) -> CalibrationFit:
    """Straight-line fit of ``fano_v`` against ``v_mean`` over usable points.

    Weighted fits use ``1/fano_se**2`` and report parameter errors from the
    weights themselves; if any usable point lacks a positive standard error,
    or ``weighted`` is False, ordinary least squares is used and the errors are
    scaled by the residual variance.
    """
    points = tuple(points)
    good = [p for p in points if p.usable]
    if len(good) < 2:
        raise FitError(f"need at least 2 usable Fano points, got {len(good)}")
    x = np.array([p.v_mean for p in good])
    y = np.array([p.fano_v for p in good])
    if np.ptp(x) == 0:
        raise FitError("all usable points share the same mean voltage")

    se = np.array([p.fano_se for p in good])
    use_weights = weighted and bool(np.all(np.isfinite(se) & (se > 0)))
    w = 1.0 / se ** 2 if use_weights else np.ones_like(x)

    sw = np.sqrt(w)
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
    intercept, slope = (float(c) for c in coef)

    resid = y - (intercept + slope * x)
    chi2 = float(np.sum(w * resid ** 2))
    cov = np.linalg.inv(design.T @ (design * w[:, None]))
    if not use_weights:
        dof = x.size - 2
        cov = cov * (chi2 / dof if dof > 0 else math.nan)
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    if ss_tot > 0:
        r2 = 1.0 - chi2 / ss_tot
    else:
        r2 = 1.0 if chi2 <= 1e-30 else 0.0
    if ss_tot > 0 and chi2 <= 1e-24 * ss_tot:
        r2 = 1.0

    return CalibrationFit(
        slope=slope, intercept_gamma=intercept,
        slope_se=float(math.sqrt(cov[1, 1])), intercept_se=float(math.sqrt(cov[0, 0])),
        r_squared=float(r2), points=points, chi2=chi2, weighted=use_weights)


def photoelectron_bins(series: ShotSeries, dark_mean: float, gamma: float) -> np.ndarray:
    """Per-shot photoelectron number: voltage over gamma rounded to the
    nearest integer, bins [m - 1/2, m + 1/2), negatives clamped into bin 0."""
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    x = (series.voltages - dark_mean) / gamma
    return np.maximum(np.floor(x + 0.5), 0).astype(np.int64)


def rebin_counts(series: ShotSeries, dark_mean: float, gamma: float) -> np.ndarray:
    return np.bincount(photoelectron_bins(series, dark_mean, gamma))


def rebin_to_photoelectrons(series: ShotSeries, dark_mean: float, gamma: float) -> ProbDist:
    return ProbDist.from_counts(rebin_counts(series, dark_mean, gamma))


def distribution_fidelity(p, q) -> float:
    """Bhattacharyya overlap sum_j sqrt(p_j q_j) of two distributions."""
    p = p.probs if isinstance(p, ProbDist) else np.asarray(p, dtype=float)
    q = q.probs if isinstance(q, ProbDist) else np.asarray(q, dtype=float)
    size = max(p.size, q.size)
    pp = np.zeros(size)
    qq = np.zeros(size)
    pp[: p.size] = p
    qq[: q.size] = q
    return float(min(1.0, max(0.0, np.sum(np.sqrt(pp * qq)))))
