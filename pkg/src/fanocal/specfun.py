"""Special functions for the photon-number distributions.

Everything here is a pure function of its arguments. Pmf-related helpers
work in log-space so factorials of several hundred do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import SeriesNotConverged, TruncationError
from .probdist import NORM_TOL, ProbDist

HYP_REL_TOL = 1e-14
HYP_MAX_TERMS = 10000
PHASE_NODES = 512

_EXACT_FACTORIAL_MAX = 20
_RESCALE_AT = 1e150


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms_used: int
    converged: bool


def log_factorial(n: int) -> float:
    """ln(n!), from the exact integer product up to 20! and lgamma beyond."""
    if n < 0:
        raise ValueError(f"log_factorial needs n >= 0, got {n}")
    if n <= _EXACT_FACTORIAL_MAX:
        return math.log(math.factorial(n))
    return math.lgamma(n + 1.0)


def log_factorials(n_max: int) -> np.ndarray:
    """Array of ln(n!) for n = 0..n_max."""
    return gammaln(np.arange(n_max + 1) + 1.0)


def laguerre_assoc(n: int, k: float, x: float) -> float:
    """Associated Laguerre polynomial L_n^k(x) by upward recurrence.

    ``k`` may be any real >= 0 (non-integer orders appear for a fractional
    number of thermal modes).
    """
    if n < 0:
        raise ValueError("laguerre_assoc needs n >= 0")
    if k < 0:
        raise ValueError("laguerre_assoc needs k >= 0")
    prev, cur = 1.0, 1.0 + k - x
    if n == 0:
        return prev
    for m in range(1, n):
        prev, cur = cur, ((2 * m + k + 1 - x) * cur - (m + k) * prev) / (m + 1)
    return cur


def log_laguerre_sequence(n_max: int, k: float, x: float) -> np.ndarray:
    """ln L_m^k(x) for m = 0..n_max, valid for x <= 0.

    For non-positive arguments every coefficient of the polynomial is
    positive, so the values are positive and grow with m; the two running
    recurrence values are rescaled whenever they get large.
    """
    if x > 0:
        raise ValueError("log_laguerre_sequence requires x <= 0")
    if k < 0:
        raise ValueError("log_laguerre_sequence needs k >= 0")
    out = np.empty(n_max + 1)
    out[0] = 0.0
    if n_max == 0:
        return out
    offset = 0.0
    prev, cur = 1.0, 1.0 + k - x
    out[1] = math.log(cur)
    for m in range(1, n_max):
        prev, cur = cur, ((2 * m + k + 1 - x) * cur - (m + k) * prev) / (m + 1)
        if cur > _RESCALE_AT:
            offset += math.log(cur)
            prev /= cur
            cur = 1.0
        out[m + 1] = offset + math.log(cur)
    return out


def hyp1f2(a: float, b1: float, b2: float, z: float,
           rel_tol: float = HYP_REL_TOL, max_terms: int = HYP_MAX_TERMS) -> SeriesResult:
    """Power series for the hypergeometric function 1F2(a; b1, b2; z), z >= 0.

    Raises SeriesNotConverged when ``max_terms`` terms are not enough; the
    caller is expected to fall back to direct quadrature in that case.
    """
    for b in (b1, b2):
        if b <= 0 and b == math.floor(b):
            raise ValueError(f"1F2 lower parameter {b} is a non-positive integer")
    if z < 0:
        raise ValueError("hyp1f2 is only implemented for z >= 0")
    if z == 0 or a == 0:
        return SeriesResult(1.0, 1, True)

    total = 1.0
    term = 1.0
    for k in range(max_terms - 1):
        term *= (a + k) / ((b1 + k) * (b2 + k)) * (z / (k + 1))
        total += term
        used = k + 2
        if term == 0.0:
            return SeriesResult(total, used, True)
        nxt = abs((a + k + 1) * z / ((b1 + k + 1) * (b2 + k + 1) * (k + 2)))
        if abs(term) <= rel_tol * abs(total) and nxt < 1.0:
            return SeriesResult(total, used, True)
    raise SeriesNotConverged(
        f"1F2({a}; {b1}, {b2}; {z}) did not converge in {max_terms} terms")


def phase_cos_moment(k: int, b: float) -> float:
    """(1/2pi) * integral over [0, 2pi) of cos(phi)^k exp(-b cos(phi)).

    Closed form in terms of 1F2: even k picks up the even part of the
    exponential, odd k the odd part (hence the sign and the factor b).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    z = b * b / 4.0
    half = math.lgamma(0.5) - math.log(math.pi)
    if k % 2 == 0:
        lg = half + math.lgamma((k + 1) / 2) - math.lgamma(k / 2 + 1)
        return math.exp(lg) * hyp1f2((k + 1) / 2, 0.5, k / 2 + 1, z).value
    if b == 0:
        return 0.0
    lg = half + math.lgamma(k / 2 + 1) - math.lgamma((k + 3) / 2)
    return -b * math.exp(lg) * hyp1f2(k / 2 + 1, 1.5, (k + 3) / 2, z).value


def poisson_log_pmf(n: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Elementwise ln Poisson(n; lam) with broadcasting, lam = 0 allowed."""
    n = np.asarray(n, dtype=float)
    lam = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(n == 0, 0.0, n * np.log(lam))
    return x - lam - gammaln(n + 1.0)


def phase_average_values(alpha1_sq: float, alpha2_sq: float, n: np.ndarray,
                         nodes: int = PHASE_NODES) -> np.ndarray:
    """Phase-averaged Poisson probabilities, trapezoid rule in the phase.

    The integrand is smooth and periodic, so the uniform rule converges
    spectrally in the number of nodes.
    """
    a = alpha1_sq + alpha2_sq
    b = 2.0 * math.sqrt(alpha1_sq * alpha2_sq)
    phi = 2.0 * np.pi * np.arange(nodes) / nodes
    lam = np.maximum(a + b * np.cos(phi), 0.0)
    n = np.asarray(n)
    out = np.empty(n.shape, dtype=float)
    for lo in range(0, n.size, 4096):
        block = n[lo:lo + 4096]
        out[lo:lo + 4096] = np.exp(poisson_log_pmf(block[:, None], lam[None, :])).mean(axis=1)
    return out


def phase_average_pmf_oracle(alpha1_sq: float, alpha2_sq: float, n_max: int,
                             nodes: int = PHASE_NODES) -> ProbDist:
    """Photon-number pmf of a coherent field plus a phase-randomized one.

    Evaluated by quadrature over the relative phase, independently of the
    hypergeometric closed form.
    """
    if alpha1_sq < 0 or alpha2_sq < 0:
        raise ValueError("intensities must be >= 0")
    vals = phase_average_values(alpha1_sq, alpha2_sq, np.arange(n_max + 1), nodes)
    mass = float(vals.sum())
    if mass < 1.0 - NORM_TOL:
        raise TruncationError(
            f"n_max={n_max} holds only {mass:.12f} of the probability mass")
    return ProbDist.from_weights(vals, tail=max(0.0, 1.0 - mass))
