"""Classical light-state families and their photon-number statistics.

Six families are supported. Each one is a frozen dataclass that knows its
log-pmf, closed-form moments, the slope Q/n of the Fano line it produces,
and an exact sampler. All of them keep their shape under Bernoulli loss:
losing photons with efficiency eta only rescales the intensity parameters
(``scaled``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import ClassVar, Union

import numpy as np
from scipy.special import gammaln

from .errors import TruncationError
from .probdist import NORM_TOL, ProbDist
from .specfun import (log_factorials, log_laguerre_sequence, phase_average_values,
                      phase_cos_moment, poisson_log_pmf)

TAIL_MASS = NORM_TOL
NMAX_CAP = 100_000

# Absolute per-entry error allowed for the hypergeometric closed form before
# an entry is recomputed by phase quadrature.
CLOSED_FORM_ABS_TOL = 1e-13
CLOSED_FORM_NMAX = 512


def _check_nonneg(obj, *names):
    for name in names:
        v = getattr(obj, name)
        if not (math.isfinite(v) and v >= 0):
            raise ValueError(f"{type(obj).__name__}.{name} must be finite and >= 0, got {v!r}")


def _check_mu(obj):
    if not (math.isfinite(obj.mu) and obj.mu >= 1):
        raise ValueError(f"{type(obj).__name__}.mu must be >= 1, got {obj.mu!r}")


class _Family:
    family: ClassVar[str]

    def params(self) -> dict:
        return asdict(self)

    def scaled(self, eta: float):
        raise NotImplementedError

    def with_mean(self, target: float):
        """Same family and intensity ratios, rescaled to a new mean."""
        m = self.mean()
        if m <= 0:
            raise ValueError("cannot rescale a vacuum state to a non-zero mean")
        return self.scaled(target / m)

    def components(self):
        """The two single-input states mixed at the beam splitter, if any."""
        return None


@dataclass(frozen=True)
class Coherent(_Family):
    alpha_sq: float
    family: ClassVar[str] = "coherent"

    def __post_init__(self):
        _check_nonneg(self, "alpha_sq")

    def mean(self):
        return self.alpha_sq

    def variance(self):
        return self.alpha_sq

    def slope(self):
        return 0.0

    def scaled(self, eta):
        return Coherent(self.alpha_sq * eta)

    def log_pmf_values(self, n_max):
        return poisson_log_pmf(np.arange(n_max + 1), self.alpha_sq)

    def draw(self, rng, count):
        return rng.poisson(self.alpha_sq, count)


@dataclass(frozen=True)
class Thermal1(_Family):
    n_th: float
    family: ClassVar[str] = "thermal1"

    def __post_init__(self):
        _check_nonneg(self, "n_th")

    def mean(self):
        return self.n_th

    def variance(self):
        return self.n_th * (self.n_th + 1)

    def slope(self):
        return 1.0

    def scaled(self, eta):
        return Thermal1(self.n_th * eta)

    def log_pmf_values(self, n_max):
        n = np.arange(n_max + 1)
        if self.n_th == 0:
            return np.where(n == 0, 0.0, -np.inf)
        return n * math.log(self.n_th) - (n + 1) * math.log1p(self.n_th)

    def draw(self, rng, count):
        if self.n_th == 0:
            return np.zeros(count, dtype=np.int64)
        return rng.geometric(1.0 / (1.0 + self.n_th), count) - 1


@dataclass(frozen=True)
class ThermalMulti(_Family):
    """``mu`` equally populated thermal modes carrying ``N_th`` photons in total."""

    N_th: float
    mu: float
    family: ClassVar[str] = "thermal_multi"

    def __post_init__(self):
        _check_nonneg(self, "N_th")
        _check_mu(self)

    def mean(self):
        return self.N_th

    def variance(self):
        return self.N_th * (self.N_th / self.mu + 1)

    def slope(self):
        return 1.0 / self.mu

    def scaled(self, eta):
        return ThermalMulti(self.N_th * eta, self.mu)

    def log_pmf_values(self, n_max):
        n = np.arange(n_max + 1)
        if self.N_th == 0:
            return np.where(n == 0, 0.0, -np.inf)
        t = self.N_th / self.mu
        lf = log_factorials(n_max)
        return (gammaln(n + self.mu) - lf - math.lgamma(self.mu)
                + n * math.log(t) - (n + self.mu) * math.log1p(t))

    def draw(self, rng, count):
        if self.N_th == 0:
            return np.zeros(count, dtype=np.int64)
        if float(self.mu).is_integer():
            p = 1.0 / (1.0 + self.N_th / self.mu)
            return (rng.geometric(p, (count, int(self.mu))) - 1).sum(axis=1)
        return _draw_by_inversion(self, rng, count)


@dataclass(frozen=True)
class PhaseAvgDisplacedCoherent(_Family):
    """Coherent field mixed with a phase-randomized coherent field."""

    alpha1_sq: float
    alpha2_sq: float
    family: ClassVar[str] = "phase_avg_displaced_coherent"

    def __post_init__(self):
        _check_nonneg(self, "alpha1_sq", "alpha2_sq")

    @property
    def a(self):
        return self.alpha1_sq + self.alpha2_sq

    @property
    def b(self):
        return 2.0 * math.sqrt(self.alpha1_sq * self.alpha2_sq)

    def mean(self):
        return self.a

    def variance(self):
        return self.a + 2.0 * self.alpha1_sq * self.alpha2_sq

    def slope(self):
        if self.a == 0:
            return 0.0
        return 2.0 * self.alpha1_sq * self.alpha2_sq / self.a ** 2

    def scaled(self, eta):
        return PhaseAvgDisplacedCoherent(self.alpha1_sq * eta, self.alpha2_sq * eta)

    def components(self):
        return Coherent(self.alpha1_sq), Coherent(self.alpha2_sq)

    def log_pmf_values(self, n_max):
        if self.b == 0:
            return poisson_log_pmf(np.arange(n_max + 1), self.a)
        n_closed = min(n_max, CLOSED_FORM_NMAX)
        vals, err = phase_averaged_closed_form(self.alpha1_sq, self.alpha2_sq, n_closed)
        vals = np.concatenate([vals, np.zeros(n_max - n_closed)])
        err = np.concatenate([err, np.full(n_max - n_closed, np.inf)])
        bad = ~(err <= CLOSED_FORM_ABS_TOL)
        if bad.any():
            n = np.flatnonzero(bad)
            vals[bad] = phase_average_values(self.alpha1_sq, self.alpha2_sq, n)
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(vals, 0.0))

    def draw(self, rng, count):
        phi = rng.uniform(0.0, 2.0 * np.pi, count)
        lam = np.maximum(self.a + self.b * np.cos(phi), 0.0)
        return rng.poisson(lam)


@dataclass(frozen=True)
class DisplacedThermal1(_Family):
    n_th: float
    alpha_sq: float
    family: ClassVar[str] = "displaced_thermal1"

    def __post_init__(self):
        _check_nonneg(self, "n_th", "alpha_sq")

    def mean(self):
        return self.n_th + self.alpha_sq

    def variance(self):
        n, a = self.n_th, self.alpha_sq
        return n + a + n * (n + 2 * a)

    def slope(self):
        n, a = self.n_th, self.alpha_sq
        if a == 0:
            return 1.0
        return n * (n + 2 * a) / (n + a) ** 2

    def scaled(self, eta):
        return DisplacedThermal1(self.n_th * eta, self.alpha_sq * eta)

    def components(self):
        return Thermal1(self.n_th), Coherent(self.alpha_sq)

    def log_pmf_values(self, n_max):
        return _displaced_thermal_log_pmf(self.n_th, 1.0, self.alpha_sq, n_max)

    def draw(self, rng, count):
        return _draw_displaced_thermal(rng, count, self.n_th, 1, self.alpha_sq)


@dataclass(frozen=True)
class DisplacedThermalMulti(_Family):
    """``mu`` thermal modes (``N_th`` total) each displaced by ``alpha_sq`` photons.

    The coherent field therefore carries ``mu * alpha_sq`` photons.
    """

    N_th: float
    mu: float
    alpha_sq: float
    family: ClassVar[str] = "displaced_thermal_multi"

    def __post_init__(self):
        _check_nonneg(self, "N_th", "alpha_sq")
        _check_mu(self)

    def mean(self):
        return self.N_th + self.mu * self.alpha_sq

    def variance(self):
        N, mu, a = self.N_th, self.mu, self.alpha_sq
        return N + mu * a + N * (N / mu + 2 * a)

    def slope(self):
        t, a = self.N_th / self.mu, self.alpha_sq
        if a == 0:
            return 1.0 / self.mu
        return t * (t + 2 * a) / (t + a) ** 2 / self.mu

    def scaled(self, eta):
        return DisplacedThermalMulti(self.N_th * eta, self.mu, self.alpha_sq * eta)

    def components(self):
        return ThermalMulti(self.N_th, self.mu), Coherent(self.mu * self.alpha_sq)

    def log_pmf_values(self, n_max):
        return _displaced_thermal_log_pmf(self.N_th / self.mu, self.mu,
                                          self.mu * self.alpha_sq, n_max)

    def draw(self, rng, count):
        return _draw_displaced_thermal(rng, count, self.N_th, self.mu, self.alpha_sq)


StateModel = Union[Coherent, Thermal1, ThermalMulti, PhaseAvgDisplacedCoherent,
                   DisplacedThermal1, DisplacedThermalMulti]

FAMILIES: dict[str, type] = {
    cls.family: cls
    for cls in (Coherent, Thermal1, ThermalMulti, PhaseAvgDisplacedCoherent,
                DisplacedThermal1, DisplacedThermalMulti)
}


def make_state(family: str, **params) -> StateModel:
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown state family {family!r}; "
                         f"expected one of {', '.join(FAMILIES)}") from None
    names = [f.name for f in fields(cls)]
    missing = [n for n in names if n not in params]
    extra = [k for k in params if k not in names]
    if missing or extra:
        raise ValueError(f"{family} takes parameters {names}; "
                         f"missing {missing}, unexpected {extra}")
    return cls(**{k: float(v) for k, v in params.items()})


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    fano: float
    mandel_q: float


def moments(model: StateModel) -> Moments:
    mean, var = float(model.mean()), float(model.variance())
    fano = var / mean if mean > 0 else math.nan
    return Moments(mean, var, fano, fano - 1.0)


def predicted_slope(model: StateModel) -> float:
    """Slope Q/n of the voltage Fano factor versus mean voltage."""
    return float(model.slope())


def pmf_values(model: StateModel, n_max: int) -> np.ndarray:
    """Raw (not renormalized) probabilities P_0..P_{n_max}."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    return np.exp(model.log_pmf_values(int(n_max)))


def auto_nmax(model: StateModel, tail: float = TAIL_MASS, cap: int = NMAX_CAP) -> int:
    """Smallest n_max whose truncated tail holds less than ``tail`` mass.

    The search window starts at mean + 15 sd and doubles until the mass
    beyond it is negligible; tails are summed from the far end so requests
    below double-precision resolution of 1 - cdf still work.
    """
    mean, sd = model.mean(), math.sqrt(model.variance())
    guess = min(cap, int(math.ceil(mean + 15.0 * sd)) + 10)
    while True:
        vals = pmf_values(model, guess)
        beyond = 1.0 - float(vals.sum())
        after = np.append(np.cumsum(vals[::-1])[::-1][1:], 0.0)
        if beyond < tail:
            extra = max(beyond, 0.0)
        elif beyond < 1e-12 and vals[-1] < 1e-3 * tail:
            extra = 0.0
        elif guess >= cap:
            raise TruncationError(
                f"{model!r}: tail mass {beyond:.3g} still above {tail} "
                f"at the n_max cap {cap}")
        else:
            guess = min(cap, 2 * guess)
            continue
        return int(np.argmax(after + extra < tail))


def pmf(model: StateModel, n_max: int | None = None, tail: float = TAIL_MASS) -> ProbDist:
    """Photon-number distribution truncated at ``n_max`` and renormalized.

    With ``n_max=None`` the support is chosen by :func:`auto_nmax` so that
    less than ``tail`` probability is cut off.
    """
    if n_max is None:
        n_max = auto_nmax(model, tail=tail)
    vals = pmf_values(model, n_max)
    return ProbDist.from_weights(vals, tail=max(0.0, 1.0 - float(vals.sum())))


def sample(model: StateModel, rng_seed, count: int) -> np.ndarray:
    """``count`` i.i.d. photon numbers; deterministic for a given seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(rng_seed)
    return np.asarray(model.draw(rng, int(count)), dtype=np.int64)


def phase_averaged_closed_form(alpha1_sq: float, alpha2_sq: float, n_max: int):
    """Hypergeometric closed form of the phase-averaged pmf.

    Returns ``(values, abs_error_bound)``. The binomial sum alternates in
    sign, so the bound grows roughly like exp(2B) * eps; entries whose bound
    is too large should be taken from quadrature instead.
    """
    a = alpha1_sq + alpha2_sq
    b = 2.0 * math.sqrt(alpha1_sq * alpha2_sq)
    n = np.arange(n_max + 1)
    if a == 0:
        return (n == 0).astype(float), np.zeros(n_max + 1)
    c = np.array([phase_cos_moment(k, b) for k in range(n_max + 1)])
    lf = log_factorials(n_max)
    nn, kk = n[:, None], n[None, :]
    inside = kk <= nn
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        log_binom = np.where(inside, lf[nn] - lf[kk] - lf[np.where(inside, nn - kk, 0)], -np.inf)
        log_ratio = kk * math.log(b / a) if b > 0 else np.where(kk == 0, 0.0, -np.inf)
        terms = np.exp(log_binom + log_ratio) * c[None, :]
        terms = np.where(inside, terms, 0.0)
        pref = np.exp(poisson_log_pmf(n, a))
        vals = pref * terms.sum(axis=1)
        err = pref * np.abs(terms).sum(axis=1) * (n + 1) * 4.0 * np.finfo(float).eps
    err = np.where(np.isfinite(vals) & np.isfinite(err), err, np.inf)
    vals = np.where(np.isfinite(vals), vals, 0.0)
    return vals, err


def _displaced_thermal_log_pmf(t, mu, coh, n_max):
    """Log-pmf of ``mu`` thermal modes of ``t`` photons each plus a coherent
    field of ``coh`` photons in total."""
    n = np.arange(n_max + 1)
    if t == 0:
        return poisson_log_pmf(n, coh)
    x = -coh / (t * (t + 1))
    return (n * math.log(t) - (n + mu) * math.log1p(t) - coh / (t + 1)
            + log_laguerre_sequence(n_max, mu - 1.0, x))


def _draw_displaced_thermal(rng, count, n_th_total, mu, alpha_sq):
    """Poisson draws on the intensity of ``mu`` displaced Gaussian modes."""
    t = n_th_total / mu
    if t == 0:
        return rng.poisson(mu * alpha_sq, count)
    if float(mu).is_integer():
        m = int(mu)
        amp = math.sqrt(alpha_sq) + math.sqrt(t / 2.0) * rng.standard_normal((count, m))
        quad = math.sqrt(t / 2.0) * rng.standard_normal((count, m))
        intensity = (amp ** 2 + quad ** 2).sum(axis=1)
    else:
        # same intensity law (noncentral chi-square in 2*mu dimensions)
        intensity = (t / 2.0) * rng.noncentral_chisquare(2.0 * mu, 2.0 * mu * alpha_sq / t, count)
    return rng.poisson(intensity)


def _draw_by_inversion(model, rng, count):
    cdf = np.cumsum(pmf(model).probs)
    u = rng.uniform(0.0, 1.0, count)
    return np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
