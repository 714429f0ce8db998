"""Measurement chain: photon loss, photoelectron-to-voltage conversion and a
shot-by-shot synthetic detector with additive dark noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .probdist import ProbDist
from .specfun import log_factorials
from .states import Coherent, StateModel


@dataclass(frozen=True)
class DetectorConfig:
    """Linear detector: ``v = gamma * m + dark_offset + noise``.

    ``eta`` is the overall detection efficiency (photon to photoelectron),
    ``gamma`` the volts per photoelectron and ``dark_sigma`` the standard
    deviation of the zero-mean Gaussian electronic noise.
    """

    eta: float
    gamma: float
    dark_sigma: float = 0.0
    dark_offset: float = 0.0

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta!r}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma!r}")
        if not self.dark_sigma >= 0:
            raise ValueError(f"dark_sigma must be >= 0, got {self.dark_sigma!r}")
        if not math.isfinite(self.dark_offset):
            raise ValueError("dark_offset must be finite")

    def with_eta(self, eta: float) -> DetectorConfig:
        return DetectorConfig(eta, self.gamma, self.dark_sigma, self.dark_offset)


@dataclass(frozen=True, eq=False)
class ShotSeries:
    voltages: np.ndarray
    setting_id: str = ""
    is_dark: bool = False

    def __post_init__(self):
        v = np.array(self.voltages, dtype=float, copy=True).ravel()
        if v.size < 1:
            raise ValueError("a shot series needs at least one voltage")
        if not np.all(np.isfinite(v)):
            raise ValueError("shot voltages must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "voltages", v)

    def __len__(self):
        return self.voltages.size

    def __eq__(self, other):
        if not isinstance(other, ShotSeries):
            return NotImplemented
        return (self.setting_id == other.setting_id and self.is_dark == other.is_dark
                and np.array_equal(self.voltages, other.voltages))


def loss_matrix(n_max: int, eta: float) -> np.ndarray:
    """``M[m, n] = C(n, m) eta^m (1 - eta)^(n - m)`` for 0 <= m <= n <= n_max."""
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must lie in [0, 1], got {eta!r}")
    size = n_max + 1
    if eta == 1:
        return np.eye(size)
    if eta == 0:
        out = np.zeros((size, size))
        out[0, :] = 1.0
        return out
    lf = log_factorials(n_max)
    m = np.arange(size)[:, None]
    n = np.arange(size)[None, :]
    keep = m <= n
    k = np.where(keep, n - m, 0)
    logw = lf[n] - lf[m] - lf[k] + m * math.log(eta) + k * math.log1p(-eta)
    return np.where(keep, np.exp(logw), 0.0)


def convolve_loss(p_photon: ProbDist, eta: float) -> ProbDist:
    """Photoelectron distribution produced by Bernoulli(eta) detection."""
    if eta == 1:
        return p_photon
    out = loss_matrix(p_photon.n_max, eta) @ p_photon.probs
    return ProbDist.from_weights(out, tail=p_photon.tail)


def loss_moments(n_mean: float, n_var: float, eta: float) -> tuple[float, float]:
    """Mean and variance of the photoelectron count after loss."""
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must lie in [0, 1], got {eta!r}")
    return eta * n_mean, eta * eta * n_var + eta * (1.0 - eta) * n_mean


def _photoelectrons(rng, model, eta, count):
    n = np.asarray(model.draw(rng, count), dtype=np.int64)
    return rng.binomial(n, eta)


def simulate_photoelectrons(model: StateModel, eta: float, count: int, seed) -> np.ndarray:
    """Photoelectron counts, drawn from the same stream ``simulate_shots`` uses."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return _photoelectrons(np.random.default_rng(seed), model, eta, int(count))


def simulate_shots(model: StateModel, det: DetectorConfig, count: int, seed,
                   setting_id: str = "", is_dark: bool = False) -> ShotSeries:
    """One acquisition run of ``count`` shots; deterministic for a given seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    m = _photoelectrons(rng, model, det.eta, int(count))
    v = det.gamma * m + det.dark_offset
    if det.dark_sigma > 0:
        v = v + det.dark_sigma * rng.standard_normal(m.size)
    return ShotSeries(v, setting_id=setting_id, is_dark=is_dark)


def simulate_dark(det: DetectorConfig, count: int, seed, setting_id: str = "dark") -> ShotSeries:
    return simulate_shots(Coherent(0.0), det, count, seed, setting_id=setting_id, is_dark=True)
